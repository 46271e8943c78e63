//! Property harness: tolerance-based checks over trajectories and profiles,
//! producing structured pass/fail reports.
//!
//! Each check is deterministic given its inputs and prints its tolerance
//! budget in the report, so failures are attributable. Fitted constants
//! (the smoothing prefactor, the barrier truncation level) are reported,
//! never assumed.

use crate::error::{Error, Result};
use crate::exponents::{ExponentVector, SelfSimilarExponents};
use crate::grid::{concentration_violation, Field};
use crate::profiles::{OrthotropicProfile, UpperBarrier};
use crate::solver::Trajectory;
use std::fmt::Write as _;
use std::path::Path;

/// Outcome of one named check: measured quantities, the tolerance in force,
/// and free-form notes.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub measured: Vec<(String, f64)>,
    pub tolerance: f64,
    pub notes: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, passed: bool, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: Vec::new(),
            tolerance,
            notes: String::new(),
        }
    }

    pub fn with(mut self, label: impl Into<String>, value: f64) -> Self {
        self.measured.push((label.into(), value));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(&note);
        self
    }

    pub fn measured_value(&self, label: &str) -> Option<f64> {
        self.measured
            .iter()
            .find(|(l, _)| l == label)
            .map(|&(_, v)| v)
    }

    /// Machine-parseable key = value serialization.
    pub fn kv_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "check = {}", self.name).unwrap();
        writeln!(out, "passed = {}", self.passed).unwrap();
        writeln!(out, "tolerance = {:.17e}", self.tolerance).unwrap();
        for (label, value) in &self.measured {
            writeln!(out, "measured.{label} = {value:.17e}").unwrap();
        }
        if !self.notes.is_empty() {
            writeln!(out, "notes = {}", self.notes).unwrap();
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = dir.join(format!("check_{}.txt", self.name.replace([' ', '/'], "_")));
        std::fs::write(file, self.kv_text())?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {} (tol {:.2e}{})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.tolerance,
            if self.notes.is_empty() {
                String::new()
            } else {
                format!("; {}", self.notes)
            }
        )
    }
}

/// Least-squares slope of y against x restricted to the middle `keep`
/// fraction of the x-window (trims transients and truncation at both ends).
pub fn fit_slope_trimmed(xs: &[f64], ys: &[f64], keep: f64) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least 3 matched samples".into(),
        ));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = (1.0 - keep) / 2.0 * (hi - lo);
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if x < lo + margin || x > hi - margin {
            continue;
        }
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    if n < 3.0 {
        return Err(Error::InvalidParameter(
            "slope fit window too narrow after trimming".into(),
        ));
    }
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept))
}

/// Relative mass drift `max_t |m(t) - m(t0)| / m(t0)` along a trajectory.
pub fn check_mass(traj: &Trajectory, tol: f64) -> CheckReport {
    let m0 = traj.fields[0].integrate();
    if m0 == 0.0 {
        // zero data: pass when it stays zero
        let worst = traj.steps.iter().map(|s| s.mass.abs()).fold(0.0, f64::max);
        return CheckReport::new("mass", worst <= tol, tol).with("max_abs_mass", worst);
    }
    let worst = traj
        .steps
        .iter()
        .map(|s| (s.mass - m0).abs() / m0)
        .fold(0.0, f64::max);
    CheckReport::new("mass", worst <= tol, tol)
        .with("initial_mass", m0)
        .with("max_rel_drift", worst)
}

/// `||u(t)||_q` nonincreasing in time (q = 1, 2 or infinity come from the
/// per-step diagnostics; other q require recorded fields).
pub fn check_lq_decay(traj: &Trajectory, q: f64, tol: f64) -> Result<CheckReport> {
    let series: Vec<f64> = if q == 1.0 {
        traj.steps.iter().map(|s| s.mass).collect()
    } else if q == 2.0 {
        traj.steps.iter().map(|s| s.l2_norm).collect()
    } else if q.is_infinite() {
        traj.steps.iter().map(|s| s.sup_norm).collect()
    } else {
        traj.fields
            .iter()
            .map(|f| f.lq_norm(q))
            .collect::<Result<_>>()?
    };
    let mut worst = 0.0f64;
    for w in series.windows(2) {
        worst = worst.max(w[1] - w[0]);
    }
    let name = if q.is_infinite() {
        "lq_decay_inf".to_string()
    } else {
        format!("lq_decay_{q}")
    };
    Ok(CheckReport::new(name, worst <= tol, tol).with("max_increase", worst))
}

/// Discrete energy J nonincreasing along the flow.
pub fn check_energy_dissipation(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut worst = 0.0f64;
    for w in traj.steps.windows(2) {
        worst = worst.max(w[1].energy - w[0].energy);
    }
    CheckReport::new("energy_dissipation", worst <= tol, tol).with("max_energy_increase", worst)
}

fn matched_fields<'t>(
    ta: &'t Trajectory,
    tb: &'t Trajectory,
) -> Result<Vec<(&'t Field, &'t Field)>> {
    if ta.times.len() != tb.times.len() {
        return Err(Error::InvalidParameter(
            "trajectories have different numbers of recorded fields".into(),
        ));
    }
    for (x, y) in ta.times.iter().zip(&tb.times) {
        if (x - y).abs() > 1e-12 * (1.0 + x.abs()) {
            return Err(Error::InvalidParameter(
                "trajectories recorded at different times".into(),
            ));
        }
    }
    Ok(ta.fields.iter().zip(tb.fields.iter()).collect())
}

/// `||u1(t) - u2(t)||_1` nonincreasing along matched trajectories.
pub fn check_l1_contraction(ta: &Trajectory, tb: &Trajectory, tol: f64) -> Result<CheckReport> {
    let pairs = matched_fields(ta, tb)?;
    let dists: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a.l1_distance(b))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for w in dists.windows(2) {
        worst = worst.max(w[1] - w[0]);
    }
    Ok(CheckReport::new("l1_contraction", worst <= tol, tol)
        .with("initial_distance", dists[0])
        .with("final_distance", *dists.last().unwrap())
        .with("max_increase", worst))
}

/// Comparison principle: `u1(t) <= u2(t)` pointwise (up to tol) at every
/// matched recorded time, including the initial one.
pub fn check_order(ta: &Trajectory, tb: &Trajectory, tol: f64) -> Result<CheckReport> {
    let pairs = matched_fields(ta, tb)?;
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in pairs {
        for (&x, &y) in a.values().iter().zip(b.values()) {
            worst = worst.max(x - y);
        }
    }
    Ok(CheckReport::new("order_preservation", worst <= tol, tol).with("max_excess", worst))
}

/// Smoothing effect: fitted slope of `log ||u(t)||_inf` against `log t` over
/// the middle 60% of the log-time window, compared with `-alpha`, plus the
/// fitted prefactor `C` in `||u(t)||_inf <= C t^{-alpha} M^{pbar alpha / N}`
/// (the constant is not known in closed form; it is reported, not asserted).
pub fn check_smoothing(
    traj: &Trajectory,
    ss: &SelfSimilarExponents,
    mass: f64,
    n: usize,
    rel_tol: f64,
) -> Result<CheckReport> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in &traj.steps {
        if s.time > 0.0 && s.sup_norm > 0.0 {
            xs.push(s.time.ln());
            ys.push(s.sup_norm.ln());
        }
    }
    let (slope, _) = fit_slope_trimmed(&xs, &ys, 0.6)?;
    let rel_err = (slope + ss.alpha).abs() / ss.alpha;
    // fitted prefactor over the same window
    let mut c_hat = 0.0f64;
    let mexp = mass.powf(ss.pbar * ss.alpha / n as f64);
    for s in &traj.steps {
        if s.time > 0.0 {
            c_hat = c_hat.max(s.sup_norm * s.time.powf(ss.alpha) / mexp);
        }
    }
    Ok(
        CheckReport::new("smoothing_exponent", rel_err <= rel_tol, rel_tol)
            .with("fitted_slope", slope)
            .with("expected_slope", -ss.alpha)
            .with("rel_err", rel_err)
            .with("fitted_prefactor", c_hat),
    )
}

/// Every recorded field separately symmetric and nonincreasing.
pub fn check_ssni(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut worst = 0.0f64;
    for f in &traj.fields {
        worst = worst.max(f.ssni_violation());
    }
    CheckReport::new("ssni", worst <= tol, tol).with("max_violation", worst)
}

/// Aleksandrov reflection: when the initial datum dominates its mirror image
/// on the half-space `x_axis > 0`, so does the solution for all recorded
/// times: `u(mirror x, t) <= u(x, t)` there.
pub fn check_aleksandrov(traj: &Trajectory, axis: usize, tol: f64) -> CheckReport {
    let mut worst = f64::NEG_INFINITY;
    for f in &traj.fields {
        let grid = f.grid();
        let stride = grid.strides()[axis];
        let n = grid.cells()[axis];
        let mid = (n - 1) / 2;
        for flat in 0..grid.cell_count() {
            let i = (flat / stride) % n;
            if i > mid {
                let m = grid.mirror_index(flat, axis);
                worst = worst.max(f.values()[m] - f.values()[flat]);
            }
        }
    }
    CheckReport::new("aleksandrov_reflection", worst <= tol, tol).with("max_excess", worst)
}

/// Barrier comparison for a rescaled trajectory: `v(y, tau) <= G(y) + tol`
/// where `G = min(Fbar, fstar)`. The truncation level comes from the two
/// conditions `C1 M^{pbar alpha/N} (1 - e^{-tau1})^{-alpha} <= fstar` and
/// `L1 e^{alpha tau1} <= fstar` with the crossing `tau1` chosen to minimize
/// `fstar` (both sides are monotone in `tau1`).
pub fn barrier_truncation_level(
    ss: &SelfSimilarExponents,
    n: usize,
    mass: f64,
    sup0: f64,
    fitted_c1: f64,
) -> f64 {
    let mexp = mass.powf(ss.pbar * ss.alpha / n as f64);
    let smoothing = |tau: f64| fitted_c1 * mexp * (1.0 - (-tau).exp()).powf(-ss.alpha);
    let linear = |tau: f64| sup0 * (ss.alpha * tau).exp();
    // bisect on smoothing(tau) = linear(tau); smoothing decreases, linear grows
    let (mut lo, mut hi) = (1e-6, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if smoothing(mid) > linear(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau1 = 0.5 * (lo + hi);
    smoothing(tau1).max(linear(tau1))
}

pub fn check_barrier(traj: &Trajectory, barrier: &UpperBarrier, tol: f64) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    for f in &traj.fields {
        let grid = f.grid();
        for flat in 0..grid.cell_count() {
            let y = grid.cell_center(flat);
            let g = barrier.eval_truncated(&y)?;
            worst = worst.max(f.values()[flat] - g);
        }
    }
    Ok(CheckReport::new("upper_barrier", worst <= tol, tol)
        .with("max_excess", worst)
        .with(
            "fstar",
            barrier.fstar.unwrap_or(f64::INFINITY),
        ))
}

/// Concentration comparison against the symmetrized isotropic run: at every
/// matched time the rearranged anisotropic solution is less concentrated
/// than the isotropic one (up to tol), and the norm comparison
/// `||u||_q <= ||U||_q + tol_q` holds for q = 1, 2, infinity.
pub fn check_concentration(
    aniso: &Trajectory,
    iso: &Trajectory,
    tol: f64,
) -> Result<CheckReport> {
    let pairs = matched_fields(aniso, iso)?;
    let mut worst_conc = f64::NEG_INFINITY;
    let mut worst_norm = f64::NEG_INFINITY;
    for (u, big_u) in pairs {
        worst_conc = worst_conc.max(concentration_violation(u, big_u));
        for &q in &[1.0, 2.0, f64::INFINITY] {
            let du = u.lq_norm(q)?;
            let dv = big_u.lq_norm(q)?;
            worst_norm = worst_norm.max(du - dv);
        }
    }
    let passed = worst_conc <= tol && worst_norm <= tol;
    Ok(CheckReport::new("concentration_comparison", passed, tol)
        .with("max_concentration_excess", worst_conc)
        .with("max_norm_excess", worst_norm))
}

/// Convergence to the Barenblatt attractor, measured in the rescaled frame
/// where the attractor is the stationary profile F: the identities
/// `||u(t) - B_M(t)||_1 = ||v(tau) - F||_1` and
/// `t^alpha ||u(t) - B_M(t)||_inf = ||v(tau) - F||_inf` (exact under the
/// self-similar change of variables) turn the decade-long comparison into a
/// fixed-domain one. Requires the error to shrink by `required_factor` from
/// the first to the last recorded tau.
pub fn check_convergence_to_barenblatt(
    rescaled: &Trajectory,
    profile: &OrthotropicProfile,
    required_factor: f64,
) -> Result<CheckReport> {
    if rescaled.fields.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two recorded fields".into(),
        ));
    }
    let grid = rescaled.fields[0].grid().clone();
    let target = Field::from_fn(grid, |y| profile.eval(y))?;
    let mut l1 = Vec::new();
    let mut linf = Vec::new();
    for f in &rescaled.fields {
        l1.push(f.l1_distance(&target)?);
        linf.push(f.linf_distance(&target)?);
    }
    let f1 = l1[0] / l1.last().unwrap();
    let finf = linf[0] / linf.last().unwrap();
    let passed = f1 >= required_factor && finf >= required_factor;
    Ok(
        CheckReport::new("convergence_to_barenblatt", passed, required_factor)
            .with("initial_l1", l1[0])
            .with("final_l1", *l1.last().unwrap())
            .with("l1_reduction_factor", f1)
            .with("initial_linf_scaled", linf[0])
            .with("final_linf_scaled", *linf.last().unwrap())
            .with("linf_reduction_factor", finf),
    )
}

/// Strict positivity in the interior plus per-axis tail decay of a (steady)
/// profile field: the log-log slope along each semi-axis must sit within
/// `slack` (relative) of `-p_i/(2-p_i)`. The fit windows are given per axis
/// as fractions `(lo, hi)` of the half-width, chosen to clear both the bump
/// core and the wall layer (the no-inflow drift depletes the outermost
/// cells, and the asymptotic power law only sets in well past the core).
pub fn check_positivity_and_tails(
    field: &Field,
    exp: &ExponentVector,
    slack: f64,
    windows: &[(f64, f64)],
    interior_margin: usize,
) -> Result<CheckReport> {
    let grid = field.grid();
    if windows.len() != grid.dim() {
        return Err(Error::InvalidParameter(
            "need one fit window per axis".into(),
        ));
    }
    // interior minimum away from the boundary layer
    let mut interior_min = f64::INFINITY;
    for flat in 0..grid.cell_count() {
        let multi = grid.multi_index(flat);
        let inside = multi
            .iter()
            .zip(grid.cells())
            .all(|(&i, &n)| i >= interior_margin && i + interior_margin < n);
        if inside {
            interior_min = interior_min.min(field.values()[flat]);
        }
    }
    let mut report = CheckReport::new("positivity_and_tails", true, slack)
        .with("interior_min", interior_min);
    let mut passed = interior_min > 0.0;
    for axis in 0..grid.dim() {
        let prof = field.axis_profile(axis);
        let expected = -exp.p()[axis] / (2.0 - exp.p()[axis]);
        let l = grid.half_widths()[axis];
        let (lo, hi) = windows[axis];
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &(coord, value) in &prof {
            if value > 0.0 && coord >= lo * l && coord <= hi * l {
                xs.push(coord.ln());
                ys.push(value.ln());
            }
        }
        let (slope, _) = fit_slope_trimmed(&xs, &ys, 1.0).map_err(|_| {
            Error::InvalidParameter(format!(
                "axis {axis}: tail fit window [{:.2}, {:.2}] holds too few positive samples",
                lo * l,
                hi * l
            ))
        })?;
        let rel = (slope - expected).abs() / expected.abs();
        passed = passed && rel <= slack;
        report = report
            .with(format!("axis{axis}_slope"), slope)
            .with(format!("axis{axis}_expected"), expected)
            .with(format!("axis{axis}_rel_err"), rel);
    }
    report.passed = passed;
    Ok(report)
}

/// Write a one-line-per-check summary table.
pub fn write_summary(reports: &[CheckReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = String::from("check,passed,tolerance,notes\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{:.6e},{}",
            r.name,
            r.passed,
            r.tolerance,
            r.notes.replace(',', ";")
        )
        .unwrap();
    }
    std::fs::write(dir.join("summary.csv"), out)?;
    for r in reports {
        r.write_to(dir)?;
    }
    Ok(())
}
