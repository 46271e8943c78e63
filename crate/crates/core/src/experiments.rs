//! Pinned desk-scale experiments.
//!
//! Each `criterion_*` function builds its runs from fixed parameters, applies
//! the verification checks at their stated tolerances, and returns the
//! reports. The acceptance test suite asserts every report; the command-line
//! `verify` subcommand writes the same reports to disk. All randomness is
//! driven by an explicit seed through a SplitMix64 stream, so identical
//! seeds give identical artifacts.

use crate::error::{Error, Result};
use crate::exponents::{
    check_conditions, cianchi_lambda, classify_region, dnl_exponents,
    selfsim_exponents, DnlParameters, ExponentVector,
};
use crate::grid::{Field, TensorGrid};
use crate::profiles::{
    stationary_residual, LowerBarrier, OrthotropicProfile, UpperBarrier,
};
use crate::solver::{
    elliptic_step, evolve, isotropic_evolve, rescaled_evolve, steady_profile, RescaledConfig,
    StepConfig, Trajectory,
};
use crate::verify::{
    barrier_truncation_level, check_aleksandrov, check_barrier, check_concentration,
    check_convergence_to_barenblatt, check_energy_dissipation, check_l1_contraction,
    check_lq_decay, check_mass, check_order, check_positivity_and_tails, check_smoothing,
    check_ssni, CheckReport,
};

/// Default seed for the randomized property checks.
pub const DEFAULT_SEED: u64 = 0x5eed_0a21;

/// SplitMix64: tiny deterministic generator for sampling test points.
struct SplitMix64(u64);

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        Self(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 1: exponent algebra

pub fn criterion_1_exponent_algebra(seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();

    let exp = ExponentVector::new(vec![1.5, 1.5])?;
    let ss = selfsim_exponents(&exp)?;
    let alpha_err = (ss.alpha - 4.0).abs();
    let sigma_err = (ss.sigma[0] - 0.5).abs().max((ss.sigma[1] - 0.5).abs());
    reports.push(
        CheckReport::new("exponents_p15_values", alpha_err < 1e-12 && sigma_err < 1e-12, 1e-12)
            .with("alpha", ss.alpha)
            .with("sigma1", ss.sigma[0])
            .with("sigma2", ss.sigma[1]),
    );

    // time-elimination identity over random admissible exponents
    let mut rng = SplitMix64::new(seed);
    let mut worst_identity = 0.0f64;
    for _ in 0..2000 {
        let n = 1 + (rng.next_u64() % 3) as usize;
        let p: Vec<f64> = (0..n).map(|_| rng.range(1.05, 1.95)).collect();
        let exp = ExponentVector::new(p)?;
        if !check_conditions(&exp).h2 {
            continue;
        }
        let ss = selfsim_exponents(&exp)?;
        for (i, &pi) in exp.p().iter().enumerate() {
            let lhs = ss.alpha * (pi - 1.0) + pi * ss.a[i];
            worst_identity = worst_identity.max((lhs - (ss.alpha + 1.0)).abs());
        }
        worst_identity = worst_identity.max((ss.sigma.iter().sum::<f64>() - 1.0).abs());
    }
    reports.push(
        CheckReport::new("exponents_time_elimination_identity", worst_identity < 1e-12, 1e-12)
            .with("max_abs_defect", worst_identity),
    );

    // (H3) automatic under (H1) + (H2): 10^4 random fast-diffusion samples
    let mut tested = 0usize;
    let mut h3_failures = 0usize;
    while tested < 10_000 {
        let n = 2 + (rng.next_u64() % 2) as usize;
        let p: Vec<f64> = (0..n).map(|_| rng.range(1.0 + 1e-9, 2.0 - 1e-9)).collect();
        let exp = ExponentVector::new(p)?;
        let cond = check_conditions(&exp);
        if !(cond.h1 && cond.h2) {
            continue;
        }
        tested += 1;
        if !cond.h3 {
            h3_failures += 1;
        }
    }
    reports.push(
        CheckReport::new("exponents_h3_automatic", h3_failures == 0, 0.0)
            .with("samples", tested as f64)
            .with("h3_failures", h3_failures as f64),
    );

    // planar classifier agrees with the direct conditions
    let mut disagreements = 0usize;
    for _ in 0..10_000 {
        let p1 = rng.range(1.0 + 1e-6, 2.5);
        let p2 = rng.range(1.0 + 1e-6, 2.5);
        let rc = classify_region(p1, p2)?;
        let cc = check_conditions(&ExponentVector::new(vec![p1, p2])?);
        if rc.hyperbola_margin.abs() < 1e-9 || rc.line_margin.abs() < 1e-9 {
            continue; // exact boundary: flagged distinctly, not compared
        }
        if rc.h2 != cc.h2 || rc.h3 != cc.h3 || rc.h1 != cc.h1 {
            disagreements += 1;
        }
    }
    reports.push(
        CheckReport::new("exponents_region_agreement", disagreements == 0, 0.0)
            .with("disagreements", disagreements as f64),
    );

    // doubly nonlinear reduction at m = 1 matches bitwise to 1e-14 relative
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 3) as usize;
        let p: Vec<f64> = (0..n).map(|_| rng.range(1.05, 1.95)).collect();
        let exp = ExponentVector::new(p.clone())?;
        // the H2 margin conditions the alpha denominator; a 1e-14 relative
        // match needs samples away from the degenerate boundary
        if check_conditions(&exp).h2_margin < 0.05 {
            continue;
        }
        let ss = selfsim_exponents(&exp)?;
        let de = dnl_exponents(&DnlParameters::new(p, vec![1.0; n])?);
        worst_rel = worst_rel.max((de.alpha - ss.alpha).abs() / ss.alpha);
    }
    reports.push(
        CheckReport::new("exponents_dnl_reduction", worst_rel < 1e-14, 1e-14)
            .with("max_rel_diff", worst_rel),
    );

    Ok(reports)
}

// ---------------------------------------------------------------------------
// criterion 2: symmetrization constant sanity

pub fn criterion_2_lambda() -> Result<Vec<CheckReport>> {
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let l = cianchi_lambda(&ExponentVector::new(vec![2.0; n])?)?;
        worst = worst.max((l - 1.0).abs());
    }
    let l_aniso = cianchi_lambda(&ExponentVector::new(vec![1.4, 1.8])?)?;
    Ok(vec![CheckReport::new("lambda_unity_at_p2", worst < 1e-10, 1e-10)
        .with("max_abs_defect", worst)
        .with("lambda_14_18", l_aniso)])
}

// ---------------------------------------------------------------------------
// criterion 3: closed-form correctness

pub fn criterion_3_closed_forms(seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let exp = ExponentVector::new(vec![1.5, 1.5])?;
    let ss = selfsim_exponents(&exp)?;
    let f = OrthotropicProfile::new(2, 1.5, 1.0)?;

    // per-axis flux identity at 100 random off-axis points, analytic form
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let y = [
            rng.sign() * rng.range(0.1, 4.0),
            rng.sign() * rng.range(0.1, 4.0),
        ];
        for axis in 0..2 {
            let d = f.eval_derivative(&y, axis);
            let flux = d.abs().powf(f.p - 2.0) * d;
            let drift = ss.alpha / 2.0 * y[axis] * f.eval(&y);
            worst = worst.max((flux + drift).abs());
        }
    }
    reports.push(
        CheckReport::new("flux_identity", worst < 1e-10, 1e-10).with("max_abs_defect", worst),
    );

    // residual of the explicit profile converges at second order
    let y = [0.8, 1.3];
    let r1 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.04)?;
    let r2 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.02)?;
    let r3 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.01)?;
    let order12 = (r1.abs() / r2.abs()).log2();
    let order23 = (r2.abs() / r3.abs()).log2();
    reports.push(
        CheckReport::new(
            "residual_refinement_order",
            order12 >= 1.8 && order23 >= 1.8,
            1.8,
        )
        .with("residual_h04", r1)
        .with("residual_h02", r2)
        .with("residual_h01", r3)
        .with("order_coarse", order12)
        .with("order_fine", order23),
    );

    Ok(reports)
}

// ---------------------------------------------------------------------------
// criterion 4: barrier residual signs

pub fn criterion_4_barrier_signs(seed: u64) -> Result<Vec<CheckReport>> {
    let exp = ExponentVector::new(vec![1.5, 1.5])?;
    let ss = selfsim_exponents(&exp)?;
    let gammas = UpperBarrier::admissible_gammas(&exp, &ss)?;
    let upper = UpperBarrier::new(gammas, exp.p().to_vec(), None)?;
    let a0 = LowerBarrier::a0(&exp, &ss, 4.0, &[1.0, 1.0])?;
    let lower = LowerBarrier::new(&exp, 4.0, vec![1.0, 1.0], 1.2 * a0)?;

    let mut rng = SplitMix64::new(seed);
    let h = 1e-3;
    let tol = 1e-6;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::INFINITY;
    for _ in 0..100 {
        let y = [
            rng.sign() * rng.range(0.3, 4.0),
            rng.sign() * rng.range(0.3, 4.0),
        ];
        let ru = stationary_residual(|z| upper.eval(z).unwrap(), &exp, &ss, &y, h)?;
        let rl = stationary_residual(|z| lower.eval(z), &exp, &ss, &y, h)?;
        worst_upper = worst_upper.max(ru);
        worst_lower = worst_lower.min(rl);
    }
    let passed = worst_upper <= tol && worst_lower >= -tol;
    Ok(vec![CheckReport::new("barrier_signs", passed, tol)
        .with("a0", a0)
        .with("a_used", 1.2 * a0)
        .with("max_upper_residual", worst_upper)
        .with("min_lower_residual", worst_lower)])
}

// ---------------------------------------------------------------------------
// criterion 5: solver against the closed form

/// Sample a Barenblatt slice as cell averages (3-fold subsampling).
fn barenblatt_field(grid: &TensorGrid, profile: &OrthotropicProfile, t: f64) -> Result<Field> {
    let prof = profile.clone();
    Ok(Field::from_cell_averages(grid.clone(), move |x| prof.barenblatt(x, t).unwrap(), 3)?
        .with_time(t))
}

pub struct BarenblattRun {
    pub traj: Trajectory,
    pub reports: Vec<CheckReport>,
}

fn barenblatt_run(
    dim: usize,
    cells: usize,
    c0: f64,
    h: f64,
    eps: f64,
    l1_tol: f64,
) -> Result<BarenblattRun> {
    let grid = TensorGrid::cube(dim, 40.0, cells)?;
    let exp = ExponentVector::orthotropic(dim, 1.5)?;
    let profile = OrthotropicProfile::new(dim, 1.5, c0)?;
    let u0 = barenblatt_field(&grid, &profile, 1.0)?;
    let cfg = StepConfig {
        h,
        h_growth: 1.0,
        eps,
        newton_tol: 1e-10,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 100,
    };
    let traj = evolve(&u0, 2.0, &cfg, &exp)?;
    let reference = barenblatt_field(&grid, &profile, 2.0)?;
    let rel_l1 = traj.final_field().l1_distance(&reference)? / reference.integrate();

    let mut reports = vec![
        CheckReport::new(format!("barenblatt_{dim}d_l1_error"), rel_l1 < l1_tol, l1_tol)
            .with("rel_l1_error", rel_l1)
            .with("mass", profile.mass()),
        check_mass(&traj, 0.01),
        check_energy_dissipation(&traj, 1e-6 * traj.steps[0].energy),
    ];
    for q in [1.0, 2.0, f64::INFINITY] {
        reports.push(check_lq_decay(&traj, q, 10.0 * cfg.newton_tol)?);
    }
    // eps-refinement: one step with eps and eps/2, reported not asserted
    let half = elliptic_step(&u0, h, &exp, eps / 2.0, None, &cfg)?;
    let full = elliptic_step(&u0, h, &exp, eps, None, &cfg)?;
    let eps_delta = half.l1_distance(&full)? / reference.integrate();
    let last = reports.len() - 1;
    reports[last] = reports[last]
        .clone()
        .with_note(format!("eps-halving step delta {eps_delta:.3e} (relative L1)"));
    Ok(BarenblattRun { traj, reports })
}

pub fn criterion_5_barenblatt_1d() -> Result<Vec<CheckReport>> {
    Ok(barenblatt_run(1, 513, 1.0, 2e-3, 1e-3, 0.02)?.reports)
}

pub fn criterion_5_barenblatt_2d() -> Result<Vec<CheckReport>> {
    // C0 = 0.0572 puts the half-width of the profile at ~1.1 cells at t = 1
    // (mass ~ 18.3); eps = 7e-5 resolves the nonlinear tail flux out to
    // |x| ~ 25 while still damping the boundary outflow enough to honor the
    // 1% mass budget on the truncated box.
    Ok(barenblatt_run(2, 257, 0.0572, 4e-3, 7e-5, 0.04)?.reports)
}

// ---------------------------------------------------------------------------
// criterion 6: smoothing exponent

fn smoothing_run(
    p: f64,
    cells: usize,
    half_width: f64,
    c0: f64,
    eps: f64,
    fit_from: f64,
) -> Result<Vec<CheckReport>> {
    let grid = TensorGrid::cube(2, half_width, cells)?;
    let exp = ExponentVector::orthotropic(2, p)?;
    let ss = selfsim_exponents(&exp)?;
    let profile = OrthotropicProfile::new(2, p, c0)?;
    let mass = profile.mass();
    let u0 = barenblatt_field(&grid, &profile, 1.0)?;
    let cfg = StepConfig {
        h: 5e-3,
        h_growth: 1.045,
        eps,
        newton_tol: 1e-7,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 1_000_000, // diagnostics carry the sup-norm history
    };
    let traj = evolve(&u0, 15.0, &cfg, &exp)?;
    // restrict the fit to the stated window [fit_from, 15]
    let mut window = traj.clone();
    window.steps.retain(|s| s.time >= fit_from);
    let report = check_smoothing(&window, &ss, mass, 2, 0.10)?;
    Ok(vec![report
        .with("p", p)
        .with("mass", mass)
        .with_note(format!("fit window [{fit_from}, 15], middle 60% in log t"))])
}

pub fn criterion_6_smoothing_p15() -> Result<Vec<CheckReport>> {
    smoothing_run(1.5, 513, 40.0, 0.0023, 3e-4, 1.5)
}

pub fn criterion_6_smoothing_p18() -> Result<Vec<CheckReport>> {
    smoothing_run(1.8, 257, 30.0, 0.1815, 1e-3, 1.5)
}

// ---------------------------------------------------------------------------
// criterion 7: contraction / comparison / SSNI / Aleksandrov with controls

fn bump_2d(grid: &TensorGrid, cx: f64, cy: f64, amp: f64, width: f64) -> Result<Field> {
    Field::from_fn(grid.clone(), move |x| {
        amp * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (width * width)).exp()
    })
}

fn reversed(traj: &Trajectory) -> Trajectory {
    let mut fields = traj.fields.clone();
    fields.reverse();
    Trajectory {
        times: traj.times.clone(),
        fields,
        steps: traj.steps.clone(),
    }
}

pub fn criterion_7_comparison_bundle() -> Result<Vec<CheckReport>> {
    let grid = TensorGrid::cube(2, 10.0, 65)?;
    let exp = ExponentVector::new(vec![1.5, 1.5])?;
    let cfg = StepConfig {
        h: 5e-3,
        h_growth: 1.0,
        eps: 1e-3,
        newton_tol: 1e-10,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 6,
    };
    let tol = 10.0 * cfg.newton_tol;
    let t_end = 0.3;

    // six runs
    let low = evolve(&bump_2d(&grid, 0.5, -0.3, 0.6, 1.5)?, t_end, &cfg, &exp)?;
    let high = evolve(&bump_2d(&grid, 0.5, -0.3, 1.0, 2.0)?, t_end, &cfg, &exp)?;
    let crossing = evolve(&bump_2d(&grid, -1.5, 1.0, 1.0, 1.0)?, t_end, &cfg, &exp)?;
    let ssni_bump = evolve(&bump_2d(&grid, 0.0, 0.0, 1.0, 1.5)?, t_end, &cfg, &exp)?;
    let shifted_pos = evolve(&bump_2d(&grid, 1.2, 0.0, 1.0, 1.5)?, t_end, &cfg, &exp)?;
    let shifted_neg = evolve(&bump_2d(&grid, -1.2, 0.0, 1.0, 1.5)?, t_end, &cfg, &exp)?;

    let mut reports = Vec::new();

    let mut r = check_l1_contraction(&low, &high, tol)?;
    r.name = "contraction_positive".into();
    reports.push(r);
    let mut r = check_l1_contraction(&reversed(&low), &reversed(&high), tol)?;
    r.name = "contraction_negative_control".into();
    r.passed = !r.passed;
    r.notes = "expected failure on reversed trajectories".into();
    reports.push(r);

    let mut r = check_order(&low, &high, tol)?;
    r.name = "order_positive".into();
    reports.push(r);
    let mut r = check_order(&crossing, &low, tol)?;
    r.name = "order_negative_control".into();
    r.passed = !r.passed;
    r.notes = "expected failure for crossing initial data".into();
    reports.push(r);

    let mut r = check_ssni(&ssni_bump, 1e-8);
    r.name = "ssni_positive".into();
    reports.push(r);
    let mut r = check_ssni(&shifted_pos, 1e-8);
    r.name = "ssni_negative_control".into();
    r.passed = !r.passed;
    r.notes = "expected failure for a translated bump".into();
    reports.push(r);

    let mut r = check_aleksandrov(&shifted_pos, 0, tol);
    r.name = "aleksandrov_positive".into();
    reports.push(r);
    // symmetric data: reflection inequality is an equality (tight pass)
    let mut r = check_aleksandrov(&ssni_bump, 0, tol);
    r.name = "aleksandrov_tight_symmetric".into();
    reports.push(r);
    let mut r = check_aleksandrov(&shifted_neg, 0, tol);
    r.name = "aleksandrov_negative_control".into();
    r.passed = !r.passed;
    r.notes = "expected failure for a bump shifted into x1 < 0".into();
    reports.push(r);

    Ok(reports)
}

// ---------------------------------------------------------------------------
// criterion 8: concentration comparison against the symmetrized problem

pub fn criterion_8_concentration() -> Result<Vec<CheckReport>> {
    let grid = TensorGrid::cube(2, 15.0, 129)?;
    let exp = ExponentVector::new(vec![1.4, 1.8])?;
    let pbar = exp.pbar();
    let lambda = cianchi_lambda(&exp)?;
    let cfg = StepConfig {
        h: 2e-3,
        h_growth: 1.0,
        eps: 1e-3,
        newton_tol: 1e-10,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 20, // 10 recorded times over [0, 0.4]
    };
    // generic two-bump datum, no symmetry
    let u0 = Field::from_fn(grid.clone(), |x| {
        (-((x[0] - 0.8).powi(2) + 0.7 * (x[1] + 0.5).powi(2))).exp()
            + 0.5 * (-2.0 * ((x[0] + 1.2).powi(2) + (x[1] - 0.9).powi(2))).exp()
    })?;
    let symmetrized = u0.schwarz_symmetrize();

    let aniso = evolve(&u0, 0.4, &cfg, &exp)?;
    let iso = isotropic_evolve(&symmetrized, 0.4, &cfg, pbar, lambda)?;

    let tol = 0.5 * (grid.max_spacing() + cfg.newton_tol);
    let mut r = check_concentration(&aniso, &iso, tol)?;
    r = r
        .with("lambda", lambda)
        .with("pbar", pbar)
        .with_note("tol = 0.5 (h + newton_tol)".to_string());
    // at t = 0 the curves coincide by construction
    let t0_gap = crate::grid::concentration_violation(&aniso.fields[0], &iso.fields[0]);
    r = r.with("t0_curve_gap", t0_gap);
    Ok(vec![r])
}

// ---------------------------------------------------------------------------
// criterion 9: anisotropic self-similar profile

pub struct SteadyProfileRun {
    pub profile: Field,
    pub traj: Trajectory,
    pub reports: Vec<CheckReport>,
}

pub fn criterion_9_steady_profile() -> Result<SteadyProfileRun> {
    let exp = ExponentVector::new(vec![1.4, 1.8])?;
    let ss = selfsim_exponents(&exp)?;
    // the x2 tail needs room: its asymptotic slope -9 only sets in around
    // |y2| ~ 15-25 for a unit-mass profile
    let grid = TensorGrid::new(vec![48.0, 30.0], vec![257, 257])?;
    let mass = 1.0;
    // SSNI start: anisotropic Gaussian of unit mass
    let (a, b) = (4.8, 1.6);
    let norm = mass / (2.0 * std::f64::consts::PI * a * b);
    let v0 = Field::from_fn(grid.clone(), move |y| {
        norm * (-(y[0] / a).powi(2) / 2.0 - (y[1] / b).powi(2) / 2.0).exp()
    })?;
    let rcfg = RescaledConfig::new(exp.clone(), 0.05, 1.0)?;
    let cfg = StepConfig {
        h: rcfg.tau_step,
        h_growth: 1.0,
        eps: 1e-9,
        newton_tol: 1e-9,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 50,
    };
    let (profile, traj) = steady_profile(&v0, &rcfg, &cfg, 1e-4, 60.0)?;

    let mut reports = Vec::new();
    let final_delta = traj.steps.last().map(|s| s.delta_l1).unwrap_or(f64::NAN);
    reports.push(
        CheckReport::new("steady_converged", final_delta < 1e-4 * mass, 1e-4)
            .with("final_delta_l1", final_delta)
            .with("tau_elapsed", traj.final_time()),
    );
    reports.push(
        CheckReport::new("steady_mass", (profile.integrate() - mass).abs() < 0.01 * mass, 0.01)
            .with("mass", profile.integrate()),
    );
    let mut ssni = check_ssni(
        &Trajectory {
            times: vec![profile.time.unwrap_or(0.0)],
            fields: vec![profile.clone()],
            steps: vec![],
        },
        1e-8,
    );
    ssni.name = "steady_ssni".into();
    reports.push(ssni);
    reports.push(check_positivity_and_tails(
        &profile,
        &exp,
        0.15,
        &[(0.35, 0.75), (0.52, 0.85)],
        6,
    )?);

    // the steady profile stays below its truncated upper barrier
    let gammas = UpperBarrier::admissible_gammas(&exp, &ss)?;
    let c1_hat = traj
        .steps
        .iter()
        .map(|s| s.sup_norm * (1.0 - (-(s.time)).exp()).powf(ss.alpha))
        .fold(0.0, f64::max)
        / mass.powf(ss.pbar * ss.alpha / 2.0);
    let fstar = barrier_truncation_level(&ss, 2, mass, v0.lq_norm(f64::INFINITY)?, c1_hat);
    let barrier = UpperBarrier::new(gammas, exp.p().to_vec(), Some(fstar))?;
    let steady_traj = Trajectory {
        times: vec![profile.time.unwrap_or(0.0)],
        fields: vec![profile.clone()],
        steps: vec![],
    };
    let tol = 1e-3 * profile.lq_norm(f64::INFINITY)?;
    let mut br = check_barrier(&steady_traj, &barrier, tol)?;
    br.name = "steady_under_barrier".into();
    br = br.with("fitted_c1", c1_hat);
    reports.push(br);

    Ok(SteadyProfileRun {
        profile,
        traj,
        reports,
    })
}

// ---------------------------------------------------------------------------
// criterion 10: asymptotic convergence to the Barenblatt solution

pub fn criterion_10_asymptotics() -> Result<Vec<CheckReport>> {
    let exp = ExponentVector::new(vec![1.5, 1.5])?;
    let grid = TensorGrid::cube(2, 40.0, 257)?;
    let mass = 4.0;
    let profile = OrthotropicProfile::with_mass(2, 1.5, mass)?;
    // square bump of the same mass: u0 = 0.25 on [-2, 2]^2
    let v0 = Field::from_fn(grid.clone(), |y| {
        if y[0].abs() <= 2.0 && y[1].abs() <= 2.0 {
            0.25
        } else {
            0.0
        }
    })?;
    let rcfg = RescaledConfig::new(exp.clone(), 0.02, 1.0)?;
    let cfg = StepConfig {
        h: rcfg.tau_step,
        h_growth: 1.0,
        eps: 1e-4,
        newton_tol: 1e-9,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 17,
    };
    let tau_end = 30.0f64.ln();
    let traj = rescaled_evolve(&v0, tau_end, &rcfg, &cfg)?;
    let mut reports = Vec::new();
    let mut conv = check_convergence_to_barenblatt(&traj, &profile, 3.0)?;
    conv = conv.with_note(
        "rescaled frame: ||v - F||_1 = ||u(t) - B_M(t)||_1 and ||v - F||_inf = t^alpha ||u - B||_inf",
    );
    reports.push(conv);

    // negative control: mass mismatch plateaus at the mass gap
    let v0_small = Field::from_fn(grid.clone(), |y| {
        if y[0].abs() <= 2.0 && y[1].abs() <= 2.0 {
            0.1875 // mass 3 against the mass-4 profile
        } else {
            0.0
        }
    })?;
    let traj_small = rescaled_evolve(&v0_small, tau_end, &rcfg, &cfg)?;
    let target = Field::from_fn(grid, |y| profile.eval(y))?;
    let final_l1 = traj_small.final_field().l1_distance(&target)?;
    let gap = 1.0; // |4 - 3|
    let plateaued = final_l1 >= 0.8 * gap;
    reports.push(
        CheckReport::new("asymptotics_mass_mismatch_control", plateaued, 0.8 * gap)
            .with("final_l1", final_l1)
            .with("mass_gap", gap)
            .with_note("L1 distance must plateau at the conserved mass gap"),
    );
    Ok(reports)
}

// ---------------------------------------------------------------------------
// criterion 11: region scan

pub struct RegionRow {
    pub p1: f64,
    pub p2: f64,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub label: &'static str,
}

pub fn region_scan(steps: usize) -> Result<Vec<RegionRow>> {
    let mut rows = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            let p1 = 1.0 + (i as f64 + 0.5) * 1.5 / steps as f64;
            let p2 = 1.0 + (j as f64 + 0.5) * 1.5 / steps as f64;
            let rc = classify_region(p1, p2)?;
            rows.push(RegionRow {
                p1,
                p2,
                h1: rc.h1,
                h2: rc.h2,
                h3: rc.h3,
                label: match rc.label {
                    crate::exponents::RegionLabel::Admissible => "admissible",
                    crate::exponents::RegionLabel::Boundary => "boundary",
                    crate::exponents::RegionLabel::FailsH1 => "fails-h1",
                    crate::exponents::RegionLabel::FailsH2 => "fails-h2",
                    crate::exponents::RegionLabel::FailsH3 => "fails-h3",
                },
            });
        }
    }
    Ok(rows)
}

pub fn criterion_11_region_scan() -> Result<Vec<CheckReport>> {
    let rows = region_scan(150)?;
    // agreement with the direct conditions at every scanned point
    let mut disagreements = 0usize;
    for row in &rows {
        let cc = check_conditions(&ExponentVector::new(vec![row.p1, row.p2])?);
        if row.label != "boundary" && (row.h1 != cc.h1 || row.h2 != cc.h2 || row.h3 != cc.h3) {
            disagreements += 1;
        }
    }
    // the hyperbola passes through (2,1), (4/3,4/3), (1,2)
    let mut anchor_defect = 0.0f64;
    for (p1, p2) in [(2.0f64, 1.0f64), (4.0 / 3.0, 4.0 / 3.0), (1.0, 2.0)] {
        anchor_defect =
            anchor_defect.max(((p1 - 2.0 / 3.0) * (p2 - 2.0 / 3.0) - 4.0 / 9.0).abs());
    }
    // (4/3, 4/3) itself is a boundary failure of the strict (H2)
    let corner = classify_region(4.0 / 3.0, 4.0 / 3.0)?;
    // points exactly on the H3 line are flagged as boundary
    let on_line = classify_region(2.2, 1.1)?;
    let passed = disagreements == 0
        && anchor_defect < 1e-12
        && !corner.h2
        && corner.label == crate::exponents::RegionLabel::Boundary
        && on_line.label == crate::exponents::RegionLabel::Boundary;
    Ok(vec![CheckReport::new("region_scan", passed, 1e-12)
        .with("points", rows.len() as f64)
        .with("disagreements", disagreements as f64)
        .with("hyperbola_anchor_defect", anchor_defect)])
}

// ---------------------------------------------------------------------------
// suites

pub const SUITE_NAMES: &[&str] = &[
    "exponents",
    "closed-forms",
    "orthotropic-acceptance",
    "smoothing",
    "comparison",
    "concentration",
    "selfsim",
    "asymptotics",
    "all",
];

/// Run a named suite of checks (the groupings used by the CLI).
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let mut add = |mut r: Vec<CheckReport>| reports.append(&mut r);
    match name {
        "exponents" => {
            add(criterion_1_exponent_algebra(seed)?);
            add(criterion_2_lambda()?);
            add(criterion_11_region_scan()?);
        }
        "closed-forms" => {
            add(criterion_3_closed_forms(seed)?);
            add(criterion_4_barrier_signs(seed)?);
        }
        "orthotropic-acceptance" => {
            add(criterion_5_barenblatt_1d()?);
            add(criterion_5_barenblatt_2d()?);
        }
        "smoothing" => {
            add(criterion_6_smoothing_p15()?);
            add(criterion_6_smoothing_p18()?);
        }
        "comparison" => add(criterion_7_comparison_bundle()?),
        "concentration" => add(criterion_8_concentration()?),
        "selfsim" => add(criterion_9_steady_profile()?.reports),
        "asymptotics" => add(criterion_10_asymptotics()?),
        "all" => {
            for suite in SUITE_NAMES.iter().filter(|&&s| s != "all") {
                add(run_suite(suite, seed)?);
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown suite {other:?}; known: {}",
                SUITE_NAMES.join(", ")
            )))
        }
    }
    Ok(reports)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::new(42);
        for _ in 0..1000 {
            let x = c.uniform();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn quick_criteria_pass() {
        for r in criterion_1_exponent_algebra(DEFAULT_SEED).unwrap() {
            assert!(r.passed, "{}", r.summary_line());
        }
        for r in criterion_2_lambda().unwrap() {
            assert!(r.passed, "{}", r.summary_line());
        }
        for r in criterion_3_closed_forms(DEFAULT_SEED).unwrap() {
            assert!(r.passed, "{}", r.summary_line());
        }
        for r in criterion_11_region_scan().unwrap() {
            assert!(r.passed, "{}", r.summary_line());
        }
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope", 0).is_err());
    }

}
