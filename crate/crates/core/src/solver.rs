//! Implicit time discretization for the anisotropic equation.
//!
//! Each backward-Euler step solves the strictly convex problem
//!
//! ```text
//! min_u  h * sum_i sum_{edges e || i} e_{p_i,eps}((u_R - u_L)/h_i) * V
//!        + 1/2 sum_cells (u - u_prev - h f)^2 * V
//! ```
//!
//! where `e_{p,eps}` is the antiderivative of the regularized flux
//! `s (s^2 + eps^2)^{(p-2)/2}` and differences reach a zero ghost layer at
//! the box boundary (homogeneous Dirichlet, approximating decay at
//! infinity). The optimality system of the minimizer is exactly the implicit
//! finite-difference step for `u_t = sum_i (flux(u_{x_i}))_{x_i} + f`.
//!
//! Minimization is damped Newton: per-edge weights `flux'(D_i u)`, a
//! conjugate-gradient solve with Jacobi preconditioning (the Hessian is a
//! symmetric M-matrix), and an Armijo backtracking line search. Every loop
//! runs in a fixed order; results are bit-reproducible.
//!
//! Three front ends share this machinery:
//! * [`evolve`] — the anisotropic equation itself;
//! * [`isotropic_evolve`] — the companion problem `U_t = Lambda Delta_pbar U`
//!   used for symmetrization comparisons (full-gradient flux, cell-centered
//!   gradient reconstruction, lagged-diffusivity iterations);
//! * [`rescaled_evolve`] / [`steady_profile`] — the drift-diffusion flow in
//!   self-similar variables, `v_tau = sum_i [(flux(v_{y_i}))_{y_i} +
//!   alpha sigma_i (y_i v)_{y_i}]`, split into the implicit diffusion step
//!   plus per-axis implicit first-order upwind drift solves.

use crate::error::{Error, Result};
use crate::exponents::{check_conditions, selfsim_exponents, ExponentVector, SelfSimilarExponents};
use crate::grid::{Field, TensorGrid};
use std::fmt::Write as _;
use std::path::Path;

/// Curvature floor used for Newton weights when `eps = 0` (the exact flux
/// has unbounded derivative at zero gradient). Gradients and energies always
/// use the true `eps`; only the Hessian is capped.
const WEIGHT_EPS_FLOOR: f64 = 1e-9;

/// Parameters of one implicit step and of the step loop.
#[derive(Debug, Clone)]
pub struct StepConfig {
    /// Base time step (> 0).
    pub h: f64,
    /// Geometric step growth per step (1.0 = uniform mesh). Useful for decade
    /// spans: `h_k ~ h * growth^k` approximates steps proportional to t.
    pub h_growth: f64,
    /// Flux regularization parameter (>= 0).
    pub eps: f64,
    /// Sup-norm tolerance on the optimality residual of the discrete system,
    /// in equation form (independent of the cell volume).
    pub newton_tol: f64,
    /// Newton iteration cap per step.
    pub max_iters: usize,
    /// Backtracking halvings allowed in the line search.
    pub max_backtracks: usize,
    /// Record every k-th field into the trajectory (diagnostics are recorded
    /// for every step regardless; the final field is always recorded).
    pub record_stride: usize,
}

impl StepConfig {
    /// Step with the library defaults; `eps` is linked to the grid spacing
    /// (`min_i h_i`), the formally consistent choice as both tend to zero.
    /// Experiments that need sharper flux resolution override `eps`.
    pub fn for_grid(h: f64, grid: &TensorGrid) -> Self {
        Self {
            h,
            h_growth: 1.0,
            eps: grid.min_spacing(),
            newton_tol: 1e-10,
            max_iters: 60,
            max_backtracks: 40,
            record_stride: 1,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_growth(mut self, g: f64) -> Self {
        self.h_growth = g;
        self
    }

    pub fn with_stride(mut self, s: usize) -> Self {
        self.record_stride = s;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidParameter("time step must be > 0".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter("eps must be >= 0".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter("newton_tol must be > 0".into()));
        }
        if self.h_growth < 1.0 {
            return Err(Error::InvalidParameter("h_growth must be >= 1".into()));
        }
        if self.max_iters == 0 || self.record_stride == 0 {
            return Err(Error::InvalidParameter(
                "max_iters and record_stride must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step solve record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Time at the end of the step.
    pub time: f64,
    /// Step size used.
    pub step: f64,
    pub newton_iters: usize,
    pub cg_iters: usize,
    /// Final sup-norm optimality residual (equation form).
    pub residual: f64,
    /// Discrete Dirichlet energy J(u) = sum_i (1/p_i) sum_edges |D_i u|^{p_i} V.
    pub energy: f64,
    /// Same with the eps-regularized antiderivative (monotone along the flow).
    pub energy_eps: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
    /// L1 increment from the previous field.
    pub delta_l1: f64,
}

/// Time-stamped sequence of fields plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Times of the recorded fields (strictly increasing, starts at t0).
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    /// One entry per solver step (not only recorded ones).
    pub steps: Vec<StepDiagnostics>,
}

impl Trajectory {
    fn push_record(&mut self, t: f64, field: Field) {
        self.times.push(t);
        self.fields.push(field);
    }

    pub fn final_field(&self) -> &Field {
        self.fields.last().expect("trajectory has at least u0")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least u0")
    }

    /// Checkpoint: directory with a human-readable manifest, a diagnostics
    /// CSV and one field file per recorded time.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        writeln!(manifest, "anisodiff-trajectory v1").unwrap();
        writeln!(manifest, "fields = {}", self.fields.len()).unwrap();
        writeln!(manifest, "steps = {}", self.steps.len()).unwrap();
        writeln!(manifest, "[times]").unwrap();
        for (k, t) in self.times.iter().enumerate() {
            writeln!(manifest, "field_{k:04}.txt {t:.17e}").unwrap();
        }
        std::fs::write(dir.join("manifest.txt"), manifest)?;

        let mut csv = String::from(
            "time,step,newton_iters,cg_iters,residual,energy,energy_eps,mass,sup_norm,l2_norm,delta_l1\n",
        );
        for s in &self.steps {
            writeln!(
                csv,
                "{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.time,
                s.step,
                s.newton_iters,
                s.cg_iters,
                s.residual,
                s.energy,
                s.energy_eps,
                s.mass,
                s.sup_norm,
                s.l2_norm,
                s.delta_l1
            )
            .unwrap();
        }
        std::fs::write(dir.join("diagnostics.csv"), csv)?;

        for (k, f) in self.fields.iter().enumerate() {
            f.save(&dir.join(format!("field_{k:04}.txt")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Trajectory> {
        let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
        let mut lines = manifest.lines();
        match lines.next() {
            Some("anisodiff-trajectory v1") => {}
            other => return Err(Error::Parse(format!("bad manifest header {other:?}"))),
        }
        let mut times = Vec::new();
        let mut fields = Vec::new();
        let mut in_times = false;
        for line in lines {
            let line = line.trim();
            if line == "[times]" {
                in_times = true;
                continue;
            }
            if !in_times || line.is_empty() {
                continue;
            }
            let (name, t) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad times line {line:?}")))?;
            times.push(t.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
            fields.push(Field::load(&dir.join(name))?);
        }
        let mut steps = Vec::new();
        let csv = std::fs::read_to_string(dir.join("diagnostics.csv"))?;
        for line in csv.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 11 {
                return Err(Error::Parse(format!("bad diagnostics row {line:?}")));
            }
            let f = |i: usize| -> Result<f64> {
                parts[i].parse::<f64>().map_err(|e| Error::Parse(e.to_string()))
            };
            let u = |i: usize| -> Result<usize> {
                parts[i].parse::<usize>().map_err(|e| Error::Parse(e.to_string()))
            };
            steps.push(StepDiagnostics {
                time: f(0)?,
                step: f(1)?,
                newton_iters: u(2)?,
                cg_iters: u(3)?,
                residual: f(4)?,
                energy: f(5)?,
                energy_eps: f(6)?,
                mass: f(7)?,
                sup_norm: f(8)?,
                l2_norm: f(9)?,
                delta_l1: f(10)?,
            });
        }
        Ok(Trajectory {
            times,
            fields,
            steps,
        })
    }
}

/// Regularized flux `s (s^2 + eps^2)^{(p-2)/2}`; `eps = 0` gives the exact
/// flux `|s|^{p-2} s` with the convention value 0 at `s = 0`.
pub fn regularized_flux(s: f64, p: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(p - 2.0) * s
        }
    } else {
        s * (s * s + eps * eps).powf((p - 2.0) / 2.0)
    }
}

/// Antiderivative of [`regularized_flux`], normalized to vanish at 0:
/// `((s^2 + eps^2)^{p/2} - eps^p) / p`.
pub fn flux_antiderivative(s: f64, p: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        s.abs().powf(p) / p
    } else {
        ((s * s + eps * eps).powf(p / 2.0) - eps.powf(p)) / p
    }
}

/// Derivative of the regularized flux, with the curvature floor applied when
/// `eps = 0`; used only to build Newton weights.
fn flux_weight(s: f64, p: f64, eps: f64) -> f64 {
    let e = eps.max(WEIGHT_EPS_FLOOR);
    let t = s * s + e * e;
    t.powf((p - 4.0) / 2.0) * ((p - 1.0) * s * s + e * e)
}

// ---------------------------------------------------------------------------
// shared grid machinery

/// Per-axis line decomposition of a tensor grid: every grid line parallel to
/// an axis, with its starting flat index and stride.
struct Lines {
    /// starts[axis] = flat indices of cells with multi-index 0 on that axis.
    starts: Vec<Vec<usize>>,
}

impl Lines {
    fn new(grid: &TensorGrid) -> Self {
        let dim = grid.dim();
        let mut starts = vec![Vec::new(); dim];
        for axis in 0..dim {
            let stride = grid.strides()[axis];
            let n = grid.cells()[axis];
            for flat in 0..grid.cell_count() {
                if (flat / stride) % n == 0 {
                    starts[axis].push(flat);
                }
            }
        }
        Self { starts }
    }
}

/// Preconditioned conjugate gradients for `A x = b` with `A` and the
/// preconditioner application given as closures; deterministic fixed-order
/// reductions.
fn pcg<F: FnMut(&[f64], &mut [f64]), M: FnMut(&[f64], &mut [f64])>(
    mut apply: F,
    mut precond: M,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> usize {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    precond(&r, &mut z);
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    p.copy_from_slice(&z);
    let mut iters = 0;
    for _ in 0..max_iters {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            break;
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break; // numerically defective direction; H is SPD so this is rounding
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iters += 1;
    }
    iters
}

// ---------------------------------------------------------------------------
// anisotropic diffusion step

/// Boundary treatment of the truncated box.
///
/// `Dirichlet` (zero ghost values) approximates decay at infinity for the
/// Cauchy-problem solvers; mass may leave through the walls. `NoFlux` omits
/// the boundary edges entirely, making the diffusion step exactly
/// conservative; the rescaled flow uses it so that the drift-confined steady
/// state carries the prescribed mass (with a zero ghost layer the singular
/// fast-diffusion flux drains the box and the truncated flow has no
/// nontrivial steady state).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundaryKind {
    Dirichlet,
    NoFlux,
}

/// The coordinate-wise diffusion operator on a fixed grid, with buffers for
/// the Newton solve. Dirichlet-zero ghosts at the box boundary.
struct AnisoDiffusion {
    grid: TensorGrid,
    lines: Lines,
    p: Vec<f64>,
    eps: f64,
    boundary: BoundaryKind,
    /// Per-axis edge weights (n_i + 1 edges per line, lines in `starts` order).
    weights: Vec<Vec<f64>>,
    diag: Vec<f64>,
    /// Coupling of each cell to its negative-side neighbor per axis
    /// (zero on the boundary layer); feeds the DIC(0) preconditioner.
    offdiag: Vec<Vec<f64>>,
    /// Diagonal of the incomplete-Cholesky factor.
    ic_diag: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
    rhs: Vec<f64>,
}

struct SolveInfo {
    newton_iters: usize,
    cg_iters: usize,
    residual: f64,
}

impl AnisoDiffusion {
    fn new(grid: TensorGrid, p: Vec<f64>, eps: f64, boundary: BoundaryKind) -> Self {
        let lines = Lines::new(&grid);
        let dim = grid.dim();
        let count = grid.cell_count();
        let weights = (0..dim)
            .map(|axis| vec![0.0; lines.starts[axis].len() * (grid.cells()[axis] + 1)])
            .collect();
        Self {
            grid,
            lines,
            p,
            eps,
            boundary,
            weights,
            diag: vec![0.0; count],
            offdiag: vec![vec![0.0; count]; dim],
            ic_diag: vec![0.0; count],
            grad: vec![0.0; count],
            delta: vec![0.0; count],
            rhs: vec![0.0; count],
        }
    }

    /// Scaled objective (energy per unit cell volume):
    /// `ht * sum_i sum_edges e_{p_i,eps}(D) + 1/2 sum (u - b)^2`.
    fn objective(&self, u: &[f64], b: &[f64], ht: f64) -> f64 {
        let mut diff = 0.0;
        let interior_only = self.boundary == BoundaryKind::NoFlux;
        for axis in 0..self.grid.dim() {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let h = self.grid.spacing()[axis];
            let p = self.p[axis];
            for &start in &self.lines.starts[axis] {
                let mut prev = 0.0;
                for k in 0..=n {
                    let cur = if k < n { u[start + k * stride] } else { 0.0 };
                    if !(interior_only && (k == 0 || k == n)) {
                        diff += flux_antiderivative((cur - prev) / h, p, self.eps);
                    }
                    prev = cur;
                }
            }
        }
        let fid: f64 = u.iter().zip(b).map(|(&ui, &bi)| (ui - bi) * (ui - bi)).sum();
        ht * diff + 0.5 * fid
    }

    /// Gradient of the scaled objective (the optimality residual in equation
    /// form): `g_j = (u_j - b_j) - ht * (div flux)_j`.
    fn gradient(&mut self, u: &[f64], b: &[f64], ht: f64) {
        let mut g = std::mem::take(&mut self.grad);
        aniso_gradient(
            &self.grid,
            &self.lines,
            &self.p,
            self.eps,
            self.boundary,
            u,
            b,
            ht,
            &mut g,
        );
        self.grad = g;
    }

    /// Newton weights, matrix diagonal, off-diagonals and the DIC(0) factor
    /// at the current iterate. The Hessian is an M-matrix, so the no-fill
    /// incomplete Cholesky factorization exists in the natural cell order
    /// (every neighbor coupling points to a lower flat index).
    fn assemble_weights(&mut self, u: &[f64], ht: f64) {
        for d in self.diag.iter_mut() {
            *d = 1.0;
        }
        for o in self.offdiag.iter_mut() {
            o.iter_mut().for_each(|v| *v = 0.0);
        }
        for axis in 0..self.grid.dim() {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let h = self.grid.spacing()[axis];
            let p = self.p[axis];
            let scale = ht / (h * h);
            let per_line = n + 1;
            let interior_only = self.boundary == BoundaryKind::NoFlux;
            for (li, &start) in self.lines.starts[axis].iter().enumerate() {
                let base = li * per_line;
                let mut prev = 0.0;
                for k in 0..=n {
                    let cur = if k < n { u[start + k * stride] } else { 0.0 };
                    let w = if interior_only && (k == 0 || k == n) {
                        0.0
                    } else {
                        flux_weight((cur - prev) / h, p, self.eps)
                    };
                    self.weights[axis][base + k] = w;
                    if k < n {
                        self.diag[start + k * stride] += scale * w;
                        if k > 0 {
                            self.offdiag[axis][start + k * stride] = -scale * w;
                        }
                    }
                    if k > 0 {
                        self.diag[start + (k - 1) * stride] += scale * w;
                    }
                    prev = cur;
                }
            }
        }
        // DIC(0): d_i = a_ii - sum_axes a_{i,i-s}^2 / d_{i-s}
        let dim = self.grid.dim();
        let strides = self.grid.strides().to_vec();
        for i in 0..self.diag.len() {
            let mut d = self.diag[i];
            for axis in 0..dim {
                let o = self.offdiag[axis][i];
                if o != 0.0 {
                    d -= o * o / self.ic_diag[i - strides[axis]];
                }
            }
            self.ic_diag[i] = d;
        }
    }

    /// Apply the DIC(0) preconditioner: z = (D + L) D^{-1} (D + L^T) \ r.
    fn dic_apply(
        offdiag: &[Vec<f64>],
        ic_diag: &[f64],
        strides: &[usize],
        r: &[f64],
        z: &mut [f64],
    ) {
        let n = r.len();
        // forward solve (D + L) y = r, y stored in z
        for i in 0..n {
            let mut acc = r[i];
            for (axis, o) in offdiag.iter().enumerate() {
                let c = o[i];
                if c != 0.0 {
                    acc -= c * z[i - strides[axis]];
                }
            }
            z[i] = acc / ic_diag[i];
        }
        // scale by D and backward solve (D + L^T) z = D y
        for i in (0..n).rev() {
            let mut acc = z[i] * ic_diag[i];
            for (axis, o) in offdiag.iter().enumerate() {
                let s = strides[axis];
                if i + s < n {
                    let c = o[i + s];
                    if c != 0.0 {
                        acc -= c * z[i + s];
                    }
                }
            }
            z[i] = acc / ic_diag[i];
        }
    }

    /// Exact (eps = 0) discrete Dirichlet energy J and its eps variant,
    /// in physical units (times the cell volume).
    fn dirichlet_energies(&self, u: &[f64]) -> (f64, f64) {
        let vol = self.grid.cell_volume();
        let mut exact = 0.0;
        let mut reg = 0.0;
        for axis in 0..self.grid.dim() {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let h = self.grid.spacing()[axis];
            let p = self.p[axis];
            let interior_only = self.boundary == BoundaryKind::NoFlux;
            for &start in &self.lines.starts[axis] {
                let mut prev = 0.0;
                for k in 0..=n {
                    let cur = if k < n { u[start + k * stride] } else { 0.0 };
                    let d = (cur - prev) / h;
                    if !(interior_only && (k == 0 || k == n)) {
                        exact += flux_antiderivative(d, p, 0.0);
                        reg += flux_antiderivative(d, p, self.eps);
                    }
                    prev = cur;
                }
            }
        }
        (exact * vol, reg * vol)
    }

    fn solve(
        &mut self,
        b: &[f64],
        u: &mut Vec<f64>,
        ht: f64,
        cfg: &StepConfig,
        time_for_error: f64,
    ) -> Result<SolveInfo> {
        let mut cg_total = 0;
        let mut residual;
        for iter in 0..cfg.max_iters {
            self.gradient(u, b, ht);
            residual = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if residual <= cfg.newton_tol {
                return Ok(SolveInfo {
                    newton_iters: iter,
                    cg_iters: cg_total,
                    residual,
                });
            }
            self.assemble_weights(u, ht);
            for i in 0..self.delta.len() {
                self.rhs[i] = -self.grad[i];
                self.delta[i] = 0.0;
            }
            // inexact Newton: solve the linearized system to 1e-2 relative
            let weights = std::mem::take(&mut self.weights);
            let (grid, lines) = (&self.grid, &self.lines);
            let apply = |v: &[f64], out: &mut [f64]| {
                hessian_apply(grid, lines, &weights, ht, v, out);
            };
            let cg_cap = 2 * self.delta.len();
            let (offdiag, ic_diag) = (&self.offdiag, &self.ic_diag);
            let strides = self.grid.strides();
            let precond = |r: &[f64], z: &mut [f64]| {
                Self::dic_apply(offdiag, ic_diag, strides, r, z);
            };
            cg_total += pcg(apply, precond, &self.rhs, &mut self.delta, 1e-2, cg_cap);
            self.weights = weights;

            // Accept the full Newton step whenever it reduces the optimality
            // residual: near the minimizer, objective differences sit at
            // rounding level while the residual still contracts quadratically.
            let trial: Vec<f64> = u
                .iter()
                .zip(&self.delta)
                .map(|(&ui, &di)| ui + di)
                .collect();
            let mut scratch = std::mem::take(&mut self.rhs);
            aniso_gradient(
                &self.grid,
                &self.lines,
                &self.p,
                self.eps,
                self.boundary,
                &trial,
                b,
                ht,
                &mut scratch,
            );
            let r_trial = scratch.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            self.rhs = scratch;
            if r_trial <= 0.9 * residual {
                *u = trial;
                continue;
            }

            // Strongly nonlinear phase: Armijo backtracking on the objective.
            let f0 = self.objective(u, b, ht);
            let slope: f64 = self
                .grad
                .iter()
                .zip(&self.delta)
                .map(|(g, d)| g * d)
                .sum();
            let mut t = 0.5;
            let mut accepted = false;
            for _ in 0..=cfg.max_backtracks {
                let trial: Vec<f64> = u
                    .iter()
                    .zip(&self.delta)
                    .map(|(&ui, &di)| ui + t * di)
                    .collect();
                if self.objective(&trial, b, ht) <= f0 + 1e-4 * t * slope {
                    *u = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::SolverFailed {
                    time: time_for_error,
                    residual,
                    iters: iter,
                });
            }
        }
        // converged only if the final gradient is small
        self.gradient(u, b, ht);
        residual = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual <= cfg.newton_tol {
            Ok(SolveInfo {
                newton_iters: cfg.max_iters,
                cg_iters: cg_total,
                residual,
            })
        } else {
            Err(Error::SolverFailed {
                time: time_for_error,
                residual,
                iters: cfg.max_iters,
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn aniso_gradient(
    grid: &TensorGrid,
    lines: &Lines,
    p: &[f64],
    eps: f64,
    boundary: BoundaryKind,
    u: &[f64],
    b: &[f64],
    ht: f64,
    out: &mut [f64],
) {
    for (g, (&ui, &bi)) in out.iter_mut().zip(u.iter().zip(b)) {
        *g = ui - bi;
    }
    let interior_only = boundary == BoundaryKind::NoFlux;
    for axis in 0..grid.dim() {
        let stride = grid.strides()[axis];
        let n = grid.cells()[axis];
        let h = grid.spacing()[axis];
        let pa = p[axis];
        let scale = ht / h;
        for &start in &lines.starts[axis] {
            // edge k connects cells k-1 and k (ghosts at both ends)
            let mut prev_flux = if interior_only {
                0.0
            } else {
                regularized_flux(u[start] / h, pa, eps)
            };
            for k in 0..n {
                let idx = start + k * stride;
                let cur = u[idx];
                let next = if k + 1 < n { u[idx + stride] } else { 0.0 };
                let flux_right = if interior_only && k + 1 == n {
                    0.0
                } else {
                    regularized_flux((next - cur) / h, pa, eps)
                };
                // g_j += ht [phi(D_left) - phi(D_right)] / h
                out[idx] += scale * (prev_flux - flux_right);
                prev_flux = flux_right;
            }
        }
    }
}

/// Free-function Hessian matvec so the closure does not borrow `self`.
fn hessian_apply(
    grid: &TensorGrid,
    lines: &Lines,
    weights: &[Vec<f64>],
    ht: f64,
    v: &[f64],
    out: &mut [f64],
) {
    out.copy_from_slice(v);
    for axis in 0..grid.dim() {
        let stride = grid.strides()[axis];
        let n = grid.cells()[axis];
        let h = grid.spacing()[axis];
        let scale = ht / (h * h);
        let per_line = n + 1;
        for (li, &start) in lines.starts[axis].iter().enumerate() {
            let base = li * per_line;
            for k in 0..=n {
                let w = weights[axis][base + k] * scale;
                let left = if k > 0 { v[start + (k - 1) * stride] } else { 0.0 };
                let right = if k < n { v[start + k * stride] } else { 0.0 };
                let d = right - left;
                if k > 0 {
                    out[start + (k - 1) * stride] -= w * d;
                }
                if k < n {
                    out[start + k * stride] += w * d;
                }
            }
        }
    }
}

/// One implicit (backward Euler) step of the anisotropic equation:
/// returns the minimizer of the discrete energy together with solve info.
/// `source`, when present, enters as `u_prev + h * f` in the fidelity term.
pub fn elliptic_step(
    u_prev: &Field,
    h: f64,
    exp: &ExponentVector,
    eps: f64,
    source: Option<&Field>,
    cfg: &StepConfig,
) -> Result<Field> {
    if exp.dim() != u_prev.grid().dim() {
        return Err(Error::InvalidGrid(
            "exponent dimension does not match the grid".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("time step must be > 0".into()));
    }
    let mut op = AnisoDiffusion::new(
        u_prev.grid().clone(),
        exp.p().to_vec(),
        eps,
        BoundaryKind::Dirichlet,
    );
    let b: Vec<f64> = match source {
        Some(f) => {
            if f.grid() != u_prev.grid() {
                return Err(Error::InvalidGrid("source grid mismatch".into()));
            }
            u_prev
                .values()
                .iter()
                .zip(f.values())
                .map(|(&u, &fv)| u + h * fv)
                .collect()
        }
        None => u_prev.values().to_vec(),
    };
    let mut u = u_prev.values().to_vec();
    op.solve(&b, &mut u, h, cfg, u_prev.time.unwrap_or(0.0))?;
    Field::new(u_prev.grid().clone(), u, u_prev.time.map(|t| t + h))
}

/// Evolve the anisotropic equation from `u0` (time stamp `u0.time`, default 0)
/// to `t_end` by repeated implicit steps.
pub fn evolve(
    u0: &Field,
    t_end: f64,
    cfg: &StepConfig,
    exp: &ExponentVector,
) -> Result<Trajectory> {
    cfg.validate()?;
    if exp.dim() != u0.grid().dim() {
        return Err(Error::InvalidGrid(
            "exponent dimension does not match the grid".into(),
        ));
    }
    let mut op = AnisoDiffusion::new(
        u0.grid().clone(),
        exp.p().to_vec(),
        cfg.eps,
        BoundaryKind::Dirichlet,
    );
    run_steps(u0, t_end, cfg, move |b, u, ht, cfg, t| {
        let info = op.solve(b, u, ht, cfg, t)?;
        let (energy, energy_eps) = op.dirichlet_energies(u);
        Ok((info, energy, energy_eps))
    })
}

// ---------------------------------------------------------------------------
// isotropic companion solver

struct IsoDiffusion {
    grid: TensorGrid,
    pbar: f64,
    lambda: f64,
    eps: f64,
    /// cell gradient components, one vec per axis
    gradc: Vec<Vec<f64>>,
    /// frozen diffusivity per cell
    w: Vec<f64>,
    diag: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
    rhs: Vec<f64>,
}

impl IsoDiffusion {
    fn new(grid: TensorGrid, pbar: f64, lambda: f64, eps: f64) -> Self {
        let count = grid.cell_count();
        let dim = grid.dim();
        Self {
            grid,
            pbar,
            lambda,
            eps,
            gradc: vec![vec![0.0; count]; dim],
            w: vec![0.0; count],
            diag: vec![0.0; count],
            grad: vec![0.0; count],
            delta: vec![0.0; count],
            rhs: vec![0.0; count],
        }
    }

    /// Central-difference cell gradients with zero ghosts.
    fn cell_gradients(&mut self, u: &[f64]) {
        for axis in 0..self.grid.dim() {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let inv2h = 0.5 / self.grid.spacing()[axis];
            let g = &mut self.gradc[axis];
            for flat in 0..u.len() {
                let i = (flat / stride) % n;
                let left = if i > 0 { u[flat - stride] } else { 0.0 };
                let right = if i + 1 < n { u[flat + stride] } else { 0.0 };
                g[flat] = (right - left) * inv2h;
            }
        }
    }

    fn objective(&mut self, u: &[f64], b: &[f64], ht: f64) -> f64 {
        self.cell_gradients(u);
        let p = self.pbar;
        let e2 = self.eps * self.eps;
        let mut diff = 0.0;
        for flat in 0..u.len() {
            let g2: f64 = self.gradc.iter().map(|g| g[flat] * g[flat]).sum();
            diff += ((g2 + e2).powf(p / 2.0) - e2.powf(p / 2.0)) / p;
        }
        let fid: f64 = u.iter().zip(b).map(|(&ui, &bi)| (ui - bi) * (ui - bi)).sum();
        ht * self.lambda * diff + 0.5 * fid
    }

    /// True gradient of the objective at `u` (fills `self.grad`); also leaves
    /// the diffusivities `w_j = (|grad u_j|^2 + eps^2)^{(p-2)/2}` in `self.w`.
    fn gradient(&mut self, u: &[f64], b: &[f64], ht: f64) {
        self.cell_gradients(u);
        let p = self.pbar;
        let e2 = self.eps * self.eps;
        for flat in 0..u.len() {
            let g2: f64 = self.gradc.iter().map(|g| g[flat] * g[flat]).sum();
            self.w[flat] = (g2 + e2).powf((p - 2.0) / 2.0);
        }
        for (g, (&ui, &bi)) in self.grad.iter_mut().zip(u.iter().zip(b)) {
            *g = ui - bi;
        }
        let scale = ht * self.lambda;
        for axis in 0..self.grid.dim() {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let inv2h = 0.5 / self.grid.spacing()[axis];
            for flat in 0..u.len() {
                let i = (flat / stride) % n;
                let q_left = if i > 0 {
                    self.w[flat - stride] * self.gradc[axis][flat - stride]
                } else {
                    0.0
                };
                let q_right = if i + 1 < n {
                    self.w[flat + stride] * self.gradc[axis][flat + stride]
                } else {
                    0.0
                };
                self.grad[flat] += scale * (q_left - q_right) * inv2h;
            }
        }
    }

    fn solve(
        &mut self,
        b: &[f64],
        u: &mut Vec<f64>,
        ht: f64,
        cfg: &StepConfig,
        time_for_error: f64,
    ) -> Result<SolveInfo> {
        let mut cg_total = 0;
        let mut residual;
        for iter in 0..cfg.max_iters {
            self.gradient(u, b, ht);
            residual = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if residual <= cfg.newton_tol {
                return Ok(SolveInfo {
                    newton_iters: iter,
                    cg_iters: cg_total,
                    residual,
                });
            }
            // Jacobi diagonal of the frozen-diffusivity operator
            for flat in 0..u.len() {
                let mut d = 1.0;
                for axis in 0..self.grid.dim() {
                    let stride = self.grid.strides()[axis];
                    let n = self.grid.cells()[axis];
                    let i = (flat / stride) % n;
                    let inv4h2 = 0.25 / (self.grid.spacing()[axis] * self.grid.spacing()[axis]);
                    let wl = if i > 0 { self.w[flat - stride] } else { 0.0 };
                    let wr = if i + 1 < n { self.w[flat + stride] } else { 0.0 };
                    d += ht * self.lambda * (wl + wr) * inv4h2;
                }
                self.diag[flat] = d;
            }
            for i in 0..u.len() {
                self.rhs[i] = -self.grad[i];
                self.delta[i] = 0.0;
            }
            let (w, grid, lambda) = (&self.w, &self.grid, self.lambda);
            let apply = |v: &[f64], out: &mut [f64]| {
                iso_picard_apply(grid, w, lambda, ht, v, out);
            };
            let diag = &self.diag;
            let jacobi = |r: &[f64], z: &mut [f64]| {
                for i in 0..r.len() {
                    z[i] = r[i] / diag[i];
                }
            };
            cg_total += pcg(apply, jacobi, &self.rhs, &mut self.delta, 1e-2, 2 * u.len());

            // full lagged-diffusivity step on residual decrease first
            let slope: f64 = self.grad.iter().zip(&self.delta).map(|(g, d)| g * d).sum();
            let trial: Vec<f64> = u
                .iter()
                .zip(&self.delta)
                .map(|(&ui, &di)| ui + di)
                .collect();
            self.gradient(&trial, b, ht);
            let r_trial = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if r_trial <= 0.9 * residual {
                *u = trial;
                continue;
            }

            let f0 = self.objective(u, b, ht);
            let mut t = 0.5;
            let mut accepted = false;
            for _ in 0..=cfg.max_backtracks {
                let trial: Vec<f64> = u
                    .iter()
                    .zip(&self.delta)
                    .map(|(&ui, &di)| ui + t * di)
                    .collect();
                if self.objective(&trial, b, ht) <= f0 + 1e-4 * t * slope {
                    *u = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::SolverFailed {
                    time: time_for_error,
                    residual,
                    iters: iter,
                });
            }
        }
        self.gradient(u, b, ht);
        residual = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual <= cfg.newton_tol {
            Ok(SolveInfo {
                newton_iters: cfg.max_iters,
                cg_iters: cg_total,
                residual,
            })
        } else {
            Err(Error::SolverFailed {
                time: time_for_error,
                residual,
                iters: cfg.max_iters,
            })
        }
    }

    /// Discrete isotropic Dirichlet energy (exact and regularized).
    fn dirichlet_energies(&mut self, u: &[f64]) -> (f64, f64) {
        self.cell_gradients(u);
        let vol = self.grid.cell_volume();
        let p = self.pbar;
        let e2 = self.eps * self.eps;
        let mut exact = 0.0;
        let mut reg = 0.0;
        for flat in 0..u.len() {
            let g2: f64 = self.gradc.iter().map(|g| g[flat] * g[flat]).sum();
            exact += g2.powf(p / 2.0) / p;
            reg += ((g2 + e2).powf(p / 2.0) - e2.powf(p / 2.0)) / p;
        }
        (exact * vol * self.lambda, reg * vol * self.lambda)
    }
}

fn iso_picard_apply(
    grid: &TensorGrid,
    w: &[f64],
    lambda: f64,
    ht: f64,
    v: &[f64],
    out: &mut [f64],
) {
    out.copy_from_slice(v);
    let scale = ht * lambda;
    let mut q = vec![0.0; v.len()];
    for axis in 0..grid.dim() {
        let stride = grid.strides()[axis];
        let n = grid.cells()[axis];
        let inv2h = 0.5 / grid.spacing()[axis];
        for flat in 0..v.len() {
            let i = (flat / stride) % n;
            let left = if i > 0 { v[flat - stride] } else { 0.0 };
            let right = if i + 1 < n { v[flat + stride] } else { 0.0 };
            q[flat] = w[flat] * (right - left) * inv2h;
        }
        for flat in 0..v.len() {
            let i = (flat / stride) % n;
            let q_left = if i > 0 { q[flat - stride] } else { 0.0 };
            let q_right = if i + 1 < n { q[flat + stride] } else { 0.0 };
            out[flat] += scale * (q_left - q_right) * inv2h;
        }
    }
}

/// Evolve the isotropic comparison problem `U_t = Lambda Delta_pbar U` from
/// `u0` to `t_end`.
pub fn isotropic_evolve(
    u0: &Field,
    t_end: f64,
    cfg: &StepConfig,
    pbar: f64,
    lambda: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(pbar > 1.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(
            "need pbar > 1 and lambda > 0".into(),
        ));
    }
    let mut op = IsoDiffusion::new(u0.grid().clone(), pbar, lambda, cfg.eps);
    run_steps(u0, t_end, cfg, move |b, u, ht, cfg, t| {
        let info = op.solve(b, u, ht, cfg, t)?;
        let (energy, energy_eps) = op.dirichlet_energies(u);
        Ok((info, energy, energy_eps))
    })
}

// ---------------------------------------------------------------------------
// shared stepping loop

fn run_steps<S>(u0: &Field, t_end: f64, cfg: &StepConfig, mut do_step: S) -> Result<Trajectory>
where
    S: FnMut(&[f64], &mut Vec<f64>, f64, &StepConfig, f64) -> Result<(SolveInfo, f64, f64)>,
{
    let t0 = u0.time.unwrap_or(0.0);
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} must exceed the initial time {t0}"
        )));
    }
    let vol = u0.grid().cell_volume();
    let mut traj = Trajectory {
        times: Vec::new(),
        fields: Vec::new(),
        steps: Vec::new(),
    };
    traj.push_record(t0, u0.clone().with_time(t0));
    let mut u = u0.values().to_vec();
    let mut t = t0;
    let mut h = cfg.h;
    let mut step_index = 0usize;
    while t < t_end - 1e-14 * t_end.abs().max(1.0) {
        let ht = h.min(t_end - t);
        let b = u.clone();
        let (info, energy, energy_eps) = do_step(&b, &mut u, ht, cfg, t)?;
        t += ht;
        step_index += 1;
        let mass = u.iter().sum::<f64>() * vol;
        let sup = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let l2 = (u.iter().map(|&v| v * v).sum::<f64>() * vol).sqrt();
        let delta_l1 = u
            .iter()
            .zip(&b)
            .map(|(&a, &c)| (a - c).abs())
            .sum::<f64>()
            * vol;
        traj.steps.push(StepDiagnostics {
            time: t,
            step: ht,
            newton_iters: info.newton_iters,
            cg_iters: info.cg_iters,
            residual: info.residual,
            energy,
            energy_eps,
            mass,
            sup_norm: sup,
            l2_norm: l2,
            delta_l1,
        });
        let at_end = t >= t_end - 1e-14 * t_end.abs().max(1.0);
        if step_index % cfg.record_stride == 0 || at_end {
            traj.push_record(t, Field::new(u0.grid().clone(), u.clone(), Some(t))?);
        }
        h *= cfg.h_growth;
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// rescaled (self-similar) flow

/// Configuration of the rescaled flow `v(y, tau) = (t + t0)^alpha u(x, t)`,
/// `y_i = x_i (t + t0)^{-sigma_i alpha}`, `tau = log(t + t0)`.
#[derive(Debug, Clone)]
pub struct RescaledConfig {
    pub exp: ExponentVector,
    pub ss: SelfSimilarExponents,
    /// Time step in the logarithmic time tau.
    pub tau_step: f64,
    /// Time shift t0 (tau_0 = log t0).
    pub t0: f64,
}

impl RescaledConfig {
    /// Requires (H1)-(H3): the drift coefficients `alpha sigma_i` must all be
    /// positive for the flow to confine mass.
    pub fn new(exp: ExponentVector, tau_step: f64, t0: f64) -> Result<Self> {
        let cond = check_conditions(&exp);
        if !(cond.h2 && cond.h3) {
            return Err(Error::ConditionViolated(
                "rescaled flow needs (H2) and (H3) (alpha > 0, sigma_i > 0)".into(),
            ));
        }
        if !(tau_step > 0.0) {
            return Err(Error::InvalidParameter("tau_step must be > 0".into()));
        }
        let ss = selfsim_exponents(&exp)?;
        Ok(Self {
            exp,
            ss,
            tau_step,
            t0,
        })
    }
}

/// Implicit upwind solve of the drift part `v_tau = alpha sigma_i (y_i v)_{y_i}`
/// along one axis: independent tridiagonal systems per grid line. Upwinding
/// follows the transport direction (inward: toward the origin), so the
/// scheme is an M-matrix with unit column sums away from the boundary (mass
/// conserving; the boundary admits no inflow).
fn drift_axis_step(
    grid: &TensorGrid,
    lines: &Lines,
    axis: usize,
    coeff: f64, // alpha * sigma_i
    dt: f64,
    v: &mut [f64],
    lower: &mut Vec<f64>,
    diag: &mut Vec<f64>,
    upper: &mut Vec<f64>,
    rhs: &mut Vec<f64>,
) {
    let stride = grid.strides()[axis];
    let n = grid.cells()[axis];
    let h = grid.spacing()[axis];
    let l = grid.half_widths()[axis];
    lower.resize(n, 0.0);
    diag.resize(n, 0.0);
    upper.resize(n, 0.0);
    rhs.resize(n, 0.0);
    for &start in &lines.starts[axis] {
        for j in 0..n {
            lower[j] = 0.0;
            diag[j] = 1.0;
            upper[j] = 0.0;
            rhs[j] = v[start + j * stride];
        }
        let r = dt / h;
        for j in 0..n {
            // edges j (left, at y = -L + j h) and j+1 (right); the upwind
            // cell of edge e is the one the inward transport comes from:
            // the right cell when a_e > 0, the left cell when a_e < 0.
            let a_left = coeff * (-l + j as f64 * h);
            let a_right = coeff * (-l + (j + 1) as f64 * h);
            // row j: v_j - r (a_right X_right - a_left X_left) = rhs_j
            if a_right > 0.0 {
                if j + 1 < n {
                    upper[j] -= r * a_right;
                } // else the upwind value is the zero ghost: no entry
            } else {
                diag[j] -= r * a_right; // X_right = v_j, adds r |a_right|
            }
            if a_left > 0.0 {
                diag[j] += r * a_left; // X_left = v_j
            } else if j > 0 {
                lower[j] += r * a_left; // X_left = v_{j-1}
            } // else the left ghost: no inflow
        }
        // Thomas solve
        for j in 1..n {
            let m = lower[j] / diag[j - 1];
            diag[j] -= m * upper[j - 1];
            rhs[j] -= m * rhs[j - 1];
        }
        let mut x_prev = rhs[n - 1] / diag[n - 1];
        v[start + (n - 1) * stride] = x_prev;
        for j in (0..n - 1).rev() {
            let x = (rhs[j] - upper[j] * x_prev) / diag[j];
            v[start + j * stride] = x;
            x_prev = x;
        }
    }
}

/// Evolve the rescaled drift-diffusion equation from `v0` (tau stamp
/// `v0.time`, default 0) to `tau_end`. Each step is the implicit diffusion
/// solve followed by per-axis implicit upwind drift solves (Lie splitting,
/// first order in the tau step, matching the upwind order).
pub fn rescaled_evolve(
    v0: &Field,
    tau_end: f64,
    rcfg: &RescaledConfig,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    let mut cfg = cfg.clone();
    cfg.h = rcfg.tau_step;
    cfg.validate()?;
    if rcfg.exp.dim() != v0.grid().dim() {
        return Err(Error::InvalidGrid(
            "exponent dimension does not match the grid".into(),
        ));
    }
    let mut op = AnisoDiffusion::new(
        v0.grid().clone(),
        rcfg.exp.p().to_vec(),
        cfg.eps,
        BoundaryKind::NoFlux,
    );
    let grid = v0.grid().clone();
    let lines = Lines::new(&grid);
    let drift: Vec<f64> = rcfg.ss.sigma.iter().map(|&s| s * rcfg.ss.alpha).collect();
    let (mut lo, mut di, mut up, mut rh) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    run_steps(v0, tau_end, &cfg, move |b, u, ht, cfg, t| {
        let info = op.solve(b, u, ht, cfg, t)?;
        for axis in 0..grid.dim() {
            drift_axis_step(
                &grid, &lines, axis, drift[axis], ht, u, &mut lo, &mut di, &mut up, &mut rh,
            );
        }
        let (energy, energy_eps) = op.dirichlet_energies(u);
        Ok((info, energy, energy_eps))
    })
}

/// Iterate the rescaled flow from `v0` until the per-step L1 increment falls
/// below `stop_tol * mass(v0)`, up to `tau_budget`. Returns the steady field
/// plus the trajectory (fields recorded per the config stride).
pub fn steady_profile(
    v0: &Field,
    rcfg: &RescaledConfig,
    cfg: &StepConfig,
    stop_tol: f64,
    tau_budget: f64,
) -> Result<(Field, Trajectory)> {
    if !(stop_tol > 0.0) {
        return Err(Error::InvalidParameter("stop_tol must be > 0".into()));
    }
    let mass = v0.integrate();
    let threshold = stop_tol * mass;
    let mut cfg = cfg.clone();
    cfg.h = rcfg.tau_step;
    cfg.validate()?;
    let mut op = AnisoDiffusion::new(
        v0.grid().clone(),
        rcfg.exp.p().to_vec(),
        cfg.eps,
        BoundaryKind::NoFlux,
    );
    let grid = v0.grid().clone();
    let lines = Lines::new(&grid);
    let drift: Vec<f64> = rcfg.ss.sigma.iter().map(|&s| s * rcfg.ss.alpha).collect();
    let vol = grid.cell_volume();
    let (mut lo, mut di, mut up, mut rh) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());

    let mut traj = Trajectory {
        times: Vec::new(),
        fields: Vec::new(),
        steps: Vec::new(),
    };
    let tau0 = v0.time.unwrap_or(0.0);
    traj.push_record(tau0, v0.clone().with_time(tau0));
    let mut u = v0.values().to_vec();
    let mut tau = tau0;
    let mut converged = false;
    let mut step_index = 0usize;
    while tau < tau0 + tau_budget {
        let b = u.clone();
        let info = op.solve(&b, &mut u, rcfg.tau_step, &cfg, tau)?;
        for axis in 0..grid.dim() {
            drift_axis_step(
                &grid, &lines, axis, drift[axis], rcfg.tau_step, &mut u, &mut lo, &mut di,
                &mut up, &mut rh,
            );
        }
        tau += rcfg.tau_step;
        step_index += 1;
        let delta_l1 = u.iter().zip(&b).map(|(&a, &c)| (a - c).abs()).sum::<f64>() * vol;
        let (energy, energy_eps) = op.dirichlet_energies(&u);
        traj.steps.push(StepDiagnostics {
            time: tau,
            step: rcfg.tau_step,
            newton_iters: info.newton_iters,
            cg_iters: info.cg_iters,
            residual: info.residual,
            energy,
            energy_eps,
            mass: u.iter().sum::<f64>() * vol,
            sup_norm: u.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
            l2_norm: (u.iter().map(|&v| v * v).sum::<f64>() * vol).sqrt(),
            delta_l1,
        });
        if step_index % cfg.record_stride == 0 {
            traj.push_record(tau, Field::new(grid.clone(), u.clone(), Some(tau))?);
        }
        if delta_l1 < threshold {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = traj.steps.last().map(|s| s.delta_l1).unwrap_or(f64::NAN);
        return Err(Error::SolverFailed {
            time: tau,
            residual: last,
            iters: traj.steps.len(),
        });
    }
    let steady = Field::new(grid, u, Some(tau))?;
    if traj.times.last() != Some(&tau) {
        traj.push_record(tau, steady.clone());
    }
    Ok((steady, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_basics() {
        assert_eq!(regularized_flux(0.0, 1.5, 0.0), 0.0);
        assert_eq!(regularized_flux(0.0, 1.5, 0.1), 0.0);
        // 4 * 4^{-1/2} = 2
        assert!((regularized_flux(4.0, 1.5, 0.0) - 2.0).abs() < 1e-14);
        for &s in &[0.3, 1.7, 42.0] {
            for &eps in &[0.0, 1e-3, 0.5] {
                let f = regularized_flux(s, 1.5, eps);
                assert!((regularized_flux(-s, 1.5, eps) + f).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn antiderivative_matches_flux() {
        // d/ds of the antiderivative is the flux (central difference check)
        for &p in &[1.4, 1.5, 1.8, 2.0] {
            for &eps in &[0.0, 0.05] {
                for &s in &[0.2, 0.9, 3.0] {
                    let d = 1e-6;
                    let fd = (flux_antiderivative(s + d, p, eps)
                        - flux_antiderivative(s - d, p, eps))
                        / (2.0 * d);
                    let fl = regularized_flux(s, p, eps);
                    assert!(
                        (fd - fl).abs() < 1e-7 * (1.0 + fl.abs()),
                        "p={p} eps={eps} s={s}: {fd} vs {fl}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = TensorGrid::new(vec![2.0, 2.0], vec![9, 9]).unwrap();
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let cfg = StepConfig::for_grid(0.1, &grid);
        let u0 = Field::zeros(grid);
        let out = elliptic_step(&u0, 0.1, &exp, cfg.eps, None, &cfg).unwrap();
        assert!(out.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_energy_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let grid = TensorGrid::new(vec![1.0, 1.5], vec![5, 7]).unwrap();
        let mut op = AnisoDiffusion::new(grid.clone(), vec![1.5, 1.8], 0.05, BoundaryKind::Dirichlet);
        let n = grid.cell_count();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ht = 0.07;
        op.gradient(&u, &b, ht);
        let grad = op.grad.clone();
        let d = 1e-6;
        for idx in [0usize, 3, 12, 20, 34] {
            let mut up = u.clone();
            up[idx] += d;
            let mut dn = u.clone();
            dn[idx] -= d;
            let fd = (op.objective(&up, &b, ht) - op.objective(&dn, &b, ht)) / (2.0 * d);
            let rel = (fd - grad[idx]).abs() / (1.0 + grad[idx].abs());
            assert!(rel < 1e-6, "cell {idx}: fd {fd} vs grad {}", grad[idx]);
        }
        // isotropic operator too
        let mut iso = IsoDiffusion::new(grid, 1.6, 1.3, 0.05);
        iso.gradient(&u, &b, ht);
        let grad = iso.grad.clone();
        for idx in [1usize, 8, 17, 30] {
            let mut up = u.clone();
            up[idx] += d;
            let mut dn = u.clone();
            dn[idx] -= d;
            let fd = (iso.objective(&up, &b, ht) - iso.objective(&dn, &b, ht)) / (2.0 * d);
            let rel = (fd - grad[idx]).abs() / (1.0 + grad[idx].abs());
            assert!(rel < 1e-6, "iso cell {idx}: fd {fd} vs grad {}", grad[idx]);
        }
    }

    #[test]
    fn optimality_residual_enforced() {
        let grid = TensorGrid::new(vec![2.0], vec![33]).unwrap();
        let exp = ExponentVector::new(vec![1.5]).unwrap();
        let cfg = StepConfig::for_grid(0.05, &grid).with_eps(1e-3);
        let u0 = Field::from_fn(grid, |x| (1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let traj = evolve(&u0, 0.25, &cfg, &exp).unwrap();
        for s in &traj.steps {
            assert!(s.residual <= cfg.newton_tol, "residual {}", s.residual);
        }
        // energies nonincreasing along the flow
        for w in traj.steps.windows(2) {
            assert!(w[1].energy_eps <= w[0].energy_eps + 1e-10);
        }
    }

    #[test]
    fn drift_step_conserves_mass_and_positivity() {
        let grid = TensorGrid::new(vec![3.0, 2.0], vec![31, 21]).unwrap();
        let lines = Lines::new(&grid);
        let f = Field::from_fn(grid.clone(), |x| {
            (1.0 - 0.3 * x[0] * x[0] - 0.5 * x[1] * x[1]).max(0.0) + 0.01
        })
        .unwrap();
        let mut v = f.values().to_vec();
        let before: f64 = v.iter().sum();
        let (mut lo, mut di, mut up, mut rh) = (vec![], vec![], vec![], vec![]);
        for axis in 0..2 {
            drift_axis_step(
                &grid, &lines, axis, 1.7, 0.05, &mut v, &mut lo, &mut di, &mut up, &mut rh,
            );
        }
        let after: f64 = v.iter().sum();
        assert!(
            ((after - before) / before).abs() < 1e-12,
            "mass drift {}",
            (after - before) / before
        );
        assert!(v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn trajectory_checkpoint_roundtrip() {
        let grid = TensorGrid::new(vec![2.0], vec![17]).unwrap();
        let exp = ExponentVector::new(vec![1.5]).unwrap();
        let cfg = StepConfig::for_grid(0.05, &grid).with_eps(1e-3).with_stride(2);
        let u0 = Field::from_fn(grid, |x| (-x[0] * x[0]).exp()).unwrap();
        let traj = evolve(&u0, 0.3, &cfg, &exp).unwrap();
        let dir = std::env::temp_dir().join("anisodiff-traj-test");
        let _ = std::fs::remove_dir_all(&dir);
        traj.save(&dir).unwrap();
        let back = Trajectory::load(&dir).unwrap();
        assert_eq!(traj.times, back.times);
        assert_eq!(traj.steps, back.steps);
        assert_eq!(traj.fields.len(), back.fields.len());
        for (a, b) in traj.fields.iter().zip(&back.fields) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn deterministic_reruns() {
        let grid = TensorGrid::new(vec![2.0, 2.0], vec![17, 17]).unwrap();
        let exp = ExponentVector::new(vec![1.4, 1.8]).unwrap();
        let cfg = StepConfig::for_grid(0.02, &grid).with_eps(1e-3);
        let u0 = Field::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let a = evolve(&u0, 0.1, &cfg, &exp).unwrap();
        let b = evolve(&u0, 0.1, &cfg, &exp).unwrap();
        assert_eq!(a.final_field().values(), b.final_field().values());
    }
}
