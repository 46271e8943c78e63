//! Closed-form profiles and barriers.
//!
//! Explicit Barenblatt profiles for the orthotropic case (all p_i equal, the
//! operator still coordinate-wise) and the isotropic case, very singular
//! solutions, the explicit upper/lower barriers with their admissible
//! constants, and a finite-difference residual probe that certifies
//! super/subsolution signs of the stationary profile equation
//!
//! ```text
//! sum_i [ (|F_{y_i}|^{p_i-2} F_{y_i})_{y_i} + alpha sigma_i (y_i F)_{y_i} ] = 0 .
//! ```

use crate::error::{Error, Result};
use crate::exponents::{check_conditions, ExponentVector, SelfSimilarExponents};
use crate::gamma::gamma;

/// Fast branch: p_c < p < 2, everywhere-positive profile with power tails.
/// Slow branch: p > 2, compactly supported profile with a free boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Fast,
    Slow,
}

/// Explicit orthotropic Barenblatt profile
///
/// ```text
/// fast:  F(y) = ( C0 + (2-p)/p * lambda^{-1/(p-1)} * sum_i |y_i|^{p/(p-1)} )^{-(p-1)/(2-p)}
/// slow:  F(y) = ( C0 - (p-2)/p * lambda^{-1/(p-1)} * sum_i |y_i|^{p/(p-1)} )_+^{ (p-1)/(p-2)}
/// ```
///
/// with `lambda = N(p-2) + p`. The free constant `C0 > 0` fixes the mass.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthotropicProfile {
    pub n: usize,
    pub p: f64,
    pub c0: f64,
    pub lambda: f64,
    pub branch: Branch,
}

impl OrthotropicProfile {
    pub fn new(n: usize, p: f64, c0: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!("C0 = {c0} must be > 0")));
        }
        let nf = n as f64;
        let pc = 2.0 * nf / (nf + 1.0);
        let branch = if p > pc && p < 2.0 {
            Branch::Fast
        } else if p > 2.0 {
            Branch::Slow
        } else {
            return Err(Error::InvalidExponent(format!(
                "p = {p} outside both branches (need p_c = {pc} < p < 2 or p > 2)"
            )));
        };
        let lambda = nf * (p - 2.0) + p;
        debug_assert!(lambda > 0.0);
        Ok(Self {
            n,
            p,
            c0,
            lambda,
            branch,
        })
    }

    /// Coefficient of the coordinate sum inside the bracket.
    fn sum_coeff(&self) -> f64 {
        let p = self.p;
        ((2.0 - p) / p).abs() * self.lambda.powf(-1.0 / (p - 1.0))
    }

    /// `sum_i |y_i|^{p/(p-1)}`.
    fn coord_sum(&self, y: &[f64]) -> f64 {
        let q = self.p / (self.p - 1.0);
        y.iter().map(|&yi| yi.abs().powf(q)).sum()
    }

    /// Evaluate the profile; total on R^N (the slow branch vanishes beyond
    /// its free boundary via the positive part).
    pub fn eval(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.n);
        let p = self.p;
        let s = self.coord_sum(y);
        match self.branch {
            Branch::Fast => {
                let bracket = self.c0 + self.sum_coeff() * s;
                bracket.powf(-(p - 1.0) / (2.0 - p))
            }
            Branch::Slow => {
                let bracket = self.c0 - self.sum_coeff() * s;
                if bracket <= 0.0 {
                    0.0
                } else {
                    bracket.powf((p - 1.0) / (p - 2.0))
                }
            }
        }
    }

    /// Analytic partial derivative along `axis` (fast branch).
    pub fn eval_derivative(&self, y: &[f64], axis: usize) -> f64 {
        let p = self.p;
        let q = p / (p - 1.0);
        let s = (p - 1.0) / (2.0 - p);
        match self.branch {
            Branch::Fast => {
                let bracket = self.c0 + self.sum_coeff() * self.coord_sum(y);
                let yi = y[axis];
                -s * self.sum_coeff() * q * yi.abs().powf(q - 1.0) * yi.signum()
                    * bracket.powf(-s - 1.0)
            }
            Branch::Slow => {
                let bracket = self.c0 - self.sum_coeff() * self.coord_sum(y);
                if bracket <= 0.0 {
                    return 0.0;
                }
                let s2 = (p - 1.0) / (p - 2.0);
                let yi = y[axis];
                -s2 * self.sum_coeff() * q * yi.abs().powf(q - 1.0) * yi.signum()
                    * bracket.powf(s2 - 1.0)
            }
        }
    }

    /// Exact mass `int F dy`, via the Dirichlet reduction
    /// `int g(sum |y_i|^q) dy = 2^N Gamma(1/q)^N / (q^N Gamma(N/q)) int_0^inf g(t) t^{N/q-1} dt`
    /// and a Beta integral. Exists on the fast branch only for p > p_c (enforced
    /// at construction).
    pub fn mass(&self) -> f64 {
        let n = self.n as f64;
        let p = self.p;
        let q = p / (p - 1.0);
        let b = n / q;
        let c = self.sum_coeff();
        let shell = (2.0 * gamma(1.0 / q) / q).powf(n) / gamma(b);
        match self.branch {
            Branch::Fast => {
                let s = (p - 1.0) / (2.0 - p);
                // int_0^inf (C0 + c t)^{-s} t^{b-1} dt = C0^{b-s} c^{-b} B(b, s-b)
                shell
                    * self.c0.powf(b - s)
                    * c.powf(-b)
                    * gamma(b)
                    * gamma(s - b)
                    / gamma(s)
            }
            Branch::Slow => {
                let s2 = (p - 1.0) / (p - 2.0);
                // int_0^{C0/c} (C0 - c t)^{s2} t^{b-1} dt = C0^{s2+b} c^{-b} B(b, s2+1)
                shell
                    * self.c0.powf(s2 + b)
                    * c.powf(-b)
                    * gamma(b)
                    * gamma(s2 + 1.0)
                    / gamma(s2 + 1.0 + b)
            }
        }
    }

    /// Profile of prescribed total mass, solving for C0 in the closed-form
    /// mass (the map C0 -> mass is a pure power law).
    pub fn with_mass(n: usize, p: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("mass must be > 0".into()));
        }
        let unit = Self::new(n, p, 1.0)?;
        let nf = n as f64;
        let q = p / (p - 1.0);
        let b = nf / q;
        let expo = match unit.branch {
            Branch::Fast => b - (p - 1.0) / (2.0 - p),
            Branch::Slow => (p - 1.0) / (p - 2.0) + b,
        };
        let c0 = (mass / unit.mass()).powf(1.0 / expo);
        Self::new(n, p, c0)
    }

    /// Mass-changing transform `T_k[F](y) = k F(k^{(2-p)/p} y)`, which maps
    /// profiles to profiles: the result is again orthotropic with
    /// `C0' = C0 k^{-(2-p)/(p-1)}`.
    pub fn transform(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter("k must be > 0".into()));
        }
        let c0 = self.c0 * k.powf(-(2.0 - self.p) / (self.p - 1.0));
        Self::new(self.n, self.p, c0)
    }

    /// Self-similar time evaluation `B(x, t) = t^{-alpha} F(t^{-alpha/N} x)`
    /// with the orthotropic exponent `alpha = N/(N p - 2N + p)`.
    pub fn barenblatt(&self, x: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("t = {t} must be > 0")));
        }
        let n = self.n as f64;
        let alpha = n / (n * self.p - 2.0 * n + self.p);
        let scale = t.powf(-alpha / n);
        let y: Vec<f64> = x.iter().map(|&xi| xi * scale).collect();
        Ok(t.powf(-alpha) * self.eval(&y))
    }
}

/// Exact mass multiplier of `T_k`: `k^{N + 1 - 2N/p}`.
pub fn mass_factor(n: usize, p: f64, k: f64) -> f64 {
    k.powf(n as f64 + 1.0 - 2.0 * n as f64 / p)
}

/// Isotropic Barenblatt profile (radial, `|y|` in place of the coordinate
/// sum). `p = 2` returns the Gaussian heat kernel `(4 pi)^{-N/2} e^{-|y|^2/4}`
/// (mass one; C0 ignored).
pub fn eval_isotropic_barenblatt(n: usize, p: f64, c0: f64, y: &[f64]) -> Result<f64> {
    let nf = n as f64;
    let r2: f64 = y.iter().map(|&yi| yi * yi).sum();
    if p == 2.0 {
        return Ok((4.0 * std::f64::consts::PI).powf(-nf / 2.0) * (-r2 / 4.0).exp());
    }
    let pc = 2.0 * nf / (nf + 1.0);
    let lambda = nf * (p - 2.0) + p;
    if p > pc && p < 2.0 {
        let bracket =
            c0 + (2.0 - p) / p * lambda.powf(-1.0 / (p - 1.0)) * r2.sqrt().powf(p / (p - 1.0));
        Ok(bracket.powf(-(p - 1.0) / (2.0 - p)))
    } else if p > 2.0 {
        let bracket =
            c0 - (p - 2.0) / p * lambda.powf(-1.0 / (p - 1.0)) * r2.sqrt().powf(p / (p - 1.0));
        Ok(if bracket <= 0.0 {
            0.0
        } else {
            bracket.powf((p - 1.0) / (p - 2.0))
        })
    } else {
        Err(Error::InvalidExponent(format!(
            "p = {p} outside both branches (need p_c = {pc} < p < 2, p = 2, or p > 2)"
        )))
    }
}

/// Very singular solution (fast branch, putting C0 = 0):
/// `V(x,t) = k1 t^{1/(2-p)} (sum_i |x_i|^{p/(p-1)})^{-(p-1)/(2-p)}`.
/// Signals an error at x = 0 where the spatial factor blows up.
pub fn very_singular(n: usize, p: f64, x: &[f64], t: f64, k1: f64) -> Result<f64> {
    let nf = n as f64;
    let pc = 2.0 * nf / (nf + 1.0);
    if !(p > pc && p < 2.0) {
        return Err(Error::InvalidExponent(format!(
            "very singular solution needs p_c = {pc} < p < 2, got {p}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("t must be > 0".into()));
    }
    let q = p / (p - 1.0);
    let s: f64 = x.iter().map(|&xi| xi.abs().powf(q)).sum();
    if s == 0.0 {
        return Err(Error::SingularPoint("x = 0".into()));
    }
    Ok(k1 * t.powf(1.0 / (2.0 - p)) * s.powf(-(p - 1.0) / (2.0 - p)))
}

/// Separated-variables very singular solution:
/// `V(x,t) = k2 t^{1/(2-p)} sum_i |x_i|^{-p/(2-p)}`.
pub fn very_singular_separated(n: usize, p: f64, x: &[f64], t: f64, k2: f64) -> Result<f64> {
    let nf = n as f64;
    let pc = 2.0 * nf / (nf + 1.0);
    if !(p > pc && p < 2.0) {
        return Err(Error::InvalidExponent(format!(
            "very singular solution needs p_c = {pc} < p < 2, got {p}"
        )));
    }
    if x.iter().any(|&xi| xi == 0.0) {
        return Err(Error::SingularPoint("some x_i = 0".into()));
    }
    let s: f64 = x.iter().map(|&xi| xi.abs().powf(-p / (2.0 - p))).sum();
    Ok(k2 * t.powf(1.0 / (2.0 - p)) * s)
}

/// Outer upper barrier `Fbar(y) = (sum_i gamma_i |y_i|^{p_i/(2-p_i)})^{-1}`,
/// a supersolution of the stationary profile equation away from the
/// coordinate skeleton when the `gamma_i` satisfy the admissible bound.
#[derive(Debug, Clone)]
pub struct UpperBarrier {
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    /// Optional truncation level; `eval_truncated` returns min(Fbar, fstar).
    pub fstar: Option<f64>,
}

impl UpperBarrier {
    pub fn new(gamma: Vec<f64>, p: Vec<f64>, fstar: Option<f64>) -> Result<Self> {
        if gamma.len() != p.len() || gamma.is_empty() {
            return Err(Error::InvalidParameter(
                "gamma and p must have equal nonzero length".into(),
            ));
        }
        if gamma.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidParameter("all gamma_i must be > 0".into()));
        }
        if p.iter().any(|&pi| !(pi > 1.0 && pi < 2.0)) {
            return Err(Error::InvalidExponent(
                "upper barrier needs 1 < p_i < 2".into(),
            ));
        }
        if let Some(f) = fstar {
            if !(f > 0.0) {
                return Err(Error::InvalidParameter("fstar must be > 0".into()));
            }
        }
        Ok(Self { gamma, p, fstar })
    }

    /// Largest admissible constants:
    ///
    /// ```text
    /// gamma_i = [ alpha/N (min_j {sigma_j p_j/(2-p_j)} - 1)
    ///             * 1/(2(p_i-1)) * (p_i/(2-p_i))^{-p_i} ]^{1/(2-p_i)}
    /// ```
    ///
    /// Requires `sigma_i p_i/(2-p_i) > 1` for every axis (a consequence of
    /// (H1) + (H2); rejected otherwise).
    pub fn admissible_gammas(exp: &ExponentVector, ss: &SelfSimilarExponents) -> Result<Vec<f64>> {
        let cond = check_conditions(exp);
        if !(cond.h1 && cond.h2) {
            return Err(Error::ConditionViolated(
                "upper barrier needs (H1) and (H2)".into(),
            ));
        }
        let n = exp.dim() as f64;
        let min_sp = exp
            .p()
            .iter()
            .zip(&ss.sigma)
            .map(|(&pi, &si)| si * pi / (2.0 - pi))
            .fold(f64::INFINITY, f64::min);
        if min_sp <= 1.0 {
            return Err(Error::ConditionViolated(format!(
                "barrier hypothesis fails: min_i sigma_i p_i/(2-p_i) = {min_sp} <= 1"
            )));
        }
        Ok(exp
            .p()
            .iter()
            .map(|&pi| {
                let r = pi / (2.0 - pi);
                let base = ss.alpha / n * (min_sp - 1.0) / (2.0 * (pi - 1.0)) * r.powf(-pi);
                base.powf(1.0 / (2.0 - pi))
            })
            .collect())
    }

    /// Untruncated barrier; singular at the origin.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let s = self.coord_sum(y);
        if s == 0.0 {
            return Err(Error::SingularPoint("upper barrier at y = 0".into()));
        }
        Ok(1.0 / s)
    }

    /// Truncated barrier `G = min(Fbar, fstar)`, total on R^N.
    pub fn eval_truncated(&self, y: &[f64]) -> Result<f64> {
        let fstar = self.fstar.ok_or_else(|| {
            Error::InvalidParameter("no truncation level set on this barrier".into())
        })?;
        let s = self.coord_sum(y);
        Ok(if s == 0.0 { fstar } else { (1.0 / s).min(fstar) })
    }

    fn coord_sum(&self, y: &[f64]) -> f64 {
        self.gamma
            .iter()
            .zip(&self.p)
            .zip(y)
            .map(|((&g, &pi), &yi)| g * yi.abs().powf(pi / (2.0 - pi)))
            .sum()
    }
}

/// Lower barrier `Funder(y) = (A + sum_i |y_i|^{theta_i})^{-gamma}`, a
/// subsolution of the stationary profile equation when `A > A0`.
#[derive(Debug, Clone)]
pub struct LowerBarrier {
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub a: f64,
}

impl LowerBarrier {
    /// Validates the structural constraint `gamma theta_i > p_i/(2-p_i)`
    /// (equivalently `1/(gamma theta_i) < (2-p_i)/p_i`) for every axis;
    /// `a` must exceed the threshold from [`LowerBarrier::a0`].
    pub fn new(exp: &ExponentVector, gamma: f64, theta: Vec<f64>, a: f64) -> Result<Self> {
        if theta.len() != exp.dim() {
            return Err(Error::InvalidParameter("theta length must match N".into()));
        }
        if theta.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidParameter(
                "each theta_i must lie in (0, 1]".into(),
            ));
        }
        for (i, (&pi, &ti)) in exp.p().iter().zip(&theta).enumerate() {
            if gamma * ti <= pi / (2.0 - pi) {
                return Err(Error::ConditionViolated(format!(
                    "gamma theta_{} = {} must exceed p/(2-p) = {}",
                    i + 1,
                    gamma * ti,
                    pi / (2.0 - pi)
                )));
            }
        }
        if !(a > 0.0) {
            return Err(Error::InvalidParameter("A must be > 0".into()));
        }
        Ok(Self { gamma, theta, a })
    }

    /// Threshold `A0`, the max over axes of
    ///
    /// ```text
    /// [ N gamma^{p_i-1} (p_i-1)(gamma+1) theta_i^{p_i}
    ///   / (alpha (gamma max_j{sigma_j theta_j} - 1)) ]^{1/(gamma - gamma(p_i-1) - p_i/theta_i)}
    /// ```
    ///
    /// The printed formula restricts the max to an unspecified index range;
    /// taking all axes is conservative (a larger threshold preserves the
    /// subsolution property).
    pub fn a0(
        exp: &ExponentVector,
        ss: &SelfSimilarExponents,
        gamma: f64,
        theta: &[f64],
    ) -> Result<f64> {
        if theta.len() != exp.dim() {
            return Err(Error::InvalidParameter("theta length must match N".into()));
        }
        let n = exp.dim() as f64;
        let max_st = ss
            .sigma
            .iter()
            .zip(theta)
            .map(|(&s, &t)| s * t)
            .fold(f64::NEG_INFINITY, f64::max);
        if gamma * max_st <= 1.0 {
            return Err(Error::ConditionViolated(format!(
                "need gamma max_i sigma_i theta_i > 1, got {}",
                gamma * max_st
            )));
        }
        let mut a0 = 0.0f64;
        for (&pi, &ti) in exp.p().iter().zip(theta) {
            let expo_denom = gamma - gamma * (pi - 1.0) - pi / ti;
            if expo_denom <= 0.0 {
                return Err(Error::ConditionViolated(format!(
                    "need gamma(p_i-1) + p_i/theta_i < gamma (axis with p = {pi})"
                )));
            }
            let num = n * gamma.powf(pi - 1.0) * (pi - 1.0) * (gamma + 1.0) * ti.powf(pi);
            let den = ss.alpha * (gamma * max_st - 1.0);
            a0 = a0.max((num / den).powf(1.0 / expo_denom));
        }
        Ok(a0)
    }

    /// Total on R^N.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let s: f64 = y
            .iter()
            .zip(&self.theta)
            .map(|(&yi, &ti)| yi.abs().powf(ti))
            .sum();
        (self.a + s).powf(-self.gamma)
    }
}

/// Central-difference residual of the stationary profile equation at `y`:
///
/// ```text
/// R(y) = sum_i [ (Phi_i)_{y_i} + alpha sigma_i (y_i F)_{y_i} ],
///        Phi_i = |F_{y_i}|^{p_i-2} F_{y_i}
/// ```
///
/// The inner derivative `F_{y_i}` uses a fourth-order central stencil with
/// step h/2 and the outer derivatives a second-order one with step h, so the
/// stencil stays within `y_i +- 2h` and the total error is O(h^2) for smooth
/// F. Sign convention: `R <= 0` (up to the finite-difference tolerance)
/// certifies a supersolution at `y`, `R >= 0` a subsolution.
///
/// Points closer than `2h` to a coordinate axis are rejected: by symmetry
/// the flux `|F_{y_i}|^{p_i-2}` is singular where `F_{y_i} = 0`.
pub fn stationary_residual<F: Fn(&[f64]) -> f64>(
    f_eval: F,
    exp: &ExponentVector,
    ss: &SelfSimilarExponents,
    y: &[f64],
    h: f64,
) -> Result<f64> {
    let n = exp.dim();
    if y.len() != n {
        return Err(Error::InvalidParameter("point dimension mismatch".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("h must be > 0".into()));
    }
    for &yi in y {
        if yi.abs() < 2.0 * h {
            return Err(Error::SingularPoint(format!(
                "point within 2h = {} of a coordinate axis",
                2.0 * h
            )));
        }
    }
    // 4th-order central derivative along `axis` with inner step `delta`.
    let deriv4 = |z: &[f64], axis: usize, delta: f64| -> f64 {
        let mut zp = z.to_vec();
        let sample = |zp: &mut Vec<f64>, off: f64| {
            zp[axis] = z[axis] + off;
            f_eval(zp)
        };
        (-sample(&mut zp, 2.0 * delta) + 8.0 * sample(&mut zp, delta)
            - 8.0 * sample(&mut zp, -delta)
            + sample(&mut zp, -2.0 * delta))
            / (12.0 * delta)
    };
    let flux = |s: f64, p: f64| -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(p - 2.0) * s
        }
    };
    let mut residual = 0.0;
    for i in 0..n {
        let p = exp.p()[i];
        let mut yp = y.to_vec();
        // flux term: second-order outer difference of Phi_i at y +- h e_i
        yp[i] = y[i] + h;
        let phi_plus = flux(deriv4(&yp, i, h / 2.0), p);
        let f_plus = f_eval(&yp);
        yp[i] = y[i] - h;
        let phi_minus = flux(deriv4(&yp, i, h / 2.0), p);
        let f_minus = f_eval(&yp);
        let flux_div = (phi_plus - phi_minus) / (2.0 * h);
        // drift term: (y_i F)_{y_i} by the same outer stencil
        let drift_div = ((y[i] + h) * f_plus - (y[i] - h) * f_minus) / (2.0 * h);
        residual += flux_div + ss.alpha * ss.sigma[i] * drift_div;
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::selfsim_exponents;

    #[test]
    fn orthotropic_point_values() {
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        assert!((f.eval(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        // lambda = 0.5, lambda^{-2} = 4, (2-p)/p = 1/3: F(1,0) = (1 + 4/3)^{-1} = 3/7
        assert!((f.eval(&[1.0, 0.0]) - 3.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn slow_branch_free_boundary() {
        let f = OrthotropicProfile::new(2, 3.0, 1.0).unwrap();
        assert_eq!(f.branch, Branch::Slow);
        // vanishes once sum |y_i|^{3/2} >= 3 lambda^{1/2}, lambda = 5
        let r = 3.0 * 5.0f64.sqrt();
        let y = r.powf(2.0 / 3.0) + 0.01;
        assert_eq!(f.eval(&[y, 0.0]), 0.0);
        assert!(f.eval(&[0.5, 0.5]) > 0.0);
    }

    #[test]
    fn rejects_subcritical() {
        // p_c(2) = 4/3; p below it has no integrable profile
        assert!(OrthotropicProfile::new(2, 1.3, 1.0).is_err());
        assert!(OrthotropicProfile::new(2, 2.0, 1.0).is_err());
        assert!(OrthotropicProfile::new(2, 1.5, 0.0).is_err());
    }

    #[test]
    fn isotropic_matches_orthotropic_on_axis() {
        // On single-axis points both reduce to the same scalar formula.
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        for &y in &[0.0, 0.3, 1.0, 2.5] {
            let a = f.eval(&[y, 0.0]);
            let b = eval_isotropic_barenblatt(2, 1.5, 1.0, &[y, 0.0]).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!((eval_isotropic_barenblatt(2, 1.5, 1.0, &[1.0, 0.0]).unwrap() - 3.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_kernel_at_p_two() {
        let v = eval_isotropic_barenblatt(2, 2.0, 1.0, &[0.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn barenblatt_time_scaling() {
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        // t = 1 is the identity
        assert!((f.barenblatt(&[0.7, -1.2], 1.0).unwrap() - f.eval(&[0.7, -1.2])).abs() < 1e-15);
        // alpha = 4 at the origin
        assert!((f.barenblatt(&[0.0, 0.0], 2.0).unwrap() - 2.0f64.powi(-4)).abs() < 1e-15);
        assert!(f.barenblatt(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn mass_transform_rules() {
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        let id = f.transform(1.0).unwrap();
        assert!((id.c0 - f.c0).abs() < 1e-15);
        // mass factor 2^{3 - 8/3} = 2^{1/3}
        assert!((mass_factor(2, 1.5, 2.0) - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-14);
        // closed-form masses obey the factor exactly
        for &k in &[0.5, 2.0, 10.0] {
            let ratio = f.transform(k).unwrap().mass() / f.mass();
            assert!(
                (ratio - mass_factor(2, 1.5, k)).abs() < 1e-10 * ratio,
                "k = {k}: ratio {ratio}"
            );
        }
        // transform agrees pointwise with k F(k^{(2-p)/p} y)
        let k = 2.0;
        let tf = f.transform(k).unwrap();
        let beta = (2.0 - 1.5) / 1.5;
        for y in [[0.4, 0.9], [2.0, -1.0]] {
            let direct = k * f.eval(&[k.powf(beta) * y[0], k.powf(beta) * y[1]]);
            assert!((tf.eval(&y) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn with_mass_calibration() {
        for &m in &[1.0, 4.0, 12.8] {
            let f = OrthotropicProfile::with_mass(2, 1.5, m).unwrap();
            assert!((f.mass() - m).abs() < 1e-10 * m);
        }
        let f = OrthotropicProfile::with_mass(1, 1.5, 3.0).unwrap();
        assert!((f.mass() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn very_singular_scalings() {
        // time factor V(x, 2t)/V(x, t) = 2^{1/(2-p)}
        let x = [0.7, 1.1];
        let a = very_singular(2, 1.5, &x, 2.0, 1.0).unwrap();
        let b = very_singular(2, 1.5, &x, 1.0, 1.0).unwrap();
        assert!((a / b - 2.0f64.powf(2.0)).abs() < 1e-12);
        // axis decay exponent p/(2-p) = 3 for p = 1.5
        let v1 = very_singular(2, 1.5, &[1.0, 0.0], 1.0, 1.0).unwrap();
        let v2 = very_singular(2, 1.5, &[2.0, 0.0], 1.0, 1.0).unwrap();
        assert!(((v1 / v2).ln() / 2.0f64.ln() - 3.0).abs() < 1e-12);
        assert!(very_singular(2, 1.5, &[0.0, 0.0], 1.0, 1.0).is_err());
        assert!(very_singular_separated(2, 1.5, &[1.0, 0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn very_singular_not_integrable_near_origin() {
        // Quadrature over shrinking annuli keeps growing: exponent -3 < -N = -2.
        let mut prev = 0.0;
        let mut annulus_masses = vec![];
        for k in 0..6 {
            let r_out = 0.5f64.powi(k);
            let r_in = r_out / 2.0;
            // crude polar quadrature of the annulus
            let (nr, nt) = (64, 64);
            let mut s = 0.0;
            for ir in 0..nr {
                let r = r_in + (ir as f64 + 0.5) / nr as f64 * (r_out - r_in);
                for it in 0..nt {
                    let th = (it as f64 + 0.5) / nt as f64 * std::f64::consts::FRAC_PI_2;
                    let x = [r * th.cos(), r * th.sin()];
                    s += very_singular(2, 1.5, &x, 1.0, 1.0).unwrap() * r;
                }
            }
            s *= 4.0 * (r_out - r_in) / nr as f64 * std::f64::consts::FRAC_PI_2 / nt as f64;
            annulus_masses.push(s);
            assert!(s > prev, "annulus mass must grow toward the origin");
            prev = s;
        }
    }

    #[test]
    fn upper_barrier_gammas_and_eval() {
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let ss = selfsim_exponents(&exp).unwrap();
        let g = UpperBarrier::admissible_gammas(&exp, &ss).unwrap();
        assert!((g[0] - 0.037_037_037_037_037_035).abs() < 1e-12);
        assert!((g[0] - g[1]).abs() < 1e-15, "equal exponents, equal gammas");

        let exp = ExponentVector::new(vec![1.4, 1.8]).unwrap();
        let ss = selfsim_exponents(&exp).unwrap();
        let g = UpperBarrier::admissible_gammas(&exp, &ss).unwrap();
        assert!(g[0] > 0.0 && g[1] > 0.0);

        let b = UpperBarrier::new(vec![1.0, 1.0], vec![1.5, 1.5], Some(0.4)).unwrap();
        assert!((b.eval(&[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((b.eval_truncated(&[1.0, 1.0]).unwrap() - 0.4).abs() < 1e-15);
        assert!(b.eval(&[0.0, 0.0]).is_err());
        assert!((b.eval_truncated(&[0.0, 0.0]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn barrier_tail_slopes() {
        // log-log axis slope of the upper barrier is -p/(2-p); of the lower, -gamma theta.
        let ub = UpperBarrier::new(vec![0.3, 0.3], vec![1.5, 1.5], None).unwrap();
        let s1 = (ub.eval(&[40.0, 1e-9]).unwrap() / ub.eval(&[20.0, 1e-9]).unwrap()).ln()
            / 2.0f64.ln();
        assert!((s1 + 3.0).abs() < 0.01 * 3.0, "slope {s1}");

        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let lb = LowerBarrier::new(&exp, 4.0, vec![1.0, 1.0], 7.0).unwrap();
        let s2 = (lb.eval(&[4000.0, 0.0]) / lb.eval(&[2000.0, 0.0])).ln() / 2.0f64.ln();
        assert!((s2 + 4.0).abs() < 0.01 * 4.0, "slope {s2}");
    }

    #[test]
    fn lower_barrier_a0_example() {
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let ss = selfsim_exponents(&exp).unwrap();
        let a0 = LowerBarrier::a0(&exp, &ss, 4.0, &[1.0, 1.0]).unwrap();
        assert!((a0 - 6.25).abs() < 1e-12, "A0 = {a0}");
        let lb = LowerBarrier::new(&exp, 4.0, vec![1.0, 1.0], 7.0).unwrap();
        assert!((lb.eval(&[0.0, 0.0]) - 7.0f64.powi(-4)).abs() < 1e-18);
        // gamma*theta = 3 violates the strict constraint gamma theta > p/(2-p) = 3
        assert!(LowerBarrier::new(&exp, 3.0, vec![1.0, 1.0], 7.0).is_err());
    }

    #[test]
    fn lower_barrier_integrable() {
        // (A + |y1| + |y2|)^{-4} over growing boxes converges (exponent 4 > N).
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let lb = LowerBarrier::new(&exp, 4.0, vec![1.0, 1.0], 7.0).unwrap();
        let quad = |half: f64| -> f64 {
            let n = (2.0 * half) as usize; // fixed cell size across boxes
            let h = 2.0 * half / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = -half + (i as f64 + 0.5) * h;
                    let y = -half + (j as f64 + 0.5) * h;
                    s += lb.eval(&[x, y]);
                }
            }
            s * h * h
        };
        let m1 = quad(50.0);
        let m2 = quad(100.0);
        let m3 = quad(200.0);
        // tail outside half-width H scales like 1/H^2, so successive box
        // increments shrink by about 4x
        let ratio = (m3 - m2) / (m2 - m1);
        assert!(ratio > 0.0 && ratio < 0.35, "increment ratio {ratio}");
        assert!((m3 - m2).abs() < 0.05 * m3);
    }

    #[test]
    fn per_axis_flux_identity_analytic() {
        // |F'|^{p-2} F' + (alpha/N) y_i F = 0 for the explicit orthotropic profile.
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        let alpha_over_n = 2.0;
        // spot value at (1, 0): flux -6/7 against drift +6/7
        let d = f.eval_derivative(&[1.0, 0.0], 0);
        let flux = d.abs().powf(-0.5) * d;
        assert!((flux + 6.0 / 7.0).abs() < 1e-14);
        assert!((alpha_over_n * 1.0 * f.eval(&[1.0, 0.0]) - 6.0 / 7.0).abs() < 1e-14);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let y = [
                rng.gen_range(0.1..4.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 },
                rng.gen_range(0.1..4.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 },
            ];
            for axis in 0..2 {
                let d = f.eval_derivative(&y, axis);
                let flux = d.abs().powf(-0.5) * d;
                let drift = alpha_over_n * y[axis] * f.eval(&y);
                assert!(
                    (flux + drift).abs() < 1e-10,
                    "identity broken at {y:?} axis {axis}: {}",
                    flux + drift
                );
            }
        }
    }

    #[test]
    fn stationary_residual_vanishes_on_explicit_profile() {
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let ss = selfsim_exponents(&exp).unwrap();
        let f = OrthotropicProfile::new(2, 1.5, 1.0).unwrap();
        let y = [0.8, 1.3];
        let r1 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.04).unwrap();
        let r2 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.02).unwrap();
        let r3 = stationary_residual(|z| f.eval(z), &exp, &ss, &y, 0.01).unwrap();
        let order12 = (r1.abs() / r2.abs()).log2();
        let order23 = (r2.abs() / r3.abs()).log2();
        assert!(
            order12 >= 1.8 && order23 >= 1.8,
            "orders {order12:.2}, {order23:.2} (residuals {r1:.3e} {r2:.3e} {r3:.3e})"
        );
        // axis proximity guard
        assert!(stationary_residual(|z| f.eval(z), &exp, &ss, &[0.01, 1.0], 0.02).is_err());
    }

    #[test]
    fn barrier_residual_signs() {
        let exp = ExponentVector::new(vec![1.5, 1.5]).unwrap();
        let ss = selfsim_exponents(&exp).unwrap();
        let g = UpperBarrier::admissible_gammas(&exp, &ss).unwrap();
        let ub = UpperBarrier::new(g, exp.p().to_vec(), None).unwrap();
        let lb = LowerBarrier::new(&exp, 4.0, vec![1.0, 1.0], 7.5).unwrap();
        let h = 1e-3;
        for y in [[1.0, 1.0], [0.5, 2.0], [3.0, 0.7], [2.0, 2.0]] {
            let ru = stationary_residual(|z| ub.eval(z).unwrap(), &exp, &ss, &y, h).unwrap();
            let rl = stationary_residual(|z| lb.eval(z), &exp, &ss, &y, h).unwrap();
            assert!(ru <= 1e-6, "upper barrier residual {ru} at {y:?}");
            assert!(rl >= -1e-6, "lower barrier residual {rl} at {y:?}");
        }
    }
}
