//! Exponent algebra for the anisotropic p-Laplacian equation.
//!
//! Pure functions on the diffusion exponents `p_1, ..., p_N`: the
//! admissibility conditions (H1) `1 < p_i < 2`, (H2) `sum 1/p_i < (N+1)/2`,
//! (H3) `p_i <= (N+1)/N * pbar`, the self-similar exponents, the
//! symmetrization constant, the mass-scaling exponents, and the
//! doubly-nonlinear generalization.

use crate::error::{Error, Result};
use crate::gamma::{gamma, unit_ball_volume};

/// Relative tolerance used to flag near-boundary condition margins.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Dimension plus one diffusion exponent per coordinate direction.
///
/// Invariants enforced at construction: `N >= 1` and every `p_i > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVector {
    p: Vec<f64>,
}

impl ExponentVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidExponent("need at least one exponent".into()));
        }
        for (i, &pi) in p.iter().enumerate() {
            if !pi.is_finite() || pi <= 1.0 {
                return Err(Error::InvalidExponent(format!(
                    "p_{} = {} must be a finite number > 1",
                    i + 1,
                    pi
                )));
            }
        }
        Ok(Self { p })
    }

    /// All exponents equal to `p` in dimension `n`.
    pub fn orthotropic(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Harmonic mean `pbar = N / sum_i (1/p_i)`.
    pub fn pbar(&self) -> f64 {
        let n = self.dim() as f64;
        n / self.p.iter().map(|&pi| 1.0 / pi).sum::<f64>()
    }
}

/// Critical exponent `p_c(N) = 2N/(N+1)`; fundamental solutions with finite
/// mass require `pbar > p_c`.
pub fn critical_exponent(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(2.0 * n as f64 / (n as f64 + 1.0))
}

/// Outcome of testing (H1), (H2), (H3) with signed margins
/// (positive margin = condition satisfied strictly).
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    /// min_i of min(p_i - 1, 2 - p_i); H1 holds iff > 0.
    pub h1_margin: f64,
    /// (N+1)/2 - sum_i 1/p_i; H2 (strict) holds iff > 0.
    pub h2_margin: f64,
    /// (N+1)/N * pbar - p_i per axis; H3 (non-strict) holds iff >= 0.
    pub h3_margins: Vec<f64>,
    /// True when a margin sits within `BOUNDARY_TOL` of zero.
    pub h2_boundary: bool,
    pub h3_boundary: bool,
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.h1 && self.h2 && self.h3
    }
}

/// Evaluate (H1), (H2) strict, (H3) non-strict as printed.
pub fn check_conditions(exp: &ExponentVector) -> ConditionReport {
    let n = exp.dim() as f64;
    let pbar = exp.pbar();
    let h1_margin = exp
        .p()
        .iter()
        .map(|&pi| (pi - 1.0).min(2.0 - pi))
        .fold(f64::INFINITY, f64::min);
    let inv_sum: f64 = exp.p().iter().map(|&pi| 1.0 / pi).sum();
    let h2_margin = (n + 1.0) / 2.0 - inv_sum;
    let h3_margins: Vec<f64> = exp
        .p()
        .iter()
        .map(|&pi| (n + 1.0) / n * pbar - pi)
        .collect();
    let h3_min = h3_margins.iter().cloned().fold(f64::INFINITY, f64::min);
    ConditionReport {
        h1: h1_margin > 0.0,
        h2: h2_margin > 0.0,
        h3: h3_min >= 0.0,
        h1_margin,
        h2_margin,
        h2_boundary: h2_margin.abs() <= BOUNDARY_TOL * (n + 1.0) / 2.0,
        h3_boundary: h3_min.abs() <= BOUNDARY_TOL * pbar,
        h3_margins,
    }
}

/// The self-similar exponent set of the equation: solutions
/// `B(x,t) = t^{-alpha} F(t^{-a_1} x_1, ..., t^{-a_N} x_N)` with mass
/// conservation force the unique values stored here.
#[derive(Debug, Clone)]
pub struct SelfSimilarExponents {
    /// Harmonic mean of the p_i.
    pub pbar: f64,
    /// Critical exponent 2N/(N+1).
    pub pc: f64,
    /// Time-decay exponent alpha = N / (N pbar - 2N + pbar); positive iff (H2).
    pub alpha: f64,
    /// Per-axis spread fractions sigma_i = (N+1) pbar / (N p_i) - 1, sum = 1.
    pub sigma: Vec<f64>,
    /// Per-axis spread rates a_i = sigma_i * alpha.
    pub a: Vec<f64>,
    /// Mass-scaling shifts beta_i = (2 - p_i)/p_i.
    pub beta: Vec<f64>,
    /// Mass-scaling exponent mu = N + 1 - 2N/pbar = 1 - sum beta_i.
    pub mu: f64,
}

/// Compute the self-similar exponents; requires (H2) so that alpha > 0.
pub fn selfsim_exponents(exp: &ExponentVector) -> Result<SelfSimilarExponents> {
    let n = exp.dim() as f64;
    let pbar = exp.pbar();
    let denom = n * pbar - 2.0 * n + pbar;
    if denom <= 0.0 {
        return Err(Error::ConditionViolated(format!(
            "(H2) fails: alpha denominator N*pbar - 2N + pbar = {denom:.6e} is {} (pbar = {pbar:.6}, p_c = {:.6})",
            if denom == 0.0 { "zero" } else { "negative" },
            2.0 * n / (n + 1.0),
        )));
    }
    let alpha = n / denom;
    let sigma: Vec<f64> = exp
        .p()
        .iter()
        .map(|&pi| (n + 1.0) * pbar / (n * pi) - 1.0)
        .collect();
    let a: Vec<f64> = sigma.iter().map(|&s| s * alpha).collect();
    let beta: Vec<f64> = exp.p().iter().map(|&pi| (2.0 - pi) / pi).collect();
    let mu = n + 1.0 - 2.0 * n / pbar;
    Ok(SelfSimilarExponents {
        pbar,
        pc: 2.0 * n / (n + 1.0),
        alpha,
        sigma,
        a,
        beta,
        mu,
    })
}

/// The constant `Lambda` in the symmetrized isotropic comparison problem
/// `U_t - Lambda Delta_{pbar} U = g`:
///
/// ```text
/// Lambda = 2^pbar (pbar-1)^{pbar-1} / pbar^pbar
///          * [ prod_i p_i^{1/p_i} (p_i')^{1/p_i'} Gamma(1 + 1/p_i')
///              / (omega_N Gamma(1 + N/pbar')) ]^{pbar/N}
/// ```
///
/// with `p' = p/(p-1)` and `omega_N` the unit-ball volume. Reduces to 1 when
/// every `p_i = 2`.
pub fn cianchi_lambda(exp: &ExponentVector) -> Result<f64> {
    for &pi in exp.p() {
        if pi < 1.0 + 1e-6 {
            return Err(Error::InvalidExponent(format!(
                "p_i = {pi} too close to 1 for the Lambda formula (p' overflows)"
            )));
        }
    }
    let n = exp.dim();
    let nf = n as f64;
    let pbar = exp.pbar();
    let pbar_prime = pbar / (pbar - 1.0);
    let prefactor =
        2f64.powf(pbar) * (pbar - 1.0).powf(pbar - 1.0) / pbar.powf(pbar);
    let mut product = 1.0;
    for &pi in exp.p() {
        let pi_prime = pi / (pi - 1.0);
        product *= pi.powf(1.0 / pi) * pi_prime.powf(1.0 / pi_prime) * gamma(1.0 + 1.0 / pi_prime);
    }
    let bracket = product / (unit_ball_volume(n) * gamma(1.0 + nf / pbar_prime));
    Ok(prefactor * bracket.powf(pbar / nf))
}

/// Parameters of the anisotropic doubly nonlinear equation
/// `u_t = sum_i (|(u^{m_i})_{x_i}|^{p_i-2} (u^{m_i})_{x_i})_{x_i}`,
/// with the derived means and self-similar exponents.
#[derive(Debug, Clone)]
pub struct DnlParameters {
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    /// Arithmetic mean of the m_i.
    pub mbar: f64,
    /// Harmonic mean of the p_i.
    pub pbar: f64,
    /// Mixed mean defined by q/pbar = (1/N) sum_i m_i/p_i.
    pub q: f64,
}

impl DnlParameters {
    pub fn new(p: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        let exp = ExponentVector::new(p)?;
        if m.len() != exp.dim() {
            return Err(Error::InvalidExponent(
                "m and p must have the same length".into(),
            ));
        }
        for (i, &mi) in m.iter().enumerate() {
            if !mi.is_finite() || mi <= 0.0 {
                return Err(Error::InvalidExponent(format!(
                    "m_{} = {} must be a finite number > 0",
                    i + 1,
                    mi
                )));
            }
        }
        let n = exp.dim() as f64;
        let pbar = exp.pbar();
        let mbar = m.iter().sum::<f64>() / n;
        let q = pbar * m.iter().zip(exp.p()).map(|(&mi, &pi)| mi / pi).sum::<f64>() / n;
        Ok(Self {
            p: exp.p().to_vec(),
            m,
            mbar,
            pbar,
            q,
        })
    }
}

/// Result of the doubly-nonlinear self-similar algebra. When (DN2) fails,
/// `alpha` is still reported (non-positive) but the spread fractions are not.
#[derive(Debug, Clone)]
pub struct DnlExponents {
    pub alpha: f64,
    /// sigma_i = (1/p_i)(1/alpha + 1 - m_i (p_i - 1)); None when (DN2) fails.
    pub sigma: Option<Vec<f64>>,
    /// (DN2): mbar pbar + pbar/N > q + 1, equivalent to alpha > 0.
    pub dn2: bool,
    /// (DN3) per axis: m_i (p_i - 1) < 1/alpha + 1, equivalent to sigma_i > 0.
    pub dn3: Vec<bool>,
}

/// `alpha = N / (N (mbar pbar - q - 1) + pbar)` and the sigma_i per axis.
/// With every `m_i = 1` this reduces exactly to [`selfsim_exponents`].
pub fn dnl_exponents(dnl: &DnlParameters) -> DnlExponents {
    let n = dnl.p.len() as f64;
    let denom = n * (dnl.mbar * dnl.pbar - dnl.q - 1.0) + dnl.pbar;
    let alpha = n / denom;
    let dn2 = dnl.mbar * dnl.pbar + dnl.pbar / n > dnl.q + 1.0;
    let inv_alpha_plus_1 = dnl.mbar * dnl.pbar + dnl.pbar / n - dnl.q;
    let dn3: Vec<bool> = dnl
        .p
        .iter()
        .zip(&dnl.m)
        .map(|(&pi, &mi)| mi * (pi - 1.0) < inv_alpha_plus_1)
        .collect();
    let sigma = if dn2 {
        Some(
            dnl.p
                .iter()
                .zip(&dnl.m)
                .map(|(&pi, &mi)| (1.0 / alpha + 1.0 - mi * (pi - 1.0)) / pi)
                .collect(),
        )
    } else {
        None
    };
    DnlExponents {
        alpha,
        sigma,
        dn2,
        dn3,
    }
}

/// Classification of a point of the N = 2 exponent plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// H1, H2 and H3 all hold (fast diffusion with admissible anisotropy).
    Admissible,
    /// Within `BOUNDARY_TOL` of the H2 hyperbola or an H3 line.
    Boundary,
    FailsH1,
    FailsH2,
    FailsH3,
}

#[derive(Debug, Clone)]
pub struct RegionClass {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub label: RegionLabel,
    /// (p1 - 2/3)(p2 - 2/3) - 4/9; H2 holds iff > 0.
    pub hyperbola_margin: f64,
    /// min(2 p2 - p1, 2 p1 - p2); H3 holds iff >= 0.
    pub line_margin: f64,
}

/// Classify a pair `(p1, p2)` for N = 2 using the planar forms of the
/// conditions: the hyperbola `(p1 - 2/3)(p2 - 2/3) > 4/9` for (H2) and the
/// lines `p1 <= 2 p2`, `p2 <= 2 p1` for (H3). These are algebraically
/// equivalent to [`check_conditions`] on the same pair.
pub fn classify_region(p1: f64, p2: f64) -> Result<RegionClass> {
    if p1 <= 1.0 || p2 <= 1.0 {
        return Err(Error::InvalidExponent(
            "classify_region requires p1, p2 > 1".into(),
        ));
    }
    let h1 = p1 < 2.0 && p2 < 2.0 && p1 > 1.0 && p2 > 1.0;
    let hyperbola_margin = (p1 - 2.0 / 3.0) * (p2 - 2.0 / 3.0) - 4.0 / 9.0;
    let h2 = hyperbola_margin > 0.0;
    let line_margin = (2.0 * p2 - p1).min(2.0 * p1 - p2);
    let h3 = line_margin >= 0.0;
    let on_boundary =
        hyperbola_margin.abs() <= BOUNDARY_TOL || line_margin.abs() <= BOUNDARY_TOL;
    let label = if on_boundary {
        RegionLabel::Boundary
    } else if !h2 {
        RegionLabel::FailsH2
    } else if !h3 {
        RegionLabel::FailsH3
    } else if !h1 {
        RegionLabel::FailsH1
    } else {
        RegionLabel::Admissible
    };
    Ok(RegionClass {
        h1,
        h2,
        h3,
        label,
        hyperbola_margin,
        line_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(p: &[f64]) -> ExponentVector {
        ExponentVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn pbar_values() {
        assert!((ev(&[1.5, 1.5]).pbar() - 1.5).abs() < 1e-15);
        // 2 / (3/4 + 1/2) = 1.6
        assert!((ev(&[4.0 / 3.0, 2.0]).pbar() - 1.6).abs() < 1e-14);
        assert!((ev(&[1.5, 1.5, 1.5]).pbar() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(ExponentVector::new(vec![]).is_err());
        assert!(ExponentVector::new(vec![1.0, 1.5]).is_err());
        assert!(ExponentVector::new(vec![0.9]).is_err());
        assert!(ExponentVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn critical_exponents() {
        assert_eq!(critical_exponent(2).unwrap(), 4.0 / 3.0);
        assert_eq!(critical_exponent(3).unwrap(), 1.5);
        assert_eq!(critical_exponent(1).unwrap(), 1.0);
        assert!(critical_exponent(0).is_err());
    }

    #[test]
    fn conditions_examples() {
        let r = check_conditions(&ev(&[1.5, 1.5]));
        assert!(r.h1 && r.h2 && r.h3);
        assert!((r.h2_margin - (1.5 - 4.0 / 3.0)).abs() < 1e-12);

        // (4/3, 4/3) sits exactly on the H2 boundary.
        let r = check_conditions(&ev(&[4.0 / 3.0, 4.0 / 3.0]));
        assert!(!r.h2);
        assert!(r.h2_boundary);

        // Strong anisotropy breaks H3: pbar = 2/(0.4 + 1/1.1), 1.5*pbar < 2.5.
        let r = check_conditions(&ev(&[2.5, 1.1]));
        assert!(!r.h3);
    }

    #[test]
    fn selfsim_exponents_examples() {
        let ss = selfsim_exponents(&ev(&[1.5, 1.5])).unwrap();
        assert!((ss.alpha - 4.0).abs() < 1e-12);
        assert!((ss.sigma[0] - 0.5).abs() < 1e-12);
        assert!((ss.mu - 1.0 / 3.0).abs() < 1e-12);

        let ss = selfsim_exponents(&ev(&[1.4, 1.8])).unwrap();
        assert!((ss.alpha - 2.758_620_689_655_17).abs() < 1e-10);
        assert!((ss.sigma[0] - 0.6875).abs() < 1e-12);
        assert!((ss.sigma[1] - 0.3125).abs() < 1e-12);
    }

    #[test]
    fn selfsim_invariants() {
        for p in [
            vec![1.5, 1.5],
            vec![1.4, 1.8],
            vec![1.9, 1.6, 1.7],
            vec![1.45],
        ] {
            let exp = ev(&p);
            let ss = selfsim_exponents(&exp).unwrap();
            let n = exp.dim() as f64;
            assert!((ss.sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // time-elimination identity alpha(p_i - 1) + p_i a_i = alpha + 1
            for (i, &pi) in exp.p().iter().enumerate() {
                let lhs = ss.alpha * (pi - 1.0) + pi * ss.a[i];
                assert!((lhs - (ss.alpha + 1.0)).abs() < 1e-12);
                // second form of the sigma identity
                let rhs = (n + 1.0) / n * (ss.pbar - pi) / pi;
                assert!((ss.sigma[i] - 1.0 / n - rhs).abs() < 1e-12);
            }
            assert!((ss.mu - (1.0 - ss.beta.iter().sum::<f64>())).abs() < 1e-12);
            if check_conditions(&exp).h2 {
                assert!(ss.alpha > 0.0 && ss.mu > 0.0);
            }
        }
    }

    #[test]
    fn selfsim_rejects_h2_failure() {
        let err = selfsim_exponents(&ev(&[1.2, 1.1])).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("negative"), "got: {msg}");
    }

    #[test]
    fn lambda_reduces_to_one_at_p_two() {
        for n in 1..=4 {
            let l = cianchi_lambda(&ev(&vec![2.0; n])).unwrap();
            assert!((l - 1.0).abs() < 1e-10, "N={n}: Lambda = {l}");
        }
    }

    #[test]
    fn lambda_positive_finite() {
        let l = cianchi_lambda(&ev(&[1.5, 1.5])).unwrap();
        assert!(l.is_finite() && l > 0.0);
        assert!(cianchi_lambda(&ev(&[1.0 + 1e-9, 1.5])).is_err());
    }

    #[test]
    fn dnl_reduces_to_apl_and_pme() {
        // m_i = 1 reproduces the plain self-similar alpha exactly.
        for p in [vec![1.5, 1.5], vec![1.4, 1.8], vec![1.7, 1.6, 1.9]] {
            let exp = ev(&p);
            let ss = selfsim_exponents(&exp).unwrap();
            let dnl = DnlParameters::new(p.clone(), vec![1.0; p.len()]).unwrap();
            let de = dnl_exponents(&dnl);
            assert!(de.dn2);
            let rel = (de.alpha - ss.alpha).abs() / ss.alpha;
            assert!(rel < 1e-14, "alpha mismatch rel {rel:e}");
            let sig = de.sigma.unwrap();
            for (a, b) in sig.iter().zip(&ss.sigma) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // p_i = 2, m_i = m gives the porous-medium exponent N/(N(m-1)+2).
        for (n, m) in [(2usize, 0.7), (3, 0.9), (2, 1.3)] {
            let dnl = DnlParameters::new(vec![2.0; n], vec![m; n]).unwrap();
            let de = dnl_exponents(&dnl);
            let expect = n as f64 / (n as f64 * (m - 1.0) + 2.0);
            assert!((de.alpha - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn dnl_example_and_brute_force() {
        let dnl = DnlParameters::new(vec![1.5, 1.5], vec![0.8, 0.8]).unwrap();
        assert!((dnl.q - 0.8).abs() < 1e-14);
        let de = dnl_exponents(&dnl);
        assert!(de.dn2);
        assert!((de.alpha - 2.0 / 0.3).abs() < 1e-12);

        // Independent oracle: bisect on alpha so that sum_i sigma_i(alpha) = 1,
        // with sigma_i from the per-axis time-elimination identity.
        let sum_sigma = |alpha: f64| -> f64 {
            dnl.p
                .iter()
                .zip(&dnl.m)
                .map(|(&pi, &mi)| (1.0 / alpha + 1.0 - mi * (pi - 1.0)) / pi)
                .sum::<f64>()
                - 1.0
        };
        let (mut lo, mut hi) = (1e-3, 1e3);
        assert!(sum_sigma(lo) > 0.0 && sum_sigma(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum_sigma(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha_bf = 0.5 * (lo + hi);
        assert!(
            (alpha_bf - de.alpha).abs() < 1e-9,
            "brute force {alpha_bf} vs formula {}",
            de.alpha
        );
    }

    #[test]
    fn dnl_dn2_failure_flags() {
        // Very small m with small p drives alpha negative.
        let dnl = DnlParameters::new(vec![1.2, 1.2], vec![0.1, 0.1]).unwrap();
        let de = dnl_exponents(&dnl);
        assert!(!de.dn2);
        assert!(de.sigma.is_none());
        assert!(de.alpha <= 0.0);
    }

    #[test]
    fn region_examples() {
        let r = classify_region(1.5, 1.5).unwrap();
        assert_eq!(r.label, RegionLabel::Admissible);
        assert!((r.hyperbola_margin - (0.694_444_444_444_444 - 4.0 / 9.0)).abs() < 1e-9);

        let r = classify_region(4.0 / 3.0, 4.0 / 3.0).unwrap();
        assert!(!r.h2 || r.label == RegionLabel::Boundary);

        let r = classify_region(1.1, 1.9).unwrap();
        assert!(r.h2 && r.h3);
    }
}
