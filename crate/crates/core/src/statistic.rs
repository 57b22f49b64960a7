//! The quadratic-form test statistics, their degrees-of-freedom-corrected
//! normalizations, and asymptotic p-values.
//!
//! Both statistic kinds share the shape `xi = v' Omega^{-1} v` with
//! `v = sum_i Ztilde_i' e_i`. Under homoskedasticity `Omega` pools the
//! residual covariance across individuals; the robust kind uses each
//! individual's own residual outer product. The normalization centers at the
//! number of tested restrictions `r_n`, not the total parameter count `k_n`:
//! the restricted residuals are exactly orthogonal to `W`, so only `r_n`
//! moments can deviate. The uncorrected `t_kn` is kept as a diagnostic.

use crate::error::{Error, Result};
use crate::projection::{cross_moment, RestrictedFit};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

/// Relative eigenvalue floor below which `Omega` is declared singular.
const OMEGA_PD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaKind {
    Homoskedastic,
    Heteroskedastic,
}

impl std::fmt::Display for OmegaKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OmegaKind::Homoskedastic => write!(f, "homoskedastic"),
            OmegaKind::Heteroskedastic => write!(f, "heteroskedastic"),
        }
    }
}

/// The inner matrix of the quadratic form (un-normalized sum over individuals).
#[derive(Debug, Clone)]
pub struct OmegaEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: OmegaKind,
    pub condition_number: f64,
}

/// Assembles `Omega` of the requested kind from the restricted fit:
/// `sum_i Ztilde_i' SigmaT Ztilde_i` (homoskedastic) or
/// `sum_i (Ztilde_i' e_i)(Ztilde_i' e_i)'` (heteroskedastic).
pub fn omega(fit: &RestrictedFit, kind: OmegaKind) -> Result<OmegaEstimate> {
    omega_with(fit, &fit.residuals, &fit.sigma_t, kind)
}

/// Same assembly from arbitrary residuals with the fit's block structure
/// (the bootstrap recomputes `Omega*` per replicate this way).
pub fn omega_from_residuals(
    fit: &RestrictedFit,
    residuals: &DVector<f64>,
    kind: OmegaKind,
) -> Result<OmegaEstimate> {
    match kind {
        OmegaKind::Homoskedastic => {
            let sigma = fit.pooled_covariance(residuals);
            omega_with(fit, residuals, &sigma, kind)
        }
        OmegaKind::Heteroskedastic => omega_with(fit, residuals, &fit.sigma_t, kind),
    }
}

fn omega_with(
    fit: &RestrictedFit,
    residuals: &DVector<f64>,
    sigma_t: &DMatrix<f64>,
    kind: OmegaKind,
) -> Result<OmegaEstimate> {
    let r = fit.r_n();
    assert!(r >= 1, "need at least one test direction");
    let tp = fit.t_prime;
    let mut m = DMatrix::zeros(r, r);
    match kind {
        OmegaKind::Homoskedastic => {
            for i in 0..fit.n {
                let zi = fit.ztilde_block(i);
                let szi = sigma_t * zi;
                m.gemm_tr(1.0, &zi, &szi, 1.0);
            }
        }
        OmegaKind::Heteroskedastic => {
            for i in 0..fit.n {
                let g = fit.ztilde_block(i).transpose() * residuals.rows(i * tp, tp);
                m.syger(1.0, &g, &g, 1.0);
            }
            for a in 0..r {
                for b in 0..a {
                    let v = m[(a, b)];
                    m[(b, a)] = v;
                }
            }
        }
    }
    // kill round-off asymmetry
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio <= OMEGA_PD_TOL || ratio.is_nan() {
        return Err(Error::SingularOmega { ratio });
    }
    Ok(OmegaEstimate {
        matrix: m,
        kind,
        condition_number: hi / lo,
    })
}

/// Everything reported about one test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    /// Quadratic-form statistic value.
    pub xi: f64,
    pub kind: OmegaKind,
    /// Tested restrictions (effective, after drops).
    pub r_n: usize,
    /// Total series terms `m_n + r_n`.
    pub k_n: usize,
    /// Restricted-model terms.
    pub m_n: usize,
    /// `(xi - r_n) / sqrt(2 r_n)`.
    pub t_rn: f64,
    /// `(xi - k_n) / sqrt(2 k_n)` — no df correction, for comparison only.
    pub t_kn: f64,
    /// Upper-tail probability of `xi` under chi-square with `r_n` df.
    pub p_chi2: f64,
    /// Upper-tail probability of `t_rn` under the standard normal.
    pub p_normal: f64,
    pub crit_chi2_05: f64,
    pub crit_chi2_10: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bootstrap_p: Option<f64>,
}

impl std::fmt::Display for TestResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "xi[{}] = {:.3} (r_n = {}, m_n = {}, k_n = {}); t = {:.3} (no-df-correction t = {:.3}); \
             p[chi2({})] = {:.4}, p[normal] = {:.4}; chi2 5%/10% critical values {:.3}/{:.3}",
            self.kind,
            self.xi,
            self.r_n,
            self.m_n,
            self.k_n,
            self.t_rn,
            self.t_kn,
            self.r_n,
            self.p_chi2,
            self.p_normal,
            self.crit_chi2_05,
            self.crit_chi2_10
        )?;
        if let Some(p) = self.bootstrap_p {
            write!(f, "; bootstrap p = {p:.4}")?;
        }
        Ok(())
    }
}

/// Inverse CDF of chi-square with `df` degrees of freedom, polished by Newton
/// steps on the CDF so the relative error stays near machine precision.
pub fn chi2_quantile(df: usize, prob: f64) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidConfig("chi-square df must be >= 1".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::DomainError(prob));
    }
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    let mut x = dist.inverse_cdf(prob).max(f64::MIN_POSITIVE);
    for _ in 0..4 {
        let diff = dist.cdf(x) - prob;
        let deriv = dist.pdf(x);
        if deriv <= f64::MIN_POSITIVE {
            break;
        }
        let step = diff / deriv;
        x -= step;
        if x <= 0.0 {
            x = f64::MIN_POSITIVE;
        }
        if step.abs() <= 1e-14 * x.max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Standard normal inverse CDF, Newton-polished.
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::DomainError(prob));
    }
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    let mut x = dist.inverse_cdf(prob);
    for _ in 0..3 {
        let diff = dist.cdf(x) - prob;
        let deriv = dist.pdf(x);
        if deriv <= f64::MIN_POSITIVE {
            break;
        }
        let step = diff / deriv;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn chi2_sf(df: usize, x: f64) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    (1.0 - dist.cdf(x)).clamp(0.0, 1.0)
}

fn normal_sf(x: f64) -> f64 {
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    (1.0 - dist.cdf(x)).clamp(0.0, 1.0)
}

/// Builds a full [`TestResult`] from a statistic value and the counts.
pub fn test_result_from_parts(
    xi: f64,
    kind: OmegaKind,
    m_n: usize,
    r_n: usize,
) -> Result<TestResult> {
    let k_n = m_n + r_n;
    let r = r_n as f64;
    let k = k_n as f64;
    let t_rn = (xi - r) / (2.0 * r).sqrt();
    let t_kn = (xi - k) / (2.0 * k).sqrt();
    Ok(TestResult {
        xi,
        kind,
        r_n,
        k_n,
        m_n,
        t_rn,
        t_kn,
        p_chi2: chi2_sf(r_n, xi),
        p_normal: normal_sf(t_rn),
        crit_chi2_05: chi2_quantile(r_n, 0.95)?,
        crit_chi2_10: chi2_quantile(r_n, 0.90)?,
        bootstrap_p: None,
    })
}

/// The quadratic form `v' Omega^{-1} v` through a Cholesky solve (`Omega` is
/// never inverted explicitly).
pub fn quadratic_form(v: &DVector<f64>, om: &OmegaEstimate) -> Result<f64> {
    if v.amax() == 0.0 {
        return Ok(0.0);
    }
    let chol = om
        .matrix
        .clone()
        .cholesky()
        .ok_or(Error::SingularOmega { ratio: 0.0 })?;
    let solved = chol.solve(v);
    Ok(v.dot(&solved).max(0.0))
}

/// Computes the test result for a fit and an assembled `Omega`.
pub fn xi_statistic(fit: &RestrictedFit, om: &OmegaEstimate) -> Result<TestResult> {
    let v = cross_moment(fit);
    let xi = quadratic_form(&v, om)?;
    test_result_from_parts(xi, om.kind, fit.m_n(), fit.r_n())
}

/// End-to-end test on a fit: handles the exact-fit degenerate case (residuals
/// numerically zero implies `xi = 0`) and otherwise assembles `Omega` and the
/// statistic of the requested kind.
pub fn run_test(fit: &RestrictedFit, kind: OmegaKind) -> Result<TestResult> {
    if fit.is_degenerate() {
        return test_result_from_parts(0.0, kind, fit.m_n(), fit.r_n());
    }
    let om = omega(fit, kind)?;
    xi_statistic(fit, &om)
}
