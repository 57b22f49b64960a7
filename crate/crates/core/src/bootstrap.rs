//! Wild bootstrap inference.
//!
//! Each replicate scales every individual's whole residual block by one
//! two-point multiplier, which preserves heteroskedasticity and the
//! within-individual correlation of the residuals. Because the bootstrap
//! outcome is `fitted + e*` and the design is fixed, the re-fitted bootstrap
//! residuals are exactly `M_W e*`, so the restricted factorization is reused
//! across replicates. Replicates are independent streams keyed by
//! `(seed, rep_index)` and may run in parallel; results land in an indexed
//! array so the output is bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::projection::RestrictedFit;
use crate::rng::{stream_rng, Domain};
use crate::statistic::{omega_from_residuals, OmegaKind};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-point multiplier law with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierLaw {
    Mammen,
    Rademacher,
}

impl MultiplierLaw {
    /// The two support points and the probability of the first.
    pub fn points(self) -> (f64, f64, f64) {
        match self {
            MultiplierLaw::Mammen => {
                let s5 = 5.0_f64.sqrt();
                ((1.0 - s5) / 2.0, (1.0 + s5) / 2.0, (s5 + 1.0) / (2.0 * s5))
            }
            MultiplierLaw::Rademacher => (-1.0, 1.0, 0.5),
        }
    }
}

impl std::fmt::Display for MultiplierLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MultiplierLaw::Mammen => write!(f, "mammen"),
            MultiplierLaw::Rademacher => write!(f, "rademacher"),
        }
    }
}

/// `n` i.i.d. draws from the law, one per individual, from the stream keyed
/// by `(seed, rep_index)`.
pub fn draw_multipliers(law: MultiplierLaw, n: usize, seed: u64, rep_index: u64) -> Vec<f64> {
    let (lo, hi, p_lo) = law.points();
    let mut rng = stream_rng(seed, Domain::Multipliers, rep_index);
    (0..n)
        .map(|_| if rng.gen::<f64>() < p_lo { lo } else { hi })
        .collect()
}

/// One bootstrap replicate: builds `e*_i = V_i e_i`, re-derives the restricted
/// residuals through the fixed design, recomputes `Omega*`, and returns the
/// normalized statistic `t* = (xi* - r_n) / sqrt(2 r_n)`.
pub fn bootstrap_statistic(
    fit: &RestrictedFit,
    law: MultiplierLaw,
    kind: OmegaKind,
    seed: u64,
    rep_index: u64,
) -> Result<f64> {
    let v = draw_multipliers(law, fit.n, seed, rep_index);
    let tp = fit.t_prime;
    let mut eps_star = DVector::zeros(fit.n * tp);
    for (i, &mult) in v.iter().enumerate() {
        let block = fit.residual_block(i) * mult;
        eps_star.rows_mut(i * tp, tp).copy_from(&block);
    }
    // exact algebraic shortcut for refitting on (fitted + eps*, W)
    let e_star = fit.annihilate(&eps_star);
    replicate_statistic(fit, &e_star, kind)
}

/// Statistic of the requested kind computed from replicate residuals on the
/// fixed design.
pub(crate) fn replicate_statistic(
    fit: &RestrictedFit,
    e_star: &DVector<f64>,
    kind: OmegaKind,
) -> Result<f64> {
    let r = fit.r_n() as f64;
    // degenerate original residuals stay degenerate under any multiplier
    if fit.is_degenerate() || e_star.amax() == 0.0 {
        return Ok((0.0 - r) / (2.0 * r).sqrt());
    }
    let v = fit.ztilde.transpose() * e_star;
    let om = omega_from_residuals(fit, e_star, kind)?;
    let xi = crate::statistic::quadratic_form(&v, &om)?;
    Ok((xi - r) / (2.0 * r).sqrt())
}

/// The empirical bootstrap distribution of the normalized statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    /// Replicate statistics in replicate-index order.
    pub stats: Vec<f64>,
    pub law: MultiplierLaw,
    pub kind: OmegaKind,
    pub seed: u64,
    /// Replicates whose `Omega*` was singular (recorded, not silently dropped).
    pub failed: usize,
}

impl BootstrapDistribution {
    pub fn b(&self) -> usize {
        self.stats.len()
    }

    /// Empirical upper-`alpha` critical value; rejecting when the observed
    /// statistic is at or above it matches the p-value convention.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let mut sorted = self.stats.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let b = sorted.len();
        let idx = (((1.0 - alpha) * (b as f64 + 1.0)).ceil() as usize).clamp(1, b);
        sorted[idx - 1]
    }

    /// Writes one replicate statistic per line with header `t_star`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_star")?;
        for s in &self.stats {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }
}

/// Runs `b` wild bootstrap replicates (in parallel) and collects the
/// normalized statistics. Aborts if more than 1% of replicates fail.
pub fn run_bootstrap(
    fit: &RestrictedFit,
    law: MultiplierLaw,
    kind: OmegaKind,
    b: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    assert!(b >= 1, "need at least one bootstrap replicate");
    let results: Vec<Result<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|rep| bootstrap_statistic(fit, law, kind, seed, rep))
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > 0.01 * b as f64 {
        return Err(Error::BootstrapFailures { failed, total: b });
    }
    let stats: Vec<f64> = results.into_iter().filter_map(|r| r.ok()).collect();
    Ok(BootstrapDistribution {
        stats,
        law,
        kind,
        seed,
        failed,
    })
}

/// Bootstrap p-value with the `(1 + #{t* >= observed}) / (B + 1)` convention:
/// exact under exchangeability and never zero.
pub fn bootstrap_pvalue(observed: f64, dist: &BootstrapDistribution) -> f64 {
    let count = dist.stats.iter().filter(|&&s| s >= observed).count();
    (1.0 + count as f64) / (dist.b() as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn analytic_moments_of_the_two_point_laws() {
        for law in [MultiplierLaw::Mammen, MultiplierLaw::Rademacher] {
            let (lo, hi, p) = law.points();
            let q = 1.0 - p;
            let mean = p * lo + q * hi;
            let var = p * lo * lo + q * hi * hi - mean * mean;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-15);
        }
        // Mammen third moment is exactly 1
        let (lo, hi, p) = MultiplierLaw::Mammen.points();
        let third = p * lo.powi(3) + (1.0 - p) * hi.powi(3);
        assert_abs_diff_eq!(third, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rademacher_sample_mean_is_near_zero() {
        let n = 1_000_000;
        let draws = draw_multipliers(MultiplierLaw::Rademacher, n, 42, 0);
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        // 4 standard errors of a variance-1 variate
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn multipliers_are_reproducible_per_key() {
        let a = draw_multipliers(MultiplierLaw::Mammen, 100, 7, 3);
        let b = draw_multipliers(MultiplierLaw::Mammen, 100, 7, 3);
        assert_eq!(a, b);
        let c = draw_multipliers(MultiplierLaw::Mammen, 100, 7, 4);
        assert_ne!(a, c);
    }

    #[test]
    fn rademacher_outer_product_expectation_is_exact() {
        // both points of V give the same e_i e_i' since V^2 = 1
        let e = DVector::from_vec(vec![0.4, -1.2, 0.8]);
        let (lo, hi, p) = MultiplierLaw::Rademacher.points();
        let outer = |v: f64| {
            let s = &e * v;
            &s * s.transpose()
        };
        let expect = outer(lo) * p + outer(hi) * (1.0 - p);
        let direct = &e * e.transpose();
        assert!((expect - direct).amax() <= 1e-15);
    }

    fn pipeline_fit(pull_y_into_span: bool) -> RestrictedFit {
        use crate::basis::{build_null_and_test_designs, orthonormalize, BasisSpec, VariableRole};
        use crate::panel::{assemble_panel, within_transform, PanelRow};
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(21, Domain::Reference, 30);
        let (n, t) = (40, 3);
        let mut rows = Vec::new();
        for i in 0..n {
            for s in 0..t {
                let x = rng.gen_range(0.5..3.5);
                let y = 1.5 * x + rng.gen_range(-1.0..1.0);
                rows.push(PanelRow {
                    id: format!("{i}"),
                    time: format!("{s}"),
                    y,
                    x: vec![x],
                });
            }
        }
        let p = assemble_panel(rows, vec!["x1".into()]).unwrap();
        let mut tp = within_transform(&p);
        let null = BasisSpec::power(2, vec![VariableRole::Nonparametric], 1);
        let alt = BasisSpec::power(4, vec![VariableRole::Nonparametric], 1);
        let ds = orthonormalize(&build_null_and_test_designs(&tp, &null, &alt).unwrap());
        if pull_y_into_span {
            // exact fit: make yhat a combination of the W columns
            tp.yhat = ds.w.column(0).clone_owned() * 2.5;
        }
        crate::projection::fit_restricted(&tp, &ds).unwrap()
    }

    #[test]
    fn identity_multipliers_reproduce_the_original_statistic() {
        let fit = pipeline_fit(false);
        for kind in [OmegaKind::Homoskedastic, OmegaKind::Heteroskedastic] {
            let original = crate::statistic::run_test(&fit, kind).unwrap();
            // V_i = +1 for all i: eps* = e, so the replicate statistic is t_rn
            let stat = replicate_statistic(&fit, &fit.annihilate(&fit.residuals.clone()), kind)
                .unwrap();
            assert_abs_diff_eq!(stat, original.t_rn, epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_residuals_pin_every_replicate_at_the_lower_bound() {
        let fit = pipeline_fit(true);
        assert!(fit.is_degenerate());
        let r = fit.r_n() as f64;
        let want = (0.0 - r) / (2.0 * r).sqrt();
        for rep in 0..5 {
            let s =
                bootstrap_statistic(&fit, MultiplierLaw::Mammen, OmegaKind::Heteroskedastic, 1, rep)
                    .unwrap();
            assert_abs_diff_eq!(s, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn replicate_residuals_stay_orthogonal_to_w() {
        let fit = pipeline_fit(false);
        let v = draw_multipliers(MultiplierLaw::Mammen, fit.n, 5, 0);
        let tp = fit.t_prime;
        let mut eps_star = DVector::zeros(fit.n * tp);
        for (i, &mult) in v.iter().enumerate() {
            let block = fit.residual_block(i) * mult;
            eps_star.rows_mut(i * tp, tp).copy_from(&block);
        }
        let e_star = fit.annihilate(&eps_star);
        let dot = fit.q_basis.transpose() * &e_star;
        assert!(dot.amax() <= 1e-8);
    }

    #[test]
    fn pvalue_counting_convention() {
        let dist = BootstrapDistribution {
            stats: (1..=399).map(|k| k as f64).collect(),
            law: MultiplierLaw::Rademacher,
            kind: OmegaKind::Heteroskedastic,
            seed: 0,
            failed: 0,
        };
        // larger than all stats
        assert_abs_diff_eq!(bootstrap_pvalue(400.0, &dist), 1.0 / 400.0);
        // smaller than all stats
        assert_abs_diff_eq!(bootstrap_pvalue(f64::NEG_INFINITY, &dist), 1.0);
        // equal to the 20th largest (380): ties count, so 21/400
        assert_abs_diff_eq!(bootstrap_pvalue(380.0, &dist), 21.0 / 400.0);
    }
}
