//! Monte Carlo study: data generating processes, the replication loop, and
//! size/power estimation.
//!
//! Replications are pure functions of `(config, rep_index)`: regressors,
//! fixed effects, and errors come from separate streams keyed by the
//! replicate index, so every test variant sees identical data within a
//! replicate and results are reproducible bit-for-bit across thread counts.

use crate::basis::{
    build_design_grid, build_null_and_test_designs, orthonormalize, BasisFamily, BasisSpec,
    VariableRole,
};
use crate::bootstrap::{bootstrap_pvalue, run_bootstrap, MultiplierLaw};
use crate::error::{Error, Result};
use crate::panel::{first_difference, within_transform, PanelDataset, Transform};
use crate::projection::fit_restricted;
use crate::rng::{derive_seed, stream_rng, Domain};
use crate::selection::{select_rn, SelectionGrid};
use crate::statistic::{chi2_quantile, normal_quantile, run_test, OmegaKind};
use nalgebra::{DMatrix, DVector};

use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default uniform support for the simulated regressors. The cosine-shaped
/// deviations below complete roughly one arch over this interval, and the
/// logarithm in the partially linear mean stays well defined.
pub const DEFAULT_REGRESSOR_SUPPORT: (f64, f64) = (0.65, 3.35);

/// Fixed seed for the reference sample behind the orthogonal-alternative
/// construction; independent of user seeds so the alternative is the same
/// function in every run.
const ORTHOGONAL_REFERENCE_SEED: u64 = 0x6f72_7468_6f67;

/// Data generating processes from the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// Partially linear model; the null holds.
    SpNull,
    /// Partially linear plus a smooth interaction deviation; the null fails.
    NpAlt,
    /// Univariate linear model; the null holds.
    LinearNull,
    /// Linear plus a smooth cosine deviation.
    LinearSmoothAlt,
    /// Linear plus a deviation orthogonal to the low-order power terms.
    LinearOrthogonalAlt,
}

impl Dgp {
    pub fn d_x(self) -> usize {
        match self {
            Dgp::SpNull | Dgp::NpAlt => 2,
            _ => 1,
        }
    }

    pub fn is_null(self) -> bool {
        matches!(self, Dgp::SpNull | Dgp::LinearNull)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Homoskedastic,
    Heteroskedastic,
}

/// Full simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    pub dgp: Dgp,
    pub errors: ErrorLaw,
    pub seed: u64,
    /// Uniform support of the regressor draws.
    pub regressor_support: (f64, f64),
    /// Monomial coefficients of the orthogonal deviation (degree 5),
    /// present when `dgp` is the orthogonal alternative.
    #[serde(skip)]
    orth_coef: Option<Vec<f64>>,
}

impl DgpConfig {
    pub fn new(n: usize, t: usize, dgp: Dgp, errors: ErrorLaw, seed: u64) -> Result<Self> {
        if n < 2 || t < 2 {
            return Err(Error::InvalidConfig(format!(
                "need n >= 2 and T >= 2, got ({n}, {t})"
            )));
        }
        let support = DEFAULT_REGRESSOR_SUPPORT;
        let orth_coef = if dgp == Dgp::LinearOrthogonalAlt {
            Some(orthogonal_poly_coefficients(support, 5))
        } else {
            None
        };
        Ok(Self {
            n,
            t,
            dgp,
            errors,
            seed,
            regressor_support: support,
            orth_coef,
        })
    }
}

/// `g(x2) = 3 + 2 (exp(x2) - 2 ln(x2 + 3))`, the nonparametric component of
/// the partially linear mean.
pub fn g_component(x2: f64) -> f64 {
    3.0 + 2.0 * (x2.exp() - 2.0 * (x2 + 3.0).ln())
}

/// `h(x1, x2) = 1.25 cos(x1 - 2) sin(0.75 x2)`, the smooth deviation of the
/// nonparametric alternative.
pub fn h_deviation(x1: f64, x2: f64) -> f64 {
    1.25 * (x1 - 2.0).cos() * (0.75 * x2).sin()
}

/// Conditional mean of the outcome given regressors (fixed effect and error
/// excluded).
pub fn dgp_mean(dgp: Dgp, x: &[f64], orth_coef: Option<&[f64]>) -> f64 {
    match dgp {
        Dgp::SpNull => 2.0 * x[0] + g_component(x[1]),
        Dgp::NpAlt => 2.0 * x[0] + g_component(x[1]) + h_deviation(x[0], x[1]),
        Dgp::LinearNull => 2.0 * x[0],
        Dgp::LinearSmoothAlt => 2.0 * x[0] + (x[0] - 2.0).cos(),
        Dgp::LinearOrthogonalAlt => {
            2.0 * x[0] + eval_poly(orth_coef.expect("orthogonal coefficients"), x[0])
        }
    }
}

/// Error standard deviation at a design point: constant 2 in the
/// homoskedastic setting, `sqrt(1 + 1.75 exp(0.75 sum_j x_j))` otherwise.
pub fn error_sd(errors: ErrorLaw, x: &[f64]) -> f64 {
    match errors {
        ErrorLaw::Homoskedastic => 2.0,
        ErrorLaw::Heteroskedastic => {
            let s: f64 = x.iter().sum();
            (1.0 + 1.75 * (0.75 * s).exp()).sqrt()
        }
    }
}

/// Horner evaluation of monomial coefficients (low degree first).
pub fn eval_poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Process-wide cache of degree-5 coefficients per support, for configs that
/// did not come through [`DgpConfig::new`] (e.g. deserialized ones).
fn cached_orth_coefficients(support: (f64, f64)) -> Vec<f64> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Vec<f64>>>> = OnceLock::new();
    let key = (support.0.to_bits(), support.1.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("orthogonal coefficient cache");
    guard
        .entry(key)
        .or_insert_with(|| orthogonal_poly_coefficients(support, 5))
        .clone()
}

/// Monomial coefficients of the orthonormal polynomial of the given degree
/// under `U(support)`: Gram–Schmidt of the powers `0..=degree` against a
/// 10^6-draw reference sample, normalized to unit sample variance. The result
/// is orthogonal (in that population) to every lower power.
pub fn orthogonal_poly_coefficients(support: (f64, f64), degree: usize) -> Vec<f64> {
    let draws: usize = 1_000_000;
    let mut rng = stream_rng(ORTHOGONAL_REFERENCE_SEED, Domain::Reference, degree as u64);
    let uni = Uniform::new(support.0, support.1);
    let xs: Vec<f64> = (0..draws).map(|_| uni.sample(&mut rng)).collect();

    // columns of raw powers, each carrying its monomial representation
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(degree + 1);
    let mut raw: Vec<f64> = vec![1.0; draws];
    for d in 0..=degree {
        if d > 0 {
            for (v, x) in raw.iter_mut().zip(&xs) {
                *v *= x;
            }
        }
        let mut col = raw.clone();
        let mut coef = vec![0.0; degree + 1];
        coef[d] = 1.0;
        // two projection passes: the raw power columns are ill-conditioned
        for _ in 0..2 {
            for (qcol, qcoef) in &basis {
                let inner: f64 =
                    col.iter().zip(qcol).map(|(a, b)| a * b).sum::<f64>() / draws as f64;
                for (v, q) in col.iter_mut().zip(qcol) {
                    *v -= inner * q;
                }
                for (c, qc) in coef.iter_mut().zip(qcoef) {
                    *c -= inner * qc;
                }
            }
        }
        let norm = (col.iter().map(|v| v * v).sum::<f64>() / draws as f64).sqrt();
        for v in col.iter_mut() {
            *v /= norm;
        }
        for c in coef.iter_mut() {
            *c /= norm;
        }
        basis.push((col, coef));
    }
    basis.pop().expect("degree + 1 columns").1
}

/// Generates one replicate panel: deterministic in `(config, rep_index)`.
/// Fixed effects load on the regressors, so pooled estimation is inconsistent
/// while the transformed fit is not.
pub fn generate_panel(cfg: &DgpConfig, rep_index: u64) -> PanelDataset {
    let d_x = cfg.dgp.d_x();
    let (n, t) = (cfg.n, cfg.t);
    let uni = Uniform::new(cfg.regressor_support.0, cfg.regressor_support.1);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut reg_rng = stream_rng(cfg.seed, Domain::Regressors, rep_index);
    let mut x = DMatrix::zeros(n * t, d_x);
    for row in 0..n * t {
        for j in 0..d_x {
            x[(row, j)] = uni.sample(&mut reg_rng);
        }
    }

    // mu_i = nu_i + sum_t (0.6 x1 + 0.4 x2)
    let mut fe_rng = stream_rng(cfg.seed, Domain::FixedEffects, rep_index);
    let loadings: &[f64] = if d_x == 2 { &[0.6, 0.4] } else { &[0.6] };
    let mut mu = vec![0.0; n];
    for (i, m) in mu.iter_mut().enumerate() {
        let nu = 1.5 * std_normal.sample(&mut fe_rng);
        let mut acc = 0.0;
        for s in 0..t {
            for (j, w) in loadings.iter().enumerate() {
                acc += w * x[(i * t + s, j)];
            }
        }
        *m = nu + acc;
    }

    let mut err_rng = stream_rng(cfg.seed, Domain::Errors, rep_index);
    let computed;
    let orth: Option<&[f64]> = match (&cfg.orth_coef, cfg.dgp) {
        (Some(c), _) => Some(c.as_slice()),
        (None, Dgp::LinearOrthogonalAlt) => {
            computed = cached_orth_coefficients(cfg.regressor_support);
            Some(computed.as_slice())
        }
        _ => None,
    };
    let mut y = DVector::zeros(n * t);
    for (i, &mu_i) in mu.iter().enumerate() {
        for s in 0..t {
            let row = i * t + s;
            let xrow: Vec<f64> = (0..d_x).map(|j| x[(row, j)]).collect();
            let eps = error_sd(cfg.errors, &xrow) * std_normal.sample(&mut err_rng);
            y[row] = mu_i + dgp_mean(cfg.dgp, &xrow, orth) + eps;
        }
    }

    let width = (n as f64).log10().ceil() as usize + 1;
    let ids = (0..n).map(|i| format!("{i:0width$}")).collect();
    let times = (1..=t).map(|s| s.to_string()).collect();
    let x_names = (0..d_x).map(|j| format!("x{}", j + 1)).collect();
    PanelDataset::new(n, t, ids, times, y, x, x_names).expect("generated panel is balanced")
}

/// Test variants evaluated per replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Quadratic form against the chi-square with `r_n` df.
    AsymXiRn,
    /// Quadratic form against the chi-square with `k_n` df (no correction).
    AsymXiKn,
    /// Normalized statistic with the df correction against the normal.
    AsymTRn,
    /// Normalized statistic without the correction against the normal.
    AsymTKn,
    BootRademacher,
    BootMammen,
    /// Penalized data-driven choice of `r_n`, then the chi-square test.
    DataDriven,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::AsymXiRn => "xi_chi2_rn",
            Variant::AsymXiKn => "xi_chi2_kn",
            Variant::AsymTRn => "t_normal_rn",
            Variant::AsymTKn => "t_normal_kn",
            Variant::BootRademacher => "boot_rademacher",
            Variant::BootMammen => "boot_mammen",
            Variant::DataDriven => "data_driven",
        }
    }

    fn needs_fixed_design(self) -> bool {
        !matches!(self, Variant::DataDriven)
    }
}

/// What to run in each replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McTestSpec {
    pub transform: Transform,
    pub family: BasisFamily,
    /// Terms per univariate expansion for the fixed-`a_n` variants.
    pub a_n: usize,
    /// Candidate range (inclusive) for the data-driven variant.
    pub grid: Option<(usize, usize)>,
    pub kind: OmegaKind,
    pub variants: Vec<Variant>,
    /// Nominal level of every rejection decision.
    pub level: f64,
    /// Penalty constant for the data-driven rule.
    pub c: f64,
}

impl McTestSpec {
    pub fn new(kind: OmegaKind, family: BasisFamily, a_n: usize, variants: Vec<Variant>) -> Self {
        Self {
            transform: Transform::Within,
            family,
            a_n,
            grid: None,
            kind,
            variants,
            level: 0.05,
            c: crate::selection::DEFAULT_PENALTY_C,
        }
    }
}

/// One output cell of the study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McCell {
    pub variant: String,
    pub a_n: String,
    pub m_n: usize,
    pub r_n: usize,
    pub k_n: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResult {
    pub cells: Vec<McCell>,
    /// Replications requested.
    pub m: usize,
    /// Replications that completed.
    pub completed: usize,
    pub failures: usize,
}

impl McResult {
    pub fn cell(&self, variant: Variant) -> Option<&McCell> {
        self.cells.iter().find(|c| c.variant == variant.label())
    }

    /// Plot-ready CSV: one row per `(variant, a_n)` cell.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "variant,a_n,m_n,r_n,k_n,rejection_rate,mc_se")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.variant, c.a_n, c.m_n, c.r_n, c.k_n, c.rejection_rate, c.mc_se
            )?;
        }
        Ok(())
    }
}

fn null_alt_specs(dgp: Dgp, family: BasisFamily, a_n: usize) -> (BasisSpec, BasisSpec) {
    match dgp.d_x() {
        2 => {
            let null = BasisSpec {
                family,
                a_n,
                spline_order: 3,
                interaction_order: 1,
                roles: vec![VariableRole::Parametric, VariableRole::Nonparametric],
                knots: None,
            };
            let alt = BasisSpec {
                family,
                a_n,
                spline_order: 3,
                interaction_order: 2,
                roles: vec![VariableRole::Nonparametric, VariableRole::Nonparametric],
                knots: None,
            };
            (null, alt)
        }
        _ => {
            let null = BasisSpec {
                family,
                a_n: 2,
                spline_order: 3,
                interaction_order: 1,
                roles: vec![VariableRole::Parametric],
                knots: None,
            };
            let alt = BasisSpec {
                family,
                a_n,
                spline_order: 3,
                interaction_order: 1,
                roles: vec![VariableRole::Nonparametric],
                knots: None,
            };
            (null, alt)
        }
    }
}

struct VariantOutcome {
    variant: Variant,
    reject: bool,
    m_n: usize,
    r_n: usize,
    k_n: usize,
}

fn replicate(cfg: &DgpConfig, spec: &McTestSpec, b: usize, rep: u64) -> Result<Vec<VariantOutcome>> {
    let panel = generate_panel(cfg, rep);
    let tp = match spec.transform {
        Transform::Within => within_transform(&panel),
        Transform::FirstDifference => first_difference(&panel),
    };
    let alpha = spec.level;
    let chi2_crit = |df: usize| chi2_quantile(df, 1.0 - alpha);
    let z_crit = normal_quantile(1.0 - alpha)?;
    let mut out = Vec::with_capacity(spec.variants.len());

    if spec.variants.iter().any(|v| v.needs_fixed_design()) {
        let (null_spec, alt_spec) = null_alt_specs(cfg.dgp, spec.family, spec.a_n);
        let ds = orthonormalize(&build_null_and_test_designs(&tp, &null_spec, &alt_spec)?);
        let fit = fit_restricted(&tp, &ds)?;
        let res = run_test(&fit, spec.kind)?;
        let boot_seed = derive_seed(cfg.seed, rep);
        for &variant in &spec.variants {
            let reject = match variant {
                Variant::AsymXiRn => res.xi > chi2_crit(res.r_n)?,
                Variant::AsymXiKn => res.xi > chi2_crit(res.k_n)?,
                Variant::AsymTRn => res.t_rn > z_crit,
                Variant::AsymTKn => res.t_kn > z_crit,
                Variant::BootRademacher | Variant::BootMammen => {
                    let law = if variant == Variant::BootRademacher {
                        MultiplierLaw::Rademacher
                    } else {
                        MultiplierLaw::Mammen
                    };
                    let dist = run_bootstrap(&fit, law, spec.kind, b, boot_seed)?;
                    bootstrap_pvalue(res.t_rn, &dist) <= alpha
                }
                Variant::DataDriven => continue,
            };
            out.push(VariantOutcome {
                variant,
                reject,
                m_n: res.m_n,
                r_n: res.r_n,
                k_n: res.k_n,
            });
        }
    }

    if spec.variants.contains(&Variant::DataDriven) {
        let (lo, hi) = spec.grid.ok_or_else(|| {
            Error::InvalidConfig("data-driven variant requires a grid range".into())
        })?;
        if hi < lo + 1 {
            return Err(Error::InvalidConfig(
                "grid must contain at least two candidates".into(),
            ));
        }
        let (null_spec, _) = null_alt_specs(cfg.dgp, spec.family, lo);
        let a_ns: Vec<usize> = (lo..=hi).collect();
        let alt_specs: Vec<BasisSpec> = a_ns
            .iter()
            .map(|&a| null_alt_specs(cfg.dgp, spec.family, a).1)
            .collect();
        let ds = orthonormalize(&build_design_grid(&tp, &null_spec, &alt_specs)?);
        let fit = fit_restricted(&tp, &ds)?;
        let grid = SelectionGrid::from_design(&ds, &a_ns, spec.c)?;
        let (_report, res) = select_rn(&fit, &grid, spec.kind)?;
        out.push(VariantOutcome {
            variant: Variant::DataDriven,
            reject: res.xi > chi2_crit(res.r_n)?,
            m_n: res.m_n,
            r_n: res.r_n,
            k_n: res.k_n,
        });
    }
    Ok(out)
}

/// Runs `m` replications (in parallel) of every requested variant at the
/// 5%-style level in `spec`, with `b` bootstrap replicates where needed.
/// Aborts if more than 1% of replications fail.
pub fn run_mc(cfg: &DgpConfig, spec: &McTestSpec, m: usize, b: usize) -> Result<McResult> {
    assert!(m >= 1, "need at least one replication");
    let outcomes: Vec<Result<Vec<VariantOutcome>>> = (0..m as u64)
        .into_par_iter()
        .map(|rep| replicate(cfg, spec, b, rep))
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures as f64 > 0.01 * m as f64 {
        return Err(Error::McFailures { failed: failures, total: m });
    }
    let completed = m - failures;

    let mut cells = Vec::new();
    for &variant in &spec.variants {
        let mut rejections = 0usize;
        let mut count = 0usize;
        let mut counts = (0usize, 0usize, 0usize);
        for rep in outcomes.iter().flatten() {
            if let Some(v) = rep.iter().find(|o| o.variant == variant) {
                count += 1;
                if v.reject {
                    rejections += 1;
                }
                counts = (v.m_n, v.r_n, v.k_n);
            }
        }
        if count == 0 {
            continue;
        }
        let rate = rejections as f64 / count as f64;
        let se = (rate * (1.0 - rate) / count as f64).sqrt();
        let a_n_label = if variant == Variant::DataDriven {
            let (lo, hi) = spec.grid.unwrap_or((0, 0));
            format!("data-driven({lo}..{hi})")
        } else {
            spec.a_n.to_string()
        };
        cells.push(McCell {
            variant: variant.label().to_string(),
            a_n: a_n_label,
            m_n: counts.0,
            r_n: counts.1,
            k_n: counts.2,
            rejection_rate: rate,
            mc_se: se,
        });
    }
    Ok(McResult {
        cells,
        m,
        completed,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_function_closed_forms() {
        // sp_null mean at (1, 0): 2 + 3 + 2(1 - 2 ln 3)
        let want = 5.0 + 2.0 - 4.0 * 3.0_f64.ln();
        assert_abs_diff_eq!(dgp_mean(Dgp::SpNull, &[1.0, 0.0], None), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 2.6056, epsilon = 5e-4);
        // the nonparametric deviation vanishes at (2, 0)
        assert_abs_diff_eq!(
            dgp_mean(Dgp::NpAlt, &[2.0, 0.0], None) - dgp_mean(Dgp::SpNull, &[2.0, 0.0], None),
            0.0,
            epsilon = 1e-15
        );
        // heteroskedastic variance at x1 + x2 = 0 is 1 + 1.75
        let sd = error_sd(ErrorLaw::Heteroskedastic, &[0.5, -0.5]);
        assert_abs_diff_eq!(sd * sd, 2.75, epsilon = 1e-12);
    }

    #[test]
    fn generated_panels_are_deterministic_and_balanced() {
        let cfg = DgpConfig::new(20, 3, Dgp::SpNull, ErrorLaw::Homoskedastic, 123).unwrap();
        let a = generate_panel(&cfg, 4);
        let b = generate_panel(&cfg, 4);
        assert_eq!(a.y.as_slice(), b.y.as_slice());
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        let c = generate_panel(&cfg, 5);
        assert_ne!(a.y.as_slice(), c.y.as_slice());
        assert_eq!((a.n, a.t, a.d_x()), (20, 3, 2));
    }

    #[test]
    fn orthogonal_polynomial_is_orthogonal_to_low_powers() {
        let support = DEFAULT_REGRESSOR_SUPPORT;
        let coef = orthogonal_poly_coefficients(support, 5);
        assert_eq!(coef.len(), 6);
        // quadrature check against U(support): normalized inner products with
        // 1, x, ..., x^4 vanish (up to the 10^6-draw sampling error of the
        // construction) and the second moment is 1
        let steps = 200_000;
        let (lo, hi) = support;
        let h = (hi - lo) / steps as f64;
        let mut moments = [0.0; 5];
        let mut norms = [0.0; 5];
        let mut second = 0.0;
        for k in 0..=steps {
            let x = lo + k as f64 * h;
            let edge = if k == 0 || k == steps { 0.5 } else { 1.0 };
            let w = edge * h / (hi - lo);
            let p = eval_poly(&coef, x);
            for d in 0..5 {
                let xd = x.powi(d as i32);
                moments[d] += w * p * xd;
                norms[d] += w * xd * xd;
            }
            second += w * p * p;
        }
        for d in 0..5 {
            let cosine = moments[d] / norms[d].sqrt();
            assert!(cosine.abs() < 1e-2, "normalized E[p * x^{d}] = {cosine}");
        }
        assert_abs_diff_eq!(second, 1.0, epsilon = 1e-2);
    }

    #[test]
    fn single_replication_rate_is_zero_or_one() {
        let cfg = DgpConfig::new(60, 3, Dgp::LinearNull, ErrorLaw::Homoskedastic, 7).unwrap();
        let spec = McTestSpec::new(
            OmegaKind::Homoskedastic,
            BasisFamily::Power,
            4,
            vec![Variant::AsymXiRn],
        );
        let res = run_mc(&cfg, &spec, 1, 0).unwrap();
        let cell = res.cell(Variant::AsymXiRn).unwrap();
        assert!(cell.rejection_rate == 0.0 || cell.rejection_rate == 1.0);
        assert_eq!(res.completed, 1);
    }

    #[test]
    fn csv_output_is_deterministic() {
        let cfg = DgpConfig::new(40, 3, Dgp::LinearNull, ErrorLaw::Homoskedastic, 11).unwrap();
        let mut spec = McTestSpec::new(
            OmegaKind::Homoskedastic,
            BasisFamily::Power,
            4,
            vec![Variant::AsymXiRn, Variant::DataDriven],
        );
        spec.grid = Some((4, 6));
        let mut buf_a = Vec::new();
        run_mc(&cfg, &spec, 5, 0).unwrap().write_csv(&mut buf_a).unwrap();
        let mut buf_b = Vec::new();
        run_mc(&cfg, &spec, 5, 0).unwrap().write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let text = String::from_utf8(buf_a).unwrap();
        assert!(text.starts_with("variant,a_n,m_n,r_n,k_n,rejection_rate,mc_se"));
        assert!(text.contains("data_driven,data-driven(4..6)"));
    }
}
