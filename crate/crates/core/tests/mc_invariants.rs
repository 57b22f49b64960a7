//! Statistical invariants of the simulation module that go beyond single
//! replications: estimator consistency under the transformation, size of the
//! normalized test, and power growth with the sample size.

use nalgebra::{DMatrix, DVector};
use panelspec_core::*;

/// Slope on x1 from a least-squares fit of `y` on the given columns.
fn slope_on_first(cols: &[DVector<f64>], y: &DVector<f64>) -> f64 {
    let rows = y.len();
    let mut x = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        x.set_column(j, c);
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let beta = xtx.cholesky().expect("full rank").solve(&xty);
    beta[0]
}

/// Pooled (untransformed, intercept included) vs within estimates of the
/// partially linear slope. The fixed effects load on the regressors, so the
/// pooled fit must be biased while the within fit recovers the truth.
#[test]
fn within_recovers_slope_while_pooled_is_biased() {
    let reps = 100;
    let cfg = DgpConfig::new(500, 4, Dgp::SpNull, ErrorLaw::Homoskedastic, 8101).unwrap();
    let mut within_err = 0.0;
    let mut pooled_err = 0.0;
    for rep in 0..reps {
        let panel = generate_panel(&cfg, rep);
        let rows = panel.rows();
        let x1 = DVector::from_column_slice(panel.x.column(0).as_slice());
        let x2 = DVector::from_column_slice(panel.x.column(1).as_slice());
        let g_basis = |x: &DVector<f64>| -> Vec<DVector<f64>> {
            (0..=3)
                .map(|d| DVector::from_fn(rows, |r, _| x[r].powi(d)))
                .collect()
        };

        // pooled: y on [x1, 1, x2, x2^2, x2^3] in levels
        let mut pooled_cols = vec![x1.clone()];
        pooled_cols.extend(g_basis(&x2));
        let beta_pooled = slope_on_first(&pooled_cols, &panel.y);

        // within: the same columns, demeaned per individual
        let tp = within_transform(&panel);
        let wcols: Vec<DVector<f64>> = pooled_cols
            .iter()
            .map(|c| tp.transform_column(c))
            .filter(|c| c.norm() > 1e-8)
            .collect();
        let beta_within = slope_on_first(&wcols, &tp.yhat);

        within_err += (beta_within - 2.0).abs() / reps as f64;
        pooled_err += (beta_pooled - 2.0).abs() / reps as f64;
    }
    println!("mean |beta_within - 2| = {within_err:.4}, mean |beta_pooled - 2| = {pooled_err:.4}");
    assert!(within_err < 0.1, "within slope error {within_err}");
    assert!(pooled_err > 0.2, "pooled slope error {pooled_err}");
}

/// Size of the normalized t test with the df correction stays near nominal
/// under the partially linear null.
#[test]
fn t_test_size_is_near_nominal_under_the_null() {
    let cfg = DgpConfig::new(250, 4, Dgp::SpNull, ErrorLaw::Homoskedastic, 8201).unwrap();
    let spec = McTestSpec::new(
        OmegaKind::Homoskedastic,
        BasisFamily::Power,
        4,
        vec![Variant::AsymTRn, Variant::AsymTKn],
    );
    let res = run_mc(&cfg, &spec, 1000, 0).unwrap();
    let t_rn = res.cell(Variant::AsymTRn).unwrap().rejection_rate;
    let t_kn = res.cell(Variant::AsymTKn).unwrap().rejection_rate;
    println!("t-test size: tau = r_n -> {t_rn:.3}, tau = k_n -> {t_kn:.3}");
    assert!((0.03..=0.09).contains(&t_rn), "size {t_rn}");
    assert!(t_kn < t_rn, "the uncorrected normalization must be undersized");
}

/// Under a true null the bootstrap distribution of the normalized statistic
/// approaches the standard normal: coarse mean and variance bands.
#[test]
fn bootstrap_distribution_is_centered_under_the_null() {
    let cfg = DgpConfig::new(500, 4, Dgp::SpNull, ErrorLaw::Homoskedastic, 8401).unwrap();
    let panel = generate_panel(&cfg, 0);
    let tp = within_transform(&panel);
    let null = BasisSpec::power(
        4,
        vec![VariableRole::Parametric, VariableRole::Nonparametric],
        1,
    );
    let alt = BasisSpec::power(
        4,
        vec![VariableRole::Nonparametric, VariableRole::Nonparametric],
        2,
    );
    let ds = orthonormalize(&build_null_and_test_designs(&tp, &null, &alt).unwrap());
    let fit = fit_restricted(&tp, &ds).unwrap();
    let dist = run_bootstrap(&fit, MultiplierLaw::Mammen, OmegaKind::Heteroskedastic, 399, 8402)
        .unwrap();
    let b = dist.b() as f64;
    let mean = dist.stats.iter().sum::<f64>() / b;
    let var = dist.stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (b - 1.0);
    println!("bootstrap t*: mean = {mean:.3}, var = {var:.3}");
    assert!(mean.abs() <= 0.15, "mean {mean}");
    assert!((0.7..=1.3).contains(&var), "variance {var}");
}

/// A deviation aligned only with the largest candidate's extra directions
/// makes the selector pick that candidate: the statistic jump dwarfs the
/// penalty there and nowhere else.
#[test]
fn selector_picks_the_largest_candidate_for_a_planted_high_degree_deviation() {
    use panelspec_core::mc::{eval_poly, orthogonal_poly_coefficients, DEFAULT_REGRESSOR_SUPPORT};
    use rand::Rng;
    let coef = orthogonal_poly_coefficients(DEFAULT_REGRESSOR_SUPPORT, 8);
    let mut rng = rng::stream_rng(8501, rng::Domain::Reference, 0);
    let (n, t) = (400, 4);
    let mut rows = Vec::new();
    for i in 0..n {
        let fe: f64 = rng.gen_range(-1.0..1.0);
        for s in 0..t {
            let x = rng.gen_range(DEFAULT_REGRESSOR_SUPPORT.0..DEFAULT_REGRESSOR_SUPPORT.1);
            let eps: f64 = rng.gen_range(-1.0..1.0);
            let y = fe + 2.0 * x + 2.0 * eval_poly(&coef, x) + eps;
            rows.push(PanelRow {
                id: format!("{i}"),
                time: format!("{s}"),
                y,
                x: vec![x],
            });
        }
    }
    let p = panel::assemble_panel(rows, vec!["x1".into()]).unwrap();
    let tp = within_transform(&p);
    let null = BasisSpec::power(2, vec![VariableRole::Nonparametric], 1);
    let a_ns: Vec<usize> = (4..=9).collect();
    let alts: Vec<BasisSpec> = a_ns
        .iter()
        .map(|&a| BasisSpec::power(a, vec![VariableRole::Nonparametric], 1))
        .collect();
    let ds = orthonormalize(&build_design_grid(&tp, &null, &alts).unwrap());
    let fit = fit_restricted(&tp, &ds).unwrap();
    let grid = SelectionGrid::from_design(&ds, &a_ns, 5.0).unwrap();
    let (report, _res) = select_rn(&fit, &grid, OmegaKind::Homoskedastic).unwrap();
    println!(
        "criterion by a_n: {:?}",
        report.rows.iter().map(|r| (r.a_n, r.criterion.round())).collect::<Vec<_>>()
    );
    assert_eq!(report.chosen_a_n, 9, "only a_n = 9 spans the planted deviation");
}

/// Power against the smooth nonparametric alternative grows with n
/// (setups 1 -> 3 and 2 -> 4) within Monte Carlo error.
#[test]
fn power_is_nondecreasing_in_n() {
    let power = |n: usize, t: usize, seed: u64| -> (f64, f64) {
        let cfg = DgpConfig::new(n, t, Dgp::NpAlt, ErrorLaw::Homoskedastic, seed).unwrap();
        let spec = McTestSpec::new(
            OmegaKind::Homoskedastic,
            BasisFamily::Power,
            4,
            vec![Variant::AsymXiRn],
        );
        let res = run_mc(&cfg, &spec, 1000, 0).unwrap();
        let cell = res.cell(Variant::AsymXiRn).unwrap();
        (cell.rejection_rate, cell.mc_se)
    };
    let (p1, se1) = power(250, 2, 8301);
    let (p3, se3) = power(500, 2, 8303);
    let (p2, se2) = power(250, 4, 8302);
    let (p4, se4) = power(500, 4, 8304);
    println!("power: setup1 = {p1:.3}, setup3 = {p3:.3}, setup2 = {p2:.3}, setup4 = {p4:.3}");
    assert!(
        p3 >= p1 - 2.0 * (se1 * se1 + se3 * se3).sqrt(),
        "power dropped from setup 1 ({p1}) to setup 3 ({p3})"
    );
    assert!(
        p4 >= p2 - 2.0 * (se2 * se2 + se4 * se4).sqrt(),
        "power dropped from setup 2 ({p2}) to setup 4 ({p4})"
    );
}
