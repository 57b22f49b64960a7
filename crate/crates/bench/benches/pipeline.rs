//! Benchmarks of the pipeline stages on a Setup-2-sized problem
//! (n = 250, T = 4, partially linear null, a_n = 4 alternative).

use criterion::{criterion_group, criterion_main, Criterion};
use panelspec_core::*;
use std::hint::black_box;

fn fixtures() -> (TransformedPanel, DesignSplit, RestrictedFit) {
    let cfg = DgpConfig::new(250, 4, Dgp::SpNull, ErrorLaw::Homoskedastic, 42).unwrap();
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
    (tp, ds, fit)
}

fn bench_pipeline(c: &mut Criterion) {
    let cfg = DgpConfig::new(250, 4, Dgp::SpNull, ErrorLaw::Homoskedastic, 42).unwrap();
    let (tp, ds, fit) = fixtures();
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

    c.bench_function("generate_panel", |b| {
        b.iter(|| black_box(generate_panel(&cfg, black_box(1))))
    });
    c.bench_function("build_and_orthonormalize_designs", |b| {
        b.iter(|| {
            let raw = build_null_and_test_designs(&tp, &null, &alt).unwrap();
            black_box(orthonormalize(&raw))
        })
    });
    c.bench_function("fit_restricted", |b| {
        b.iter(|| black_box(fit_restricted(&tp, &ds).unwrap()))
    });
    c.bench_function("omega_and_xi_heteroskedastic", |b| {
        b.iter(|| black_box(run_test(&fit, OmegaKind::Heteroskedastic).unwrap()))
    });
    c.bench_function("bootstrap_replicate", |b| {
        let mut rep = 0u64;
        b.iter(|| {
            rep += 1;
            black_box(
                bootstrap_statistic(
                    &fit,
                    MultiplierLaw::Rademacher,
                    OmegaKind::Heteroskedastic,
                    7,
                    rep,
                )
                .unwrap(),
            )
        })
    });
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
