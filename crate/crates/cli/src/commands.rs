//! The three pipelines behind the subcommands.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use panelspec_core as core;
use panelspec_core::{
    BasisSpec, BootstrapDistribution, MultiplierLaw, OmegaKind, SelectionGrid, SelectionReport,
    TestResult,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub law: MultiplierLaw,
    pub kind: OmegaKind,
    pub b: usize,
    pub failed: usize,
    pub p_value: f64,
    pub critical_value_05: f64,
    pub critical_value_10: f64,
}

/// Everything a `test`/`select` run reports. Serialized as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub config: RunConfig,
    pub n: usize,
    pub t: usize,
    pub t_prime: usize,
    pub result: TestResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bootstrap: Option<BootstrapSummary>,
    pub w_columns: Vec<String>,
    pub z_columns: Vec<String>,
    pub dropped_columns: Vec<String>,
}

fn null_spec(cfg: &RunConfig) -> BasisSpec {
    BasisSpec {
        family: cfg.basis,
        a_n: cfg.null_an,
        spline_order: cfg.spline_order,
        interaction_order: 1,
        roles: cfg.null_roles(),
        knots: cfg.knot_vectors(),
    }
}

fn alt_spec(cfg: &RunConfig, a_n: usize) -> BasisSpec {
    BasisSpec {
        family: cfg.basis,
        a_n,
        spline_order: cfg.spline_order,
        interaction_order: cfg.interactions,
        roles: cfg.alt_roles(),
        knots: cfg.knot_vectors(),
    }
}

fn transform(cfg: &RunConfig, panel: &core::PanelDataset) -> core::TransformedPanel {
    match cfg.transform {
        core::Transform::Within => core::within_transform(panel),
        core::Transform::FirstDifference => core::first_difference(panel),
    }
}

fn run_bootstrap_inference(
    cfg: &RunConfig,
    fit: &core::RestrictedFit,
    observed_t: f64,
) -> Result<(BootstrapSummary, BootstrapDistribution)> {
    let dist = core::run_bootstrap(fit, cfg.boot_law, cfg.stat, cfg.boot_reps, cfg.seed)?;
    let summary = BootstrapSummary {
        law: cfg.boot_law,
        kind: cfg.stat,
        b: dist.b(),
        failed: dist.failed,
        p_value: core::bootstrap_pvalue(observed_t, &dist),
        critical_value_05: dist.critical_value(0.05),
        critical_value_10: dist.critical_value(0.10),
    };
    Ok((summary, dist))
}

fn write_report(report: &TestReport, out: Option<&Path>) -> Result<()> {
    let path = out.unwrap_or_else(|| Path::new("report.json"));
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    println!("report written to {}", path.display());
    Ok(())
}

fn print_summary(report: &TestReport) {
    println!("{}", report.result);
    let five = report.result.crit_chi2_05;
    let ten = report.result.crit_chi2_10;
    let verdict = |rejected: bool| if rejected { "rejected" } else { "not rejected" };
    println!(
        "chi-square decision: {} at 5% (xi vs {:.3}), {} at 10% (xi vs {:.3})",
        verdict(report.result.xi > five),
        five,
        verdict(report.result.xi > ten),
        ten
    );
    if let Some(sel) = &report.selection {
        println!(
            "data-driven choice: a_n = {}, r_n = {} (gamma_n = {:.4}, c = {}) [{}]",
            sel.chosen_a_n, sel.chosen_r_n, sel.gamma_n, sel.c, sel.post_selection_note
        );
        println!("  a_n  r_n        xi  criterion");
        for row in &sel.rows {
            println!(
                "  {:>3}  {:>3}  {:>8.3}  {:>9.3}{}",
                row.a_n,
                row.r_n,
                row.xi,
                row.criterion,
                if row.chosen { "  <- chosen" } else { "" }
            );
        }
    }
    if let Some(b) = &report.bootstrap {
        println!(
            "wild bootstrap ({}, B = {}): p = {:.4}, critical values 5%/10% = {:.3}/{:.3}{}",
            b.law,
            b.b,
            b.p_value,
            b.critical_value_05,
            b.critical_value_10,
            if b.failed > 0 {
                format!(" ({} failed replicates)", b.failed)
            } else {
                String::new()
            }
        );
    }
    if !report.dropped_columns.is_empty() {
        println!("dropped columns: {}", report.dropped_columns.join(", "));
    }
}

fn load(cfg: &RunConfig) -> Result<core::PanelDataset> {
    let cols = cfg.all_x_cols();
    Ok(core::load_panel_file(
        &cfg.data, &cfg.id, &cfg.time, &cfg.y, &cols,
    )?)
}

/// `test`: fixed null and alternative, asymptotic and/or bootstrap inference.
pub fn cmd_test(cfg: &RunConfig) -> Result<TestReport> {
    let panel = load(cfg)?;
    let tp = transform(cfg, &panel);
    let ds = core::orthonormalize(&core::build_null_and_test_designs(
        &tp,
        &null_spec(cfg),
        &alt_spec(cfg, cfg.alt_an),
    )?);
    let fit = core::fit_restricted(&tp, &ds)?;
    let mut result = core::run_test(&fit, cfg.stat)?;

    let mut boot_summary = None;
    if cfg.inference.wants_bootstrap() {
        let (summary, dist) = run_bootstrap_inference(cfg, &fit, result.t_rn)?;
        result.bootstrap_p = Some(summary.p_value);
        if let Some(path) = &cfg.boot_stats_out {
            let file = std::fs::File::create(path)
                .with_context(|| format!("writing {}", path.display()))?;
            dist.write_csv(file)?;
        }
        boot_summary = Some(summary);
    }

    let report = TestReport {
        config: cfg.clone(),
        n: panel.n,
        t: panel.t,
        t_prime: tp.t_prime,
        result,
        selection: None,
        bootstrap: boot_summary,
        w_columns: ds.w_labels.iter().map(|t| t.describe(&ds.x_names)).collect(),
        z_columns: ds.z_labels.iter().map(|t| t.describe(&ds.x_names)).collect(),
        dropped_columns: ds.dropped_descriptions(),
    };
    print_summary(&report);
    write_report(&report, cfg.out.as_deref())?;
    Ok(report)
}

/// `select`: data-driven number of test directions over an `a_n` grid, then
/// the (nominal) test at the chosen candidate.
pub fn cmd_select(cfg: &RunConfig) -> Result<TestReport> {
    let (lo, hi) = cfg.grid.context("select requires a grid")?;
    let panel = load(cfg)?;
    let tp = transform(cfg, &panel);
    let a_ns: Vec<usize> = (lo..=hi).collect();
    let alt_specs: Vec<BasisSpec> = a_ns.iter().map(|&a| alt_spec(cfg, a)).collect();
    let ds = core::orthonormalize(&core::build_design_grid(&tp, &null_spec(cfg), &alt_specs)?);
    let fit = core::fit_restricted(&tp, &ds)?;
    let grid = SelectionGrid::from_design(&ds, &a_ns, cfg.penalty_c)?;
    let (selection, mut result) = core::select_rn(&fit, &grid, cfg.stat)?;

    let mut boot_summary = None;
    if cfg.inference.wants_bootstrap() {
        // bootstrap at the chosen design; the selector itself is not re-run
        let chosen_ds = core::orthonormalize(&core::build_null_and_test_designs(
            &tp,
            &null_spec(cfg),
            &alt_spec(cfg, selection.chosen_a_n),
        )?);
        let chosen_fit = core::fit_restricted(&tp, &chosen_ds)?;
        let (summary, dist) = run_bootstrap_inference(cfg, &chosen_fit, result.t_rn)?;
        result.bootstrap_p = Some(summary.p_value);
        if let Some(path) = &cfg.boot_stats_out {
            let file = std::fs::File::create(path)
                .with_context(|| format!("writing {}", path.display()))?;
            dist.write_csv(file)?;
        }
        boot_summary = Some(summary);
    }

    let report = TestReport {
        config: cfg.clone(),
        n: panel.n,
        t: panel.t,
        t_prime: tp.t_prime,
        result,
        selection: Some(selection),
        bootstrap: boot_summary,
        w_columns: ds.w_labels.iter().map(|t| t.describe(&ds.x_names)).collect(),
        z_columns: ds.z_labels.iter().map(|t| t.describe(&ds.x_names)).collect(),
        dropped_columns: ds.dropped_descriptions(),
    };
    print_summary(&report);
    write_report(&report, cfg.out.as_deref())?;
    Ok(report)
}

/// Monte Carlo run configuration (the `mc` subcommand).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRunConfig {
    pub n: usize,
    pub t: usize,
    pub dgp: core::Dgp,
    pub errors: core::ErrorLaw,
    pub reps: usize,
    pub spec: core::McTestSpec,
    pub boot_reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McRunConfig,
    pub cells: Vec<core::McCell>,
    pub completed: usize,
    pub failures: usize,
}

/// `mc`: the simulation study; emits the plot-ready CSV and a JSON summary.
pub fn cmd_mc(run: &McRunConfig, out: &Path, summary_out: Option<&Path>) -> Result<McSummary> {
    let cfg = core::DgpConfig::new(run.n, run.t, run.dgp, run.errors, run.seed)?;
    let result = core::run_mc(&cfg, &run.spec, run.reps, run.boot_reps)?;
    let file = std::fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
    result.write_csv(file)?;
    println!("monte carlo results written to {}", out.display());
    for cell in &result.cells {
        println!(
            "  {:<16} a_n = {:<18} r_n = {:<3} rejection rate = {:.3} (se {:.3})",
            cell.variant, cell.a_n, cell.r_n, cell.rejection_rate, cell.mc_se
        );
    }
    let summary = McSummary {
        config: run.clone(),
        cells: result.cells.clone(),
        completed: result.completed,
        failures: result.failures,
    };
    if let Some(path) = summary_out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("summary written to {}", path.display());
    }
    Ok(summary)
}
