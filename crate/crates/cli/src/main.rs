//! `panelspec` — series-based LM specification test for fixed-effects panels.

mod commands;
mod config;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use commands::{cmd_mc, cmd_select, cmd_test, McRunConfig};
use config::{PartialConfig, RunConfig};

use panelspec_core as core;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "panelspec",
    version,
    about = "Series-based LM specification test for fixed-effects panel data models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test a (semi)parametric null against a series alternative on a CSV panel.
    Test(TestArgs),
    /// Like `test`, but choose the number of test directions data-adaptively.
    Select(SelectArgs),
    /// Monte Carlo size/power study on simulated panels.
    Mc(McArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Long-format CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Individual-identifier column.
    #[arg(long)]
    id: Option<String>,
    /// Time-period column.
    #[arg(long)]
    time: Option<String>,
    /// Outcome column.
    #[arg(long)]
    y: Option<String>,
    /// Tested regressor columns (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<String>>,
    /// Dummy columns: enter linearly, never expanded or interacted.
    #[arg(long, value_delimiter = ',')]
    dummies: Option<Vec<String>>,
    /// Tested regressors that enter the null linearly instead of nonparametrically.
    #[arg(long, value_delimiter = ',')]
    null_linear: Option<Vec<String>>,
    /// Fixed-effect elimination: within | fd.
    #[arg(long)]
    transform: Option<String>,
    /// Terms per univariate expansion in the null (incl. constant).
    #[arg(long)]
    null_an: Option<usize>,
    /// Terms per univariate expansion in the alternative (incl. constant).
    #[arg(long)]
    alt_an: Option<usize>,
    /// Basis family: power | spline.
    #[arg(long)]
    basis: Option<String>,
    /// Spline order s (cubic = 3); explicit knots go in the config file.
    #[arg(long)]
    spline_order: Option<usize>,
    /// Maximum tensor-product interaction order in the alternative.
    #[arg(long)]
    interactions: Option<usize>,
    /// Statistic kind: hom | hc.
    #[arg(long)]
    stat: Option<String>,
    /// Inference: asym | boot | both.
    #[arg(long)]
    inference: Option<String>,
    /// Wild bootstrap multiplier law: mammen | rademacher.
    #[arg(long)]
    boot_law: Option<String>,
    /// Wild bootstrap replicates.
    #[arg(long)]
    boot_reps: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path (default report.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV dump of the bootstrap replicate statistics.
    #[arg(long)]
    boot_stats_out: Option<PathBuf>,
}

impl CommonArgs {
    fn into_partial(self) -> PartialConfig {
        PartialConfig {
            data: self.data,
            id: self.id,
            time: self.time,
            y: self.y,
            x: self.x,
            dummies: self.dummies,
            null_linear: self.null_linear,
            transform: self.transform,
            null_an: self.null_an,
            alt_an: self.alt_an,
            basis: self.basis,
            interactions: self.interactions,
            stat: self.stat,
            inference: self.inference,
            boot_law: self.boot_law,
            boot_reps: self.boot_reps,
            spline_order: self.spline_order,
            knots: None,
            grid_min: None,
            grid_max: None,
            penalty_c: None,
            seed: self.seed,
            out: self.out,
            boot_stats_out: self.boot_stats_out,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smallest candidate a_n.
    #[arg(long)]
    grid_min: Option<usize>,
    /// Largest candidate a_n.
    #[arg(long)]
    grid_max: Option<usize>,
    /// Penalty constant c of the selection rule.
    #[arg(long)]
    penalty_c: Option<f64>,
}

#[derive(Args)]
struct McArgs {
    /// Individuals per replication.
    #[arg(long, default_value_t = 250)]
    n: usize,
    /// Periods per individual.
    #[arg(long, default_value_t = 4)]
    t: usize,
    /// DGP: sp-null | np-alt | linear-null | linear-smooth | linear-orth.
    #[arg(long, default_value = "sp-null")]
    dgp: String,
    /// Error law: hom | het.
    #[arg(long, default_value = "hom")]
    errors: String,
    /// Replications.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Variants to evaluate (comma separated):
    /// xi-rn | xi-kn | t-rn | t-kn | boot-rademacher | boot-mammen | data-driven.
    #[arg(long, value_delimiter = ',', default_value = "xi-rn,t-rn")]
    variants: Vec<String>,
    /// Basis family: power | spline.
    #[arg(long, default_value = "power")]
    basis: String,
    /// Statistic kind: hom | hc.
    #[arg(long, default_value = "hom")]
    stat: String,
    /// Terms per univariate expansion for the fixed-a_n variants.
    #[arg(long, default_value_t = 4)]
    an: usize,
    /// Smallest candidate a_n for the data-driven variant.
    #[arg(long)]
    grid_min: Option<usize>,
    /// Largest candidate a_n for the data-driven variant.
    #[arg(long)]
    grid_max: Option<usize>,
    /// Transform: within | fd.
    #[arg(long, default_value = "within")]
    transform: String,
    /// Nominal level of every rejection decision.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Bootstrap replicates for the bootstrap variants.
    #[arg(long, default_value_t = 399)]
    boot_reps: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV path.
    #[arg(long, default_value = "mc_results.csv")]
    out: PathBuf,
    /// Optional JSON summary path.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

fn resolve(common: CommonArgs, extra: PartialConfig, sub: &str, needs_grid: bool) -> Result<RunConfig> {
    let config_path = common.config.clone();
    let mut flags = common.into_partial();
    flags.grid_min = extra.grid_min;
    flags.grid_max = extra.grid_max;
    flags.penalty_c = extra.penalty_c;
    let from_file = match config_path {
        Some(p) => PartialConfig::from_file(&p)?,
        None => PartialConfig::default(),
    };
    RunConfig::resolve(from_file.overridden_by(flags), sub, needs_grid)
}

fn parse_mc(args: &McArgs) -> Result<(McRunConfig, PathBuf, Option<PathBuf>)> {
    let dgp = match args.dgp.as_str() {
        "sp-null" => core::Dgp::SpNull,
        "np-alt" => core::Dgp::NpAlt,
        "linear-null" => core::Dgp::LinearNull,
        "linear-smooth" => core::Dgp::LinearSmoothAlt,
        "linear-orth" => core::Dgp::LinearOrthogonalAlt,
        other => bail!("unknown dgp {other:?}"),
    };
    let errors = match args.errors.as_str() {
        "hom" => core::ErrorLaw::Homoskedastic,
        "het" => core::ErrorLaw::Heteroskedastic,
        other => bail!("unknown error law {other:?} (hom | het)"),
    };
    let family = match args.basis.as_str() {
        "power" => core::BasisFamily::Power,
        "spline" => core::BasisFamily::Spline,
        other => bail!("unknown basis {other:?}"),
    };
    let kind = match args.stat.as_str() {
        "hom" => core::OmegaKind::Homoskedastic,
        "hc" => core::OmegaKind::Heteroskedastic,
        other => bail!("unknown statistic kind {other:?}"),
    };
    let transform = match args.transform.as_str() {
        "within" => core::Transform::Within,
        "fd" | "first_difference" => core::Transform::FirstDifference,
        other => bail!("unknown transform {other:?}"),
    };
    let mut variants = Vec::new();
    for v in &args.variants {
        variants.push(match v.as_str() {
            "xi-rn" => core::Variant::AsymXiRn,
            "xi-kn" => core::Variant::AsymXiKn,
            "t-rn" => core::Variant::AsymTRn,
            "t-kn" => core::Variant::AsymTKn,
            "boot-rademacher" => core::Variant::BootRademacher,
            "boot-mammen" => core::Variant::BootMammen,
            "data-driven" => core::Variant::DataDriven,
            other => bail!("unknown variant {other:?}"),
        });
    }
    let grid = match (args.grid_min, args.grid_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => bail!("--grid-min and --grid-max must be given together"),
    };
    if variants.contains(&core::Variant::DataDriven) && grid.is_none() {
        bail!("the data-driven variant requires --grid-min and --grid-max");
    }
    let mut spec = core::McTestSpec::new(kind, family, args.an, variants);
    spec.transform = transform;
    spec.grid = grid;
    spec.level = args.level;
    let run = McRunConfig {
        n: args.n,
        t: args.t,
        dgp,
        errors,
        reps: args.reps,
        spec,
        boot_reps: args.boot_reps,
        seed: args.seed,
    };
    Ok((run, args.out.clone(), args.summary_out.clone()))
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Test(args) => {
            let cfg = resolve(args.common, PartialConfig::default(), "test", false)?;
            cmd_test(&cfg)?;
        }
        Cmd::Select(args) => {
            let extra = PartialConfig {
                grid_min: args.grid_min,
                grid_max: args.grid_max,
                penalty_c: args.penalty_c,
                ..Default::default()
            };
            let cfg = resolve(args.common, extra, "select", true)?;
            cmd_select(&cfg)?;
        }
        Cmd::Mc(args) => {
            let (run, out, summary_out) = parse_mc(&args)?;
            cmd_mc(&run, &out, summary_out.as_deref())?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
