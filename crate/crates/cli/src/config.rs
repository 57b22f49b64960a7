//! Run configuration: JSON config file with CLI-flag overrides (flags win).

use anyhow::{bail, Context, Result};
use panelspec_core::{BasisFamily, MultiplierLaw, OmegaKind, Transform, VariableRole};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inference {
    Asymptotic,
    Bootstrap,
    Both,
}

impl Inference {
    pub fn wants_bootstrap(self) -> bool {
        matches!(self, Inference::Bootstrap | Inference::Both)
    }
}

/// Optional-everything shape shared by the config file and the flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub data: Option<PathBuf>,
    pub id: Option<String>,
    pub time: Option<String>,
    pub y: Option<String>,
    pub x: Option<Vec<String>>,
    pub dummies: Option<Vec<String>>,
    /// Variables entering the null linearly (parametric) instead of
    /// nonparametrically.
    pub null_linear: Option<Vec<String>>,
    pub transform: Option<String>,
    pub null_an: Option<usize>,
    pub alt_an: Option<usize>,
    pub basis: Option<String>,
    pub spline_order: Option<usize>,
    /// Explicit knots per variable name (level units); quantile rule when absent.
    pub knots: Option<std::collections::BTreeMap<String, Vec<f64>>>,
    pub interactions: Option<usize>,
    pub stat: Option<String>,
    pub inference: Option<String>,
    pub boot_law: Option<String>,
    pub boot_reps: Option<usize>,
    pub grid_min: Option<usize>,
    pub grid_max: Option<usize>,
    pub penalty_c: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub boot_stats_out: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Field-wise override: values in `flags` win.
    pub fn overridden_by(self, flags: PartialConfig) -> PartialConfig {
        macro_rules! pick {
            ($f:ident) => {
                flags.$f.or(self.$f)
            };
        }
        PartialConfig {
            data: pick!(data),
            id: pick!(id),
            time: pick!(time),
            y: pick!(y),
            x: pick!(x),
            dummies: pick!(dummies),
            null_linear: pick!(null_linear),
            transform: pick!(transform),
            null_an: pick!(null_an),
            alt_an: pick!(alt_an),
            basis: pick!(basis),
            spline_order: pick!(spline_order),
            knots: pick!(knots),
            interactions: pick!(interactions),
            stat: pick!(stat),
            inference: pick!(inference),
            boot_law: pick!(boot_law),
            boot_reps: pick!(boot_reps),
            grid_min: pick!(grid_min),
            grid_max: pick!(grid_max),
            penalty_c: pick!(penalty_c),
            seed: pick!(seed),
            out: pick!(out),
            boot_stats_out: pick!(boot_stats_out),
        }
    }
}

/// Fully resolved configuration, embedded verbatim in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub data: PathBuf,
    pub id: String,
    pub time: String,
    pub y: String,
    pub x: Vec<String>,
    pub dummies: Vec<String>,
    pub null_linear: Vec<String>,
    pub transform: Transform,
    pub basis: BasisFamily,
    pub null_an: usize,
    pub alt_an: usize,
    pub spline_order: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub knots: Option<std::collections::BTreeMap<String, Vec<f64>>>,
    pub interactions: usize,
    pub stat: OmegaKind,
    pub inference: Inference,
    pub boot_law: MultiplierLaw,
    pub boot_reps: usize,
    pub grid: Option<(usize, usize)>,
    pub penalty_c: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boot_stats_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(merged: PartialConfig, subcommand: &str, needs_grid: bool) -> Result<Self> {
        let data = merged.data.context("--data (or config `data`) is required")?;
        let y = merged.y.context("--y (or config `y`) is required")?;
        let x = merged.x.unwrap_or_default();
        if x.is_empty() {
            bail!("--x needs at least one regressor column");
        }
        let dummies = merged.dummies.unwrap_or_default();
        let null_linear = merged.null_linear.unwrap_or_default();
        for v in &null_linear {
            if !x.contains(v) {
                bail!("--null-linear variable {v:?} is not among --x");
            }
        }
        let transform = match merged.transform.as_deref().unwrap_or("within") {
            "within" => Transform::Within,
            "fd" | "first_difference" => Transform::FirstDifference,
            other => bail!("unknown transform {other:?} (within | fd)"),
        };
        let basis = match merged.basis.as_deref().unwrap_or("power") {
            "power" => BasisFamily::Power,
            "spline" => BasisFamily::Spline,
            other => bail!("unknown basis {other:?} (power | spline)"),
        };
        let stat = match merged.stat.as_deref().unwrap_or("hc") {
            "hom" => OmegaKind::Homoskedastic,
            "hc" => OmegaKind::Heteroskedastic,
            other => bail!("unknown statistic kind {other:?} (hom | hc)"),
        };
        let inference = match merged.inference.as_deref().unwrap_or("asym") {
            "asym" => Inference::Asymptotic,
            "boot" => Inference::Bootstrap,
            "both" => Inference::Both,
            other => bail!("unknown inference {other:?} (asym | boot | both)"),
        };
        let boot_law = match merged.boot_law.as_deref().unwrap_or("rademacher") {
            "mammen" => MultiplierLaw::Mammen,
            "rademacher" => MultiplierLaw::Rademacher,
            other => bail!("unknown bootstrap law {other:?} (mammen | rademacher)"),
        };
        if merged.boot_law.is_some() && !inference.wants_bootstrap() {
            bail!("--boot-law only makes sense with --inference boot or both");
        }
        let grid = match (merged.grid_min, merged.grid_max) {
            (Some(lo), Some(hi)) => {
                if hi < lo + 1 {
                    bail!("grid needs at least two candidates (grid-max > grid-min)");
                }
                Some((lo, hi))
            }
            (None, None) => None,
            _ => bail!("--grid-min and --grid-max must be given together"),
        };
        if needs_grid && grid.is_none() {
            bail!("data-driven mode requires --grid-min and --grid-max");
        }
        if !needs_grid && grid.is_some() {
            bail!("--grid-min/--grid-max are only valid with the `select` subcommand");
        }
        Ok(RunConfig {
            subcommand: subcommand.to_string(),
            data,
            id: merged.id.unwrap_or_else(|| "id".to_string()),
            time: merged.time.unwrap_or_else(|| "time".to_string()),
            y,
            x,
            dummies,
            null_linear,
            transform,
            basis,
            null_an: merged.null_an.unwrap_or(2),
            alt_an: merged.alt_an.unwrap_or(4),
            spline_order: merged.spline_order.unwrap_or(3),
            knots: merged.knots,
            interactions: merged.interactions.unwrap_or(2),
            stat,
            inference,
            boot_law,
            boot_reps: merged.boot_reps.unwrap_or(399),
            grid,
            penalty_c: merged.penalty_c.unwrap_or(5.0),
            seed: merged.seed.unwrap_or(0),
            out: merged.out,
            boot_stats_out: merged.boot_stats_out,
        })
    }

    /// All regressor columns in design order (tested variables then dummies).
    pub fn all_x_cols(&self) -> Vec<String> {
        let mut cols = self.x.clone();
        cols.extend(self.dummies.iter().cloned());
        cols
    }

    /// Roles under the null: tested variables are nonparametric unless listed
    /// in `null_linear`; dummies stay dummies.
    pub fn null_roles(&self) -> Vec<VariableRole> {
        let mut roles: Vec<VariableRole> = self
            .x
            .iter()
            .map(|v| {
                if self.null_linear.contains(v) {
                    VariableRole::Parametric
                } else {
                    VariableRole::Nonparametric
                }
            })
            .collect();
        roles.extend(std::iter::repeat_n(VariableRole::Dummy, self.dummies.len()));
        roles
    }

    /// Roles under the alternative: every tested variable nonparametric.
    pub fn alt_roles(&self) -> Vec<VariableRole> {
        let mut roles = vec![VariableRole::Nonparametric; self.x.len()];
        roles.extend(std::iter::repeat_n(VariableRole::Dummy, self.dummies.len()));
        roles
    }

    /// Explicit knot vectors aligned with [`RunConfig::all_x_cols`]; `None`
    /// when every variable uses the quantile rule.
    pub fn knot_vectors(&self) -> Option<Vec<Vec<f64>>> {
        let map = self.knots.as_ref()?;
        Some(
            self.all_x_cols()
                .iter()
                .map(|name| map.get(name).cloned().unwrap_or_default())
                .collect(),
        )
    }
}
