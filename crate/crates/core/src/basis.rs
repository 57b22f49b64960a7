//! Series bases for the restricted model and the test directions.
//!
//! Designs are built in level units from labeled terms (powers, truncated
//! power spline pieces, interactions), transformed to eliminate fixed
//! effects, and split into the restricted block `W` and the test block `Z`.
//! A sequential Gram–Schmidt pass orthonormalizes `[W Z]` in the sample inner
//! product, which leaves the restricted span and the conditional test span
//! unchanged while making the two blocks exactly orthogonal.

use crate::error::{Error, Result};
use crate::panel::TransformedPanel;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Tolerance for declaring a transformed column numerically zero, relative to
/// the level column scale.
const ANNIHILATION_TOL: f64 = 1e-10;

/// Relative tolerance below which a column is treated as linearly dependent
/// during orthonormalization (double-precision QR noise floor).
const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Power,
    Spline,
}

/// How a raw regressor enters a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    /// Enters linearly only.
    Parametric,
    /// Gets the full univariate expansion (and may interact).
    Nonparametric,
    /// 0/1 indicator; enters linearly, never expanded or interacted.
    Dummy,
}

/// Specification of one design (null model or alternative).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    /// Terms per univariate expansion, including the constant (>= 2).
    pub a_n: usize,
    /// Spline order `s` (cubic = 3). Ignored by the power family.
    #[serde(default = "default_spline_order")]
    pub spline_order: usize,
    /// Maximum number of distinct variables in a tensor-product interaction.
    /// 1 disables interactions.
    #[serde(default = "default_interaction_order")]
    pub interaction_order: usize,
    /// One role per regressor column.
    pub roles: Vec<VariableRole>,
    /// Optional explicit knots per variable, in level units. When absent,
    /// knots sit at equally spaced empirical quantiles of the level variable.
    #[serde(default)]
    pub knots: Option<Vec<Vec<f64>>>,
}

fn default_spline_order() -> usize {
    3
}

fn default_interaction_order() -> usize {
    2
}

impl BasisSpec {
    pub fn power(a_n: usize, roles: Vec<VariableRole>, interaction_order: usize) -> Self {
        Self {
            family: BasisFamily::Power,
            a_n,
            spline_order: 3,
            interaction_order,
            roles,
            knots: None,
        }
    }

    pub fn spline(
        a_n: usize,
        spline_order: usize,
        roles: Vec<VariableRole>,
        interaction_order: usize,
    ) -> Self {
        Self {
            family: BasisFamily::Spline,
            a_n,
            spline_order,
            interaction_order,
            roles,
            knots: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.a_n < 2 {
            return Err(Error::DegreeTooSmall(self.a_n));
        }
        if self.interaction_order < 1 {
            return Err(Error::InvalidConfig("interaction_order must be >= 1".into()));
        }
        Ok(())
    }
}

/// One factor of a term: a power of a variable or a truncated spline piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartKind {
    /// `u^degree`, degree >= 1.
    Power { degree: usize },
    /// `max(0, u - knot)^order`, knot in rescaled units; `knot_level` kept for
    /// display and identity across specs.
    Spline { order: usize, knot_bits: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermPart {
    pub var: usize,
    pub kind: PartKind,
}

/// A labeled design column: a product of parts over distinct variables.
/// The empty product is the constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(pub Vec<TermPart>);

impl Term {
    pub fn constant() -> Self {
        Term(Vec::new())
    }

    pub fn describe(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return "1".to_string();
        }
        self.0
            .iter()
            .map(|p| {
                let v = names
                    .get(p.var)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", p.var + 1));
                match p.kind {
                    PartKind::Power { degree: 1 } => v,
                    PartKind::Power { degree } => format!("{v}^{degree}"),
                    PartKind::Spline { order, knot_bits } => {
                        format!("({v}-{:.4})_+^{order}", f64::from_bits(knot_bits))
                    }
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// A dropped column and why it was dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub label: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The transformation mapped the column to (numerical) zero.
    AnnihilatedByTransform,
    /// The column is linearly dependent on columns before it.
    Collinear,
}

/// Restricted design `W` and test directions `Z` on transformed rows.
#[derive(Debug, Clone)]
pub struct DesignSplit {
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub w_labels: Vec<Term>,
    pub z_labels: Vec<Term>,
    /// For grid builds: index of the smallest candidate containing each `z`
    /// column (parallel to `z_labels`); all zeros for single-spec builds.
    pub z_entry: Vec<usize>,
    pub dropped: Vec<DroppedColumn>,
    pub n: usize,
    pub t_prime: usize,
    pub x_names: Vec<String>,
    /// Whether [`orthonormalize`] has run on this split.
    pub orthonormal: bool,
}

impl DesignSplit {
    pub fn m_n(&self) -> usize {
        self.w.ncols()
    }

    pub fn r_n(&self) -> usize {
        self.z.ncols()
    }

    pub fn k_n(&self) -> usize {
        self.m_n() + self.r_n()
    }

    pub fn rows(&self) -> usize {
        self.n * self.t_prime
    }

    pub fn dropped_descriptions(&self) -> Vec<String> {
        self.dropped
            .iter()
            .map(|d| format!("{} ({:?})", d.label, d.reason))
            .collect()
    }
}

/// Evaluates the univariate expansion of one column under `spec`, in the
/// units of `z` (no rescaling). Power columns are computed by iterated
/// multiplication. For splines, knots for variable `var` come from
/// `spec.knots` and must lie strictly inside the observed support of `z`.
pub fn build_univariate(z: &DVector<f64>, spec: &BasisSpec, var: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let rows = z.len();
    let (zmin, zmax) = column_range(z);
    // below s + 1 terms a spline expansion has no knots yet and coincides
    // with the power expansion
    let knots: Vec<f64> = match spec.family {
        BasisFamily::Power => Vec::new(),
        BasisFamily::Spline => {
            let count = spec.a_n.saturating_sub(spec.spline_order + 1);
            resolve_knots(z, spec, var, count, zmin, zmax)?
        }
    };
    let poly_top = match spec.family {
        BasisFamily::Power => spec.a_n - 1,
        BasisFamily::Spline => spec.spline_order.min(spec.a_n - 1),
    };
    let ncols = poly_top + 1 + knots.len();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut running = DVector::from_element(rows, 1.0);
    out.set_column(0, &running);
    for d in 1..=poly_top {
        running.component_mul_assign(z);
        out.set_column(d, &running);
    }
    for (j, &k) in knots.iter().enumerate() {
        let col = DVector::from_fn(rows, |r, _| {
            let d = z[r] - k;
            if d > 0.0 {
                d.powi(spec.spline_order as i32)
            } else {
                0.0
            }
        });
        out.set_column(poly_top + 1 + j, &col);
    }
    Ok(out)
}

fn column_range(z: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in z.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn resolve_knots(
    z: &DVector<f64>,
    spec: &BasisSpec,
    var: usize,
    count: usize,
    zmin: f64,
    zmax: f64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if let Some(all) = &spec.knots {
        let ks = all.get(var).cloned().unwrap_or_default();
        if ks.len() != count {
            return Err(Error::InvalidConfig(format!(
                "variable {var}: expected {count} knots for a_n = {}, got {}",
                spec.a_n,
                ks.len()
            )));
        }
        for w in ks.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidConfig(format!(
                    "knots for variable {var} must be strictly increasing"
                )));
            }
        }
        for &k in &ks {
            if k <= zmin || k >= zmax {
                return Err(Error::KnotOutOfRange {
                    var: format!("x{}", var + 1),
                    knot: k,
                    min: zmin,
                    max: zmax,
                });
            }
        }
        Ok(ks)
    } else {
        Ok(quantile_knots(z, count))
    }
}

/// Equally spaced empirical quantiles (interpolated), deduplicated.
fn quantile_knots(z: &DVector<f64>, count: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = z.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let mut out = Vec::with_capacity(count);
    for j in 1..=count {
        let p = j as f64 / (count + 1) as f64;
        let pos = p * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        let q = sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
        if out.last().is_none_or(|&last| q > last) {
            out.push(q);
        } else {
            log::warn!("dropping duplicate quantile knot at {q}");
        }
    }
    out
}

/// Per-variable affine rescale of the level columns to [0, 1]. The test
/// statistic is invariant to this (the spanned space is unchanged); it only
/// keeps high powers away from overflow.
struct Rescale {
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl Rescale {
    fn fit(x: &DMatrix<f64>) -> Self {
        let mut lo = Vec::with_capacity(x.ncols());
        let mut width = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = DVector::from_column_slice(x.column(j).as_slice());
            let (a, b) = column_range(&col);
            lo.push(a);
            width.push(if b > a { b - a } else { 1.0 });
        }
        Self { lo, width }
    }

    fn apply(&self, x: &DMatrix<f64>, var: usize) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |r, _| (x[(r, var)] - self.lo[var]) / self.width[var])
    }

    fn knot(&self, var: usize, level: f64) -> f64 {
        (level - self.lo[var]) / self.width[var]
    }
}

/// Labeled terms of one design spec (constant first, then per-variable
/// univariate terms, then interactions among nonparametric variables).
fn design_terms(spec: &BasisSpec, rescale: &Rescale, x: &DMatrix<f64>) -> Result<Vec<Term>> {
    spec.validate()?;
    if spec.roles.len() != x.ncols() {
        return Err(Error::InvalidConfig(format!(
            "spec has {} roles but data has {} regressors",
            spec.roles.len(),
            x.ncols()
        )));
    }
    let mut terms = vec![Term::constant()];
    let mut per_var: Vec<Vec<TermPart>> = Vec::new();
    for (var, role) in spec.roles.iter().enumerate() {
        let parts = match role {
            VariableRole::Parametric | VariableRole::Dummy => {
                vec![TermPart {
                    var,
                    kind: PartKind::Power { degree: 1 },
                }]
            }
            VariableRole::Nonparametric => univariate_parts(spec, rescale, x, var)?,
        };
        for p in &parts {
            terms.push(Term(vec![*p]));
        }
        if *role == VariableRole::Nonparametric {
            per_var.push(parts);
        } else {
            per_var.push(Vec::new()); // never interacted
        }
    }
    if spec.interaction_order >= 2 {
        let nonpar: Vec<usize> = spec
            .roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == VariableRole::Nonparametric)
            .map(|(v, _)| v)
            .collect();
        let max_vars = spec.interaction_order.min(nonpar.len());
        for size in 2..=max_vars {
            for combo in combinations(&nonpar, size) {
                push_products(&combo, &per_var, &mut Vec::new(), 0, &mut terms);
            }
        }
    }
    Ok(terms)
}

fn univariate_parts(
    spec: &BasisSpec,
    rescale: &Rescale,
    x: &DMatrix<f64>,
    var: usize,
) -> Result<Vec<TermPart>> {
    let mut parts = Vec::new();
    let poly_top = match spec.family {
        BasisFamily::Power => spec.a_n - 1,
        BasisFamily::Spline => spec.spline_order.min(spec.a_n - 1),
    };
    for degree in 1..=poly_top {
        parts.push(TermPart {
            var,
            kind: PartKind::Power { degree },
        });
    }
    if spec.family == BasisFamily::Spline {
        let count = spec.a_n.saturating_sub(spec.spline_order + 1);
        let level = DVector::from_column_slice(x.column(var).as_slice());
        let (zmin, zmax) = column_range(&level);
        let level_knots = resolve_knots(&level, spec, var, count, zmin, zmax)?;
        for k in level_knots {
            parts.push(TermPart {
                var,
                kind: PartKind::Spline {
                    order: spec.spline_order,
                    // identity keyed on the level knot so specs sharing knots nest
                    knot_bits: k.to_bits(),
                },
            });
        }
        let _ = rescale; // knots are rescaled at evaluation time
    }
    Ok(parts)
}

fn combinations(vars: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    fn rec(vars: &[usize], size: usize, start: usize, buf: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if buf.len() == size {
            out.push(buf.clone());
            return;
        }
        for k in start..vars.len() {
            buf.push(vars[k]);
            rec(vars, size, k + 1, buf, out);
            buf.pop();
        }
    }
    rec(vars, size, 0, &mut buf, &mut out);
    out
}

fn push_products(
    combo: &[usize],
    per_var: &[Vec<TermPart>],
    current: &mut Vec<TermPart>,
    depth: usize,
    out: &mut Vec<Term>,
) {
    if depth == combo.len() {
        out.push(Term(current.clone()));
        return;
    }
    for part in &per_var[combo[depth]] {
        current.push(*part);
        push_products(combo, per_var, current, depth + 1, out);
        current.pop();
    }
}

/// Evaluates one labeled term on the rescaled level rows.
fn evaluate_term(term: &Term, rescale: &Rescale, x: &DMatrix<f64>) -> DVector<f64> {
    let rows = x.nrows();
    let mut col = DVector::from_element(rows, 1.0);
    for part in &term.0 {
        let u = rescale.apply(x, part.var);
        match part.kind {
            PartKind::Power { degree } => {
                for _ in 0..degree {
                    col.component_mul_assign(&u);
                }
            }
            PartKind::Spline { order, knot_bits } => {
                let k = rescale.knot(part.var, f64::from_bits(knot_bits));
                let piece = DVector::from_fn(rows, |r, _| {
                    let d = u[r] - k;
                    if d > 0.0 {
                        d.powi(order as i32)
                    } else {
                        0.0
                    }
                });
                col.component_mul_assign(&piece);
            }
        }
    }
    col
}

/// Builds the restricted design `W` (null-model terms) and the test
/// directions `Z` (alternative-only terms) on the transformed rows.
///
/// The alternative must nest the null: every null term has to appear among
/// the alternative's terms. Columns annihilated by the transformation are
/// dropped and recorded.
pub fn build_null_and_test_designs(
    tp: &TransformedPanel,
    null_spec: &BasisSpec,
    alt_spec: &BasisSpec,
) -> Result<DesignSplit> {
    build_design_grid(tp, null_spec, std::slice::from_ref(alt_spec))
}

/// Grid variant of [`build_null_and_test_designs`]: the alternatives must be
/// increasing (each one's terms a superset of the previous), and `z_entry`
/// records the first candidate each test column belongs to.
pub fn build_design_grid(
    tp: &TransformedPanel,
    null_spec: &BasisSpec,
    alt_specs: &[BasisSpec],
) -> Result<DesignSplit> {
    assert!(!alt_specs.is_empty(), "need at least one alternative spec");
    let x = &tp.x_level;
    let rescale = Rescale::fit(x);

    let null_terms = design_terms(null_spec, &rescale, x)?;
    let null_set: std::collections::HashSet<&Term> = null_terms.iter().collect();

    // ordered union of alternative-only terms, tagged with entry candidate
    let mut z_terms: Vec<Term> = Vec::new();
    let mut z_entry: Vec<usize> = Vec::new();
    let mut seen: std::collections::HashSet<Term> = std::collections::HashSet::new();
    let mut prev: Option<std::collections::HashSet<Term>> = None;
    for (c, alt) in alt_specs.iter().enumerate() {
        let terms = design_terms(alt, &rescale, x)?;
        let set: std::collections::HashSet<Term> = terms.iter().cloned().collect();
        for t in &null_terms {
            if !set.contains(t) {
                return Err(Error::NestednessViolation(t.describe(&tp.x_names)));
            }
        }
        if let Some(p) = &prev {
            for t in p.iter() {
                if !set.contains(t) {
                    return Err(Error::InvalidConfig(format!(
                        "grid candidates are not nested: {} leaves the span at step {c}",
                        t.describe(&tp.x_names)
                    )));
                }
            }
        }
        for t in terms {
            if !null_set.contains(&t) && seen.insert(t.clone()) {
                z_terms.push(t);
                z_entry.push(c);
            }
        }
        prev = Some(set);
    }

    let mut dropped = Vec::new();
    let (w, w_labels) = transform_block(tp, &null_terms, &rescale, x, &mut dropped);
    let (z, z_labels, z_entry) =
        transform_block_tagged(tp, &z_terms, &z_entry, &rescale, x, &mut dropped);
    if z.ncols() == 0 {
        return Err(Error::EmptyTestSet);
    }
    Ok(DesignSplit {
        w,
        z,
        w_labels,
        z_labels,
        z_entry,
        dropped,
        n: tp.n,
        t_prime: tp.t_prime,
        x_names: tp.x_names.clone(),
        orthonormal: false,
    })
}

fn transform_block(
    tp: &TransformedPanel,
    terms: &[Term],
    rescale: &Rescale,
    x: &DMatrix<f64>,
    dropped: &mut Vec<DroppedColumn>,
) -> (DMatrix<f64>, Vec<Term>) {
    let entries = vec![0usize; terms.len()];
    let (m, labels, _) = transform_block_tagged(tp, terms, &entries, rescale, x, dropped);
    (m, labels)
}

fn transform_block_tagged(
    tp: &TransformedPanel,
    terms: &[Term],
    entries: &[usize],
    rescale: &Rescale,
    x: &DMatrix<f64>,
    dropped: &mut Vec<DroppedColumn>,
) -> (DMatrix<f64>, Vec<Term>, Vec<usize>) {
    let rows = tp.rows();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut kept_entries = Vec::new();
    for (term, &entry) in terms.iter().zip(entries) {
        let level = evaluate_term(term, rescale, x);
        let level_scale = level.norm().max(f64::MIN_POSITIVE);
        let transformed = tp.transform_column(&level);
        if transformed.norm() <= ANNIHILATION_TOL * level_scale {
            dropped.push(DroppedColumn {
                label: term.describe(&tp.x_names),
                reason: DropReason::AnnihilatedByTransform,
            });
            continue;
        }
        cols.push(transformed);
        labels.push(term.clone());
        kept_entries.push(entry);
    }
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    (m, labels, kept_entries)
}

/// Sequential Gram–Schmidt over the columns of `W` then `Z`, in the sample
/// inner product `<a, b> = a'b / (n T')`. The restricted span and the span of
/// `[W Z]` are unchanged; the new `Z` block is exactly orthogonal to the new
/// `W`. Columns that fall below the rank tolerance are dropped and recorded.
pub fn orthonormalize(ds: &DesignSplit) -> DesignSplit {
    let rows = ds.rows();
    let scale = rows as f64;
    let mut basis: Vec<DVector<f64>> = Vec::new();

    let keep =
        |col: DVector<f64>, basis: &mut Vec<DVector<f64>>| -> Option<DVector<f64>> {
            let norm0 = (col.dot(&col) / scale).sqrt();
            if norm0 <= 0.0 {
                return None;
            }
            let mut v = col / norm0;
            // two projection passes: classical re-orthogonalization
            for _ in 0..2 {
                for q in basis.iter() {
                    let c = q.dot(&v) / scale;
                    v.axpy(-c, q, 1.0);
                }
            }
            let norm = (v.dot(&v) / scale).sqrt();
            if norm < RANK_TOL {
                return None;
            }
            v /= norm;
            basis.push(v.clone());
            Some(v)
        };

    let mut dropped = ds.dropped.clone();
    let mut w_cols = Vec::new();
    let mut w_labels = Vec::new();
    for j in 0..ds.w.ncols() {
        let col = DVector::from_column_slice(ds.w.column(j).as_slice());
        match keep(col, &mut basis) {
            Some(v) => {
                w_cols.push(v);
                w_labels.push(ds.w_labels[j].clone());
            }
            None => dropped.push(DroppedColumn {
                label: ds.w_labels[j].describe(&ds.x_names),
                reason: DropReason::Collinear,
            }),
        }
    }
    let mut z_cols = Vec::new();
    let mut z_labels = Vec::new();
    let mut z_entry = Vec::new();
    for j in 0..ds.z.ncols() {
        let col = DVector::from_column_slice(ds.z.column(j).as_slice());
        match keep(col, &mut basis) {
            Some(v) => {
                z_cols.push(v);
                z_labels.push(ds.z_labels[j].clone());
                z_entry.push(ds.z_entry[j]);
            }
            None => dropped.push(DroppedColumn {
                label: ds.z_labels[j].describe(&ds.x_names),
                reason: DropReason::Collinear,
            }),
        }
    }

    let mut w = DMatrix::zeros(rows, w_cols.len());
    for (j, c) in w_cols.iter().enumerate() {
        w.set_column(j, c);
    }
    let mut z = DMatrix::zeros(rows, z_cols.len());
    for (j, c) in z_cols.iter().enumerate() {
        z.set_column(j, c);
    }
    DesignSplit {
        w,
        z,
        w_labels,
        z_labels,
        z_entry,
        dropped,
        n: ds.n,
        t_prime: ds.t_prime,
        x_names: ds.x_names.clone(),
        orthonormal: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{assemble_panel, within_transform, PanelRow};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec_power(a_n: usize, roles: Vec<VariableRole>) -> BasisSpec {
        BasisSpec::power(a_n, roles, 2)
    }

    #[test]
    fn power_expansion_by_definition() {
        let z = DVector::from_vec(vec![2.0, -1.0]);
        let spec = BasisSpec::power(3, vec![VariableRole::Nonparametric], 1);
        let m = build_univariate(&z, &spec, 0).unwrap();
        assert_eq!(m.ncols(), 3);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn truncated_power_spline_row() {
        // cubic spline, one knot t = 1: a_n = 5 columns (1, z, z^2, z^3, (z-1)_+^3)
        let z = DVector::from_vec(vec![2.0, 0.5, 1.0]);
        let spec = BasisSpec {
            family: BasisFamily::Spline,
            a_n: 5,
            spline_order: 3,
            interaction_order: 1,
            roles: vec![VariableRole::Nonparametric],
            knots: Some(vec![vec![1.0]]),
        };
        let m = build_univariate(&z, &spec, 0).unwrap();
        assert_eq!(m.ncols(), 5);
        assert_eq!(
            m.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 2.0, 4.0, 8.0, 1.0]
        );
        // below the knot the truncated term vanishes
        assert_eq!(m[(1, 4)], 0.0);
        // at the knot it vanishes too ((z - t)_+ uses strict positivity)
        assert_eq!(m[(2, 4)], 0.0);
    }

    #[test]
    fn degree_too_small_and_knot_out_of_range() {
        let z = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let bad = BasisSpec::power(1, vec![VariableRole::Nonparametric], 1);
        assert!(matches!(build_univariate(&z, &bad, 0), Err(Error::DegreeTooSmall(1))));

        let spec = BasisSpec {
            family: BasisFamily::Spline,
            a_n: 5,
            spline_order: 3,
            interaction_order: 1,
            roles: vec![VariableRole::Nonparametric],
            knots: Some(vec![vec![5.0]]),
        };
        assert!(matches!(
            build_univariate(&z, &spec, 0),
            Err(Error::KnotOutOfRange { .. })
        ));
    }

    #[test]
    fn column_counts_match_family() {
        let z = DVector::from_fn(40, |r, _| (r as f64) / 7.0);
        for a_n in 2..7 {
            let spec = BasisSpec::power(a_n, vec![VariableRole::Nonparametric], 1);
            assert_eq!(build_univariate(&z, &spec, 0).unwrap().ncols(), a_n);
        }
        for knots in 0..3 {
            let spec = BasisSpec::spline(4 + knots, 3, vec![VariableRole::Nonparametric], 1);
            assert_eq!(build_univariate(&z, &spec, 0).unwrap().ncols(), 4 + knots);
        }
    }

    #[test]
    fn splines_coincide_with_powers_until_knots_enter() {
        let z = DVector::from_fn(25, |r, _| (r as f64) / 9.0 - 1.0);
        for a_n in 2..=4 {
            let sp = BasisSpec::spline(a_n, 3, vec![VariableRole::Nonparametric], 1);
            let pw = BasisSpec::power(a_n, vec![VariableRole::Nonparametric], 1);
            let a = build_univariate(&z, &sp, 0).unwrap();
            let b = build_univariate(&z, &pw, 0).unwrap();
            assert_eq!(a, b, "a_n = {a_n}");
        }
    }

    fn random_panel(n: usize, t: usize, d_x: usize, seed: u64) -> crate::panel::PanelDataset {
        let mut rng = crate::rng::stream_rng(seed, crate::rng::Domain::Reference, 2);
        let mut rows = Vec::new();
        for i in 0..n {
            for s in 0..t {
                rows.push(PanelRow {
                    id: format!("i{i:03}"),
                    time: format!("{s}"),
                    y: rng.gen_range(-1.0..1.0),
                    x: (0..d_x).map(|_| rng.gen_range(0.0..4.0)).collect(),
                });
            }
        }
        let names = (0..d_x).map(|j| format!("x{}", j + 1)).collect();
        assemble_panel(rows, names).unwrap()
    }

    #[test]
    fn design_split_drops_constant_and_counts_terms() {
        // null: linear in x1 plus a_n = 4 power terms in x2;
        // alt: a_n = 4 in both plus pairwise interactions
        let p = random_panel(30, 3, 2, 5);
        let tp = within_transform(&p);
        let null = BasisSpec::power(4, vec![VariableRole::Parametric, VariableRole::Nonparametric], 1);
        let alt = spec_power(4, vec![VariableRole::Nonparametric, VariableRole::Nonparametric]);
        let ds = build_null_and_test_designs(&tp, &null, &alt).unwrap();
        // W: x1, x2, x2^2, x2^3 (constant annihilated)
        assert_eq!(ds.m_n(), 4);
        assert!(ds
            .dropped
            .iter()
            .any(|d| d.label == "1" && d.reason == DropReason::AnnihilatedByTransform));
        // Z: x1^2, x1^3 and the 9 products x1^i * x2^j, 1 <= i, j <= 3
        assert_eq!(ds.r_n(), 11);
        let z_desc: Vec<String> = ds.z_labels.iter().map(|t| t.describe(&ds.x_names)).collect();
        assert!(z_desc.contains(&"x1^2".to_string()));
        assert!(z_desc.contains(&"x1^3".to_string()));
        assert!(z_desc.contains(&"x1*x2".to_string()));
        assert!(z_desc.contains(&"x1^3*x2^3".to_string()));
    }

    #[test]
    fn identical_specs_leave_no_test_directions() {
        let p = random_panel(20, 2, 2, 7);
        let tp = within_transform(&p);
        let spec = spec_power(4, vec![VariableRole::Nonparametric, VariableRole::Nonparametric]);
        assert!(matches!(
            build_null_and_test_designs(&tp, &spec, &spec),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn nestedness_violation_detected() {
        let p = random_panel(20, 2, 2, 6);
        let tp = within_transform(&p);
        // null has higher degree than the alternative in x2
        let null = BasisSpec::power(5, vec![VariableRole::Parametric, VariableRole::Nonparametric], 1);
        let alt = spec_power(4, vec![VariableRole::Nonparametric, VariableRole::Nonparametric]);
        assert!(matches!(
            build_null_and_test_designs(&tp, &null, &alt),
            Err(Error::NestednessViolation(_))
        ));
    }

    #[test]
    fn empirical_restriction_counts() {
        // wage-equation shape: wks and exp plus six time-varying dummies
        let mut rng = crate::rng::stream_rng(9, crate::rng::Domain::Reference, 3);
        let (n, t) = (60, 7);
        let mut rows = Vec::new();
        for i in 0..n {
            for s in 0..t {
                let wks: f64 = rng.gen_range(30.0..52.0);
                let exp = (s + 1) as f64 + rng.gen_range(0.0..20.0);
                let mut x = vec![wks, exp];
                for _ in 0..6 {
                    x.push(if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
                }
                rows.push(PanelRow {
                    id: format!("h{i}"),
                    time: format!("{}", 1976 + s),
                    y: rng.gen_range(5.0..8.0),
                    x,
                });
            }
        }
        let mut names = vec!["wks".to_string(), "exp".to_string()];
        for d in 1..=6 {
            names.push(format!("d{d}"));
        }
        let p = assemble_panel(rows, names).unwrap();
        let tp = within_transform(&p);

        let dummies = vec![VariableRole::Dummy; 6];
        let mut quad_roles = vec![VariableRole::Parametric, VariableRole::Nonparametric];
        quad_roles.extend(dummies.clone());
        let mut alt_roles = vec![VariableRole::Nonparametric, VariableRole::Nonparametric];
        alt_roles.extend(dummies.clone());
        let mut lin_roles = vec![VariableRole::Parametric, VariableRole::Parametric];
        lin_roles.extend(dummies.clone());
        let mut sp_roles = vec![VariableRole::Parametric, VariableRole::Nonparametric];
        sp_roles.extend(dummies);

        let alt = spec_power(4, alt_roles);

        // quadratic null: wks linear, exp quadratic, dummies -> r_n = 12
        let quad = BasisSpec::power(3, quad_roles, 1);
        let ds = build_null_and_test_designs(&tp, &quad, &alt).unwrap();
        assert_eq!(ds.r_n(), 12);
        assert_eq!(ds.m_n(), 9); // wks, exp, exp^2, six dummies

        // linear null: drop exp^2 -> r_n = 13
        let lin = BasisSpec::power(2, lin_roles, 1);
        let ds = build_null_and_test_designs(&tp, &lin, &alt).unwrap();
        assert_eq!(ds.r_n(), 13);

        // semiparametric null: exp cubic -> r_n = 11
        let sp = BasisSpec::power(4, sp_roles, 1);
        let ds = build_null_and_test_designs(&tp, &sp, &alt).unwrap();
        assert_eq!(ds.r_n(), 11);
    }

    #[test]
    fn orthonormalize_is_a_fixed_point_up_to_sign_and_drops_copies() {
        let p = random_panel(50, 3, 2, 8);
        let tp = within_transform(&p);
        let null = BasisSpec::power(3, vec![VariableRole::Nonparametric, VariableRole::Parametric], 1);
        let alt = spec_power(4, vec![VariableRole::Nonparametric, VariableRole::Nonparametric]);
        let ds = build_null_and_test_designs(&tp, &null, &alt).unwrap();
        let on = orthonormalize(&ds);
        let on2 = orthonormalize(&on);
        assert_eq!(on.m_n(), on2.m_n());
        assert_eq!(on.r_n(), on2.r_n());
        for j in 0..on.k_n() {
            let (a, b) = if j < on.m_n() {
                (on.w.column(j), on2.w.column(j))
            } else {
                (on.z.column(j - on.m_n()), on2.z.column(j - on.m_n()))
            };
            let dot = a.dot(&b) / on.rows() as f64;
            assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-10);
        }

        // Z containing an exact copy of a W column gets dropped
        let mut dup = ds.clone();
        let wcol = DVector::from_column_slice(dup.w.column(0).as_slice());
        let r_before = dup.r_n();
        dup.z = {
            let mut z = DMatrix::zeros(dup.rows(), r_before + 1);
            z.set_column(0, &wcol);
            for j in 0..r_before {
                z.set_column(j + 1, &dup.z.column(j).clone_owned());
            }
            z
        };
        dup.z_labels.insert(0, dup.w_labels[0].clone());
        dup.z_entry.insert(0, 0);
        let on_dup = orthonormalize(&dup);
        assert_eq!(on_dup.r_n(), r_before);
        assert!(on_dup
            .dropped
            .iter()
            .any(|d| d.reason == DropReason::Collinear));
    }

    #[test]
    fn gram_matrix_is_identity_after_orthonormalization() {
        // random 50x6 design: condition of the output Gram matrix within 1e-6 of 1
        let p = random_panel(25, 2, 2, 10);
        let tp = within_transform(&p);
        let null = BasisSpec::power(2, vec![VariableRole::Parametric, VariableRole::Parametric], 1);
        let alt = spec_power(3, vec![VariableRole::Nonparametric, VariableRole::Nonparametric]);
        let ds = build_null_and_test_designs(&tp, &null, &alt).unwrap();
        let on = orthonormalize(&ds);
        let k = on.k_n();
        let mut all = DMatrix::zeros(on.rows(), k);
        for j in 0..on.m_n() {
            all.set_column(j, &on.w.column(j).clone_owned());
        }
        for j in 0..on.r_n() {
            all.set_column(on.m_n() + j, &on.z.column(j).clone_owned());
        }
        let gram = all.transpose() * &all / on.rows() as f64;
        let eig = gram.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        assert!(hi / lo >= 1.0 - 1e-6 && hi / lo <= 1.0 + 1e-6, "cond = {}", hi / lo);
    }

    #[test]
    fn grid_entries_are_ordered_and_nested() {
        let p = random_panel(40, 3, 1, 12);
        let tp = within_transform(&p);
        let null = BasisSpec::power(2, vec![VariableRole::Nonparametric], 1);
        let alts: Vec<BasisSpec> = (4..=6)
            .map(|a| BasisSpec::power(a, vec![VariableRole::Nonparametric], 1))
            .collect();
        let ds = build_design_grid(&tp, &null, &alts).unwrap();
        // a_n=4 contributes x^2, x^3; a_n=5 adds x^4; a_n=6 adds x^5
        assert_eq!(ds.r_n(), 4);
        assert_eq!(ds.z_entry, vec![0, 0, 1, 2]);
    }
}
