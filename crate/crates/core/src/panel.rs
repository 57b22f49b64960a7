//! Balanced-panel data model and the fixed-effect-eliminating transformations.
//!
//! A panel is stored individual-major: all `T` periods of individual `i` are
//! contiguous and time-sorted. The within transformation demeans every scalar
//! series over the individual's periods; first differencing replaces period
//! `t` by the change from `t-1`. Both annihilate anything constant within an
//! individual, in particular the fixed effect.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

/// Which transformation was applied to eliminate fixed effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Within,
    FirstDifference,
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transform::Within => write!(f, "within"),
            Transform::FirstDifference => write!(f, "first_difference"),
        }
    }
}

/// A balanced panel in level units, individual-major and time-sorted.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    /// Number of individuals.
    pub n: usize,
    /// Periods per individual.
    pub t: usize,
    /// Individual labels, one per individual, in storage order.
    pub ids: Vec<String>,
    /// Period labels, one per period, in storage order.
    pub times: Vec<String>,
    /// Outcome, length `n * t`.
    pub y: DVector<f64>,
    /// Regressors, `n * t` rows by `d_x` columns.
    pub x: DMatrix<f64>,
    /// Regressor names, length `d_x`.
    pub x_names: Vec<String>,
}

impl PanelDataset {
    /// Builds a panel from individual-major, time-sorted arrays, checking the
    /// balance and shape invariants.
    pub fn new(
        n: usize,
        t: usize,
        ids: Vec<String>,
        times: Vec<String>,
        y: DVector<f64>,
        x: DMatrix<f64>,
        x_names: Vec<String>,
    ) -> Result<Self> {
        if n < 2 || t < 2 {
            return Err(Error::InvalidPanel(format!(
                "need n >= 2 and T >= 2, got n = {n}, T = {t}"
            )));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidPanel("need at least one regressor".into()));
        }
        if y.len() != n * t || x.nrows() != n * t || ids.len() != n || times.len() != t {
            return Err(Error::InvalidPanel(format!(
                "shape mismatch: n*T = {}, y = {}, X rows = {}, ids = {}, times = {}",
                n * t,
                y.len(),
                x.nrows(),
                ids.len(),
                times.len()
            )));
        }
        for (row, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    column: "y".into(),
                    id: ids[row / t].clone(),
                    time: times[row % t].clone(),
                });
            }
        }
        for col in 0..x.ncols() {
            for row in 0..x.nrows() {
                if !x[(row, col)].is_finite() {
                    return Err(Error::MissingValue {
                        column: x_names[col].clone(),
                        id: ids[row / t].clone(),
                        time: times[row % t].clone(),
                    });
                }
            }
        }
        Ok(Self {
            n,
            t,
            ids,
            times,
            y,
            x,
            x_names,
        })
    }

    pub fn d_x(&self) -> usize {
        self.x.ncols()
    }

    pub fn rows(&self) -> usize {
        self.n * self.t
    }
}

/// A transformed panel. Basis columns are evaluated on the level regressors
/// carried in `x_level` and then pushed through [`TransformedPanel::transform_column`],
/// so the transformation applies to y and to every generated series term alike.
#[derive(Debug, Clone)]
pub struct TransformedPanel {
    pub transform: Transform,
    pub n: usize,
    /// Periods per individual before transformation.
    pub t: usize,
    /// Periods per individual after transformation (`t` for within, `t - 1` for differences).
    pub t_prime: usize,
    /// Transformed outcome, length `n * t_prime`.
    pub yhat: DVector<f64>,
    /// Transformed regressors (for reference; designs are built from `x_level`).
    pub xhat: DMatrix<f64>,
    /// Level regressors at source rows, `n * t` by `d_x`.
    pub x_level: DMatrix<f64>,
    pub x_names: Vec<String>,
}

impl TransformedPanel {
    pub fn rows(&self) -> usize {
        self.n * self.t_prime
    }

    /// Applies the transformation to a column evaluated on the level rows
    /// (length `n * t`), producing a column of length `n * t_prime`.
    pub fn transform_column(&self, level: &DVector<f64>) -> DVector<f64> {
        assert_eq!(level.len(), self.n * self.t, "level column length mismatch");
        transform_column(self.transform, self.n, self.t, level)
    }
}

fn transform_column(tr: Transform, n: usize, t: usize, level: &DVector<f64>) -> DVector<f64> {
    match tr {
        Transform::Within => {
            let mut out = DVector::zeros(n * t);
            for i in 0..n {
                let block = level.rows(i * t, t);
                let mean = block.sum() / t as f64;
                for s in 0..t {
                    out[i * t + s] = block[s] - mean;
                }
            }
            out
        }
        Transform::FirstDifference => {
            let tp = t - 1;
            let mut out = DVector::zeros(n * tp);
            for i in 0..n {
                for s in 1..t {
                    out[i * tp + s - 1] = level[i * t + s] - level[i * t + s - 1];
                }
            }
            out
        }
    }
}

fn apply_transform(p: &PanelDataset, tr: Transform) -> TransformedPanel {
    let t_prime = match tr {
        Transform::Within => p.t,
        Transform::FirstDifference => p.t - 1,
    };
    let yhat = transform_column(tr, p.n, p.t, &p.y);
    let mut xhat = DMatrix::zeros(p.n * t_prime, p.d_x());
    for j in 0..p.d_x() {
        let col = DVector::from_column_slice(p.x.column(j).as_slice());
        xhat.set_column(j, &transform_column(tr, p.n, p.t, &col));
    }
    TransformedPanel {
        transform: tr,
        n: p.n,
        t: p.t,
        t_prime,
        yhat,
        xhat,
        x_level: p.x.clone(),
        x_names: p.x_names.clone(),
    }
}

/// Demeans every series over each individual's periods.
pub fn within_transform(p: &PanelDataset) -> TransformedPanel {
    apply_transform(p, Transform::Within)
}

/// Replaces period `t` by the change from `t-1`; drops one period per individual.
pub fn first_difference(p: &PanelDataset) -> TransformedPanel {
    apply_transform(p, Transform::FirstDifference)
}

/// One long-format record prior to assembly.
#[derive(Debug, Clone)]
pub struct PanelRow {
    pub id: String,
    pub time: String,
    pub y: f64,
    pub x: Vec<f64>,
}

/// Assembles long-format rows into a balanced, individual-major, time-sorted
/// panel. Rows may arrive in any order. Time labels sort numerically when all
/// parse as numbers, lexicographically (with a warning) otherwise.
pub fn assemble_panel(mut rows: Vec<PanelRow>, x_names: Vec<String>) -> Result<PanelDataset> {
    if rows.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }

    let mut time_labels: Vec<String> = rows.iter().map(|r| r.time.clone()).collect();
    time_labels.sort();
    time_labels.dedup();
    let numeric: Option<Vec<f64>> = time_labels.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(vals) => {
            let mut order: Vec<usize> = (0..time_labels.len()).collect();
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
            time_labels = order.iter().map(|&k| time_labels[k].clone()).collect();
        }
        None => {
            log::warn!("non-numeric time labels; sorting periods lexicographically");
        }
    }
    let t = time_labels.len();
    let time_index: HashMap<&str, usize> = time_labels
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();

    // first-appearance order of ids, then stable sort for determinism
    let mut ids: Vec<String> = Vec::new();
    {
        let mut seen = HashMap::new();
        for r in &rows {
            if seen.insert(r.id.clone(), ()).is_none() {
                ids.push(r.id.clone());
            }
        }
    }
    ids.sort();
    let n = ids.len();
    if n < 2 {
        return Err(Error::InvalidPanel(format!("need n >= 2 individuals, got {n}")));
    }
    if t < 2 {
        return Err(Error::InvalidPanel(format!("need T >= 2 periods, got {t}")));
    }
    let id_index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();

    let mut counts = vec![0usize; n];
    for r in &rows {
        counts[id_index[r.id.as_str()]] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        if c != t {
            return Err(Error::UnbalancedPanel {
                id: ids[i].clone(),
                got: c,
                expected: t,
            });
        }
    }

    let d_x = rows[0].x.len();
    let mut y = DVector::zeros(n * t);
    let mut x = DMatrix::zeros(n * t, d_x);
    let mut filled = vec![false; n * t];
    rows.drain(..).try_for_each(|r| -> Result<()> {
        let i = id_index[r.id.as_str()];
        let s = time_index[r.time.as_str()];
        let row = i * t + s;
        if filled[row] {
            return Err(Error::DuplicateCell { id: r.id, time: r.time });
        }
        filled[row] = true;
        y[row] = r.y;
        for (j, v) in r.x.iter().enumerate() {
            x[(row, j)] = *v;
        }
        Ok(())
    })?;
    // balance + duplicate checks above imply every cell is filled

    PanelDataset::new(n, t, ids, time_labels, y, x, x_names)
}

/// Loads a long-format CSV (header row, '.' decimal separator) into a panel.
/// Columns are selected by name.
pub fn load_panel_csv<R: Read>(
    reader: R,
    id_col: &str,
    time_col: &str,
    y_col: &str,
    x_cols: &[String],
) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    };
    let id_idx = find(id_col)?;
    let time_idx = find(time_col)?;
    let y_idx = find(y_col)?;
    let x_idx: Vec<usize> = x_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(id_idx).unwrap_or("").to_string();
        let time = record.get(time_idx).unwrap_or("").to_string();
        let parse = |idx: usize, col: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| Error::MissingValue {
                column: col.to_string(),
                id: id.clone(),
                time: time.clone(),
            })
        };
        let y = parse(y_idx, y_col)?;
        let x = x_idx
            .iter()
            .zip(x_cols)
            .map(|(&idx, col)| parse(idx, col))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(PanelRow { id, time, y, x });
    }
    assemble_panel(rows, x_cols.to_vec())
}

/// Convenience wrapper over [`load_panel_csv`] for a file path.
pub fn load_panel_file(
    path: &Path,
    id_col: &str,
    time_col: &str,
    y_col: &str,
    x_cols: &[String],
) -> Result<PanelDataset> {
    let file = std::fs::File::open(path)?;
    load_panel_csv(file, id_col, time_col, y_col, x_cols)
}
