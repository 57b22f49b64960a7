//! Data-driven choice of the number of test directions.
//!
//! Candidates share the restricted design and differ only in how many test
//! directions they include, so after sequential orthonormalization each
//! candidate's statistic is a leading-block quadratic form of the largest
//! candidate's. The selector maximizes the penalized criterion
//! `xi(r) - r - gamma_n * sqrt(2 (r - r_min))` with
//! `gamma_n = c * sqrt(2 ln(cardinality))`; ties go to the smallest `r`.

use crate::basis::DesignSplit;
use crate::error::{Error, Result};
use crate::projection::{cross_moment, RestrictedFit};
use crate::statistic::{omega, quadratic_form, test_result_from_parts, OmegaEstimate, OmegaKind, TestResult};
use serde::{Deserialize, Serialize};

/// Default penalty constant.
pub const DEFAULT_PENALTY_C: f64 = 5.0;

/// One nested candidate: the first `r_n` (surviving) test directions,
/// labeled by the `a_n` that generated them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridCandidate {
    pub a_n: usize,
    pub r_n: usize,
}

/// The nested candidate set over a shared restricted design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionGrid {
    pub candidates: Vec<GridCandidate>,
    /// Penalty constant `c`.
    pub c: f64,
}

impl SelectionGrid {
    /// Reads candidate boundaries off an orthonormalized grid design: the
    /// candidate for `a_ns[j]` owns every surviving `Z` column whose entry
    /// index is at most `j`.
    pub fn from_design(ds: &DesignSplit, a_ns: &[usize], c: f64) -> Result<Self> {
        if a_ns.len() < 2 {
            return Err(Error::InvalidConfig(
                "selection grid needs at least two candidates".into(),
            ));
        }
        if !ds.orthonormal {
            return Err(Error::InvalidConfig(
                "selection grid requires an orthonormalized design".into(),
            ));
        }
        let mut candidates = Vec::with_capacity(a_ns.len());
        for (j, &a_n) in a_ns.iter().enumerate() {
            let r_n = ds.z_entry.iter().filter(|&&e| e <= j).count();
            if r_n == 0 {
                return Err(Error::InvalidConfig(format!(
                    "candidate a_n = {a_n} has no surviving test directions"
                )));
            }
            candidates.push(GridCandidate { a_n, r_n });
        }
        Ok(Self { candidates, c })
    }

    pub fn cardinality(&self) -> usize {
        self.candidates.len()
    }

    pub fn r_min(&self) -> usize {
        self.candidates.iter().map(|c| c.r_n).min().unwrap_or(0)
    }

    /// `gamma_n = c * sqrt(2 ln(cardinality))`.
    pub fn gamma_n(&self) -> f64 {
        self.c * (2.0 * (self.cardinality() as f64).ln()).sqrt()
    }
}

/// Per-candidate diagnostics of one selection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionRow {
    pub a_n: usize,
    pub r_n: usize,
    pub xi: f64,
    pub criterion: f64,
    pub chosen: bool,
}

/// Full record of a data-driven selection: the criterion table and the
/// (nominal, post-selection) test at the chosen candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rows: Vec<CriterionRow>,
    pub gamma_n: f64,
    pub c: f64,
    pub chosen_a_n: usize,
    pub chosen_r_n: usize,
    /// The reported p-values are nominal: no post-selection adjustment.
    pub post_selection_note: String,
}

/// Evaluates the penalized criterion for every candidate and returns the
/// maximizer's (un-repenalized) test. The fit must come from the same
/// orthonormalized grid design the grid was read from.
pub fn select_rn(
    fit: &RestrictedFit,
    grid: &SelectionGrid,
    kind: OmegaKind,
) -> Result<(SelectionReport, TestResult)> {
    assert_eq!(
        fit.r_n(),
        grid.candidates.last().map(|c| c.r_n).unwrap_or(0),
        "fit and grid disagree on the largest candidate"
    );
    let degenerate = fit.is_degenerate();
    let v = cross_moment(fit);
    let om_full: Option<OmegaEstimate> = if degenerate {
        None
    } else {
        // the full matrix is the largest candidate's
        Some(omega(fit, kind).map_err(|e| match e {
            Error::SingularOmega { ratio } => Error::SingularOmegaAt {
                a_n: grid.candidates.last().map(|c| c.a_n).unwrap_or(0),
                ratio,
            },
            other => other,
        })?)
    };

    let r_min = grid.r_min();
    let gamma = grid.gamma_n();
    let mut rows: Vec<CriterionRow> = Vec::with_capacity(grid.cardinality());
    let mut best: Option<usize> = None;
    for (idx, cand) in grid.candidates.iter().enumerate() {
        let xi = if degenerate {
            0.0
        } else {
            let om = om_full.as_ref().expect("omega present");
            let sub = om.matrix.view((0, 0), (cand.r_n, cand.r_n)).clone_owned();
            let sub_om = OmegaEstimate {
                matrix: sub,
                kind,
                condition_number: om.condition_number,
            };
            let v_sub = v.rows(0, cand.r_n).clone_owned();
            quadratic_form(&v_sub, &sub_om).map_err(|_| Error::SingularOmegaAt {
                a_n: cand.a_n,
                ratio: 0.0,
            })?
        };
        let penalty = gamma * (2.0 * (cand.r_n as f64 - r_min as f64)).sqrt();
        let criterion = xi - cand.r_n as f64 - penalty;
        let better = match best {
            None => true,
            Some(b) => criterion > rows[b].criterion,
        };
        rows.push(CriterionRow {
            a_n: cand.a_n,
            r_n: cand.r_n,
            xi,
            criterion,
            chosen: false,
        });
        if better {
            best = Some(idx);
        }
    }
    let best = best.expect("at least one candidate");
    rows[best].chosen = true;
    let chosen = grid.candidates[best];
    let result = test_result_from_parts(rows[best].xi, kind, fit.m_n(), chosen.r_n)?;
    let report = SelectionReport {
        rows,
        gamma_n: gamma,
        c: grid.c,
        chosen_a_n: chosen.a_n,
        chosen_r_n: chosen.r_n,
        post_selection_note: "post-selection: nominal".to_string(),
    };
    Ok((report, result))
}
