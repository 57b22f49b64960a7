//! Restricted least squares on the transformed data and the residual algebra
//! the test is built on.
//!
//! The fit never forms `(W'W)^{-1}`: coefficients come from a column-pivoted
//! QR factorization, and the residual maker is applied through the thin `Q`
//! basis of the restricted span (`M_W v = v - Q Q' v`). Residuals are kept
//! blockwise by individual because the covariance pooling, the robust
//! weighting, and the wild bootstrap all operate on per-individual vectors.

use crate::basis::DesignSplit;
use crate::error::{Error, Result};
use crate::panel::TransformedPanel;
use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

/// Hard relative threshold on the pivoted-QR diagonal; below it the
/// restricted design is declared rank deficient.
const PIVOT_TOL: f64 = 1e-10;

/// Relative eigenvalue threshold for the recorded numerical rank of the
/// pooled residual covariance.
const SIGMA_RANK_TOL: f64 = 1e-12;

/// Relative residual norm below which the fit is exact and every downstream
/// statistic is zero.
pub const DEGENERATE_FIT_TOL: f64 = 1e-10;

/// Output of the restricted regression of the transformed outcome on `W`.
#[derive(Debug, Clone)]
pub struct RestrictedFit {
    pub n: usize,
    pub t_prime: usize,
    /// Restricted coefficients, length `m_n`.
    pub beta1: DVector<f64>,
    /// Fitted values `W beta1`.
    pub fitted: DVector<f64>,
    /// Restricted residuals, length `n * t_prime`, individual-major.
    pub residuals: DVector<f64>,
    /// Test directions with the restricted span projected out, `n t' x r_n`.
    pub ztilde: DMatrix<f64>,
    /// Pooled residual covariance `(1/n) sum_i e_i e_i'`, `t' x t'`.
    pub sigma_t: DMatrix<f64>,
    /// Numerical rank of `sigma_t`.
    pub sigma_t_rank: usize,
    /// Orthonormal basis of the restricted span (thin `Q`), for the residual maker.
    pub q_basis: DMatrix<f64>,
    /// `||residuals|| / ||yhat||`; at or below [`DEGENERATE_FIT_TOL`] the fit is exact.
    pub residual_rel_norm: f64,
}

impl RestrictedFit {
    pub fn m_n(&self) -> usize {
        self.beta1.len()
    }

    pub fn r_n(&self) -> usize {
        self.ztilde.ncols()
    }

    pub fn k_n(&self) -> usize {
        self.m_n() + self.r_n()
    }

    /// Residual vector of individual `i` (length `t_prime`).
    pub fn residual_block(&self, i: usize) -> DVectorView<'_, f64> {
        self.residuals.rows(i * self.t_prime, self.t_prime)
    }

    /// Projected test-direction block of individual `i` (`t_prime x r_n`).
    pub fn ztilde_block(&self, i: usize) -> DMatrixView<'_, f64> {
        self.ztilde.rows(i * self.t_prime, self.t_prime)
    }

    pub fn is_degenerate(&self) -> bool {
        self.residual_rel_norm <= DEGENERATE_FIT_TOL
    }

    /// Applies the residual maker of the restricted span: `v - Q (Q' v)`.
    pub fn annihilate(&self, v: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.q_basis.transpose() * v;
        v - &self.q_basis * coeffs
    }

    /// Pooled residual covariance recomputed from arbitrary residuals with the
    /// fit's block structure (used by the bootstrap).
    pub fn pooled_covariance(&self, residuals: &DVector<f64>) -> DMatrix<f64> {
        pooled_covariance(residuals, self.n, self.t_prime)
    }
}

fn pooled_covariance(residuals: &DVector<f64>, n: usize, t_prime: usize) -> DMatrix<f64> {
    let mut sigma = DMatrix::zeros(t_prime, t_prime);
    for i in 0..n {
        let e = residuals.rows(i * t_prime, t_prime);
        sigma.syger(1.0, &e, &e, 1.0);
    }
    sigma /= n as f64;
    // syger fills one triangle; mirror it
    for a in 0..t_prime {
        for b in 0..a {
            let v = sigma[(a, b)];
            sigma[(b, a)] = v;
        }
    }
    sigma
}

/// Least-squares solve through column-pivoted QR. Returns the coefficient
/// vector/matrix and the thin `Q`.
fn lsq_col_piv(
    w: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let rows = w.nrows();
    let cols = w.ncols();
    if rows <= cols {
        return Err(Error::InsufficientRows { rows, cols });
    }
    let qr = w.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let head = r[(0, 0)].abs().max(f64::MIN_POSITIVE);
    for j in 0..cols {
        if r[(j, j)].abs() < PIVOT_TOL * head {
            return Err(Error::RankDeficientW { pivot: j, cols });
        }
    }
    let rhs_proj = q.transpose() * rhs;
    let mut coef = r
        .solve_upper_triangular(&rhs_proj)
        .ok_or(Error::RankDeficientW { pivot: cols, cols })?;
    qr.p().inv_permute_rows(&mut coef);
    Ok((coef, q))
}

/// Fits the restricted model on the transformed data and assembles the
/// residual algebra: residuals, annihilated test directions, and the pooled
/// residual covariance.
pub fn fit_restricted(tp: &TransformedPanel, ds: &DesignSplit) -> Result<RestrictedFit> {
    assert_eq!(ds.rows(), tp.rows(), "design and panel row blocks must agree");
    let (coef, q) = lsq_col_piv(&ds.w, &DMatrix::from_column_slice(tp.yhat.len(), 1, tp.yhat.as_slice()))?;
    let beta1 = coef.column(0).clone_owned();
    let fitted = &ds.w * &beta1;
    let residuals = &tp.yhat - &fitted;

    // Z - Q (Q' Z): the same projection the coefficient solve uses
    let zq = q.transpose() * &ds.z;
    let ztilde = &ds.z - &q * zq;

    let sigma_t = pooled_covariance(&residuals, tp.n, tp.t_prime);
    let eig = sigma_t.clone().symmetric_eigenvalues();
    let top = eig.max().max(f64::MIN_POSITIVE);
    let sigma_t_rank = eig.iter().filter(|&&l| l > SIGMA_RANK_TOL * top).count();
    debug_assert!(sigma_t_rank <= tp.t_prime);

    let y_norm = tp.yhat.norm().max(f64::MIN_POSITIVE);
    let residual_rel_norm = residuals.norm() / y_norm;

    Ok(RestrictedFit {
        n: tp.n,
        t_prime: tp.t_prime,
        beta1,
        fitted,
        residuals,
        ztilde,
        sigma_t,
        sigma_t_rank,
        q_basis: q,
        residual_rel_norm,
    })
}

/// The moment vector the test is built on: `sum_i Ztilde_i' e_i`.
pub fn cross_moment(fit: &RestrictedFit) -> DVector<f64> {
    fit.ztilde.transpose() * &fit.residuals
}
