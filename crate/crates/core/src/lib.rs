//! Series-based LM specification testing for fixed-effects panel data models.
//!
//! The pipeline: load a balanced panel, eliminate fixed effects by the within
//! transformation or first differencing, build the restricted design `W` and
//! the test directions `Z` from power-series or spline terms, orthonormalize,
//! fit the restricted model, and form the quadratic-form statistic
//! `xi = v' Omega^{-1} v` from the moment vector `v = sum_i Ztilde_i' e_i`.
//! With the degrees-of-freedom correction, `(xi - r_n) / sqrt(2 r_n)` is
//! asymptotically standard normal and `xi` itself is compared to a
//! chi-square with `r_n` degrees of freedom. Critical values can also come
//! from a wild bootstrap that multiplies each individual's residual block by
//! a two-point multiplier. A penalized rule picks the number of test
//! directions adaptively, and a Monte Carlo harness reproduces the size and
//! power experiments.

pub mod basis;
pub mod bootstrap;
pub mod error;
pub mod mc;
pub mod panel;
pub mod projection;
pub mod rng;
pub mod selection;
pub mod statistic;

pub use basis::{
    build_design_grid, build_null_and_test_designs, build_univariate, orthonormalize, BasisFamily,
    BasisSpec, DesignSplit, DropReason, DroppedColumn, Term, VariableRole,
};
pub use bootstrap::{
    bootstrap_pvalue, bootstrap_statistic, draw_multipliers, run_bootstrap, BootstrapDistribution,
    MultiplierLaw,
};
pub use error::{Error, Result};
pub use mc::{
    generate_panel, run_mc, DgpConfig, Dgp, ErrorLaw, McCell, McResult, McTestSpec, Variant,
};
pub use panel::{
    first_difference, load_panel_csv, load_panel_file, within_transform, PanelDataset, PanelRow,
    Transform, TransformedPanel,
};
pub use projection::{cross_moment, fit_restricted, RestrictedFit};
pub use selection::{select_rn, CriterionRow, GridCandidate, SelectionGrid, SelectionReport};
pub use statistic::{
    chi2_quantile, normal_quantile, omega, run_test, xi_statistic, OmegaEstimate, OmegaKind,
    TestResult,
};
