//! Closed-form density models whose Fisher quantities are known exactly:
//! a univariate Gaussian and log-linear models on finite grids.

mod check;
mod gaussian;
mod grid;

pub use check::{
    gaussian_info_check, grid_convergence_check, grid_oracle_errors, oracle_suite, standard_grid_ebm, OracleCheck,
    OracleErrors,
};
pub use gaussian::GaussianModel;
pub use grid::{grid_2d, monomials, poly_features, GridEbm};
