//! Sparse GLM estimation: lasso paths, cross-validated penalty selection
//! and post-lasso refits.

mod cv;
mod family;
mod lasso;
mod refit;

pub use cv::{cross_validate, cv_select_lambda, lambda_grid, log_grid, CvFit, DEFAULT_FOLDS};
pub use family::{logistic, Family};
pub use lasso::{fit_lasso_path, lambda_max, soft_threshold, LassoPath, StandardizedDesign};
pub use refit::{
    fit_cv_lasso, fit_cv_post_lasso, fit_post_lasso, residuals, FittedModel, LassoFit,
};
