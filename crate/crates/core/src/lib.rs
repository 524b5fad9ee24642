//! Goodness-of-fit tests for sparse high-dimensional linear and logistic
//! regression models, based on martingale-transformed projected residual
//! processes combined across projections by the Cauchy combination rule.

pub mod data;
pub mod error;
pub mod glm;
pub mod kernel;
pub mod nulldist;
pub mod orchestrator;
pub mod pls;
pub mod process;
pub mod projector;
pub mod simlab;
pub mod threads;
pub mod transform;

pub use data::{Dataset, LoadReport, Standardization};
pub use error::{GofError, Result};
pub use glm::{Family, FittedModel};
pub use nulldist::{cauchy_combine, cvm_bm_pvalue, CvmBmLaw};
pub use orchestrator::{run_test, Config, Method, TestReport};
pub use projector::{Half, ProjectionSet};
pub use simlab::{mc_experiment, Experiment, Model, Scenario, Study};
pub use transform::Mode;
