//! Cross-validated model selection for treatment contrasts, variance
//! estimates for the cross-validated risk, and A-learning for multi-stage
//! treatment regimes.

pub mod data;
pub mod dtr;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod matching;
pub mod mccv;
pub mod sim;
pub mod stats;
pub mod study;
pub mod variance;

pub use data::{RegressionDataset, StageDataset, StandardizationStats, TrialData, TrialRecord};
pub use error::{Error, Result};
pub use estimators::{fit_contrast, fit_regression, FittedContrast, FittedRegression, ModelKind, ModelSpec, TreeParams};
pub use exec::{derive_seed, rng_from, Execution, SimRng};
pub use mccv::{run_mccv, run_mccv_with, ContrastTask, CvReport, CvTask, LossSpec, RegressionTask, SplitPlan};
pub use variance::{estimate_variance, half_and_half, selection_pvalue, variance_from_rho, HalfMode, HalfSplitStats, RhoReport};
pub use dtr::{run_backward, run_backward_observed, BackwardConfig, Regime, SelectionMode, SelectionPolicy, StageLayout, StageView};
