//! Spectral estimation for generalized grade-of-membership models.
//!
//! The pipeline flattens polytomous responses into a one-hot binary matrix,
//! takes a truncated SVD, locates pure-subject rows with a successive
//! projection step (optionally after pruning outlying rows), and recovers
//! membership weights and item-parameter tables in closed form. Companion
//! modules provide simulation designs, error metrics with profile alignment,
//! perturbation-bound diagnostics, and a Gibbs-sampling baseline.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimator;
pub mod gibbs;
pub mod linalg;
pub mod metrics;
pub mod normal;
pub mod simulate;
pub mod vertex;

pub use data::{BlockPartition, Family, FlatMatrix, ModelParams, QuasiTensor};
pub use error::{GomError, Result};
pub use estimator::{fit, FitConfig, GomEstimate};
pub use gibbs::{gibbs_fit, GibbsConfig, GibbsEstimate};
pub use linalg::{truncated_svd, SvdFactors};
pub use metrics::{aligned_errors, theory_bounds, AlignedError, BoundReport, NoiseStats};
pub use simulate::{generate, run_replications, run_replications_serial, SimScenario};
pub use vertex::{spa, PruneConfig, VertexResult};
