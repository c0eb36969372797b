//! Structured-sparsity penalized regression with asymptotic confidence regions.
//!
//! The crate is organised around the pipeline
//!
//! 1. [`norms`]: weakly decomposable penalty norms (evaluation, proximal
//!    operators, duals, residual norms, gauges and allowed sets),
//! 2. [`solvers`]: the penalized least-squares estimator and the root-loss
//!    nodewise / `|J|`-wise regressions,
//! 3. [`precision`]: precision-matrix surrogates `T_J`, `Σ̂_J` and the
//!    normalisation matrix `M`,
//! 4. [`inference`]: de-sparsified estimators, pointwise intervals, group
//!    ellipsoids and remainder diagnostics,
//! 5. [`sim`]: the Toeplitz Monte-Carlo coverage harness.
//!
//! All coordinates are 0-based.

pub mod error;
pub mod format;
pub mod linalg;
pub mod norms;
pub mod solvers;
pub mod precision;
pub mod inference;
pub mod sim;

pub use error::{Error, Result};
pub use norms::{DualValue, IndexSet, NormKind, NormSpec};
pub use inference::{ConfidenceRegion, DesparsifiedEstimate, SigmaMode};
pub use precision::PrecisionFit;
pub use sim::{SimulationConfig, SimulationResult};
pub use solvers::{Dataset, Framework, MultivariateFit, PenalizedFit, SolverOptions};
