//! Optimal semistatic hedging with delayed information in a Gaussian market.
//!
//! The discrete solver gives the exact optimum for `n` trading steps and
//! delay `D`; the kernel module gives its continuous-time limit. Each closed
//! form has an independent oracle so that the identities linking them can be
//! checked at run time.

pub mod convergence;
pub mod dual;
pub mod error;
pub mod format;
pub mod kernel;
pub mod model;
pub mod montecarlo;
pub mod optimum;
pub mod oracle;
pub mod quad;
pub mod solver;
pub mod toeplitz;
pub mod verify;

pub use convergence::{build_bn, figure1_data, figure2_data, l2_distance_to_kappa, StepFunction};
pub use dual::{build_dual, relative_entropy, verification_residual, DualMeasure, GaussianLaw};
pub use error::{Error, Result};
pub use format::Table;
pub use kernel::{limit_static_coeff, limit_value, KernelSpec};
pub use model::{discretize, ContinuousMarket, DiscreteMarket, HedgeSolution};
pub use montecarlo::{estimate_utility, generate, PathBatch, UtilityReport};
pub use optimum::{brute_force_optimum, BruteForceResult};
pub use solver::{evaluate_on_path, solve, solve_a, strategy, value, weights_b, StrategyWeights};
pub use toeplitz::{DenseMatrix, SymToeplitz};
