//! Gaussian-process (Kriging) regression built around additive covariance
//! kernels.
//!
//! The crate covers kernel construction ([`kernels`]), conditioning and
//! prediction ([`kriging`]), per-dimension submodels of additive models
//! ([`additive`]), maximum-likelihood hyperparameter estimation ([`fit`]),
//! designs of experiments ([`doe`]) and the benchmark functions and
//! experiment runners used to compare additive and separable emulators
//! ([`bench`]).

pub mod additive;
pub mod bench;
pub mod doe;
pub mod error;
pub mod fit;
pub mod kernels;
pub mod kriging;
pub mod linalg;
pub mod optim;
pub mod quadrature;

pub use additive::{centered_submodel, submodel_mean, submodel_var, SubmodelCurve};
pub use error::{Error, Result};
pub use kernels::{
    cross_cov, eval_kernel, eval_univariate, gram_matrix, Design, KernelFamily, KernelSpec,
    Structure,
};
pub use kriging::{detect_rank_deficiency, fit, GpModel, ModelDocument, RankReport, TrendMode};
pub use doe::{DoeConfig, DoeKind};
pub use fit::{log_likelihood, mle_fit, FitConfig, FitOutcome};
pub use bench::{g_function, p_criterion, q2, solve_a1, ExperimentRecord, GFunctionSpec};
pub use doe::RNG_ALGORITHM;

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
