//! Gaussian process latent variable model with a Laplace-approximated
//! hyperparameter posterior.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and parallel execution live in the `gplvm` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod gauge;
pub mod kernels;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod minimize;
pub mod model_select;
pub mod optimize;
pub mod synth;

pub use error::{Error, Result};
pub use gauge::{apply_gauge, pack, unpack, GaugeFixed, GaugeSpec};
pub use kernels::{
    kernel_grad_entries, kernel_matrix, kernel_second_derivative, KernelFamily, KernelGradient,
    KernelSpec, SourceHyperparams,
};
pub use likelihood::{
    grad_l_x, hessian_a, laplace_log_marginal, neg_log_hyp_posterior, neg_log_posterior_x,
    DataSource, EvidenceConvention, HessianReport, HypObjective, LatentObjectiveValue,
    Normalization,
};
pub use metrics::{evaluate, ErrorMeasure, ErrorReport};
pub use model_select::{
    likelihood_ratio, score_model, select, LikelihoodRatio, ModelCandidate, ModelScore,
    RatioConvention, SelectConfig, SelectionReport,
};
pub use optimize::{fit_hyperparams, fit_latents, FitResult, InitStrategy, OptimConfig};
pub use synth::{make_true_latents, project_to_high_dim, GenConfig, NoiseScale, PatternGroup, TruePattern};
