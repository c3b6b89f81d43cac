//! Core numerics for studying how network width drives tangent-kernel
//! constancy: declarative network construction, exact first/second-order
//! derivative propagation, matrix-free norm estimators, and full-batch
//! gradient-descent experiments.
//!
//! The crate is `no_std`-compatible (`--no-default-features`, with `alloc`);
//! float transcendentals fall back to `libm` in that configuration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod activation;
pub mod analysis;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod network;
pub mod quadrature;
pub mod quantities;
pub mod rng;
pub mod train;

pub use activation::Activation;
pub use analysis::{
    bottleneck_block_stat, hessian_bound, hessian_spectral_norm, kappa, kernel_change_vs_hessian_check,
    BallCheckReport, KappaReport,
};
pub use autodiff::{gradient, hvp, GradientBundle};
pub use data::{make_synthetic_dataset, Dataset};
pub use error::{Error, Result};
pub use estimators::{
    holder_bound_check, spectral_norm_general, spectral_norm_symmetric, tensor221_norm, DenseOrder3,
    LinearOp, MatrixOp, Order3Action, SpectralReport, Tensor221Params,
};
pub use fit::{scaling_fit, ScalingFit};
pub use kernel::{delta_k, tangent_kernel, KernelMatrix};
pub use linalg::DenseMatrix;
pub use network::{
    forward, gaussian_matrix, init_weights, zero_weights, ForwardTrace, LayerKind, LayerSpec,
    NetworkSpec, OutputHead, Parameterization, Weights,
};
pub use quantities::{layer_quantities, QQuantities};
pub use rng::CounterRng;
pub use train::{gradient_descent, weight_change_report, KernelSnapshot, Loss, TrainConfig, Trajectory, WeightChangeReport};
