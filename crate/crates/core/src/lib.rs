//! Robust-optimization formulations of support vector machines.
//!
//! Hinge-loss classifiers trained against adversarial disturbances drawn
//! from a sublinear aggregated uncertainty set reduce exactly to
//! norm-regularized hinge minimization. This crate provides the
//! uncertainty sets, the reduction, a subgradient solver for the reduced
//! problem, kernelized variants, probabilistic calibration of the
//! regularization budget, and the sample-pairing laboratory that turns
//! robustness into generalization bounds.

pub mod classifier;
pub mod consistency;
pub mod data;
pub mod error;
pub mod kernel;
pub mod libsvm;
pub mod norm;
pub mod probabilistic;
pub mod reduction;
pub mod solver;
pub mod synthetic;
pub mod uncertainty;

pub use classifier::LinearClassifier;
pub use data::{Dataset, Label, LabeledSample};
pub use error::{Error, Result};
pub use norm::{dual_norm, Ellipsoidal, NormSpec};
