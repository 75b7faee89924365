//! Covariate-shift monitoring for feed-forward networks.
//!
//! Activations of a chosen layer are binned over soundly propagated neuron
//! ranges. Histograms of a test set and of operational data are compared by
//! KL divergence or by ε-portion similarity, and a test set that is not
//! similar can be reshaped by removing the fewest points that make it so.

pub mod bounds;
pub mod cli;
pub mod evaluate;
pub mod error;
pub mod histogram;
pub mod model;
pub mod reshape;

pub use bounds::{bounds_report, derive_binning, propagate_box, propagate_intervals, BinningSpec, NeuronInterval};
pub use error::{Error, Result};
pub use histogram::{
    bin_signatures, build_histogram, conservative_kappa, epsilon_portion_similar, kl_similar, ActivationHistogram,
    BinSignature, SimilarityReport,
};
pub use model::{Activation, Dataset, InputRange, Layer, Network};
pub use reshape::{apply_plan, encode, solve_exact, solve_greedy, MilpInstance, ReshapePlan};
