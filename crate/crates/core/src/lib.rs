//! Exact moments of k-hop path counts in the Poisson random-connection model
//! with a Gaussian connection function `H_β(x, y) = exp(-β‖x − y‖²)`.
//!
//! The analytic side sums over non-flat partitions of the `n × r` index grid,
//! turns each partition into a unit-weight graph between the two terminals and
//! integrates the resulting product of Gaussian kernels exactly (grounded
//! Laplacian determinant plus effective conductance, in big rationals). The
//! simulation side samples the random graph directly and counts paths, so every
//! closed form can be checked against data.

pub mod closed_form;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod moments;
pub mod oracle;
pub mod partition;
pub mod selftest;
pub mod sim;

pub use closed_form::{ClosedForm, ClosedFormTerm, ModelParams, TermKey};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use gaussian::{
    chain_kernel, eliminate_by_merging, hop_graph_of_partition, integrate_gaussian_graph,
    pairwise_gaussian_merge, AffinePoint, GaussianFactor, HopGraph, MergeResult,
};
pub use moments::{
    evaluate_query, khop_mean, khop_moment, khop_variance, twohop_moment_stirling, Evaluation,
    MomentEngine, MomentQuery,
};
pub use partition::{
    count_nonflat, enumerate_nonflat, enumerate_nonflat_with_limit, stirling2, GridIndex,
    NonFlatPartitions, Partition, Stirling2Table, DEFAULT_CELL_LIMIT,
};
