//! Truncated Walsh-Hadamard matrices, linearized Walsh-Fourier partial sums
//! and their operator norms.
//!
//! The crate is organized bottom-up:
//!
//! - [`walsh`]: Walsh functions in the Paley ordering and `WH_N`.
//! - [`truncation`]: truncation maps, TWH matrices, trimming, equivalence
//!   transforms, branches, nodes and node reduction.
//! - [`spectral`]: operator norms (dense oracle, power iteration, Lanczos),
//!   the level matrix `M_N`, its exact coefficient recursions and the
//!   reduced two-branch level matrix.
//! - [`critical`]: the objective `F(α, β)` of the two-branch norm and its
//!   critical points.
//! - [`partial_sum`]: the linearized partial-sum operator `S_Φ`.
//! - [`evidence`]: numerical evidence suites for the conjectures.

pub mod critical;
pub mod error;
pub mod evidence;
pub mod linalg;
pub mod par;
pub mod partial_sum;
pub mod spectral;
pub mod truncation;
pub mod walsh;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use spectral::{LinearOperator, SpectralResult};
pub use truncation::{
    branch_decompose, column_inner, equivalence_transform, node_reduce, reduce_fully,
    standard_truncation, trim, two_branch, BranchDecomposition, Node, TruncationMap, TwhMatrix,
};
pub use walsh::{analyze, build_wh, synthesize, walsh_eval, DyadicPoint, StepFunction, WhMatrix};

/// Crate version, written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
