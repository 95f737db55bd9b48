//! Deinterleaving of interleaved radar pulse trains from arrival times.

pub mod assignment;
pub mod classical;
pub mod error;
pub mod eval;
pub mod flow;
pub mod scalar;
pub mod sequence;
pub mod simulator;
pub mod smcf;
pub mod train;

pub use assignment::{
    assignment_to_clusters, clusters_from_links, labels_to_assignment, AssignmentKind,
    AssignmentMatrix, ClusterSet, Link,
};
pub use error::{Error, Result};
pub use scalar::{CostScalar, Real};
pub use sequence::{compute_rtoa, normalize_sequence, PulseSequence, RtoaSequence};

/// Double-precision model: training, checkpoints and evaluation use it.
pub type Model64 = smcf::Model<f64>;
/// Single-precision model for faster inference.
pub type Model32 = smcf::Model<f32>;
pub type SoftAssignment32 = AssignmentMatrix<f32>;
