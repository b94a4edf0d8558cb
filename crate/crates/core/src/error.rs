use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::meanfit::FitDiagnostics;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("edge probability {p} is outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("invalid size {n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("Hessian is numerically singular")]
    Singular,
    #[error("solver did not converge after {} iterations (gradient norm {})", .diagnostics.iterations, .diagnostics.grad_norm)]
    NotConverged {
        iterate: Vec<f64>,
        diagnostics: Box<FitDiagnostics>,
    },
    #[error("no node satisfies the fitting subset restriction")]
    EmptySubset,
    #[error("degenerate weights: sum of mu0 (1 - mu0) is zero")]
    DegenerateWeights,
    #[error("estimated v2 = {v2} is below the degeneracy threshold")]
    DegenerateV2 { v2: f64 },
    #[error("simulation draws are missing or empty")]
    MissingDraws,
    #[error("both the dependency-graph and diagonal variance estimates are degenerate")]
    DegenerateVariance,
    #[error("alpha = {alpha} must lie strictly between 0 and 1")]
    InvalidAlpha { alpha: f64 },
    #[error("{failed} of {reps} replications failed, above the 10% limit")]
    TooManyFailures { failed: usize, reps: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
