//! Estimation of binary-outcome diffusion over a sparse directed causal graph
//! observed across two periods.
//!
//! The crate is `no_std` with `alloc`. It carries the whole estimation path
//! (graph machinery, conditional-mean fitting, the diffusion estimators and
//! their dependency-graph variance, confidence intervals and lower bounds) plus
//! the data-generating process and per-replication Monte Carlo kernels. File
//! formats, the command line and the parallel experiment runner live in the
//! companion `netdiff` crate.
//!
//! Edge convention: an edge `(target, source)` means the period-0 outcome of
//! `source` may influence the period-1 outcome of `target`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dgp;
mod error;
pub mod graph;
pub mod inference;
pub mod linalg;
pub mod meanfit;
pub mod montecarlo;
pub mod normal;
pub mod rng;
pub mod sum;

pub use error::{Error, Result};
pub use graph::{DegreeStats, DirectedGraph, OverlapPairs, UndirectedGraph};
pub use inference::{DiffusionReport, EstimateOptions, FittedMeans, Variant};
pub use meanfit::{FitMode, MeanModel, Mu0Model, SimDraws};
