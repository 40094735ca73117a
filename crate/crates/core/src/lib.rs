//! Certifiably optimal multi-robot pose-graph optimization backend.
//!
//! The crate solves the joint intra-/inter-robot pose-graph optimization (PGO)
//! problem through a rank-restricted semidefinite relaxation on a product of
//! Stiefel manifolds, optimized by Riemannian block-coordinate descent with one
//! block per robot. A dual certificate verifies global optimality of the
//! recovered solution, a rank staircase escapes certified saddle points, and a
//! deterministic message-passing simulator emulates decentralized execution
//! where robots exchange only separator poses.
//!
//! Main entry points:
//! - [`graph::MultiRobotGraph`] — the partitioned pose graph data model,
//! - [`laplacian::assemble`] — connection Laplacian of the quadratic objective,
//! - [`solver::solve`] — block-coordinate descent at a fixed rank,
//! - [`certifier::verify`] — dual-certificate optimality check,
//! - [`pipeline::certified_solve`] — staircase solve / certify / round,
//! - [`baseline`] — one-time rendezvous alignment and Gauss-Newton comparison
//!   methods plus ATE metrics,
//! - [`netsim::run_decentralized`] — decentralized execution harness,
//! - [`io`] — g2o / TUM / JSON report formats.

pub mod baseline;
pub mod certifier;
pub mod error;
pub mod geom;
pub mod graph;
pub mod io;
pub mod laplacian;
pub mod netsim;
pub mod pipeline;
pub mod rounding;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{EdgeKind, MultiRobotGraph, NodeId, Pose, RelativeMeasurement};
pub use laplacian::{ConnectionLaplacian, LiftedState};
