//! Throughput maximization for multi-UAV relay networks.
//!
//! The pipeline routes every UAV's traffic to a single ground station over a
//! shortest-path tree, splits a total power budget across the tree links by
//! water-filling, and then refines the parent choices with a log-barrier
//! relaxation solved by an equality-constrained Newton method.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: nodes, channel parameters, geometry, path-loss gain, Shannon
//!   capacity and the admissibility (incidence) matrix.
//! - [`routing`]: Bellman-Ford shortest-path tree and tree validation.
//! - [`power`]: KKT water-filling over the tree links.
//! - [`linksel`]: candidate parents, the barrier objective and its
//!   derivatives, the Newton solver, and rounding back to a tree.
//! - [`oracle`]: brute-force references for small instances.
//! - [`harness`]: scenario generation, the end-to-end pipeline, seeded sweeps
//!   and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linksel;
pub mod model;
pub mod oracle;
pub mod power;
pub mod routing;

pub use error::{Error, Result};
pub use linksel::{CandidateSet, RelaxedLinkMatrix, SolverConfig};

pub use model::{ChannelParams, DistanceMode, Node, Role, Topology};
pub use power::PowerAllocation;
pub use routing::{EdgeWeight, RoutingTree};
