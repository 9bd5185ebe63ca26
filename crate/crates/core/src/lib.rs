//! Directed Steiner Tree through the Lasserre hierarchy.
//!
//! The crate reduces an instance to an ℓ-layered acyclic graph, builds the
//! flow LP over edge and per-terminal flow variables, lifts it to level `t` of
//! the Lasserre hierarchy, solves the lift at desk scale and rounds the moment
//! solution by top-down randomized path sampling. Exact rational machinery
//! (moment algebra, simplex, Dreyfus-Wagner) checks the hierarchy's structural
//! properties against ground truth.
//!
//! Module map:
//!
//! * [`instance`]: instances, file format, metric closure, levelization.
//! * [`flow_lp`]: the flow LP as a `a^T x >= b` system and an exact simplex.
//! * [`moments`]: index sets, moment vectors and matrices, shift, conditioning,
//!   Möbius atoms, decomposition and certification.
//! * [`sdp`]: assembling and solving the level-`t` lift.
//! * [`rounding`]: moment oracles, path sampling, repetition with repair, and
//!   the empirical estimators.
//! * [`exact`]: exact optimum, feasibility and enumeration.
//! * [`harness`]: generators, the end-to-end pipeline and reports.

pub mod error;
pub mod exact;
pub mod fixtures;
pub mod flow_lp;
pub mod harness;
pub mod instance;
pub mod moments;
pub mod rounding;
pub mod scalar;
pub mod sdp;

pub use error::{Error, Result};
pub use instance::{
    levelize, map_back, metric_closure, parse_instance, shortest_path, DstInstance, EdgeId,
    LayeredInstance, LevelizeOptions, NodeId, PathRecord,
};
pub use scalar::{Rational, Scalar};
