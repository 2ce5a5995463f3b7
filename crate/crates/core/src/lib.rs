//! Finite-MDP toolkit for studying which reward functions are
//! distinguishable from the objects derived from them.
//!
//! The crate is layered bottom-up:
//!
//! - [`mdp`]: the tabular MDP model, reachability, trajectory fragments and
//!   lasso trajectories with exact discounted returns.
//! - [`solvers`]: policy evaluation, optimal/soft Q-functions and the
//!   policies built from them.
//! - [`transforms`]: reward transformation families (potential shaping,
//!   S'-redistribution, monotone maps, masks, optimality-preserving
//!   transformations), samplers and membership testers.
//! - [`objects`]: reward-derived objects reduced to comparable fingerprints.
//! - [`invariance`]: invariance checks, counterexample search, the
//!   refinement order between objects and the directory table.

pub mod error;
pub mod fixtures;
pub mod invariance;
pub mod mdp;
pub mod objects;
pub mod rng;
pub mod sampler;
pub mod solvers;
pub mod transforms;

pub use error::{Error, Result};
pub use mdp::{Fragment, Lasso, Mdp, MdpFile, ReachabilitySummary, Transition, Violation};
pub use objects::{ObjectFingerprint, ObjectKind, ObjectParams, Payload, Resolution};
pub use sampler::SamplerConfig;
pub use solvers::{Policy, SolverParams, ValueTables};
pub use transforms::{TransformClass, TransformSpec};
