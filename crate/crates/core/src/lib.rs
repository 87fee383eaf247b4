//! Discrete-time quantum trajectories and parameter estimation from
//! measurement records.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`], [`state`], [`model`]: complex matrices, density matrices,
//!   Kraus models, word likelihoods and fidelity.
//! - [`channel`]: superoperators, fixed points, the minimal-subspace
//!   decomposition, identifiability checks and relative entropy rates.
//! - [`trajectory`]: the sampled trajectory and the known-model filter.
//! - [`discrimination`]: the block filter over a finite candidate set.
//! - [`refine`]: interval refinement for a scalar parameter.
//! - [`record`], [`modelfile`], [`registry`]: file formats and named models.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod channel;
pub mod discrimination;
pub mod error;
pub mod linalg;
pub mod model;
pub mod modelfile;
pub mod parallel;
pub mod record;
pub mod refine;
pub mod registry;
pub mod rng;
pub mod sampling;
pub mod state;
pub mod trajectory;

pub use error::{Error, ErrorKind, Result};
pub use model::{KrausModel, ModelSource, Outcome, ValidityReport};
pub use parallel::Execution;
pub use state::{fidelity, DensityMatrix};
