//! Markov models of a PBFT blockchain whose voting nodes fail and get
//! repaired.
//!
//! The crate builds the voting-round chains, evaluates the phase-type laws
//! of block and orphan generation times, solves the batch-service QBD for
//! transaction throughput, and computes availability and reliability
//! measures. A Gillespie simulator in [`sim`] gives independent estimates of
//! the same quantities.

pub mod error;
pub mod generators;
pub mod linalg;
pub mod measures;
pub mod params;
pub mod ph;
pub mod qbd;
pub mod reliability;
pub mod sim;
pub mod space;
pub mod sparse;
pub mod structured;
pub mod transient;

pub use error::{Error, Result};
pub use params::{validate_params, SystemParams};
pub use ph::{ph_cdf, ph_mean, PhaseTypeRep, SolveRoute};
pub use space::{SpaceKind, StateIndexer, VotingState};
pub use sparse::SparseGenerator;
