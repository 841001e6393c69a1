//! Gillespie simulation of the model chains.
//!
//! [`round`] rebuilds a voting round from the per-node rules, without going
//! through [`crate::generators`]. [`ctmc`] and [`queue`] walk the very
//! generators the analytic code solves. Every run is reproducible: stream
//! `s` of seed `x` is a ChaCha8 generator keyed by `(x, s)`, and parallel
//! chunks are merged in chunk order.

pub mod ctmc;
pub mod queue;
pub mod round;
pub mod stats;

pub use ctmc::{simulate_generator, OccupancyEstimate};
pub use queue::{simulate_queue, QueueEstimate, QueueSimSettings};
pub use round::{estimate_round_stats, simulate_round, RoundMode, RoundOutcome, RoundStats, Verdict};
pub use stats::{stream_rng, BatchMeans, SimEstimate, Welford};
