//! One voting round from the per-node rules.
//!
//! `N = 3n+1` nodes start working and undecided. An undecided working node
//! approves at rate `γp`, disapproves at rate `γ(1−p)` and fails at rate
//! `θ`; a failed node is repaired at rate `μ` and stays undecided. The round
//! ends with a block at `2n+1` approvals, or with an orphan once
//! disapprovals plus failed nodes reach `n+1`.

use rand::Rng;
use rayon::prelude::*;

use crate::params::SystemParams;
use crate::ph::exponential;
use crate::space::VotingState;

use super::stats::{stream_rng, SimEstimate, Welford};

/// Which endings are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundMode {
    /// Both endings compete.
    Full,
    /// Moves that would complete an orphan are switched off.
    BlockOnly,
    /// The approval that would complete a block is switched off.
    OrphanOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Block,
    Orphan,
    /// No move was possible, or the event budget ran out.
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub duration: f64,
    pub verdict: Verdict,
    /// The state in which the round ended.
    pub state: VotingState,
}

/// Largest number of moves in one round before it is censored.
const EVENT_BUDGET: usize = 10_000_000;

/// Simulates one round from `(0,0,0)`.
pub fn simulate_round<R: Rng + ?Sized>(params: &SystemParams, mode: RoundMode, rng: &mut R) -> RoundOutcome {
    let n = params.n;
    let nodes = 3 * n + 1;
    let (mut approvals, mut disapprovals, mut failed) = (0usize, 0usize, 0usize);
    let mut clock = 0.0;
    for _ in 0..EVENT_BUDGET {
        let undecided = (nodes - approvals - disapprovals - failed) as f64;
        let mut approve = undecided * params.gamma * params.p;
        let mut disapprove = undecided * params.gamma * (1.0 - params.p);
        let mut fail = undecided * params.theta;
        let repair = failed as f64 * params.mu;
        if mode == RoundMode::OrphanOnly && approvals == 2 * n {
            approve = 0.0;
        }
        if mode == RoundMode::BlockOnly && disapprovals + failed == n {
            disapprove = 0.0;
            fail = 0.0;
        }
        let total = approve + disapprove + fail + repair;
        let state = VotingState {
            k: approvals,
            i: disapprovals,
            j: failed,
        };
        if total <= 0.0 {
            return RoundOutcome {
                duration: clock,
                verdict: Verdict::Censored,
                state,
            };
        }
        clock += exponential(rng, total);
        let u = rng.random::<f64>() * total;
        if u < approve {
            approvals += 1;
        } else if u < approve + disapprove {
            disapprovals += 1;
        } else if u < approve + disapprove + fail {
            failed += 1;
        } else {
            failed -= 1;
        }
        let state = VotingState {
            k: approvals,
            i: disapprovals,
            j: failed,
        };
        if approvals == 2 * n + 1 {
            return RoundOutcome {
                duration: clock,
                verdict: Verdict::Block,
                state,
            };
        }
        if disapprovals + failed == n + 1 {
            return RoundOutcome {
                duration: clock,
                verdict: Verdict::Orphan,
                state,
            };
        }
    }
    RoundOutcome {
        duration: clock,
        verdict: Verdict::Censored,
        state: VotingState {
            k: approvals,
            i: disapprovals,
            j: failed,
        },
    }
}

/// Round statistics over many replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    /// Mean round length when only blocks can end a round.
    pub mean_wb: Option<SimEstimate>,
    /// Mean round length when only orphans can end a round.
    pub mean_wo: Option<SimEstimate>,
    /// Probability that a round with both endings yields a block.
    pub p_block: SimEstimate,
    /// Mean length of rounds that yielded a block, both endings allowed.
    pub cond_wb: Option<SimEstimate>,
    pub cond_wo: Option<SimEstimate>,
    pub censored: u64,
}

#[derive(Default, Clone, Copy)]
struct Accumulators {
    wb: Welford,
    wo: Welford,
    block: Welford,
    cond_wb: Welford,
    cond_wo: Welford,
    censored: u64,
}

impl Accumulators {
    fn merge(&mut self, other: &Accumulators) {
        self.wb.merge(&other.wb);
        self.wo.merge(&other.wo);
        self.block.merge(&other.block);
        self.cond_wb.merge(&other.cond_wb);
        self.cond_wo.merge(&other.cond_wo);
        self.censored += other.censored;
    }
}

const CHUNK: usize = 1000;

/// Runs `reps` replications; each replication simulates one round in every
/// mode. Chunks of 1000 replications use their own stream and run in
/// parallel.
pub fn estimate_round_stats(params: &SystemParams, reps: usize, seed: u64) -> RoundStats {
    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<Accumulators> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut acc = Accumulators::default();
            let count = CHUNK.min(reps - c * CHUNK);
            for _ in 0..count {
                let b = simulate_round(params, RoundMode::BlockOnly, &mut rng);
                if b.verdict == Verdict::Block {
                    acc.wb.push(b.duration);
                }
                let o = simulate_round(params, RoundMode::OrphanOnly, &mut rng);
                if o.verdict == Verdict::Orphan {
                    acc.wo.push(o.duration);
                }
                let f = simulate_round(params, RoundMode::Full, &mut rng);
                match f.verdict {
                    Verdict::Block => {
                        acc.block.push(1.0);
                        acc.cond_wb.push(f.duration);
                    }
                    Verdict::Orphan => {
                        acc.block.push(0.0);
                        acc.cond_wo.push(f.duration);
                    }
                    Verdict::Censored => {}
                }
                acc.censored += [b, o, f].iter().filter(|r| r.verdict == Verdict::Censored).count() as u64;
            }
            acc
        })
        .collect();
    let mut total = Accumulators::default();
    parts.iter().for_each(|p| total.merge(p));
    let some = |w: &Welford| (w.count() > 0).then(|| w.estimate(seed));
    RoundStats {
        mean_wb: some(&total.wb),
        mean_wo: some(&total.wo),
        p_block: total.block.estimate(seed),
        cond_wb: some(&total.cond_wb),
        cond_wo: some(&total.cond_wo),
        censored: total.censored,
    }
}
