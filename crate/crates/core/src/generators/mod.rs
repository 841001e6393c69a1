//! Generators and absorbing chains of the voting model.
//!
//! Rates come from per-node semantics. With `R = N - k - i - j` nodes that
//! have neither voted nor failed, a state `(k, i, j)` moves by
//!
//! * approval at rate `Rγp` to `(k+1, i, j)`,
//! * disapproval at rate `Rγq` to `(k, i+1, j)`,
//! * failure at rate `Rθ` to `(k, i, j+1)`,
//! * repair at rate `jμ` to `(k, i, j-1)`.
//!
//! Each chain differs only in which moves end the round and which moves are
//! censored. The [`block_form`] module rebuilds the same matrices from their
//! block displays as an independent check.

pub mod block_form;

use crate::error::Result;
use crate::params::SystemParams;
use crate::ph::{AbsorbingChain, PhaseTypeRep};
use crate::space::{Layout, SpaceKind, StateIndexer, VotingState};
use crate::sparse::{SparseGenerator, TripletBuilder};

/// Per-state rates of the four move types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveRates {
    pub approve: f64,
    pub disapprove: f64,
    pub fail: f64,
    pub repair: f64,
}

impl MoveRates {
    pub fn at(params: &SystemParams, s: VotingState) -> Self {
        let remaining = (params.total_nodes() - s.k - s.i - s.j) as f64;
        MoveRates {
            approve: remaining * params.gamma * params.p,
            disapprove: remaining * params.gamma * params.q(),
            fail: remaining * params.theta,
            repair: s.j as f64 * params.mu,
        }
    }
}

fn unit(dim: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[at] = 1.0;
    v
}

fn chain(ix: &StateIndexer, t: TripletBuilder, exit: Vec<f64>) -> AbsorbingChain {
    let subgen = t.into_generator(Some(&exit));
    PhaseTypeRep {
        initial: unit(ix.len(), 0),
        subgen,
        exit,
        layout: ix.layout().clone(),
    }
}

/// Block-generation chain `(α, T, T⁰)`.
///
/// Absorption happens when level `2n` receives one more approval. Moves
/// that would complete an orphan (`i+j = n`) are censored: they are simply
/// not possible in this chain.
pub fn build_block_ph(params: &SystemParams) -> Result<AbsorbingChain> {
    params.validate()?;
    let n = params.n;
    let ix = StateIndexer::new(n, SpaceKind::BlockAbsorbing)?;
    let mut t = TripletBuilder::new(ix.len(), ix.len());
    let mut exit = vec![0.0; ix.len()];
    for (r, &s) in ix.states().iter().enumerate() {
        let m = MoveRates::at(params, s);
        if s.k < 2 * n {
            t.push(r, ix.idx(s.k + 1, s.i, s.j), m.approve);
        } else {
            exit[r] = m.approve;
        }
        if s.i + s.j < n {
            t.push(r, ix.idx(s.k, s.i + 1, s.j), m.disapprove);
            t.push(r, ix.idx(s.k, s.i, s.j + 1), m.fail);
        }
        if s.j > 0 {
            t.push(r, ix.idx(s.k, s.i, s.j - 1), m.repair);
        }
    }
    Ok(chain(&ix, t, exit))
}

/// Orphan-generation chain `(ω, S, S⁰)`.
///
/// Absorption happens when `i+j = n` receives one more disapproval or
/// failure; approvals at level `2n` (which would make a block) are censored.
pub fn build_orphan_ph(params: &SystemParams) -> Result<AbsorbingChain> {
    params.validate()?;
    let n = params.n;
    let ix = StateIndexer::new(n, SpaceKind::OrphanAbsorbing)?;
    let mut t = TripletBuilder::new(ix.len(), ix.len());
    let mut exit = vec![0.0; ix.len()];
    for (r, &s) in ix.states().iter().enumerate() {
        let m = MoveRates::at(params, s);
        if s.k < 2 * n {
            t.push(r, ix.idx(s.k + 1, s.i, s.j), m.approve);
        }
        if s.i + s.j < n {
            t.push(r, ix.idx(s.k, s.i + 1, s.j), m.disapprove);
            t.push(r, ix.idx(s.k, s.i, s.j + 1), m.fail);
        } else {
            exit[r] = m.disapprove + m.fail;
        }
        if s.j > 0 {
            t.push(r, ix.idx(s.k, s.i, s.j - 1), m.repair);
        }
    }
    Ok(chain(&ix, t, exit))
}

/// Appends a propagation phase of rate `beta` to a chain.
pub fn extend_with_propagation(chain: &AbsorbingChain, beta: f64) -> Result<AbsorbingChain> {
    chain.extend_with_propagation(beta)
}

/// Generator `Q` of the full round cycle.
///
/// Voting states (`k ≤ 2n`, `i+j ≤ n`) use all four moves. Orphan states
/// (`i+j = n+1`) only roll back to `(0,0,0)` at rate `β` or repair a node.
/// Block states (`k = 2n+1`) keep disapproving, failing and repairing while
/// the block propagates, and reset to `(0,0,0)` at rate `β`; further
/// approvals are irrelevant there and are not modelled.
pub fn build_full_cycle_q(params: &SystemParams) -> Result<SparseGenerator> {
    params.validate()?;
    let n = params.n;
    let ix = StateIndexer::new(n, SpaceKind::FullCycle)?;
    let mut t = TripletBuilder::new(ix.len(), ix.len());
    let origin = ix.idx(0, 0, 0);
    for (r, &s) in ix.states().iter().enumerate() {
        let m = MoveRates::at(params, s);
        if s.j > 0 {
            t.push(r, ix.idx(s.k, s.i, s.j - 1), m.repair);
        }
        if ix.is_orphan(s) {
            t.push(r, origin, params.beta);
            continue;
        }
        if ix.is_block(s) {
            t.push(r, origin, params.beta);
            if s.i + s.j < n {
                t.push(r, ix.idx(s.k, s.i + 1, s.j), m.disapprove);
                t.push(r, ix.idx(s.k, s.i, s.j + 1), m.fail);
            }
            continue;
        }
        t.push(r, ix.idx(s.k + 1, s.i, s.j), m.approve);
        t.push(r, ix.idx(s.k, s.i + 1, s.j), m.disapprove);
        t.push(r, ix.idx(s.k, s.i, s.j + 1), m.fail);
    }
    Ok(t.into_generator(None))
}

/// Failed-node birth-death chain `Q_A` on `0..=N`.
pub fn build_birth_death(params: &SystemParams) -> Result<SparseGenerator> {
    params.validate()?;
    let big_n = params.total_nodes();
    let mut t = TripletBuilder::new(big_n + 1, big_n + 1);
    for k in 0..=big_n {
        if k < big_n {
            t.push(k, k + 1, (big_n - k) as f64 * params.theta);
        }
        if k > 0 {
            t.push(k, k - 1, k as f64 * params.mu);
        }
    }
    Ok(t.into_generator(None))
}

/// Failed-node chain absorbed once more than `n` nodes have failed.
pub fn build_inherent_absorbing(params: &SystemParams) -> Result<AbsorbingChain> {
    params.validate()?;
    let (n, big_n) = (params.n, params.total_nodes());
    let mut t = TripletBuilder::new(n + 1, n + 1);
    let mut exit = vec![0.0; n + 1];
    for k in 0..=n {
        let up = (big_n - k) as f64 * params.theta;
        if k < n {
            t.push(k, k + 1, up);
        } else {
            exit[k] = up;
        }
        if k > 0 {
            t.push(k, k - 1, k as f64 * params.mu);
        }
    }
    let subgen = t.into_generator(Some(&exit));
    Ok(PhaseTypeRep {
        initial: unit(n + 1, 0),
        subgen,
        exit,
        layout: Layout::single(n + 1),
    })
}

/// Full cycle with orphan states made absorbing, as `(φ(0), S_∇, S_∇⁰)`.
///
/// The orphan states are deleted from `Q` and every rate into them is added
/// to the exit vector. The `β` resets of block states to `(0,0,0)` stay in
/// the subgenerator, so this matrix is not block upper-triangular.
pub fn build_operational_absorbing(params: &SystemParams) -> Result<AbsorbingChain> {
    let q = build_full_cycle_q(params)?;
    let full = StateIndexer::new(params.n, SpaceKind::FullCycle)?;
    let op = StateIndexer::new(params.n, SpaceKind::OperationalAbsorbing)?;
    let kept: Vec<usize> = (0..full.len())
        .filter(|&m| !full.is_orphan(full.state_of(m)))
        .collect();
    debug_assert!(kept
        .iter()
        .enumerate()
        .all(|(new, &old)| op.state_of(new) == full.state_of(old)));
    let mut exit = vec![0.0; kept.len()];
    for (new, &old) in kept.iter().enumerate() {
        exit[new] = q
            .row(old)
            .filter(|(c, _)| full.is_orphan(full.state_of(*c)))
            .map(|(_, v)| v)
            .sum();
    }
    let subgen = q
        .submatrix(&kept, &kept)
        .with_tag(crate::sparse::Conservativity::SubConservative);
    Ok(PhaseTypeRep {
        initial: unit(kept.len(), 0),
        subgen,
        exit,
        layout: op.layout().clone(),
    })
}

/// Upper bound on the total outflow of any state of any model chain.
///
/// A voting state leaves at most at `N(γ+θ) + nμ`; an orphan state
/// `(k,0,n+1)` repairs at `(n+1)μ`, which can exceed that when `μ` is large
/// compared with `N(γ+θ)`. Either may add a `β` reset.
pub fn rate_bound(params: &SystemParams) -> f64 {
    let n = params.n as f64;
    let big_n = params.total_nodes() as f64;
    let voting = big_n * (params.gamma + params.theta) + n * params.mu;
    voting.max((n + 1.0) * params.mu) + params.beta
}
