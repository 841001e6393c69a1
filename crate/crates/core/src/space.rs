//! State spaces and their canonical index order.
//!
//! Every space is ordered level-major (ascending approvals `k`), then by
//! ascending disapprovals `i`, then by ascending failed-node count `j`.
//! The one-dimensional spaces (birth-death, inherent-absorbing) store their
//! failed-node count in `j` with `k = i = 0`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Transient states of the block-generation chain: `k ≤ 2n`, `i+j ≤ n`.
    BlockAbsorbing,
    /// Same states as [`SpaceKind::BlockAbsorbing`], for the orphan chain.
    OrphanAbsorbing,
    /// The recurrent round cycle: voting, orphan and block states.
    FullCycle,
    /// Failed-node count `0..=N`.
    BirthDeath,
    /// Failed-node count `0..=n`.
    InherentAbsorbing,
    /// Full cycle without the orphan states: `k ≤ 2n+1`, `i+j ≤ n`.
    OperationalAbsorbing,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 6] = [
        SpaceKind::BlockAbsorbing,
        SpaceKind::OrphanAbsorbing,
        SpaceKind::FullCycle,
        SpaceKind::BirthDeath,
        SpaceKind::InherentAbsorbing,
        SpaceKind::OperationalAbsorbing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::BlockAbsorbing => "block-absorbing",
            SpaceKind::OrphanAbsorbing => "orphan-absorbing",
            SpaceKind::FullCycle => "full-cycle",
            SpaceKind::BirthDeath => "birth-death",
            SpaceKind::InherentAbsorbing => "inherent-absorbing",
            SpaceKind::OperationalAbsorbing => "operational-absorbing",
        }
    }

    /// Closed-form number of states.
    pub fn size(self, n: usize) -> usize {
        match self {
            SpaceKind::BlockAbsorbing | SpaceKind::OrphanAbsorbing => {
                (2 * n + 1) * (n + 1) * (n + 2) / 2
            }
            SpaceKind::FullCycle => {
                (2 * n + 1) * (n + 2) * (n + 3) / 2 + (n + 1) * (n + 2) / 2
            }
            SpaceKind::BirthDeath => 3 * n + 2,
            SpaceKind::InherentAbsorbing => n + 1,
            SpaceKind::OperationalAbsorbing => (2 * n + 2) * (n + 1) * (n + 2) / 2,
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpaceKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| Error::UnknownSpaceKind(s.to_string()))
    }
}

/// Approvals, disapprovals and failed nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VotingState {
    pub k: usize,
    pub i: usize,
    pub j: usize,
}

impl VotingState {
    pub const fn new(k: usize, i: usize, j: usize) -> Self {
        VotingState { k, i, j }
    }
}

impl fmt::Display for VotingState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.k, self.i, self.j)
    }
}

/// A run of consecutive indices sharing `(k, i)`; `j` ascends along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    pub level: usize,
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

impl Group {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Level/group partition of an index range, used by the structured solver.
///
/// Within a group only neighbouring indices may interact (a tridiagonal
/// block); across groups and levels only forward interaction is allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    groups: Vec<Group>,
    level_starts: Vec<usize>,
    dim: usize,
}

impl Layout {
    /// Builds a layout from per-level lists of group lengths.
    pub fn from_levels(levels: &[Vec<usize>]) -> Self {
        let mut groups = Vec::new();
        let mut level_starts = Vec::with_capacity(levels.len() + 1);
        let mut start = 0;
        for (level, lens) in levels.iter().enumerate() {
            level_starts.push(start);
            for (index, &len) in lens.iter().enumerate() {
                groups.push(Group {
                    level,
                    index,
                    start,
                    len,
                });
                start += len;
            }
        }
        level_starts.push(start);
        Layout {
            groups,
            level_starts,
            dim: start,
        }
    }

    /// One level holding one tridiagonal group.
    pub fn single(dim: usize) -> Self {
        Layout::from_levels(&[vec![dim]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn num_levels(&self) -> usize {
        self.level_starts.len() - 1
    }

    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        self.level_starts[level]..self.level_starts[level + 1]
    }

    /// Groups belonging to one level.
    pub fn level_groups(&self, level: usize) -> impl Iterator<Item = &Group> {
        self.groups.iter().filter(move |g| g.level == level)
    }

    /// Appends a level made of a single one-element group.
    pub fn with_extra_phase(&self) -> Self {
        let mut levels: Vec<Vec<usize>> = (0..self.num_levels())
            .map(|l| self.level_groups(l).map(|g| g.len).collect())
            .collect();
        levels.push(vec![1]);
        Layout::from_levels(&levels)
    }
}

/// Bijection between states and matrix indices for one space.
#[derive(Debug, Clone)]
pub struct StateIndexer {
    kind: SpaceKind,
    n: usize,
    states: Vec<VotingState>,
    lookup: HashMap<VotingState, usize>,
    layout: Layout,
}

impl StateIndexer {
    pub fn new(n: usize, kind: SpaceKind) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let levels: Vec<(usize, usize)> = match kind {
            // (level, cap on i+j)
            SpaceKind::BlockAbsorbing | SpaceKind::OrphanAbsorbing => {
                (0..=2 * n).map(|k| (k, n)).collect()
            }
            SpaceKind::FullCycle => (0..=2 * n + 1)
                .map(|k| (k, if k <= 2 * n { n + 1 } else { n }))
                .collect(),
            SpaceKind::OperationalAbsorbing => (0..=2 * n + 1).map(|k| (k, n)).collect(),
            SpaceKind::BirthDeath | SpaceKind::InherentAbsorbing => Vec::new(),
        };

        let mut states = Vec::with_capacity(kind.size(n));
        let mut level_groups = Vec::new();
        if levels.is_empty() {
            let top = if kind == SpaceKind::BirthDeath { 3 * n + 1 } else { n };
            states.extend((0..=top).map(|j| VotingState::new(0, 0, j)));
            level_groups.push(vec![top + 1]);
        } else {
            for (k, cap) in levels {
                let mut lens = Vec::new();
                for i in 0..=cap {
                    for j in 0..=cap - i {
                        states.push(VotingState::new(k, i, j));
                    }
                    lens.push(cap - i + 1);
                }
                level_groups.push(lens);
            }
        }
        let lookup = states.iter().enumerate().map(|(m, s)| (*s, m)).collect();
        Ok(StateIndexer {
            kind,
            n,
            states,
            lookup,
            layout: Layout::from_levels(&level_groups),
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[VotingState] {
        &self.states
    }

    pub fn state_of(&self, index: usize) -> VotingState {
        self.states[index]
    }

    pub fn index_of(&self, state: VotingState) -> Option<usize> {
        self.lookup.get(&state).copied()
    }

    /// Like [`StateIndexer::index_of`] but for states known to exist.
    pub fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        self.lookup[&VotingState::new(k, i, j)]
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// True for the orphan states of the full cycle (`i+j = n+1`).
    pub fn is_orphan(&self, state: VotingState) -> bool {
        self.kind == SpaceKind::FullCycle && state.i + state.j == self.n + 1
    }

    /// True for the block states of the full or operational cycle (`k = 2n+1`).
    pub fn is_block(&self, state: VotingState) -> bool {
        matches!(
            self.kind,
            SpaceKind::FullCycle | SpaceKind::OperationalAbsorbing
        ) && state.k == 2 * self.n + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_match_closed_forms() {
        for n in 1..=6 {
            for kind in SpaceKind::ALL {
                let ix = StateIndexer::new(n, kind).unwrap();
                assert_eq!(ix.len(), kind.size(n), "{kind} n={n}");
                assert_eq!(ix.layout().dim(), ix.len());
            }
        }
    }

    #[test]
    fn round_trip_every_index() {
        for n in 1..=6 {
            for kind in SpaceKind::ALL {
                let ix = StateIndexer::new(n, kind).unwrap();
                for m in 0..ix.len() {
                    assert_eq!(ix.index_of(ix.state_of(m)), Some(m));
                }
            }
        }
    }

    #[test]
    fn extended_orders() {
        let orders: Vec<_> = (2..=5)
            .map(|n| SpaceKind::BlockAbsorbing.size(n) + 1)
            .collect();
        assert_eq!(orders, vec![31, 71, 136, 232]);
    }

    #[test]
    fn full_cycle_small() {
        let ix = StateIndexer::new(1, SpaceKind::FullCycle).unwrap();
        assert_eq!(ix.len(), 21);
        // Level sizes (n+2)(n+3)/2 then (n+1)(n+2)/2.
        let layout = ix.layout();
        for k in 0..=2 {
            assert_eq!(layout.level_range(k).len(), 6);
        }
        assert_eq!(layout.level_range(3).len(), 3);
        let orphans = ix.states().iter().filter(|s| ix.is_orphan(**s)).count();
        assert_eq!(orphans, 3 * 3);
    }

    #[test]
    fn level_listing_order() {
        let ix = StateIndexer::new(2, SpaceKind::BlockAbsorbing).unwrap();
        let level0: Vec<_> = ix.states()[..6].iter().map(|s| (s.i, s.j)).collect();
        assert_eq!(level0, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]);
        assert_eq!(ix.state_of(6), VotingState::new(1, 0, 0));
    }

    #[test]
    fn parses_kinds() {
        for kind in SpaceKind::ALL {
            assert_eq!(kind.name().parse::<SpaceKind>().unwrap(), kind);
        }
        assert!(matches!(
            "sideways".parse::<SpaceKind>(),
            Err(Error::UnknownSpaceKind(_))
        ));
    }

    #[test]
    fn extra_phase_layout() {
        let ix = StateIndexer::new(1, SpaceKind::BlockAbsorbing).unwrap();
        let ext = ix.layout().with_extra_phase();
        assert_eq!(ext.dim(), 10);
        assert_eq!(ext.num_levels(), 4);
        assert_eq!(ext.level_range(3), 9..10);
    }
}
