//! Trajectories of the transaction queue built from its QBD blocks.

use crate::error::{Error, Result};
use crate::qbd::QbdBlocks;
use crate::sparse::SparseGenerator;

use super::stats::{stream_rng, BatchMeans, SimEstimate, Welford};
use rand::Rng;

use crate::ph::exponential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Internal,
    /// A transaction joins the pool (with or without completing a package).
    Arrival,
    Orphan,
    Block,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    delta: i8,
    target: usize,
    rate: f64,
    kind: Kind,
}

/// Moves out of every phase for one kind of level.
struct Rows {
    moves: Vec<Vec<Move>>,
    totals: Vec<f64>,
}

impl Rows {
    fn new(dim: usize, parts: &[(&SparseGenerator, i8, &dyn Fn(usize, usize) -> Kind)]) -> Self {
        let mut moves = vec![Vec::new(); dim];
        for (mat, delta, kind) in parts {
            for (r, c, v) in mat.triplets() {
                if (*delta == 0 && r == c) || v <= 0.0 {
                    continue;
                }
                moves[r].push(Move {
                    delta: *delta,
                    target: c,
                    rate: v,
                    kind: kind(r, c),
                });
            }
        }
        let totals = moves.iter().map(|m: &Vec<Move>| m.iter().map(|x| x.rate).sum()).collect();
        Rows { moves, totals }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSimSettings {
    pub horizon: f64,
    pub seed: u64,
    /// Highest level the trajectory may reach.
    pub level_cap: usize,
    pub batches: usize,
}

impl QueueSimSettings {
    pub fn new(horizon: f64, seed: u64) -> Self {
        QueueSimSettings {
            horizon,
            seed,
            level_cap: 100_000,
            batches: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEstimate {
    /// Transactions committed per unit time, `b ×` block events per time.
    pub th: SimEstimate,
    pub block_rate: SimEstimate,
    pub orphan_rate: SimEstimate,
    /// Fraction of time spent at level 0.
    pub eta1: SimEstimate,
    /// Counts over the measured window (after burn-in).
    pub arrivals: u64,
    pub block_events: u64,
    pub orphan_events: u64,
    pub measured_time: f64,
    /// Time fractions per level, over the measured window.
    pub level_occupancy: Vec<f64>,
    pub max_level: usize,
}

/// Simulates the queue from level 0, phase 0.
///
/// The level vector grows as higher levels are visited; leaving
/// `level_cap` is an error. The first 10% of the horizon is burn-in.
pub fn simulate_queue(blocks: &QbdBlocks, settings: &QueueSimSettings) -> Result<QueueEstimate> {
    let horizon = settings.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let (ds, dt, b) = (blocks.orphan_dim, blocks.block_dim, blocks.b);
    let m0 = move |p: usize| p / ds;
    let m1 = move |p: usize| p / (ds * dt);
    let arrival0 = blocks.a0_0.add(&blocks.a0_0_orphan.scale(-1.0));
    let arrival = blocks.a0.add(&blocks.a0_orphan.scale(-1.0));
    let internal0 = move |r: usize, c: usize| if m0(c) != m0(r) { Kind::Arrival } else { Kind::Internal };
    let internal = move |r: usize, c: usize| if m1(c) != m1(r) { Kind::Arrival } else { Kind::Internal };
    let arrive = |_: usize, _: usize| Kind::Arrival;
    let orphan = |_: usize, _: usize| Kind::Orphan;
    let block = |_: usize, _: usize| Kind::Block;
    let level0 = Rows::new(
        blocks.boundary_dim(),
        &[
            (&blocks.b1_0, 0, &internal0),
            (&arrival0, 1, &arrive),
            (&blocks.a0_0_orphan, 1, &orphan),
        ],
    );
    let upper_parts = |down: &SparseGenerator| {
        Rows::new(
            blocks.level_dim(),
            &[
                (down, -1, &block),
                (&blocks.a1, 0, &internal),
                (&arrival, 1, &arrive),
                (&blocks.a0_orphan, 1, &orphan),
            ],
        )
    };
    let level1 = upper_parts(&blocks.a2_1);
    let higher = upper_parts(&blocks.a2);

    let window = BatchMeans::new(0.1 * horizon, horizon, settings.batches);
    let nb = settings.batches;
    let (mut block_counts, mut orphan_counts, mut idle_time) = (vec![0.0; nb], vec![0.0; nb], vec![0.0; nb]);
    let mut level_time: Vec<f64> = vec![0.0];
    let (mut arrivals, mut block_events, mut orphan_events) = (0u64, 0u64, 0u64);
    let mut rng = stream_rng(settings.seed, 0);
    let (mut level, mut phase, mut now, mut max_level) = (0usize, 0usize, 0.0, 0usize);
    while now < horizon {
        let rows = match level {
            0 => &level0,
            1 => &level1,
            _ => &higher,
        };
        let total = rows.totals[phase];
        let hold = if total > 0.0 { exponential(&mut rng, total) } else { f64::INFINITY };
        let end = (now + hold).min(horizon);
        window.split(now, end, |bt, d| {
            if level == 0 {
                idle_time[bt] += d;
            }
            level_time[level] += d;
        });
        now = end;
        if now >= horizon {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let row = &rows.moves[phase];
        let mut chosen = row[row.len() - 1];
        for mv in row {
            if u < mv.rate {
                chosen = *mv;
                break;
            }
            u -= mv.rate;
        }
        let batch = window.batch_of(now);
        match chosen.kind {
            Kind::Block => {
                if let Some(bt) = batch {
                    block_counts[bt] += 1.0;
                    block_events += 1;
                }
            }
            Kind::Orphan => {
                if let Some(bt) = batch {
                    orphan_counts[bt] += 1.0;
                    orphan_events += 1;
                }
            }
            Kind::Arrival => {
                if batch.is_some() {
                    arrivals += 1;
                }
            }
            Kind::Internal => {}
        }
        level = (level as isize + chosen.delta as isize) as usize;
        phase = chosen.target;
        if level > max_level {
            max_level = level;
            if level > settings.level_cap {
                return Err(Error::QueueTruncation {
                    cap: settings.level_cap,
                    max_level,
                    time: now,
                });
            }
            level_time.resize(level + 1, 0.0);
        }
    }
    let width = window.width();
    let estimate = |values: &[f64], scale: f64| {
        let mut w = Welford::new();
        values.iter().for_each(|v| w.push(v * scale / width));
        w.estimate(settings.seed)
    };
    let measured_time = 0.9 * horizon;
    Ok(QueueEstimate {
        th: estimate(&block_counts, b as f64),
        block_rate: estimate(&block_counts, 1.0),
        orphan_rate: estimate(&orphan_counts, 1.0),
        eta1: estimate(&idle_time, 1.0),
        arrivals,
        block_events,
        orphan_events,
        measured_time,
        level_occupancy: level_time.iter().map(|t| t / measured_time).collect(),
        max_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::extended_chains;
    use crate::params::SystemParams;
    use crate::qbd::{build_qbd_blocks, DEFAULT_DIM_CAP};

    fn blocks(p: &SystemParams) -> QbdBlocks {
        let (t, s) = extended_chains(p).unwrap();
        build_qbd_blocks(&t, &s, p.lambda, p.b, DEFAULT_DIM_CAP).unwrap()
    }

    #[test]
    fn nothing_arrives_nothing_leaves() {
        // No arrivals and no orphans: the pool stays empty.
        let p = SystemParams::new(1, 0.0, 0.2, 0.5, 1.0, 0.2, 0.0, 2).unwrap();
        let est = simulate_queue(&blocks(&p), &QueueSimSettings::new(1e4, 3)).unwrap();
        assert_eq!(est.block_events, 0);
        assert_eq!(est.th.mean, 0.0);
        assert_eq!(est.max_level, 0);
    }

    #[test]
    fn cap_is_reported() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.7, 0.2, 5.0, 1).unwrap();
        let mut s = QueueSimSettings::new(1e5, 1);
        s.level_cap = 20;
        assert!(matches!(
            simulate_queue(&blocks(&p), &s),
            Err(Error::QueueTruncation { cap: 20, .. })
        ));
    }

    #[test]
    fn counts_balance() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.9, 0.2, 0.05, 2).unwrap();
        let est = simulate_queue(&blocks(&p), &QueueSimSettings::new(2e5, 5)).unwrap();
        let b = 2.0;
        // Pool content changes by arrivals + b·orphans − b·blocks; it stays
        // small compared with the totals.
        let drift = est.arrivals as f64 + b * est.orphan_events as f64 - b * est.block_events as f64;
        assert!(drift.abs() < 0.02 * (est.arrivals as f64));
        let again = simulate_queue(&blocks(&p), &QueueSimSettings::new(2e5, 5)).unwrap();
        assert_eq!(est, again);
    }
}
