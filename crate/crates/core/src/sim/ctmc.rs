//! Long trajectories of a conservative generator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ph::exponential;
use crate::sparse::SparseGenerator;

use super::stats::{stream_rng, BatchMeans, SimEstimate, Welford};

/// Jump table of a generator: off-diagonal moves and total rate per row.
pub(crate) struct JumpTable {
    moves: Vec<Vec<(usize, f64)>>,
    totals: Vec<f64>,
}

impl JumpTable {
    pub(crate) fn new(gen: &SparseGenerator) -> Self {
        let moves: Vec<Vec<(usize, f64)>> = (0..gen.nrows())
            .map(|r| gen.row(r).filter(|&(c, v)| c != r && v > 0.0).collect())
            .collect();
        let totals = moves.iter().map(|m| m.iter().map(|(_, v)| v).sum()).collect();
        JumpTable { moves, totals }
    }

    /// Holding time and next state, or `None` for an absorbing state.
    pub(crate) fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Option<(f64, usize)> {
        let total = self.totals[state];
        if total <= 0.0 {
            return None;
        }
        let hold = exponential(rng, total);
        let mut u = rng.random::<f64>() * total;
        let row = &self.moves[state];
        for &(c, v) in row {
            if u < v {
                return Some((hold, c));
            }
            u -= v;
        }
        Some((hold, row.last().unwrap().0))
    }
}

/// Time-average occupancy of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimate {
    pub occupancy: Vec<SimEstimate>,
    pub horizon: f64,
    pub transitions: u64,
    pub seed: u64,
    /// Per-batch occupancy, `[batch][state]`.
    pub batch_values: Vec<Vec<f64>>,
}

impl OccupancyEstimate {
    /// Occupancy of a set of states, with the batch-means error of the sum.
    pub fn sum_over(&self, states: impl IntoIterator<Item = usize>) -> SimEstimate {
        let states: Vec<usize> = states.into_iter().collect();
        let mut w = Welford::new();
        let batches = self.batch_values.len();
        for b in 0..batches {
            w.push(states.iter().map(|&s| self.batch_values[b][s]).sum());
        }
        w.estimate(self.seed)
    }
}

/// Number of batches used for time-average standard errors.
pub const BATCHES: usize = 40;

/// Simulates one trajectory of `gen` from `start` over `[0, horizon]`.
///
/// The first 10% of the horizon is discarded; the rest is cut into
/// [`BATCHES`] batches whose means give the standard errors.
pub fn simulate_generator(
    gen: &SparseGenerator,
    start: usize,
    horizon: f64,
    seed: u64,
) -> Result<OccupancyEstimate> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if start >= gen.nrows() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    let dim = gen.nrows();
    let table = JumpTable::new(gen);
    let batches = BatchMeans::new(0.1 * horizon, horizon, BATCHES);
    let mut time_in = vec![vec![0.0; dim]; BATCHES];
    let mut rng = stream_rng(seed, 0);
    let (mut state, mut now, mut transitions) = (start, 0.0, 0u64);
    while now < horizon {
        match table.step(state, &mut rng) {
            Some((hold, next)) => {
                batches.split(now, now + hold, |b, d| time_in[b][state] += d);
                now += hold;
                state = next;
                transitions += 1;
            }
            None => {
                batches.split(now, horizon, |b, d| time_in[b][state] += d);
                now = horizon;
            }
        }
    }
    let width = batches.width();
    let batch_values: Vec<Vec<f64>> = time_in
        .into_iter()
        .map(|row| row.into_iter().map(|t| t / width).collect())
        .collect();
    let occupancy = (0..dim)
        .map(|s| {
            let mut w = Welford::new();
            batch_values.iter().for_each(|b| w.push(b[s]));
            w.estimate(seed)
        })
        .collect();
    Ok(OccupancyEstimate {
        occupancy,
        horizon,
        transitions,
        seed,
        batch_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    #[test]
    fn two_state_occupancy() {
        let (a, b) = (1.0, 3.0);
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, a);
        t.push(1, 0, b);
        let gen = t.into_generator(None);
        let est = simulate_generator(&gen, 0, 2e5, 9).unwrap();
        assert!(est.occupancy[0].within(b / (a + b), 4.0));
        let total = est.sum_over([0, 1]);
        assert!((total.mean - 1.0).abs() < 1e-12);
        assert_eq!(est, simulate_generator(&gen, 0, 2e5, 9).unwrap());
    }

    #[test]
    fn absorbing_state_holds() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 5.0);
        let est = simulate_generator(&t.into_generator(None), 0, 100.0, 1).unwrap();
        assert!((est.occupancy[1].mean - 1.0).abs() < 1e-12);
    }
}
