//! Phase-type distributions: representation, mean, CDF and sampling.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::space::Layout;
use crate::sparse::{Conservativity, SparseGenerator};
use crate::structured::StructuredMatrix;
use crate::transient;

/// Largest order handed to the dense LU route.
pub const DENSE_CAP: usize = 4000;

/// Initial vector, subgenerator and exit vector of an absorbing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeRep {
    pub initial: Vec<f64>,
    pub subgen: SparseGenerator,
    pub exit: Vec<f64>,
    /// Level/group partition the subgenerator respects, if any.
    pub layout: Layout,
}

/// Absorbing chains built by the generator module are phase-type
/// representations of their absorption time.
pub type AbsorbingChain = PhaseTypeRep;

/// How linear systems in the subgenerator are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveRoute {
    /// Structured back substitution, falling back to dense LU when the
    /// matrix does not respect its layout.
    Auto,
    /// Back substitution over the level/group structure.
    Structured,
    /// Dense inverse assembled by the block recursion.
    RgInverse,
    /// Dense LU factorization.
    Dense,
}

impl PhaseTypeRep {
    pub fn new(
        initial: Vec<f64>,
        subgen: SparseGenerator,
        exit: Vec<f64>,
        layout: Layout,
    ) -> Result<Self> {
        let dim = initial.len();
        if subgen.nrows() != dim || subgen.ncols() != dim || exit.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "inconsistent phase-type dimensions: initial {dim}, subgenerator {}x{}, exit {}",
                subgen.nrows(),
                subgen.ncols(),
                exit.len()
            )));
        }
        if layout.dim() != dim {
            return Err(Error::InvalidArgument(format!(
                "layout dimension {} differs from order {dim}",
                layout.dim()
            )));
        }
        let mass: f64 = initial.iter().sum();
        if initial.iter().any(|v| *v < 0.0) || (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "initial vector must be a probability vector (sum {mass})"
            )));
        }
        subgen
            .check_rates(Some(&exit), 1e-12)
            .map_err(Error::InvalidArgument)?;
        Ok(PhaseTypeRep {
            initial,
            subgen: subgen.with_tag(Conservativity::SubConservative),
            exit,
            layout,
        })
    }

    /// Exponential distribution with the given rate (a single phase).
    pub fn exponential(rate: f64) -> Self {
        let subgen = SparseGenerator::from_triplets(1, 1, [(0, 0, -rate)], Conservativity::SubConservative);
        PhaseTypeRep {
            initial: vec![1.0],
            subgen,
            exit: vec![rate],
            layout: Layout::single(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// True when absorption happens with probability one.
    ///
    /// Checked on the transition graph: every phase reachable from the
    /// initial support must be able to reach a phase with positive exit.
    pub fn is_proper(&self) -> bool {
        absorption_certain(&self.initial, &self.subgen, &self.exit)
    }

    /// Appends a propagation phase left at rate `beta`, entered on exit.
    pub fn extend_with_propagation(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "propagation rate must be positive, got {beta}"
            )));
        }
        let d = self.dim();
        let triplets = self
            .subgen
            .triplets()
            .chain(self.exit.iter().enumerate().map(|(r, v)| (r, d, *v)))
            .chain([(d, d, -beta)]);
        let subgen = SparseGenerator::from_triplets(d + 1, d + 1, triplets, Conservativity::SubConservative);
        let mut initial = self.initial.clone();
        initial.push(0.0);
        let mut exit = vec![0.0; d];
        exit.push(beta);
        Ok(PhaseTypeRep {
            initial,
            subgen,
            exit,
            layout: self.layout.with_extra_phase(),
        })
    }

    fn structured(&self) -> Result<StructuredMatrix> {
        StructuredMatrix::new(&self.subgen, &self.layout)
    }

    /// `y = -T^{-1} e`: expected time to absorption from every phase.
    pub fn absorption_times(&self, route: SolveRoute) -> Result<Vec<f64>> {
        if !self.is_proper() {
            return Err(self.improper());
        }
        let ones = vec![1.0; self.dim()];
        let mut y = self.solve_right(&ones, route)?;
        y.iter_mut().for_each(|v| *v = -*v);
        Ok(y)
    }

    fn improper(&self) -> Error {
        Error::ImproperDistribution(
            "absorption is not certain from the initial phases (for the block chain this \
             happens when p = 0: no approvals ever arrive)"
                .into(),
        )
    }

    /// Solves `T x = rhs`.
    pub fn solve_right(&self, rhs: &[f64], route: SolveRoute) -> Result<Vec<f64>> {
        match route {
            SolveRoute::Structured => self.structured()?.solve(rhs),
            SolveRoute::RgInverse => {
                let inv = self.structured()?.inverse()?;
                Ok((inv * DVector::from_column_slice(rhs)).as_slice().to_vec())
            }
            SolveRoute::Dense => dense_solve(&self.subgen, rhs),
            SolveRoute::Auto => match self.structured() {
                Ok(s) => s.solve(rhs),
                Err(Error::NotStructured(_)) => dense_solve(&self.subgen, rhs),
                Err(e) => Err(e),
            },
        }
    }

    /// Solves `x T = rhs`.
    pub fn solve_left(&self, rhs: &[f64], route: SolveRoute) -> Result<Vec<f64>> {
        match route {
            SolveRoute::Dense => dense_solve(&self.subgen.transpose(), rhs),
            SolveRoute::RgInverse => {
                let inv = self.structured()?.inverse()?;
                let x = DVector::from_column_slice(rhs).transpose() * inv;
                Ok(x.iter().copied().collect())
            }
            SolveRoute::Structured => self.structured()?.solve_left(rhs),
            SolveRoute::Auto => match self.structured() {
                Ok(s) => s.solve_left(rhs),
                Err(Error::NotStructured(_)) => dense_solve(&self.subgen.transpose(), rhs),
                Err(e) => Err(e),
            },
        }
    }

    /// Normalized occupation measure `α(-T)^{-1} / E[W]`: the stationary
    /// vector of the chain restarted from `α` on every absorption.
    pub fn restart_stationary(&self) -> Result<Vec<f64>> {
        if !self.is_proper() {
            return Err(self.improper());
        }
        let neg: Vec<f64> = self.initial.iter().map(|v| -v).collect();
        let occ = self.solve_left(&neg, SolveRoute::Auto)?;
        let total: f64 = occ.iter().sum();
        Ok(occ.into_iter().map(|v| v / total).collect())
    }
}

fn dense_solve(m: &SparseGenerator, rhs: &[f64]) -> Result<Vec<f64>> {
    if m.nrows() > DENSE_CAP {
        return Err(Error::DimensionCap {
            what: "dense LU".into(),
            dim: m.nrows(),
            cap: DENSE_CAP,
        });
    }
    let lu = m.to_dense().lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular("dense LU found a zero pivot".into()))
}

/// Dense LU inverse, used as an oracle for the structured inverse.
pub fn dense_inverse(m: &SparseGenerator) -> Result<DMatrix<f64>> {
    m.to_dense()
        .try_inverse()
        .ok_or_else(|| Error::Singular("dense inverse failed".into()))
}

/// Graph test: does every phase reachable from the support of `initial`
/// reach a phase with positive exit rate?
pub fn absorption_certain(initial: &[f64], subgen: &SparseGenerator, exit: &[f64]) -> bool {
    let dim = initial.len();
    let transposed = subgen.transpose();
    let mut can_exit = vec![false; dim];
    let mut queue: VecDeque<usize> = (0..dim).filter(|&r| exit[r] > 0.0).collect();
    for &r in &queue {
        can_exit[r] = true;
    }
    while let Some(c) = queue.pop_front() {
        for (r, v) in transposed.row(c) {
            if r != c && v > 0.0 && !can_exit[r] {
                can_exit[r] = true;
                queue.push_back(r);
            }
        }
    }
    let mut seen = vec![false; dim];
    let mut queue: VecDeque<usize> = (0..dim).filter(|&r| initial[r] > 0.0).collect();
    for &r in &queue {
        seen[r] = true;
    }
    while let Some(r) = queue.pop_front() {
        if !can_exit[r] {
            return false;
        }
        for (c, v) in subgen.row(r) {
            if c != r && v > 0.0 && !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    true
}

/// Mean time to absorption `-α T^{-1} e`, via the structured solver.
pub fn ph_mean(ph: &PhaseTypeRep) -> Result<f64> {
    ph_mean_with(ph, SolveRoute::Auto)
}

pub fn ph_mean_with(ph: &PhaseTypeRep, route: SolveRoute) -> Result<f64> {
    let y = ph.absorption_times(route)?;
    Ok(ph.initial.iter().zip(&y).map(|(a, v)| a * v).sum())
}

/// `P{W ≤ t} = 1 - α exp(Tt) e`, with uniformization error below `tol`.
pub fn ph_cdf(ph: &PhaseTypeRep, t: f64, tol: f64) -> f64 {
    let survival: f64 = transient::evolve(&ph.initial, &ph.subgen, t, tol).iter().sum();
    (1.0 - survival).clamp(0.0, 1.0)
}

/// CDF values along an increasing grid of times.
pub fn ph_cdf_along(ph: &PhaseTypeRep, grid: &[f64], tol: f64) -> Vec<f64> {
    transient::survival_along(&ph.initial, &ph.subgen, grid, tol)
        .into_iter()
        .map(|s| (1.0 - s).clamp(0.0, 1.0))
        .collect()
}

/// Draws one absorption time by simulating the chain.
pub fn ph_sample<R: Rng + ?Sized>(ph: &PhaseTypeRep, rng: &mut R) -> Result<f64> {
    if !ph.is_proper() {
        return Err(ph.improper());
    }
    let mut phase = categorical(rng, ph.initial.iter().copied().enumerate());
    let mut clock = 0.0;
    loop {
        let total = -ph.subgen.diag(phase);
        clock += exponential(rng, total);
        let moves = ph
            .subgen
            .row(phase)
            .filter(|(c, _)| *c != phase)
            .chain(std::iter::once((usize::MAX, ph.exit[phase])));
        match categorical(rng, moves) {
            usize::MAX => return Ok(clock),
            next => phase = next,
        }
    }
}

/// Exponential variate with the given rate.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Picks an outcome with probability proportional to its weight.
pub fn categorical<R: Rng + ?Sized>(
    rng: &mut R,
    weights: impl Iterator<Item = (usize, f64)> + Clone,
) -> usize {
    let total: f64 = weights.clone().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = usize::MAX;
    for (id, w) in weights {
        if w <= 0.0 {
            continue;
        }
        last = id;
        if u < w {
            return id;
        }
        u -= w;
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hypoexponential(rates: &[f64]) -> PhaseTypeRep {
        let d = rates.len();
        let mut t = TripletBuilder::new(d, d);
        for (r, rate) in rates.iter().enumerate().take(d - 1) {
            t.push(r, r + 1, *rate);
        }
        let mut exit = vec![0.0; d];
        exit[d - 1] = rates[d - 1];
        let subgen = t.into_generator(Some(&exit));
        let mut initial = vec![0.0; d];
        initial[0] = 1.0;
        PhaseTypeRep::new(initial, subgen, exit, Layout::single(d)).unwrap()
    }

    #[test]
    fn exponential_cdf_and_mean() {
        let ph = PhaseTypeRep::exponential(2.0);
        assert!((ph_cdf(&ph, 1.0, 1e-14) - (1.0 - (-2.0f64).exp())).abs() < 1e-13);
        assert_eq!(ph_cdf(&ph, 0.0, 1e-12), 0.0);
        assert!((ph_mean(&ph).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn every_route_agrees() {
        let ph = hypoexponential(&[4.0, 3.0, 2.0]);
        for route in [
            SolveRoute::Auto,
            SolveRoute::Structured,
            SolveRoute::RgInverse,
            SolveRoute::Dense,
        ] {
            let m = ph_mean_with(&ph, route).unwrap();
            assert!((m - 13.0 / 12.0).abs() < 1e-14, "{route:?}: {m}");
        }
    }

    #[test]
    fn propagation_adds_its_mean() {
        let ph = hypoexponential(&[1.5, 0.5]);
        let ext = ph.extend_with_propagation(0.25).unwrap();
        assert_eq!(ext.dim(), 3);
        let diff = ph_mean(&ext).unwrap() - ph_mean(&ph).unwrap();
        assert!((diff - 4.0).abs() < 1e-12);
        assert!(ph.extend_with_propagation(0.0).is_err());
    }

    #[test]
    fn one_phase_extension_is_hypoexponential() {
        let ext = PhaseTypeRep::exponential(3.0)
            .extend_with_propagation(2.0)
            .unwrap();
        assert!((ph_mean(&ext).unwrap() - (1.0 / 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn defective_chain_is_reported() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.0);
        let subgen = t.into_generator(Some(&[0.0, 0.0]));
        let ph = PhaseTypeRep::new(vec![1.0, 0.0], subgen, vec![0.0, 0.0], Layout::single(2)).unwrap();
        assert!(!ph.is_proper());
        assert!(matches!(ph_mean(&ph), Err(Error::ImproperDistribution(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let ph = hypoexponential(&[4.0, 3.0, 2.0]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| ph_sample(&ph, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn exponential_sample_mean() {
        let ph = PhaseTypeRep::exponential(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 100_000;
        let mean: f64 = (0..m).map(|_| ph_sample(&ph, &mut rng).unwrap()).sum::<f64>() / m as f64;
        // Standard deviation of the mean is 0.5 / sqrt(m).
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (m as f64).sqrt());
    }

    #[test]
    fn restart_stationary_of_exponential() {
        let ph = hypoexponential(&[1.0, 1.0]);
        let d = ph.restart_stationary().unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
    }
}
