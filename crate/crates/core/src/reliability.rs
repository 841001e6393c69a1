//! Availability and reliability of the voting system.
//!
//! Inherent measures only look at the failed-node count; operational
//! measures follow the full round cycle, where a round that collects `n+1`
//! disapprovals or failures produces an orphan.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generators::{build_birth_death, build_full_cycle_q, build_inherent_absorbing, build_operational_absorbing};
use crate::linalg::stationary_dense;
use crate::params::SystemParams;
use crate::ph::{ph_mean, PhaseTypeRep};
use crate::space::{Layout, SpaceKind, StateIndexer, VotingState};
use crate::sparse::{Conservativity, SparseGenerator};
use crate::structured::StructuredMatrix;
use crate::transient::survival_along;

/// Survival probabilities along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ReliabilityCurve {
    fn along(chain: &PhaseTypeRep, grid: &[f64], tol: f64) -> Result<Self> {
        let (initial, subgen, exit) = (&chain.initial, &chain.subgen, &chain.exit);
        check_grid(grid)?;
        if exit.iter().all(|v| *v == 0.0) {
            return Ok(ReliabilityCurve {
                times: grid.to_vec(),
                values: vec![1.0; grid.len()],
            });
        }
        let mut values = survival_along(initial, subgen, grid, tol);
        // Round-off can leave a last-digit uptick; survival never increases.
        for m in 1..values.len() {
            values[m] = values[m].min(values[m - 1]);
        }
        Ok(ReliabilityCurve {
            times: grid.to_vec(),
            values,
        })
    }

    /// Trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidArgument(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `0` followed by 199 geometric points up to `10·mttff`. An infinite mean
/// falls back to a span of 100 time units.
pub fn default_grid(mttff: f64) -> Vec<f64> {
    let end = if mttff.is_finite() && mttff > 0.0 {
        10.0 * mttff
    } else {
        100.0
    };
    let first = end * 1e-4;
    let ratio = (end / first).powf(1.0 / 198.0);
    let mut grid = Vec::with_capacity(200);
    grid.push(0.0);
    let mut t = first;
    for _ in 0..199 {
        grid.push(t);
        t *= ratio;
    }
    *grid.last_mut().unwrap() = end;
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct InherentAvailability {
    /// Stationary law of the failed-node count, `0..=N`.
    pub zeta: Vec<f64>,
    pub a1: f64,
}

/// Stationary failed-node law from `ζ_k = (N−k+1)θ/(kμ) · ζ_{k−1}`, in log
/// space, and `A₁` from the binomial closed form.
pub fn availability_inherent(params: &SystemParams) -> Result<InherentAvailability> {
    params.validate()?;
    let (n, big_n) = (params.n, params.total_nodes());
    let zeta = if params.theta == 0.0 {
        unit(big_n + 1, 0)
    } else if params.mu == 0.0 {
        unit(big_n + 1, big_n)
    } else {
        let mut logs = vec![0.0; big_n + 1];
        for k in 1..=big_n {
            logs[k] = logs[k - 1]
                + (((big_n - k + 1) as f64 * params.theta) / (k as f64 * params.mu)).ln();
        }
        normalize_logs(&logs)
    };
    let a1 = if params.mu > 0.0 {
        inherent_closed_form(n, params.theta / params.mu)
    } else {
        zeta[..=n].iter().sum()
    };
    Ok(InherentAvailability { zeta, a1 })
}

fn unit(dim: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[at] = 1.0;
    v
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// `A₁ = Σ_{k≤n} C(N,k) ρ^k / (1+ρ)^N`, each term formed in log space.
pub fn inherent_closed_form(n: usize, rho: f64) -> f64 {
    let big_n = 3 * n + 1;
    if rho == 0.0 {
        return 1.0;
    }
    let ln_norm = big_n as f64 * rho.ln_1p();
    let mut ln_binom = 0.0;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((big_n - k + 1) as f64 / k as f64).ln();
        }
        total += (ln_binom + k as f64 * rho.ln() - ln_norm).exp();
    }
    total.min(1.0)
}

/// `A₁` from a dense null-space solve of the birth-death generator.
pub fn availability_inherent_dense(params: &SystemParams) -> Result<f64> {
    let zeta = stationary_dense(&build_birth_death(params)?)?;
    Ok(zeta[..=params.n].iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityResult {
    pub curve: ReliabilityCurve,
    /// Infinite when absorption is not certain.
    pub mttff: f64,
}

fn mean_or_infinite(chain: &PhaseTypeRep, mean: impl FnOnce() -> Result<f64>) -> Result<f64> {
    if chain.is_proper() {
        mean()
    } else {
        Ok(f64::INFINITY)
    }
}

/// `R₁(t)`: probability that no more than `n` nodes have failed throughout
/// `[0, t]`, starting with all nodes working.
pub fn reliability_inherent(
    params: &SystemParams,
    grid: Option<&[f64]>,
    tol: f64,
) -> Result<ReliabilityResult> {
    let chain = build_inherent_absorbing(params)?;
    let mttff = mean_or_infinite(&chain, || ph_mean(&chain))?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_grid(mttff);
            &owned
        }
    };
    let curve = ReliabilityCurve::along(&chain, grid, tol)?;
    Ok(ReliabilityResult { curve, mttff })
}

/// `R₂(t)`: probability that no round has ended as an orphan by time `t`.
pub fn reliability_operational(
    params: &SystemParams,
    grid: Option<&[f64]>,
    tol: f64,
) -> Result<ReliabilityResult> {
    let chain = build_operational_absorbing(params)?;
    let mttff = mean_or_infinite(&chain, || operational_mttff(params, &chain))?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_grid(mttff);
            &owned
        }
    };
    let curve = ReliabilityCurve::along(&chain, grid, tol)?;
    Ok(ReliabilityResult { curve, mttff })
}

/// `−φ(0) S_∇^{-1} e`.
///
/// `S_∇` is the structured matrix `U` plus the rank-one reset term
/// `β·u e₀ᵀ` (`u` marks block states), so one structured solve per side
/// and the Sherman–Morrison formula give the mean.
fn operational_mttff(params: &SystemParams, chain: &PhaseTypeRep) -> Result<f64> {
    let ix = StateIndexer::new(params.n, SpaceKind::OperationalAbsorbing)?;
    let resets: Vec<f64> = ix
        .states()
        .iter()
        .map(|&s| if ix.is_block(s) { chain.subgen.get(ix.idx(s.k, s.i, s.j), 0) } else { 0.0 })
        .collect();
    let without_resets = SparseGenerator::from_triplets(
        chain.dim(),
        chain.dim(),
        chain.subgen.triplets().filter(|&(r, c, _)| !(c == 0 && resets[r] != 0.0)),
        Conservativity::Block,
    );
    let u_mat = StructuredMatrix::new(&without_resets, &chain.layout)?;
    // S = U + u e₀ᵀ, S⁻¹e = U⁻¹e − U⁻¹u (e₀ᵀU⁻¹e) / (1 + e₀ᵀU⁻¹u).
    let y = u_mat.solve(&vec![1.0; chain.dim()])?;
    let z = u_mat.solve(&resets)?;
    let denom = 1.0 + z[0];
    if denom.abs() < 1e-300 {
        return Err(Error::Singular("operational subgenerator is singular".into()));
    }
    let x0 = y[0] - z[0] * y[0] / denom;
    Ok(-x0)
}

/// Stationary law of the full round cycle, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCycleStationary {
    pub n: usize,
    pub levels: Vec<Vec<f64>>,
}

impl FullCycleStationary {
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.concat()
    }

    pub fn get(&self, ix: &StateIndexer, s: VotingState) -> f64 {
        let m = ix.index_of(s).expect("state outside the full cycle");
        let start = ix.layout().level_range(s.k).start;
        self.levels[s.k][m - start]
    }
}

/// The diagonal, upward and reset parts of the full-cycle generator, per level.
struct LevelBlocks {
    diag: Vec<StructuredMatrix>,
    up: Vec<SparseGenerator>,
    /// Column of `Q_{k,0}` at `(0,0,0)` for every level.
    reset: Vec<Vec<f64>>,
    q00: SparseGenerator,
}

fn level_blocks(params: &SystemParams) -> Result<LevelBlocks> {
    let q = build_full_cycle_q(params)?;
    let ix = StateIndexer::new(params.n, SpaceKind::FullCycle)?;
    let layout = ix.layout();
    let levels = layout.num_levels();
    let ranges: Vec<Vec<usize>> = (0..levels).map(|k| layout.level_range(k).collect()).collect();
    let mut diag = Vec::with_capacity(levels);
    let mut up = Vec::with_capacity(levels - 1);
    let mut reset = Vec::with_capacity(levels);
    for k in 0..levels {
        let sub = q.submatrix(&ranges[k], &ranges[k]);
        let lens: Vec<usize> = layout.level_groups(k).map(|g| g.len).collect();
        let local = Layout::from_levels(&[lens]);
        if k > 0 {
            diag.push(StructuredMatrix::new(&sub, &local)?);
        } else {
            // Level 0 holds the resets into (0,0,0), so it is kept as is.
            diag.push(StructuredMatrix::new(&SparseGenerator::zeros(0, 0), &Layout::from_levels(&[]))?);
        }
        if k + 1 < levels {
            up.push(q.submatrix(&ranges[k], &ranges[k + 1]));
        }
        reset.push(ranges[k].iter().map(|&r| q.get(r, 0)).collect());
    }
    Ok(LevelBlocks {
        diag,
        up,
        reset,
        q00: q.submatrix(&ranges[0], &ranges[0]),
    })
}

/// `R_k y = Q_{k,k+1} (−Q_{k+1,k+1}^{-1} y)`.
fn apply_rate(blocks: &LevelBlocks, k: usize, y: &[f64]) -> Result<Vec<f64>> {
    let mut x = blocks.diag[k + 1].solve(y)?;
    x.iter_mut().for_each(|v| *v = -*v);
    Ok(blocks.up[k].mul_vec(&x))
}

/// The matrices `R_k = Q_{k,k+1}(−Q_{k+1,k+1}^{-1})`, `0 ≤ k ≤ 2n`, dense.
pub fn level_rate_matrices(params: &SystemParams) -> Result<Vec<DMatrix<f64>>> {
    let blocks = level_blocks(params)?;
    (0..blocks.up.len())
        .map(|k| {
            let inv = blocks.diag[k + 1].inverse()?;
            Ok(blocks.up[k].to_dense() * (-inv))
        })
        .collect()
}

/// Stationary law `π_{k+1} = π₀R₀⋯R_k` of the full round cycle.
///
/// Only the first column of each `Q_{k,0}` is non-zero, so the boundary
/// matrix `Q_{0,0} + Σ R₀⋯R_{k−1} Q_{k,0}` is `Q_{0,0}` plus one column
/// `c`, and `c` comes from right solves nested from the top level down.
/// The same nesting gives `u = e + Σ R₀⋯R_k e`, and `π₀u = 1` fixes the
/// scale.
pub fn stationary_pi(params: &SystemParams) -> Result<FullCycleStationary> {
    let blocks = level_blocks(params)?;
    let top = blocks.up.len();
    let mut w = blocks.reset[top].clone();
    let mut u = vec![1.0; w.len()];
    for k in (0..top).rev() {
        let rw = apply_rate(&blocks, k, &w)?;
        let ru = apply_rate(&blocks, k, &u)?;
        if k == 0 {
            w = rw;
            u = ru.iter().map(|v| 1.0 + v).collect();
        } else {
            w = rw.iter().zip(&blocks.reset[k]).map(|(a, b)| a + b).collect();
            u = ru.iter().map(|v| 1.0 + v).collect();
        }
    }
    let d0 = blocks.q00.nrows();
    let mut m = blocks.q00.to_dense();
    for r in 0..d0 {
        m[(r, 0)] += w[r];
    }
    // π₀M = 0 with the last equation replaced by π₀u = 1.
    for r in 0..d0 {
        m[(r, d0 - 1)] = u[r];
    }
    let mut rhs = DVector::zeros(d0);
    rhs[d0 - 1] = 1.0;
    let pi0 = m
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::RankDeficient("boundary system of the round cycle".into()))?;
    let mut levels = vec![pi0.iter().copied().collect::<Vec<f64>>()];
    for k in 0..top {
        let flow: Vec<f64> = blocks.up[k].vec_mul(&levels[k]).iter().map(|v| -v).collect();
        levels.push(blocks.diag[k + 1].solve_left(&flow)?);
    }
    Ok(FullCycleStationary {
        n: params.n,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullAvailability {
    pub a2: f64,
    /// `1 − A₂`, summed directly so that it keeps its relative accuracy
    /// when `A₂` rounds to one.
    pub u2: f64,
    pub p_o: f64,
    pub a3: f64,
}

/// `A₂ = 1 − Σ_k π_{k,0,n+1}`, `P_O` = mass of orphan states, `A₃ = 1 − P_O`.
pub fn availability_full(stationary: &FullCycleStationary) -> Result<FullAvailability> {
    let n = stationary.n;
    let ix = StateIndexer::new(n, SpaceKind::FullCycle)?;
    let failed: f64 = (0..=2 * n)
        .map(|k| stationary.get(&ix, VotingState { k, i: 0, j: n + 1 }))
        .sum();
    let p_o: f64 = ix
        .states()
        .iter()
        .filter(|s| ix.is_orphan(**s))
        .map(|&s| stationary.get(&ix, s))
        .sum();
    Ok(FullAvailability {
        a2: (1.0 - failed).clamp(0.0, 1.0),
        u2: failed.clamp(0.0, 1.0),
        p_o: p_o.clamp(0.0, 1.0),
        a3: (1.0 - p_o).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ph::{ph_mean_with, SolveRoute};

    fn params(n: usize, theta: f64, mu: f64) -> SystemParams {
        SystemParams::new(n, theta, mu, 0.5, 0.7, 0.2, 0.1, 2).unwrap()
    }

    #[test]
    fn closed_form_at_unit_ratio() {
        let a = availability_inherent(&params(1, 1.0, 1.0)).unwrap();
        assert!((a.a1 - 5.0 / 16.0).abs() < 1e-15);
        assert!((a.zeta.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_failures_means_always_available() {
        let a = availability_inherent(&params(2, 0.0, 1.0)).unwrap();
        assert_eq!(a.a1, 1.0);
        let a = availability_inherent(&params(2, 1.0, 0.0)).unwrap();
        assert_eq!(a.a1, 0.0);
    }

    #[test]
    fn recursion_matches_binomial() {
        let p = params(3, 0.3, 0.7);
        let a = availability_inherent(&p).unwrap();
        let rho: f64 = 0.3 / 0.7;
        let mut binom = 1.0;
        for k in 0..=10usize {
            if k > 0 {
                binom *= (10 - k + 1) as f64 / k as f64;
            }
            assert!((a.zeta[k] - binom * rho.powi(k as i32) * a.zeta[0]).abs() < 1e-15);
        }
        let dense = availability_inherent_dense(&p).unwrap();
        assert!((a.a1 - dense).abs() < 1e-13);
    }

    #[test]
    fn pure_failure_mean() {
        let r = reliability_inherent(&params(1, 1.0, 0.0), None, 1e-12).unwrap();
        assert!((r.mttff - 7.0 / 12.0).abs() < 1e-14);
        assert_eq!(r.curve.values[0], 1.0);
        assert!(r.curve.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn no_failures_never_fail() {
        let r = reliability_inherent(&params(1, 0.0, 1.0), Some(&[0.0, 1.0, 5.0]), 1e-12).unwrap();
        assert!(r.mttff.is_infinite());
        assert_eq!(r.curve.values, vec![1.0; 3]);
        let p = SystemParams::new(1, 0.0, 1.0, 0.5, 1.0, 0.2, 0.1, 2).unwrap();
        let r = reliability_operational(&p, Some(&[0.0, 1.0, 5.0]), 1e-12).unwrap();
        assert!(r.mttff.is_infinite());
        assert_eq!(r.curve.values, vec![1.0; 3]);
    }

    #[test]
    fn operational_mean_matches_dense() {
        let p = params(2, 0.3, 0.4);
        let chain = build_operational_absorbing(&p).unwrap();
        let dense = ph_mean_with(&chain, SolveRoute::Dense).unwrap();
        let r = reliability_operational(&p, Some(&[0.0, 1.0]), 1e-12).unwrap();
        assert!((r.mttff - dense).abs() / dense < 1e-12);
    }

    #[test]
    fn pi_is_stationary() {
        let p = params(2, 0.3, 0.4);
        let pi = stationary_pi(&p).unwrap();
        let flat = pi.flatten();
        assert!((flat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = build_full_cycle_q(&p).unwrap();
        let res = q.vec_mul(&flat);
        assert!(res.iter().all(|v| v.abs() < 1e-12));
        let dense = stationary_dense(&q).unwrap();
        for (a, b) in flat.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_levels_follow_rate_matrices() {
        let p = params(1, 0.3, 0.4);
        let pi = stationary_pi(&p).unwrap();
        let rs = level_rate_matrices(&p).unwrap();
        for (k, r) in rs.iter().enumerate() {
            let next = DVector::from_column_slice(&pi.levels[k]).transpose() * r;
            for (a, b) in next.iter().zip(&pi.levels[k + 1]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn availability_without_failures() {
        let p = SystemParams::new(1, 0.0, 1.0, 0.5, 1.0, 0.2, 0.1, 2).unwrap();
        let a = availability_full(&stationary_pi(&p).unwrap()).unwrap();
        assert_eq!(a.a2, 1.0);
        assert!(a.p_o.abs() < 1e-15);
        let p = SystemParams::new(1, 0.0, 1.0, 0.5, 0.7, 0.2, 0.1, 2).unwrap();
        let a = availability_full(&stationary_pi(&p).unwrap()).unwrap();
        assert!((a.a2 - 1.0).abs() < 1e-15);
        assert!(a.p_o > 0.0);
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(2.0);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert!((g[199] - 20.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(check_grid(&[0.0, 1.0, 1.0]).is_err());
    }
}
