//! The batch-service QBD of transaction packages.
//!
//! Level `0` holds fewer than `b` waiting transactions: its phases are
//! `(m, s)` with `m ∈ 0..b` transactions collected and `s` the phase of the
//! orphan-generation process. Level `ℓ ≥ 1` holds `ℓ` full packages (plus
//! `m` extra transactions) and its phases are `(m, s, t)` with `t` the phase
//! of the block-generation process of the package in service. Phases are
//! numbered `m·dS·dT + s·dT + t`, orphan factor first.
//!
//! An orphan event rolls the package back into the pool, which raises the
//! level by one; a block event removes a package and lowers it by one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, spectral_radius};
use crate::ph::PhaseTypeRep;
use crate::sparse::SparseGenerator;

/// Default refusal threshold for the number of phases per level.
pub const DEFAULT_DIM_CAP: usize = 20_000;

/// The six blocks of the level-independent QBD.
#[derive(Debug, Clone)]
pub struct QbdBlocks {
    pub b: usize,
    pub lambda: f64,
    pub orphan_dim: usize,
    pub block_dim: usize,
    /// `B₁⁽⁰⁾`: moves inside level 0.
    pub b1_0: SparseGenerator,
    /// `A₀⁽⁰⁾`: level 0 → 1.
    pub a0_0: SparseGenerator,
    /// `A₂⁽¹⁾`: level 1 → 0.
    pub a2_1: SparseGenerator,
    /// `A₀`: level ℓ → ℓ+1.
    pub a0: SparseGenerator,
    /// `A₁`: moves inside a level ℓ ≥ 1.
    pub a1: SparseGenerator,
    /// `A₂`: level ℓ+1 → ℓ for ℓ ≥ 1.
    pub a2: SparseGenerator,
    /// The part of `A₀⁽⁰⁾` caused by orphan events (the rest is arrivals).
    pub a0_0_orphan: SparseGenerator,
    /// The part of `A₀` caused by orphan events.
    pub a0_orphan: SparseGenerator,
}

impl QbdBlocks {
    pub fn boundary_dim(&self) -> usize {
        self.b1_0.nrows()
    }

    pub fn level_dim(&self) -> usize {
        self.a1.nrows()
    }
}

fn block_diag(b: usize, blk: &SparseGenerator) -> SparseGenerator {
    SparseGenerator::kron(&SparseGenerator::identity(b), blk)
}

/// `b × b` matrix with ones on the super-diagonal.
fn shift_up(b: usize) -> SparseGenerator {
    SparseGenerator::from_triplets(
        b,
        b,
        (0..b.saturating_sub(1)).map(|m| (m, m + 1, 1.0)),
        crate::sparse::Conservativity::Block,
    )
}

/// `b × b` matrix with a single one at `(b-1, 0)`.
fn wrap(b: usize) -> SparseGenerator {
    SparseGenerator::from_triplets(b, b, [(b - 1, 0, 1.0)], crate::sparse::Conservativity::Block)
}

/// Builds the QBD from the extended block and orphan representations.
pub fn build_qbd_blocks(
    ext_block: &PhaseTypeRep,
    ext_orphan: &PhaseTypeRep,
    lambda: f64,
    b: usize,
    dim_cap: usize,
) -> Result<QbdBlocks> {
    if b == 0 {
        return Err(Error::InvalidArgument("b must be at least 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad arrival rate {lambda}")));
    }
    let (ds, dt) = (ext_orphan.dim(), ext_block.dim());
    let level_dim = b * ds * dt;
    if level_dim > dim_cap {
        return Err(Error::DimensionCap {
            what: format!("QBD phases per level ({b}×{ds}×{dt})"),
            dim: level_dim,
            cap: dim_cap,
        });
    }
    let s = &ext_orphan.subgen;
    let t = &ext_block.subgen;
    let i_s = SparseGenerator::identity(ds);
    let i_t = SparseGenerator::identity(dt);
    let alpha = SparseGenerator::from_triplets(
        1,
        dt,
        ext_block.initial.iter().enumerate().map(|(c, v)| (0, c, *v)),
        crate::sparse::Conservativity::Block,
    );
    let t0 = SparseGenerator::from_triplets(
        dt,
        1,
        ext_block.exit.iter().enumerate().map(|(r, v)| (r, 0, *v)),
        crate::sparse::Conservativity::Block,
    );
    let s0_omega = SparseGenerator::outer(&ext_orphan.exit, &ext_orphan.initial);
    let t0_alpha = SparseGenerator::outer(&ext_block.exit, &ext_block.initial);

    let lam_s = SparseGenerator::identity(ds).scale(lambda);
    let lam_st = SparseGenerator::identity(ds * dt).scale(lambda);

    let b1_0 = block_diag(b, &s.add(&lam_s.scale(-1.0)))
        .add(&SparseGenerator::kron(&shift_up(b), &lam_s));
    let a0_0_orphan = block_diag(b, &SparseGenerator::kron(&s0_omega, &alpha));
    let a0_0 = a0_0_orphan.add(&SparseGenerator::kron(
        &wrap(b),
        &SparseGenerator::kron(&i_s, &alpha).scale(lambda),
    ));
    let a2_1 = block_diag(b, &SparseGenerator::kron(&i_s, &t0));
    let a2 = block_diag(b, &SparseGenerator::kron(&i_s, &t0_alpha));
    let a1 = block_diag(
        b,
        &SparseGenerator::kron_sum(s, t).add(&lam_st.scale(-1.0)),
    )
    .add(&SparseGenerator::kron(&shift_up(b), &lam_st));
    let a0_orphan = block_diag(b, &SparseGenerator::kron(&s0_omega, &i_t));
    let a0 = a0_orphan.add(&SparseGenerator::kron(&wrap(b), &lam_st));

    Ok(QbdBlocks {
        b,
        lambda,
        orphan_dim: ds,
        block_dim: dt,
        b1_0,
        a0_0,
        a2_1,
        a0,
        a1,
        a2,
        a0_0_orphan,
        a0_orphan,
    })
}

/// Mean-drift comparison of arrivals plus orphan returns against service.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `λ + b·δ_S·S̃⁰`.
    pub up_drift: f64,
    /// `b·δ_T·T̃⁰`.
    pub down_drift: f64,
    pub stable: bool,
    /// The same comparison with the stationary vectors swapped
    /// (`λ + b·δ_T·S̃⁰` against `b·δ_S·T̃⁰`), when both vectors exist.
    pub swapped: Option<(f64, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compares the drifts. `δ_T` and `δ_S` are the stationary vectors of
/// `T̃ + T̃⁰α̃` and `S̃ + S̃⁰ω̃`. An orphan process that never absorbs
/// contributes no upward drift.
pub fn stability_check(
    ext_block: &PhaseTypeRep,
    ext_orphan: &PhaseTypeRep,
    lambda: f64,
    b: usize,
) -> Result<StabilityReport> {
    let delta_t = ext_block.restart_stationary()?;
    let delta_s = if ext_orphan.is_proper() {
        Some(ext_orphan.restart_stationary()?)
    } else {
        None
    };
    let bf = b as f64;
    let orphan_rate = delta_s.as_ref().map_or(0.0, |d| dot(d, &ext_orphan.exit));
    let up_drift = lambda + bf * orphan_rate;
    let down_drift = bf * dot(&delta_t, &ext_block.exit);
    let swapped = match &delta_s {
        Some(ds) if ds.len() == delta_t.len() => Some((
            lambda + bf * dot(&delta_t, &ext_orphan.exit),
            bf * dot(ds, &ext_block.exit),
        )),
        _ => None,
    };
    Ok(StabilityReport {
        up_drift,
        down_drift,
        stable: up_drift < down_drift,
        swapped,
    })
}

/// The natural iteration `R_{k+1} = (R_k² A₂ + A₀)(-A₁)^{-1}` from `R₀ = 0`.
///
/// Iterating yields the successive matrices, which increase entrywise.
pub struct RateIteration {
    a0: DMatrix<f64>,
    a2: SparseGenerator,
    neg_a1_inv: DMatrix<f64>,
    current: DMatrix<f64>,
    last_step: f64,
    steps: usize,
}

impl RateIteration {
    pub fn new(blocks: &QbdBlocks) -> Result<Self> {
        let dim = blocks.level_dim();
        let neg_a1 = blocks.a1.scale(-1.0).to_dense();
        let neg_a1_inv = neg_a1
            .try_inverse()
            .ok_or_else(|| Error::Singular("A₁ is singular".into()))?;
        Ok(RateIteration {
            a0: blocks.a0.to_dense(),
            a2: blocks.a2.clone(),
            neg_a1_inv,
            current: DMatrix::zeros(dim, dim),
            last_step: f64::INFINITY,
            steps: 0,
        })
    }

    pub fn current(&self) -> &DMatrix<f64> {
        &self.current
    }

    pub fn last_step(&self) -> f64 {
        self.last_step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances one step and returns `‖R_{k+1} − R_k‖∞`.
    pub fn advance(&mut self) -> f64 {
        let r = &self.current;
        let mut x = self.a0.clone();
        let ra2 = dense_times_sparse(r, &self.a2);
        let cols = nonzero_columns(&ra2);
        if !cols.is_empty() {
            let y = ra2.select_columns(&cols);
            let z = r * y;
            for (k, &c) in cols.iter().enumerate() {
                let mut col = x.column_mut(c);
                col += z.column(k);
            }
        }
        let next = sparse_columns_times(&x, &self.neg_a1_inv);
        let step = inf_norm(&(&next - &self.current));
        self.current = next;
        self.last_step = step;
        self.steps += 1;
        step
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.current
    }
}

impl Iterator for RateIteration {
    type Item = DMatrix<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        self.advance();
        Some(self.current.clone())
    }
}

fn nonzero_columns(m: &DMatrix<f64>) -> Vec<usize> {
    (0..m.ncols())
        .filter(|&c| m.column(c).iter().any(|v| *v != 0.0))
        .collect()
}

/// `D S` for dense `D` and sparse `S`.
fn dense_times_sparse(d: &DMatrix<f64>, s: &SparseGenerator) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d.nrows(), s.ncols());
    for (r, c, v) in s.triplets() {
        let src = d.column(r);
        let mut dst = out.column_mut(c);
        dst.axpy(v, &src, 1.0);
    }
    out
}

/// `X M` skipping the all-zero columns of `X`.
fn sparse_columns_times(x: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = nonzero_columns(x);
    if cols.len() * 4 > x.ncols() * 3 {
        return x * m;
    }
    if cols.is_empty() {
        return DMatrix::zeros(x.nrows(), m.ncols());
    }
    x.select_columns(&cols) * m.select_rows(&cols)
}

/// A converged rate matrix with its diagnostics.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub r: DMatrix<f64>,
    pub iterations: usize,
    pub last_step: f64,
    /// `‖R²A₂ + RA₁ + A₀‖∞`.
    pub residual: f64,
}

/// Minimal non-negative solution of `R²A₂ + RA₁ + A₀ = 0`.
pub fn solve_rate_matrix(blocks: &QbdBlocks, eps: f64, max_iter: usize) -> Result<RateMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let mut it = RateIteration::new(blocks)?;
    while it.steps() < max_iter {
        if it.advance() < eps {
            let residual = rate_residual(blocks, it.current());
            return Ok(RateMatrix {
                iterations: it.steps(),
                last_step: it.last_step(),
                residual,
                r: it.into_matrix(),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: it.steps(),
        last_step: it.last_step(),
        residual: rate_residual(blocks, it.current()),
    })
}

/// Minimal solution by logarithmic reduction: the minimal `G` of
/// `A₂ + A₁G + A₀G² = 0` is built with quadratic convergence, then
/// `R = A₀(−A₁ − A₀G)^{-1}`.
///
/// Unlike the natural iteration this stays fast next to the stability
/// boundary and for transient queues, where `G` is not stochastic.
pub fn solve_rate_matrix_lr(blocks: &QbdBlocks, eps: f64, max_iter: usize) -> Result<RateMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let dim = blocks.level_dim();
    let a0 = blocks.a0.to_dense();
    let a1 = blocks.a1.to_dense();
    let a2 = blocks.a2.to_dense();
    let neg_a1 = -&a1;
    let lu = neg_a1.clone().lu();
    let singular = || Error::Singular("A₁ is singular".into());
    let mut up = lu.solve(&a0).ok_or_else(singular)?;
    let mut down = lu.solve(&a2).ok_or_else(singular)?;
    let mut g = down.clone();
    let mut t = up.clone();
    let identity = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let u = &up * &down + &down * &up;
        let lu_u = (&identity - u).lu();
        let not_invertible = || Error::Singular("I − U is singular in logarithmic reduction".into());
        let next_up = lu_u.solve(&(&up * &up)).ok_or_else(not_invertible)?;
        let next_down = lu_u.solve(&(&down * &down)).ok_or_else(not_invertible)?;
        let step = &t * &next_down;
        last_step = inf_norm(&step);
        g += step;
        t = &t * &next_up;
        up = next_up;
        down = next_down;
        if last_step < eps || inf_norm(&t) < eps {
            // R = A₀M^{-1} with M = −A₁ − A₀G, computed as (M^{-T}A₀ᵀ)ᵀ.
            let m = &neg_a1 - &a0 * &g;
            let r = m
                .transpose()
                .lu()
                .solve(&a0.transpose())
                .ok_or_else(|| Error::Singular("−A₁ − A₀G is singular".into()))?
                .transpose();
            let residual = rate_residual(blocks, &r);
            return Ok(RateMatrix {
                r,
                iterations,
                last_step,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations,
        last_step,
        residual: f64::NAN,
    })
}

/// `‖R²A₂ + RA₁ + A₀‖∞`.
pub fn rate_residual(blocks: &QbdBlocks, r: &DMatrix<f64>) -> f64 {
    let ra2 = dense_times_sparse(r, &blocks.a2);
    let res = r * ra2 + dense_times_sparse(r, &blocks.a1) + blocks.a0.to_dense();
    inf_norm(&res)
}

/// Stationary vector `ψ₀, ψ₁, ψ₁R, ψ₁R², …` of the QBD.
#[derive(Debug, Clone)]
pub struct StationaryQbd {
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    pub r: DMatrix<f64>,
    /// `ψ₁(I−R)^{-1}`: total mass of every phase over the levels ℓ ≥ 1.
    pub tail: Vec<f64>,
}

impl StationaryQbd {
    /// `ψ_ℓ` for `ℓ ≥ 0`.
    pub fn level(&self, level: usize) -> Vec<f64> {
        match level {
            0 => self.psi0.clone(),
            _ => {
                let mut v = DVector::from_column_slice(&self.psi1).transpose();
                for _ in 1..level {
                    v *= &self.r;
                }
                v.iter().copied().collect()
            }
        }
    }

    /// `ψ₀e + ψ₁(I−R)^{-1}e`.
    pub fn mass(&self) -> f64 {
        self.psi0.iter().sum::<f64>() + self.tail.iter().sum::<f64>()
    }
}

/// Solves the boundary equations
/// `ψ₀B₁⁽⁰⁾ + ψ₁A₂⁽¹⁾ = 0`, `ψ₀A₀⁽⁰⁾ + ψ₁(A₁ + RA₂) = 0`
/// with the normalization `ψ₀e + ψ₁(I−R)^{-1}e = 1` in place of the last
/// balance equation.
pub fn solve_boundary(blocks: &QbdBlocks, r: &DMatrix<f64>) -> Result<StationaryQbd> {
    let n0 = blocks.boundary_dim();
    let n1 = blocks.level_dim();
    let dim = n0 + n1;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (n0, n0)).copy_from(&blocks.b1_0.to_dense());
    m.view_mut((0, n0), (n0, n1)).copy_from(&blocks.a0_0.to_dense());
    m.view_mut((n0, 0), (n1, n0)).copy_from(&blocks.a2_1.to_dense());
    let a1_ra2 = blocks.a1.to_dense() + dense_times_sparse(r, &blocks.a2);
    m.view_mut((n0, n0), (n1, n1)).copy_from(&a1_ra2);

    let i_minus_r = DMatrix::identity(n1, n1) - r;
    let lu_tail = i_minus_r.clone().lu();
    let w = lu_tail
        .solve(&DVector::from_element(n1, 1.0))
        .ok_or_else(|| Error::RankDeficient("I − R is singular".into()))?;
    for row in 0..n0 {
        m[(row, dim - 1)] = 1.0;
    }
    for row in 0..n1 {
        m[(n0 + row, dim - 1)] = w[row];
    }
    let mut rhs = DVector::zeros(dim);
    rhs[dim - 1] = 1.0;
    let x = m
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::RankDeficient("boundary system has more than one null direction".into()))?;
    let psi0: Vec<f64> = x.rows(0, n0).iter().copied().collect();
    let psi1: Vec<f64> = x.rows(n0, n1).iter().copied().collect();
    let tail = i_minus_r
        .transpose()
        .lu()
        .solve(&DVector::from_column_slice(&psi1))
        .ok_or_else(|| Error::RankDeficient("I − R is singular".into()))?;
    Ok(StationaryQbd {
        psi0,
        psi1,
        r: r.clone(),
        tail: tail.iter().copied().collect(),
    })
}

/// Spectral radius of a rate matrix.
pub fn rate_spectral_radius(r: &DMatrix<f64>) -> Result<f64> {
    spectral_radius(r)
}

/// Stationary rates of block and orphan events, `(block, orphan)`.
///
/// Block events are the downward moves from every level ℓ ≥ 1; orphan
/// events are the orphan-caused upward moves from every level.
pub fn event_rates(blocks: &QbdBlocks, st: &StationaryQbd) -> (f64, f64) {
    let down = blocks.a2_1.row_sums();
    let orphan0 = blocks.a0_0_orphan.row_sums();
    let orphan = blocks.a0_orphan.row_sums();
    let block_rate = dot(&st.tail, &down);
    let orphan_rate = dot(&st.psi0, &orphan0) + dot(&st.tail, &orphan);
    (block_rate, orphan_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_block_ph, build_orphan_ph};
    use crate::params::SystemParams;

    fn ext(params: &SystemParams) -> (PhaseTypeRep, PhaseTypeRep) {
        let t = build_block_ph(params).unwrap().extend_with_propagation(params.beta).unwrap();
        let s = build_orphan_ph(params).unwrap().extend_with_propagation(params.beta).unwrap();
        (t, s)
    }

    fn mm1(lambda: f64, nu: f64) -> QbdBlocks {
        // One phase per level: arrivals λ, services ν, no orphan events.
        let mut orphan = PhaseTypeRep::exponential(1.0);
        orphan.subgen = SparseGenerator::zeros(1, 1);
        orphan.exit = vec![0.0];
        build_qbd_blocks(&PhaseTypeRep::exponential(nu), &orphan, lambda, 1, 10).unwrap()
    }

    #[test]
    fn mm1_rate_matrix() {
        let blocks = mm1(1.0, 2.0);
        assert_eq!(blocks.a1.to_dense()[(0, 0)], -3.0);
        let rm = solve_rate_matrix(&blocks, 1e-14, 10_000).unwrap();
        assert!((rm.r[(0, 0)] - 0.5).abs() < 1e-12);
        let st = solve_boundary(&blocks, &rm.r).unwrap();
        assert!((st.psi0[0] - 0.5).abs() < 1e-12);
        assert!((st.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduction_matches_natural_iteration() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.9, 0.2, 0.05, 2).unwrap();
        let (t, s) = ext(&p);
        let blocks = build_qbd_blocks(&t, &s, p.lambda, p.b, DEFAULT_DIM_CAP).unwrap();
        let natural = solve_rate_matrix(&blocks, 1e-14, 100_000).unwrap();
        let lr = solve_rate_matrix_lr(&blocks, 1e-15, 100).unwrap();
        assert!(lr.iterations < 40);
        assert!(inf_norm(&(&natural.r - &lr.r)) < 1e-10);
        assert!(lr.residual < 1e-12);
        let mm = solve_rate_matrix_lr(&mm1(1.0, 2.0), 1e-15, 100).unwrap();
        assert!((mm.r[(0, 0)] - 0.5).abs() < 1e-14);
        // Transient: R still has spectral radius one.
        let up = solve_rate_matrix_lr(&mm1(2.0, 1.0), 1e-15, 100).unwrap();
        assert!((up.r[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dimensions_and_conservativity() {
        let p = SystemParams::new(2, 0.1, 0.2, 0.5, 0.7, 0.2, 0.05, 1).unwrap();
        let (t, s) = ext(&p);
        let blocks = build_qbd_blocks(&t, &s, p.lambda, 1, DEFAULT_DIM_CAP).unwrap();
        assert_eq!(blocks.level_dim(), 961);
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.7, 0.2, 0.05, 3).unwrap();
        let (t, s) = ext(&p);
        let blocks = build_qbd_blocks(&t, &s, p.lambda, 3, DEFAULT_DIM_CAP).unwrap();
        let rows = |parts: &[&SparseGenerator]| {
            let mut sums = vec![0.0; parts[0].nrows()];
            for m in parts {
                for (r, v) in m.row_sums().into_iter().enumerate() {
                    sums[r] += v;
                }
            }
            sums
        };
        for v in rows(&[&blocks.a0, &blocks.a1, &blocks.a2]) {
            assert!(v.abs() < 1e-12);
        }
        for v in rows(&[&blocks.b1_0, &blocks.a0_0]) {
            assert!(v.abs() < 1e-12);
        }
        for v in rows(&[&blocks.a2_1, &blocks.a1, &blocks.a0]) {
            assert!(v.abs() < 1e-12);
        }
        assert!(blocks.a0.triplets().all(|(_, _, v)| v >= 0.0));
        assert!(blocks.a2.triplets().all(|(_, _, v)| v >= 0.0));
    }

    #[test]
    fn no_arrivals_no_wrap_block() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.7, 0.2, 0.0, 2).unwrap();
        let (t, s) = ext(&p);
        let blocks = build_qbd_blocks(&t, &s, 0.0, 2, DEFAULT_DIM_CAP).unwrap();
        let ds = blocks.orphan_dim;
        // Rows of sub-level b-1 only carry orphan moves.
        assert_eq!(blocks.a0_0.to_dense(), blocks.a0_0_orphan.to_dense());
        assert!(ds > 0);
    }

    #[test]
    fn cap_is_enforced() {
        let p = SystemParams::new(2, 0.1, 0.2, 0.5, 0.7, 0.2, 0.05, 1).unwrap();
        let (t, s) = ext(&p);
        assert!(matches!(
            build_qbd_blocks(&t, &s, 0.05, 1, 900),
            Err(Error::DimensionCap { dim: 961, .. })
        ));
    }

    #[test]
    fn iterates_increase() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.7, 0.2, 0.05, 1).unwrap();
        let (t, s) = ext(&p);
        let blocks = build_qbd_blocks(&t, &s, p.lambda, 1, DEFAULT_DIM_CAP).unwrap();
        let mut prev = DMatrix::zeros(blocks.level_dim(), blocks.level_dim());
        for r in RateIteration::new(&blocks).unwrap().take(60) {
            assert!((&r - &prev).min() >= -1e-15);
            prev = r;
        }
    }

    #[test]
    fn flow_balance() {
        let p = SystemParams::new(1, 0.1, 0.2, 0.5, 0.9, 0.2, 0.05, 2).unwrap();
        let (t, s) = ext(&p);
        let report = stability_check(&t, &s, p.lambda, p.b).unwrap();
        assert!(report.stable);
        let blocks = build_qbd_blocks(&t, &s, p.lambda, p.b, DEFAULT_DIM_CAP).unwrap();
        let rm = solve_rate_matrix(&blocks, 1e-12, 100_000).unwrap();
        assert!(rm.residual < 1e-9);
        let st = solve_boundary(&blocks, &rm.r).unwrap();
        assert!((st.mass() - 1.0).abs() < 1e-10);
        let (blk, orph) = event_rates(&blocks, &st);
        let b = p.b as f64;
        assert!(((p.lambda + b * orph) - b * blk).abs() / (b * blk) < 1e-8);
    }
}
