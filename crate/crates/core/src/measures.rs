//! Stationary performance measures of the transaction queue.
//!
//! Two pipelines produce a [`PerformanceReport`]:
//!
//! * [`throughput_exact`] feeds the full extended block and orphan
//!   representations into the QBD,
//! * [`throughput_rate_approx`] first collapses both into exponentials with
//!   the same means, so a level has only `b` phases.
//!
//! Both report the renewal-style rates `r₁ = η₂/E[T̃]`, `r₂ = η₂/E[S̃]` next
//! to the exact stationary event rates, so the two can be compared.

use crate::error::{Error, Result};
use crate::generators::{build_block_ph, build_orphan_ph};
use crate::params::SystemParams;
use crate::ph::{ph_mean, PhaseTypeRep};
use crate::qbd::{
    build_qbd_blocks, event_rates, solve_boundary, solve_rate_matrix, stability_check,
    QbdBlocks, StabilityReport, StationaryQbd, DEFAULT_DIM_CAP,
};
use crate::sparse::SparseGenerator;

/// Numerical knobs shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stopping threshold on `‖R_{k+1} − R_k‖∞`.
    pub eps_r: f64,
    pub max_iter: usize,
    /// Truncation error of uniformization.
    pub tol: f64,
    /// Largest number of phases per QBD level.
    pub dim_cap: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            eps_r: 1e-10,
            max_iter: 100_000,
            tol: 1e-12,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactPh,
    RateApprox,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactPh => "exact-ph",
            Method::RateApprox => "rate-approx",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-ph" | "exact" => Ok(Method::ExactPh),
            "rate-approx" | "approx" => Ok(Method::RateApprox),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport {
    /// Probability that no full package is waiting (`ψ₀e`).
    pub eta1: f64,
    pub eta2: f64,
    /// `η₂ / E[T̃]`.
    pub r1: f64,
    /// `η₂ / E[S̃]`, zero when orphans never happen.
    pub r2: f64,
    /// Blocks per unit time.
    pub th_block: f64,
    /// Transactions per unit time, `b · th_block`.
    pub th: f64,
    pub exact_block_event_rate: f64,
    pub exact_orphan_event_rate: f64,
    pub method: Method,
    /// Set by the rate-approximation path when the queue is unstable; the
    /// server is then always busy and `η₁ = 0`.
    pub saturated: bool,
    /// `E[T̃]`, block generation plus propagation.
    pub mean_block_cycle: f64,
    /// `E[S̃]`, infinite when orphans never happen.
    pub mean_orphan_cycle: f64,
    pub up_drift: f64,
    pub down_drift: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Block and orphan chains, each followed by its propagation phase.
pub fn extended_chains(params: &SystemParams) -> Result<(PhaseTypeRep, PhaseTypeRep)> {
    let t = build_block_ph(params)?.extend_with_propagation(params.beta)?;
    let s = build_orphan_ph(params)?.extend_with_propagation(params.beta)?;
    Ok((t, s))
}

fn mean_or_infinite(ph: &PhaseTypeRep) -> Result<f64> {
    match ph_mean(ph) {
        Ok(m) => Ok(m),
        Err(Error::ImproperDistribution(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Measures from a solved QBD.
///
/// `iterations` and `residual` are filled in by the pipelines.
pub fn stationary_measures(
    stationary: &StationaryQbd,
    blocks: &QbdBlocks,
    ext_block: &PhaseTypeRep,
    ext_orphan: &PhaseTypeRep,
    method: Method,
) -> Result<PerformanceReport> {
    let mean_block_cycle = ph_mean(ext_block)?;
    let mean_orphan_cycle = mean_or_infinite(ext_orphan)?;
    let eta1 = stationary.psi0.iter().sum::<f64>().clamp(0.0, 1.0);
    let eta2 = 1.0 - eta1;
    let r1 = eta2 / mean_block_cycle;
    let r2 = eta2 / mean_orphan_cycle;
    let (block_rate, orphan_rate) = event_rates(blocks, stationary);
    Ok(PerformanceReport {
        eta1,
        eta2,
        r1,
        r2,
        th_block: r1,
        th: blocks.b as f64 * r1,
        exact_block_event_rate: block_rate,
        exact_orphan_event_rate: orphan_rate,
        method,
        saturated: false,
        mean_block_cycle,
        mean_orphan_cycle,
        up_drift: f64::NAN,
        down_drift: f64::NAN,
        iterations: 0,
        residual: 0.0,
    })
}

fn unstable(report: &StabilityReport) -> Error {
    Error::Unstable {
        up_drift: report.up_drift,
        down_drift: report.down_drift,
    }
}

/// Stationary solution of a stable queue with its rate-matrix diagnostics.
#[derive(Debug, Clone)]
pub struct SolvedQueue {
    pub stationary: StationaryQbd,
    pub iterations: usize,
    pub residual: f64,
}

/// Stability verdict, blocks and, when stable, the stationary solution.
pub fn solve_queue(
    ext_block: &PhaseTypeRep,
    ext_orphan: &PhaseTypeRep,
    params: &SystemParams,
    settings: &SolverSettings,
) -> Result<(StabilityReport, QbdBlocks, Option<SolvedQueue>)> {
    let stability = stability_check(ext_block, ext_orphan, params.lambda, params.b)?;
    let blocks = build_qbd_blocks(ext_block, ext_orphan, params.lambda, params.b, settings.dim_cap)?;
    if !stability.stable {
        return Ok((stability, blocks, None));
    }
    let rm = solve_rate_matrix(&blocks, settings.eps_r, settings.max_iter)?;
    let st = solve_boundary(&blocks, &rm.r)?;
    let solved = SolvedQueue {
        stationary: st,
        iterations: rm.iterations,
        residual: rm.residual,
    };
    Ok((stability, blocks, Some(solved)))
}

/// Throughput from the full phase-type QBD.
pub fn throughput_exact(params: &SystemParams, settings: &SolverSettings) -> Result<PerformanceReport> {
    params.validate()?;
    let (t, s) = extended_chains(params)?;
    let (stability, blocks, solved) = solve_queue(&t, &s, params, settings)?;
    let SolvedQueue { stationary: st, iterations, residual } = solved.ok_or_else(|| unstable(&stability))?;
    let mut report = stationary_measures(&st, &blocks, &t, &s, Method::ExactPh)?;
    report.up_drift = stability.up_drift;
    report.down_drift = stability.down_drift;
    report.iterations = iterations;
    report.residual = residual;
    Ok(report)
}

/// An exponential phase of rate `rate`, or a phase that never exits when
/// `rate` is zero.
fn single_phase(rate: f64) -> PhaseTypeRep {
    if rate > 0.0 {
        return PhaseTypeRep::exponential(rate);
    }
    let mut ph = PhaseTypeRep::exponential(1.0);
    ph.subgen = SparseGenerator::zeros(1, 1);
    ph.exit = vec![0.0];
    ph
}

/// Throughput with the block and orphan cycles replaced by exponentials of
/// rates `r_B = 1/E[T̃]` and `r_O = 1/E[S̃]`.
///
/// Unstable parameters do not fail here: the report is marked
/// `saturated`, with the server always busy (`η₁ = 0`, `TH = b·r_B`).
pub fn throughput_rate_approx(
    params: &SystemParams,
    settings: &SolverSettings,
) -> Result<PerformanceReport> {
    params.validate()?;
    let (t, s) = extended_chains(params)?;
    let mean_block_cycle = ph_mean(&t)?;
    let mean_orphan_cycle = mean_or_infinite(&s)?;
    let rate_b = 1.0 / mean_block_cycle;
    let rate_o = 1.0 / mean_orphan_cycle;
    let (t1, s1) = (single_phase(rate_b), single_phase(rate_o));
    let (stability, blocks, solved) = solve_queue(&t1, &s1, params, settings)?;
    let mut report = match solved {
        Some(SolvedQueue { stationary: st, iterations, residual }) => {
            let mut r = stationary_measures(&st, &blocks, &t1, &s1, Method::RateApprox)?;
            r.iterations = iterations;
            r.residual = residual;
            r
        }
        None => {
            let bf = params.b as f64;
            PerformanceReport {
                eta1: 0.0,
                eta2: 1.0,
                r1: rate_b,
                r2: rate_o,
                th_block: rate_b,
                th: bf * rate_b,
                exact_block_event_rate: rate_b,
                exact_orphan_event_rate: rate_o,
                method: Method::RateApprox,
                saturated: true,
                mean_block_cycle,
                mean_orphan_cycle,
                up_drift: f64::NAN,
                down_drift: f64::NAN,
                iterations: 0,
                residual: 0.0,
            }
        }
    };
    report.mean_block_cycle = mean_block_cycle;
    report.mean_orphan_cycle = mean_orphan_cycle;
    report.up_drift = stability.up_drift;
    report.down_drift = stability.down_drift;
    Ok(report)
}

/// Dispatches on `method`.
pub fn throughput(
    params: &SystemParams,
    method: Method,
    settings: &SolverSettings,
) -> Result<PerformanceReport> {
    match method {
        Method::ExactPh => throughput_exact(params, settings),
        Method::RateApprox => throughput_rate_approx(params, settings),
    }
}
