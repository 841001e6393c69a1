//! Subcommand bodies. Each builds a [`Report`] and hands it to the emitter.

use pbft_markov::generators::{
    build_birth_death, build_block_ph, build_full_cycle_q, build_inherent_absorbing,
    build_operational_absorbing, build_orphan_ph,
};
use pbft_markov::measures::{extended_chains, throughput, Method, PerformanceReport};
use pbft_markov::ph::{ph_cdf_along, ph_mean, PhaseTypeRep};
use pbft_markov::qbd::build_qbd_blocks;
use pbft_markov::reliability::{
    availability_full, availability_inherent, default_grid, reliability_inherent,
    reliability_operational, stationary_pi,
};
use pbft_markov::sim::{estimate_round_stats, simulate_generator, simulate_queue, QueueSimSettings, SimEstimate};
use pbft_markov::{SpaceKind, StateIndexer};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::grid::parse_grid;
use crate::output::{emit, Cell, Report};
use crate::{Chain, CliError, Command, Common, Measure, ReliabilityKind, SimTarget};

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ph { common, chain, extended, grid } => {
            let config = load(&common)?;
            let report = ph_report(&config, chain, extended, grid.as_deref())?;
            finish(&common, &config, config.method_or(Method::ExactPh), &report)
        }
        Command::Throughput { common, method } => {
            let config = load(&common)?;
            let method = method.map(Method::from).unwrap_or(config.method_or(Method::ExactPh));
            let perf = throughput(&config.params, method, &config.solver)?;
            let mut report = Report::default();
            for (k, v) in performance_cells(&perf) {
                report.scalar(k, v);
            }
            finish(&common, &config, method, &report)
        }
        Command::Availability { common } => {
            let config = load(&common)?;
            let report = availability_report(&config)?;
            finish(&common, &config, config.method_or(Method::ExactPh), &report)
        }
        Command::Reliability { common, kind, grid } => {
            let config = load(&common)?;
            let report = reliability_report(&config, kind, grid.as_deref())?;
            finish(&common, &config, config.method_or(Method::ExactPh), &report)
        }
        Command::Stationary { common } => {
            let config = load(&common)?;
            let report = stationary_report(&config)?;
            finish(&common, &config, config.method_or(Method::ExactPh), &report)
        }
        Command::Simulate { common, target } => {
            let config = load(&common)?;
            let report = simulate_report(&config, target)?;
            finish(&common, &config, config.method_or(Method::ExactPh), &report)
        }
        Command::Sweep { common, param, grid, param2, grid2, measure, method } => {
            let config = load(&common)?;
            let method = method.map(Method::from).unwrap_or(config.method_or(Method::RateApprox));
            let first = (param, parse_grid(&grid)?);
            let second = match (param2, grid2) {
                (Some(p), Some(g)) => Some((p, parse_grid(&g)?)),
                _ => None,
            };
            let report = sweep_report(&config, &first, second.as_ref(), measure, method)?;
            finish(&common, &config, method, &report)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(common.config.as_deref(), &common.overrides)
}

fn finish(common: &Common, config: &RunConfig, method: Method, report: &Report) -> Result<(), CliError> {
    emit(report, config, method, common.format, common.output.as_deref())
}

fn mean_or_infinite(ph: &PhaseTypeRep) -> Result<f64, CliError> {
    if ph.is_proper() {
        Ok(ph_mean(ph)?)
    } else {
        Ok(f64::INFINITY)
    }
}

fn grid_or_default(grid: Option<&str>, mean: f64) -> Result<Vec<f64>, CliError> {
    match grid {
        Some(g) => parse_grid(g),
        None => Ok(default_grid(mean)),
    }
}

fn ph_report(config: &RunConfig, chain: Chain, extended: bool, grid: Option<&str>) -> Result<Report, CliError> {
    let p = &config.params;
    let mut ph = match chain {
        Chain::Block => build_block_ph(p)?,
        Chain::Orphan => build_orphan_ph(p)?,
        Chain::Inherent => build_inherent_absorbing(p)?,
        Chain::Operational => build_operational_absorbing(p)?,
    };
    if extended {
        if !matches!(chain, Chain::Block | Chain::Orphan) {
            return Err(CliError::Input("--extended applies to the block and orphan chains".into()));
        }
        ph = ph.extend_with_propagation(p.beta)?;
    }
    let mean = mean_or_infinite(&ph)?;
    let grid = grid_or_default(grid, mean)?;
    if grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Input("time grid must start at 0 and increase".into()));
    }
    let cdf = ph_cdf_along(&ph, &grid, config.solver.tol);
    let mut report = Report::default();
    report.scalar("chain", format!("{chain:?}").to_lowercase().as_str());
    report.scalar("extended", extended);
    report.scalar("dim", ph.dim());
    report.scalar("mean", mean);
    report.columns = vec!["t".into(), "cdf".into()];
    report.rows = grid.iter().zip(&cdf).map(|(t, c)| vec![Cell::Float(*t), Cell::Float(*c)]).collect();
    Ok(report)
}

/// Columns of a throughput report, in output order.
pub fn performance_cells(r: &PerformanceReport) -> Vec<(&'static str, Cell)> {
    vec![
        ("method", r.method.as_str().into()),
        ("saturated", r.saturated.into()),
        ("eta1", r.eta1.into()),
        ("eta2", r.eta2.into()),
        ("r1", r.r1.into()),
        ("r2", r.r2.into()),
        ("th_block", r.th_block.into()),
        ("th", r.th.into()),
        ("exact_block_event_rate", r.exact_block_event_rate.into()),
        ("exact_orphan_event_rate", r.exact_orphan_event_rate.into()),
        ("mean_block_cycle", r.mean_block_cycle.into()),
        ("mean_orphan_cycle", r.mean_orphan_cycle.into()),
        ("up_drift", r.up_drift.into()),
        ("down_drift", r.down_drift.into()),
        ("iterations", r.iterations.into()),
        ("residual", r.residual.into()),
    ]
}

fn availability_cells(config: &RunConfig) -> Result<(Vec<(&'static str, Cell)>, Vec<f64>), CliError> {
    let inherent = availability_inherent(&config.params)?;
    let full = availability_full(&stationary_pi(&config.params)?)?;
    Ok((
        vec![
            ("a1", inherent.a1.into()),
            ("a2", full.a2.into()),
            ("u2", full.u2.into()),
            ("a3", full.a3.into()),
            ("p_o", full.p_o.into()),
        ],
        inherent.zeta,
    ))
}

fn availability_report(config: &RunConfig) -> Result<Report, CliError> {
    let (cells, zeta) = availability_cells(config)?;
    let mut report = Report::default();
    for (k, v) in cells {
        report.scalar(k, v);
    }
    report.columns = vec!["zeta".into()];
    report.rows = zeta.into_iter().map(|z| vec![Cell::Float(z)]).collect();
    Ok(report)
}

fn reliability_report(config: &RunConfig, kind: ReliabilityKind, grid: Option<&str>) -> Result<Report, CliError> {
    let grid = grid.map(parse_grid).transpose()?;
    let tol = config.solver.tol;
    let (result, name) = match kind {
        ReliabilityKind::Inherent => (reliability_inherent(&config.params, grid.as_deref(), tol)?, "1"),
        ReliabilityKind::Operational => (reliability_operational(&config.params, grid.as_deref(), tol)?, "2"),
    };
    let rows = result
        .curve
        .times
        .iter()
        .zip(&result.curve.values)
        .map(|(t, v)| vec![Cell::Float(*t), Cell::Float(*v)])
        .collect();
    let mut report = Report {
        columns: vec!["t".into(), format!("r{name}")],
        rows,
        ..Report::default()
    };
    report.scalar(&format!("mttff{name}"), result.mttff);
    Ok(report)
}

fn stationary_report(config: &RunConfig) -> Result<Report, CliError> {
    let pi = stationary_pi(&config.params)?;
    let flat = pi.flatten();
    let q = build_full_cycle_q(&config.params)?;
    let residual = q.vec_mul(&flat).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ix = StateIndexer::new(config.params.n, SpaceKind::FullCycle)?;
    let mut report = Report::default();
    report.scalar("dim", flat.len());
    report.scalar("mass", flat.iter().sum::<f64>());
    report.scalar("residual", residual);
    report.columns = ["k", "i", "j", "pi"].map(String::from).to_vec();
    report.rows = ix
        .states()
        .iter()
        .zip(&flat)
        .map(|(s, v)| vec![Cell::from(s.k), Cell::from(s.i), Cell::from(s.j), Cell::Float(*v)])
        .collect();
    Ok(report)
}

fn push_estimate(report: &mut Report, key: &str, est: Option<SimEstimate>) {
    let (mean, se) = est.map_or((f64::NAN, f64::NAN), |e| (e.mean, e.std_error));
    report.scalar(key, mean);
    report.scalar(&format!("{key}_se"), se);
}

fn simulate_report(config: &RunConfig, target: SimTarget) -> Result<Report, CliError> {
    let p = &config.params;
    let mut report = Report::default();
    report.scalar("target", format!("{target:?}").to_lowercase().as_str());
    match target {
        SimTarget::Round => {
            let stats = estimate_round_stats(p, config.reps, config.seed);
            push_estimate(&mut report, "mean_wb", stats.mean_wb);
            push_estimate(&mut report, "mean_wo", stats.mean_wo);
            push_estimate(&mut report, "p_block", Some(stats.p_block));
            push_estimate(&mut report, "cond_wb", stats.cond_wb);
            push_estimate(&mut report, "cond_wo", stats.cond_wo);
            report.scalar("censored", stats.censored as usize);
            report.scalar("analytic_mean_wb", mean_or_infinite(&build_block_ph(p)?)?);
            report.scalar("analytic_mean_wo", mean_or_infinite(&build_orphan_ph(p)?)?);
        }
        SimTarget::Inherent => {
            let gen = build_birth_death(p)?;
            let est = simulate_generator(&gen, 0, config.horizon, config.seed)?;
            push_estimate(&mut report, "a1", Some(est.sum_over(0..=p.n)));
            report.scalar("transitions", est.transitions as usize);
            report.scalar("analytic_a1", availability_inherent(p)?.a1);
        }
        SimTarget::Cycle => {
            let q = build_full_cycle_q(p)?;
            let ix = StateIndexer::new(p.n, SpaceKind::FullCycle)?;
            let est = simulate_generator(&q, 0, config.horizon, config.seed)?;
            let orphans: Vec<usize> = (0..ix.len()).filter(|&m| ix.is_orphan(ix.state_of(m))).collect();
            push_estimate(&mut report, "p_o", Some(est.sum_over(orphans)));
            push_estimate(&mut report, "pi_000", Some(est.occupancy[0]));
            report.scalar("transitions", est.transitions as usize);
            let pi = stationary_pi(p)?;
            report.scalar("analytic_p_o", availability_full(&pi)?.p_o);
            report.scalar("analytic_pi_000", pi.levels[0][0]);
        }
        SimTarget::Queue => {
            let (t, s) = extended_chains(p)?;
            let blocks = build_qbd_blocks(&t, &s, p.lambda, p.b, config.solver.dim_cap)?;
            let est = simulate_queue(&blocks, &QueueSimSettings::new(config.horizon, config.seed))?;
            push_estimate(&mut report, "th", Some(est.th));
            push_estimate(&mut report, "eta1", Some(est.eta1));
            push_estimate(&mut report, "orphan_rate", Some(est.orphan_rate));
            report.scalar("block_events", est.block_events as usize);
            report.scalar("orphan_events", est.orphan_events as usize);
            report.scalar("arrivals", est.arrivals as usize);
            report.scalar("max_level", est.max_level);
        }
    }
    Ok(report)
}

fn measure_cells(config: &RunConfig, measure: Measure, method: Method) -> Result<Vec<(&'static str, Cell)>, CliError> {
    match measure {
        Measure::Throughput => Ok(performance_cells(&throughput(&config.params, method, &config.solver)?)),
        Measure::Availability => Ok(availability_cells(config)?.0),
        Measure::Reliability => {
            let grid = [0.0];
            let tol = config.solver.tol;
            Ok(vec![
                ("mttff1", reliability_inherent(&config.params, Some(&grid), tol)?.mttff.into()),
                ("mttff2", reliability_operational(&config.params, Some(&grid), tol)?.mttff.into()),
            ])
        }
    }
}

/// Placeholder cells for a failed grid point, same columns as a success.
fn failed_cells(measure: Measure, method: Method) -> Vec<(&'static str, Cell)> {
    let names: &[&'static str] = match measure {
        Measure::Throughput => &[
            "method", "saturated", "eta1", "eta2", "r1", "r2", "th_block", "th",
            "exact_block_event_rate", "exact_orphan_event_rate", "mean_block_cycle",
            "mean_orphan_cycle", "up_drift", "down_drift", "iterations", "residual",
        ],
        Measure::Availability => &["a1", "a2", "u2", "a3", "p_o"],
        Measure::Reliability => &["mttff1", "mttff2"],
    };
    names
        .iter()
        .map(|&k| match k {
            "method" => (k, Cell::from(method.as_str())),
            _ => (k, Cell::Float(f64::NAN)),
        })
        .collect()
}

fn sweep_report(
    config: &RunConfig,
    first: &(String, Vec<f64>),
    second: Option<&(String, Vec<f64>)>,
    measure: Measure,
    method: Method,
) -> Result<Report, CliError> {
    // Reject unknown names and bad values before any work.
    for (name, values) in std::iter::once(first).chain(second) {
        for v in values {
            config.with_param(name, *v)?;
        }
    }
    let points: Vec<Vec<f64>> = match second {
        None => first.1.iter().map(|v| vec![*v]).collect(),
        Some((_, g2)) => first.1.iter().flat_map(|a| g2.iter().map(move |b| vec![*a, *b])).collect(),
    };
    let mut names = vec![first.0.clone()];
    if let Some((name, _)) = second {
        names.push(name.clone());
    }
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|point| {
            let mut c = config.clone();
            for (name, v) in names.iter().zip(point) {
                c = c.with_param(name, *v)?;
            }
            let (status, cells) = match measure_cells(&c, measure, method) {
                Ok(cells) => ("ok".to_string(), cells),
                Err(e) => (e.to_string(), failed_cells(measure, method)),
            };
            let mut row: Vec<Cell> = point.iter().map(|v| Cell::Float(*v)).collect();
            row.push(Cell::Text(status));
            row.extend(cells.into_iter().map(|(_, v)| v));
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    let mut columns = names;
    columns.push("status".into());
    columns.extend(failed_cells(measure, method).into_iter().map(|(k, _)| k.to_string()));
    Ok(Report {
        columns,
        rows,
        ..Report::default()
    })
}
