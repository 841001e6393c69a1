//! End-to-end acceptance checks, run without the test harness so that every
//! criterion prints its `criterion N ...: PASS|FAIL` line. The process exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;

use pbft_markov::generators::{
    build_birth_death, build_block_ph, build_full_cycle_q, build_orphan_ph,
};
use pbft_markov::linalg::stationary_dense;
use pbft_markov::measures::{extended_chains, throughput_exact, throughput_rate_approx, SolverSettings};
use pbft_markov::qbd::{
    build_qbd_blocks, event_rates, rate_spectral_radius, solve_boundary, solve_rate_matrix,
    solve_rate_matrix_lr, stability_check, QbdBlocks, DEFAULT_DIM_CAP,
};
use pbft_markov::reliability::{
    availability_full, availability_inherent, availability_inherent_dense, inherent_closed_form,
    reliability_inherent, stationary_pi,
};
use pbft_markov::sim::{
    estimate_round_stats, simulate_generator, simulate_queue, stream_rng, QueueSimSettings,
    SimEstimate,
};
use pbft_markov::space::{SpaceKind, StateIndexer};
use pbft_markov::{ph_mean, PhaseTypeRep, SolveRoute, SparseGenerator, SystemParams};

fn verdict(id: u32, name: &str, pass: bool, started: Instant, budget: Duration, detail: &str) {
    let took = started.elapsed();
    let pass_all = pass && took < budget;
    println!(
        "criterion {id} {name}: {} ({detail}; {:.2}s of {}s)",
        if pass_all { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {id} {name}: {detail}");
    assert!(took < budget, "criterion {id} {name}: took {took:?}, budget {budget:?}");
}

#[allow(clippy::too_many_arguments)]
fn params(n: usize, theta: f64, mu: f64, gamma: f64, p: f64, beta: f64, lambda: f64, b: usize) -> SystemParams {
    SystemParams::new(n, theta, mu, gamma, p, beta, lambda, b).unwrap()
}

/// The running example with a stable queue.
fn base(n: usize) -> SystemParams {
    params(n, 0.1, 0.2, 0.5, 0.9, 0.2, 0.05, 2)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1_dimensions() {
    let started = Instant::now();
    let mut orders = Vec::new();
    for n in 2..=5 {
        let (t, s) = extended_chains(&base(n)).unwrap();
        assert_eq!(t.dim(), s.dim());
        orders.push(t.dim());
    }
    let (t, s) = extended_chains(&base(2)).unwrap();
    let kron = SparseGenerator::kron_sum(&s.subgen, &t.subgen).nrows();
    let blocks = build_qbd_blocks(&t, &s, 0.05, 1, DEFAULT_DIM_CAP).unwrap();
    let pass = orders[..3] == [31, 71, 136] && kron == 961 && blocks.level_dim() == 961 && orders[3] == 232;
    verdict(
        1,
        "dimensions",
        pass,
        started,
        Duration::from_secs(1),
        &format!("orders n=2..5 {orders:?}, Kronecker sum {kron}, level {}", blocks.level_dim()),
    );
}

fn criterion_2_closed_form_block_mean() {
    let started = Instant::now();
    let p = params(1, 0.0, 0.2, 1.0, 1.0, 0.2, 0.05, 1);
    let chain = build_block_ph(&p).unwrap();
    let exact = 1.0 / 4.0 + 1.0 / 3.0 + 1.0 / 2.0;
    let rg = pbft_markov::ph::ph_mean_with(&chain, SolveRoute::RgInverse).unwrap();
    let dense = pbft_markov::ph::ph_mean_with(&chain, SolveRoute::Dense).unwrap();
    let err = (rg - exact).abs().max((dense - exact).abs());
    verdict(
        2,
        "block mean 13/12",
        err < 1e-12,
        started,
        Duration::from_secs(1),
        &format!("RG {rg:.15}, dense {dense:.15}, max error {err:.1e}"),
    );
}

fn criterion_3_inherent_availability() {
    let started = Instant::now();
    let mut rng = stream_rng(3, 0);
    let mut worst = 0.0f64;
    let mut worst_closed = 0.0f64;
    for n in 1..=5 {
        for _ in 0..20 {
            let rho = 10f64.powf(rng.random_range(-1.5..0.7));
            let p = params(n, rho, 1.0, 0.5, 0.7, 0.2, 0.05, 1);
            let recursion: f64 = availability_inherent(&p).unwrap().zeta[..=n].iter().sum();
            worst = worst.max((recursion - availability_inherent_dense(&p).unwrap()).abs());
            worst_closed = worst_closed.max((recursion - inherent_closed_form(n, rho)).abs());
        }
    }
    let unit = availability_inherent(&params(1, 1.0, 1.0, 0.5, 0.7, 0.2, 0.05, 1)).unwrap();
    let unit_err = (unit.a1 - 5.0 / 16.0).abs().max((unit.zeta[..=1].iter().sum::<f64>() - 5.0 / 16.0).abs());
    verdict(
        3,
        "inherent availability",
        worst < 1e-12 && worst_closed < 1e-12 && unit_err < 1e-14,
        started,
        Duration::from_secs(5),
        &format!(
            "100 draws: recursion vs null space {worst:.1e}, vs closed form {worst_closed:.1e}; rho=1: error {unit_err:.1e}"
        ),
    );
}

fn quadrature_error(p: &SystemParams) -> (f64, f64) {
    let mttff = reliability_inherent(p, Some(&[0.0, 1.0]), 1e-14).unwrap().mttff;
    let end = 60.0 * mttff;
    let points = 40_001;
    let grid: Vec<f64> = (0..points).map(|m| end * m as f64 / (points - 1) as f64).collect();
    let curve = reliability_inherent(p, Some(&grid), 1e-14).unwrap().curve;
    (mttff, rel(curve.integral(), mttff))
}

fn criterion_4_mean_time_to_first_failure() {
    let started = Instant::now();
    let pure = params(1, 1.0, 0.0, 0.5, 0.7, 0.2, 0.05, 1);
    let (mttff, q_pure) = quadrature_error(&pure);
    let exact_err = (mttff - 7.0 / 12.0).abs();
    let (repair_mttff, q_repair) = quadrature_error(&params(2, 0.3, 0.5, 0.5, 0.7, 0.2, 0.05, 1));
    verdict(
        4,
        "mean time to first failure",
        exact_err < 1e-12 && q_pure < 1e-4 && q_repair < 1e-4,
        started,
        Duration::from_secs(5),
        &format!(
            "7/12 error {exact_err:.1e}; quadrature rel. error {q_pure:.1e}, with repair {q_repair:.1e} (mean {repair_mttff:.4})"
        ),
    );
}

fn criterion_5_product_form_stationary_law() {
    let started = Instant::now();
    let p = params(2, 0.3, 0.4, 0.5, 0.7, 0.2, 0.05, 1);
    let pi = stationary_pi(&p).unwrap().flatten();
    let q = build_full_cycle_q(&p).unwrap();
    let dense = stationary_dense(&q).unwrap();
    let diff = max_abs_diff(&pi, &dense);
    let residual = q.vec_mul(&pi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    verdict(
        5,
        "product-form stationary law",
        diff < 1e-10 && residual < 1e-9,
        started,
        Duration::from_secs(10),
        &format!("{} states, vs null space {diff:.1e}, residual {residual:.1e}", pi.len()),
    );
}

/// One phase per level: arrivals `lambda`, services `nu`, no orphans.
fn mm1(lambda: f64, nu: f64) -> QbdBlocks {
    let mut never = PhaseTypeRep::exponential(1.0);
    never.subgen = SparseGenerator::zeros(1, 1);
    never.exit = vec![0.0];
    build_qbd_blocks(&PhaseTypeRep::exponential(nu), &never, lambda, 1, 10).unwrap()
}

fn criterion_6_queue_solution() {
    let started = Instant::now();
    let mut mm1_err = 0.0f64;
    for (lambda, nu) in [(1.0, 2.0), (0.3, 1.7), (0.95, 1.0)] {
        let rm = solve_rate_matrix(&mm1(lambda, nu), 1e-15, 1_000_000).unwrap();
        mm1_err = mm1_err.max((rm.r[(0, 0)] - lambda / nu).abs());
    }
    let mut residual = 0.0f64;
    let mut mass = 0.0f64;
    let mut balance = 0.0f64;
    for b in 1..=3 {
        let p0 = params(1, 0.1, 0.2, 0.5, 0.9, 0.2, 0.0, b);
        let (t, s) = extended_chains(&p0).unwrap();
        let idle = stability_check(&t, &s, 0.0, b).unwrap();
        // Half of the spare service capacity arrives as new transactions.
        let lambda = 0.5 * (idle.down_drift - idle.up_drift);
        let blocks = build_qbd_blocks(&t, &s, lambda, b, DEFAULT_DIM_CAP).unwrap();
        let rm = solve_rate_matrix(&blocks, 1e-14, 1_000_000).unwrap();
        let st = solve_boundary(&blocks, &rm.r).unwrap();
        let (block, orphan) = event_rates(&blocks, &st);
        let bf = b as f64;
        residual = residual.max(rm.residual);
        mass = mass.max((st.mass() - 1.0).abs());
        balance = balance.max(rel(lambda + bf * orphan, bf * block));
    }
    verdict(
        6,
        "queue solution",
        mm1_err < 1e-12 && residual < 1e-9 && mass < 1e-10 && balance < 1e-8,
        started,
        Duration::from_secs(30),
        &format!(
            "M/M/1 R error {mm1_err:.1e}; b=1..3: residual {residual:.1e}, mass {mass:.1e}, flow balance {balance:.1e}"
        ),
    );
}

/// Stationary mean rate of leaving the current state.
fn mean_jump_rate(gen: &SparseGenerator, pi: &[f64]) -> f64 {
    pi.iter().enumerate().map(|(s, w)| -w * gen.diag(s)).sum()
}

struct Check {
    what: String,
    estimate: SimEstimate,
    target: f64,
}

impl Check {
    fn new(what: &str, estimate: SimEstimate, target: f64) -> Self {
        Check { what: what.into(), estimate, target }
    }
}

fn criterion_7_simulation() {
    let started = Instant::now();
    let mut checks = Vec::new();
    let rounds = params(1, 0.1, 0.2, 0.5, 0.7, 0.2, 0.05, 1);
    for n in [1, 2] {
        let p = SystemParams { n, ..rounds };
        let stats = estimate_round_stats(&p, 100_000, 70 + n as u64);
        let wb = ph_mean(&build_block_ph(&p).unwrap()).unwrap();
        let wo = ph_mean(&build_orphan_ph(&p).unwrap()).unwrap();
        checks.push(Check::new(&format!("E[W_B] n={n}"), stats.mean_wb.unwrap(), wb));
        checks.push(Check::new(&format!("E[W_O] n={n}"), stats.mean_wo.unwrap(), wo));
    }

    let bd = build_birth_death(&rounds).unwrap();
    let zeta = availability_inherent(&rounds).unwrap();
    let horizon = 1e6 / mean_jump_rate(&bd, &zeta.zeta);
    let occ = simulate_generator(&bd, 0, horizon, 71).unwrap();
    checks.push(Check::new("A1", occ.sum_over(0..=rounds.n), zeta.a1));

    let q = build_full_cycle_q(&rounds).unwrap();
    let pi = stationary_pi(&rounds).unwrap();
    let flat = pi.flatten();
    let full = availability_full(&pi).unwrap();
    let horizon = 1e6 / mean_jump_rate(&q, &flat);
    let occ = simulate_generator(&q, 0, horizon, 72).unwrap();
    let ix = StateIndexer::new(rounds.n, SpaceKind::FullCycle).unwrap();
    let orphans: Vec<usize> = (0..ix.len()).filter(|&m| ix.is_orphan(ix.state_of(m))).collect();
    checks.push(Check::new("P_O", occ.sum_over(orphans), full.p_o));
    checks.push(Check::new("pi(0,0,0)", occ.sum_over([ix.idx(0, 0, 0)]), flat[ix.idx(0, 0, 0)]));

    let queue = base(1);
    let exact = throughput_exact(&queue, &SolverSettings::default()).unwrap();
    let (t, s) = extended_chains(&queue).unwrap();
    let blocks = build_qbd_blocks(&t, &s, queue.lambda, queue.b, DEFAULT_DIM_CAP).unwrap();
    let rm = solve_rate_matrix(&blocks, 1e-14, 1_000_000).unwrap();
    let st = solve_boundary(&blocks, &rm.r).unwrap();
    let jump_rate = mean_jump_rate(&blocks.b1_0, &st.psi0) + mean_jump_rate(&blocks.a1, &st.tail);
    let sim = simulate_queue(&blocks, &QueueSimSettings::new(1e6 / jump_rate, 73)).unwrap();
    checks.push(Check::new("TH", sim.th, exact.th));

    // Coverage of the 95% interval for E[W_B] over 100 seeds.
    let n1 = SystemParams { n: 1, ..rounds };
    let wb = ph_mean(&build_block_ph(&n1).unwrap()).unwrap();
    let covered = (0..100u64)
        .filter(|&seed| estimate_round_stats(&n1, 2000, 1000 + seed).mean_wb.unwrap().within(wb, 1.959964))
        .count();

    let worst = checks.iter().map(|c| c.estimate.z_score(c.target).abs()).fold(0.0, f64::max);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} z={:+.2}", c.what, c.estimate.z_score(c.target)))
        .collect();
    verdict(
        7,
        "simulation",
        worst <= 3.0 && (90..=99).contains(&covered),
        started,
        Duration::from_secs(300),
        &format!("{}; 95% interval covers {covered}/100", detail.join(", ")),
    );
}

fn th_rate_approx(p: &SystemParams) -> (f64, bool) {
    let r = throughput_rate_approx(p, &SolverSettings::default()).unwrap();
    (r.th, r.saturated)
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn sign_changes(v: &[f64]) -> usize {
    v.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

fn criterion_8_parameter_trends() {
    use rayon::prelude::*;
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut saturated = 0;
    let mut points = 0;
    let mut note = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // Throughput against batch size and arrival rate.
    let bs: Vec<usize> = (100..=300).step_by(25).collect();
    let lambdas = [0.005, 0.1, 3.0];
    let fig13: Vec<Vec<(f64, bool)>> = lambdas
        .iter()
        .map(|&lambda| {
            bs.par_iter()
                .map(|&b| th_rate_approx(&params(25, 0.1, 0.2, 0.5, 0.7, 0.2, lambda, b)))
                .collect()
        })
        .collect();
    for (row, lambda) in fig13.iter().zip(lambdas) {
        let th: Vec<f64> = row.iter().map(|r| r.0).collect();
        note(increasing(&th), &format!("TH in b at lambda={lambda}"));
    }
    for m in 0..bs.len() {
        let col: Vec<f64> = fig13.iter().map(|row| row[m].0).collect();
        note(increasing(&col), &format!("TH in lambda at b={}", bs[m]));
    }

    // Throughput against approval probability and repair rate.
    let ps: Vec<f64> = (0..14).map(|m| 0.4 + 0.025 * m as f64).collect();
    let mus = [1.5, 2.0, 3.0];
    let fig14: Vec<Vec<(f64, bool)>> = mus
        .iter()
        .map(|&mu| ps.par_iter().map(|&p| th_rate_approx(&params(25, 2.0, mu, 5.0, p, 3.0, 2.0, 100))).collect())
        .collect();
    for (row, mu) in fig14.iter().zip(mus) {
        let th: Vec<f64> = row.iter().map(|r| r.0).collect();
        note(increasing(&th), &format!("TH in p at mu={mu}"));
    }
    let gap: Vec<f64> = (0..ps.len()).map(|m| fig14[2][m].0 - fig14[0][m].0).collect();
    let crossings = sign_changes(&gap);
    note(crossings == 1, "one crossing of TH(mu=3) - TH(mu=1.5)");

    // Throughput against size and failure rate.
    let ns: Vec<usize> = (3..=25).collect();
    let thetas = [1.0, 3.0, 5.0];
    let fig15: Vec<Vec<(f64, bool)>> = thetas
        .iter()
        .map(|&theta| ns.par_iter().map(|&n| th_rate_approx(&params(n, theta, 2.0, 5.0, 0.68, 3.0, 2.0, 100))).collect())
        .collect();
    for (row, theta) in fig15.iter().zip(thetas) {
        let th: Vec<f64> = row.iter().map(|r| r.0).collect();
        note(decreasing(&th), &format!("TH in n at theta={theta}"));
    }
    for m in 0..ns.len() {
        let col: Vec<f64> = fig15.iter().map(|row| row[m].0).collect();
        note(decreasing(&col), &format!("TH in theta at n={}", ns[m]));
    }
    for r in fig13.iter().chain(&fig14).chain(&fig15).flatten() {
        points += 1;
        saturated += r.1 as usize;
    }

    // Inherent availability against size, repair and failure rates.
    let a1 = |n: usize, theta: f64, mu: f64| availability_inherent(&params(n, theta, mu, 0.5, 0.7, 0.2, 0.1, 100)).unwrap().a1;
    let curves16: Vec<(f64, f64)> = vec![(0.5, 1.5), (0.5, 2.0), (0.5, 2.5), (0.3, 1.5), (0.35, 1.5), (0.4, 1.5)];
    let a1s: Vec<Vec<f64>> = curves16.iter().map(|&(theta, mu)| ns.iter().map(|&n| a1(n, theta, mu)).collect()).collect();
    for (curve, (theta, mu)) in a1s.iter().zip(&curves16) {
        note(increasing(curve), &format!("A1 in n at theta={theta}, mu={mu}"));
    }
    for m in 0..ns.len() {
        note(increasing(&[a1s[0][m], a1s[1][m], a1s[2][m]]), &format!("A1 in mu at n={}", ns[m]));
        note(decreasing(&[a1s[3][m], a1s[4][m], a1s[5][m]]), &format!("A1 in theta at n={}", ns[m]));
    }

    // Availability of the voting process against the same parameters. The
    // comparisons use 1 − A2, which stays resolvable after A2 rounds to one.
    let curves17: Vec<(f64, f64)> = vec![(2.0, 1.5), (2.0, 2.0), (2.0, 3.0), (1.0, 2.0), (2.0, 2.0), (3.0, 2.0)];
    let u2s: Vec<Vec<f64>> = curves17
        .par_iter()
        .map(|&(theta, mu)| {
            ns.iter()
                .map(|&n| {
                    let p = params(n, theta, mu, 10.0, 0.7, 3.0, 2.0, 100);
                    availability_full(&stationary_pi(&p).unwrap()).unwrap().u2
                })
                .collect()
        })
        .collect();
    for (curve, (theta, mu)) in u2s.iter().zip(&curves17) {
        note(decreasing(curve), &format!("A2 in n at theta={theta}, mu={mu}"));
    }
    for m in 0..ns.len() {
        note(decreasing(&[u2s[0][m], u2s[1][m], u2s[2][m]]), &format!("A2 in mu at n={}", ns[m]));
        note(increasing(&[u2s[3][m], u2s[4][m], u2s[5][m]]), &format!("A2 in theta at n={}", ns[m]));
    }

    let detail = if failures.is_empty() {
        format!(
            "all trends hold; {crossings} crossing in p; {saturated}/{points} throughput points saturated"
        )
    } else {
        format!("violated: {}", failures.join("; "))
    };
    verdict(8, "parameter trends", failures.is_empty(), started, Duration::from_secs(600), &detail);
}

fn criterion_9_stability_verdicts() {
    let started = Instant::now();
    let mut rng = stream_rng(9, 0);
    let (mut agree, mut stable_draws, mut draws) = (0, 0, 0);
    // Distance of sp(R) from one, on either side of the verdict.
    let mut stable_gap = f64::INFINITY;
    let mut transient_gap = 0.0f64;
    let mut disagreements = Vec::new();
    while draws < 50 {
        let b = rng.random_range(1..=2usize);
        let p = params(
            1,
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.2..2.0),
            rng.random_range(0.55..0.99),
            rng.random_range(0.1..3.0),
            0.0,
            b,
        );
        let (t, s) = extended_chains(&p).unwrap();
        let idle = stability_check(&t, &s, 0.0, b).unwrap();
        // Alternate targets on either side of the boundary, with a margin.
        let ratio = if draws % 2 == 0 { rng.random_range(0.3..0.85) } else { rng.random_range(1.15..2.0) };
        let lambda = ratio * idle.down_drift - idle.up_drift;
        if lambda <= 0.0 {
            continue;
        }
        draws += 1;
        let report = stability_check(&t, &s, lambda, b).unwrap();
        let blocks = build_qbd_blocks(&t, &s, lambda, b, DEFAULT_DIM_CAP).unwrap();
        let rm = solve_rate_matrix_lr(&blocks, 1e-15, 200).unwrap();
        let radius = rate_spectral_radius(&rm.r).unwrap();
        let spectral_stable = radius < 1.0 - 1e-9;
        if spectral_stable {
            stable_gap = stable_gap.min(1.0 - radius);
        } else {
            transient_gap = transient_gap.max((radius - 1.0).abs());
        }
        stable_draws += report.stable as usize;
        if report.stable == spectral_stable {
            agree += 1;
        } else {
            disagreements.push(format!("ratio {ratio:.3}: radius {radius:.12}"));
        }
    }
    verdict(
        9,
        "stability verdicts",
        agree == 50,
        started,
        Duration::from_secs(120),
        &format!(
            "{agree}/50 agree, {stable_draws} stable; stable 1-sp(R) >= {stable_gap:.1e}, others |sp(R)-1| <= {transient_gap:.1e}{}",
            if disagreements.is_empty() { String::new() } else { format!("; {}", disagreements.join(", ")) }
        ),
    );
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("criterion_1_dimensions", criterion_1_dimensions),
        ("criterion_2_closed_form_block_mean", criterion_2_closed_form_block_mean),
        ("criterion_3_inherent_availability", criterion_3_inherent_availability),
        ("criterion_4_mean_time_to_first_failure", criterion_4_mean_time_to_first_failure),
        ("criterion_5_product_form_stationary_law", criterion_5_product_form_stationary_law),
        ("criterion_6_queue_solution", criterion_6_queue_solution),
        ("criterion_7_simulation", criterion_7_simulation),
        ("criterion_8_parameter_trends", criterion_8_parameter_trends),
        ("criterion_9_stability_verdicts", criterion_9_stability_verdicts),
    ];
    // `cargo test <filter>` passes the filter through; honour it.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if std::panic::catch_unwind(run).is_err() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
