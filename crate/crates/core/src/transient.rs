//! Transient distributions by uniformization.
//!
//! For a (sub)generator `A` with uniformization rate `Λ ≥ max |a_rr|`,
//! `x exp(At) = Σ_k w_k(Λt) x P^k` with `P = I + A/Λ` and Poisson weights
//! `w_k`. The series is cut once the remaining Poisson tail is below the
//! tolerance; since every `x P^k` has mass at most `|x|₁`, the truncation
//! error is bounded by that tail times the initial mass.

use crate::sparse::SparseGenerator;

/// Poisson weights `w_0..=w_K` for mean `m`, with `K` chosen so that the
/// neglected tail is below `tol`.
pub fn poisson_weights(m: f64, tol: f64) -> Vec<f64> {
    if m == 0.0 {
        return vec![1.0];
    }
    let ln_m = m.ln();
    let mut weights = Vec::with_capacity((m + 10.0 * m.sqrt() + 20.0) as usize);
    let mut log_w = -m;
    let mut k = 0usize;
    loop {
        let w = log_w.exp();
        weights.push(w);
        let next_log = log_w + ln_m - ((k + 1) as f64).ln();
        // Geometric bound on Σ_{j>k} w_j, valid once the ratio m/(j+1) < 1.
        let ratio = m / (k + 2) as f64;
        if (k as f64) > m && ratio < 1.0 {
            let tail = next_log.exp() / (1.0 - ratio);
            if tail < tol {
                break;
            }
        }
        log_w = next_log;
        k += 1;
    }
    weights
}

/// `x exp(A t)` for a row vector `x`.
pub fn evolve(x: &[f64], gen: &SparseGenerator, t: f64, tol: f64) -> Vec<f64> {
    assert!(t >= 0.0, "time must be non-negative");
    let rate = gen.max_outflow();
    if t == 0.0 || rate == 0.0 {
        return x.to_vec();
    }
    let weights = poisson_weights(rate * t, tol);
    let mut term = x.to_vec();
    let mut scratch = vec![0.0; x.len()];
    let mut out: Vec<f64> = term.iter().map(|v| v * weights[0]).collect();
    for w in &weights[1..] {
        // term ← term (I + A/Λ)
        gen.vec_mul_into(&term, &mut scratch);
        for (t, s) in term.iter_mut().zip(&scratch) {
            *t += s / rate;
            if *t < 0.0 {
                *t = 0.0;
            }
        }
        for (o, t) in out.iter_mut().zip(&term) {
            *o += w * t;
        }
    }
    out
}

/// Evolves `x` along an increasing grid starting at any `t₀ ≥ 0`, calling
/// `visit(index, vector)` at each grid point.
pub fn evolve_along(
    x: &[f64],
    gen: &SparseGenerator,
    grid: &[f64],
    tol: f64,
    mut visit: impl FnMut(usize, &[f64]),
) {
    let per_step = tol / grid.len().max(1) as f64;
    let mut current = x.to_vec();
    let mut now = 0.0;
    for (m, &t) in grid.iter().enumerate() {
        assert!(t >= now, "grid must be non-decreasing from zero");
        if t > now {
            current = evolve(&current, gen, t - now, per_step);
            now = t;
        }
        visit(m, &current);
    }
}

/// Survival probabilities `x exp(A t) e` along a grid, clamped to `[0, 1]`.
pub fn survival_along(x: &[f64], gen: &SparseGenerator, grid: &[f64], tol: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    evolve_along(x, gen, grid, tol, |m, v| {
        out[m] = v.iter().sum::<f64>().clamp(0.0, 1.0);
    });
    out
}
