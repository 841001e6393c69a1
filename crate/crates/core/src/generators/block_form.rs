//! Block-by-block transcription of `T`, `S` and `Q`.
//!
//! These builders follow the printed block matrices (`K`, `F`, `L` for `T`;
//! `G`, `F`, `H` for `S`; `D`, `E`, `B`, `C`, `K`, `J`, `A` for `Q`) index by
//! index. They exist to be compared against the per-node builders in the
//! parent module. Two places in the printed blocks are internally
//! inconsistent and are corrected here:
//!
//! * the last diagonal entry of `H_{i,i}` is printed as
//!   `-[(N-k-n)γp + (n-i)μ]`, but approvals are censored at level `2n` and
//!   the remaining node can still disapprove or fail into the orphan state,
//!   so the entry is `-[(θ+γq) + (n-i)μ]`;
//! * the voting diagonals of `D_{i,i}` and `E_{i,i}` are printed as
//!   `-b_{i,m}` and `-c_{k,i,m}` although `b` and `c` are already negative;
//!   the diagonal is `b_{i,m}` (resp. `c_{k,i,m}`).

use crate::error::Result;
use crate::params::SystemParams;
use crate::space::{SpaceKind, StateIndexer};
use crate::sparse::{Conservativity, SparseGenerator};

struct Blocks<'a> {
    ix: &'a StateIndexer,
    entries: Vec<(usize, usize, f64)>,
}

impl<'a> Blocks<'a> {
    fn new(ix: &'a StateIndexer) -> Self {
        Blocks {
            ix,
            entries: Vec::new(),
        }
    }

    /// Index of the first state of group `(k, i)`.
    fn origin(&self, k: usize, i: usize) -> usize {
        self.ix.idx(k, i, 0)
    }

    /// Places a block whose local `(row, col)` entries come from `f`.
    fn place(
        &mut self,
        (rk, ri): (usize, usize),
        (ck, ci): (usize, usize),
        shape: (usize, usize),
        f: impl Fn(usize, usize) -> f64,
    ) {
        let (r0, c0) = (self.origin(rk, ri), self.origin(ck, ci));
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let v = f(r, c);
                if v != 0.0 {
                    self.entries.push((r0 + r, c0 + c, v));
                }
            }
        }
    }

    fn finish(self, tag: Conservativity) -> SparseGenerator {
        let dim = self.ix.len();
        SparseGenerator::from_triplets(dim, dim, self.entries, tag)
    }
}

fn tri(r: usize, c: usize, diag: f64, sup: f64, sub: f64) -> f64 {
    if r == c {
        diag
    } else if c == r + 1 {
        sup
    } else if r == c + 1 {
        sub
    } else {
        0.0
    }
}

fn diag_only(r: usize, c: usize, v: f64) -> f64 {
    if r == c {
        v
    } else {
        0.0
    }
}

/// `(T, T⁰)` from the `K`, `F` and `L` blocks.
pub fn block_ph_literal(params: &SystemParams) -> Result<(SparseGenerator, Vec<f64>)> {
    params.validate()?;
    let n = params.n;
    let nn = params.total_nodes() as f64;
    let (th, mu, g, p, q) = (params.theta, params.mu, params.gamma, params.p, params.q());
    let ix = StateIndexer::new(n, SpaceKind::BlockAbsorbing)?;
    let mut b = Blocks::new(&ix);
    for k in 0..=2 * n {
        let kf = k as f64;
        for i in 0..=n {
            let size = n + 1 - i;
            let fi = i as f64;
            let c = |m: usize| {
                let mf = m as f64;
                if m + i < n {
                    -((nn - kf - fi - mf) * (th + g) + mf * mu)
                } else {
                    -((nn - kf - n as f64) * g * p + (n - i) as f64 * mu)
                }
            };
            // K_{i,i}: birth-death block in j.
            b.place((k, i), (k, i), (size, size), |r, cc| {
                tri(
                    r,
                    cc,
                    c(r),
                    (nn - kf - fi - r as f64) * th,
                    r as f64 * mu,
                )
            });
            if i < n {
                b.place((k, i), (k, i + 1), (size, size - 1), |r, cc| {
                    diag_only(r, cc, (nn - kf - fi - r as f64) * g * q)
                });
            }
            if k < 2 * n {
                b.place((k, i), (k + 1, i), (size, size), |r, cc| {
                    diag_only(r, cc, (nn - kf - fi - r as f64) * g * p)
                });
            }
        }
    }
    let mut exit = vec![0.0; ix.len()];
    for i in 0..=n {
        for m in 0..=n - i {
            exit[ix.idx(2 * n, i, m)] = (n + 1 - i - m) as f64 * g * p;
        }
    }
    Ok((b.finish(Conservativity::SubConservative), exit))
}

/// `(S, S⁰)` from the `G`, `F`, `H` blocks and the exit blocks.
pub fn orphan_ph_literal(params: &SystemParams) -> Result<(SparseGenerator, Vec<f64>)> {
    params.validate()?;
    let n = params.n;
    let nn = params.total_nodes() as f64;
    let (th, mu, g, p, q) = (params.theta, params.mu, params.gamma, params.p, params.q());
    let ix = StateIndexer::new(n, SpaceKind::OrphanAbsorbing)?;
    let mut b = Blocks::new(&ix);
    for k in 0..2 * n {
        let kf = k as f64;
        for i in 0..=n {
            let size = n + 1 - i;
            let fi = i as f64;
            b.place((k, i), (k, i), (size, size), |r, cc| {
                let mf = r as f64;
                tri(
                    r,
                    cc,
                    -((nn - kf - fi - mf) * (th + g) + mf * mu),
                    (nn - kf - fi - mf) * th,
                    mf * mu,
                )
            });
            if i < n {
                b.place((k, i), (k, i + 1), (size, size - 1), |r, cc| {
                    diag_only(r, cc, (nn - kf - fi - r as f64) * g * q)
                });
            }
            b.place((k, i), (k + 1, i), (size, size), |r, cc| {
                diag_only(r, cc, (nn - kf - fi - r as f64) * g * p)
            });
        }
    }
    let top = 2 * n;
    for i in 0..=n {
        let size = n + 1 - i;
        let fi = i as f64;
        let f = |m: usize| {
            let mf = m as f64;
            if m + i < n {
                -((n as f64 + 1.0 - fi - mf) * (th + g * q) + mf * mu)
            } else {
                // Corrected entry, see the module documentation.
                -((th + g * q) + (n - i) as f64 * mu)
            }
        };
        b.place((top, i), (top, i), (size, size), |r, cc| {
            tri(
                r,
                cc,
                f(r),
                (n as f64 + 1.0 - fi - r as f64) * th,
                r as f64 * mu,
            )
        });
        if i < n {
            b.place((top, i), (top, i + 1), (size, size - 1), |r, cc| {
                diag_only(r, cc, (n as f64 + 1.0 - fi - r as f64) * g * q)
            });
        }
    }
    let mut exit = vec![0.0; ix.len()];
    for k in 0..=2 * n {
        for i in 0..=n {
            exit[ix.idx(k, i, n - i)] = (nn - k as f64 - n as f64) * (th + g * q);
        }
    }
    Ok((b.finish(Conservativity::SubConservative), exit))
}

/// `Q` from the `D`, `E`, `B`, `C`, `K`, `J` and `A` blocks.
pub fn full_cycle_q_literal(params: &SystemParams) -> Result<SparseGenerator> {
    params.validate()?;
    let n = params.n;
    let nf = n as f64;
    let nn = params.total_nodes() as f64;
    let (th, mu, g, p, q, beta) = (
        params.theta,
        params.mu,
        params.gamma,
        params.p,
        params.q(),
        params.beta,
    );
    let ix = StateIndexer::new(n, SpaceKind::FullCycle)?;
    let mut b = Blocks::new(&ix);
    let d = |i: usize| (n + 1 - i) as f64 * mu;

    // Levels 0..=2n: D blocks at level 0, E blocks above, with the same shape.
    for k in 0..=2 * n {
        let kf = k as f64;
        for i in 0..=n {
            let size = n + 2 - i;
            let fi = i as f64;
            let last = size - 1;
            b.place((k, i), (k, i), (size, size), |r, cc| {
                let mf = r as f64;
                if r == last {
                    tri(r, cc, -d(i) - beta, 0.0, d(i))
                } else {
                    tri(
                        r,
                        cc,
                        -((nn - kf - fi - mf) * (th + g) + mf * mu),
                        (nn - kf - fi - mf) * th,
                        mf * mu,
                    )
                }
            });
            b.place((k, i), (k, i + 1), (size, size - 1), |r, cc| {
                if r == last {
                    0.0
                } else {
                    diag_only(r, cc, (nn - kf - fi - r as f64) * g * q)
                }
            });
            // Return of the orphan state of group i: last row, column (0,0,0).
            b.place((k, i), (0, 0), (size, n + 2), |r, cc| {
                if r == last && cc == 0 {
                    beta
                } else {
                    0.0
                }
            });
            // Approvals: B blocks below level 2n, C blocks into level 2n+1.
            if k < 2 * n {
                b.place((k, i), (k + 1, i), (size, size), |r, cc| {
                    if r == last {
                        0.0
                    } else {
                        diag_only(r, cc, (nn - kf - fi - r as f64) * g * p)
                    }
                });
            } else {
                b.place((k, i), (k + 1, i), (size, size - 1), |r, cc| {
                    diag_only(r, cc, (nf + 1.0 - fi - r as f64) * g * p)
                });
            }
        }
        // Group n+1 holds the single orphan state (k, n+1, 0).
        b.place((k, n + 1), (k, n + 1), (1, 1), |_, _| -beta);
        b.place((k, n + 1), (0, 0), (1, n + 2), |_, cc| {
            if cc == 0 {
                beta
            } else {
                0.0
            }
        });
    }

    // Level 2n+1: K blocks and J returns.
    let top = 2 * n + 1;
    for i in 0..=n {
        let size = n + 1 - i;
        let fi = i as f64;
        b.place((top, i), (top, i), (size, size), |r, cc| {
            let mf = r as f64;
            let a = -((nf - fi - mf) * (th + g * q) + mf * mu + beta);
            tri(r, cc, a, (nf - fi - mf) * th, mf * mu)
        });
        if i < n {
            b.place((top, i), (top, i + 1), (size, size - 1), |r, cc| {
                diag_only(r, cc, (nf - fi - r as f64) * g * q)
            });
        }
        b.place((top, i), (0, 0), (size, n + 2), |_, cc| {
            if cc == 0 {
                beta
            } else {
                0.0
            }
        });
    }
    Ok(b.finish(Conservativity::Conservative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_block_ph, build_full_cycle_q, build_orphan_ph};

    fn assert_same(a: &SparseGenerator, b: &SparseGenerator, what: &str) {
        assert_eq!(a.nrows(), b.nrows());
        let diff = (a.to_dense() - b.to_dense()).amax();
        assert!(diff < 1e-12, "{what}: max difference {diff}");
    }

    fn draws() -> Vec<SystemParams> {
        let mut out = Vec::new();
        for n in 1..=4 {
            for (theta, mu, gamma, p, beta) in [
                (0.1, 0.2, 0.5, 0.7, 0.2),
                (2.0, 1.5, 5.0, 0.4, 3.0),
                (0.0, 0.0, 1.0, 1.0, 1.0),
                (0.37, 2.9, 0.8, 0.05, 0.6),
            ] {
                out.push(SystemParams::new(n, theta, mu, gamma, p, beta, 0.0, 1).unwrap());
            }
        }
        out
    }

    #[test]
    fn block_chain_matches_blocks() {
        for p in draws() {
            let ph = build_block_ph(&p).unwrap();
            let (t, t0) = block_ph_literal(&p).unwrap();
            assert_same(&ph.subgen, &t, "T");
            assert_eq!(ph.exit.len(), t0.len());
            for (a, b) in ph.exit.iter().zip(&t0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orphan_chain_matches_blocks() {
        for p in draws() {
            let ph = build_orphan_ph(&p).unwrap();
            let (s, s0) = orphan_ph_literal(&p).unwrap();
            assert_same(&ph.subgen, &s, "S");
            for (a, b) in ph.exit.iter().zip(&s0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_cycle_matches_blocks() {
        for p in draws() {
            let q = build_full_cycle_q(&p).unwrap();
            let lit = full_cycle_q_literal(&p).unwrap();
            assert_same(&q, &lit, "Q");
            assert!(lit.check_rates(None, 1e-12).is_ok());
        }
    }
}
