//! Solvers for level/group upper block-triangular matrices.
//!
//! Every subgenerator in the model only moves forward in approvals, and
//! within a level only forward in disapprovals; failures and repairs move
//! between neighbouring states of the same group. So after the canonical
//! ordering the matrix is block upper-triangular over levels, each diagonal
//! block is block upper-triangular over groups, and each group block is
//! tridiagonal. Solves run by back (or forward) substitution over groups
//! with a Thomas sweep inside each group, and the dense inverse follows the
//! nested block recursion `J_{k,l} = -D_k^{-1} Σ_m M_{k,m} J_{m,l}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::space::{Group, Layout};
use crate::sparse::SparseGenerator;

/// Relative pivot size below which a tridiagonal block counts as singular.
const PIVOT_TOL: f64 = 1e-13;

/// A tridiagonal matrix stored by its three bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// `sub[r]` is entry `(r, r-1)`; `sub[0]` is unused.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `sup[r]` is entry `(r, r+1)`; the last entry is unused.
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(len: usize) -> Self {
        Tridiagonal {
            sub: vec![0.0; len],
            diag: vec![0.0; len],
            sup: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn transpose(&self) -> Self {
        let len = self.len();
        let mut t = Tridiagonal::zeros(len);
        t.diag.clone_from(&self.diag);
        for r in 1..len {
            t.sub[r] = self.sup[r - 1];
            t.sup[r - 1] = self.sub[r];
        }
        t
    }

    /// Solves `A x = rhs` in place with the Thomas algorithm.
    ///
    /// Returns `None` on a vanishing pivot.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Option<()> {
        let len = self.len();
        if len == 0 {
            return Some(());
        }
        let scale = self
            .diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
        let mut c = vec![0.0; len];
        let mut pivot = self.diag[0];
        if pivot.abs() <= tiny {
            return None;
        }
        c[0] = self.sup[0] / pivot;
        rhs[0] /= pivot;
        for r in 1..len {
            pivot = self.diag[r] - self.sub[r] * c[r - 1];
            if pivot.abs() <= tiny {
                return None;
            }
            c[r] = if r + 1 < len { self.sup[r] / pivot } else { 0.0 };
            rhs[r] = (rhs[r] - self.sub[r] * rhs[r - 1]) / pivot;
        }
        for r in (0..len - 1).rev() {
            rhs[r] -= c[r] * rhs[r + 1];
        }
        Some(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let len = self.len();
        DMatrix::from_fn(len, len, |r, c| {
            if r == c {
                self.diag[r]
            } else if c + 1 == r {
                self.sub[r]
            } else if r + 1 == c {
                self.sup[r]
            } else {
                0.0
            }
        })
    }

    /// Dense inverse, one Thomas solve per unit column.
    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        let len = self.len();
        let mut inv = DMatrix::zeros(len, len);
        let mut col = vec![0.0; len];
        for c in 0..len {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[c] = 1.0;
            self.solve_in_place(&mut col)?;
            inv.set_column(c, &nalgebra::DVector::from_column_slice(&col));
        }
        Some(inv)
    }
}

/// A square sparse matrix paired with a layout it respects.
#[derive(Debug, Clone)]
pub struct StructuredMatrix {
    mat: SparseGenerator,
    tmat: SparseGenerator,
    layout: Layout,
    group_of: Vec<usize>,
    leaves: Vec<Tridiagonal>,
    tleaves: Vec<Tridiagonal>,
}

impl StructuredMatrix {
    /// Checks that `mat` is upper triangular at the group level with
    /// tridiagonal group blocks.
    pub fn new(mat: &SparseGenerator, layout: &Layout) -> Result<Self> {
        let dim = layout.dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::NotStructured(format!(
                "matrix is {}x{} but layout has dimension {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut group_of = vec![0; dim];
        for (g, group) in layout.groups().iter().enumerate() {
            group_of[group.start..group.end()].fill(g);
        }
        let mut leaves: Vec<Tridiagonal> = layout
            .groups()
            .iter()
            .map(|g| Tridiagonal::zeros(g.len))
            .collect();
        for (r, c, v) in mat.triplets() {
            let (gr, gc) = (group_of[r], group_of[c]);
            if gc < gr {
                return Err(Error::NotStructured(format!(
                    "entry ({r},{c}) points backwards across groups"
                )));
            }
            if gc == gr {
                let start = layout.groups()[gr].start;
                let leaf = &mut leaves[gr];
                let (lr, lc) = (r - start, c - start);
                if lr == lc {
                    leaf.diag[lr] = v;
                } else if lc + 1 == lr {
                    leaf.sub[lr] = v;
                } else if lr + 1 == lc {
                    leaf.sup[lr] = v;
                } else {
                    return Err(Error::NotStructured(format!(
                        "entry ({r},{c}) is outside the tridiagonal band of its group"
                    )));
                }
            }
        }
        let tleaves = leaves.iter().map(Tridiagonal::transpose).collect();
        Ok(StructuredMatrix {
            mat: mat.clone(),
            tmat: mat.transpose(),
            layout: layout.clone(),
            group_of,
            leaves,
            tleaves,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn singular(&self, g: usize) -> Error {
        let group: &Group = &self.layout.groups()[g];
        Error::SingularBlock {
            path: vec![group.level, group.index],
        }
    }

    /// Solves `M x = rhs` by back substitution over groups.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.dim());
        let mut x = rhs.to_vec();
        for (g, group) in self.layout.groups().iter().enumerate().rev() {
            for r in group.start..group.end() {
                let mut acc = x[r];
                for (c, v) in self.mat.row(r) {
                    if c >= group.end() {
                        acc -= v * x[c];
                    }
                }
                x[r] = acc;
            }
            self.leaves[g]
                .solve_in_place(&mut x[group.start..group.end()])
                .ok_or_else(|| self.singular(g))?;
        }
        Ok(x)
    }

    /// Solves `x M = rhs` by forward substitution over groups.
    pub fn solve_left(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.dim());
        let mut x = rhs.to_vec();
        for (g, group) in self.layout.groups().iter().enumerate() {
            for c in group.start..group.end() {
                let mut acc = x[c];
                for (r, v) in self.tmat.row(c) {
                    if r < group.start {
                        acc -= v * x[r];
                    }
                }
                x[c] = acc;
            }
            self.tleaves[g]
                .solve_in_place(&mut x[group.start..group.end()])
                .ok_or_else(|| self.singular(g))?;
        }
        Ok(x)
    }

    fn dense_block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for r in rows.clone() {
            for (c, v) in self.mat.row(r) {
                if cols.contains(&c) {
                    out[(r - rows.start, c - cols.start)] = v;
                }
            }
        }
        out
    }

    /// Inverse of the diagonal block of one level, assembled from the
    /// group recursion `X_{i,i} = K_{i,i}^{-1}`,
    /// `X_{i,l} = -K_{i,i}^{-1} Σ_m K_{i,m} X_{m,l}`.
    pub fn level_inverse(&self, level: usize) -> Result<DMatrix<f64>> {
        let range = self.layout.level_range(level);
        let groups: Vec<(usize, Group)> = self
            .layout
            .groups()
            .iter()
            .enumerate()
            .filter(|(_, g)| g.level == level)
            .map(|(gi, g)| (gi, *g))
            .collect();
        let dim = range.len();
        let base = range.start;
        let mut inv = DMatrix::zeros(dim, dim);
        let mut leaf_inv = Vec::with_capacity(groups.len());
        for (gi, _) in &groups {
            leaf_inv.push(self.leaves[*gi].inverse().ok_or_else(|| self.singular(*gi))?);
        }
        for (b, (_, gb)) in groups.iter().enumerate() {
            let cb = gb.start - base;
            inv.view_mut((cb, cb), (gb.len, gb.len)).copy_from(&leaf_inv[b]);
            for a in (0..b).rev() {
                let ga = groups[a].1;
                let mut acc = DMatrix::zeros(ga.len, gb.len);
                for m in a + 1..=b {
                    let gm = groups[m].1;
                    let k_am = self.dense_block(ga.start..ga.end(), gm.start..gm.end());
                    if k_am.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let x_mb = inv.view((gm.start - base, cb), (gm.len, gb.len));
                    acc += k_am * x_mb;
                }
                let x_ab = -(&leaf_inv[a] * acc);
                inv.view_mut((ga.start - base, cb), (ga.len, gb.len))
                    .copy_from(&x_ab);
            }
        }
        Ok(inv)
    }

    /// Dense inverse from the level recursion
    /// `J_{l,l} = D_l^{-1}`, `J_{k,l} = -D_k^{-1} Σ_{m>k} M_{k,m} J_{m,l}`.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let levels = self.layout.num_levels();
        let dim = self.dim();
        let diag_inv: Vec<DMatrix<f64>> = (0..levels)
            .map(|l| self.level_inverse(l))
            .collect::<Result<_>>()?;
        let mut inv = DMatrix::zeros(dim, dim);
        for l in 0..levels {
            let rl = self.layout.level_range(l);
            inv.view_mut((rl.start, rl.start), (rl.len(), rl.len()))
                .copy_from(&diag_inv[l]);
            for k in (0..l).rev() {
                let rk = self.layout.level_range(k);
                let mut acc = DMatrix::zeros(rk.len(), rl.len());
                for m in k + 1..=l {
                    let rm = self.layout.level_range(m);
                    let m_km = self.dense_block(rk.clone(), rm.clone());
                    if m_km.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    acc += m_km * inv.view((rm.start, rl.start), (rm.len(), rl.len()));
                }
                let j_kl = -(&diag_inv[k] * acc);
                inv.view_mut((rk.start, rl.start), (rk.len(), rl.len()))
                    .copy_from(&j_kl);
            }
        }
        Ok(inv)
    }

    /// Group index of every matrix index.
    pub fn group_of(&self, index: usize) -> usize {
        self.group_of[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Conservativity;

    fn sample() -> (SparseGenerator, Layout) {
        // Two levels: [2, 1] and [2].
        let layout = Layout::from_levels(&[vec![2, 1], vec![2]]);
        let t = [
            (0, 0, -3.0),
            (0, 1, 1.0),
            (0, 2, 0.5),
            (1, 0, 0.7),
            (1, 1, -2.0),
            (1, 3, 1.0),
            (2, 2, -1.5),
            (2, 4, 1.0),
            (3, 3, -2.5),
            (3, 4, 2.0),
            (4, 3, 0.2),
            (4, 4, -1.0),
            (0, 4, 0.3),
        ];
        (
            SparseGenerator::from_triplets(5, 5, t, Conservativity::Block),
            layout,
        )
    }

    #[test]
    fn thomas_matches_dense() {
        let t = Tridiagonal {
            sub: vec![0.0, 1.0, 2.0],
            diag: vec![-4.0, -5.0, -3.0],
            sup: vec![1.5, 0.5, 0.0],
        };
        let inv = t.inverse().unwrap();
        let id = t.to_dense() * inv;
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn singular_leaf_is_named() {
        let layout = Layout::from_levels(&[vec![1], vec![1]]);
        let m = SparseGenerator::from_triplets(
            2,
            2,
            [(0, 0, -1.0), (0, 1, 1.0)],
            Conservativity::Block,
        );
        let s = StructuredMatrix::new(&m, &layout).unwrap();
        match s.solve(&[1.0, 1.0]) {
            Err(Error::SingularBlock { path }) => assert_eq!(path, vec![1, 0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_backward_entries() {
        let layout = Layout::from_levels(&[vec![1], vec![1]]);
        let m = SparseGenerator::from_triplets(
            2,
            2,
            [(0, 0, -1.0), (1, 0, 1.0), (1, 1, -1.0)],
            Conservativity::Block,
        );
        assert!(matches!(
            StructuredMatrix::new(&m, &layout),
            Err(Error::NotStructured(_))
        ));
    }

    #[test]
    fn solves_and_inverse_agree_with_lu() {
        let (m, layout) = sample();
        let s = StructuredMatrix::new(&m, &layout).unwrap();
        let dense = m.to_dense();
        let lu_inv = dense.clone().try_inverse().unwrap();
        let rg_inv = s.inverse().unwrap();
        assert!((&lu_inv - &rg_inv).amax() < 1e-13);

        let rhs = [1.0, -2.0, 0.5, 3.0, 0.25];
        let x = s.solve(&rhs).unwrap();
        let back = &dense * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in back.iter().zip(rhs) {
            assert!((a - b).abs() < 1e-13);
        }
        let y = s.solve_left(&rhs).unwrap();
        let back = nalgebra::RowDVector::from_row_slice(&y) * &dense;
        for (a, b) in back.iter().zip(rhs) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
