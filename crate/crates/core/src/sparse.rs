//! Compressed-row rate matrices.

use std::fmt::Write as _;

use nalgebra::DMatrix;

/// Row-sum contract of a rate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conservativity {
    /// Rows sum to zero.
    Conservative,
    /// Rows sum to minus the paired exit vector.
    SubConservative,
    /// A rectangular or otherwise unconstrained block.
    Block,
}

/// A sparse rate matrix in compressed-row form.
///
/// Entries within a row are sorted by column and exact zeros are never
/// stored, so two matrices with the same entries compare (and serialize)
/// identically.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenerator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    tag: Conservativity,
}

/// Accumulates `(row, col, rate)` entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Finishes a square generator whose diagonal is set so that every row
    /// sums to `-exit[row]` (or to zero without an exit vector).
    pub fn into_generator(mut self, exit: Option<&[f64]>) -> SparseGenerator {
        assert_eq!(self.nrows, self.ncols, "generators are square");
        let mut out = vec![0.0; self.nrows];
        for &(r, c, v) in &self.entries {
            if r != c {
                out[r] += v;
            }
        }
        self.entries.retain(|&(r, c, _)| r != c);
        for (r, total) in out.into_iter().enumerate() {
            let leak = exit.map_or(0.0, |e| e[r]);
            self.entries.push((r, r, -(total + leak)));
        }
        let tag = if exit.is_some() {
            Conservativity::SubConservative
        } else {
            Conservativity::Conservative
        };
        self.build(tag)
    }

    pub fn build(self, tag: Conservativity) -> SparseGenerator {
        SparseGenerator::from_triplets(self.nrows, self.ncols, self.entries, tag)
    }
}

impl SparseGenerator {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        tag: Conservativity,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "entry ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = SparseGenerator {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
            tag,
        };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        if self.vals.iter().all(|v| *v != 0.0) {
            return;
        }
        let mut triplets = Vec::with_capacity(self.vals.len());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        *self = SparseGenerator::from_triplets(self.nrows, self.ncols, triplets, self.tag);
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseGenerator::from_triplets(nrows, ncols, [], Conservativity::Block)
    }

    pub fn identity(n: usize) -> Self {
        SparseGenerator::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)), Conservativity::Block)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        SparseGenerator::from_triplets(
            n,
            n,
            values.iter().enumerate().map(|(i, v)| (i, i, *v)),
            Conservativity::Block,
        )
    }

    pub fn from_dense(m: &DMatrix<f64>, tag: Conservativity) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        SparseGenerator::from_triplets(m.nrows(), m.ncols(), t, tag)
    }

    /// Column vector `v` times row vector `w`.
    pub fn outer(v: &[f64], w: &[f64]) -> Self {
        let mut t = Vec::new();
        for (r, a) in v.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (c, b) in w.iter().enumerate() {
                if *b != 0.0 {
                    t.push((r, c, a * b));
                }
            }
        }
        SparseGenerator::from_triplets(v.len(), w.len(), t, Conservativity::Block)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn tag(&self) -> Conservativity {
        self.tag
    }

    pub fn with_tag(mut self, tag: Conservativity) -> Self {
        self.tag = tag;
        self
    }

    /// Non-zero entries of one row as `(col, value)`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + Clone + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// All entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self, r: usize) -> f64 {
        self.get(r, r)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `x A`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        self.vec_mul_into(x, &mut out);
        out
    }

    /// `out = x A`, reusing the output buffer.
    pub fn vec_mul_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, xr) in x.iter().enumerate() {
            if *xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += xr * v;
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// Largest total off-diagonal outflow plus exit, i.e. `max |a_rr|` for a
    /// generator built with [`TripletBuilder::into_generator`].
    pub fn max_outflow(&self) -> f64 {
        (0..self.nrows)
            .map(|r| -self.diag(r))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        SparseGenerator::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v)),
            self.tag,
        )
    }

    pub fn scale(&self, factor: f64) -> Self {
        SparseGenerator::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().map(|(r, c, v)| (r, c, v * factor)),
            Conservativity::Block,
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        SparseGenerator::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().chain(other.triplets()),
            Conservativity::Block,
        )
    }

    /// Rows and columns picked (in the given order) from this matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut t = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    t.push((new_r, col_map[c], v));
                }
            }
        }
        SparseGenerator::from_triplets(rows.len(), cols.len(), t, Conservativity::Block)
    }

    /// Kronecker product `a ⊗ b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let mut t = Vec::with_capacity(a.nnz() * b.nnz());
        for (ar, ac, av) in a.triplets() {
            for (br, bc, bv) in b.triplets() {
                t.push((ar * b.nrows + br, ac * b.ncols + bc, av * bv));
            }
        }
        SparseGenerator::from_triplets(a.nrows * b.nrows, a.ncols * b.ncols, t, Conservativity::Block)
    }

    /// Kronecker sum `a ⊕ b = a ⊗ I + I ⊗ b` of square matrices.
    pub fn kron_sum(a: &Self, b: &Self) -> Self {
        let left = SparseGenerator::kron(a, &SparseGenerator::identity(b.nrows));
        let right = SparseGenerator::kron(&SparseGenerator::identity(a.nrows), b);
        left.add(&right)
    }

    /// Places `blocks` at the given `(row, col)` offsets of an
    /// `nrows × ncols` matrix.
    pub fn assemble(nrows: usize, ncols: usize, blocks: &[(usize, usize, &Self)]) -> Self {
        let mut t = Vec::new();
        for (ro, co, blk) in blocks {
            t.extend(blk.triplets().map(|(r, c, v)| (ro + r, co + c, v)));
        }
        SparseGenerator::from_triplets(nrows, ncols, t, Conservativity::Block)
    }

    /// Checks the sign pattern and the row-sum contract.
    ///
    /// With an exit vector, rows must sum to minus the exit entry.
    pub fn check_rates(&self, exit: Option<&[f64]>, tol: f64) -> Result<(), String> {
        for r in 0..self.nrows {
            let mut sum = 0.0;
            let mut scale: f64 = 0.0;
            for (c, v) in self.row(r) {
                if c != r && v < 0.0 {
                    return Err(format!("negative off-diagonal rate {v} at ({r},{c})"));
                }
                sum += v;
                scale = scale.max(v.abs());
            }
            let leak = exit.map_or(0.0, |e| e[r]);
            if leak < 0.0 {
                return Err(format!("negative exit rate {leak} at row {r}"));
            }
            if (sum + leak).abs() > tol * scale.max(1.0) {
                return Err(format!("row {r} sums to {} with exit {leak}", sum));
            }
        }
        Ok(())
    }

    /// Matrix-market-style text dump: a header line, then `row col value`
    /// lines (1-based) in row-major order.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> SparseGenerator {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, a);
        t.push(1, 0, b);
        t.into_generator(None)
    }

    #[test]
    fn builder_sets_diagonal() {
        let g = two_state(1.5, 0.5);
        assert_eq!(g.get(0, 0), -1.5);
        assert_eq!(g.get(1, 1), -0.5);
        assert!(g.check_rates(None, 1e-12).is_ok());
        assert_eq!(g.tag(), Conservativity::Conservative);
    }

    #[test]
    fn duplicates_sum_and_zeros_vanish() {
        let m = SparseGenerator::from_triplets(
            2,
            2,
            [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)],
            Conservativity::Block,
        );
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn products_match_dense() {
        let g = two_state(2.0, 3.0);
        let x = [0.25, 0.75];
        let d = g.to_dense();
        let right = d.clone() * nalgebra::DVector::from_column_slice(&x);
        let left = nalgebra::RowDVector::from_row_slice(&x) * d;
        assert_eq!(g.mul_vec(&x), right.as_slice());
        assert_eq!(g.vec_mul(&x), left.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn kron_sum_matches_dense() {
        let a = two_state(1.0, 2.0);
        let b = SparseGenerator::from_triplets(
            3,
            3,
            [(0, 0, -1.0), (0, 1, 1.0), (1, 1, -2.0), (1, 2, 2.0), (2, 2, -3.0)],
            Conservativity::Block,
        );
        let ks = SparseGenerator::kron_sum(&a, &b).to_dense();
        let ad = a.to_dense();
        let bd = b.to_dense();
        let expect = ad.kronecker(&DMatrix::identity(3, 3)) + DMatrix::identity(2, 2).kronecker(&bd);
        assert_eq!(ks, expect);
    }

    #[test]
    fn flags_bad_rows() {
        let m = SparseGenerator::from_triplets(
            2,
            2,
            [(0, 0, -1.0), (0, 1, 0.5), (1, 0, -0.1)],
            Conservativity::Block,
        );
        assert!(m.check_rates(None, 1e-12).is_err());
        assert!(m.check_rates(Some(&[0.5, 0.0]), 1e-12).is_err());
    }

    #[test]
    fn submatrix_and_transpose() {
        let g = two_state(2.0, 3.0);
        let s = g.submatrix(&[1], &[0, 1]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(1, 2, &[3.0, -3.0]));
        assert_eq!(g.transpose().get(0, 1), 3.0);
    }

    #[test]
    fn dump_is_stable() {
        let dump = two_state(2.0, 3.0).to_matrix_market();
        assert!(dump.starts_with("%%MatrixMarket"));
        assert_eq!(dump.lines().count(), 6);
        assert_eq!(dump, two_state(2.0, 3.0).to_matrix_market());
    }
}
