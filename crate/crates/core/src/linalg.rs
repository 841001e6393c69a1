//! Dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::SparseGenerator;

/// Stationary vector of an irreducible generator by dense LU, with the
/// last balance equation replaced by the normalization.
pub fn stationary_dense(gen: &SparseGenerator) -> Result<Vec<f64>> {
    let dim = gen.nrows();
    let mut m = gen.to_dense();
    for r in 0..dim {
        m[(r, dim - 1)] = 1.0;
    }
    let mut rhs = DVector::zeros(dim);
    rhs[dim - 1] = 1.0;
    let x = m
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::RankDeficient("generator is not irreducible".into()))?;
    Ok(x.as_slice().to_vec())
}

/// Spectral radius from the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Singular("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `x M` for a row vector stored as a slice.
pub fn row_times(x: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    (DVector::from_column_slice(x).transpose() * m)
        .iter()
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    #[test]
    fn two_state_stationary() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 3.0);
        let pi = stationary_dense(&t.into_generator(None)).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn radius_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&m).unwrap() - 0.5).abs() < 1e-14);
    }
}
