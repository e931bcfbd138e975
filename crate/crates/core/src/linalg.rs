//! Dense symmetric helpers shared by the estimators, the SDP reduction and
//! the bound diagnostics. All matrices here are small (d x d).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SpsError};

/// Eigenvalues below this are clamped before fractional powers are taken.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymSpectrum {
    pub values: DVector<f64>,
    /// Columns are the unit eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymSpectrum {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let sym = symmetrize(m);
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or_else(|| {
            SpsError::NumericalFailure("symmetric eigendecomposition did not converge".into())
        })?;
        let dim = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(dim, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = DMatrix::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(k));
        }
        Ok(Self { values, vectors })
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V diag(max(v, clamp)^p) Vᵀ`.
    pub fn power(&self, exponent: f64) -> DMatrix<f64> {
        let scaled = self.values.map(|v| v.max(EIGEN_CLAMP).powf(exponent));
        &self.vectors * DMatrix::from_diagonal(&scaled) * self.vectors.transpose()
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solve `m x = rhs` for symmetric positive-definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(symmetrize(m)).ok_or(SpsError::SingularSystem)?;
    Ok(chol.solve(rhs))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let spec = SymSpectrum::new(m)?;
    Ok(spec.min().abs().max(spec.max().abs()))
}

pub fn lambda_min(m: &DMatrix<f64>) -> Result<f64> {
    Ok(SymSpectrum::new(m)?.min())
}
