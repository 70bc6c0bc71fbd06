use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Reciprocal condition number of `B^T B` below which it is treated as singular.
const MIN_RCOND: f64 = 1e-13;

/// Endmember matrix together with the factorizations every solver needs.
#[derive(Debug, Clone)]
pub struct PreparedLibrary {
    b: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    col_sums: DVector<f64>,
}

impl PreparedLibrary {
    pub fn new(b: &DMatrix<f64>) -> Result<Self> {
        if b.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::dim("empty endmember matrix"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("endmember matrix"));
        }
        let gram = b.transpose() * b;
        let ev = gram.clone().symmetric_eigenvalues();
        let hi = ev.iter().cloned().fold(0.0_f64, f64::max);
        let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(rcond > MIN_RCOND) {
            return Err(Error::SingularGram { rcond });
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularGram { rcond })?;
        let col_sums = DVector::from_iterator(b.ncols(), b.column_iter().map(|c| c.sum()));
        Ok(Self {
            b: b.clone(),
            gram,
            chol,
            col_sums,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `B^T 1_m`.
    pub fn col_sums(&self) -> &DVector<f64> {
        &self.col_sums
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn k(&self) -> usize {
        self.b.ncols()
    }

    pub(crate) fn check_spectrum(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.m() {
            return Err(Error::dim(format!(
                "spectrum has {} samples but the library has {} wavelengths",
                s.len(),
                self.m()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(())
    }

    /// `B^T s`.
    pub(crate) fn bt(&self, s: &[f64]) -> DVector<f64> {
        self.b.tr_mul(&DVector::from_column_slice(s))
    }

    /// Unconstrained least squares `(B^T B)^{-1} B^T s`.
    pub(crate) fn least_squares(&self, s: &[f64]) -> DVector<f64> {
        self.chol.solve(&self.bt(s))
    }
}

/// Clamped unconstrained least-squares solution, the starting point of the
/// gradient solvers.
pub fn init_projected_ls(b: &DMatrix<f64>, s: &[f64]) -> Result<Vec<f64>> {
    let p = PreparedLibrary::new(b)?;
    p.check_spectrum(s)?;
    Ok(init_from(&p, s))
}

pub(crate) fn init_from(p: &PreparedLibrary, s: &[f64]) -> Vec<f64> {
    p.least_squares(s).iter().map(|&v| v.max(0.0)).collect()
}
