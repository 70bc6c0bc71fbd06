//! Objectives and gradients in the form the iterative solvers evaluate them.

use nalgebra::{DMatrix, DVector};

use super::prepared::PreparedLibrary;
use crate::error::{Error, Result};
use crate::spectra::LOG_FLOOR;

fn shapes(c: &[f64], b: &DMatrix<f64>, s: &[f64]) -> Result<()> {
    if c.len() != b.ncols() || s.len() != b.nrows() {
        return Err(Error::dim(format!(
            "B is {}x{}, c has {} and s has {} entries",
            b.nrows(),
            b.ncols(),
            c.len(),
            s.len()
        )));
    }
    Ok(())
}

/// Gradient of `1/2 ||s - Bc||^2`: `B^T (Bc - s)`.
pub fn ls_gradient(c: &[f64], b: &DMatrix<f64>, s: &[f64]) -> Result<Vec<f64>> {
    ls_lasso_gradient(c, b, s, 0.0)
}

/// Gradient of `1/2 ||s - Bc||^2 + lambda 1^T c` on `c >= 0`.
pub fn ls_lasso_gradient(c: &[f64], b: &DMatrix<f64>, s: &[f64], lambda: f64) -> Result<Vec<f64>> {
    shapes(c, b, s)?;
    let mut ws = Workspace::new(b.nrows(), b.ncols());
    ws.load(c);
    ws.ls_gradient(b, s, lambda, false);
    Ok(ws.grad.as_slice().to_vec())
}

/// Gradient of `1^T Bc - s^T log Bc + lambda 1^T c`:
/// `lambda 1 + B^T 1 - B^T (s / max(Bc, floor))`.
pub fn poisson_gradient(c: &[f64], b: &DMatrix<f64>, s: &[f64], lambda: f64) -> Result<Vec<f64>> {
    shapes(c, b, s)?;
    let sums = DVector::from_iterator(b.ncols(), b.column_iter().map(|col| col.sum()));
    let mut ws = Workspace::new(b.nrows(), b.ncols());
    ws.load(c);
    ws.poisson_gradient(b, &sums, s, lambda, LOG_FLOOR);
    Ok(ws.grad.as_slice().to_vec())
}

/// Scratch buffers for one solver run; no allocation inside the iteration.
pub(crate) struct Workspace {
    pub c: DVector<f64>,
    pub fwd: DVector<f64>,
    pub resid: DVector<f64>,
    pub grad: DVector<f64>,
}

impl Workspace {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            c: DVector::zeros(k),
            fwd: DVector::zeros(m),
            resid: DVector::zeros(m),
            grad: DVector::zeros(k),
        }
    }

    pub fn load(&mut self, c: &[f64]) {
        self.c.copy_from_slice(c);
    }

    /// Sets `fwd = Bc`, `resid = Bc - s` (or `s - Bc` when `flip`),
    /// `grad = B^T resid + lambda 1` and returns `1/2 ||s - Bc||^2`.
    pub fn ls_gradient(&mut self, b: &DMatrix<f64>, s: &[f64], lambda: f64, flip: bool) -> f64 {
        self.fwd.gemv(1.0, b, &self.c, 0.0);
        let mut sq = 0.0;
        for ((r, &f), &si) in self.resid.iter_mut().zip(self.fwd.iter()).zip(s) {
            let d = f - si;
            sq += d * d;
            *r = if flip { -d } else { d };
        }
        self.grad.gemv_tr(1.0, b, &self.resid, 0.0);
        self.grad.add_scalar_mut(lambda);
        0.5 * sq
    }

    /// Sets `fwd = Bc`.
    pub fn forward(&mut self, b: &DMatrix<f64>) {
        self.fwd.gemv(1.0, b, &self.c, 0.0);
    }

    /// Sets `fwd = Bc` and `grad` to the Poisson gradient at `c`.
    pub fn poisson_gradient(
        &mut self,
        b: &DMatrix<f64>,
        col_sums: &DVector<f64>,
        s: &[f64],
        lambda: f64,
        floor: f64,
    ) {
        self.forward(b);
        self.poisson_gradient_from_forward(b, col_sums, s, lambda, floor);
    }

    /// Poisson gradient at `c` given an up-to-date `fwd`.
    pub fn poisson_gradient_from_forward(
        &mut self,
        b: &DMatrix<f64>,
        col_sums: &DVector<f64>,
        s: &[f64],
        lambda: f64,
        floor: f64,
    ) {
        for ((r, &f), &si) in self.resid.iter_mut().zip(self.fwd.iter()).zip(s) {
            *r = si / f.max(floor);
        }
        self.grad.gemv_tr(-1.0, b, &self.resid, 0.0);
        self.grad += col_sums;
        self.grad.add_scalar_mut(lambda);
    }
}

/// `1/2 ||s - Bc||^2 + lambda 1^T c`.
pub(crate) fn lasso_objective(
    p: &PreparedLibrary,
    ws: &mut Workspace,
    c: &[f64],
    s: &[f64],
    lambda: f64,
) -> f64 {
    ws.load(c);
    let half_sq = ws.ls_gradient(p.matrix(), s, 0.0, false);
    half_sq + lambda * c.iter().sum::<f64>()
}

/// Poisson objective evaluated from the forward model `fwd = Bc`.
pub(crate) fn poisson_objective(
    fwd: &DVector<f64>,
    s: &[f64],
    c: &[f64],
    lambda: f64,
    floor: f64,
) -> f64 {
    crate::spectra::poisson_nll_from_forward(fwd.as_slice(), s, floor)
        + lambda * c.iter().sum::<f64>()
}
