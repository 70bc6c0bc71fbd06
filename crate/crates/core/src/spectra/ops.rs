use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Floor applied to `(Bc)_i` inside the Poisson log term.
pub const LOG_FLOOR: f64 = 1e-12;

fn check_finite(x: &[f64], what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_shapes(c: &[f64], b: &DMatrix<f64>, s: &[f64]) -> Result<()> {
    if b.ncols() != c.len() {
        return Err(Error::dim(format!(
            "B has {} columns but c has {} entries",
            b.ncols(),
            c.len()
        )));
    }
    if b.nrows() != s.len() {
        return Err(Error::dim(format!(
            "B has {} rows but s has {} entries",
            b.nrows(),
            s.len()
        )));
    }
    Ok(())
}

fn forward(c: &[f64], b: &DMatrix<f64>) -> DVector<f64> {
    b * DVector::from_column_slice(c)
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg(x: &[f64]) -> Result<Vec<f64>> {
    check_finite(x, "projection input")?;
    Ok(x.iter().map(|&v| v.max(0.0)).collect())
}

/// `sign(x) * max(|x| - tau, 0)`, elementwise.
pub fn soft_threshold(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {tau}"
        )));
    }
    Ok(x.iter()
        .map(|&v| v.signum() * (v.abs() - tau).max(0.0))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect())
}

/// `(1/2) ||s - Bc||^2`.
pub fn ls_loss(c: &[f64], b: &DMatrix<f64>, s: &[f64]) -> Result<f64> {
    check_shapes(c, b, s)?;
    let r = forward(c, b);
    Ok(0.5 * r.iter().zip(s).map(|(p, q)| (q - p) * (q - p)).sum::<f64>())
}

/// `(1/2) ||s - Bc||^2 + lambda * sum(c)` for `c >= 0`.
pub fn ls_lasso_loss(c: &[f64], b: &DMatrix<f64>, s: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    if c.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("abundances must be nonnegative"));
    }
    Ok(ls_loss(c, b, s)? + lambda * c.iter().sum::<f64>())
}

/// Poisson negative log-likelihood with L1 penalty:
/// `1^T Bc - s^T log(Bc) + lambda 1^T c`.
///
/// `(Bc)_i` is floored at [`LOG_FLOOR`] inside the log, and terms with
/// `s_i = 0` contribute nothing to the log sum.
pub fn poisson_nll(c: &[f64], b: &DMatrix<f64>, s: &[f64], lambda: f64) -> Result<f64> {
    check_shapes(c, b, s)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    if c.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("abundances must be nonnegative"));
    }
    if s.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("Poisson loss needs a nonnegative spectrum"));
    }
    let bc = forward(c, b);
    Ok(poisson_nll_from_forward(bc.as_slice(), s, LOG_FLOOR) + lambda * c.iter().sum::<f64>())
}

pub(crate) fn poisson_nll_from_forward(bc: &[f64], s: &[f64], floor: f64) -> f64 {
    bc.iter()
        .zip(s)
        .map(|(&p, &q)| {
            if q > 0.0 {
                p - q * p.max(floor).ln()
            } else {
                p
            }
        })
        .sum()
}
