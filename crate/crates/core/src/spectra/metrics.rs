use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summary of an unmixing run against measured (and optionally true) data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub reconstruction_mse: f64,
    pub sam_cosine: f64,
    pub abundance_mse: Option<f64>,
    pub l0_mean: f64,
    pub false_positives: Option<usize>,
    pub runtime_per_spectrum_ms: f64,
}

/// Cosine of the spectral angle between `s` and `s_hat`.
pub fn sam_cosine(s: &[f64], s_hat: &[f64]) -> Result<f64> {
    if s.len() != s_hat.len() {
        return Err(Error::dim(format!(
            "spectra have {} and {} samples",
            s.len(),
            s_hat.len()
        )));
    }
    let dot: f64 = s.iter().zip(s_hat).map(|(a, b)| a * b).sum();
    let na = s.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = s_hat.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid(
            "spectral angle of an all-zero spectrum is undefined",
        ));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `(1/n) sum_i ||B c_i - s_i||^2`.
pub fn reconstruction_mse<S, C>(spectra: &[S], b: &DMatrix<f64>, abundances: &[C]) -> Result<f64>
where
    S: AsRef<[f64]>,
    C: AsRef<[f64]>,
{
    if spectra.is_empty() {
        return Err(Error::invalid("reconstruction error of an empty batch"));
    }
    if spectra.len() != abundances.len() {
        return Err(Error::dim(format!(
            "{} spectra but {} abundance vectors",
            spectra.len(),
            abundances.len()
        )));
    }
    let mut total = 0.0;
    for (s, c) in spectra.iter().zip(abundances) {
        let (s, c) = (s.as_ref(), c.as_ref());
        if s.len() != b.nrows() || c.len() != b.ncols() {
            return Err(Error::dim("spectrum or abundance length does not match B"));
        }
        let fit = b * DVector::from_column_slice(c);
        total += fit
            .iter()
            .zip(s)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>();
    }
    Ok(total / spectra.len() as f64)
}

/// `(1/n) sum_i ||c_hat_i - c0_i||^2`.
pub fn abundance_mse<A, B>(estimated: &[A], truth: &[B]) -> Result<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    check_batch(estimated, truth)?;
    let total: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(a, b)| {
            a.as_ref()
                .iter()
                .zip(b.as_ref())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum();
    Ok(total / estimated.len() as f64)
}

/// Entries that are exactly zero in `truth` but above `zero_tol` in `estimated`.
pub fn count_false_positives<A, B>(estimated: &[A], truth: &[B], zero_tol: f64) -> Result<usize>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    check_batch(estimated, truth)?;
    Ok(estimated
        .iter()
        .zip(truth)
        .map(|(a, b)| {
            a.as_ref()
                .iter()
                .zip(b.as_ref())
                .filter(|(&x, &y)| y == 0.0 && x > zero_tol)
                .count()
        })
        .sum())
}

/// Mean number of entries above `zero_tol` per vector.
pub fn mean_l0<A: AsRef<[f64]>>(abundances: &[A], zero_tol: f64) -> Result<f64> {
    if abundances.is_empty() {
        return Err(Error::invalid("L0 of an empty batch"));
    }
    let total: usize = abundances
        .iter()
        .map(|c| c.as_ref().iter().filter(|&&v| v > zero_tol).count())
        .sum();
    Ok(total as f64 / abundances.len() as f64)
}

fn check_batch<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::invalid("empty abundance batch"));
    }
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "batch sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter()
        .zip(b)
        .any(|(x, y)| x.as_ref().len() != y.as_ref().len())
    {
        return Err(Error::dim("abundance vectors differ in length"));
    }
    Ok(())
}
