//! Domain types shared by every other module, plus the projections, losses
//! and evaluation metrics defined on them.

mod metrics;
mod ops;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{
    abundance_mse, count_false_positives, mean_l0, reconstruction_mse, sam_cosine, MetricsReport,
};
pub(crate) use ops::poisson_nll_from_forward;
pub use ops::{ls_lasso_loss, ls_loss, poisson_nll, project_nonneg, soft_threshold, LOG_FLOOR};

/// Abundances at or below this value count as zero.
pub const ZERO_TOL: f64 = 1e-6;

const UNIFORM_RTOL: f64 = 1e-9;

/// Sampling wavelengths in nm, strictly increasing and uniformly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavelengthGrid {
    wavelengths: Vec<f64>,
}

impl WavelengthGrid {
    pub const DEFAULT_START_NM: f64 = 420.0;
    pub const DEFAULT_END_NM: f64 = 730.0;
    pub const DEFAULT_LEN: usize = 310;

    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(Error::Data(format!(
                "a wavelength grid needs at least 2 samples, got {}",
                wavelengths.len()
            )));
        }
        if wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("wavelength grid"));
        }
        if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "wavelengths not strictly increasing at index {} ({} -> {})",
                i + 1,
                wavelengths[i],
                wavelengths[i + 1]
            )));
        }
        let m = wavelengths.len();
        let step = (wavelengths[m - 1] - wavelengths[0]) / (m - 1) as f64;
        for (i, w) in wavelengths.iter().enumerate() {
            let expected = wavelengths[0] + step * i as f64;
            if (w - expected).abs() > UNIFORM_RTOL * step.max(w.abs()) {
                return Err(Error::Data(format!(
                    "wavelength grid is not uniform: sample {i} is {w}, expected {expected}"
                )));
            }
        }
        Ok(Self { wavelengths })
    }

    /// `len` evenly spaced samples from `start` to `end`, both inclusive.
    pub fn linspace(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid("grid length must be at least 2"));
        }
        let step = (end - start) / (len - 1) as f64;
        let mut w: Vec<f64> = (0..len).map(|i| start + step * i as f64).collect();
        w[len - 1] = end;
        Self::new(w)
    }

    /// 310 samples spanning 420..=730 nm.
    pub fn default_grid() -> Self {
        Self::linspace(
            Self::DEFAULT_START_NM,
            Self::DEFAULT_END_NM,
            Self::DEFAULT_LEN,
        )
        .expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn start(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn end(&self) -> f64 {
        self.wavelengths[self.len() - 1]
    }

    pub fn spacing(&self) -> f64 {
        (self.end() - self.start()) / (self.len() - 1) as f64
    }

    /// True when both grids hold the same samples within `1e-9` relative.
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .wavelengths
                .iter()
                .zip(&other.wavelengths)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

impl TryFrom<Vec<f64>> for WavelengthGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WavelengthGrid> for Vec<f64> {
    fn from(g: WavelengthGrid) -> Self {
        g.wavelengths
    }
}

/// Intensity samples on a wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Arc<WavelengthGrid>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: Arc<WavelengthGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!(
                "spectrum has {} values but the grid has {} wavelengths",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Nonnegative endmember coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbundanceVector {
    values: Vec<f64>,
    zero_tol: f64,
}

impl AbundanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tol(values, ZERO_TOL)
    }

    pub fn with_tol(values: Vec<f64>, zero_tol: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("abundance vector"));
        }
        if let Some(v) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::invalid(format!("negative abundance {v}")));
        }
        if !(zero_tol >= 0.0) {
            return Err(Error::invalid("zero_tol must be nonnegative"));
        }
        Ok(Self { values, zero_tol })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            values: vec![0.0; k],
            zero_tol: ZERO_TOL,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of entries above `zero_tol`.
    pub fn l0(&self) -> usize {
        self.values.iter().filter(|&&v| v > self.zero_tol).count()
    }
}

impl AsRef<[f64]> for AbundanceVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
