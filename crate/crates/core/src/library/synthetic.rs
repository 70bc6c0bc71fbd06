//! Built-in stand-in library made of Gaussian emission bands.
//!
//! Band centers and widths are repo-defined constants chosen for realistic
//! shapes and a well-conditioned Gram matrix. They are not measured spectra.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{EndmemberLibrary, DEFAULT_NAMES};
use crate::error::{Error, Result};
use crate::spectra::WavelengthGrid;

/// Gaussian band with peak height `weight` at `center_nm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub weight: f64,
}

impl Band {
    pub const fn new(center_nm: f64, fwhm_nm: f64, weight: f64) -> Self {
        Self {
            center_nm,
            fwhm_nm,
            weight,
        }
    }

    pub fn eval(&self, wavelength: f64) -> f64 {
        let sigma = self.fwhm_nm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let z = (wavelength - self.center_nm) / sigma;
        self.weight * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndmemberShape {
    Bands(&'static [Band]),
    /// `exp(-(lambda - onset_nm) / decay_nm)`.
    Decay {
        onset_nm: f64,
        decay_nm: f64,
    },
}

impl EndmemberShape {
    pub fn eval(&self, wavelength: f64) -> f64 {
        match self {
            EndmemberShape::Bands(bands) => bands.iter().map(|b| b.eval(wavelength)).sum(),
            EndmemberShape::Decay { onset_nm, decay_nm } => {
                (-(wavelength - onset_nm) / decay_nm).exp()
            }
        }
    }
}

/// Shapes in the order of [`DEFAULT_NAMES`].
pub const DEFAULT_SHAPES: [EndmemberShape; 9] = [
    EndmemberShape::Bands(&[Band::new(634.0, 20.0, 1.0), Band::new(704.0, 30.0, 0.4)]),
    EndmemberShape::Bands(&[Band::new(620.0, 25.0, 1.0)]),
    EndmemberShape::Bands(&[Band::new(570.0, 80.0, 1.0)]),
    EndmemberShape::Bands(&[Band::new(530.0, 60.0, 1.0)]),
    EndmemberShape::Bands(&[Band::new(460.0, 60.0, 1.0)]),
    EndmemberShape::Bands(&[Band::new(525.0, 70.0, 1.0), Band::new(560.0, 40.0, 0.3)]),
    EndmemberShape::Bands(&[Band::new(440.0, 50.0, 1.0)]),
    EndmemberShape::Bands(&[Band::new(470.0, 55.0, 1.0)]),
    EndmemberShape::Decay {
        onset_nm: 420.0,
        decay_nm: 80.0,
    },
];

/// Evaluates the nine default shapes on `grid` and peak-normalizes them.
/// The grid must lie within 420..=730 nm.
pub fn synthetic_default_library(grid: Arc<WavelengthGrid>) -> Result<EndmemberLibrary> {
    let (lo, hi) = (
        WavelengthGrid::DEFAULT_START_NM,
        WavelengthGrid::DEFAULT_END_NM,
    );
    let slack = 1e-9 * hi;
    if grid.start() < lo - slack || grid.end() > hi + slack {
        return Err(Error::invalid(format!(
            "synthetic library is defined on {lo}..={hi} nm, grid spans {}..={}",
            grid.start(),
            grid.end()
        )));
    }
    let w = grid.wavelengths();
    let matrix = DMatrix::from_fn(w.len(), DEFAULT_SHAPES.len(), |i, j| {
        DEFAULT_SHAPES[j].eval(w[i])
    });
    let names = DEFAULT_NAMES.iter().map(|s| s.to_string()).collect();
    EndmemberLibrary::normalized(grid, names, matrix)
}
