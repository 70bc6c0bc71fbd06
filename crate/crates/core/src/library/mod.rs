//! Endmember libraries and spectra batches: CSV I/O, resampling and the
//! built-in synthetic library.

mod csvio;
mod resample;
mod synthetic;

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{Spectrum, WavelengthGrid};

pub use csvio::{read_abundances, write_abundances, AbundanceTable};
pub use resample::{resample, resample_values};
pub use synthetic::{synthetic_default_library, Band, EndmemberShape, DEFAULT_SHAPES};

/// Endmember names of the built-in library, in column order.
pub const DEFAULT_NAMES: [&str; 9] = [
    "PpIX634",
    "PpIX620",
    "Lipofuscin",
    "Flavins",
    "NADH",
    "FAD",
    "Collagen",
    "Elastin",
    "Melanin",
];

const PEAK_TOL: f64 = 1e-12;

/// Named endmember matrix `B` (m x k), one peak-normalized spectrum per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberLibrary {
    grid: Arc<WavelengthGrid>,
    names: Vec<String>,
    matrix: DMatrix<f64>,
}

impl EndmemberLibrary {
    /// Wraps an already peak-normalized matrix.
    pub fn new(
        grid: Arc<WavelengthGrid>,
        names: Vec<String>,
        matrix: DMatrix<f64>,
    ) -> Result<Self> {
        check_names(&names)?;
        if matrix.nrows() != grid.len() || matrix.ncols() != names.len() {
            return Err(Error::dim(format!(
                "library matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                grid.len(),
                names.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("endmember library"));
        }
        if matrix.iter().any(|&v| v < 0.0) {
            return Err(Error::Data("endmember spectra must be nonnegative".into()));
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let peak = col.max();
            if (peak - 1.0).abs() > PEAK_TOL {
                return Err(Error::Data(format!(
                    "endmember '{}' has peak {peak}, expected 1",
                    names[j]
                )));
            }
        }
        Ok(Self {
            grid,
            names,
            matrix,
        })
    }

    /// Divides every column by its maximum. Columns must be nonnegative with a
    /// positive peak.
    pub fn normalized(
        grid: Arc<WavelengthGrid>,
        names: Vec<String>,
        mut matrix: DMatrix<f64>,
    ) -> Result<Self> {
        for (j, mut col) in matrix.column_iter_mut().enumerate() {
            let peak = col.max();
            if !(peak > 0.0) {
                let name = names.get(j).map(String::as_str).unwrap_or("?");
                return Err(Error::Data(format!(
                    "endmember '{name}' has no positive value"
                )));
            }
            col /= peak;
            // exact 1 at the argmax regardless of rounding in the division
            let imax = col.imax();
            col[imax] = 1.0;
        }
        Self::new(grid, names, matrix)
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of wavelengths.
    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of endmembers.
    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.m();
        &self.matrix.as_slice()[j * m..(j + 1) * m]
    }

    /// 2-norm condition number of `B^T B`.
    pub fn gram_condition(&self) -> f64 {
        let gram = self.matrix.transpose() * &self.matrix;
        let ev = gram.symmetric_eigenvalues();
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Resamples every column onto `target` and renormalizes peaks.
    pub fn resampled(&self, target: Arc<WavelengthGrid>) -> Result<Self> {
        let mut out = DMatrix::zeros(target.len(), self.k());
        for j in 0..self.k() {
            let v = resample_values(&self.grid, self.column(j), &target)?;
            out.column_mut(j).copy_from_slice(&v);
        }
        Self::normalized(target, self.names.clone(), out)
    }
}

fn check_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::Data(
            "an endmember library needs at least one column".into(),
        ));
    }
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() {
            return Err(Error::Data(format!("column {} has an empty name", i + 1)));
        }
        if names[..i].contains(n) {
            return Err(Error::Data(format!("duplicate column name '{n}'")));
        }
    }
    Ok(())
}

/// Side information from [`load_library`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadDiagnostics {
    /// Negative entries clamped to zero.
    pub clamped: usize,
    pub resampled: bool,
}

/// Reads a library CSV (`wavelength_nm,<name1>,...`), optionally resamples it
/// onto `target`, clamps negatives to zero and peak-normalizes each column.
pub fn load_library(
    path: impl AsRef<Path>,
    target: Option<Arc<WavelengthGrid>>,
) -> Result<(EndmemberLibrary, LoadDiagnostics)> {
    let path = path.as_ref();
    let table = csvio::read_wavelength_table(path)?;
    let mut diag = LoadDiagnostics::default();
    let mut columns = table.columns;
    for col in &mut columns {
        for v in col.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                diag.clamped += 1;
            }
        }
    }
    if diag.clamped > 0 {
        log::warn!(
            "{}: clamped {} negative library entries to 0",
            path.display(),
            diag.clamped
        );
    }
    let (grid, columns) = match target {
        Some(t) if !t.approx_eq(&table.grid) => {
            diag.resampled = true;
            let cols = columns
                .iter()
                .map(|c| resample_values(&table.grid, c, &t))
                .collect::<Result<Vec<_>>>()?;
            (t, cols)
        }
        Some(t) => (t, columns),
        None => (Arc::new(table.grid), columns),
    };
    let m = grid.len();
    let matrix = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
    let lib = EndmemberLibrary::normalized(grid, table.names, matrix)?;
    Ok((lib, diag))
}

/// Writes `lib` in the library CSV format.
pub fn export_library(lib: &EndmemberLibrary, path: impl AsRef<Path>) -> Result<()> {
    let cols: Vec<&[f64]> = (0..lib.k()).map(|j| lib.column(j)).collect();
    csvio::write_wavelength_table(path.as_ref(), lib.grid(), lib.names(), &cols)
}

/// The library CSV as bytes, e.g. for content hashing.
pub fn library_csv_bytes(lib: &EndmemberLibrary) -> Result<Vec<u8>> {
    let cols: Vec<&[f64]> = (0..lib.k()).map(|j| lib.column(j)).collect();
    csvio::wavelength_table_bytes(lib.grid(), lib.names(), &cols)
}

/// Spectra sharing one wavelength grid, with column identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraBatch {
    grid: Arc<WavelengthGrid>,
    ids: Vec<String>,
    spectra: Vec<Spectrum>,
}

impl SpectraBatch {
    pub fn new(
        grid: Arc<WavelengthGrid>,
        ids: Vec<String>,
        spectra: Vec<Spectrum>,
    ) -> Result<Self> {
        if ids.len() != spectra.len() {
            return Err(Error::dim(format!(
                "{} ids for {} spectra",
                ids.len(),
                spectra.len()
            )));
        }
        check_names(&ids)?;
        if let Some(s) = spectra.iter().find(|s| !s.grid().approx_eq(&grid)) {
            return Err(Error::GridMismatch(format!(
                "spectrum on a {}-sample grid in a batch on a {}-sample grid",
                s.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, ids, spectra })
    }

    /// Wraps raw value vectors, naming them `spec_0001`, `spec_0002`, ...
    pub fn from_values(grid: Arc<WavelengthGrid>, values: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (1..=values.len()).map(spectrum_id).collect();
        let spectra = values
            .into_iter()
            .map(|v| Spectrum::new(grid.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, ids, spectra)
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn resampled(&self, target: Arc<WavelengthGrid>) -> Result<Self> {
        let spectra = self
            .spectra
            .iter()
            .map(|s| resample(s, target.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(target, self.ids.clone(), spectra)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let table = csvio::read_wavelength_table(path.as_ref())?;
        let grid = Arc::new(table.grid);
        let spectra = table
            .columns
            .into_iter()
            .map(|v| Spectrum::new(grid.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, table.names, spectra)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let cols: Vec<&[f64]> = self.spectra.iter().map(|s| s.values()).collect();
        csvio::write_wavelength_table(path.as_ref(), &self.grid, &self.ids, &cols)
    }
}

/// `spec_0001`-style identifier for the 1-based index `i`.
pub fn spectrum_id(i: usize) -> String {
    format!("spec_{i:04}")
}
