//! Labelled spectrum simulator.
//!
//! 1. draw abundances per endmember from `Normal(mean_j, std_j^2)`,
//! 2. zero every abundance below the threshold `t`,
//! 3. form clean spectra `S = B C0`,
//! 4. scale to counts, add Poisson-like Gaussian noise, scale back,
//! 5. smooth with a Savitzky–Golay filter.
//!
//! Each spectrum draws from its own ChaCha stream keyed by `(seed, index)`,
//! so output does not depend on thread count or batch position.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{spectrum_id, AbundanceTable, EndmemberLibrary, SpectraBatch};

/// Per-endmember abundance distribution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbundanceStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Default for AbundanceStats {
    /// Statistics for the nine default endmembers, in library order.
    fn default() -> Self {
        Self {
            means: vec![
                0.422, 0.099, 0.234, 0.011, 0.010, 0.001, 0.186, 0.018, 0.019,
            ],
            stds: vec![
                0.328, 0.105, 0.251, 0.027, 0.055, 0.008, 0.143, 0.062, 0.050,
            ],
        }
    }
}

impl AbundanceStats {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() || self.means.len() != self.stds.len() {
            return Err(Error::invalid(format!(
                "stats: {} means and {} stds",
                self.means.len(),
                self.stds.len()
            )));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("stats.means must be finite"));
        }
        if self.stds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("stats.stds must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `z ~ Normal(0, s)`: noisy value has mean `s` and variance `s`.
    #[default]
    ZeroMean,
    /// `z ~ Normal(s, s)`: the noise mean equals the signal, doubling it.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    /// Abundances below this are set to zero.
    pub threshold: f64,
    pub stats: AbundanceStats,
    pub smoothing_window: usize,
    pub smoothing_order: usize,
    pub seed: u64,
    pub clamp_negative_noise: bool,
    /// Counts at unit abundance and unit endmember peak. 0 disables noise.
    pub intensity_scale: f64,
    pub noise_mode: NoiseMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            threshold: 0.15,
            stats: AbundanceStats::default(),
            smoothing_window: 9,
            smoothing_order: 3,
            seed: 0,
            clamp_negative_noise: true,
            intensity_scale: 1e4,
            noise_mode: NoiseMode::ZeroMean,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::invalid("threshold must be finite and nonnegative"));
        }
        self.stats.validate()?;
        check_savgol(self.smoothing_window, self.smoothing_order)?;
        if !(self.intensity_scale.is_finite() && self.intensity_scale >= 0.0) {
            return Err(Error::invalid(
                "intensity_scale must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

/// Random stream for spectrum `index` of a run seeded with `seed`.
pub fn spectrum_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn normals(stats: &AbundanceStats) -> Vec<Option<Normal<f64>>> {
    // std = 0 is a point mass; Normal::new accepts it but keep it explicit
    stats
        .means
        .iter()
        .zip(&stats.stds)
        .map(|(&m, &s)| {
            if s > 0.0 {
                Normal::new(m, s).ok()
            } else {
                None
            }
        })
        .collect()
}

fn sample_column<R: Rng + ?Sized>(
    stats: &AbundanceStats,
    dists: &[Option<Normal<f64>>],
    t: f64,
    rng: &mut R,
) -> Vec<f64> {
    dists
        .iter()
        .zip(&stats.means)
        .map(|(d, &m)| {
            let v = d.map_or(m, |d| d.sample(rng));
            if v < t {
                0.0
            } else {
                v
            }
        })
        .collect()
}

/// Draws `C0` (k x n): column-wise i.i.d. normals, entries below the
/// threshold set to zero.
pub fn sample_abundances<R: Rng + ?Sized>(
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    let dists = normals(&config.stats);
    let k = config.stats.k();
    let mut c0 = DMatrix::zeros(k, config.n);
    for j in 0..config.n {
        let col = sample_column(&config.stats, &dists, config.threshold, rng);
        c0.column_mut(j).copy_from_slice(&col);
    }
    Ok(c0)
}

/// `S = B C0`.
pub fn synthesize_clean(b: &DMatrix<f64>, c0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.ncols() != c0.nrows() {
        return Err(Error::dim(format!(
            "B has {} columns but C0 has {} rows",
            b.ncols(),
            c0.nrows()
        )));
    }
    Ok(b * c0)
}

/// Adds `z_i ~ Normal(0, s_i)` (or `Normal(s_i, s_i)` in literal mode) to
/// each entry. Zero entries stay zero; with `clamp` negative results are
/// set to zero.
pub fn add_poisson_like_noise<R: Rng + ?Sized>(
    values: &[f64],
    rng: &mut R,
    mode: NoiseMode,
    clamp: bool,
) -> Result<Vec<f64>> {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!(
            "noise needs finite nonnegative intensities, got {v}"
        )));
    }
    Ok(values
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return 0.0;
            }
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let shift = match mode {
                NoiseMode::ZeroMean => 0.0,
                NoiseMode::Literal => s,
            };
            let v = s + shift + s.sqrt() * z;
            if clamp {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect())
}

fn check_savgol(window: usize, order: usize) -> Result<()> {
    if window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    if order >= window {
        return Err(Error::invalid(format!(
            "smoothing order {order} must be below the window {window}"
        )));
    }
    Ok(())
}

/// Weights that evaluate, at offset `at` within a `window`-sample block, the
/// least-squares polynomial of degree `order` fitted to that block.
fn savgol_weights(window: usize, order: usize, at: usize) -> Vec<f64> {
    let half = (window / 2) as f64;
    let x = |j: usize| j as f64 - half;
    let v = DMatrix::from_fn(window, order + 1, |j, p| x(j).powi(p as i32));
    let e = DVector::from_fn(order + 1, |p, _| x(at).powi(p as i32));
    let vtv = v.transpose() * &v;
    let solved = vtv
        .cholesky()
        .expect("Vandermonde normal matrix is positive definite")
        .solve(&e);
    (v * solved).iter().copied().collect()
}

/// Central Savitzky–Golay convolution weights.
pub fn savgol_coefficients(window: usize, order: usize) -> Result<Vec<f64>> {
    check_savgol(window, order)?;
    Ok(savgol_weights(window, order, window / 2))
}

/// Savitzky–Golay smoothing. Interior samples use the central weights; the
/// first and last `window / 2` samples take the value of the polynomial fitted
/// to the first (last) `window` samples.
pub fn savgol_smooth(values: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    check_savgol(window, order)?;
    let m = values.len();
    if window > m {
        return Err(Error::invalid(format!(
            "smoothing window {window} exceeds the spectrum length {m}"
        )));
    }
    if window == 1 {
        return Ok(values.to_vec());
    }
    let half = window / 2;
    let dot = |w: &[f64], start: usize| {
        w.iter()
            .zip(&values[start..start + window])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let center = savgol_weights(window, order, half);
    let mut out = vec![0.0; m];
    for i in half..m - half {
        out[i] = dot(&center, i - half);
    }
    for at in 0..half {
        let w = savgol_weights(window, order, at);
        out[at] = dot(&w, 0);
        let w = savgol_weights(window, order, window - 1 - at);
        out[m - 1 - at] = dot(&w, m - window);
    }
    Ok(out)
}

/// Simulated spectra with the abundances that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spectra: SpectraBatch,
    /// One ground-truth abundance vector per spectrum.
    pub truth: Vec<Vec<f64>>,
}

impl Simulation {
    pub fn truth_table(&self, names: &[String]) -> AbundanceTable {
        AbundanceTable {
            names: names.to_vec(),
            ids: self.spectra.ids().to_vec(),
            rows: self.truth.clone(),
        }
    }
}

/// Runs the full pipeline for `config.n` spectra on the library's grid.
pub fn simulate(lib: &EndmemberLibrary, config: &SimulationConfig) -> Result<Simulation> {
    config.validate()?;
    if config.stats.k() != lib.k() {
        return Err(Error::dim(format!(
            "stats describe {} endmembers, the library has {}",
            config.stats.k(),
            lib.k()
        )));
    }
    if config.smoothing_window > lib.m() {
        return Err(Error::invalid(
            "smoothing window exceeds the number of wavelengths",
        ));
    }
    let dists = normals(&config.stats);
    let b = lib.matrix();
    let scale = config.intensity_scale;

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = spectrum_rng(config.seed, i as u64);
            let c = sample_column(&config.stats, &dists, config.threshold, &mut rng);
            let clean = b * DVector::from_column_slice(&c);
            let mut s: Vec<f64> = clean.iter().map(|v| v.max(0.0)).collect();
            if scale > 0.0 {
                let counts: Vec<f64> = s.iter().map(|v| v * scale).collect();
                let noisy = add_poisson_like_noise(
                    &counts,
                    &mut rng,
                    config.noise_mode,
                    config.clamp_negative_noise,
                )?;
                s = noisy.into_iter().map(|v| v / scale).collect();
            }
            let mut s = savgol_smooth(&s, config.smoothing_window, config.smoothing_order)?;
            if config.clamp_negative_noise {
                s.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            Ok((s, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let (values, truth): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let spectra = SpectraBatch::from_values(Arc::clone(lib.grid()), values)?;
    debug_assert_eq!(spectra.ids()[0], spectrum_id(1));
    Ok(Simulation { spectra, truth })
}
