//! Noise isolation and distribution analysis.
//!
//! Measured spectra are high-pass filtered to strip the slowly varying
//! emission signal. The per-wavelength variance of what remains is then
//! compared with the mean signal, and its distribution with two Gaussian
//! models: variance equal to the mean (Poisson-like) and one constant
//! variance shared by all wavelengths.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::library::SpectraBatch;
use crate::spectra::Spectrum;

/// Additive smoothing applied to both histograms in the binned divergence.
pub const KL_EPSILON: f64 = 1e-12;

const MIN_FILTER_LEN: usize = 8;

/// Zero-phase DFT mask removing every bin whose relative frequency
/// `min(j, m - j) / m` is below `cutoff`.
pub struct HighPass {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    keep: Vec<bool>,
}

impl HighPass {
    pub fn new(m: usize, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff <= 0.5) {
            return Err(Error::invalid(format!(
                "cutoff must lie in (0, 0.5], got {cutoff}"
            )));
        }
        if m < MIN_FILTER_LEN {
            return Err(Error::invalid(format!(
                "high-pass filtering needs at least {MIN_FILTER_LEN} samples, got {m}"
            )));
        }
        let mut planner = FftPlanner::new();
        let keep = (0..m)
            .map(|j| j.min(m - j) as f64 / m as f64 >= cutoff)
            .collect();
        Ok(Self {
            fft: planner.plan_fft_forward(m),
            ifft: planner.plan_fft_inverse(m),
            keep,
        })
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    /// Fraction of DFT bins passed. Filtering white noise of variance
    /// `sigma^2` leaves variance `passband_fraction * sigma^2` per sample.
    pub fn passband_fraction(&self) -> f64 {
        self.keep.iter().filter(|&&k| k).count() as f64 / self.len() as f64
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        let m = self.len();
        if values.len() != m {
            return Err(Error::dim(format!(
                "filter built for {m} samples, got {}",
                values.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        for (z, &k) in buf.iter_mut().zip(&self.keep) {
            if !k {
                *z = Complex::new(0.0, 0.0);
            }
        }
        self.ifft.process(&mut buf);
        Ok(buf.iter().map(|z| z.re / m as f64).collect())
    }
}

/// High-pass residual of one spectrum; see [`HighPass`].
pub fn highpass_residual(spectrum: &Spectrum, cutoff: f64) -> Result<Spectrum> {
    let filter = HighPass::new(spectrum.len(), cutoff)?;
    Spectrum::new(spectrum.grid().clone(), filter.apply(spectrum.values())?)
}

/// Subtracts the straight line through the first and last sample, so the
/// periodic extension seen by the DFT has no jump at the boundary.
pub fn remove_endpoint_line(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    if m < 2 {
        return vec![0.0; m];
    }
    let (a, b) = (values[0], values[m - 1]);
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v - (a + (b - a) * i as f64 / (m - 1) as f64))
        .collect()
}

/// Per-wavelength sample mean and unbiased variance across a batch.
pub fn noise_moments<S: AsRef<[f64]>>(residuals: &[S]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "noise moments need at least 2 spectra, got {n}"
        )));
    }
    let m = residuals[0].as_ref().len();
    if residuals.iter().any(|r| r.as_ref().len() != m) {
        return Err(Error::dim("residuals differ in length"));
    }
    let mut mean = vec![0.0; m];
    for r in residuals {
        for (acc, v) in mean.iter_mut().zip(r.as_ref()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut var = vec![0.0; m];
    for r in residuals {
        for ((acc, v), mu) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    Ok((mean, var))
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub correlation: f64,
}

/// Regresses noise variance on signal mean. A constant `y` yields
/// correlation and R² of 0.
pub fn mean_variance_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    if x.len() != y.len() {
        return Err(Error::dim(format!(
            "{} means but {} variances",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("regression needs at least 3 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::invalid(
            "signal means have zero spread; regression is undefined",
        ));
    }
    let slope = sxy / sxx;
    let correlation = if syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(Regression {
        slope,
        intercept: my - slope * mx,
        r_squared: correlation * correlation,
        correlation,
    })
}

/// Reference distribution for [`kl_divergence_binned`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    /// `Normal(mu, mu)`.
    PoissonGaussian { mu: f64 },
    /// `Normal(mu, variance)`.
    ConstantGaussian { mu: f64, variance: f64 },
}

impl NoiseModel {
    fn mean_var(self) -> (f64, f64) {
        match self {
            NoiseModel::PoissonGaussian { mu } => (mu, mu),
            NoiseModel::ConstantGaussian { mu, variance } => (mu, variance),
        }
    }

    /// Probability mass of `[lo, hi)`. A nonpositive variance is a point mass.
    fn mass(self, lo: f64, hi: f64, last: bool) -> f64 {
        let (mu, var) = self.mean_var();
        if !(var > 0.0) {
            return if (mu >= lo && mu < hi) || (last && mu == hi) {
                1.0
            } else {
                0.0
            };
        }
        let d = Normal::new(mu, var.sqrt()).expect("positive variance");
        d.cdf(hi) - d.cdf(lo)
    }
}

/// `sum_i p_i ln(p_i / q_i)` after adding [`KL_EPSILON`] to every entry.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim("distributions differ in length"));
    }
    Ok(p.iter()
        .zip(q)
        .map(|(a, b)| {
            let (a, b) = (a + KL_EPSILON, b + KL_EPSILON);
            a * (a / b).ln()
        })
        .sum())
}

/// Histograms `samples` into `bins` equal-width bins over their range,
/// integrates `model` over the same bins and returns the discrete KL
/// divergence of the empirical histogram from the model.
pub fn kl_divergence_binned(samples: &[f64], model: NoiseModel, bins: usize) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::invalid(format!(
            "KL estimate needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if bins < 10 {
        return Err(Error::invalid(format!(
            "KL estimate needs at least 10 bins, got {bins}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noise samples"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::invalid(
            "samples are all equal; the histogram support is degenerate",
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut p = vec![0.0; bins];
    for &v in samples {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        p[b] += 1.0;
    }
    p.iter_mut().for_each(|v| *v /= samples.len() as f64);
    let q: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + width * b as f64;
            let z = if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            };
            model.mass(a, z, b + 1 == bins)
        })
        .collect();
    discrete_kl(&p, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative frequency (cycles per sample) below which DFT bins are removed.
    pub cutoff: f64,
    pub bins: usize,
    /// Remove the endpoint line of each spectrum before filtering.
    pub detrend: bool,
    /// Divide residual variances by the filter's white-noise power gain
    /// (and residuals by its square root) so they estimate the variance of
    /// the unfiltered noise.
    pub passband_correction: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            cutoff: 0.1,
            bins: 50,
            detrend: true,
            passband_correction: true,
        }
    }
}

/// Result of [`analyze_noise`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub config: NoiseConfig,
    pub n_spectra: usize,
    pub wavelengths: Vec<f64>,
    /// Mean (pre-filter) signal per wavelength.
    pub signal_mean: Vec<f64>,
    /// Mean of the residual per wavelength.
    pub mean: Vec<f64>,
    /// Noise variance per wavelength.
    pub variance: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub correlation: f64,
    /// Variance of the constant model: the mean of `variance`.
    pub constant_variance: f64,
    pub kl_poisson_model: Vec<f64>,
    pub kl_constant_model: Vec<f64>,
    pub mean_kl_poisson: f64,
    pub mean_kl_constant: f64,
}

impl NoiseReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Per-wavelength table:
    /// `wavelength_nm,signal_mean,noise_mean,noise_variance,kl_poisson,kl_constant`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(
            out,
            "wavelength_nm,signal_mean,noise_mean,noise_variance,kl_poisson,kl_constant"
        )
        .map_err(io)?;
        for i in 0..self.wavelengths.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.wavelengths[i],
                self.signal_mean[i],
                self.mean[i],
                self.variance[i],
                self.kl_poisson_model[i],
                self.kl_constant_model[i]
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Filters every spectrum, computes noise moments, the mean–variance
/// regression and both model divergences at each wavelength.
///
/// The noise samples at wavelength `i` are `mu_i + r_i`, where `mu_i` is the
/// mean signal there and `r_i` the residual, and are compared with
/// `Normal(mu_i, mu_i)` and `Normal(mu_i, v)`.
pub fn analyze_noise(batch: &SpectraBatch, config: &NoiseConfig) -> Result<NoiseReport> {
    let n = batch.len();
    if n < 100 {
        return Err(Error::invalid(format!(
            "noise analysis needs at least 100 spectra, got {n}"
        )));
    }
    let m = batch.grid().len();
    let filter = HighPass::new(m, config.cutoff)?;
    let gain = if config.passband_correction {
        filter.passband_fraction()
    } else {
        1.0
    };
    let amp = gain.sqrt();

    let residuals: Vec<Vec<f64>> = batch
        .spectra()
        .par_iter()
        .map(|s| {
            let x = if config.detrend {
                remove_endpoint_line(s.values())
            } else {
                s.values().to_vec()
            };
            let r = filter.apply(&x)?;
            Ok(r.into_iter().map(|v| v / amp).collect())
        })
        .collect::<Result<_>>()?;
    let signals: Vec<&[f64]> = batch.spectra().iter().map(|s| s.values()).collect();
    let (signal_mean, _) = noise_moments(&signals)?;
    let (mean, variance) = noise_moments(&residuals)?;
    let reg = mean_variance_regression(&signal_mean, &variance)?;
    let v = variance.iter().sum::<f64>() / m as f64;

    let kls: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mu = signal_mean[i];
            let samples: Vec<f64> = residuals.iter().map(|r| mu + r[i]).collect();
            let kp =
                kl_divergence_binned(&samples, NoiseModel::PoissonGaussian { mu }, config.bins)?;
            let kc = kl_divergence_binned(
                &samples,
                NoiseModel::ConstantGaussian { mu, variance: v },
                config.bins,
            )?;
            Ok((kp, kc))
        })
        .collect::<Result<_>>()?;
    let (kl_poisson_model, kl_constant_model): (Vec<f64>, Vec<f64>) = kls.into_iter().unzip();
    let mean_kl_poisson = kl_poisson_model.iter().sum::<f64>() / m as f64;
    let mean_kl_constant = kl_constant_model.iter().sum::<f64>() / m as f64;

    Ok(NoiseReport {
        config: *config,
        n_spectra: n,
        wavelengths: batch.grid().wavelengths().to_vec(),
        signal_mean,
        mean,
        variance,
        slope: reg.slope,
        intercept: reg.intercept,
        r_squared: reg.r_squared,
        correlation: reg.correlation,
        constant_variance: v,
        kl_poisson_model,
        kl_constant_model,
        mean_kl_poisson,
        mean_kl_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::spectrum_rng;
    use crate::spectra::WavelengthGrid;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal as RandNormal};
    use std::f64::consts::PI;

    fn sine(m: usize, f: f64) -> Vec<f64> {
        (0..m).map(|i| (2.0 * PI * f * i as f64).sin()).collect()
    }

    #[test]
    fn constant_spectrum_has_zero_residual() {
        let out = HighPass::new(310, 0.1).unwrap().apply(&[7.0; 310]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn passband_and_stopband_sinusoids() {
        // m = 300 puts both frequencies on exact DFT bins
        let f = HighPass::new(300, 0.1).unwrap();
        let pass = sine(300, 0.3);
        for (a, b) in f.apply(&pass).unwrap().iter().zip(&pass) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(f
            .apply(&sine(300, 0.05))
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn filter_rejects_bad_cutoff_and_short_input() {
        assert!(HighPass::new(310, 0.0).is_err());
        assert!(HighPass::new(310, 0.6).is_err());
        assert!(HighPass::new(4, 0.1).is_err());
        let g = Arc::new(WavelengthGrid::linspace(0.0, 9.0, 10).unwrap());
        let s = Spectrum::new(g, vec![1.0; 10]).unwrap();
        assert!(highpass_residual(&s, 0.1).is_ok());
    }

    #[test]
    fn passband_fraction_counts_kept_bins() {
        let f = HighPass::new(310, 0.1).unwrap();
        // bins 0..=30 and 280..=309 are removed
        assert_eq!(f.passband_fraction(), 249.0 / 310.0);
    }

    proptest! {
        #[test]
        fn filter_is_linear_and_idempotent(
            x in proptest::collection::vec(-100.0f64..100.0, 64),
            y in proptest::collection::vec(-100.0f64..100.0, 64),
            a in -3.0f64..3.0,
        ) {
            let f = HighPass::new(64, 0.1).unwrap();
            let fx = f.apply(&x).unwrap();
            let fy = f.apply(&y).unwrap();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
            for ((m, p), q) in f.apply(&mix).unwrap().iter().zip(&fx).zip(&fy) {
                prop_assert!((m - (a * p + q)).abs() < 1e-9);
            }
            for (t, o) in f.apply(&fx).unwrap().iter().zip(&fx) {
                prop_assert!((t - o).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn moments_small_cases() {
        let (m, v) = noise_moments(&[vec![1.0, 3.0], vec![-1.0, 3.0]]).unwrap();
        assert_eq!(m, vec![0.0, 3.0]);
        assert_eq!(v, vec![2.0, 0.0]);
        assert!(noise_moments(&[vec![1.0]]).is_err());
    }

    #[test]
    fn moments_match_two_pass_oracle() {
        let mut rng = spectrum_rng(2, 0);
        let batch: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..20).map(|_| rng.random_range(-50.0..80.0)).collect())
            .collect();
        let (m, v) = noise_moments(&batch).unwrap();
        for i in 0..20 {
            let col: Vec<f64> = batch.iter().map(|r| r[i]).collect();
            let mean = col.iter().sum::<f64>() / 500.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 499.0;
            assert!((m[i] - mean).abs() < 1e-9 && (v[i] - var).abs() < 1e-9);
        }
    }

    #[test]
    fn regression_on_exact_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = mean_variance_regression(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && (r.intercept - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!(mean_variance_regression(&[1.0; 5], &y[..5]).is_err());
        assert!(mean_variance_regression(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn regression_on_orthogonal_data() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y = [2.0, -1.0, -2.0, -1.0, 2.0];
        let r = mean_variance_regression(&x, &y).unwrap();
        assert!(r.slope.abs() < 1e-12 && r.r_squared < 1e-12);
    }

    #[test]
    fn discrete_kl_closed_form() {
        let kl = discrete_kl(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        let expected = 0.5 * (5.0f64 / 9.0).ln() + 0.5 * 5.0f64.ln();
        assert!((kl - expected).abs() < 1e-9);
        assert!((kl - 0.5108).abs() < 1e-4);
    }

    #[test]
    fn self_divergence_is_small_and_mismatch_is_larger() {
        let mut rng = spectrum_rng(4, 0);
        let d = RandNormal::new(0.0, 10.0).unwrap();
        let x: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let same = kl_divergence_binned(
            &x,
            NoiseModel::ConstantGaussian {
                mu: 0.0,
                variance: 100.0,
            },
            50,
        )
        .unwrap();
        let off = kl_divergence_binned(
            &x,
            NoiseModel::ConstantGaussian {
                mu: 0.0,
                variance: 1.0,
            },
            50,
        )
        .unwrap();
        assert!(same <= 0.05, "{same}");
        assert!(same < off);
        let d = RandNormal::new(400.0, 20.0).unwrap();
        let y: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        assert!(
            kl_divergence_binned(&y, NoiseModel::PoissonGaussian { mu: 400.0 }, 50).unwrap()
                <= 0.05
        );
    }

    #[test]
    fn kl_input_validation() {
        assert!(
            kl_divergence_binned(&[1.0; 200], NoiseModel::PoissonGaussian { mu: 1.0 }, 50).is_err()
        );
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(kl_divergence_binned(&x, NoiseModel::PoissonGaussian { mu: 1.0 }, 50).is_err());
        let x: Vec<f64> = (0..200).map(f64::from).collect();
        assert!(kl_divergence_binned(&x, NoiseModel::PoissonGaussian { mu: 1.0 }, 5).is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            x in proptest::collection::vec(-10.0f64..10.0, 100..300),
            mu in -5.0f64..5.0,
            var in 0.0f64..20.0,
        ) {
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-6));
            let kc = kl_divergence_binned(&x, NoiseModel::ConstantGaussian { mu, variance: var }, 20).unwrap();
            prop_assert!(kc >= -1e-12);
        }
    }

    fn corpus(n: usize, noise: impl Fn(f64, &mut rand_chacha::ChaCha20Rng) -> f64) -> SpectraBatch {
        let grid = Arc::new(WavelengthGrid::linspace(420.0, 730.0, 128).unwrap());
        let values = (0..n)
            .map(|j| {
                let mut rng = spectrum_rng(77, j as u64);
                let a: f64 = rng.random_range(0.5..1.5);
                grid.wavelengths()
                    .iter()
                    .map(|w| {
                        let clean = 2000.0 * a * (-0.5 * ((w - 560.0) / 60.0).powi(2)).exp() + 50.0;
                        clean + noise(clean, &mut rng)
                    })
                    .collect()
            })
            .collect();
        SpectraBatch::from_values(grid, values).unwrap()
    }

    #[test]
    fn poisson_corpus_prefers_poisson_model_and_constant_corpus_reverses() {
        let z =
            |rng: &mut rand_chacha::ChaCha20Rng| -> f64 { rng.sample(rand_distr::StandardNormal) };
        let poisson = corpus(2000, |s, rng| s.sqrt() * z(rng));
        let r = analyze_noise(&poisson, &NoiseConfig::default()).unwrap();
        assert!(
            r.mean_kl_poisson < r.mean_kl_constant,
            "{} vs {}",
            r.mean_kl_poisson,
            r.mean_kl_constant
        );
        assert!((0.85..1.15).contains(&r.slope), "slope {}", r.slope);
        let reg = mean_variance_regression(&r.signal_mean, &r.variance).unwrap();
        assert_eq!(reg.slope, r.slope);

        let constant = corpus(2000, |_, rng| 30.0 * z(rng));
        let c = analyze_noise(&constant, &NoiseConfig::default()).unwrap();
        assert!(c.mean_kl_constant < c.mean_kl_poisson);
    }

    #[test]
    fn analysis_needs_enough_spectra_and_spread() {
        let small = corpus(50, |_, _| 0.0);
        assert!(analyze_noise(&small, &NoiseConfig::default()).is_err());
        let grid = Arc::new(WavelengthGrid::linspace(420.0, 730.0, 64).unwrap());
        let flat = SpectraBatch::from_values(grid, vec![vec![5.0; 64]; 120]).unwrap();
        assert!(analyze_noise(&flat, &NoiseConfig::default()).is_err());
    }

    #[test]
    fn report_csv_and_json_round_trip() {
        let z =
            |rng: &mut rand_chacha::ChaCha20Rng| -> f64 { rng.sample(rand_distr::StandardNormal) };
        let r = analyze_noise(
            &corpus(150, |s, rng| s.sqrt() * z(rng)),
            &NoiseConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(dir.path().join("r.json")).unwrap();
        assert_eq!(
            NoiseReport::read_json(dir.path().join("r.json")).unwrap(),
            r
        );
        r.write_csv(dir.path().join("r.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(text.lines().count(), 129);
    }
}
