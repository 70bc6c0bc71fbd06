use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, Algorithm, PreparedLibrary, SolverConfig, UnmixResult};
use crate::error::{Error, Result};
use crate::library::EndmemberLibrary;
use crate::spectra::Spectrum;

/// Results of [`unmix_batch`] in input order, with wall-clock timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    pub results: Vec<UnmixResult>,
    pub total_ms: f64,
    /// `total_ms / n`.
    pub per_spectrum_ms: f64,
}

/// Unmixes every spectrum independently against `lib`.
///
/// `threads == 1` runs sequentially on the calling thread, `0` uses the
/// global rayon pool and any other value a dedicated pool of that size.
/// Results do not depend on the thread count.
pub fn unmix_batch(
    lib: &EndmemberLibrary,
    spectra: &[Spectrum],
    algorithm: Algorithm,
    config: &SolverConfig,
    threads: usize,
) -> Result<BatchOutput> {
    config.validate()?;
    if let Some((i, _)) = spectra
        .iter()
        .enumerate()
        .find(|(_, s)| !s.grid().approx_eq(lib.grid()))
    {
        return Err(Error::GridMismatch(format!(
            "spectrum {i} is sampled on {} wavelengths ({}..{} nm), the library on {} ({}..{} nm); resample first",
            spectra[i].len(),
            spectra[i].grid().start(),
            spectra[i].grid().end(),
            lib.m(),
            lib.grid().start(),
            lib.grid().end()
        )));
    }
    let prepared = PreparedLibrary::new(lib.matrix())?;
    let one = |s: &Spectrum| solve(&prepared, s.values(), algorithm, config);

    let start = Instant::now();
    let results: Result<Vec<UnmixResult>> = match threads {
        1 => spectra.iter().map(one).collect(),
        0 => spectra.par_iter().map(one).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {n} worker threads: {e}")))?
            .install(|| spectra.par_iter().map(one).collect()),
    };
    let results = results?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let per_spectrum_ms = if spectra.is_empty() {
        0.0
    } else {
        total_ms / spectra.len() as f64
    };
    Ok(BatchOutput {
        results,
        total_ms,
        per_spectrum_ms,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::library::synthetic_default_library;
    use crate::spectra::WavelengthGrid;

    fn setup(n: usize) -> (EndmemberLibrary, Vec<Spectrum>) {
        let grid = Arc::new(WavelengthGrid::default_grid());
        let lib = synthetic_default_library(grid.clone()).unwrap();
        let spectra = (0..n)
            .map(|i| {
                let c: Vec<f64> = (0..lib.k())
                    .map(|j| ((i * 7 + j * 3) % 5) as f64 * 0.1)
                    .collect();
                let v = lib.matrix() * nalgebra::DVector::from_column_slice(&c);
                let noisy: Vec<f64> = v
                    .iter()
                    .enumerate()
                    .map(|(r, x)| x + 1e-3 * ((r * 31 + i) % 7) as f64)
                    .collect();
                Spectrum::new(grid.clone(), noisy).unwrap()
            })
            .collect();
        (lib, spectra)
    }

    fn strip(mut r: UnmixResult) -> UnmixResult {
        r.runtime_ms = 0.0;
        r
    }

    #[test]
    fn single_spectrum_batch_matches_direct_call() {
        let (lib, spectra) = setup(1);
        let cfg = SolverConfig::with_lambda(1.4);
        let out = unmix_batch(&lib, &spectra, Algorithm::Ista, &cfg, 1).unwrap();
        let p = PreparedLibrary::new(lib.matrix()).unwrap();
        let direct = solve(&p, spectra[0].values(), Algorithm::Ista, &cfg).unwrap();
        assert_eq!(strip(out.results[0].clone()), strip(direct));
    }

    #[test]
    fn results_independent_of_order_and_threads() {
        let (lib, spectra) = setup(24);
        let cfg = SolverConfig::with_lambda(0.35);
        for algo in Algorithm::ALL {
            let seq = unmix_batch(&lib, &spectra, algo, &cfg, 1).unwrap();
            let par = unmix_batch(&lib, &spectra, algo, &cfg, 4).unwrap();
            let mut rev_in = spectra.clone();
            rev_in.reverse();
            let rev = unmix_batch(&lib, &rev_in, algo, &cfg, 0).unwrap();
            for (i, r) in seq.results.iter().enumerate() {
                assert_eq!(strip(r.clone()), strip(par.results[i].clone()));
                assert_eq!(
                    strip(r.clone()),
                    strip(rev.results[spectra.len() - 1 - i].clone())
                );
            }
        }
    }

    #[test]
    fn per_spectrum_time_is_total_over_n() {
        let (lib, spectra) = setup(10);
        let out =
            unmix_batch(&lib, &spectra, Algorithm::Nnls, &SolverConfig::default(), 1).unwrap();
        assert!((out.per_spectrum_ms * 10.0 - out.total_ms).abs() < 1e-9);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (lib, _) = setup(0);
        let other = Arc::new(WavelengthGrid::linspace(420.0, 730.0, 156).unwrap());
        let s = Spectrum::new(other, vec![0.0; 156]).unwrap();
        let err =
            unmix_batch(&lib, &[s], Algorithm::Nnls, &SolverConfig::default(), 1).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
    }
}
