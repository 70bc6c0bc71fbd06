use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use unmix_core::bench::{self, BenchConfig, BenchRow, GridEntry};
use unmix_core::library::{
    export_library, load_library, read_abundances, synthetic_default_library, write_abundances,
    AbundanceTable,
};
use unmix_core::noise::{analyze_noise, NoiseConfig};
use unmix_core::simulate::{simulate as run_simulation, NoiseMode, Simulation, SimulationConfig};
use unmix_core::solvers::unmix_batch;
use unmix_core::{
    Algorithm, EndmemberLibrary, SolverConfig, SpectraBatch, Spectrum, WavelengthGrid,
};

use crate::error::CliError;
use crate::meta::{ensure_dir, write_json, LibraryInfo, Meta};
use crate::{BenchArgs, LibraryArgs, NoiseArgs, SimulateArgs, UnmixArgs};

/// Loads `path`, or builds the built-in library, on `target` if given.
fn obtain_library(
    path: Option<&Path>,
    target: Option<Arc<WavelengthGrid>>,
) -> Result<(EndmemberLibrary, LibraryInfo), CliError> {
    match path {
        Some(p) => {
            let (lib, diag) = load_library(p, target)?;
            let info = LibraryInfo::new(&lib, Some(p), diag.clamped, diag.resampled)?;
            Ok((lib, info))
        }
        None => {
            let default = Arc::new(WavelengthGrid::default_grid());
            let resampled = target.as_ref().is_some_and(|t| !t.approx_eq(&default));
            let lib = synthetic_default_library(target.unwrap_or(default))?;
            let info = LibraryInfo::new(&lib, None, 0, resampled)?;
            Ok((lib, info))
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn library(args: &LibraryArgs) -> Result<(), CliError> {
    let (lib, info) = obtain_library(args.library.as_deref(), None)?;
    let out = ensure_dir(&args.out)?;
    export_library(&lib, out.join("library.csv"))?;
    println!(
        "library: {} endmembers on {} wavelengths ({:.1}-{:.1} nm), Gram condition {:.3e}",
        lib.k(),
        lib.m(),
        lib.grid().start(),
        lib.grid().end(),
        lib.gram_condition()
    );
    Meta::new(
        "library",
        serde_json::json!({}),
        Some(info),
        &["library.csv"],
    )
    .write(&out)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut config: SimulationConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.literal_noise {
        config.noise_mode = NoiseMode::Literal;
    }
    config.validate()?;
    let (lib, info) = obtain_library(args.library.as_deref(), None)?;
    let sim = run_simulation(&lib, &config)?;
    let out = ensure_dir(&args.out)?;
    sim.spectra.write_csv(out.join("spectra.csv"))?;
    write_abundances(out.join("truth.csv"), &sim.truth_table(lib.names()))?;
    println!(
        "simulated {} spectra on {} wavelengths (seed {})",
        config.n,
        lib.m(),
        config.seed
    );
    Meta::new(
        "simulate",
        &config,
        Some(info),
        &["spectra.csv", "truth.csv"],
    )
    .write(&out)
}

#[derive(Serialize)]
struct UnmixParams<'a> {
    algorithm: Algorithm,
    solver: &'a SolverConfig,
    spectra: String,
    truth: Option<String>,
    resample: bool,
}

#[derive(Serialize)]
struct SpectrumDiagnostics<'a> {
    id: &'a str,
    iterations: usize,
    converged: bool,
    diverged: bool,
    final_loss: f64,
    clamped_inputs: usize,
    runtime_ms: f64,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    algorithm: Algorithm,
    n_spectra: usize,
    converged: usize,
    diverged: usize,
    total_ms: f64,
    per_spectrum_ms: f64,
    /// Present when ground truth was supplied.
    metrics: Option<BenchRow>,
    spectra: Vec<SpectrumDiagnostics<'a>>,
}

/// Reorders `truth` to the library's endmember order and the batch's id order.
fn align_truth(
    table: AbundanceTable,
    lib: &EndmemberLibrary,
    batch: &SpectraBatch,
) -> Result<Vec<Vec<f64>>, CliError> {
    let cols = lib
        .names()
        .iter()
        .map(|n| {
            table.names.iter().position(|t| t == n).ok_or_else(|| {
                CliError::Usage(format!("truth file has no column for endmember '{n}'"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if table.names.len() != cols.len() {
        return Err(CliError::Usage(
            "truth file has columns not in the library".into(),
        ));
    }
    let index: std::collections::HashMap<&str, usize> = table
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    batch
        .ids()
        .iter()
        .map(|id| {
            let &r = index.get(id.as_str()).ok_or_else(|| {
                CliError::Usage(format!("truth file has no row for spectrum '{id}'"))
            })?;
            Ok(cols.iter().map(|&c| table.rows[r][c]).collect())
        })
        .collect()
}

pub fn unmix(args: &UnmixArgs) -> Result<(), CliError> {
    let s = &args.solver;
    let config = SolverConfig {
        lambda: s.lambda,
        mu: s.mu,
        epsilon: s.eps,
        max_iters: s.max_iters,
        step_c0: s.step,
        literal_signs: s.literal_signs,
        ..SolverConfig::default()
    };
    config.validate()?;
    let batch = SpectraBatch::read_csv(&args.spectra)?;
    let target = args.resample.then(|| batch.grid().clone());
    let (lib, info) = obtain_library(args.library.as_deref(), target)?;
    let output = unmix_batch(&lib, batch.spectra(), s.algo, &config, 0)?;

    let metrics = match &args.truth {
        Some(p) => {
            let truth = align_truth(read_abundances(p)?, &lib, &batch)?;
            let sim = Simulation {
                spectra: batch.clone(),
                truth,
            };
            let results: Vec<_> = output.results.iter().cloned().map(Ok).collect();
            Some(bench::summarize(
                &lib,
                &sim,
                GridEntry::new(s.algo, s.lambda),
                &results,
                output.per_spectrum_ms,
            ))
        }
        None => None,
    };

    let out = ensure_dir(&args.out)?;
    write_abundances(
        out.join("abundances.csv"),
        &AbundanceTable {
            names: lib.names().to_vec(),
            ids: batch.ids().to_vec(),
            rows: output
                .results
                .iter()
                .map(|r| r.c.values().to_vec())
                .collect(),
        },
    )?;
    let diagnostics = Diagnostics {
        algorithm: s.algo,
        n_spectra: batch.len(),
        converged: output.results.iter().filter(|r| r.converged).count(),
        diverged: output.results.iter().filter(|r| r.diverged).count(),
        total_ms: output.total_ms,
        per_spectrum_ms: output.per_spectrum_ms,
        metrics,
        spectra: batch
            .ids()
            .iter()
            .zip(&output.results)
            .map(|(id, r)| SpectrumDiagnostics {
                id,
                iterations: r.iterations,
                converged: r.converged,
                diverged: r.diverged,
                final_loss: r.final_loss,
                clamped_inputs: r.clamped_inputs,
                runtime_ms: r.runtime_ms,
            })
            .collect(),
    };
    write_json(&out.join("diagnostics.json"), &diagnostics)?;
    println!(
        "{}: unmixed {} spectra, {} converged, {:.3} ms per spectrum",
        s.algo,
        batch.len(),
        diagnostics.converged,
        output.per_spectrum_ms
    );
    if let Some(m) = &diagnostics.metrics {
        println!(
            "reconstruction mse {:.4e}, abundance mse {:.4e}, false positives {}, mean L0 {:.3}",
            m.reconstruction_mse_mean, m.abundance_mse_mean, m.false_positives, m.l0_mean
        );
    }
    let params = UnmixParams {
        algorithm: s.algo,
        solver: &config,
        spectra: args.spectra.display().to_string(),
        truth: args.truth.as_ref().map(|p| p.display().to_string()),
        resample: args.resample,
    };
    Meta::new(
        "unmix",
        params,
        Some(info),
        &["abundances.csv", "diagnostics.json"],
    )
    .write(&out)
}

#[derive(Serialize)]
struct NoiseParams<'a> {
    spectra: String,
    scale: f64,
    config: &'a NoiseConfig,
}

pub fn noise(args: &NoiseArgs) -> Result<(), CliError> {
    if !(args.scale.is_finite() && args.scale > 0.0) {
        return Err(CliError::Usage(format!(
            "--scale must be positive, got {}",
            args.scale
        )));
    }
    let config = NoiseConfig {
        cutoff: args.cutoff,
        bins: args.bins,
        ..NoiseConfig::default()
    };
    let mut batch = SpectraBatch::read_csv(&args.spectra)?;
    if args.scale != 1.0 {
        let scaled = batch
            .spectra()
            .iter()
            .map(|s| {
                Spectrum::new(
                    s.grid().clone(),
                    s.values().iter().map(|v| v * args.scale).collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        batch = SpectraBatch::new(batch.grid().clone(), batch.ids().to_vec(), scaled)?;
    }
    let report = analyze_noise(&batch, &config)?;
    let out = ensure_dir(&args.out)?;
    report.write_json(out.join("noise_report.json"))?;
    report.write_csv(out.join("noise.csv"))?;
    println!(
        "noise over {} spectra: variance = {:.4} * mean + {:.4} (R^2 {:.4}, r {:.4})",
        report.n_spectra, report.slope, report.intercept, report.r_squared, report.correlation
    );
    println!(
        "mean KL: signal-dependent model {:.4e}, constant model {:.4e}",
        report.mean_kl_poisson, report.mean_kl_constant
    );
    let params = NoiseParams {
        spectra: args.spectra.display().to_string(),
        scale: args.scale,
        config: &config,
    };
    Meta::new("noise", params, None, &["noise_report.json", "noise.csv"]).write(&out)
}

fn print_table(rows: &[BenchRow]) {
    println!(
        "{:<6} {:>6} {:>12} {:>12} {:>8} {:>7} {:>8} {:>10} {:>9}",
        "algo", "lambda", "recon_mse", "abund_mse", "fp", "L0", "sam", "ms/spec", "converged"
    );
    for r in rows {
        println!(
            "{:<6} {:>6} {:>12.4e} {:>12.4e} {:>8} {:>7.3} {:>8.5} {:>10.4} {:>9}",
            r.algorithm.name(),
            r.lambda,
            r.reconstruction_mse_mean,
            r.abundance_mse_mean,
            r.false_positives,
            r.l0_mean,
            r.sam_mean,
            r.runtime_per_spectrum_ms,
            r.converged
        );
    }
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let mut config: BenchConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => BenchConfig::default(),
    };
    if let Some(n) = args.n {
        config.corpus.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.repetitions {
        config.repetitions = r;
    }
    config.validate()?;
    let (lib, info) = obtain_library(args.library.as_deref(), None)?;
    let rows = bench::run_benchmark(&lib, &config)?;
    let checks = bench::check_orderings(&rows);
    let out = ensure_dir(&args.out)?;
    bench::write_rows(out.join("bench.csv"), &rows)?;
    write_json(&out.join("checks.json"), &checks)?;
    print_table(&rows);
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "ok" } else { "FAILED" },
            c.name,
            c.detail
        );
    }
    Meta::new("bench", &config, Some(info), &["bench.csv", "checks.json"]).write(&out)?;
    if args.check {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        if !failed.is_empty() {
            return Err(CliError::Check(failed.join(", ")));
        }
    }
    Ok(())
}
