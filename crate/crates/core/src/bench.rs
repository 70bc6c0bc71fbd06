//! Solver comparison on simulated corpora.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::EndmemberLibrary;
use crate::simulate::{simulate, Simulation, SimulationConfig};
use crate::solvers::{solve, Algorithm, PreparedLibrary, SolverConfig, UnmixResult};
use crate::spectra::{sam_cosine, ZERO_TOL};

/// One `(algorithm, lambda)` cell of the benchmark grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub lambda: f64,
}

impl GridEntry {
    pub fn new(algorithm: Algorithm, lambda: f64) -> Self {
        Self { algorithm, lambda }
    }
}

/// ISTA {1.2, 1.4, 1.6}, SNNLS {0.3, 0.4}, SNPR {0.25, 0.35, 0.45} and NNLS.
pub fn default_grid() -> Vec<GridEntry> {
    let mut g = Vec::new();
    for l in [1.2, 1.4, 1.6] {
        g.push(GridEntry::new(Algorithm::Ista, l));
    }
    for l in [0.3, 0.4] {
        g.push(GridEntry::new(Algorithm::Snnls, l));
    }
    for l in [0.25, 0.35, 0.45] {
        g.push(GridEntry::new(Algorithm::Snpr, l));
    }
    g.push(GridEntry::new(Algorithm::Nnls, 0.0));
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Corpus settings; its seed is replaced by `seed`.
    pub corpus: SimulationConfig,
    pub grid: Vec<GridEntry>,
    /// Timed passes per row; the reported runtime is their median.
    pub repetitions: usize,
    pub seed: u64,
    /// Settings shared by every row except `lambda`.
    pub solver: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            corpus: SimulationConfig::default(),
            grid: default_grid(),
            repetitions: 3,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("bench grid is empty"));
        }
        if let Some(e) = self
            .grid
            .iter()
            .find(|e| !(e.lambda.is_finite() && e.lambda >= 0.0))
        {
            return Err(Error::invalid(format!(
                "grid entry {} has invalid lambda {}",
                e.algorithm, e.lambda
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        self.corpus.validate()?;
        self.solver.validate()
    }

    pub fn corpus_config(&self) -> SimulationConfig {
        SimulationConfig {
            seed: self.seed,
            ..self.corpus.clone()
        }
    }
}

/// Metrics of one grid entry over the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub reconstruction_mse_mean: f64,
    pub reconstruction_mse_std: f64,
    pub abundance_mse_mean: f64,
    pub abundance_mse_std: f64,
    pub false_positives: usize,
    pub l0_mean: f64,
    pub sam_mean: f64,
    pub sam_std: f64,
    pub runtime_per_spectrum_ms: f64,
    pub converged: usize,
    /// Spectra on which the solver returned an error; excluded from the metrics.
    pub failures: usize,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "algorithm,lambda,reconstruction_mse_mean,reconstruction_mse_std,abundance_mse_mean,abundance_mse_std,false_positives,l0_mean,sam_mean,sam_std,runtime_per_spectrum_ms,converged,failures";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.lambda,
            self.reconstruction_mse_mean,
            self.reconstruction_mse_std,
            self.abundance_mse_mean,
            self.abundance_mse_std,
            self.false_positives,
            self.l0_mean,
            self.sam_mean,
            self.sam_std,
            self.runtime_per_spectrum_ms,
            self.converged,
            self.failures
        )
    }

    pub fn is(&self, algorithm: Algorithm, lambda: f64) -> bool {
        self.algorithm == algorithm
            && (algorithm == Algorithm::Nnls || (self.lambda - lambda).abs() < 1e-9)
    }
}

pub fn write_rows(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{}", BenchRow::CSV_HEADER).map_err(io)?;
    for r in rows {
        writeln!(out, "{}", r.csv_line()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Mean and sample standard deviation; a single value has std 0.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Runs every grid entry over `sim` and summarizes against its ground truth.
pub fn evaluate(
    lib: &EndmemberLibrary,
    sim: &Simulation,
    entry: GridEntry,
    solver: &SolverConfig,
    repetitions: usize,
) -> Result<BenchRow> {
    let prepared = PreparedLibrary::new(lib.matrix())?;
    let cfg = SolverConfig {
        lambda: entry.lambda,
        ..*solver
    };
    cfg.validate()?;
    let spectra = sim.spectra.spectra();
    let mut times = Vec::with_capacity(repetitions);
    let mut results: Vec<Result<UnmixResult>> = Vec::new();
    for rep in 0..repetitions.max(1) {
        let start = Instant::now();
        let run: Vec<Result<UnmixResult>> = spectra
            .iter()
            .map(|s| solve(&prepared, s.values(), entry.algorithm, &cfg))
            .collect();
        times.push(start.elapsed().as_secs_f64() * 1e3 / spectra.len() as f64);
        if rep == 0 {
            results = run;
        }
    }

    Ok(summarize(lib, sim, entry, &results, median(times)))
}

/// Builds a row from per-spectrum solver outcomes on `sim`. Failed spectra
/// are counted and left out of the statistics.
pub fn summarize(
    lib: &EndmemberLibrary,
    sim: &Simulation,
    entry: GridEntry,
    results: &[Result<UnmixResult>],
    runtime_per_spectrum_ms: f64,
) -> BenchRow {
    let mut recon = Vec::new();
    let mut ab = Vec::new();
    let mut sam = Vec::new();
    let (mut fp, mut l0, mut converged, mut failures) = (0, 0, 0, 0);
    for ((res, s), truth) in results.iter().zip(sim.spectra.spectra()).zip(&sim.truth) {
        let r = match res {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{} lambda {}: {e}", entry.algorithm, entry.lambda);
                failures += 1;
                continue;
            }
        };
        let c = r.c.values();
        let fit = lib.matrix() * DVector::from_column_slice(c);
        recon.push(
            fit.iter()
                .zip(s.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        );
        ab.push(
            c.iter()
                .zip(truth)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        );
        // an all-zero reconstruction has no direction; count it as orthogonal
        sam.push(sam_cosine(s.values(), fit.as_slice()).unwrap_or(0.0));
        fp += c
            .iter()
            .zip(truth)
            .filter(|(&x, &y)| y == 0.0 && x > ZERO_TOL)
            .count();
        l0 += c.iter().filter(|&&v| v > ZERO_TOL).count();
        converged += usize::from(r.converged);
    }
    let ok = recon.len();
    let (reconstruction_mse_mean, reconstruction_mse_std) = mean_std(&recon);
    let (abundance_mse_mean, abundance_mse_std) = mean_std(&ab);
    let (sam_mean, sam_std) = mean_std(&sam);
    BenchRow {
        algorithm: entry.algorithm,
        lambda: if entry.algorithm == Algorithm::Nnls {
            0.0
        } else {
            entry.lambda
        },
        reconstruction_mse_mean,
        reconstruction_mse_std,
        abundance_mse_mean,
        abundance_mse_std,
        false_positives: fp,
        l0_mean: if ok > 0 {
            l0 as f64 / ok as f64
        } else {
            f64::NAN
        },
        sam_mean,
        sam_std,
        runtime_per_spectrum_ms,
        converged,
        failures,
    }
}

/// Simulates the corpus and evaluates every grid entry on it, in grid order.
pub fn run_benchmark(lib: &EndmemberLibrary, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let sim = simulate(lib, &config.corpus_config())?;
    config
        .grid
        .iter()
        .map(|&e| evaluate(lib, &sim, e, &config.solver, config.repetitions))
        .collect()
}

/// Column statistics of an abundance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberStats {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub percent_nonzero: f64,
}

/// Per-endmember mean, median, sample std and share of rows above
/// [`ZERO_TOL`] (in percent). `rows` holds one abundance vector per spectrum.
pub fn abundance_statistics<R: AsRef<[f64]>>(
    rows: &[R],
    names: &[String],
) -> Result<Vec<EndmemberStats>> {
    if rows.is_empty() || names.is_empty() {
        return Err(Error::invalid("abundance statistics of an empty table"));
    }
    if rows.iter().any(|r| r.as_ref().len() != names.len()) {
        return Err(Error::dim(format!(
            "every row needs {} values",
            names.len()
        )));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r.as_ref()[j]).collect();
            let (mean, std) = mean_std(&col);
            let nz = col.iter().filter(|&&v| v > ZERO_TOL).count();
            EndmemberStats {
                name: name.clone(),
                mean,
                median: median(col.clone()),
                std,
                percent_nonzero: 100.0 * nz as f64 / col.len() as f64,
            }
        })
        .collect())
}

/// Outcome of one ordering check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn find(rows: &[BenchRow], a: Algorithm, l: f64) -> Option<&BenchRow> {
    rows.iter().find(|r| r.is(a, l))
}

/// Orderings expected on the default corpus:
///
/// * NNLS has the lowest reconstruction error of all rows,
/// * mean L0 of ISTA at 1.4 is below NNLS,
/// * false positives: ISTA 1.4 < SNPR 0.35 < NNLS,
/// * no row had solver failures.
pub fn check_orderings(rows: &[BenchRow]) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        })
    };
    let nnls = find(rows, Algorithm::Nnls, 0.0);
    let ista = find(rows, Algorithm::Ista, 1.4);
    let snpr = find(rows, Algorithm::Snpr, 0.35);

    match nnls {
        Some(n) => {
            let best_sparse = rows
                .iter()
                .filter(|r| r.algorithm != Algorithm::Nnls)
                .map(|r| r.reconstruction_mse_mean)
                .fold(f64::INFINITY, f64::min);
            push(
                "nnls_lowest_reconstruction_error",
                n.reconstruction_mse_mean <= best_sparse,
                format!(
                    "nnls {:.6e}, best sparse {:.6e}",
                    n.reconstruction_mse_mean, best_sparse
                ),
            );
        }
        None => push(
            "nnls_lowest_reconstruction_error",
            false,
            "no nnls row".into(),
        ),
    }
    match (ista, nnls) {
        (Some(i), Some(n)) => push(
            "ista_sparser_than_nnls",
            i.l0_mean < n.l0_mean,
            format!("L0 ista {:.3}, nnls {:.3}", i.l0_mean, n.l0_mean),
        ),
        _ => push(
            "ista_sparser_than_nnls",
            false,
            "needs ista 1.4 and nnls rows".into(),
        ),
    }
    match (ista, snpr, nnls) {
        (Some(i), Some(s), Some(n)) => push(
            "false_positive_ordering",
            i.false_positives < s.false_positives && s.false_positives < n.false_positives,
            format!(
                "ista {} < snpr {} < nnls {}",
                i.false_positives, s.false_positives, n.false_positives
            ),
        ),
        _ => push(
            "false_positive_ordering",
            false,
            "needs ista 1.4, snpr 0.35 and nnls rows".into(),
        ),
    }
    let failed: usize = rows.iter().map(|r| r.failures).sum();
    push(
        "no_solver_failures",
        failed == 0,
        format!("{failed} failed spectra"),
    );
    out
}
