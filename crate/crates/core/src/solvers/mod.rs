//! Unmixing solvers for `argmin_{c >= 0} L(c)`.
//!
//! | algorithm | loss | method |
//! |-----------|------|--------|
//! | [`nnls`]  | `1/2 ||s - Bc||^2` | Lawson–Hanson active set |
//! | [`snnls`] | `1/2 ||s - Bc||^2 + lambda 1^T c` | heavy-ball projected gradient |
//! | [`ista`]  | same as SNNLS | iterative soft thresholding |
//! | [`snpr`]  | `1^T Bc - s^T log Bc + lambda 1^T c` | heavy-ball projected gradient |
//!
//! The gradient methods start from the clamped least-squares solution and
//! use the step schedule `eta_t = step_c0 / sqrt(t)`, `t = 1, 2, ...`.

mod batch;
mod gradient;
mod ista;
mod nnls;
mod objective;
mod prepared;
mod snpr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::AbundanceVector;

pub use batch::{unmix_batch, BatchOutput};
pub use gradient::snnls;
pub use ista::ista;
pub use nnls::nnls;
pub use objective::{ls_gradient, ls_lasso_gradient, poisson_gradient};
pub use prepared::{init_projected_ls, PreparedLibrary};
pub use snpr::snpr;

/// Consecutive loss increases after which an iterative solver gives up.
pub const DIVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nnls,
    Snnls,
    Ista,
    Snpr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Nnls,
        Algorithm::Snnls,
        Algorithm::Ista,
        Algorithm::Snpr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nnls => "nnls",
            Algorithm::Snnls => "snnls",
            Algorithm::Ista => "ista",
            Algorithm::Snpr => "snpr",
        }
    }

    /// Whether the algorithm uses `SolverConfig::lambda`.
    pub fn is_regularized(self) -> bool {
        !matches!(self, Algorithm::Nnls)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nnls" => Ok(Algorithm::Nnls),
            "snnls" => Ok(Algorithm::Snnls),
            "ista" => Ok(Algorithm::Ista),
            "snpr" => Ok(Algorithm::Snpr),
            other => Err(Error::invalid(format!(
                "unknown algorithm '{other}' (expected nnls, snnls, ista or snpr)"
            ))),
        }
    }
}

/// Hyperparameters shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// L1 weight.
    pub lambda: f64,
    /// Heavy-ball momentum in `[0, 1)`.
    pub mu: f64,
    /// Stop once `||c_t - c_{t-1}||_2 <= epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Step numerator in `eta_t = step_c0 / sqrt(t)`.
    pub step_c0: f64,
    /// Floor on `(Bc)_i` inside the Poisson log and its gradient.
    pub log_floor: f64,
    /// Run SNNLS with the momentum update `mu x + lambda 1 + B^T (s - Bc)`.
    /// That form ascends the data term; the default uses the descent
    /// gradient `B^T (Bc - s) + lambda 1`.
    pub literal_signs: bool,
    /// Record the objective after every iteration in `UnmixResult::loss_trace`.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mu: 0.9,
            epsilon: 1e-6,
            max_iters: 5000,
            step_c0: 0.01,
            log_floor: crate::spectra::LOG_FLOOR,
            literal_signs: false,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |field: &str, why: &str| Err(Error::invalid(format!("solver config: {field} {why}")));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda", "must be a finite nonnegative number");
        }
        if !(0.0..1.0).contains(&self.mu) {
            return bad("mu", "must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        if !(self.step_c0 > 0.0) || !self.step_c0.is_finite() {
            return bad("step_c0", "must be positive");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor", "must be positive");
        }
        Ok(())
    }
}

/// Solver output for one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmixResult {
    pub c: AbundanceVector,
    pub iterations: usize,
    pub converged: bool,
    /// Objective of the algorithm at `c`.
    pub final_loss: f64,
    pub runtime_ms: f64,
    /// Stopped by the divergence guard.
    pub diverged: bool,
    /// Negative spectrum entries clamped to zero before solving (SNPR only).
    pub clamped_inputs: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub loss_trace: Vec<f64>,
}

/// Runs `algorithm` on a single spectrum.
pub fn solve(
    prepared: &PreparedLibrary,
    s: &[f64],
    algorithm: Algorithm,
    config: &SolverConfig,
) -> Result<UnmixResult> {
    match algorithm {
        Algorithm::Nnls => nnls::nnls_prepared(prepared, s),
        Algorithm::Snnls => gradient::snnls_prepared(prepared, s, config),
        Algorithm::Ista => ista::ista_prepared(prepared, s, config),
        Algorithm::Snpr => snpr::snpr_prepared(prepared, s, config),
    }
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Tracks consecutive objective increases for the divergence guard.
#[derive(Debug, Default)]
pub(crate) struct IncreaseCounter {
    last: Option<f64>,
    run: usize,
}

impl IncreaseCounter {
    /// Returns true once the loss has risen `DIVERGENCE_WINDOW` times in a row.
    pub fn push(&mut self, loss: f64) -> bool {
        if !loss.is_finite() {
            return true;
        }
        if let Some(prev) = self.last {
            if loss > prev {
                self.run += 1;
            } else {
                self.run = 0;
            }
        }
        self.last = Some(loss);
        self.run >= DIVERGENCE_WINDOW
    }
}
