//! Heavy-ball projected gradient descent for the sparse least-squares loss.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::objective::{lasso_objective, Workspace};
use super::prepared::{init_from, PreparedLibrary};
use super::{euclid_dist, IncreaseCounter, SolverConfig, UnmixResult};
use crate::error::Result;
use crate::spectra::AbundanceVector;

/// Sparse NNLS: `argmin_{c >= 0} 1/2 ||s - Bc||^2 + lambda 1^T c`.
///
/// Iterates `x_{t+1} = mu x_t + g(c_t)`, `c_{t+1} = max(c_t - eta_t x_{t+1}, 0)`
/// from the clamped least-squares start with `x_0 = 0`.
pub fn snnls(b: &DMatrix<f64>, s: &[f64], config: &SolverConfig) -> Result<UnmixResult> {
    let p = PreparedLibrary::new(b)?;
    snnls_prepared(&p, s, config)
}

pub(crate) fn snnls_prepared(
    p: &PreparedLibrary,
    s: &[f64],
    config: &SolverConfig,
) -> Result<UnmixResult> {
    let start = Instant::now();
    config.validate()?;
    p.check_spectrum(s)?;
    let lambda = config.lambda;
    let mut c = init_from(p, s);
    // zero velocity keeps an optimal start fixed
    let mut momentum = DVector::zeros(p.k());
    let mut ws = Workspace::new(p.m(), p.k());
    let mut next = vec![0.0; p.k()];
    let mut guard = IncreaseCounter::default();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    for t in 1..=config.max_iters {
        iterations = t;
        let eta = config.step_c0 / (t as f64).sqrt();
        ws.load(&c);
        let half_sq = ws.ls_gradient(p.matrix(), s, lambda, config.literal_signs);
        let loss = half_sq + lambda * c.iter().sum::<f64>();
        if guard.push(loss) {
            diverged = true;
            break;
        }
        momentum *= config.mu;
        momentum += &ws.grad;
        for ((n, &ci), &xi) in next.iter_mut().zip(&c).zip(momentum.iter()) {
            *n = (ci - eta * xi).max(0.0);
        }
        let step = euclid_dist(&next, &c);
        std::mem::swap(&mut c, &mut next);
        if config.record_trace {
            trace.push(lasso_objective(p, &mut ws, &c, s, lambda));
        }
        if !step.is_finite() {
            diverged = true;
            break;
        }
        if step <= config.epsilon {
            converged = true;
            break;
        }
    }
    if diverged || c.iter().any(|v| !v.is_finite()) {
        c.iter_mut()
            .filter(|v| !v.is_finite())
            .for_each(|v| *v = 0.0);
        diverged = true;
    }
    let final_loss = lasso_objective(p, &mut ws, &c, s, lambda);
    Ok(UnmixResult {
        c: AbundanceVector::new(c)?,
        iterations,
        converged: converged && !diverged,
        final_loss,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        diverged,
        clamped_inputs: 0,
        loss_trace: trace,
    })
}
