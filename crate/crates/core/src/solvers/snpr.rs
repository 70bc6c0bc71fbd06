//! Sparse nonnegative Poisson regression.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::objective::{poisson_objective, Workspace};
use super::prepared::{init_from, PreparedLibrary};
use super::{euclid_dist, SolverConfig, UnmixResult};
use crate::error::Result;
use crate::spectra::AbundanceVector;

/// Step multiplier after a rejected trial.
const BACKOFF: f64 = 0.5;
/// Below this fraction of the scheduled step the iteration is considered stalled.
const MIN_GAIN: f64 = 1e-12;

/// `argmin_{c >= 0} 1^T Bc - s^T log(Bc) + lambda 1^T c`.
///
/// Heavy-ball projected gradient with `x_0 = 0`,
/// `x_{t+1} = mu x_t + lambda 1 + B^T 1 - B^T (s / Bc_t)` and
/// `c_{t+1} = max(c_t - eta_t x_{t+1}, 0)`, `eta_t = gain * step_c0 / sqrt(t)`.
///
/// The Poisson loss has no global Lipschitz gradient: curvature grows like
/// `s_i / (Bc)_i^2` wherever the model is small, so the fixed schedule can
/// blow up. Each iteration therefore backtracks: a trial that would raise the
/// objective is rejected, the momentum is cleared and the step halves until
/// the objective does not increase. The next iteration starts again from the
/// scheduled `eta_t`. `t` advances only on accepted steps, `iterations`
/// counts every trial.
///
/// Negative entries of `s` are clamped to zero first (counted in
/// `clamped_inputs`). An all-zero spectrum returns `c = 0` immediately.
pub fn snpr(b: &DMatrix<f64>, s: &[f64], config: &SolverConfig) -> Result<UnmixResult> {
    let p = PreparedLibrary::new(b)?;
    snpr_prepared(&p, s, config)
}

pub(crate) fn snpr_prepared(
    p: &PreparedLibrary,
    s: &[f64],
    config: &SolverConfig,
) -> Result<UnmixResult> {
    let start = Instant::now();
    config.validate()?;
    p.check_spectrum(s)?;
    let clamped_inputs = s.iter().filter(|&&v| v < 0.0).count();
    let s: Vec<f64> = s.iter().map(|&v| v.max(0.0)).collect();
    let (lambda, floor) = (config.lambda, config.log_floor);
    let k = p.k();

    if s.iter().all(|&v| v == 0.0) {
        return Ok(UnmixResult {
            c: AbundanceVector::zeros(k),
            iterations: 0,
            converged: true,
            final_loss: 0.0,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            diverged: false,
            clamped_inputs,
            loss_trace: Vec::new(),
        });
    }

    let mut c = init_from(p, &s);
    // zero velocity keeps an optimal start fixed
    let mut momentum = DVector::zeros(p.k());
    let mut ws = Workspace::new(p.m(), k);
    let mut trial = Workspace::new(p.m(), k);
    let mut next = vec![0.0; k];
    let mut trace = Vec::new();
    let mut gain = 1.0;
    let mut t = 1usize;
    let mut converged = false;
    let mut stalled = false;
    let mut iterations = 0;

    ws.load(&c);
    ws.poisson_gradient(p.matrix(), p.col_sums(), &s, lambda, floor);
    let mut loss = poisson_objective(&ws.fwd, &s, &c, lambda, floor);

    while iterations < config.max_iters {
        iterations += 1;
        let eta = gain * config.step_c0 / (t as f64).sqrt();
        let mut velocity = momentum.clone() * config.mu;
        velocity += &ws.grad;
        for ((n, &ci), &vi) in next.iter_mut().zip(&c).zip(velocity.iter()) {
            *n = (ci - eta * vi).max(0.0);
        }
        trial.load(&next);
        trial.forward(p.matrix());
        let trial_loss = poisson_objective(&trial.fwd, &s, &next, lambda, floor);

        if !(trial_loss <= loss) {
            gain *= BACKOFF;
            momentum.fill(0.0);
            if gain < MIN_GAIN {
                stalled = true;
                break;
            }
            continue;
        }

        trial.poisson_gradient_from_forward(p.matrix(), p.col_sums(), &s, lambda, floor);
        let step = euclid_dist(&next, &c);
        std::mem::swap(&mut c, &mut next);
        std::mem::swap(&mut ws, &mut trial);
        momentum = velocity;
        loss = trial_loss;
        t += 1;
        gain = 1.0;
        if config.record_trace {
            trace.push(loss);
        }
        if step <= config.epsilon {
            converged = true;
            break;
        }
    }

    Ok(UnmixResult {
        c: AbundanceVector::new(c)?,
        iterations,
        converged,
        final_loss: loss,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        diverged: stalled,
        clamped_inputs,
        loss_trace: trace,
    })
}
