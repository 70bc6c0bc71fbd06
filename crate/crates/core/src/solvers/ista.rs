//! Iterative soft thresholding for the sparse least-squares loss.

use std::time::Instant;

use nalgebra::DMatrix;

use super::objective::{lasso_objective, Workspace};
use super::prepared::{init_from, PreparedLibrary};
use super::{euclid_dist, IncreaseCounter, SolverConfig, UnmixResult};
use crate::error::Result;
use crate::spectra::AbundanceVector;

/// ISTA with the update
///
/// ```text
/// x       = c_t - 2 eta (B^T (B c_t - s) + lambda 1)
/// c_{t+1} = max(|x| - lambda eta, 0) * sign(x), then clamped at 0
/// ```
///
/// `lambda` enters both the gradient step and the threshold, so the fixed
/// point satisfies `B^T (Bc - s) = -1.5 lambda` on the support rather than
/// the textbook `-lambda`.
pub fn ista(b: &DMatrix<f64>, s: &[f64], config: &SolverConfig) -> Result<UnmixResult> {
    let p = PreparedLibrary::new(b)?;
    ista_prepared(&p, s, config)
}

pub(crate) fn ista_prepared(
    p: &PreparedLibrary,
    s: &[f64],
    config: &SolverConfig,
) -> Result<UnmixResult> {
    let start = Instant::now();
    config.validate()?;
    p.check_spectrum(s)?;
    let lambda = config.lambda;
    let mut c = init_from(p, s);
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
        let half_sq = ws.ls_gradient(p.matrix(), s, lambda, false);
        // the literal update descends the same loss with penalty 1.5 lambda;
        // guarding on that surrogate avoids flagging the drift to its optimum
        if guard.push(half_sq + 1.5 * lambda * c.iter().sum::<f64>()) {
            diverged = true;
            break;
        }
        let tau = lambda * eta;
        for ((n, &ci), &gi) in next.iter_mut().zip(&c).zip(ws.grad.iter()) {
            let x = ci - 2.0 * eta * gi;
            *n = (x.signum() * (x.abs() - tau).max(0.0)).max(0.0);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::nnls;
    use crate::spectra::{ls_loss, soft_threshold};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_zero_reduces_to_nnls() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = DMatrix::from_fn(25, 3, |_, _| rng.random_range(0.0..1.0));
        let c0 = [0.0, 0.7, 0.2];
        let s: Vec<f64> = (b.clone() * DVector::from_column_slice(&c0))
            .iter()
            .copied()
            .collect();
        let r = ista(&b, &s, &SolverConfig::default()).unwrap();
        let exact = nnls(&b, &s).unwrap();
        for (a, e) in r.c.values().iter().zip(exact.c.values()) {
            assert!((a - e).abs() < 1e-3);
        }
    }

    #[test]
    fn single_endmember_follows_closed_form_recursion() {
        // one column b, s = alpha b: each step is the scalar map
        // c <- max(c - 2 eta (|b|^2 (c - alpha) + lambda) - lambda eta, 0)
        let b = DMatrix::from_column_slice(4, 1, &[0.5, 1.0, 0.8, 0.2]);
        let alpha = 1.3;
        let lambda = 0.01;
        let s: Vec<f64> = b.iter().map(|v| alpha * v).collect();
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let cfg = SolverConfig {
            lambda,
            max_iters: 40,
            epsilon: 1e-300,
            ..Default::default()
        };
        let r = ista(&b, &s, &cfg).unwrap();
        let mut c = alpha;
        for t in 1..=40 {
            let eta = 0.01 / (t as f64).sqrt();
            let x = c - 2.0 * eta * (bb * (c - alpha) + lambda);
            c = soft_threshold(&[x], lambda * eta).unwrap()[0].max(0.0);
        }
        assert!((r.c.values()[0] - c).abs() < 1e-12);
        assert!((c - alpha).abs() < 0.05);
    }

    #[test]
    fn unregularized_loss_is_nonincreasing_when_step_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            // ||B||_2^2 <= 15 * 3 * 0.25 keeps 2 eta L below 2 from t = 1
            let b = DMatrix::from_fn(15, 3, |_, _| rng.random_range(0.0..0.5));
            let s: Vec<f64> = (0..15).map(|_| rng.random_range(-0.5..1.5)).collect();
            let cfg = SolverConfig {
                record_trace: true,
                ..Default::default()
            };
            let r = ista(&b, &s, &cfg).unwrap();
            let mut prev =
                ls_loss(&init_from(&PreparedLibrary::new(&b).unwrap(), &s), &b, &s).unwrap();
            for &l in &r.loss_trace {
                assert!(l <= prev + 1e-12, "{l} > {prev}");
                prev = l;
            }
        }
    }

    #[test]
    fn output_is_nonnegative_and_sparse_for_large_lambda() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.5, 0.5, 0.1, 1.0]);
        let r = ista(&b, &[0.3, 0.2, 0.1], &SolverConfig::with_lambda(5.0)).unwrap();
        assert_eq!(r.c.values(), &[0.0, 0.0]);
    }
}
