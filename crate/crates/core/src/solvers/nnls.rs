//! Lawson–Hanson active-set NNLS, run on the normal equations.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::prepared::PreparedLibrary;
use super::UnmixResult;
use crate::error::Result;
use crate::spectra::{ls_loss, AbundanceVector};

/// Dual feasibility tolerance: stop when every inactive `w_j <= DUAL_TOL`.
const DUAL_TOL: f64 = 1e-10;

/// `argmin_{c >= 0} 1/2 ||s - Bc||^2`.
pub fn nnls(b: &DMatrix<f64>, s: &[f64]) -> Result<UnmixResult> {
    let p = PreparedLibrary::new(b)?;
    nnls_prepared(&p, s)
}

pub(crate) fn nnls_prepared(p: &PreparedLibrary, s: &[f64]) -> Result<UnmixResult> {
    let start = Instant::now();
    p.check_spectrum(s)?;
    let bts = p.bt(s);
    let (c, iterations) = lawson_hanson(p.gram(), &bts);
    let final_loss = ls_loss(&c, p.matrix(), s)?;
    Ok(UnmixResult {
        c: AbundanceVector::new(c)?,
        iterations,
        converged: true,
        final_loss,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        diverged: false,
        clamped_inputs: 0,
        loss_trace: Vec::new(),
    })
}

/// Solves `min 1/2 c^T G c - c^T h` over `c >= 0` for `G = B^T B`, `h = B^T s`.
/// Returns the solution and the number of outer iterations.
pub(crate) fn lawson_hanson(gram: &DMatrix<f64>, h: &DVector<f64>) -> (Vec<f64>, usize) {
    let k = h.len();
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    // variables that reentered with a nonpositive subproblem value; skipped
    // until the next change of the active set to avoid cycling on roundoff
    let mut blocked = vec![false; k];
    let mut outer = 0;
    let max_outer = 3 * k + 10;

    loop {
        let w = dual(gram, h, &x);
        let pick = (0..k)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = pick else { break };
        if w[j] <= DUAL_TOL || outer >= max_outer {
            break;
        }
        outer += 1;
        passive[j] = true;

        loop {
            let z = restricted_solve(gram, h, &passive);
            if passive.iter().zip(&z).all(|(&p, &v)| !p || v > 0.0) {
                x = z;
                break;
            }
            // step from x toward z until the first passive variable hits zero
            let mut alpha = f64::INFINITY;
            for i in 0..k {
                if passive[i] && z[i] <= 0.0 {
                    let a = x[i] / (x[i] - z[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            if !alpha.is_finite() || alpha <= 0.0 {
                // the newly added variable cannot move; block it
                if x[j] == 0.0 && z[j] <= 0.0 {
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
                alpha = alpha.max(0.0);
            }
            for i in 0..k {
                x[i] += alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= 1e-15 * (1.0 + z[i].abs()) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        if passive[j] {
            blocked.iter_mut().for_each(|b| *b = false);
        }
    }
    (x, outer)
}

fn dual(gram: &DMatrix<f64>, h: &DVector<f64>, x: &[f64]) -> Vec<f64> {
    let gx = gram * DVector::from_column_slice(x);
    (h - gx).iter().copied().collect()
}

fn restricted_solve(gram: &DMatrix<f64>, h: &DVector<f64>, passive: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let n = idx.len();
    let sub = DMatrix::from_fn(n, n, |a, b| gram[(idx[a], idx[b])]);
    let rhs = DVector::from_iterator(n, idx.iter().map(|&i| h[i]));
    let sol = match sub.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => sub.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(n)),
    };
    let mut z = vec![0.0; passive.len()];
    for (a, &i) in idx.iter().enumerate() {
        z[i] = sol[a];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates every active set, solves the restricted least squares
    /// problem and keeps the best feasible candidate.
    fn enumerate_oracle(b: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
        let k = b.ncols();
        let mut best = (f64::INFINITY, vec![0.0; k]);
        for mask in 0u32..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
            let mut c = vec![0.0; k];
            if !idx.is_empty() {
                let sub = DMatrix::from_fn(b.nrows(), idx.len(), |i, a| b[(i, idx[a])]);
                let sol = sub
                    .clone()
                    .svd(true, true)
                    .solve(&DVector::from_column_slice(s), 1e-14)
                    .unwrap();
                if sol.iter().any(|&v| v < 0.0) {
                    continue;
                }
                for (a, &j) in idx.iter().enumerate() {
                    c[j] = sol[a];
                }
            }
            let l = ls_loss(&c, b, s).unwrap();
            if l < best.0 {
                best = (l, c);
            }
        }
        best.1
    }

    fn kkt_ok(b: &DMatrix<f64>, s: &[f64], c: &[f64]) -> bool {
        let g = b.transpose() * (b * DVector::from_column_slice(c) - DVector::from_column_slice(s));
        c.iter().zip(g.iter()).all(|(&ci, &gi)| {
            if ci > 0.0 {
                gi.abs() < 1e-8
            } else {
                gi >= -1e-8
            }
        })
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = DMatrix::from_fn(40, 5, |_, _| rng.random_range(0.0..1.0));
        let c0 = [0.5, 0.0, 1.2, 0.0, 0.3];
        let s: Vec<f64> = (b.clone() * DVector::from_column_slice(&c0))
            .iter()
            .copied()
            .collect();
        let r = nnls(&b, &s).unwrap();
        for (a, e) in r.c.values().iter().zip(&c0) {
            assert!((a - e).abs() < 1e-8);
        }
        assert!(r.converged);
    }

    #[test]
    fn two_endmember_clamped_optimum() {
        // LS solution of this instance is (1.5, -0.5): the second coordinate
        // is clamped and the first re-solved alone.
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let s = [1.0, 1.5, -0.5];
        let ls = b
            .clone()
            .svd(true, true)
            .solve(&DVector::from_column_slice(&s), 1e-14)
            .unwrap();
        assert!(ls[1] < 0.0);
        let r = nnls(&b, &s).unwrap();
        let oracle = enumerate_oracle(&b, &s);
        assert_eq!(oracle[1], 0.0);
        for (a, e) in r.c.values().iter().zip(&oracle) {
            assert!((a - e).abs() < 1e-10, "{:?} vs {oracle:?}", r.c.values());
        }
    }

    #[test]
    fn matches_active_set_enumeration_and_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..200 {
            let k = 1 + trial % 5;
            let b = DMatrix::from_fn(12, k, |_, _| rng.random_range(0.0..1.0));
            let s: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..2.0)).collect();
            let r = nnls(&b, &s).unwrap();
            let oracle = enumerate_oracle(&b, &s);
            for (a, e) in r.c.values().iter().zip(&oracle) {
                assert!(
                    (a - e).abs() < 1e-8,
                    "trial {trial}: {:?} vs {oracle:?}",
                    r.c.values()
                );
            }
            assert!(kkt_ok(&b, &s, r.c.values()), "trial {trial}");
        }
    }

    #[test]
    fn negative_spectrum_gives_zero() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        let r = nnls(&b, &[-1.0, -2.0]).unwrap();
        assert_eq!(r.c.values(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(nnls(&b, &[1.0]).is_err());
    }
}
