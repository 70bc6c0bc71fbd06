use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectra::{Spectrum, WavelengthGrid};

/// Linear interpolation of `spectrum` onto `target`. The target range must lie
/// inside the source range.
pub fn resample(spectrum: &Spectrum, target: Arc<WavelengthGrid>) -> Result<Spectrum> {
    let values = resample_values(spectrum.grid(), spectrum.values(), &target)?;
    Spectrum::new(target, values)
}

pub fn resample_values(
    source: &WavelengthGrid,
    values: &[f64],
    target: &WavelengthGrid,
) -> Result<Vec<f64>> {
    if values.len() != source.len() {
        return Err(Error::dim("values and source grid differ in length"));
    }
    let xs = source.wavelengths();
    let slack = 1e-9 * source.spacing();
    if target.start() < source.start() - slack || target.end() > source.end() + slack {
        return Err(Error::invalid(format!(
            "resampling {:.3}..{:.3} nm onto {:.3}..{:.3} nm would extrapolate",
            source.start(),
            source.end(),
            target.start(),
            target.end()
        )));
    }
    let last = xs.len() - 1;
    Ok(target
        .wavelengths()
        .iter()
        .map(|&w| {
            let w = w.clamp(xs[0], xs[last]);
            // first index with xs[i] > w
            let hi = xs.partition_point(|&x| x <= w);
            if hi == 0 {
                return values[0];
            }
            let lo = hi - 1;
            if hi > last || xs[lo] == w {
                return values[lo.min(last)];
            }
            let t = (w - xs[lo]) / (xs[hi] - xs[lo]);
            values[lo] + t * (values[hi] - values[lo])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(a: f64, b: f64, n: usize) -> Arc<WavelengthGrid> {
        Arc::new(WavelengthGrid::linspace(a, b, n).unwrap())
    }

    #[test]
    fn identity_on_same_grid() {
        let g = grid(420.0, 730.0, 310);
        let v: Vec<f64> = (0..310).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = Spectrum::new(g.clone(), v.clone()).unwrap();
        assert_eq!(resample(&s, g).unwrap().values(), &v[..]);
    }

    #[test]
    fn midpoint() {
        let src = grid(420.0, 422.0, 2);
        let s = Spectrum::new(src, vec![0.0, 2.0]).unwrap();
        let dst = Arc::new(WavelengthGrid::new(vec![421.0, 421.5]).unwrap());
        let out = resample(&s, dst).unwrap();
        assert_eq!(out.values()[0], 1.0);
    }

    #[test]
    fn extrapolation_rejected() {
        let s = Spectrum::new(grid(420.0, 430.0, 11), vec![1.0; 11]).unwrap();
        assert!(resample(&s, grid(419.0, 430.0, 12)).is_err());
        assert!(resample(&s, grid(420.0, 431.0, 12)).is_err());
    }

    #[test]
    fn piecewise_linear_source_is_preserved() {
        // knots every 1 nm; line equation evaluated directly for each target
        let src = grid(420.0, 440.0, 21);
        let v: Vec<f64> = src
            .wavelengths()
            .iter()
            .map(|&w| {
                if w < 430.0 {
                    2.0 * (w - 420.0)
                } else {
                    20.0 - 0.5 * (w - 430.0)
                }
            })
            .collect();
        let s = Spectrum::new(src, v).unwrap();
        let dst = grid(420.0, 440.0, 161);
        let out = resample(&s, dst.clone()).unwrap();
        for (&w, &y) in dst.wavelengths().iter().zip(out.values()) {
            let line = if w < 430.0 {
                2.0 * (w - 420.0)
            } else {
                20.0 - 0.5 * (w - 430.0)
            };
            assert!((y - line).abs() < 1e-9, "{w}: {y} vs {line}");
        }
    }

    proptest! {
        #[test]
        fn linear_and_exact_on_shared_points(
            x in prop::collection::vec(-10.0f64..10.0, 31),
            y in prop::collection::vec(-10.0f64..10.0, 31),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let src = grid(420.0, 450.0, 31);
            // every other source sample is shared with the coarse target
            let coarse = grid(420.0, 450.0, 16);
            let fine = grid(421.0, 449.0, 57);
            let rx = resample_values(&src, &x, &coarse).unwrap();
            for (i, v) in rx.iter().enumerate() {
                prop_assert!((v - x[2 * i]).abs() <= 1e-12 * x[2 * i].abs().max(1.0));
            }
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = resample_values(&src, &mix, &fine).unwrap();
            let fx = resample_values(&src, &x, &fine).unwrap();
            let fy = resample_values(&src, &y, &fine).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }
}
