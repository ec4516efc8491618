use nalgebra::{DMatrix, DVector};

use super::{Spectrum, Stage};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const REL_TOLERANCE: f64 = 1e-6;

/// Result of the iterative polynomial background fit.
#[derive(Debug, Clone)]
pub struct BackgroundFit {
    /// Fitted background f(x) evaluated on the axis.
    pub background: Vec<f64>,
    /// Coefficients in the rescaled variable `u = (x - center) / half_span`.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

impl BackgroundFit {
    /// Fits `f(x) = sum a_i x^i` under the peaks: fit, clip points above the
    /// fit down to the fit, refit, until the fit moves by less than 1e-6 of
    /// the intensity range (RMS) or 100 iterations have run.
    ///
    /// The stopping scale is the data range rather than the fit's norm so
    /// that adding a constant offset to the input shifts the fit by exactly
    /// that constant.
    pub fn fit(wavenumbers: &[f64], intensities: &[f64], degree: usize) -> Result<Self> {
        let n = intensities.len();
        if degree + 1 >= n {
            return Err(Error::FitFailure(format!(
                "degree {degree} needs more than {} points, spectrum has {n}",
                degree + 1
            )));
        }
        let lo = wavenumbers[0];
        let hi = wavenumbers[n - 1];
        let center = 0.5 * (lo + hi);
        let half_span = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
        let design = DMatrix::from_fn(n, degree + 1, |r, c| {
            ((wavenumbers[r] - center) / half_span).powi(c as i32)
        });
        let qr = design.clone().qr();
        let r = qr.r();
        let qt = qr.q().transpose();
        let diag_max = r.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if r.diagonal().iter().any(|v| v.abs() <= diag_max * 1e-12) {
            return Err(Error::FitFailure("rank-deficient polynomial design".into()));
        }
        let solve = |y: &DVector<f64>| -> Result<DVector<f64>> {
            r.solve_upper_triangular(&(&qt * y))
                .ok_or_else(|| Error::FitFailure("triangular solve failed".into()))
        };

        let (ymin, ymax) = intensities
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let tolerance = REL_TOLERANCE * (ymax - ymin) * (n as f64).sqrt();

        let mut work = DVector::from_column_slice(intensities);
        let mut coef = solve(&work)?;
        let mut fitted = &design * &coef;
        let mut iterations = 1;
        while iterations < MAX_ITERATIONS {
            for i in 0..n {
                work[i] = work[i].min(fitted[i]);
            }
            let next_coef = solve(&work)?;
            let next = &design * &next_coef;
            let change = (&next - &fitted).norm();
            fitted = next;
            coef = next_coef;
            iterations += 1;
            if change <= tolerance {
                break;
            }
        }
        Ok(BackgroundFit {
            background: fitted.iter().copied().collect(),
            coefficients: coef.iter().copied().collect(),
            iterations,
        })
    }
}

/// Subtracts a polynomial fluorescence background: `y_corr = y_meas - f(x)`.
pub fn correct_background(s: &Spectrum, degree: usize) -> Result<Spectrum> {
    s.require(Stage::Smoothed)?;
    let fit = BackgroundFit::fit(s.wavenumbers(), s.intensities(), degree)?;
    let corrected = s.intensities().iter().zip(&fit.background).map(|(y, f)| y - f).collect();
    Ok(s.advance(corrected, Stage::BackgroundCorrected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoothed(x: Vec<f64>, y: Vec<f64>) -> Spectrum {
        Spectrum::with_stage("t", 0, x, y, Stage::Smoothed).unwrap()
    }

    fn gaussian(x: f64, c: f64, w: f64) -> f64 {
        (-0.5 * ((x - c) / w).powi(2)).exp()
    }

    #[test]
    fn polynomial_signal_is_absorbed() {
        let x: Vec<f64> = (0..200).map(|i| 400.0 + 7.0 * i as f64).collect();
        let y = x.iter().map(|v| 3.0 - 0.002 * v + 1.5e-6 * v * v).collect();
        let out = correct_background(&smoothed(x, y), 2).unwrap();
        assert!(out.intensities().iter().all(|v| v.abs() < 1e-9));
        assert_eq!(out.stage(), Stage::BackgroundCorrected);
    }

    #[test]
    fn gaussian_peak_on_zero_baseline() {
        let x: Vec<f64> = (0..400).map(|i| 400.0 + 3.5 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| gaussian(v, 1100.0, 12.0)).collect();
        let fit = BackgroundFit::fit(&x, &y, 0).unwrap();
        // converged offset is the closed-form minimum of the clipped fit
        let floor = y.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((fit.background[0] - floor).abs() < 1e-6);
        let out = correct_background(&smoothed(x, y.clone()), 0).unwrap();
        let peak = out.intensities().iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degree_zero_removes_constant_offset() {
        let x: Vec<f64> = (0..300).map(|i| 400.0 + 4.0 * i as f64).collect();
        let signal: Vec<f64> = x
            .iter()
            .map(|&v| 2.0 * gaussian(v, 800.0, 10.0) + gaussian(v, 1450.0, 20.0))
            .collect();
        let shifted: Vec<f64> = signal.iter().map(|v| v + 37.5).collect();
        let a = correct_background(&smoothed(x.clone(), signal.clone()), 0).unwrap();
        let b = correct_background(&smoothed(x, shifted), 0).unwrap();
        for (p, q) in a.intensities().iter().zip(b.intensities()) {
            assert!((p - q).abs() < 1e-9);
        }
        // and the de-offset output keeps the peaks
        let peak = b.intensities().iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 2.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let x: Vec<f64> = (0..5).map(f64::from).collect();
        let err = correct_background(&smoothed(x, vec![1.0; 5]), 4).unwrap_err();
        assert!(matches!(err, Error::FitFailure(_)));
    }
}
