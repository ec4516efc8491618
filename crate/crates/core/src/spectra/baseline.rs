use serde::{Deserialize, Serialize};

use super::{QcStatus, Spectrum, Stage};
use crate::error::{Error, Result};

/// Floor applied to the pointwise standard deviation in divergence scores.
pub const STD_EPSILON: f64 = 1e-9;

/// Mean spectrum `B = (1/N) sum y_n` of one condition, with its spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBaseline {
    pub condition_label: String,
    pub wavenumbers: Vec<f64>,
    pub mean_spectrum: Vec<f64>,
    pub pointwise_std: Vec<f64>,
    pub n_members: usize,
}

pub fn compute_baseline(spectra: &[&Spectrum], label: &str) -> Result<ConditionBaseline> {
    if spectra.len() < 2 {
        return Err(Error::InvalidSpectrum(format!(
            "baseline for `{label}` needs at least 2 spectra, got {}",
            spectra.len()
        )));
    }
    let grid = spectra[0].wavenumbers();
    for s in spectra {
        s.require(Stage::Normalized)?;
        if !s.same_grid(grid) {
            return Err(Error::GridMismatch(format!(
                "{} replicate {} differs from {}",
                s.sample_id(),
                s.replicate(),
                spectra[0].sample_id()
            )));
        }
    }
    let n = spectra.len() as f64;
    let len = grid.len();
    let mut mean = vec![0.0; len];
    for s in spectra {
        for (m, y) in mean.iter_mut().zip(s.intensities()) {
            *m += y;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for s in spectra {
        for ((v, y), m) in var.iter_mut().zip(s.intensities()).zip(&mean) {
            *v += (y - m) * (y - m);
        }
    }
    let pointwise_std = var.into_iter().map(|v| (v / (n - 1.0)).sqrt()).collect();
    Ok(ConditionBaseline {
        condition_label: label.to_string(),
        wavenumbers: grid.to_vec(),
        mean_spectrum: mean,
        pointwise_std,
        n_members: spectra.len(),
    })
}

/// Mean over channels of `|y - B| / max(std, 1e-9)`.
pub fn divergence_score(s: &Spectrum, b: &ConditionBaseline) -> Result<f64> {
    s.require(Stage::Normalized)?;
    if !s.same_grid(&b.wavenumbers) {
        return Err(Error::GridMismatch(format!(
            "{} does not share the `{}` baseline grid",
            s.sample_id(),
            b.condition_label
        )));
    }
    let total: f64 = s
        .intensities()
        .iter()
        .zip(&b.mean_spectrum)
        .zip(&b.pointwise_std)
        .map(|((y, m), sd)| (y - m).abs() / sd.max(STD_EPSILON))
        .sum();
    Ok(total / s.len() as f64)
}

/// QC decision: flagged when the divergence score exceeds `k`.
pub fn flag_divergent(s: &Spectrum, b: &ConditionBaseline, k: f64) -> Result<(QcStatus, f64)> {
    let score = divergence_score(s, b)?;
    let status = if score > k { QcStatus::FlaggedDivergent } else { QcStatus::Passed };
    Ok((status, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalized(id: &str, y: Vec<f64>) -> Spectrum {
        let x = (0..y.len()).map(|i| 900.0 + i as f64).collect();
        Spectrum::with_stage(id, 0, x, y, Stage::Normalized).unwrap()
    }

    #[test]
    fn mean_of_two() {
        let a = normalized("a", vec![1.0, 2.0, 1.0, 2.0, 1.0]);
        let b = normalized("b", vec![3.0, 4.0, 3.0, 4.0, 3.0]);
        let base = compute_baseline(&[&a, &b], "control").unwrap();
        assert_eq!(base.mean_spectrum, vec![2.0, 3.0, 2.0, 3.0, 2.0]);
        assert_eq!(base.n_members, 2);
    }

    #[test]
    fn identical_members_have_zero_spread() {
        let a = normalized("a", vec![1.0, 5.0, 2.0, 7.0, 3.0]);
        let base = compute_baseline(&[&a, &a, &a], "polyp").unwrap();
        assert_eq!(base.mean_spectrum, a.intensities());
        assert!(base.pointwise_std.iter().all(|v| *v == 0.0));
        // equal to the mean: passes even with a zero spread
        let (qc, score) = flag_divergent(&a, &base, 3.0).unwrap();
        assert_eq!(qc, QcStatus::Passed);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn ten_sigma_is_flagged() {
        let a = normalized("a", vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = normalized("b", vec![2.0, 3.0, 5.0, 5.0, 6.0]);
        let base = compute_baseline(&[&a, &b], "c").unwrap();
        let far: Vec<f64> =
            base.mean_spectrum.iter().zip(&base.pointwise_std).map(|(m, s)| m + 10.0 * s).collect();
        let (qc, score) = flag_divergent(&normalized("z", far), &base, 3.0).unwrap();
        assert_eq!(qc, QcStatus::FlaggedDivergent);
        assert!((score - 10.0).abs() < 1e-9);
    }

    #[test]
    fn grid_mismatch() {
        let a = normalized("a", vec![1.0; 5]);
        let b = Spectrum::with_stage("b", 0, (0..5).map(f64::from).collect(), vec![1.0; 5], Stage::Normalized)
            .unwrap();
        assert!(matches!(compute_baseline(&[&a, &b], "c"), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn needs_two_members() {
        let a = normalized("a", vec![1.0; 5]);
        assert!(compute_baseline(&[&a], "c").is_err());
    }
}
