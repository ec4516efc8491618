use super::{Spectrum, Stage};
use crate::error::Result;
use crate::linalg::median;

/// Consistency constant turning a MAD into a normal-equivalent sigma.
const MAD_TO_SIGMA: f64 = 1.4826;
/// Same role for the mean absolute deviation, used when the MAD is zero.
const MEAN_AD_TO_SIGMA: f64 = 1.2533;

/// Cosmic-ray threshold `T = median(y) + k * 1.4826 * MAD(y)`.
///
/// If more than half the points share one value the MAD is zero; the mean
/// absolute deviation from the median is used instead, and if that is also
/// zero nothing can be a spike and `T` is infinite.
pub fn cosmic_threshold(y: &[f64], k: f64) -> f64 {
    let med = median(y);
    let deviations: Vec<f64> = y.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&deviations);
    if mad > 0.0 {
        return med + k * MAD_TO_SIGMA * mad;
    }
    let mean_ad = deviations.iter().sum::<f64>() / y.len() as f64;
    if mean_ad > 0.0 {
        med + k * MEAN_AD_TO_SIGMA * mean_ad
    } else {
        f64::INFINITY
    }
}

/// Replaces every point with intensity `>= threshold` by the mean of its two
/// measured neighbours. Endpoints only have one neighbour and take its value.
/// Neighbours are always read from the input, so the pass is single-shot.
pub fn remove_cosmic_rays_with_threshold(
    s: &Spectrum,
    threshold: f64,
) -> Result<(Spectrum, Vec<usize>)> {
    s.require(Stage::BackgroundCorrected)?;
    let y = s.intensities();
    let n = y.len();
    let mut out = y.to_vec();
    let mut replaced = Vec::new();
    for i in 0..n {
        if y[i] < threshold {
            continue;
        }
        out[i] = match i {
            0 => y[1],
            i if i == n - 1 => y[n - 2],
            i => 0.5 * (y[i - 1] + y[i + 1]),
        };
        replaced.push(i);
    }
    Ok((s.advance(out, Stage::Despiked), replaced))
}

/// Despikes with the robust threshold derived from multiplier `k`.
pub fn remove_cosmic_rays(s: &Spectrum, k: f64) -> Result<(Spectrum, Vec<usize>)> {
    s.require(Stage::BackgroundCorrected)?;
    let t = cosmic_threshold(s.intensities(), k);
    remove_cosmic_rays_with_threshold(s, t)
}
