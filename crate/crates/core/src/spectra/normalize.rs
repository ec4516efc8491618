use super::{Spectrum, Stage};
use crate::error::{Error, Result};

/// Scales a despiked spectrum so its phenylalanine peak equals `scale`:
/// `I'_n = (I_n / I_Phe) * C`, with `I_Phe` the maximum inside `window`.
pub fn normalize_to_phenylalanine(s: &Spectrum, window: (f64, f64), scale: f64) -> Result<Spectrum> {
    s.require(Stage::Despiked)?;
    let (lo, hi) = window;
    let peak = s
        .wavenumbers()
        .iter()
        .zip(s.intensities())
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(_, y)| *y)
        .fold(None, |acc: Option<f64>, y| Some(acc.map_or(y, |a| a.max(y))))
        .ok_or(Error::WindowMiss { lo, hi })?;
    if !(peak > 0.0) {
        return Err(Error::DegeneratePeak { sample_id: s.sample_id().to_string(), intensity: peak });
    }
    let scaled = s.intensities().iter().map(|y| (y / peak) * scale).collect();
    Ok(s.advance(scaled, Stage::Normalized))
}
