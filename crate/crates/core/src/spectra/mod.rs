//! Raman spectrum container and the preprocessing chain.
//!
//! A [`Spectrum`] advances through [`Stage`]s strictly in order:
//! raw, smoothed, background corrected, despiked, normalized. Every
//! operation checks the stage it expects and returns a new spectrum.

mod background;
mod baseline;
mod cosmic;
pub mod io;
mod normalize;
pub mod qc;
mod savgol;

use serde::{Deserialize, Serialize};

pub use background::{correct_background, BackgroundFit};
pub use baseline::{compute_baseline, divergence_score, flag_divergent, ConditionBaseline};
pub use cosmic::{cosmic_threshold, remove_cosmic_rays, remove_cosmic_rays_with_threshold};
pub use normalize::normalize_to_phenylalanine;
pub use qc::{preprocess_all, run_qc, QcCheck, QcOutcome, QcRecord};
pub use savgol::{savitzky_golay, SavitzkyGolay};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Smoothed,
    BackgroundCorrected,
    Despiked,
    Normalized,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Smoothed => "smoothed",
            Stage::BackgroundCorrected => "background_corrected",
            Stage::Despiked => "despiked",
            Stage::Normalized => "normalized",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Some(match s {
            "raw" => Stage::Raw,
            "smoothed" => Stage::Smoothed,
            "background_corrected" => Stage::BackgroundCorrected,
            "despiked" => Stage::Despiked,
            "normalized" => Stage::Normalized,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcStatus {
    Unchecked,
    Passed,
    FlaggedDivergent,
}

impl QcStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QcStatus::Unchecked => "unchecked",
            QcStatus::Passed => "passed",
            QcStatus::FlaggedDivergent => "flagged_divergent",
        }
    }

    pub fn parse(s: &str) -> Option<QcStatus> {
        Some(match s {
            "unchecked" => QcStatus::Unchecked,
            "passed" => QcStatus::Passed,
            "flagged_divergent" => QcStatus::FlaggedDivergent,
            _ => return None,
        })
    }
}

/// One Raman measurement of one sample replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    sample_id: String,
    replicate: usize,
    wavenumbers: Vec<f64>,
    intensities: Vec<f64>,
    stage: Stage,
    qc: QcStatus,
}

pub const MIN_SPECTRUM_LEN: usize = 5;

impl Spectrum {
    /// Builds a raw spectrum, checking the axis invariants.
    pub fn new(
        sample_id: impl Into<String>,
        replicate: usize,
        wavenumbers: Vec<f64>,
        intensities: Vec<f64>,
    ) -> Result<Self> {
        Self::with_stage(sample_id, replicate, wavenumbers, intensities, Stage::Raw)
    }

    /// Builds a spectrum already at `stage`, e.g. when reloading processed output.
    pub fn with_stage(
        sample_id: impl Into<String>,
        replicate: usize,
        wavenumbers: Vec<f64>,
        intensities: Vec<f64>,
        stage: Stage,
    ) -> Result<Self> {
        let sample_id = sample_id.into();
        if wavenumbers.len() != intensities.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{sample_id}: {} wavenumbers but {} intensities",
                wavenumbers.len(),
                intensities.len()
            )));
        }
        if wavenumbers.len() < MIN_SPECTRUM_LEN {
            return Err(Error::InvalidSpectrum(format!(
                "{sample_id}: need at least {MIN_SPECTRUM_LEN} points, got {}",
                wavenumbers.len()
            )));
        }
        if wavenumbers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpectrum(format!(
                "{sample_id}: wavenumbers must be strictly increasing"
            )));
        }
        if intensities.iter().chain(&wavenumbers).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("{sample_id}: non-finite value")));
        }
        Ok(Spectrum { sample_id, replicate, wavenumbers, intensities, stage, qc: QcStatus::Unchecked })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn replicate(&self) -> usize {
        self.replicate
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn qc(&self) -> QcStatus {
        self.qc
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn set_qc(&mut self, qc: QcStatus) {
        self.qc = qc;
    }

    pub(crate) fn require(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::StageViolation { expected, found: self.stage });
        }
        Ok(())
    }

    /// Same axis and provenance, new intensities, next stage.
    pub(crate) fn advance(&self, intensities: Vec<f64>, stage: Stage) -> Spectrum {
        debug_assert!(stage > self.stage);
        debug_assert_eq!(intensities.len(), self.wavenumbers.len());
        Spectrum {
            sample_id: self.sample_id.clone(),
            replicate: self.replicate,
            wavenumbers: self.wavenumbers.clone(),
            intensities,
            stage,
            qc: self.qc,
        }
    }

    pub fn same_grid(&self, wavenumbers: &[f64]) -> bool {
        self.wavenumbers.len() == wavenumbers.len()
            && self.wavenumbers.iter().zip(wavenumbers).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

/// Preprocessing parameters. Bounds are checked by [`PreprocessConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub sg_half_width: usize,
    pub sg_order: usize,
    pub bg_degree: usize,
    pub cosmic_threshold_k: f64,
    pub phe_window: (f64, f64),
    pub phe_scale: f64,
    pub baseline_divergence_k: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            sg_half_width: 3,
            sg_order: 2,
            bg_degree: 5,
            cosmic_threshold_k: 8.0,
            phe_window: (995.0, 1010.0),
            phe_scale: 1.0,
            baseline_divergence_k: 3.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let window = 2 * self.sg_half_width + 1;
        if self.sg_half_width < 1 {
            return Err(Error::Config("sg_half_width must be >= 1".into()));
        }
        if self.sg_order >= window {
            return Err(Error::Config(format!(
                "sg_order {} must be < window {window}",
                self.sg_order
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.cosmic_threshold_k) {
            return Err(Error::Config("cosmic_threshold_k must be positive".into()));
        }
        if !positive(self.phe_scale) {
            return Err(Error::Config("phe_scale must be positive".into()));
        }
        if !positive(self.baseline_divergence_k) {
            return Err(Error::Config("baseline_divergence_k must be positive".into()));
        }
        let (lo, hi) = self.phe_window;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("phe_window [{lo}, {hi}] is not an interval")));
        }
        Ok(())
    }
}

/// Output of the four-step chain for one spectrum.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub spectrum: Spectrum,
    pub replaced_indices: Vec<usize>,
}

/// Reusable preprocessing chain: smoothing, background removal, despiking,
/// phenylalanine normalization.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    filter: SavitzkyGolay,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Result<Self> {
        config.validate()?;
        let filter = SavitzkyGolay::new(config.sg_half_width, config.sg_order)?;
        Ok(Preprocessor { config, filter })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn run(&self, raw: &Spectrum) -> Result<Preprocessed> {
        let smoothed = self.filter.apply(raw)?;
        let corrected = correct_background(&smoothed, self.config.bg_degree)?;
        let (despiked, replaced_indices) = remove_cosmic_rays(&corrected, self.config.cosmic_threshold_k)?;
        let spectrum =
            normalize_to_phenylalanine(&despiked, self.config.phe_window, self.config.phe_scale)?;
        Ok(Preprocessed { spectrum, replaced_indices })
    }
}
