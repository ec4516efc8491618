//! Multimodal Raman serum spectroscopy + patient metadata diagnostics.
//!
//! The crate covers the whole path from raw replicate spectra to a
//! clinician-facing text report:
//!
//! - [`spectra`]: Savitzky-Golay smoothing, polynomial background removal,
//!   cosmic-ray despiking, phenylalanine normalization and baseline QC.
//! - [`meta`]: patient records, leakage exclusions and the scaled metadata matrix.
//! - [`dataset`]: cohort assembly, stratified splits and synthetic cohorts.
//! - [`models`]: early/joint/late fusion networks trained with Adam on binary
//!   cross-entropy, the spectra-only random forest, metrics and cross-validation.
//! - [`explain`]: exact and kernel SHAP, LIME, and the SHAP/LIME consensus.
//! - [`annotate`]: Raman shift, comorbidity and disease metabolite libraries.
//! - [`report`]: the plain-text and structured clinical report.
//! - [`pipeline`]: configuration and the staged driver behind the CLI.

pub mod annotate;
pub mod dataset;
pub mod error;
pub mod explain;
mod linalg;
pub mod meta;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod spectra;

pub use error::{Error, Result};
