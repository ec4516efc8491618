//! Per-sample attributions: exact and kernel SHAP, LIME, and the features
//! both explainers agree on.
//!
//! Absent features take the background mean, so a coalition's value is one
//! model evaluation: `v(S) = f(x_S, mean_{not S})`.

mod consensus;
mod lime;
mod shap;

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FusionModel;

pub use consensus::{consensus, write_consensus_csv, ConsensusFeature, ConsensusSet};
pub use lime::{lime_explain, FeatureKind, LimeConfig, MIN_PERTURBATIONS};
pub use shap::{shap_exact, shap_kernel, MAX_EXACT_FEATURES};

/// Read-only scoring function over sample-major rows.
pub trait Model: Sync {
    fn predict_rows(&self, rows: &DMatrix<f64>) -> Vec<f64>;
}

impl<F> Model for F
where
    F: Fn(&DMatrix<f64>) -> Vec<f64> + Sync,
{
    fn predict_rows(&self, rows: &DMatrix<f64>) -> Vec<f64> {
        self(rows)
    }
}

/// A fusion network seen as one function of `[spectra | metadata]`.
pub struct FusionPredictor<'a> {
    pub model: &'a FusionModel,
    pub spectral_width: usize,
}

impl Model for FusionPredictor<'_> {
    fn predict_rows(&self, rows: &DMatrix<f64>) -> Vec<f64> {
        let d_s = self.spectral_width;
        let xs = rows.columns(0, d_s).into_owned();
        let xm = rows.columns(d_s, rows.ncols() - d_s).into_owned();
        self.model.predict(&xs, &xm).expect("widths fixed at construction")
    }
}

pub(crate) fn predict_one(model: &dyn Model, x: &[f64]) -> f64 {
    model.predict_rows(&DMatrix::from_row_slice(1, x.len(), x))[0]
}

/// Evaluates many rows in bounded chunks.
pub(crate) fn predict_many(model: &dyn Model, rows: &DMatrix<f64>) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let mut out = Vec::with_capacity(rows.nrows());
    let mut start = 0;
    while start < rows.nrows() {
        let len = CHUNK.min(rows.nrows() - start);
        out.extend(model.predict_rows(&rows.rows(start, len).into_owned()));
        start += len;
    }
    out
}

/// Reference values for absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub mean: Vec<f64>,
    pub n_rows: usize,
}

/// Largest number of training rows averaged into a background.
pub const MAX_BACKGROUND_ROWS: usize = 100;

impl Background {
    /// Mean over at most [`MAX_BACKGROUND_ROWS`] rows, subsampled with `seed`.
    pub fn from_rows(rows: &DMatrix<f64>, seed: u64) -> Result<Self> {
        let n = rows.nrows();
        if n == 0 {
            return Err(Error::Explain("background set is empty".into()));
        }
        let picked: Vec<usize> = if n <= MAX_BACKGROUND_ROWS {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, n, MAX_BACKGROUND_ROWS).into_vec();
            idx.sort_unstable();
            idx
        };
        let sub = rows.select_rows(picked.iter());
        let mean = sub.row_mean().iter().copied().collect();
        Ok(Background { mean, n_rows: picked.len() })
    }

    pub fn point(p: &[f64]) -> Self {
        Background { mean: p.to_vec(), n_rows: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ShapExact,
    ShapKernel,
    Lime,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ShapExact => "shap_exact",
            Method::ShapKernel => "shap_kernel",
            Method::Lime => "lime",
        }
    }
}

/// Scores for one sample under one method; `scores[i]` belongs to
/// `feature_names[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub sample_id: String,
    pub method: Method,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// SHAP: value of the empty coalition. LIME: surrogate intercept.
    pub base_value: f64,
    /// Model output at the explained sample.
    pub prediction: f64,
    pub n_perturbations: usize,
    pub seed: u64,
    /// Weighted R^2 of the LIME surrogate; `None` for SHAP or when the
    /// model is constant over the perturbations.
    pub r_squared: Option<f64>,
}

impl Attribution {
    pub fn score(&self, feature: &str) -> Option<f64> {
        self.feature_names.iter().position(|f| f == feature).map(|i| self.scores[i])
    }

    /// `base_value + sum(scores) - prediction`.
    pub fn efficiency_residual(&self) -> f64 {
        self.base_value + self.scores.iter().sum::<f64>() - self.prediction
    }

    /// Feature indices by decreasing |score|, ties by feature name.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .abs()
                .partial_cmp(&self.scores[a].abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.feature_names[a].cmp(&self.feature_names[b]))
        });
        idx
    }

    /// Up to `k` features with non-zero score, strongest first.
    pub fn top_k(&self, k: usize) -> Vec<&str> {
        self.ranking()
            .into_iter()
            .filter(|&i| self.scores[i] != 0.0)
            .take(k)
            .map(|i| self.feature_names[i].as_str())
            .collect()
    }
}

/// Writes `sample_id,method,feature,score,rank` rows; rank is 1-based in
/// [`Attribution::ranking`] order.
pub fn write_attributions_csv<W: Write>(writer: W, attributions: &[Attribution]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "method", "feature", "score", "rank"])?;
    for a in attributions {
        for (rank, i) in a.ranking().into_iter().enumerate() {
            w.write_record([
                a.sample_id.as_str(),
                a.method.as_str(),
                a.feature_names[i].as_str(),
                &format!("{:e}", a.scores[i]),
                &(rank + 1).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("attributions csv", e))?;
    Ok(())
}

/// Per-(sample, method) seed so explanations do not depend on the order
/// samples are processed in.
pub fn explanation_seed(base: u64, sample_id: &str, method: Method) -> u64 {
    // FNV-1a over the id and method name, mixed with the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for b in sample_id.bytes().chain([0xff]).chain(method.as_str().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub(crate) fn check_inputs(x: &[f64], names: &[String], background: &Background) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Explain("sample has no features".into()));
    }
    if names.len() != x.len() || background.mean.len() != x.len() {
        return Err(Error::Shape(format!(
            "{} features, {} names, {} background values",
            x.len(),
            names.len(),
            background.mean.len()
        )));
    }
    Ok(())
}
