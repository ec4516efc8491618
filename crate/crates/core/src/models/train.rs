//! Mini-batch Adam on binary cross-entropy with early stopping on
//! validation accuracy.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fusion::{Architecture, EpochRecord, FusionModel, Variant};
use super::nn::Mlp;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy with clamped probabilities.
pub fn bce_loss(y: &[f64], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::Shape(format!("{} labels vs {} predictions", y.len(), p.len())));
    }
    if y.is_empty() {
        return Err(Error::Shape("loss of an empty batch".into()));
    }
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    // Each term is non-negative; NaN must survive to signal divergence.
    Ok(total / y.len() as f64)
}

/// Gradient of the mean loss with respect to the output logit. Zero where
/// the clamp is active, matching the clamped loss exactly.
fn logit_gradient(y: &[f64], p: &[f64]) -> Vec<f64> {
    let m = y.len() as f64;
    y.iter()
        .zip(p)
        .map(|(&y, &p)| if p > BCE_EPS && p < 1.0 - BCE_EPS { (p - y) / m } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for one parameter set.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(params: AdamParams) -> Self {
        Adam { params, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn step(&mut self, weights: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(weights.len(), grads.len(), "parameter and gradient layouts differ");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let AdamParams { learning_rate, beta1, beta2, epsilon } = self.params;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (k, (w, g)) in weights.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..w.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                w[i] -= learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub adam: AdamParams,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Decision threshold for validation accuracy.
    pub threshold: f64,
    /// Learning rate of the late-fusion head stage. Its only inputs are two
    /// bounded probabilities, so it needs larger steps than the branches.
    pub late_head_learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { adam: AdamParams::default(), batch_size: 32, max_epochs: 500, patience: 25, threshold: 0.5, late_head_learning_rate: 1e-2, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let ok = self.batch_size > 0
            && self.max_epochs > 0
            && a.learning_rate > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0
            && self.late_head_learning_rate > 0.0
            && self.threshold > 0.0
            && self.threshold < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Scaled, sample-major inputs of both modalities plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalData {
    /// n x d_s.
    pub spectra: DMatrix<f64>,
    /// n x d_m.
    pub meta: DMatrix<f64>,
    pub labels: Vec<u8>,
}

impl ModalData {
    pub fn new(spectra: DMatrix<f64>, meta: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if spectra.nrows() != labels.len() || meta.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} spectral rows, {} metadata rows, {} labels",
                spectra.nrows(),
                meta.nrows(),
                labels.len()
            )));
        }
        Ok(ModalData { spectra, meta, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> ModalData {
        ModalData {
            spectra: self.spectra.select_rows(rows.iter()),
            meta: self.meta.select_rows(rows.iter()),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Feature-major copies used by the training loop.
struct Columns {
    xs: DMatrix<f64>,
    xm: DMatrix<f64>,
    y: Vec<f64>,
}

impl Columns {
    fn new(d: &ModalData) -> Self {
        Columns { xs: d.spectra.transpose(), xm: d.meta.transpose(), y: d.labels.iter().map(|&l| f64::from(l)).collect() }
    }

    fn batch(&self, idx: &[usize]) -> Columns {
        Columns {
            xs: self.xs.select_columns(idx.iter()),
            xm: self.xm.select_columns(idx.iter()),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

pub(crate) fn accuracy_at(y: &[f64], p: &[f64], threshold: f64) -> f64 {
    let hits = y.iter().zip(p).filter(|(&y, &p)| (p >= threshold) == (y >= 0.5)).count();
    hits as f64 / y.len() as f64
}

/// Loss of one batch without dropout.
pub fn batch_loss(model: &FusionModel, data: &ModalData) -> Result<f64> {
    let cols = Columns::new(data);
    bce_loss(&cols.y, &model.predict_columns(&cols.xs, &cols.xm)?)
}

/// Loss and its gradient for one batch, without dropout. Used by the
/// finite-difference checks.
pub fn batch_loss_and_gradient(model: &FusionModel, data: &ModalData) -> Result<(f64, Vec<Vec<f64>>)> {
    let cols = Columns::new(data);
    let (p, cache) = model.forward_cached(&cols.xs, &cols.xm, None)?;
    let loss = bce_loss(&cols.y, &p)?;
    let grad = model.backward(&cache, &logit_gradient(&cols.y, &p), false);
    Ok((loss, grad.slices().into_iter().map(<[f64]>::to_vec).collect()))
}

/// Trains every parameter (or only the head when `frozen_branches`).
fn fit(model: &mut FusionModel, train: &ModalData, val: &ModalData, cfg: &TrainConfig, frozen_branches: bool) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Training("training and validation sets must be non-empty".into()));
    }
    let tr = Columns::new(train);
    let va = Columns::new(val);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a1d);
    let mut adam = Adam::new(cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, f64, FusionModel)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let b = tr.batch(idx);
            let (p, cache) = model.forward_cached(&b.xs, &b.xm, Some(&mut rng))?;
            loss_sum += bce_loss(&b.y, &p)? * idx.len() as f64;
            let grad = model.backward(&cache, &logit_gradient(&b.y, &p), frozen_branches);
            if frozen_branches {
                adam.step(model.head_parameters_mut(), grad.slices());
            } else {
                adam.step(model.parameters_mut(), grad.slices());
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let p_val = model.predict_columns(&va.xs, &va.xm)?;
        let val_loss = bce_loss(&va.y, &p_val)?;
        let val_accuracy = accuracy_at(&va.y, &p_val, cfg.threshold);
        trace.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy });
        let weights_finite = model.parameters_mut().iter().all(|s| s.iter().all(|w| w.is_finite()));
        if !train_loss.is_finite() || !val_loss.is_finite() || !weights_finite {
            return Err(Error::Divergence { epoch, trace });
        }
        let improved = match &best {
            None => true,
            Some((acc, loss, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (_, _, restored) = best.expect("at least one epoch ran");
    *model = restored;
    model.trace = trace;
    Ok(())
}

/// Trains a fresh model of `variant`. Late fusion trains each branch as a
/// standalone classifier, freezes both, then fits the head on their
/// probabilities.
pub fn train(variant: Variant, arch: &Architecture, train: &ModalData, val: &ModalData, cfg: &TrainConfig) -> Result<FusionModel> {
    cfg.validate()?;
    arch.validate()?;
    let d_s = train.spectra.ncols();
    let d_m = train.meta.ncols();
    let mut model = FusionModel::new(variant, arch, d_s, d_m, cfg.seed)?;
    if variant != Variant::Late {
        fit(&mut model, train, val, cfg, false)?;
        return Ok(model);
    }
    let stage = |branch: &Mlp, as_variant: Variant, salt: u64| -> Result<Mlp> {
        let mut single = FusionModel {
            variant: as_variant,
            spectral_branch: None,
            meta_branch: None,
            head: branch.clone(),
            trace: Vec::new(),
        };
        fit(&mut single, train, val, &TrainConfig { seed: cfg.seed.wrapping_add(salt), ..*cfg }, false)?;
        Ok(single.head)
    };
    let spectral = stage(model.spectral_branch.as_ref().expect("late branch"), Variant::SpectraOnly, 1)?;
    let meta = stage(model.meta_branch.as_ref().expect("late branch"), Variant::MetaOnly, 2)?;
    model.spectral_branch = Some(spectral);
    model.meta_branch = Some(meta);
    let head_cfg = TrainConfig { adam: AdamParams { learning_rate: cfg.late_head_learning_rate, ..cfg.adam }, ..*cfg };
    fit(&mut model, train, val, &head_cfg, true)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_of_a_coin_flip_is_ln2() {
        assert!((bce_loss(&[1.0], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[1.0, 0.0], &[1.0 - BCE_EPS, BCE_EPS]).unwrap() < 1e-6);
        assert!(matches!(bce_loss(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    #[test]
    fn clamped_predictions_have_zero_gradient() {
        assert_eq!(logit_gradient(&[1.0, 0.0], &[1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(logit_gradient(&[1.0, 0.0], &[0.25, 0.75]), vec![-0.375, 0.375]);
    }

    #[test]
    fn adam_first_step_moves_by_the_learning_rate() {
        let mut adam = Adam::new(AdamParams::default());
        let mut w = vec![1.0, -1.0];
        adam.step(vec![&mut w], vec![&[3.0, -0.5]]);
        assert!((w[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((w[1] - (-1.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn mismatched_modal_rows_are_rejected() {
        assert!(ModalData::new(DMatrix::zeros(3, 2), DMatrix::zeros(2, 2), vec![0, 1, 0]).is_err());
    }
}
