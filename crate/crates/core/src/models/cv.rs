//! Holdout, stratified k-fold and leave-one-out protocols.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeaturePipeline;
use super::forest::{train_forest, ForestConfig, ForestModel};
use super::fusion::{Architecture, FusionModel, Variant};
use super::metrics::{evaluate, EvalReport, MeanStd};
use super::train::{train, TrainConfig};
use crate::dataset::{Cohort, SplitPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScheme {
    StratifiedKFold,
    Loocv,
}

/// Mean ± sample std over folds. AUC skips folds where it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub auc: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub scheme: CvScheme,
    pub folds: Vec<EvalReport>,
    pub summary: CvSummary,
    /// Metrics of all out-of-fold predictions taken together.
    pub pooled: EvalReport,
}

/// Retrains from scratch on every fold. `fit_predict(fold, train_rows,
/// test_rows)` returns disease probabilities for `test_rows`; folds run in
/// parallel and results keep fold order.
pub fn cross_validate<F>(plan: &SplitPlan, labels: &[u8], scheme: CvScheme, threshold: f64, fit_predict: F) -> Result<CvResult>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    let rounds = match scheme {
        CvScheme::StratifiedKFold => plan.k(),
        CvScheme::Loocv => plan.loocv.len(),
    };
    let outcomes: Vec<(Vec<usize>, Vec<f64>)> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let (train_rows, test_rows) = match scheme {
                CvScheme::StratifiedKFold => plan.fold(r),
                CvScheme::Loocv => plan.loocv_round(r),
            };
            let scores = fit_predict(r, &train_rows, &test_rows)?;
            if scores.len() != test_rows.len() {
                return Err(Error::Shape(format!("{} scores for {} test rows", scores.len(), test_rows.len())));
            }
            Ok((test_rows, scores))
        })
        .collect::<Result<_>>()?;
    let mut folds = Vec::with_capacity(rounds);
    let (mut all_y, mut all_s) = (Vec::new(), Vec::new());
    for (rows, scores) in &outcomes {
        let y: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
        folds.push(evaluate(&y, scores, threshold));
        all_y.extend(y);
        all_s.extend_from_slice(scores);
    }
    let stat = |f: fn(&EvalReport) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>()).expect("at least one fold");
    let aucs: Vec<f64> = folds.iter().filter_map(|r| r.auc).collect();
    let summary = CvSummary {
        accuracy: stat(|r| r.accuracy),
        precision: stat(|r| r.precision),
        recall: stat(|r| r.recall),
        f1: stat(|r| r.f1),
        auc: MeanStd::of(&aucs),
    };
    Ok(CvResult { scheme, folds, summary, pooled: evaluate(&all_y, &all_s, threshold) })
}

/// Splits training rows into (fit, validation) by patient, stratified by
/// label, with about `fraction` of each class's patients held out.
pub fn carve_validation(cohort: &Cohort, rows: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_patient: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in rows {
        by_patient.entry(cohort.row_patient[i]).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> =
            by_patient.iter().filter(|(_, r)| cohort.labels[r[0]] == class).map(|(&p, _)| p).collect();
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * fraction).round() as usize).clamp(usize::from(members.len() > 1), members.len());
        held.extend(members.into_iter().take(take));
    }
    held.sort_unstable();
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for (p, r) in by_patient {
        if held.binary_search(&p).is_ok() {
            val.extend(r);
        } else {
            fit.extend(r);
        }
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Validation share carved out of each fold's training rows.
pub const FOLD_VALIDATION_FRACTION: f64 = 0.125;

/// A trained network with the scaling it was trained under.
#[derive(Debug, Clone)]
pub struct TrainedFusion {
    pub model: FusionModel,
    pub features: FeaturePipeline,
}

impl TrainedFusion {
    pub fn fit(variant: Variant, arch: &Architecture, cfg: &TrainConfig, cohort: &Cohort, fit_rows: &[usize], val_rows: &[usize]) -> Result<Self> {
        let features = FeaturePipeline::fit(cohort, fit_rows)?;
        let tr = features.transform(cohort, fit_rows)?;
        let va = features.transform(cohort, val_rows)?;
        let model = train(variant, arch, &tr, &va, cfg)?;
        Ok(TrainedFusion { model, features })
    }

    pub fn predict(&self, cohort: &Cohort, rows: &[usize]) -> Result<Vec<f64>> {
        let data = self.features.transform(cohort, rows)?;
        self.model.predict(&data.spectra, &data.meta)
    }
}

/// Holdout protocol: fit on `plan.train`, stop early on `plan.val`,
/// report on `plan.test`.
pub fn holdout_fusion(variant: Variant, arch: &Architecture, cfg: &TrainConfig, cohort: &Cohort, plan: &SplitPlan) -> Result<(TrainedFusion, EvalReport)> {
    let trained = TrainedFusion::fit(variant, arch, cfg, cohort, &plan.train, &plan.val)?;
    let scores = trained.predict(cohort, &plan.test)?;
    let y: Vec<u8> = plan.test.iter().map(|&i| cohort.labels[i]).collect();
    Ok((trained, evaluate(&y, &scores, cfg.threshold)))
}

pub fn cv_fusion(variant: Variant, arch: &Architecture, cfg: &TrainConfig, cohort: &Cohort, plan: &SplitPlan, scheme: CvScheme) -> Result<CvResult> {
    cross_validate(plan, &cohort.labels, scheme, cfg.threshold, |fold, train_rows, test_rows| {
        let seed = cfg.seed.wrapping_add(1000 * (fold as u64 + 1));
        let (fit_rows, val_rows) = carve_validation(cohort, train_rows, FOLD_VALIDATION_FRACTION, seed);
        let fold_cfg = TrainConfig { seed, ..*cfg };
        TrainedFusion::fit(variant, arch, &fold_cfg, cohort, &fit_rows, &val_rows)?.predict(cohort, test_rows)
    })
}

/// Forest on the spectral columns of `rows` (raw, unscaled).
pub fn fit_forest(cohort: &Cohort, rows: &[usize], cfg: &ForestConfig) -> Result<ForestModel> {
    let labels: Vec<u8> = rows.iter().map(|&i| cohort.labels[i]).collect();
    train_forest(&cohort.spectra.select_rows(rows.iter()), &labels, cfg)
}

pub fn holdout_forest(cohort: &Cohort, plan: &SplitPlan, cfg: &ForestConfig, threshold: f64) -> Result<(ForestModel, EvalReport)> {
    // The forest has no early stopping, so it trains on train + val.
    let mut rows = plan.train.clone();
    rows.extend_from_slice(&plan.val);
    rows.sort_unstable();
    let model = fit_forest(cohort, &rows, cfg)?;
    let scores = model.predict_proba(&cohort.spectra.select_rows(plan.test.iter()))?;
    let y: Vec<u8> = plan.test.iter().map(|&i| cohort.labels[i]).collect();
    Ok((model, evaluate(&y, &scores, threshold)))
}

pub fn cv_forest(cohort: &Cohort, plan: &SplitPlan, cfg: &ForestConfig, scheme: CvScheme, threshold: f64) -> Result<CvResult> {
    cross_validate(plan, &cohort.labels, scheme, threshold, |fold, train_rows, test_rows| {
        let fold_cfg = ForestConfig { seed: cfg.seed.wrapping_add(fold as u64 + 1), ..*cfg };
        fit_forest(cohort, train_rows, &fold_cfg)?.predict_proba(&cohort.spectra.select_rows(test_rows.iter()))
    })
}
