//! Batch preprocessing plus replicate and condition-level quality control.
//!
//! 1. Every replicate runs through the [`Preprocessor`] chain.
//! 2. Replicates of one sample (at least three) are scored against the
//!    sample's trimmed baseline; divergent ones are dropped.
//! 3. The surviving replicates of each condition are scored against the
//!    condition's trimmed baseline.
//!
//! A trimmed baseline is built as follows: a baseline over all members ranks
//! them, and the better-scoring half seeds a refined baseline. Members are
//! scored against it and the baseline is recomputed on the ones that passed,
//! until the passed set stops changing (at most [`MAX_BASELINE_ROUNDS`]
//! rounds). Divergent members therefore never dilute the baseline they are
//! judged against.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{compute_baseline, divergence_score, flag_divergent, ConditionBaseline, Preprocessor, QcStatus, Spectrum};
use crate::error::Result;

pub const MAX_BASELINE_ROUNDS: usize = 20;

/// Fewest replicates for the within-sample check. Its trimmed core is half
/// the replicates, and a spread estimated from fewer than three spectra
/// flags healthy replicates.
pub const MIN_REPLICATE_CHECK: usize = 5;

/// Per-replicate row of the QC sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct QcRecord {
    pub sample_id: String,
    pub replicate: usize,
    pub stage: super::Stage,
    pub qc: QcStatus,
    pub divergence_score: f64,
    pub replaced_indices: Vec<usize>,
    /// Which check flagged it, if any.
    pub flagged_by: Option<QcCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcCheck {
    Replicate,
    Condition,
}

#[derive(Debug, Clone)]
pub struct QcOutcome {
    /// Normalized spectra in input order, with `qc` set.
    pub spectra: Vec<Spectrum>,
    pub records: Vec<QcRecord>,
    pub baselines: BTreeMap<String, ConditionBaseline>,
}

impl QcOutcome {
    /// Samples with at least one replicate flagged against its condition baseline.
    pub fn condition_flagged_samples(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .records
            .iter()
            .filter(|r| r.flagged_by == Some(QcCheck::Condition))
            .map(|r| r.sample_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Runs the preprocessing chain on every raw spectrum. Order is preserved.
pub fn preprocess_all(pre: &Preprocessor, raw: &[Spectrum]) -> Result<Vec<super::Preprocessed>> {
    raw.par_iter().map(|s| pre.run(s)).collect()
}

/// Full QC over preprocessed replicates. `condition_of` maps a sample id to
/// its condition label; unmapped samples share the `unlabelled` group.
pub fn run_qc<F>(processed: Vec<super::Preprocessed>, condition_of: F, k: f64) -> Result<QcOutcome>
where
    F: Fn(&str) -> Option<String>,
{
    let n = processed.len();
    let mut records: Vec<QcRecord> = processed
        .iter()
        .map(|p| QcRecord {
            sample_id: p.spectrum.sample_id().to_string(),
            replicate: p.spectrum.replicate(),
            stage: p.spectrum.stage(),
            qc: QcStatus::Unchecked,
            divergence_score: 0.0,
            replaced_indices: p.replaced_indices.clone(),
            flagged_by: None,
        })
        .collect();
    let spectra: Vec<Spectrum> = processed.into_iter().map(|p| p.spectrum).collect();

    // replicate check against the sample's own trimmed baseline
    let mut by_sample: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in spectra.iter().enumerate() {
        by_sample.entry(s.sample_id()).or_default().push(i);
    }
    let mut replicate_ok = vec![true; n];
    for members in by_sample.values().filter(|m| m.len() >= MIN_REPLICATE_CHECK) {
        let base = trimmed_baseline(&spectra, members, spectra[members[0]].sample_id(), k)?;
        for &i in members {
            let (status, score) = flag_divergent(&spectra[i], &base, k)?;
            if status == QcStatus::FlaggedDivergent {
                replicate_ok[i] = false;
                records[i].qc = status;
                records[i].divergence_score = score;
                records[i].flagged_by = Some(QcCheck::Replicate);
            }
        }
    }

    let mut by_condition: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in spectra.iter().enumerate() {
        if replicate_ok[i] {
            let label = condition_of(s.sample_id()).unwrap_or_else(|| "unlabelled".to_string());
            by_condition.entry(label).or_default().push(i);
        }
    }

    let mut baselines = BTreeMap::new();
    for (label, members) in &by_condition {
        if members.len() < 2 {
            for &i in members {
                records[i].qc = QcStatus::Passed;
            }
            continue;
        }
        let baseline = trimmed_baseline(&spectra, members, label, k)?;
        for &i in members {
            let (status, score) = flag_divergent(&spectra[i], &baseline, k)?;
            records[i].qc = status;
            records[i].divergence_score = score;
            if status == QcStatus::FlaggedDivergent {
                records[i].flagged_by = Some(QcCheck::Condition);
            }
        }
        baselines.insert(label.clone(), baseline);
    }

    let spectra = spectra
        .into_iter()
        .zip(&records)
        .map(|(mut s, r)| {
            s.set_qc(r.qc);
            s
        })
        .collect();
    Ok(QcOutcome { spectra, records, baselines })
}

/// Baseline over the members that pass against it: a fixed point of
/// "flag against the baseline, recompute on the passed", started from the
/// better-scoring half of the members so that a contaminated first
/// baseline cannot mask the outliers.
fn trimmed_baseline(spectra: &[Spectrum], members: &[usize], label: &str, k: f64) -> Result<ConditionBaseline> {
    let all: Vec<&Spectrum> = members.iter().map(|&i| &spectra[i]).collect();
    let first = compute_baseline(&all, label)?;
    let mut scored: Vec<(f64, usize)> =
        members.iter().map(|&i| Ok((divergence_score(&spectra[i], &first)?, i))).collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<usize> = scored.iter().take(members.len().div_ceil(2).max(2)).map(|&(_, i)| i).collect();
    kept.sort_unstable();
    let core: Vec<&Spectrum> = kept.iter().map(|&i| &spectra[i]).collect();
    let mut baseline = compute_baseline(&core, label)?;
    for _ in 0..MAX_BASELINE_ROUNDS {
        let mut passed = Vec::with_capacity(members.len());
        for &i in members {
            if flag_divergent(&spectra[i], &baseline, k)?.0 == QcStatus::Passed {
                passed.push(i);
            }
        }
        if passed == kept || passed.len() < 2 {
            break;
        }
        let survivors: Vec<&Spectrum> = passed.iter().map(|&i| &spectra[i]).collect();
        baseline = compute_baseline(&survivors, label)?;
        kept = passed;
    }
    Ok(baseline)
}
