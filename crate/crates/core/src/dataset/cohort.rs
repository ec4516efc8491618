use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{Diagnosis, PatientRecord, Sex};
use crate::spectra::{QcStatus, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    PolypVsControl,
    CrcVsControl,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::PolypVsControl, Task::CrcVsControl];

    pub fn positive(self) -> Diagnosis {
        match self {
            Task::PolypVsControl => Diagnosis::Polyp,
            Task::CrcVsControl => Diagnosis::EarlyCancer,
        }
    }

    /// 0 for controls, 1 for the task's disease, `None` for anything else.
    pub fn label(self, d: Diagnosis) -> Option<u8> {
        if d == Diagnosis::Control {
            Some(0)
        } else if d == self.positive() {
            Some(1)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::PolypVsControl => "polyp_vs_control",
            Task::CrcVsControl => "crc_vs_control",
        }
    }

    /// Short name of the positive class, as used in reports.
    pub fn condition(self) -> &'static str {
        match self {
            Task::PolypVsControl => "polyp",
            Task::CrcVsControl => "crc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    Unbalanced,
    Balanced,
}

/// Row granularity of the spectral matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One row per patient: mean of the replicates that passed QC.
    PatientMean,
    /// One row per passed replicate; splits keep a patient's rows together.
    Replicate,
}

/// Aligned spectra, records and binary labels for one task.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub task: Task,
    pub balance: Balance,
    pub aggregation: Aggregation,
    pub wavenumbers: Vec<f64>,
    /// n_rows x d_s.
    pub spectra: DMatrix<f64>,
    /// One record per patient, sorted by patient id.
    pub records: Vec<PatientRecord>,
    /// Patient index (into `records`) of every spectral row.
    pub row_patient: Vec<usize>,
    pub labels: Vec<u8>,
}

impl Cohort {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_patients(&self) -> usize {
        self.records.len()
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    /// Records aligned with spectral rows.
    pub fn row_records(&self) -> Vec<PatientRecord> {
        self.row_patient.iter().map(|&p| self.records[p].clone()).collect()
    }

    /// Sub-cohort restricted to one sex (the men-only / women-only models).
    pub fn filter_sex(&self, sex: Sex) -> Cohort {
        self.filter_patients(|r| r.sex == sex)
    }

    pub fn filter_patients(&self, keep: impl Fn(&PatientRecord) -> bool) -> Cohort {
        let kept_patients: Vec<usize> = (0..self.records.len()).filter(|&p| keep(&self.records[p])).collect();
        let remap: BTreeMap<usize, usize> = kept_patients.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| remap.contains_key(&self.row_patient[i])).collect();
        Cohort {
            task: self.task,
            balance: self.balance,
            aggregation: self.aggregation,
            wavenumbers: self.wavenumbers.clone(),
            spectra: self.spectra.select_rows(rows.iter()),
            records: kept_patients.iter().map(|&p| self.records[p].clone()).collect(),
            row_patient: rows.iter().map(|&i| remap[&self.row_patient[i]]).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Size every (sex x diagnosis) cell is cut down to when balancing.
pub fn balanced_cell_size(counts: &[usize]) -> usize {
    counts.iter().copied().min().unwrap_or(0)
}

/// Builds a task cohort from QC'd spectra and (already exclusion-filtered)
/// records. Balancing downsamples every sex x diagnosis cell, over all three
/// diagnoses, to the smallest cell before the task filter is applied.
pub fn assemble(
    spectra: &[Spectrum],
    records: &[PatientRecord],
    task: Task,
    balance: Balance,
    aggregation: Aggregation,
    seed: u64,
) -> Result<Cohort> {
    let mut passed: BTreeMap<&str, Vec<&Spectrum>> = BTreeMap::new();
    for s in spectra.iter().filter(|s| s.qc() == QcStatus::Passed) {
        passed.entry(s.sample_id()).or_default().push(s);
    }
    let Some(grid) = passed.values().next().map(|v| v[0].wavenumbers().to_vec()) else {
        return Err(Error::Assembly("no spectra passed QC".into()));
    };
    if let Some(bad) = passed.values().flatten().find(|s| !s.same_grid(&grid)) {
        return Err(Error::GridMismatch(format!("{} is not on the common grid", bad.sample_id())));
    }

    let by_id: BTreeMap<&str, &PatientRecord> = records.iter().map(|r| (r.patient_id.as_str(), r)).collect();
    let mut patients: Vec<&PatientRecord> =
        passed.keys().filter_map(|id| by_id.get(id).copied()).collect();
    if patients.is_empty() {
        return Err(Error::Assembly("spectra and metadata share no patient ids".into()));
    }

    if balance == Balance::Balanced {
        let mut cells: BTreeMap<(Sex, Diagnosis), Vec<&PatientRecord>> = BTreeMap::new();
        for r in &patients {
            cells.entry((r.sex, r.diagnosis)).or_default().push(r);
        }
        let expected = 2 * Diagnosis::ALL.len();
        if cells.len() < expected {
            return Err(Error::Assembly(format!(
                "balancing needs all {expected} sex x diagnosis cells, found {}",
                cells.len()
            )));
        }
        let counts: Vec<usize> = cells.values().map(Vec::len).collect();
        let size = balanced_cell_size(&counts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kept = Vec::new();
        for members in cells.values_mut() {
            members.shuffle(&mut rng);
            kept.extend(members.iter().take(size).copied());
        }
        patients = kept;
    }

    let mut patients: Vec<&PatientRecord> =
        patients.into_iter().filter(|r| task.label(r.diagnosis).is_some()).collect();
    patients.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let classes: BTreeSet<u8> = patients.iter().filter_map(|r| task.label(r.diagnosis)).collect();
    if classes.len() < 2 {
        return Err(Error::Assembly(format!(
            "task {} has an empty class after filtering",
            task.as_str()
        )));
    }

    let d = grid.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_patient = Vec::new();
    let mut labels = Vec::new();
    for (p, r) in patients.iter().enumerate() {
        let mut reps = passed[r.patient_id.as_str()].clone();
        reps.sort_by_key(|s| s.replicate());
        let label = task.label(r.diagnosis).expect("filtered above");
        match aggregation {
            Aggregation::PatientMean => {
                let mut mean = vec![0.0; d];
                for s in &reps {
                    for (m, y) in mean.iter_mut().zip(s.intensities()) {
                        *m += y;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= reps.len() as f64);
                rows.push(mean);
                row_patient.push(p);
                labels.push(label);
            }
            Aggregation::Replicate => {
                for s in reps {
                    rows.push(s.intensities().to_vec());
                    row_patient.push(p);
                    labels.push(label);
                }
            }
        }
    }
    let spectra = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Ok(Cohort {
        task,
        balance,
        aggregation,
        wavenumbers: grid,
        spectra,
        records: patients.into_iter().cloned().collect(),
        row_patient,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::SmokingStatus;
    use crate::spectra::Stage;

    #[test]
    fn table_one_cell_size() {
        assert_eq!(balanced_cell_size(&[249, 222, 182, 120, 149, 113]), 113);
    }

    fn record(id: &str, sex: Sex, d: Diagnosis) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            age: Some(50.0),
            sex,
            bmi: Some(25.0),
            smoking_status: SmokingStatus::new(0).unwrap(),
            diagnosis: d,
            comorbidities: Default::default(),
            medications: vec![],
            previous_malignancy: false,
            symptoms: Default::default(),
            groups: Default::default(),
        }
    }

    fn spectrum(id: &str, rep: usize, level: f64, qc: QcStatus) -> Spectrum {
        let mut s = Spectrum::with_stage(
            id,
            rep,
            (0..5).map(|i| 1000.0 + i as f64).collect(),
            vec![level; 5],
            Stage::Normalized,
        )
        .unwrap();
        s.set_qc(qc);
        s
    }

    #[test]
    fn averages_passed_replicates_and_drops_flagged_patients() {
        let recs = vec![
            record("a", Sex::M, Diagnosis::Control),
            record("b", Sex::F, Diagnosis::Polyp),
            record("c", Sex::F, Diagnosis::Polyp),
            record("d", Sex::M, Diagnosis::EarlyCancer),
        ];
        let spectra = vec![
            spectrum("a", 0, 1.0, QcStatus::Passed),
            spectrum("a", 1, 3.0, QcStatus::Passed),
            spectrum("a", 2, 100.0, QcStatus::FlaggedDivergent),
            spectrum("b", 0, 5.0, QcStatus::Passed),
            spectrum("c", 0, 7.0, QcStatus::FlaggedDivergent),
            spectrum("d", 0, 9.0, QcStatus::Passed),
        ];
        let c = assemble(&spectra, &recs, Task::PolypVsControl, Balance::Unbalanced, Aggregation::PatientMean, 1)
            .unwrap();
        assert_eq!(c.patient_ids(), vec!["a", "b"]);
        assert_eq!(c.labels, vec![0, 1]);
        assert_eq!(c.spectra[(0, 0)], 2.0);
        let r = assemble(&spectra, &recs, Task::PolypVsControl, Balance::Unbalanced, Aggregation::Replicate, 1)
            .unwrap();
        assert_eq!(r.n_rows(), 3);
        assert_eq!(r.row_patient, vec![0, 0, 1]);
    }

    #[test]
    fn empty_class_is_an_error() {
        let recs = vec![record("a", Sex::M, Diagnosis::Control), record("b", Sex::M, Diagnosis::Polyp)];
        let spectra = vec![spectrum("a", 0, 1.0, QcStatus::Passed), spectrum("b", 0, 1.0, QcStatus::Passed)];
        let err = assemble(&spectra, &recs, Task::CrcVsControl, Balance::Unbalanced, Aggregation::PatientMean, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Assembly(_)));
    }
}
