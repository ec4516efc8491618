use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::record::{PatientRecord, Sex};
use crate::error::{Error, Result};
use crate::linalg::median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParam {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
enum Column {
    Age,
    AgeMissing,
    Bmi,
    BmiMissing,
    SexMale,
    Smoking(u8),
    PreviousMalignancy,
    Comorbidity(String),
    Symptom(String),
    Medication(String),
}

impl Column {
    fn name(&self) -> String {
        match self {
            Column::Age => "age".into(),
            Column::AgeMissing => "age_missing".into(),
            Column::Bmi => "bmi".into(),
            Column::BmiMissing => "bmi_missing".into(),
            Column::SexMale => "sex_male".into(),
            Column::Smoking(c) => format!("smoking_{c}"),
            Column::PreviousMalignancy => "previous_malignancy".into(),
            Column::Comorbidity(k) => format!("comorbidity:{k}"),
            Column::Symptom(k) => format!("symptom:{k}"),
            Column::Medication(m) => format!("med:{m}"),
        }
    }

    fn is_binary(&self) -> bool {
        !matches!(self, Column::Age | Column::Bmi)
    }
}

/// Scaled metadata matrix `X_m` (n x d_m).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMeta {
    pub matrix: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub scaler_params: Vec<ScalerParam>,
    /// Medications seen at transform time that have no column.
    pub unseen_medications: usize,
}

/// Encoder fitted on a training split: vocabulary, imputation medians and
/// standardization statistics all come from the records passed to `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEncoder {
    columns: Vec<Column>,
    feature_names: Vec<String>,
    scaler: Vec<ScalerParam>,
    age_median: f64,
    bmi_median: f64,
}

impl MetaEncoder {
    pub fn fit(train: &[PatientRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidRecord("cannot fit encoder on zero records".into()));
        }
        let ages: Vec<f64> = train.iter().filter_map(|r| r.age).collect();
        let bmis: Vec<f64> = train.iter().filter_map(|r| r.bmi).collect();
        let age_median = if ages.is_empty() { 0.0 } else { median(&ages) };
        let bmi_median = if bmis.is_empty() { 0.0 } else { median(&bmis) };

        let mut candidates: BTreeSet<Column> = BTreeSet::new();
        candidates.extend([Column::Age, Column::Bmi, Column::SexMale, Column::PreviousMalignancy]);
        if ages.len() < train.len() {
            candidates.insert(Column::AgeMissing);
        }
        if bmis.len() < train.len() {
            candidates.insert(Column::BmiMissing);
        }
        for r in train {
            candidates.insert(Column::Smoking(r.smoking_status.code()));
            candidates.extend(r.comorbidities.keys().map(|k| Column::Comorbidity(k.clone())));
            candidates.extend(r.symptoms.keys().map(|k| Column::Symptom(k.clone())));
            candidates.extend(r.medications.iter().map(|m| Column::Medication(m.clone())));
        }
        let mut candidates: Vec<Column> = candidates.into_iter().collect();
        candidates.sort_by_key(Column::name);

        let mut probe = MetaEncoder {
            feature_names: candidates.iter().map(Column::name).collect(),
            scaler: vec![ScalerParam { mean: 0.0, std: 1.0 }; candidates.len()],
            columns: candidates,
            age_median,
            bmi_median,
        };
        let (raw, _) = probe.raw_matrix(train);
        let n = train.len() as f64;
        let mut keep = Vec::new();
        let mut scaler = Vec::new();
        for j in 0..raw.ncols() {
            let col = raw.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 1e-24 {
                keep.push(j);
                scaler.push(ScalerParam { mean, std: var.sqrt() });
            }
        }
        probe.columns = keep.iter().map(|&j| probe.columns[j].clone()).collect();
        probe.feature_names = probe.columns.iter().map(Column::name).collect();
        probe.scaler = scaler;
        Ok(probe)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Standardization of each column, in column order.
    pub fn scaler_params(&self) -> &[ScalerParam] {
        &self.scaler
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Indices of columns holding binary indicators (before scaling).
    pub fn binary_columns(&self) -> Vec<bool> {
        self.columns.iter().map(Column::is_binary).collect()
    }

    fn raw_value(&self, col: &Column, r: &PatientRecord) -> f64 {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match col {
            Column::Age => r.age.unwrap_or(self.age_median),
            Column::AgeMissing => flag(r.age.is_none()),
            Column::Bmi => r.bmi.unwrap_or(self.bmi_median),
            Column::BmiMissing => flag(r.bmi.is_none()),
            Column::SexMale => flag(r.sex == Sex::M),
            Column::Smoking(c) => flag(r.smoking_status.code() == *c),
            Column::PreviousMalignancy => flag(r.previous_malignancy),
            Column::Comorbidity(k) => flag(r.has_comorbidity(k)),
            Column::Symptom(k) => flag(r.symptoms.get(k).copied().unwrap_or(false)),
            Column::Medication(m) => flag(r.medications.iter().any(|x| x == m)),
        }
    }

    /// Unscaled encoding (binary columns in {0,1}, numeric in natural units).
    pub fn raw_matrix(&self, records: &[PatientRecord]) -> (DMatrix<f64>, usize) {
        let known: BTreeSet<&str> = self
            .columns
            .iter()
            .filter_map(|c| if let Column::Medication(m) = c { Some(m.as_str()) } else { None })
            .collect();
        let m = DMatrix::from_fn(records.len(), self.columns.len(), |i, j| {
            self.raw_value(&self.columns[j], &records[i])
        });
        let unseen = records
            .iter()
            .map(|r| r.medications.iter().filter(|m| !known.contains(m.as_str())).count())
            .sum();
        (m, unseen)
    }

    pub fn transform(&self, records: &[PatientRecord]) -> EncodedMeta {
        let (mut matrix, unseen) = self.raw_matrix(records);
        for (j, p) in self.scaler.iter().enumerate() {
            for v in matrix.column_mut(j).iter_mut() {
                *v = (*v - p.mean) / p.std;
            }
        }
        if unseen > 0 {
            log::warn!("{unseen} medication mentions have no column in the fitted vocabulary");
        }
        EncodedMeta {
            matrix,
            feature_names: self.feature_names.clone(),
            scaler_params: self.scaler.clone(),
            unseen_medications: unseen,
        }
    }

    /// Raw per-feature values for one record, keyed by feature name.
    pub fn raw_features(&self, record: &PatientRecord) -> BTreeMap<String, f64> {
        let (m, _) = self.raw_matrix(std::slice::from_ref(record));
        self.feature_names.iter().cloned().zip(m.row(0).iter().copied()).collect()
    }
}

/// Fits on `records` and encodes them.
pub fn encode(records: &[PatientRecord]) -> Result<EncodedMeta> {
    Ok(MetaEncoder::fit(records)?.transform(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::{Diagnosis, SmokingStatus};

    fn rec(id: &str, age: f64, sex: Sex, meds: &[&str], smoking: u8) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            age: Some(age),
            sex,
            bmi: Some(20.0 + age / 10.0),
            smoking_status: SmokingStatus::new(smoking).unwrap(),
            diagnosis: Diagnosis::Control,
            comorbidities: [("hypertension".to_string(), age > 60.0)].into_iter().collect(),
            medications: meds.iter().map(|s| s.to_string()).collect(),
            previous_malignancy: false,
            symptoms: Default::default(),
            groups: Default::default(),
        }
    }

    fn cohort() -> Vec<PatientRecord> {
        vec![
            rec("a", 50.0, Sex::M, &["paracetamol"], 0),
            rec("b", 65.0, Sex::F, &[], 1),
            rec("c", 72.0, Sex::M, &["ramipril", "paracetamol"], 2),
            rec("d", 44.0, Sex::F, &["ramipril"], 0),
        ]
    }

    #[test]
    fn numeric_columns_are_standardized() {
        let e = encode(&cohort()).unwrap();
        let j = e.feature_names.iter().position(|n| n == "age").unwrap();
        let col = e.matrix.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sex_changes_only_sex_column() {
        let mut a = cohort();
        let mut twin = a[0].clone();
        twin.patient_id = "a2".into();
        twin.sex = Sex::F;
        a.push(twin);
        let e = encode(&a).unwrap();
        let diff: Vec<&String> = e
            .feature_names
            .iter()
            .enumerate()
            .filter(|(j, _)| e.matrix[(0, *j)] != e.matrix[(4, *j)])
            .map(|(_, n)| n)
            .collect();
        assert_eq!(diff, vec!["sex_male"]);
    }

    #[test]
    fn names_sorted_and_constant_columns_dropped() {
        let e = encode(&cohort()).unwrap();
        let mut sorted = e.feature_names.clone();
        sorted.sort();
        assert_eq!(sorted, e.feature_names);
        // previous_malignancy is false for everyone
        assert!(!e.feature_names.iter().any(|n| n == "previous_malignancy"));
        assert!(e.feature_names.iter().any(|n| n == "med:ramipril"));
    }

    #[test]
    fn unseen_medication_is_tallied() {
        let enc = MetaEncoder::fit(&cohort()).unwrap();
        let novel = rec("z", 60.0, Sex::M, &["warfarin", "paracetamol"], 0);
        let out = enc.transform(&[novel]);
        assert_eq!(out.unseen_medications, 1);
        assert_eq!(out.matrix.ncols(), enc.width());
    }

    #[test]
    fn missing_values_get_median_and_indicator() {
        let mut c = cohort();
        c[1].age = None;
        let enc = MetaEncoder::fit(&c).unwrap();
        assert!(enc.feature_names().iter().any(|n| n == "age_missing"));
        let raw = enc.raw_features(&c[1]);
        assert_eq!(raw["age"], 50.0);
        assert_eq!(raw["age_missing"], 1.0);
    }

    #[test]
    fn reencoding_is_bit_exact() {
        let c = cohort();
        let enc = MetaEncoder::fit(&c).unwrap();
        let json = serde_json::to_string(&enc).unwrap();
        let back: MetaEncoder = serde_json::from_str(&json).unwrap();
        assert_eq!(enc.transform(&c).matrix, back.transform(&c).matrix);
    }
}
