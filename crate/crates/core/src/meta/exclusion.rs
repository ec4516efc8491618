use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{normalize_name, PatientRecord};
use crate::error::{Error, Result};

/// Comorbidities and patient groups that must not reach the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionPolicy {
    pub excluded_comorbidities: BTreeSet<String>,
    pub excluded_patient_groups: BTreeSet<String>,
}

impl Default for ExclusionPolicy {
    fn default() -> Self {
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        ExclusionPolicy {
            excluded_comorbidities: set(&[
                "lynch",
                "diverticular_disease",
                "haemorrhoids",
                "ibd",
                "microscopic_colitis",
                "proctitis",
                "angiodysplasia",
                "hyperplastic_polyps",
            ]),
            excluded_patient_groups: set(&["substance_abuse"]),
        }
    }
}

impl ExclusionPolicy {
    pub fn empty() -> Self {
        ExclusionPolicy { excluded_comorbidities: BTreeSet::new(), excluded_patient_groups: BTreeSet::new() }
    }

    /// Parses the key-value policy file:
    ///
    /// ```toml
    /// excluded_comorbidities = ["lynch", "ibd"]
    /// excluded_patient_groups = ["substance_abuse"]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ExclusionPolicy =
            toml::from_str(text).map_err(|e| Error::Config(format!("exclusion policy: {e}")))?;
        Ok(ExclusionPolicy {
            excluded_comorbidities: raw.excluded_comorbidities.iter().map(|s| normalize_name(s)).collect(),
            excluded_patient_groups: raw.excluded_patient_groups.iter().map(|s| normalize_name(s)).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("policy serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovedRecord {
    pub record: PatientRecord,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionOutcome {
    pub kept: Vec<PatientRecord>,
    pub removed: Vec<RemovedRecord>,
}

/// Removes records carrying an excluded comorbidity or group, and drops the
/// excluded comorbidity fields from every kept record.
pub fn apply_exclusions(records: Vec<PatientRecord>, policy: &ExclusionPolicy) -> Result<ExclusionOutcome> {
    if records.is_empty() {
        return Err(Error::PipelineHalt("no metadata records to filter".into()));
    }
    let total = records.len();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for mut record in records {
        let mut reasons: Vec<String> = record
            .present_comorbidities()
            .filter(|c| policy.excluded_comorbidities.contains(*c))
            .map(|c| format!("excluded_comorbidity:{c}"))
            .collect();
        reasons.extend(
            record
                .groups
                .iter()
                .filter(|g| policy.excluded_patient_groups.contains(*g))
                .map(|g| format!("excluded_group:{g}")),
        );
        if reasons.is_empty() {
            record.comorbidities.retain(|k, _| !policy.excluded_comorbidities.contains(k));
            kept.push(record);
        } else {
            removed.push(RemovedRecord { record, reasons });
        }
    }
    if kept.is_empty() {
        let mut counts = std::collections::BTreeMap::new();
        for r in &removed {
            for reason in &r.reasons {
                *counts.entry(reason.as_str()).or_insert(0usize) += 1;
            }
        }
        let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        return Err(Error::PipelineHalt(format!(
            "all {total} records excluded ({})",
            summary.join(", ")
        )));
    }
    Ok(ExclusionOutcome { kept, removed })
}
