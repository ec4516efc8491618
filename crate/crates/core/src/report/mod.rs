//! Clinician-facing report: both models' decisions, the SHAP/LIME consensus
//! with library annotations, and the comorbidity false-positive overlap.
//!
//! A [`ClinicalReport`] holds data only; [`render_text`] and
//! [`render_structured`] turn it into the prose and itemized documents, and
//! [`parse_structured`] reads the itemized form back.
//!
//! Identifiers pass through verbatim. Pseudonymizing patient ids is the
//! caller's responsibility.

pub mod demo;
mod parse;
mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::annotate::{
    annotate_features, disease_evidence, AnnotatedFeature, ComorbidityProfile, Condition, DiseaseEvidence,
    Libraries, OverlapReport,
};
use crate::error::Result;
use crate::explain::{Attribution, ConsensusSet};
use crate::meta::{ExclusionPolicy, MetadataSchema, PatientRecord, Sex};

pub use parse::{parse_structured, ParsedReport};
pub use render::{render_structured, render_text};

/// Upper bound of the recommended BMI range.
pub const RECOMMENDED_BMI: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub probability: f64,
    pub threshold: f64,
}

impl Decision {
    /// Positive means colonoscopy recommended.
    pub fn positive(&self) -> bool {
        self.probability >= self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskTier {
    Low,
    Medium,
    High,
}

impl RiskTier {
    /// Both positive is high, exactly one is medium, none is low.
    pub fn from_decisions(polyp: bool, crc: bool) -> Self {
        match (polyp, crc) {
            (true, true) => RiskTier::High,
            (false, false) => RiskTier::Low,
            _ => RiskTier::Medium,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RiskTier::Low => "low",
            RiskTier::Medium => "medium",
            RiskTier::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Some(RiskTier::Low),
            "medium" => Some(RiskTier::Medium),
            "high" => Some(RiskTier::High),
            _ => None,
        }
    }
}

/// One model's output for the patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFindings {
    pub condition: Condition,
    /// `None` when the model produced no decision.
    pub decision: Option<Decision>,
    /// Consensus features in consensus order.
    pub flagged: Vec<AnnotatedFeature>,
    pub evidence: DiseaseEvidence,
}

impl ModelFindings {
    /// Annotates the consensus and matches the disease library against the
    /// flagged spectral features whose SHAP score pushes toward the condition.
    pub fn new(
        condition: Condition,
        decision: Option<Decision>,
        consensus: &ConsensusSet,
        shap: &Attribution,
        grid: &[f64],
        libs: &Libraries,
    ) -> Result<Self> {
        let flagged = annotate_features(consensus, grid, libs)?;
        let supporting: Vec<AnnotatedFeature> =
            flagged.iter().filter(|f| shap.score(&f.feature).is_some_and(|s| s > 0.0)).cloned().collect();
        let evidence = disease_evidence(condition, &supporting, libs);
        Ok(ModelFindings { condition, decision, flagged, evidence })
    }

    /// Stanza for a model that produced nothing.
    pub fn unavailable(condition: Condition, libs: &Libraries) -> Self {
        ModelFindings { condition, decision: None, flagged: Vec::new(), evidence: disease_evidence(condition, &[], libs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientHeader {
    pub patient_id: String,
    pub age: Option<f64>,
    pub bmi: Option<f64>,
    /// `(bmi - 25) / 25` in percent, floored at 0.
    pub bmi_percent_over: Option<f64>,
    pub smoking: String,
    pub sex: Sex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Display names of present, non-excluded comorbidities.
    pub conditions: Vec<String>,
    pub previous_malignancy: bool,
    /// Schema comorbidities the patient does not have (excluded ones omitted).
    pub negatives: Vec<String>,
    pub symptoms_present: Vec<String>,
    pub symptoms_absent: Vec<String>,
    /// Comorbidities removed by the exclusion policy, by display name.
    pub excluded: Vec<String>,
    pub medications: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSection {
    pub metadata_flagged: Vec<String>,
    /// Flagged metadata features that are positive indicators for the patient.
    pub metadata_flagged_positive: usize,
    /// Binary indicators equal to 1 for the patient.
    pub positives: usize,
    pub features_evaluated: usize,
    pub spectral_flagged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalReport {
    pub header: PatientHeader,
    pub history: History,
    pub polyp: ModelFindings,
    pub crc: ModelFindings,
    /// `None` when either model is unavailable.
    pub tier: Option<RiskTier>,
    pub shap: ShapSection,
    /// Library profiles of the patient's comorbidities.
    pub observations: Vec<ComorbidityProfile>,
    pub overlap: OverlapReport,
}

pub struct ReportInputs<'a> {
    pub record: &'a PatientRecord,
    pub schema: &'a MetadataSchema,
    pub policy: &'a ExclusionPolicy,
    pub libraries: &'a Libraries,
}

/// Encoded names of the patient's positive binary indicators.
pub fn positive_indicators(record: &PatientRecord, policy: &ExclusionPolicy) -> Vec<String> {
    let mut out = Vec::new();
    if record.sex == Sex::M {
        out.push("sex_male".to_string());
    }
    out.push(format!("smoking_{}", record.smoking_status.code()));
    if record.previous_malignancy {
        out.push("previous_malignancy".to_string());
    }
    out.extend(
        record
            .present_comorbidities()
            .filter(|k| !policy.excluded_comorbidities.contains(*k))
            .map(|k| format!("comorbidity:{k}")),
    );
    out.extend(record.present_symptoms().map(|k| format!("symptom:{k}")));
    out.extend(record.medications.iter().map(|m| format!("med:{m}")));
    out
}

fn union_in_order<'a>(lists: impl IntoIterator<Item = &'a AnnotatedFeature>, spectral: bool) -> Vec<String> {
    let mut seen = BTreeSet::new();
    lists
        .into_iter()
        .filter(|f| f.is_spectral() == spectral)
        .filter(|f| seen.insert(f.feature.clone()))
        .map(|f| f.feature.clone())
        .collect()
}

/// Assembles the report data. Deterministic in its inputs.
pub fn compose(
    inputs: &ReportInputs<'_>,
    polyp: ModelFindings,
    crc: ModelFindings,
    overlap: OverlapReport,
) -> ClinicalReport {
    let ReportInputs { record, schema, policy, libraries } = *inputs;
    let excluded = &policy.excluded_comorbidities;

    let header = PatientHeader {
        patient_id: record.patient_id.clone(),
        age: record.age,
        bmi: record.bmi,
        bmi_percent_over: record.bmi.map(|b| ((b - RECOMMENDED_BMI) / RECOMMENDED_BMI * 100.0).max(0.0)),
        smoking: record.smoking_status.describe().to_string(),
        sex: record.sex,
    };

    let present: BTreeSet<&str> = record.present_comorbidities().collect();
    let schema_keys: BTreeSet<&str> = schema.comorbidities.iter().map(|c| c.key.as_str()).collect();
    let mut conditions: Vec<String> = schema
        .comorbidities
        .iter()
        .filter(|c| present.contains(c.key.as_str()) && !excluded.contains(&c.key))
        .map(|c| c.display.clone())
        .collect();
    // conditions outside the schema keep their record key
    conditions.extend(
        present
            .iter()
            .filter(|k| !schema_keys.contains(*k) && !excluded.contains(**k))
            .map(|k| k.replace('_', " ")),
    );
    let symptoms: BTreeSet<&str> = record.present_symptoms().collect();
    let history = History {
        conditions,
        previous_malignancy: record.previous_malignancy,
        negatives: schema
            .comorbidities
            .iter()
            .filter(|c| !present.contains(c.key.as_str()) && !excluded.contains(&c.key))
            .map(|c| c.display.clone())
            .collect(),
        symptoms_present: schema
            .symptoms
            .iter()
            .filter(|s| symptoms.contains(s.key.as_str()))
            .map(|s| s.display.clone())
            .collect(),
        symptoms_absent: schema
            .symptoms
            .iter()
            .filter(|s| !symptoms.contains(s.key.as_str()))
            .map(|s| s.display.clone())
            .collect(),
        excluded: schema.comorbidities.iter().filter(|c| excluded.contains(&c.key)).map(|c| c.display.clone()).collect(),
        medications: record.medications.clone(),
    };

    let tier = match (polyp.decision, crc.decision) {
        (Some(p), Some(c)) => Some(RiskTier::from_decisions(p.positive(), c.positive())),
        _ => None,
    };

    let positives = positive_indicators(record, policy);
    let metadata_flagged = union_in_order(polyp.flagged.iter().chain(&crc.flagged), false);
    let shap = ShapSection {
        metadata_flagged_positive: metadata_flagged.iter().filter(|f| positives.contains(f)).count(),
        metadata_flagged,
        positives: positives.len(),
        features_evaluated: schema.encoded_width(excluded),
        spectral_flagged: union_in_order(polyp.flagged.iter().chain(&crc.flagged), true),
    };

    let observations = record
        .present_comorbidities()
        .filter(|k| !excluded.contains(*k))
        .filter_map(|k| {
            libraries
                .comorbidities
                .get(k)
                .map(|p| ComorbidityProfile { name: schema.comorbidity_display(k).to_string(), ..p.clone() })
        })
        .collect();

    ClinicalReport { header, history, polyp, crc, tier, shap, observations, overlap }
}

impl ClinicalReport {
    pub fn findings(&self, condition: Condition) -> &ModelFindings {
        match condition {
            Condition::Polyp => &self.polyp,
            Condition::Crc => &self.crc,
        }
    }
}
