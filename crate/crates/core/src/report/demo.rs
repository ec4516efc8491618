//! A fixed, hand-checked patient used by the example, the golden files and
//! the acceptance suite. Everything is stated explicitly so the rendered
//! report depends on the report code alone, not on any trained model.

use std::collections::{BTreeMap, BTreeSet};

use super::{compose, ClinicalReport, Decision, ModelFindings, ReportInputs};
use crate::annotate::{overlap_report, Condition, Libraries};
use crate::error::Result;
use crate::explain::{Attribution, ConsensusFeature, ConsensusSet, Method};
use crate::meta::{Diagnosis, ExclusionPolicy, MetadataSchema, PatientRecord, Sex, SmokingStatus};

pub const DEMO_PATIENT_ID: &str = "DEMO-0001";

/// 701-point grid, 400 to 1800 cm^-1 in steps of 2.
pub fn demo_grid() -> Vec<f64> {
    (0..701).map(|i| 400.0 + 2.0 * i as f64).collect()
}

/// Hypertensive male smoker on three medications.
pub fn demo_record() -> PatientRecord {
    let schema = MetadataSchema::default_clinical();
    let comorbidities: BTreeMap<String, bool> =
        schema.comorbidities.iter().map(|c| (c.key.clone(), c.key == "hypertension")).collect();
    let symptoms: BTreeMap<String, bool> = schema.symptoms.iter().map(|s| (s.key.clone(), false)).collect();
    PatientRecord {
        patient_id: DEMO_PATIENT_ID.into(),
        age: Some(64.0),
        sex: Sex::M,
        bmi: Some(25.5),
        smoking_status: SmokingStatus::new(1).expect("valid code"),
        diagnosis: Diagnosis::Polyp,
        comorbidities,
        medications: vec!["bendroflumethiazide".into(), "hypromellose 0.3% eye drops".into(), "paracetamol".into()],
        previous_malignancy: false,
        symptoms,
        groups: BTreeSet::new(),
    }
}

/// `(feature, SHAP score, LIME score)`, strongest first.
type Scored = [(&'static str, f64, f64)];

// Polyp model: acetate/pyruvate at 920 and 1416 cm^-1, glycerol at 850,
// keto acids at 1700 and hypertension in the metadata.
const POLYP: &Scored = &[
    ("V261", 0.061, 0.048),
    ("V509", 0.054, 0.041),
    ("comorbidity:hypertension", 0.037, 0.030),
    ("V226", 0.031, 0.027),
    ("V651", 0.022, 0.019),
];

// CRC model: the glucose band at 490 cm^-1 pushes toward control, so it is
// not evidence for CRC.
const CRC: &Scored = &[("V46", -0.044, -0.035), ("V160", -0.029, -0.020), ("age", 0.012, 0.009)];

fn attribution(method: Method, scored: &Scored, prediction: f64, lime: bool) -> Attribution {
    let scores: Vec<f64> = scored.iter().map(|s| if lime { s.2 } else { s.1 }).collect();
    let base = prediction - scores.iter().sum::<f64>();
    Attribution {
        sample_id: DEMO_PATIENT_ID.into(),
        method,
        feature_names: scored.iter().map(|s| s.0.to_string()).collect(),
        scores,
        base_value: base,
        prediction,
        n_perturbations: 0,
        seed: 0,
        r_squared: None,
    }
}

fn findings(condition: Condition, scored: &Scored, probability: f64, libs: &Libraries) -> Result<ModelFindings> {
    let shap = attribution(Method::ShapKernel, scored, probability, false);
    // Both explainers agree on every listed feature, ranked as listed.
    let consensus = ConsensusSet {
        class: condition.as_str().into(),
        k: 10,
        features: scored
            .iter()
            .enumerate()
            .map(|(i, s)| ConsensusFeature { feature: s.0.into(), shap_rank: i + 1, lime_rank: i + 1 })
            .collect(),
    };
    let decision = Decision { probability, threshold: 0.5 };
    ModelFindings::new(condition, Some(decision), &consensus, &shap, &demo_grid(), libs)
}

/// The demo's explanations as the two explainers would report them.
pub fn demo_attributions() -> Vec<Attribution> {
    vec![
        attribution(Method::ShapKernel, POLYP, 0.81, false),
        attribution(Method::Lime, POLYP, 0.81, true),
        attribution(Method::ShapKernel, CRC, 0.23, false),
        attribution(Method::Lime, CRC, 0.23, true),
    ]
}

/// Polyp model positive, CRC model negative: medium risk.
pub fn demo_report(libs: &Libraries) -> Result<ClinicalReport> {
    let record = demo_record();
    let schema = MetadataSchema::default_clinical();
    let policy = ExclusionPolicy::default();
    let polyp = findings(Condition::Polyp, POLYP, 0.81, libs)?;
    let crc = findings(Condition::Crc, CRC, 0.23, libs)?;
    let present: Vec<&str> =
        record.present_comorbidities().filter(|k| !policy.excluded_comorbidities.contains(*k)).collect();
    let overlap = overlap_report(&present, &[polyp.evidence.clone(), crc.evidence.clone()], libs);
    let inputs = ReportInputs { record: &record, schema: &schema, policy: &policy, libraries: libs };
    Ok(compose(&inputs, polyp, crc, overlap))
}
