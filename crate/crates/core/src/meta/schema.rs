use serde::{Deserialize, Serialize};

use super::record::SmokingStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedField {
    pub key: String,
    pub display: String,
}

impl NamedField {
    pub fn new(key: &str, display: &str) -> Self {
        NamedField { key: key.to_string(), display: display.to_string() }
    }
}

/// Every metadata field a record may carry. Report negatives are enumerated
/// from here, and the synthetic generator samples from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataSchema {
    pub comorbidities: Vec<NamedField>,
    pub symptoms: Vec<NamedField>,
    pub medications: Vec<String>,
}

const COMORBIDITIES: &[(&str, &str)] = &[
    ("hypertension", "hypertension"),
    ("asthma", "asthma"),
    ("hypothyroidism", "hypothyroidism"),
    ("hyperthyroidism", "hyperthyroidism"),
    ("atrial_fibrillation", "atrial fibrillation"),
    ("ihd", "ischemic heart disease (IHD)"),
    ("anxiety_depression", "anxiety and/or depression"),
    ("hypercholesterolaemia", "hypercholesterolaemia"),
    ("arthritis", "arthritis"),
    ("type2_diabetes", "type 2 diabetes"),
    ("copd", "chronic obstructive pulmonary disease"),
    ("ckd", "chronic kidney disease"),
    // leakage-prone conditions; removed by the default exclusion policy
    ("lynch", "Lynch syndrome"),
    ("diverticular_disease", "diverticular disease"),
    ("haemorrhoids", "haemorrhoids"),
    ("ibd", "inflammatory bowel disease"),
    ("microscopic_colitis", "microscopic colitis"),
    ("proctitis", "proctitis"),
    ("angiodysplasia", "angiodysplasia"),
    ("hyperplastic_polyps", "hyperplastic polyps"),
];

const SYMPTOMS: &[(&str, &str)] = &[
    ("gi_bleeding", "gastrointestinal bleeding"),
    ("weight_loss", "weight loss"),
    ("loss_of_appetite", "loss of appetite"),
    ("change_in_bowel_habit", "change in bowel habit"),
    ("abdominal_pain", "abdominal pain"),
    ("abdominal_mass", "abdominal mass"),
    ("anal_pain", "anal pain"),
    ("anal_lump", "anal lump/mass"),
    ("rectal_mass", "rectal mass"),
    ("new_anaemia", "new anaemia"),
    ("looser_stool", "looser stool"),
    ("increased_frequency", "increased frequency in bowel habit"),
    ("urgency", "urgency change"),
    ("incomplete_emptying", "incomplete emptying"),
    ("constipation", "constipation"),
];

const NAMED_MEDICATIONS: &[&str] = &[
    "amlodipine", "atorvastatin", "bendroflumethiazide", "bisoprolol", "candesartan",
    "citalopram", "clopidogrel", "co-codamol", "doxazosin", "fluoxetine",
    "furosemide", "gabapentin", "gliclazide", "hypromellose 0.3% eye drops", "lansoprazole",
    "levothyroxine", "lisinopril", "losartan", "metformin", "mirtazapine",
    "naproxen", "omeprazole", "paracetamol", "pregabalin", "ramipril",
    "rivaroxaban", "salbutamol", "sertraline", "simvastatin", "tamsulosin",
    "warfarin", "apixaban", "aspirin", "beclometasone", "budesonide",
    "carbimazole", "colecalciferol", "diazepam", "digoxin", "edoxaban",
    "finasteride", "folic acid", "ibuprofen", "indapamide", "insulin glargine",
    "isosorbide mononitrate", "lercanidipine", "montelukast", "morphine", "nitrofurantoin",
    "pantoprazole", "prednisolone", "propranolol", "quinine", "sitagliptin",
    "spironolactone", "tiotropium", "tramadol", "venlafaxine", "zopiclone",
];

/// Number of medication columns in the default schema. Together with the
/// 35 non-medication columns it gives a 701-feature encoded vocabulary.
pub const DEFAULT_MEDICATION_COUNT: usize = 666;

impl MetadataSchema {
    /// Clinical schema used by the synthetic generator and the demo pipeline.
    pub fn default_clinical() -> Self {
        Self::with_medication_count(DEFAULT_MEDICATION_COUNT)
    }

    /// Same fields, smaller medication vocabulary (for quick benchmarks).
    pub fn compact(medications: usize) -> Self {
        Self::with_medication_count(medications)
    }

    fn with_medication_count(count: usize) -> Self {
        let mut medications: Vec<String> =
            NAMED_MEDICATIONS.iter().take(count).map(|s| s.to_string()).collect();
        let mut k = 1;
        while medications.len() < count {
            medications.push(format!("formulary item {k:03}"));
            k += 1;
        }
        MetadataSchema {
            comorbidities: COMORBIDITIES.iter().map(|(k, d)| NamedField::new(k, d)).collect(),
            symptoms: SYMPTOMS.iter().map(|(k, d)| NamedField::new(k, d)).collect(),
            medications,
        }
    }

    /// Width of the encoded matrix when every field varies in training and
    /// the comorbidities in `excluded` have been dropped. Missingness
    /// indicators are not counted.
    pub fn encoded_width(&self, excluded: &std::collections::BTreeSet<String>) -> usize {
        let numeric = 2;
        let sex = 1;
        let smoking = SmokingStatus::CODES.len();
        let previous_malignancy = 1;
        let comorbidities = self.comorbidities.iter().filter(|c| !excluded.contains(&c.key)).count();
        numeric + sex + smoking + previous_malignancy + comorbidities + self.symptoms.len() + self.medications.len()
    }

    pub fn comorbidity_display<'a>(&'a self, key: &'a str) -> &'a str {
        self.comorbidities.iter().find(|c| c.key == key).map_or(key, |c| c.display.as_str())
    }

    pub fn symptom_display<'a>(&'a self, key: &'a str) -> &'a str {
        self.symptoms.iter().find(|c| c.key == key).map_or(key, |c| c.display.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::ExclusionPolicy;

    #[test]
    fn default_vocabulary_is_701() {
        let schema = MetadataSchema::default_clinical();
        let policy = ExclusionPolicy::default();
        assert_eq!(schema.encoded_width(&policy.excluded_comorbidities), 701);
        let mut meds = schema.medications.clone();
        meds.sort();
        meds.dedup();
        assert_eq!(meds.len(), DEFAULT_MEDICATION_COUNT);
    }
}
