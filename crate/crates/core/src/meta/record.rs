use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

impl Sex {
    pub fn parse(s: &str) -> Option<Sex> {
        match s.trim() {
            "M" | "m" | "male" | "Male" => Some(Sex::M),
            "F" | "f" | "female" | "Female" => Some(Sex::F),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Sex::M => "M",
            Sex::F => "F",
        }
    }
}

/// Diagnosis with the numeric codes used in the source cohort tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    EarlyCancer = 0,
    Control = 1,
    Polyp = 2,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 3] = [Diagnosis::EarlyCancer, Diagnosis::Control, Diagnosis::Polyp];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Diagnosis> {
        match code {
            0 => Some(Diagnosis::EarlyCancer),
            1 => Some(Diagnosis::Control),
            2 => Some(Diagnosis::Polyp),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Diagnosis::EarlyCancer => "early_cancer",
            Diagnosis::Control => "control",
            Diagnosis::Polyp => "polyp",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Smoking code as recorded in the cohort: 0, 1, 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SmokingStatus(u8);

impl SmokingStatus {
    pub const CODES: [u8; 4] = [0, 1, 2, 4];

    pub fn new(code: u8) -> Result<Self> {
        if Self::CODES.contains(&code) {
            Ok(SmokingStatus(code))
        } else {
            Err(Error::InvalidRecord(format!("smoking status {code} not in {{0,1,2,4}}")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Wording used in reports. Code 1 is an active smoker.
    pub fn describe(self) -> &'static str {
        match self.0 {
            0 => "Negative",
            1 => "Positive",
            2 => "Former smoker",
            _ => "Unknown",
        }
    }
}

/// Lowercases and collapses internal whitespace.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: Option<f64>,
    pub sex: Sex,
    pub bmi: Option<f64>,
    pub smoking_status: SmokingStatus,
    pub diagnosis: Diagnosis,
    pub comorbidities: BTreeMap<String, bool>,
    pub medications: Vec<String>,
    pub previous_malignancy: bool,
    pub symptoms: BTreeMap<String, bool>,
    /// Patient group memberships used by exclusion policies.
    pub groups: BTreeSet<String>,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        if self.patient_id.is_empty() {
            return Err(Error::InvalidRecord("empty patient_id".into()));
        }
        for (name, v) in [("age", self.age), ("bmi", self.bmi)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidRecord(format!("{}: {name} must be > 0, got {v}", self.patient_id)));
                }
            }
        }
        Ok(())
    }

    pub fn has_comorbidity(&self, key: &str) -> bool {
        self.comorbidities.get(key).copied().unwrap_or(false)
    }

    pub fn present_comorbidities(&self) -> impl Iterator<Item = &str> {
        self.comorbidities.iter().filter(|(_, v)| **v).map(|(k, _)| k.as_str())
    }

    pub fn present_symptoms(&self) -> impl Iterator<Item = &str> {
        self.symptoms.iter().filter(|(_, v)| **v).map(|(k, _)| k.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_normalization() {
        assert_eq!(normalize_name("  Hypromellose   0.3%  Eye Drops "), "hypromellose 0.3% eye drops");
    }

    #[test]
    fn codes() {
        assert!(SmokingStatus::new(3).is_err());
        assert_eq!(SmokingStatus::new(4).unwrap().code(), 4);
        assert_eq!(Diagnosis::from_code(2), Some(Diagnosis::Polyp));
        assert_eq!(Diagnosis::EarlyCancer.code(), 0);
        assert_eq!(Diagnosis::from_code(3), None);
    }
}
