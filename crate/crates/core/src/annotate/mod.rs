//! Human-in-the-loop libraries and the resolution of flagged features.
//!
//! Spectral features resolve to every Raman shift interval containing their
//! wavenumber (overlaps are all reported). Their candidate compounds are then
//! matched by name against the polyp/CRC literature library, and the matched
//! metabolites are intersected with the patient's comorbidity profiles to
//! surface potential false positives.

mod library;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ConsensusSet;

pub use library::{
    parse_comorbidities, parse_diseases, parse_shifts, ComorbidityProfile, Condition, DiseaseEntry, DiseaseProfile,
    Direction, Libraries, ShiftAnnotation,
};

pub const UNANNOTATED: &str = "unannotated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureSource {
    /// `index` is 0-based into the grid.
    Spectral { index: usize, wavenumber: f64 },
    Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFeature {
    pub feature: String,
    pub source: FeatureSource,
    /// Overlapping shift intervals, in library order. Empty for metadata.
    pub annotations: Vec<ShiftAnnotation>,
    /// Functional groups joined with "; ", the metadata field meaning, or
    /// `unannotated`.
    pub label: String,
}

impl AnnotatedFeature {
    pub fn is_spectral(&self) -> bool {
        matches!(self.source, FeatureSource::Spectral { .. })
    }

    /// Distinct candidate compounds over all overlapping intervals.
    pub fn compounds(&self) -> BTreeSet<&str> {
        self.annotations.iter().flat_map(|a| a.candidate_compounds.iter().map(String::as_str)).collect()
    }
}

/// `V{i}` with 1-based `i` gives `Some(i - 1)`; `V0` gives `Some(usize::MAX)`
/// so it fails the grid check; other names are not spectral.
pub fn spectral_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('V')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(digits.parse::<usize>().map(|i| i.wrapping_sub(1)).unwrap_or(usize::MAX))
}

/// Clinician-readable meaning of an encoded metadata column.
pub fn metadata_meaning(name: &str) -> Option<String> {
    let s = match name {
        "age" => "age (years)".to_string(),
        "bmi" => "body mass index".to_string(),
        "age_missing" => "age not recorded".to_string(),
        "bmi_missing" => "BMI not recorded".to_string(),
        "sex_male" => "sex: male".to_string(),
        "previous_malignancy" => "previous malignancy".to_string(),
        _ => {
            if let Some(code) = name.strip_prefix("smoking_") {
                format!("smoking status code {code}")
            } else if let Some(k) = name.strip_prefix("comorbidity:") {
                format!("comorbidity: {}", k.replace('_', " "))
            } else if let Some(k) = name.strip_prefix("symptom:") {
                format!("symptom: {}", k.replace('_', " "))
            } else if let Some(m) = name.strip_prefix("med:") {
                format!("medication: {m}")
            } else {
                return None;
            }
        }
    };
    Some(s)
}

/// Annotates every feature name exactly once, in input order.
pub fn annotate_names<S: AsRef<str>>(names: &[S], grid: &[f64], libs: &Libraries) -> Result<Vec<AnnotatedFeature>> {
    libs.check_grid(grid)?;
    names
        .iter()
        .map(|n| {
            let name = n.as_ref();
            match spectral_index(name) {
                Some(index) => {
                    let Some(&wavenumber) = grid.get(index) else {
                        return Err(Error::FeatureOutsideGrid { feature: name.to_string(), grid_len: grid.len() });
                    };
                    let annotations: Vec<ShiftAnnotation> =
                        libs.shifts.iter().filter(|a| a.contains(wavenumber)).cloned().collect();
                    let label = if annotations.is_empty() {
                        UNANNOTATED.to_string()
                    } else {
                        annotations.iter().map(|a| a.functional_group.as_str()).collect::<Vec<_>>().join("; ")
                    };
                    Ok(AnnotatedFeature {
                        feature: name.to_string(),
                        source: FeatureSource::Spectral { index, wavenumber },
                        annotations,
                        label,
                    })
                }
                None => Ok(AnnotatedFeature {
                    feature: name.to_string(),
                    source: FeatureSource::Metadata,
                    annotations: Vec::new(),
                    label: metadata_meaning(name).unwrap_or_else(|| UNANNOTATED.to_string()),
                }),
            }
        })
        .collect()
}

pub fn annotate_features(consensus: &ConsensusSet, grid: &[f64], libs: &Libraries) -> Result<Vec<AnnotatedFeature>> {
    annotate_names(&consensus.names(), grid, libs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEntry {
    pub metabolite: String,
    pub pathway: String,
    /// Features whose candidate compounds include the metabolite.
    pub features: Vec<String>,
}

/// Library entries of one condition supported by the given features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseEvidence {
    pub condition: Condition,
    /// Library entry count (tally denominator).
    pub total: usize,
    pub matched: Vec<MatchedEntry>,
    pub activated_pathways: Vec<String>,
    pub absent_pathways: Vec<String>,
}

impl DiseaseEvidence {
    pub fn count(&self) -> usize {
        self.matched.len()
    }

    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.count() as f64 / self.total as f64
        }
    }

    /// `6/10 (60.0%)`.
    pub fn tally(&self) -> String {
        format!("{}/{} ({:.1}%)", self.count(), self.total, self.percent())
    }

    pub fn metabolites(&self) -> Vec<&str> {
        self.matched.iter().map(|m| m.metabolite.as_str()).collect()
    }
}

/// Matches each library entry of `condition` against the compounds of the
/// spectral features in `features`. Which features count as evidence is the
/// caller's choice.
pub fn disease_evidence(condition: Condition, features: &[AnnotatedFeature], libs: &Libraries) -> DiseaseEvidence {
    let entries: &[DiseaseEntry] = libs.disease(condition).map(|p| p.entries.as_slice()).unwrap_or(&[]);
    let matched: Vec<MatchedEntry> = entries
        .iter()
        .filter_map(|e| {
            let hits: Vec<String> = features
                .iter()
                .filter(|f| f.is_spectral() && f.compounds().contains(e.metabolite.as_str()))
                .map(|f| f.feature.clone())
                .collect();
            (!hits.is_empty()).then(|| MatchedEntry {
                metabolite: e.metabolite.clone(),
                pathway: e.pathway.clone(),
                features: hits,
            })
        })
        .collect();
    let active: BTreeSet<&str> = matched.iter().map(|m| m.pathway.as_str()).collect();
    let mut activated = Vec::new();
    let mut absent = Vec::new();
    let mut seen = BTreeSet::new();
    for e in entries.iter().filter(|e| seen.insert(e.pathway.as_str())) {
        if active.contains(e.pathway.as_str()) {
            activated.push(e.pathway.clone());
        } else {
            absent.push(e.pathway.clone());
        }
    }
    DiseaseEvidence { condition, total: entries.len(), matched, activated_pathways: activated, absent_pathways: absent }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapItem {
    pub metabolite: String,
    /// Patient comorbidities whose profile lists the metabolite.
    pub comorbidities: Vec<String>,
    /// Conditions whose evidence includes it.
    pub conditions: Vec<Condition>,
}

/// Metabolites shared by the patient's comorbidity profiles and the disease
/// evidence, sorted by name. Each is a potential false positive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub items: Vec<OverlapItem>,
}

impl OverlapReport {
    pub fn count(&self) -> usize {
        self.items.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.metabolite.as_str()).collect()
    }
}

/// `patient_comorbidities` are record keys of conditions present; keys with
/// no library profile contribute nothing.
pub fn overlap_report<S: AsRef<str>>(
    patient_comorbidities: &[S],
    evidence: &[DiseaseEvidence],
    libs: &Libraries,
) -> OverlapReport {
    let mut by_metabolite: BTreeMap<&str, (BTreeSet<String>, BTreeSet<Condition>)> = BTreeMap::new();
    for ev in evidence {
        for m in &ev.matched {
            by_metabolite.entry(m.metabolite.as_str()).or_default().1.insert(ev.condition);
        }
    }
    for c in patient_comorbidities {
        let key = library::normalize(c.as_ref());
        let Some(profile) = libs.comorbidities.get(&key) else { continue };
        for m in &profile.altered_metabolites {
            if let Some(slot) = by_metabolite.get_mut(m.as_str()) {
                slot.0.insert(key.clone());
            }
        }
    }
    let items = by_metabolite
        .into_iter()
        .filter(|(_, (comorbidities, _))| !comorbidities.is_empty())
        .map(|(m, (comorbidities, conditions))| OverlapItem {
            metabolite: m.to_string(),
            comorbidities: comorbidities.into_iter().collect(),
            conditions: conditions.into_iter().collect(),
        })
        .collect();
    OverlapReport { items }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=1400).map(|i| 400.0 + i as f64).collect()
    }

    fn v(w: f64) -> String {
        format!("V{}", (w - 400.0) as usize + 1)
    }

    #[test]
    fn phenylalanine_containment_and_gaps() {
        let libs = Libraries::builtin();
        let out = annotate_names(&[v(1003.0), v(1015.0), "med:paracetamol".into(), "mystery".into()], &grid(), &libs)
            .unwrap();
        assert_eq!(out[0].label, "aromatic ring breathing");
        assert!(out[0].compounds().contains("phenylalanine"));
        assert_eq!(out[1].label, UNANNOTATED);
        assert_eq!(out[2].label, "medication: paracetamol");
        assert_eq!(out[3].label, UNANNOTATED);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn outside_grid() {
        let libs = Libraries::builtin();
        for bad in ["V0", "V1402", "V99999999999999999999999"] {
            let err = annotate_names(&[bad], &grid(), &libs).unwrap_err();
            assert!(matches!(err, Error::FeatureOutsideGrid { .. }), "{bad}");
        }
        assert!(annotate_names(&["V1401"], &grid(), &libs).is_ok());
    }

    #[test]
    fn overlapping_ranges_all_reported() {
        let libs = Libraries::builtin();
        let out = annotate_names(&[v(520.0)], &grid(), &libs).unwrap();
        assert_eq!(out[0].annotations.len(), 2);
    }

    #[test]
    fn hypertension_acetate_is_flagged() {
        let libs = Libraries::builtin();
        let feats = annotate_names(&[v(920.0), v(1415.0), v(850.0)], &grid(), &libs).unwrap();
        let polyp = disease_evidence(Condition::Polyp, &feats, &libs);
        assert_eq!(polyp.metabolites(), vec!["acetate", "pyruvate", "organic acids", "glycerol"]);
        assert_eq!(polyp.tally(), "4/10 (40.0%)");
        assert_eq!(polyp.activated_pathways, vec!["pyruvate metabolism", "glycerolipid metabolism"]);
        let crc = disease_evidence(Condition::Crc, &feats, &libs);
        let overlap = overlap_report(&["hypertension"], &[polyp, crc], &libs);
        assert_eq!(overlap.names(), vec!["acetate", "organic acids"]);
        assert!(overlap_report::<&str>(&[], &[], &libs).items.is_empty());
    }

    #[test]
    fn no_evidence_tally() {
        let libs = Libraries::builtin();
        let ev = disease_evidence(Condition::Crc, &[], &libs);
        assert_eq!(ev.tally(), "0/12 (0.0%)");
        assert_eq!(ev.absent_pathways.len(), 5);
    }
}
