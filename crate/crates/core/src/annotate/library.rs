use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SHIFT_CSV: &str = include_str!("../../data/shift_annotations.csv");
const COMORBIDITY_CSV: &str = include_str!("../../data/comorbidity_metabolites.csv");
const DISEASE_CSV: &str = include_str!("../../data/disease_metabolites.csv");

/// Expected change of the compound's band in disease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Higher,
    Lower,
    Either,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Higher => "higher",
            Direction::Lower => "lower",
            Direction::Either => "either",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "higher" => Some(Direction::Higher),
            "lower" => Some(Direction::Lower),
            "either" | "" => Some(Direction::Either),
            _ => None,
        }
    }
}

/// One Raman shift interval (closed, cm^-1) and its putative chemistry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftAnnotation {
    pub wavenumber_range: (f64, f64),
    pub functional_group: String,
    pub candidate_compounds: Vec<String>,
    pub direction_hint: Direction,
}

impl ShiftAnnotation {
    pub fn contains(&self, wavenumber: f64) -> bool {
        self.wavenumber_range.0 <= wavenumber && wavenumber <= self.wavenumber_range.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Polyp,
    Crc,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Polyp, Condition::Crc];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Polyp => "polyp",
            Condition::Crc => "crc",
        }
    }

    /// Name used in clinician-facing text.
    pub fn display(self) -> &'static str {
        match self {
            Condition::Polyp => "polyp",
            Condition::Crc => "CRC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "polyp" => Some(Condition::Polyp),
            "crc" => Some(Condition::Crc),
            _ => None,
        }
    }
}

/// Metabolites reported altered in one comorbidity, grouped by category in
/// library order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComorbidityProfile {
    pub name: String,
    pub categories: Vec<(String, Vec<String>)>,
    /// Sorted, de-duplicated.
    pub altered_metabolites: Vec<String>,
    /// Sorted, de-duplicated.
    pub altered_pathways: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseEntry {
    pub metabolite: String,
    pub pathway: String,
}

/// Literature metabolites of one condition. The entry count is the
/// denominator of the report's peak tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProfile {
    pub condition: Condition,
    pub entries: Vec<DiseaseEntry>,
}

impl DiseaseProfile {
    pub fn metabolites(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.metabolite.as_str()).collect()
    }

    /// Distinct pathways in first-appearance order.
    pub fn pathways(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .map(|e| e.pathway.as_str())
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

/// The three curated libraries. Immutable after load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Libraries {
    pub shifts: Vec<ShiftAnnotation>,
    pub comorbidities: BTreeMap<String, ComorbidityProfile>,
    pub diseases: BTreeMap<Condition, DiseaseProfile>,
}

/// Whitespace-collapsed, case kept. Used for display-only names.
fn tidy(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Matching key: [`tidy`] and lowercased.
pub(crate) fn normalize(s: &str) -> String {
    tidy(s).to_lowercase()
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';').map(normalize).filter(|x| !x.is_empty()).collect()
}

#[derive(Deserialize)]
struct ShiftRow {
    range_start: f64,
    range_end: f64,
    group: String,
    compounds: String,
    direction: String,
}

#[derive(Deserialize)]
struct ComorbidityRow {
    comorbidity: String,
    category: String,
    metabolite: String,
    #[serde(default)]
    pathway: String,
}

#[derive(Deserialize)]
struct DiseaseRow {
    condition: String,
    metabolite: String,
    pathway: String,
}

fn rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R, what: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Library(format!("{what} row {}: {e}", i + 2))))
        .collect()
}

pub fn parse_shifts<R: Read>(reader: R) -> Result<Vec<ShiftAnnotation>> {
    rows::<ShiftRow, _>(reader, "shift annotations")?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if !(r.range_start.is_finite() && r.range_end.is_finite() && r.range_start <= r.range_end) {
                return Err(Error::Library(format!(
                    "shift annotations row {line}: invalid range [{}, {}]",
                    r.range_start, r.range_end
                )));
            }
            let direction = Direction::parse(&r.direction).ok_or_else(|| {
                Error::Library(format!("shift annotations row {line}: unknown direction `{}`", r.direction))
            })?;
            Ok(ShiftAnnotation {
                wavenumber_range: (r.range_start, r.range_end),
                functional_group: r.group.trim().to_string(),
                candidate_compounds: split_list(&r.compounds),
                direction_hint: direction,
            })
        })
        .collect()
}

pub fn parse_comorbidities<R: Read>(reader: R) -> Result<BTreeMap<String, ComorbidityProfile>> {
    let mut out: BTreeMap<String, ComorbidityProfile> = BTreeMap::new();
    for r in rows::<ComorbidityRow, _>(reader, "comorbidity metabolites")? {
        let name = normalize(&r.comorbidity);
        let metabolite = normalize(&r.metabolite);
        if name.is_empty() || metabolite.is_empty() {
            return Err(Error::Library("comorbidity metabolites: empty comorbidity or metabolite".into()));
        }
        let p = out.entry(name.clone()).or_insert_with(|| ComorbidityProfile {
            name,
            categories: Vec::new(),
            altered_metabolites: Vec::new(),
            altered_pathways: Vec::new(),
        });
        let category = normalize(&r.category);
        match p.categories.iter_mut().find(|(c, _)| *c == category) {
            Some((_, items)) if !items.contains(&metabolite) => items.push(metabolite.clone()),
            Some(_) => {}
            None => p.categories.push((category, vec![metabolite.clone()])),
        }
        p.altered_metabolites.push(metabolite);
        let pathway = tidy(&r.pathway);
        if !pathway.is_empty() {
            p.altered_pathways.push(pathway);
        }
    }
    for p in out.values_mut() {
        p.altered_metabolites.sort();
        p.altered_metabolites.dedup();
        p.altered_pathways.sort();
        p.altered_pathways.dedup();
    }
    Ok(out)
}

pub fn parse_diseases<R: Read>(reader: R) -> Result<BTreeMap<Condition, DiseaseProfile>> {
    let mut out: BTreeMap<Condition, DiseaseProfile> = BTreeMap::new();
    for (i, r) in rows::<DiseaseRow, _>(reader, "disease metabolites")?.into_iter().enumerate() {
        let line = i + 2;
        let condition = Condition::parse(&r.condition).ok_or_else(|| {
            Error::Library(format!("disease metabolites row {line}: unknown condition `{}`", r.condition))
        })?;
        let entry = DiseaseEntry { metabolite: normalize(&r.metabolite), pathway: tidy(&r.pathway) };
        if entry.metabolite.is_empty() || entry.pathway.is_empty() {
            return Err(Error::Library(format!("disease metabolites row {line}: empty metabolite or pathway")));
        }
        let p = out.entry(condition).or_insert_with(|| DiseaseProfile { condition, entries: Vec::new() });
        // duplicates would inflate the tally denominator
        if p.entries.iter().any(|e| e.metabolite == entry.metabolite) {
            return Err(Error::Library(format!(
                "disease metabolites row {line}: `{}` listed twice for {}",
                entry.metabolite,
                condition.as_str()
            )));
        }
        p.entries.push(entry);
    }
    Ok(out)
}

impl Libraries {
    /// The illustrative libraries shipped in `data/`.
    pub fn builtin() -> Self {
        Self::from_readers(SHIFT_CSV.as_bytes(), COMORBIDITY_CSV.as_bytes(), DISEASE_CSV.as_bytes())
            .expect("shipped libraries parse")
    }

    pub fn from_readers<A: Read, B: Read, C: Read>(shifts: A, comorbidities: B, diseases: C) -> Result<Self> {
        Ok(Libraries {
            shifts: parse_shifts(shifts)?,
            comorbidities: parse_comorbidities(comorbidities)?,
            diseases: parse_diseases(diseases)?,
        })
    }

    pub fn load(shifts: &Path, comorbidities: &Path, diseases: &Path) -> Result<Self> {
        let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
        Self::from_readers(open(shifts)?, open(comorbidities)?, open(diseases)?)
    }

    /// Like [`Libraries::load`], with the shipped table standing in for
    /// every path that is `None`.
    pub fn load_or_builtin(shifts: Option<&Path>, comorbidities: Option<&Path>, diseases: Option<&Path>) -> Result<Self> {
        let read = |p: Option<&Path>, builtin: &str| match p {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
            None => Ok(builtin.to_string()),
        };
        Self::from_readers(
            read(shifts, SHIFT_CSV)?.as_bytes(),
            read(comorbidities, COMORBIDITY_CSV)?.as_bytes(),
            read(diseases, DISEASE_CSV)?.as_bytes(),
        )
    }

    pub fn disease(&self, condition: Condition) -> Option<&DiseaseProfile> {
        self.diseases.get(&condition)
    }

    /// Every shift range must lie inside the instrument grid.
    pub fn check_grid(&self, grid: &[f64]) -> Result<()> {
        let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) else {
            return Err(Error::Library("empty wavenumber grid".into()));
        };
        match self.shifts.iter().find(|a| a.wavenumber_range.0 < lo || a.wavenumber_range.1 > hi) {
            Some(a) => Err(Error::Library(format!(
                "shift range [{}, {}] ({}) lies outside the grid [{lo}, {hi}]",
                a.wavenumber_range.0, a.wavenumber_range.1, a.functional_group
            ))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_libraries() {
        let libs = Libraries::builtin();
        assert!(libs.shifts.len() >= 40);
        assert_eq!(libs.disease(Condition::Polyp).unwrap().entries.len(), 10);
        assert_eq!(libs.disease(Condition::Crc).unwrap().entries.len(), 12);
        assert_eq!(
            libs.disease(Condition::Polyp).unwrap().pathways(),
            vec!["pyruvate metabolism", "glycerolipid metabolism"]
        );
        let crc = libs.disease(Condition::Crc).unwrap().pathways();
        for p in ["glycolysis", "glycine, serine and threonine metabolism", "lactate", "citrate", "TCA cycle"] {
            assert!(crc.contains(&p), "{p}");
        }
        let ht = &libs.comorbidities["hypertension"];
        assert!(ht.altered_metabolites.iter().any(|m| m == "acetate"));
        assert!(ht.altered_metabolites.iter().any(|m| m == "organic acids"));
        let fbp = libs.shifts.iter().find(|a| a.contains(1050.0)).unwrap();
        assert!(fbp.candidate_compounds.iter().any(|c| c == "fructose-1,6-bisphosphate"));
        libs.check_grid(&[400.0, 1800.0]).unwrap();
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_range = "range_start,range_end,group,compounds,direction\n900,800,x,a,either\n";
        assert!(parse_shifts(bad_range.as_bytes()).is_err());
        let bad_dir = "range_start,range_end,group,compounds,direction\n800,900,x,a,sideways\n";
        assert!(parse_shifts(bad_dir.as_bytes()).is_err());
        let dup = "condition,metabolite,pathway\npolyp,Acetate,p\npolyp,acetate ,p\n";
        assert!(matches!(parse_diseases(dup.as_bytes()), Err(Error::Library(_))));
        let unknown = "condition,metabolite,pathway\nadenoma,x,p\n";
        assert!(parse_diseases(unknown.as_bytes()).is_err());
    }

    #[test]
    fn names_are_lowercased() {
        let csv = "comorbidity,category,metabolite,pathway\nHypertension,Gut,13-HODE,\n";
        let p = parse_comorbidities(csv.as_bytes()).unwrap();
        assert_eq!(p["hypertension"].altered_metabolites, vec!["13-hode"]);
    }

    #[test]
    fn grid_check() {
        let libs = Libraries::builtin();
        assert!(libs.check_grid(&[500.0, 1800.0]).is_err());
    }
}
