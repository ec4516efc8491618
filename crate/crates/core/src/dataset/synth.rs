//! Synthetic serum cohorts with planted class signal and planted outliers.
//!
//! Every spectrum is a sum of Gaussian bands on a 400-1800 cm^-1 grid. Band
//! amplitudes vary between patients as `base * (1 + cv * (z + effect + shift))`
//! with `z ~ N(0, 1)`, so effects and outlier shifts are in units of the
//! between-patient standard deviation. Outliers shift alternate bands up and
//! down; a same-sign shift of every band mostly lifts the broad band floor,
//! which background removal then absorbs. The phenylalanine band is held
//! fixed and centred on a grid point so that normalization neither rescales
//! the other bands nor changes anchor channel between replicates. Each
//! replicate adds a gain, a smooth polynomial fluorescence background,
//! Poisson-like noise and occasional cosmic spikes.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{Diagnosis, MetadataSchema, PatientRecord, Sex, SmokingStatus};
use crate::spectra::{self, Spectrum};

pub const PHENYLALANINE_CENTER: f64 = 1003.0;

/// (centre, sigma, base amplitude relative to phenylalanine).
const BANDS: &[(f64, f64, f64)] = &[
    (420.0, 16.0, 0.45),
    (480.0, 16.0, 0.55),
    (525.0, 14.0, 0.60),
    (570.0, 16.0, 0.45),
    (621.0, 12.0, 0.50),
    (665.0, 14.0, 0.55),
    (716.0, 14.0, 0.65),
    (760.0, 12.0, 0.70),
    (805.0, 14.0, 0.50),
    (852.0, 12.0, 0.80),
    (897.0, 14.0, 0.55),
    (940.0, 12.0, 0.75),
    (PHENYLALANINE_CENTER, 4.0, 1.00),
    (1050.0, 14.0, 0.60),
    (1090.0, 14.0, 0.70),
    (1127.0, 12.0, 0.65),
    (1157.0, 10.0, 0.90),
    (1190.0, 12.0, 0.55),
    (1230.0, 14.0, 0.70),
    (1265.0, 14.0, 0.85),
    (1300.0, 14.0, 0.75),
    (1340.0, 14.0, 0.90),
    (1380.0, 14.0, 0.55),
    (1420.0, 14.0, 0.60),
    (1448.0, 12.0, 1.20),
    (1490.0, 14.0, 0.55),
    (1520.0, 12.0, 0.85),
    (1560.0, 14.0, 0.60),
    (1605.0, 12.0, 0.70),
    (1655.0, 14.0, 1.10),
    (1700.0, 16.0, 0.50),
    (1745.0, 16.0, 0.60),
    (1785.0, 16.0, 0.45),
];

/// Class effect on one band: the amplitude of diseased patients (polyp or
/// early cancer) is shifted by `effect` between-patient standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandEffect {
    pub center: f64,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "key", rename_all = "snake_case")]
pub enum MetaField {
    Age,
    Bmi,
    Comorbidity(String),
    Symptom(String),
    Medication(String),
}

/// Class effect on one metadata field. Numeric fields shift by `effect`
/// standard deviations; binary fields shift their log-odds by `effect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaEffect {
    pub field: MetaField,
    pub effect: f64,
}

/// Which bands and metadata fields carry class signal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSpec {
    pub bands: Vec<BandEffect>,
    pub meta: Vec<MetaEffect>,
}

impl SignalSpec {
    /// No class signal anywhere.
    pub fn null() -> Self {
        SignalSpec::default()
    }

    /// Large effects in both modalities.
    pub fn strong() -> Self {
        SignalSpec {
            bands: band_effects(&[(852.0, 2.0), (1157.0, -2.0), (1448.0, 2.0), (1655.0, -2.0)]),
            meta: vec![
                MetaEffect { field: MetaField::Age, effect: 1.0 },
                MetaEffect { field: MetaField::Symptom("change_in_bowel_habit".into()), effect: 1.5 },
            ],
        }
    }

    /// Comparable, moderate evidence in each modality, so neither alone
    /// matches the two combined.
    pub fn split_modalities() -> Self {
        SignalSpec {
            bands: band_effects(&[(852.0, 0.6), (1157.0, -0.6), (1448.0, 0.6), (1655.0, -0.6)]),
            meta: vec![
                MetaEffect { field: MetaField::Age, effect: 1.0 },
                MetaEffect { field: MetaField::Bmi, effect: 0.7 },
                MetaEffect { field: MetaField::Symptom("change_in_bowel_habit".into()), effect: 1.5 },
                MetaEffect { field: MetaField::Symptom("abdominal_pain".into()), effect: 1.3 },
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "null" => Some(Self::null()),
            "strong" => Some(Self::strong()),
            "split_modalities" | "split-modalities" => Some(Self::split_modalities()),
            _ => None,
        }
    }

    fn validate(&self, schema: &MetadataSchema) -> Result<()> {
        for b in &self.bands {
            if !b.effect.is_finite() {
                return Err(Error::Config(format!("band effect at {} is not finite", b.center)));
            }
            match band_index(b.center) {
                Some(i) if BANDS[i].0 == PHENYLALANINE_CENTER => {
                    return Err(Error::Config("the phenylalanine band cannot carry class signal".into()))
                }
                Some(_) => {}
                None => return Err(Error::Config(format!("no synthetic band at {} cm^-1", b.center))),
            }
        }
        for m in &self.meta {
            if !m.effect.is_finite() {
                return Err(Error::Config(format!("metadata effect on {:?} is not finite", m.field)));
            }
            let known = match &m.field {
                MetaField::Age | MetaField::Bmi => true,
                MetaField::Comorbidity(k) => schema.comorbidities.iter().any(|c| &c.key == k),
                MetaField::Symptom(k) => schema.symptoms.iter().any(|c| &c.key == k),
                MetaField::Medication(k) => schema.medications.iter().any(|c| c == k),
            };
            if !known {
                return Err(Error::Config(format!("signal field {:?} is not in the schema", m.field)));
            }
        }
        Ok(())
    }

    fn meta_effect(&self, field: &MetaField) -> f64 {
        self.meta.iter().filter(|m| &m.field == field).map(|m| m.effect).sum()
    }
}

fn band_effects(pairs: &[(f64, f64)]) -> Vec<BandEffect> {
    pairs.iter().map(|&(center, effect)| BandEffect { center, effect }).collect()
}

fn band_index(center: f64) -> Option<usize> {
    BANDS.iter().position(|b| (b.0 - center).abs() < 1.0)
}

/// Centres of the synthetic band library.
pub fn band_centers() -> Vec<f64> {
    BANDS.iter().map(|b| b.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_patients: usize,
    /// Grid points between 400 and 1800 cm^-1.
    pub n_points: usize,
    pub replicates: usize,
    pub outlier_fraction: f64,
    /// Outlier amplitude shift, in between-patient standard deviations.
    pub outlier_shift: f64,
    /// Between-patient coefficient of variation of band amplitudes.
    pub band_cv: f64,
    /// Phenylalanine peak height in counts; noise is `sqrt(counts)`.
    pub peak_counts: f64,
    /// Mean number of cosmic spikes per replicate.
    pub spike_rate: f64,
    /// Fluorescence background level relative to the phenylalanine peak.
    pub fluorescence: f64,
    /// Patients carrying a comorbidity or group flag removed by the
    /// default exclusion policy. Defaults to 5% when absent.
    pub excluded_count: Option<usize>,
    /// Weights of the (sex, diagnosis) cells, in the order
    /// control M/F, polyp M/F, early cancer M/F.
    pub cell_weights: [f64; 6],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 600,
            n_points: 701,
            replicates: 6,
            outlier_fraction: 0.05,
            outlier_shift: 6.0,
            band_cv: 0.1,
            peak_counts: 5000.0,
            spike_rate: 0.02,
            fluorescence: 1.0,
            excluded_count: None,
            cell_weights: [249.0, 222.0, 182.0, 120.0, 149.0, 113.0],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n_patients < 2 {
            return err("n_patients must be at least 2".into());
        }
        if self.n_points < 50 {
            return err(format!("n_points {} is below 50", self.n_points));
        }
        if self.replicates == 0 {
            return err("replicates must be at least 1".into());
        }
        if !(0.0..=0.5).contains(&self.outlier_fraction) {
            return err(format!("outlier_fraction {} outside [0, 0.5]", self.outlier_fraction));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.band_cv) || !positive(self.peak_counts) || !self.outlier_shift.is_finite() {
            return err("band_cv and peak_counts must be positive".into());
        }
        if !(self.spike_rate.is_finite() && self.spike_rate >= 0.0) {
            return err("spike_rate must be non-negative".into());
        }
        if !(self.fluorescence.is_finite() && self.fluorescence >= 0.0) {
            return err("fluorescence must be non-negative".into());
        }
        if self.excluded_count.is_some_and(|c| c > self.n_patients) {
            return err("excluded_count exceeds n_patients".into());
        }
        if self.cell_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.cell_weights.iter().sum::<f64>() <= 0.0
        {
            return err("cell_weights must be non-negative with a positive sum".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = 1400.0 / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| 400.0 + step * i as f64).collect()
    }
}

/// Ground truth for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub patient_id: String,
    pub true_class: Diagnosis,
    pub planted_outlier: bool,
    /// Band centres whose amplitude carries this patient's class effect.
    pub planted_bands: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub wavenumbers: Vec<f64>,
    /// Raw replicates, patient-major.
    pub spectra: Vec<Spectrum>,
    pub records: Vec<PatientRecord>,
    pub manifest: Vec<ManifestRow>,
    pub schema: MetadataSchema,
    pub signal: SignalSpec,
}

impl SyntheticCohort {
    pub fn outlier_ids(&self) -> BTreeSet<String> {
        self.manifest.iter().filter(|m| m.planted_outlier).map(|m| m.patient_id.clone()).collect()
    }

    /// Diagnosis label of a patient, used as the QC condition.
    pub fn condition_of(&self, patient_id: &str) -> Option<String> {
        self.manifest
            .binary_search_by(|m| m.patient_id.as_str().cmp(patient_id))
            .ok()
            .map(|i| self.manifest[i].true_class.label().to_string())
    }

    pub fn write_manifest<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["patient_id", "true_class", "planted_outlier", "planted_bands"])?;
        for m in &self.manifest {
            let bands: Vec<String> = m.planted_bands.iter().map(|b| format!("{b}")).collect();
            w.write_record([
                m.patient_id.clone(),
                m.true_class.code().to_string(),
                m.planted_outlier.to_string(),
                bands.join(";"),
            ])?;
        }
        w.flush().map_err(|e| Error::io("manifest", e))?;
        Ok(())
    }

    /// Writes `spectra.csv`, `metadata.csv` and `manifest.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path).map(std::io::BufWriter::new).map_err(|e| Error::io(path, e))
        };
        spectra::io::write_spectra(create("spectra.csv")?, &self.spectra)?;
        crate::meta::io::write_records(create("metadata.csv")?, &self.records, &self.schema)?;
        self.write_manifest(create("manifest.csv")?)
    }
}

pub fn read_manifest<R: std::io::Read>(reader: R) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |what: &str| Error::Format { what: "manifest", detail: format!("{what}: {rec:?}") };
        if rec.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let true_class =
            rec[1].parse::<u8>().ok().and_then(Diagnosis::from_code).ok_or_else(|| bad("bad true_class"))?;
        let planted_outlier = rec[2].parse::<bool>().map_err(|_| bad("bad planted_outlier"))?;
        let planted_bands = if rec[3].is_empty() {
            Vec::new()
        } else {
            rec[3].split(';').map(|b| b.parse::<f64>().map_err(|_| bad("bad planted_bands"))).collect::<Result<_>>()?
        };
        rows.push(ManifestRow { patient_id: rec[0].to_string(), true_class, planted_outlier, planted_bands });
    }
    Ok(rows)
}

const COMORBIDITY_PREVALENCE: f64 = 0.12;
const SYMPTOM_PREVALENCE: f64 = 0.15;
const MEDICATIONS_PER_PATIENT: f64 = 3.0;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Generates a cohort. Deterministic under `seed`.
pub fn generate_synthetic(
    config: &SynthConfig,
    schema: &MetadataSchema,
    signal: &SignalSpec,
    seed: u64,
) -> Result<SyntheticCohort> {
    config.validate()?;
    signal.validate(schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_patients;
    let grid = config.grid();
    let width = n.to_string().len().max(4);

    let cells: Vec<(Sex, Diagnosis)> = [Diagnosis::Control, Diagnosis::Polyp, Diagnosis::EarlyCancer]
        .into_iter()
        .flat_map(|d| [(Sex::M, d), (Sex::F, d)])
        .collect();
    let assignment = apportion(&config.cell_weights, n);
    let mut patients: Vec<(Sex, Diagnosis)> =
        cells.iter().zip(&assignment).flat_map(|(&c, &k)| std::iter::repeat_n(c, k)).collect();
    shuffle(&mut patients, &mut rng);

    let n_outliers = (config.outlier_fraction * n as f64).round() as usize;
    let outliers: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, n_outliers).into_iter().collect();
    let n_excluded = config.excluded_count.unwrap_or((0.05 * n as f64).round() as usize);
    let excluded: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, n_excluded).into_iter().collect();

    // The phenylalanine band sits on a grid point so the normalization
    // anchor is the same channel in every replicate.
    let phe = band_index(PHENYLALANINE_CENTER).expect("library has phenylalanine");
    let anchor = grid
        .iter()
        .copied()
        .min_by(|a, b| (a - PHENYLALANINE_CENTER).abs().total_cmp(&(b - PHENYLALANINE_CENTER).abs()))
        .expect("non-empty grid");
    let profiles: Vec<Vec<f64>> = BANDS
        .iter()
        .enumerate()
        .map(|(j, &(c, s, _))| {
            let c = if j == phe { anchor } else { c };
            grid.iter().map(|x| (-(x - c) * (x - c) / (2.0 * s * s)).exp()).collect()
        })
        .collect();
    let band_effect: Vec<f64> = (0..BANDS.len())
        .map(|j| signal.bands.iter().filter(|b| band_index(b.center) == Some(j)).map(|b| b.effect).sum())
        .collect();
    let planted: Vec<f64> = (0..BANDS.len()).filter(|&j| band_effect[j] != 0.0).map(|j| BANDS[j].0).collect();

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut spectra = Vec::with_capacity(n * config.replicates);
    let mut records = Vec::with_capacity(n);
    let mut manifest = Vec::with_capacity(n);
    for (p, &(sex, diagnosis)) in patients.iter().enumerate() {
        let patient_id = format!("P{:0width$}", p + 1);
        let diseased = diagnosis != Diagnosis::Control;
        let label = if diseased { 1.0 } else { 0.0 };
        let shift = if outliers.contains(&p) { config.outlier_shift } else { 0.0 };

        let amplitudes: Vec<f64> = BANDS
            .iter()
            .enumerate()
            .map(|(j, &(_, _, base))| {
                if j == phe {
                    base
                } else {
                    let z: f64 = std_normal.sample(&mut rng);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    (base * (1.0 + config.band_cv * (z + band_effect[j] * label + sign * shift))).max(0.0)
                }
            })
            .collect();
        let clean: Vec<f64> = (0..grid.len())
            .map(|i| amplitudes.iter().zip(&profiles).map(|(a, prof)| a * prof[i]).sum::<f64>())
            .collect();

        for r in 0..config.replicates {
            let y = replicate(&clean, config, &mut rng);
            spectra.push(Spectrum::new(&patient_id, r, grid.clone(), y)?);
        }

        records.push(sample_record(
            &patient_id,
            sex,
            diagnosis,
            label,
            excluded.contains(&p),
            schema,
            signal,
            &mut rng,
        )?);
        manifest.push(ManifestRow {
            patient_id,
            true_class: diagnosis,
            planted_outlier: shift != 0.0,
            planted_bands: if diseased { planted.clone() } else { Vec::new() },
        });
    }

    Ok(SyntheticCohort {
        wavenumbers: grid,
        spectra,
        records,
        manifest,
        schema: schema.clone(),
        signal: signal.clone(),
    })
}

fn replicate(clean: &[f64], config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = clean.len();
    let gain = 1.0 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal);
    // Fluorescence: a positive cubic in t in [-1, 1], on the order of the
    // phenylalanine peak.
    let c0 = rng.random_range(1.0..3.0);
    let c1 = rng.random_range(-0.8..0.8);
    let c2 = rng.random_range(-0.5..0.5);
    let c3 = rng.random_range(-0.3..0.3);
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let t = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            let fluorescence = config.fluorescence * (c0 + t * (c1 + t * (c2 + t * c3))).max(0.2);
            let counts = config.peak_counts * gain * (clean[i] + fluorescence);
            counts + counts.max(0.0).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .collect();
    let spikes = if config.spike_rate > 0.0 {
        Poisson::new(config.spike_rate).map(|d| d.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    for _ in 0..spikes {
        let i = rng.random_range(0..n);
        y[i] += config.peak_counts * rng.random_range(20.0..40.0);
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn sample_record(
    patient_id: &str,
    sex: Sex,
    diagnosis: Diagnosis,
    label: f64,
    excluded: bool,
    schema: &MetadataSchema,
    signal: &SignalSpec,
    rng: &mut ChaCha8Rng,
) -> Result<PatientRecord> {
    let z = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(rand_distr::StandardNormal);
    let age = 62.0 + 10.0 * (z(rng) + label * signal.meta_effect(&MetaField::Age));
    let bmi = 27.0 + 4.5 * (z(rng) + label * signal.meta_effect(&MetaField::Bmi));
    let smoking = *[0u8, 0, 0, 1, 2, 2, 4].choose(rng).expect("non-empty");

    let flag = |rng: &mut ChaCha8Rng, base: f64, field: MetaField| {
        let p = logistic(logit(base) + label * signal.meta_effect(&field));
        rng.random_bool(p)
    };
    let policy = crate::meta::ExclusionPolicy::default();
    let mut comorbidities = std::collections::BTreeMap::new();
    for c in &schema.comorbidities {
        let leaky = policy.excluded_comorbidities.contains(&c.key);
        let present = !leaky && flag(rng, COMORBIDITY_PREVALENCE, MetaField::Comorbidity(c.key.clone()));
        comorbidities.insert(c.key.clone(), present);
    }
    let mut groups = BTreeSet::new();
    if excluded {
        // One planted leakage flag per excluded patient.
        let options: Vec<&String> =
            policy.excluded_comorbidities.iter().chain(&policy.excluded_patient_groups).collect();
        let pick = options.choose(rng).expect("non-empty policy");
        if policy.excluded_patient_groups.contains(*pick) {
            groups.insert((*pick).clone());
        } else {
            comorbidities.insert((*pick).clone(), true);
        }
    }
    let mut symptoms = std::collections::BTreeMap::new();
    for s in &schema.symptoms {
        symptoms.insert(s.key.clone(), flag(rng, SYMPTOM_PREVALENCE, MetaField::Symptom(s.key.clone())));
    }

    // Zipf-like popularity over the medication list, plus planted effects.
    let total: f64 = (1..=schema.medications.len()).map(|r| 1.0 / r as f64).sum();
    let mut medications = Vec::new();
    for (r, name) in schema.medications.iter().enumerate() {
        let base = (MEDICATIONS_PER_PATIENT / (r + 1) as f64 / total).clamp(1e-6, 0.6);
        if flag(rng, base, MetaField::Medication(name.clone())) {
            medications.push(name.clone());
        }
    }

    let record = PatientRecord {
        patient_id: patient_id.to_string(),
        age: Some((age.clamp(18.0, 95.0) * 10.0).round() / 10.0),
        sex,
        bmi: Some((bmi.clamp(15.0, 55.0) * 10.0).round() / 10.0),
        smoking_status: SmokingStatus::new(smoking)?,
        diagnosis,
        comorbidities,
        medications,
        previous_malignancy: rng.random_bool(0.05),
        symptoms,
        groups,
    };
    record.validate()?;
    Ok(record)
}

/// Largest-remainder apportionment of `n` over `weights`.
fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SynthConfig {
        SynthConfig { n_patients: n, n_points: 176, replicates: 3, ..Default::default() }
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[249.0, 222.0, 182.0, 120.0, 149.0, 113.0], 1035), vec![249, 222, 182, 120, 149, 113]);
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10).iter().sum::<usize>(), 10);
    }

    #[test]
    fn deterministic_under_seed() {
        let schema = MetadataSchema::compact(20);
        let a = generate_synthetic(&small(30), &schema, &SignalSpec::strong(), 5).unwrap();
        let b = generate_synthetic(&small(30), &schema, &SignalSpec::strong(), 5).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.manifest, b.manifest);
        assert!(a.spectra.iter().zip(&b.spectra).all(|(x, y)| x.intensities() == y.intensities()));
    }

    #[test]
    fn plants_exact_outlier_and_exclusion_counts() {
        let schema = MetadataSchema::compact(20);
        let config = SynthConfig { excluded_count: Some(7), ..small(100) };
        let c = generate_synthetic(&config, &schema, &SignalSpec::null(), 2).unwrap();
        assert_eq!(c.outlier_ids().len(), 5);
        let out = crate::meta::apply_exclusions(c.records.clone(), &Default::default()).unwrap();
        assert_eq!((out.kept.len(), out.removed.len()), (93, 7));
        assert_eq!(c.spectra.len(), 300);
    }

    #[test]
    fn manifest_round_trip() {
        let schema = MetadataSchema::compact(5);
        let c = generate_synthetic(&small(12), &schema, &SignalSpec::strong(), 1).unwrap();
        let mut buf = Vec::new();
        c.write_manifest(&mut buf).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), c.manifest);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("patient_id,true_class,planted_outlier,planted_bands\n"));
    }

    #[test]
    fn rejects_unknown_signal_fields() {
        let schema = MetadataSchema::compact(5);
        let bad = SignalSpec { bands: band_effects(&[(999.0, 1.0)]), meta: vec![] };
        assert!(generate_synthetic(&small(10), &schema, &bad, 0).is_err());
        let phe = SignalSpec { bands: band_effects(&[(1003.0, 1.0)]), meta: vec![] };
        assert!(generate_synthetic(&small(10), &schema, &phe, 0).is_err());
        let meta = SignalSpec {
            bands: vec![],
            meta: vec![MetaEffect { field: MetaField::Symptom("nope".into()), effect: 1.0 }],
        };
        assert!(generate_synthetic(&small(10), &schema, &meta, 0).is_err());
    }

    #[test]
    fn phenylalanine_dominates_its_window() {
        let config = SynthConfig { outlier_fraction: 0.5, ..small(20) };
        let grid = config.grid();
        let c = generate_synthetic(&config, &MetadataSchema::compact(3), &SignalSpec::strong(), 9).unwrap();
        let window: Vec<usize> = (0..grid.len()).filter(|&i| (995.0..=1010.0).contains(&grid[i])).collect();
        assert!(!window.is_empty());
        assert_eq!(c.wavenumbers, grid);
    }
}
