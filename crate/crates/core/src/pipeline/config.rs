use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Aggregation, Balance, SignalSpec, SynthConfig, Task};
use crate::error::{Error, Result};
use crate::explain::{LimeConfig, MIN_PERTURBATIONS};
use crate::models::{Architecture, ForestConfig, TrainConfig, Variant};
use crate::spectra::PreprocessConfig;

/// Input and output locations. Relative paths resolve against the working
/// directory. Unset inputs fall back to the synth stage's outputs and the
/// shipped libraries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub output_dir: PathBuf,
    pub spectra: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub exclusion_policy: Option<PathBuf>,
    pub shift_library: Option<PathBuf>,
    pub comorbidity_library: Option<PathBuf>,
    pub disease_library: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            output_dir: PathBuf::from("serumscope-out"),
            spectra: None,
            metadata: None,
            exclusion_policy: None,
            shift_library: None,
            comorbidity_library: None,
            disease_library: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemaConfig {
    /// Medication vocabulary size of the metadata schema.
    pub medications: usize,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig { medications: crate::meta::DEFAULT_MEDICATION_COUNT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    /// `null`, `strong` or `split_modalities`.
    pub preset: String,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig { preset: "strong".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub tasks: Vec<Task>,
    pub balance: Balance,
    pub aggregation: Aggregation,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { tasks: Task::ALL.to_vec(), balance: Balance::Balanced, aggregation: Aggregation::PatientMean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub k: usize,
    /// Adds leave-one-patient-out columns to the forest table.
    pub loocv: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { k: 5, loocv: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub variants: Vec<Variant>,
    /// Also fit and cross-validate the spectra-only random forest.
    pub forest: bool,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig { variants: Variant::ALL.to_vec(), forest: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    /// Model explained and used for report decisions.
    pub variant: Variant,
    pub kernel_samples: usize,
    pub lime: LimeConfig,
    /// Consensus depth K.
    pub top_k: usize,
    /// Patients to explain and report. Empty selects held-out patients.
    pub patients: Vec<String>,
    /// Cap on automatically selected patients.
    pub max_patients: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            variant: Variant::Early,
            kernel_samples: 2048,
            lime: LimeConfig::default(),
            top_k: 10,
            patients: Vec::new(),
            max_patients: 3,
        }
    }
}

/// Every setting of a run. The top-level `seed` drives every stage; the
/// per-section `seed` fields are overwritten from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    pub paths: Paths,
    pub schema: SchemaConfig,
    pub synth: SynthConfig,
    pub signal: SignalConfig,
    pub preprocess: PreprocessConfig,
    pub cohort: CohortConfig,
    pub split: SplitConfig,
    pub models: ModelsConfig,
    pub train: TrainConfig,
    pub architecture: Architecture,
    pub forest: ForestConfig,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            paths: Paths::default(),
            schema: SchemaConfig::default(),
            synth: SynthConfig::default(),
            signal: SignalConfig::default(),
            preprocess: PreprocessConfig::default(),
            cohort: CohortConfig::default(),
            split: SplitConfig::default(),
            models: ModelsConfig::default(),
            train: TrainConfig::default(),
            architecture: Architecture::default(),
            forest: ForestConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Sets `dotted.key = value` in a TOML table, creating intermediate tables.
/// The value is parsed as TOML; anything unparsable is taken as a string.
pub fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(config_err)?;
        Self::from_table(table, &[])
    }

    /// Parses `table`, applies `overrides` (dotted key, raw value) on top,
    /// then validates.
    pub fn from_table(mut table: toml::Table, overrides: &[(String, String)]) -> Result<Self> {
        for (k, v) in overrides {
            set_key(&mut table, k, v)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(config_err)?;
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file (if any) and applies the overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Self::from_table(table, overrides)
    }

    fn propagate_seed(&mut self) {
        self.train.seed = self.seed;
        self.forest.seed = self.seed;
        self.explain.lime.seed = self.seed;
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        SignalSpec::preset(&self.signal.preset)
            .ok_or_else(|| Error::Config(format!("unknown signal preset `{}`", self.signal.preset)))
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.preprocess.validate()?;
        self.train.validate()?;
        self.architecture.validate()?;
        self.signal_spec()?;
        let err = |m: String| Err(Error::Config(m));
        if self.jobs == 0 {
            return err("jobs must be at least 1".into());
        }
        if self.schema.medications == 0 {
            return err("schema.medications must be at least 1".into());
        }
        if self.cohort.tasks.is_empty() {
            return err("cohort.tasks is empty".into());
        }
        let t = &self.cohort.tasks;
        if (0..t.len()).any(|i| t[..i].contains(&t[i])) {
            return err("cohort.tasks lists a task twice".into());
        }
        if self.split.k < 2 {
            return err(format!("split.k = {} must be at least 2", self.split.k));
        }
        if self.models.variants.is_empty() {
            return err("models.variants is empty".into());
        }
        if !self.models.variants.contains(&self.explain.variant) {
            return err(format!("explain.variant `{}` is not among models.variants", self.explain.variant.as_str()));
        }
        if self.forest.n_trees == 0 || self.forest.min_samples_leaf == 0 {
            return err("forest.n_trees and forest.min_samples_leaf must be positive".into());
        }
        if self.explain.top_k == 0 {
            return err("explain.top_k must be at least 1".into());
        }
        if self.explain.lime.n_perturbations < MIN_PERTURBATIONS {
            return err(format!("explain.lime.n_perturbations must be at least {MIN_PERTURBATIONS}"));
        }
        if !(0.0..=1.0).contains(&self.explain.lime.flip_probability) {
            return err("explain.lime.flip_probability must lie in [0, 1]".into());
        }
        if self.explain.patients.is_empty() && self.explain.max_patients == 0 {
            return err("explain.max_patients must be at least 1 when no patients are listed".into());
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, ignoring settings that cannot
    /// change results (`jobs`, `paths.output_dir`).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = 1;
        c.paths.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml_str("sed = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[train]\nepochs = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_win_and_seed_propagates() {
        let table: toml::Table = toml::from_str("seed = 1\n[train]\nmax_epochs = 10").unwrap();
        let over = vec![
            ("seed".to_string(), "7".to_string()),
            ("train.max_epochs".to_string(), "20".to_string()),
            ("signal.preset".to_string(), "null".to_string()),
            ("cohort.tasks".to_string(), "[\"crc_vs_control\"]".to_string()),
        ];
        let c = RunConfig::from_table(table, &over).unwrap();
        assert_eq!((c.seed, c.train.seed, c.forest.seed), (7, 7, 7));
        assert_eq!(c.train.max_epochs, 20);
        assert_eq!(c.signal.preset, "null");
        assert_eq!(c.cohort.tasks, vec![Task::CrcVsControl]);
    }

    #[test]
    fn hash_ignores_jobs_and_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.jobs = 4;
        b.paths.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_values() {
        assert!(RunConfig::from_toml_str("[split]\nk = 1").is_err());
        assert!(RunConfig::from_toml_str("[signal]\npreset = \"loud\"").is_err());
        assert!(RunConfig::from_toml_str("[models]\nvariants = [\"joint\"]").is_err());
    }
}
