//! Staged driver: synth, preprocess, train, evaluate, explain, report.
//!
//! Each stage reads the previous stages' artifacts under the output
//! directory and finishes by writing `<stage>/manifest.json`. Results depend
//! only on the configuration; the worker count never changes an output byte.

mod config;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use config::{
    set_key, CohortConfig, ExplainConfig, ModelsConfig, Paths, RunConfig, SchemaConfig, SignalConfig, SplitConfig,
};
pub use manifest::{sha256_file, ArtifactDigest, RunManifest, ARTIFACT_FORMAT};
pub use stages::{held_out_patients, PatientExplanation, SplitRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Preprocess,
    Train,
    Evaluate,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Synth, Stage::Preprocess, Stage::Train, Stage::Evaluate, Stage::Explain, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this one reads.
    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Synth | Stage::Preprocess => &[],
            Stage::Train => &[Stage::Preprocess],
            Stage::Evaluate | Stage::Explain => &[Stage::Preprocess, Stage::Train],
            Stage::Report => &[Stage::Preprocess, Stage::Explain],
        }
    }
}

pub struct Pipeline {
    config: RunConfig,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Pipeline { config, pool })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.paths.output_dir
    }

    /// Runs one stage and writes its manifest.
    pub fn run(&self, stage: Stage) -> Result<RunManifest> {
        let out = self.output_dir();
        let hash = self.config.hash();
        for &up in stage.upstream() {
            match RunManifest::read(out, up.as_str()) {
                Ok(m) if m.config_hash != hash => log::warn!(
                    "{} artifacts were produced under a different configuration ({}); results may be inconsistent",
                    up.as_str(),
                    &m.config_hash[..12]
                ),
                Ok(_) => {}
                Err(_) => log::warn!("no {} manifest under {}", up.as_str(), out.display()),
            }
        }
        log::info!("stage {} (config {})", stage.as_str(), &hash[..12]);
        let ctx = stages::Ctx { cfg: &self.config, out };
        let artifacts: Vec<PathBuf> = self.pool.install(|| match stage {
            Stage::Synth => stages::synth(&ctx),
            Stage::Preprocess => stages::preprocess(&ctx),
            Stage::Train => stages::train(&ctx),
            Stage::Evaluate => stages::evaluate(&ctx),
            Stage::Explain => stages::explain(&ctx),
            Stage::Report => stages::report(&ctx),
        })?;
        let manifest = RunManifest::new(stage.as_str(), &hash, self.config.seed, out, &artifacts)?;
        manifest.write(out)?;
        Ok(manifest)
    }

    /// Runs every stage in order, skipping `synth` when input files are
    /// configured.
    pub fn run_all(&self) -> Result<Vec<RunManifest>> {
        let p = &self.config.paths;
        let external = p.spectra.is_some() && p.metadata.is_some();
        Stage::ALL
            .into_iter()
            .filter(|&s| !(external && s == Stage::Synth))
            .map(|s| self.run(s))
            .collect()
    }
}
