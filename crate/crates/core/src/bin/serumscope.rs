use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serumscope::pipeline::{Pipeline, RunConfig, Stage};

/// Raman serum spectroscopy + metadata fusion pipeline.
#[derive(Parser)]
#[command(name = "serumscope", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Every flag maps to a configuration key and wins over the config file.
#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (`seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (`jobs`); outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Artifact directory (`paths.output_dir`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Raw spectra CSV (`paths.spectra`).
    #[arg(long, global = true)]
    spectra: Option<PathBuf>,
    /// Patient metadata CSV (`paths.metadata`).
    #[arg(long, global = true)]
    metadata: Option<PathBuf>,
    /// Exclusion policy TOML (`paths.exclusion_policy`).
    #[arg(long, global = true)]
    exclusion_policy: Option<PathBuf>,
    /// Any other key, e.g. `--set train.max_epochs=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Synth,
    /// Preprocess spectra, run QC and apply exclusions.
    Preprocess,
    /// Fit every configured fusion model per task.
    Train,
    /// Holdout metrics tables and forest cross-validation.
    Evaluate,
    /// SHAP, LIME and consensus for the selected patients.
    Explain {
        /// Patient to explain (`explain.patients`). Repeatable.
        #[arg(long = "patient")]
        patients: Vec<String>,
    },
    /// Clinical reports for the explained patients.
    Report,
    /// Every stage in order.
    RunAll,
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn overrides(common: &Common, command: &Command) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = common.seed {
        out.push(("seed".into(), s.to_string()));
    }
    if let Some(j) = common.jobs {
        out.push(("jobs".into(), j.to_string()));
    }
    let paths = [
        ("paths.output_dir", &common.output_dir),
        ("paths.spectra", &common.spectra),
        ("paths.metadata", &common.metadata),
        ("paths.exclusion_policy", &common.exclusion_policy),
    ];
    for (key, p) in paths {
        if let Some(p) = p {
            out.push((key.into(), quoted(&p.to_string_lossy())));
        }
    }
    if let Command::Explain { patients } = command {
        if !patients.is_empty() {
            let list: Vec<String> = patients.iter().map(|p| quoted(p)).collect();
            out.push(("explain.patients".into(), format!("[{}]", list.join(", "))));
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.common.quiet, cli.common.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let over = match overrides(&cli.common, &cli.command) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let result = RunConfig::load(cli.common.config.as_deref(), &over).and_then(Pipeline::new).and_then(|p| {
        let stage = match cli.command {
            Command::Synth => Stage::Synth,
            Command::Preprocess => Stage::Preprocess,
            Command::Train => Stage::Train,
            Command::Evaluate => Stage::Evaluate,
            Command::Explain { .. } => Stage::Explain,
            Command::Report => Stage::Report,
            Command::RunAll => return p.run_all().map(|_| ()),
        };
        p.run(stage).map(|_| ())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
