//! Runs every stage (synthesis, preprocessing, training, evaluation,
//! explanation, reports) on a small configuration and lists what was
//! written. The same run is available as `serumscope run-all`.
//!
//! `cargo run --release --example full_pipeline -- [OUTPUT_DIR]`

use std::path::PathBuf;

use serumscope::pipeline::{Pipeline, RunConfig};

const CONFIG: &str = r#"
seed = 11
[schema]
medications = 20
[synth]
n_patients = 200
n_points = 176
replicates = 6
[train]
max_epochs = 120
[explain]
kernel_samples = 512
max_patients = 2
[forest]
n_trees = 40
"#;

fn main() -> serumscope::Result<()> {
    env_logger::Builder::new().filter_level(log::LevelFilter::Info).format_timestamp(None).init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("serumscope-run"));
    let table: toml::Table = toml::from_str(CONFIG).expect("embedded config parses");
    let overrides = vec![("paths.output_dir".to_string(), toml::Value::String(out.to_string_lossy().into_owned()).to_string())];
    let config = RunConfig::from_table(table, &overrides)?;
    println!("config hash {}", config.hash());

    let manifests = Pipeline::new(config)?.run_all()?;
    for m in &manifests {
        println!("{:<11} {} artifacts", m.stage, m.artifacts.len());
        for a in &m.artifacts {
            println!("    {}  {}", &a.sha256[..12], a.path);
        }
    }

    let reports = out.join("report");
    if let Some(first) = std::fs::read_dir(&reports).ok().and_then(|d| {
        let mut v: Vec<PathBuf> = d.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.to_string_lossy().ends_with(".report.txt")).collect();
        v.sort();
        v.into_iter().next()
    }) {
        println!("\n{}", std::fs::read_to_string(first).unwrap_or_default());
    }
    Ok(())
}
