//! Trains the five network variants on one synthetic task under the holdout
//! protocol and prints the model comparison table.
//!
//! `cargo run --release --example fusion_models -- [PRESET]`

use serumscope::dataset::{assemble, generate_synthetic, make_splits, Aggregation, Balance, SignalSpec, SynthConfig, Task};
use serumscope::meta::{apply_exclusions, ExclusionPolicy, MetadataSchema};
use serumscope::models::{holdout_fusion, model_table, Architecture, TrainConfig, Variant};
use serumscope::spectra::{preprocess_all, run_qc, PreprocessConfig, Preprocessor};

fn main() -> serumscope::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "split_modalities".into());
    let signal = SignalSpec::preset(&preset)
        .ok_or_else(|| serumscope::Error::Config(format!("unknown preset {preset:?}")))?;
    let seed = 1;

    let cfg = SynthConfig { n_points: 176, ..Default::default() };
    let synth = generate_synthetic(&cfg, &MetadataSchema::compact(30), &signal, seed)?;
    let pre = Preprocessor::new(PreprocessConfig::default())?;
    let qc = run_qc(preprocess_all(&pre, &synth.spectra)?, |id| synth.condition_of(id), 3.0)?;
    let kept = apply_exclusions(synth.records.clone(), &ExclusionPolicy::default())?.kept;
    let cohort = assemble(&qc.spectra, &kept, Task::CrcVsControl, Balance::Unbalanced, Aggregation::PatientMean, seed)?;
    let plan = make_splits(&cohort, 5, seed)?;
    println!(
        "{} patients: train {}, val {}, test {}",
        cohort.n_patients(),
        plan.train.len(),
        plan.val.len(),
        plan.test.len()
    );

    let train_cfg = TrainConfig { seed, ..Default::default() };
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let (trained, report) = holdout_fusion(v, &Architecture::default(), &train_cfg, &cohort, &plan)?;
        println!("{:<22} {} epochs, {} parameters", v.display(), trained.model.trace.len(), trained.model.n_params());
        rows.push((v.display().to_string(), report));
    }
    println!("\n{}", model_table(&rows)?);
    Ok(())
}
