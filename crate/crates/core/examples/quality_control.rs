//! Preprocesses a 600-patient synthetic cohort with planted outlier
//! patients and checks which ones quality control catches.
//!
//! `cargo run --release --example quality_control`

use std::collections::BTreeSet;

use serumscope::dataset::{generate_synthetic, SignalSpec, SynthConfig};
use serumscope::meta::MetadataSchema;
use serumscope::spectra::{preprocess_all, run_qc, PreprocessConfig, Preprocessor, QcCheck};

fn main() -> serumscope::Result<()> {
    let cohort = generate_synthetic(&SynthConfig::default(), &MetadataSchema::compact(30), &SignalSpec::strong(), 3)?;
    let pre = Preprocessor::new(PreprocessConfig::default())?;
    let processed = preprocess_all(&pre, &cohort.spectra)?;
    let qc = run_qc(processed, |id| cohort.condition_of(id), pre.config().baseline_divergence_k)?;

    let by = |check| qc.records.iter().filter(|r| r.flagged_by == Some(check)).count();
    println!("{} replicates: {} dropped by the replicate check, {} by the condition check", qc.records.len(), by(QcCheck::Replicate), by(QcCheck::Condition));
    for (label, b) in &qc.baselines {
        println!("  baseline {label:<14} from {} spectra", b.n_members);
    }

    let planted = cohort.outlier_ids();
    let flagged: BTreeSet<String> = qc.condition_flagged_samples().into_iter().collect();
    let caught = planted.intersection(&flagged).count();
    println!("planted outlier patients {}, flagged {}, caught {caught}", planted.len(), flagged.len());
    for id in flagged.difference(&planted) {
        println!("  false alarm: {id}");
    }
    for id in planted.difference(&flagged) {
        println!("  missed: {id}");
    }
    Ok(())
}
