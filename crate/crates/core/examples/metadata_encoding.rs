//! Applies the leakage exclusion policy to synthetic patient records and
//! encodes the survivors into the scaled metadata matrix.
//!
//! `cargo run --example metadata_encoding`

use serumscope::dataset::{generate_synthetic, SignalSpec, SynthConfig};
use serumscope::meta::{apply_exclusions, ExclusionPolicy, MetaEncoder, MetadataSchema};

fn main() -> serumscope::Result<()> {
    let schema = MetadataSchema::compact(20);
    let cfg = SynthConfig { n_patients: 120, n_points: 60, ..Default::default() };
    let cohort = generate_synthetic(&cfg, &schema, &SignalSpec::strong(), 2)?;

    let policy = ExclusionPolicy::default();
    let outcome = apply_exclusions(cohort.records, &policy)?;
    println!("kept {} records, excluded {}", outcome.kept.len(), outcome.removed.len());
    for r in outcome.removed.iter().take(5) {
        println!("  {} excluded: {}", r.record.patient_id, r.reasons.join(", "));
    }

    // Statistics come from the first 80 kept patients only, as a training
    // split would; the rest are transformed with them.
    let (train, rest) = outcome.kept.split_at(80.min(outcome.kept.len()));
    let encoder = MetaEncoder::fit(train)?;
    let test = encoder.transform(rest);
    println!("\n{} metadata columns (schema width {} before dropping constant columns)", encoder.width(), schema.encoded_width(&policy.excluded_comorbidities));
    for (name, p) in encoder.feature_names().iter().zip(encoder.scaler_params()).take(12) {
        println!("  {name:<40} mean {:>8.3}  std {:>7.3}", p.mean, p.std);
    }
    println!("  ...");
    println!("\nheld-out matrix {} x {}, unseen medications {}", test.matrix.nrows(), test.matrix.ncols(), test.unseen_medications);
    Ok(())
}
