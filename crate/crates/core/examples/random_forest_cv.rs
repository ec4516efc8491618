//! Spectra-only random forest for one task, fitted on both sexes and on
//! each sex alone, assessed by holdout, stratified 5-fold and
//! leave-one-patient-out cross-validation.
//!
//! `cargo run --release --example random_forest_cv`

use serumscope::dataset::{assemble, generate_synthetic, make_splits, Aggregation, Balance, SignalSpec, SynthConfig, Task};
use serumscope::meta::{apply_exclusions, ExclusionPolicy, MetadataSchema, Sex};
use serumscope::models::{cv_forest, forest_table, holdout_forest, CvScheme, ForestConfig, ForestRow};
use serumscope::spectra::{preprocess_all, run_qc, PreprocessConfig, Preprocessor};

fn main() -> serumscope::Result<()> {
    let seed = 7;
    let cfg = SynthConfig { n_points: 176, ..Default::default() };
    let synth = generate_synthetic(&cfg, &MetadataSchema::compact(20), &SignalSpec::strong(), seed)?;
    let pre = Preprocessor::new(PreprocessConfig::default())?;
    let qc = run_qc(preprocess_all(&pre, &synth.spectra)?, |id| synth.condition_of(id), 3.0)?;
    let kept = apply_exclusions(synth.records.clone(), &ExclusionPolicy::default())?.kept;
    let both = assemble(&qc.spectra, &kept, Task::PolypVsControl, Balance::Balanced, Aggregation::PatientMean, seed)?;

    let forest = ForestConfig { n_trees: 100, seed, ..Default::default() };
    let mut rows = Vec::new();
    for (name, sex) in [("RF Women", Some(Sex::F)), ("RF Men", Some(Sex::M)), ("RF Both", None)] {
        let cohort = sex.map_or_else(|| both.clone(), |s| both.filter_sex(s));
        let plan = make_splits(&cohort, 5, seed)?;
        let (_, holdout) = holdout_forest(&cohort, &plan, &forest, 0.5)?;
        let kfold = cv_forest(&cohort, &plan, &forest, CvScheme::StratifiedKFold, 0.5)?;
        let loocv = cv_forest(&cohort, &plan, &forest, CvScheme::Loocv, 0.5)?;
        println!(
            "{name:<9} {:>3} patients: holdout AUC {:.3}, 5-fold pooled AUC {:.3}, {} LOOCV rounds",
            cohort.n_patients(),
            holdout.auc.unwrap_or(f64::NAN),
            kfold.pooled.auc.unwrap_or(f64::NAN),
            loocv.folds.len()
        );
        rows.push(ForestRow { model: name.into(), holdout, kfold: kfold.summary, k: plan.k(), loocv: Some(loocv.summary) });
    }
    println!("\n{}", forest_table(&rows)?);
    Ok(())
}
