//! Explains one held-out patient's early-fusion prediction with kernel SHAP
//! and LIME, keeps the features both methods rank highly and annotates them
//! against the Raman shift library.
//!
//! `cargo run --release --example explain_patient`

use serumscope::annotate::{annotate_features, Libraries};
use serumscope::dataset::{assemble, generate_synthetic, make_splits, Aggregation, Balance, SignalSpec, SynthConfig, Task};
use serumscope::explain::{consensus, explanation_seed, lime_explain, shap_kernel, Background, FusionPredictor, LimeConfig, Method};
use serumscope::meta::{apply_exclusions, ExclusionPolicy, MetadataSchema};
use serumscope::models::{build_early_fusion, holdout_fusion, Architecture, TrainConfig, Variant};
use serumscope::spectra::{preprocess_all, run_qc, PreprocessConfig, Preprocessor};

fn main() -> serumscope::Result<()> {
    let seed = 4;
    let cfg = SynthConfig { n_points: 176, ..Default::default() };
    let synth = generate_synthetic(&cfg, &MetadataSchema::compact(30), &SignalSpec::strong(), seed)?;
    let pre = Preprocessor::new(PreprocessConfig::default())?;
    let qc = run_qc(preprocess_all(&pre, &synth.spectra)?, |id| synth.condition_of(id), 3.0)?;
    let kept = apply_exclusions(synth.records.clone(), &ExclusionPolicy::default())?.kept;
    let cohort = assemble(&qc.spectra, &kept, Task::CrcVsControl, Balance::Unbalanced, Aggregation::PatientMean, seed)?;
    let plan = make_splits(&cohort, 5, seed)?;
    let (trained, report) = holdout_fusion(Variant::Early, &Architecture::default(), &TrainConfig { seed, ..Default::default() }, &cohort, &plan)?;
    println!("early fusion test AUC {:.3}", report.auc.unwrap_or(f64::NAN));

    let f = &trained.features;
    let train = f.transform(&cohort, &plan.train)?;
    let background = Background::from_rows(&build_early_fusion(&train.spectra, &train.meta)?, seed)?;
    // The held-out patient the model is least sure about.
    let probs = trained.predict(&cohort, &plan.test)?;
    let pick = (0..probs.len()).min_by(|&a, &b| (probs[a] - 0.5).abs().total_cmp(&(probs[b] - 0.5).abs())).unwrap_or(0);
    let row = plan.test[pick];
    let id = cohort.records[cohort.row_patient[row]].patient_id.clone();
    let target = f.transform(&cohort, &[row])?;
    let x: Vec<f64> = build_early_fusion(&target.spectra, &target.meta)?.row(0).iter().copied().collect();
    let names = f.feature_names();
    let predictor = FusionPredictor { model: &trained.model, spectral_width: f.wavenumbers.len() };

    let shap = shap_kernel(&predictor, &x, &background, &names, &id, 2048.max(2 * x.len() + 2), explanation_seed(seed, &id, Method::ShapKernel))?;
    let lime_cfg = LimeConfig { seed: explanation_seed(seed, &id, Method::Lime), ..Default::default() };
    let lime = lime_explain(&predictor, &x, &f.feature_kinds(), &names, &id, &lime_cfg)?;
    println!(
        "patient {id} (label {}): p = {:.3}, base {:.3}, SHAP efficiency residual {:.1e}, LIME R^2 {:.3}",
        cohort.labels[row],
        shap.prediction,
        shap.base_value,
        shap.efficiency_residual(),
        lime.r_squared.unwrap_or(f64::NAN)
    );
    println!("SHAP top 10: {}", shap.top_k(10).join(", "));
    println!("LIME top 10: {}", lime.top_k(10).join(", "));

    let agreed = consensus(&shap, &lime, 10, Task::CrcVsControl.condition());
    println!("\nconsensus: {}", agreed.describe());
    for a in annotate_features(&agreed, &f.wavenumbers, &Libraries::builtin())? {
        println!("  {:<28} {}", a.feature, a.label);
    }
    Ok(())
}
