use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::annotate::{overlap_report, Condition, Libraries};
use crate::dataset::{assemble, generate_synthetic, make_splits, Aggregation, Cohort, SplitPlan, Task};
use crate::error::{Error, Result};
use crate::explain::{
    consensus, explanation_seed, lime_explain, shap_kernel, write_attributions_csv, write_consensus_csv, Attribution,
    Background, ConsensusSet, FusionPredictor, LimeConfig, Method,
};
use crate::meta::{apply_exclusions, ExclusionPolicy, MetadataSchema, PatientRecord, Sex};
use crate::models::{
    cv_forest, forest_table, holdout_forest, holdout_fusion, load_model, model_table, save_model, CvScheme,
    FeaturePipeline, ForestRow, TrainedFusion, Variant,
};
use crate::report::{compose, render_structured, render_text, Decision, ModelFindings, ReportInputs};
use crate::spectra::{self, preprocess_all, run_qc, Preprocessor, QcStatus, Spectrum};

/// Everything a stage needs besides its inputs on disk.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

impl Ctx<'_> {
    fn dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    pub fn schema(&self) -> MetadataSchema {
        MetadataSchema::compact(self.cfg.schema.medications)
    }

    pub fn policy(&self) -> Result<ExclusionPolicy> {
        match &self.cfg.paths.exclusion_policy {
            Some(p) => ExclusionPolicy::load(p),
            None => Ok(ExclusionPolicy::default()),
        }
    }

    pub fn libraries(&self) -> Result<Libraries> {
        let p = &self.cfg.paths;
        Libraries::load_or_builtin(
            p.shift_library.as_deref(),
            p.comorbidity_library.as_deref(),
            p.disease_library.as_deref(),
        )
    }

    fn input(&self, configured: &Option<PathBuf>, synth_name: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.dir("synth").join(synth_name))
    }

    fn task_dir(&self, stage: &str, task: Task) -> PathBuf {
        self.dir(stage).join(task.as_str())
    }
}

// ---------------------------------------------------------------- synth

pub(crate) fn synth(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cfg = ctx.cfg;
    let cohort = generate_synthetic(&cfg.synth, &ctx.schema(), &cfg.signal_spec()?, cfg.seed)?;
    let dir = ctx.dir("synth");
    cohort.write_to_dir(&dir)?;
    log::info!(
        "synthesized {} patients, {} replicates on {} points",
        cohort.records.len(),
        cohort.spectra.len(),
        cohort.wavenumbers.len()
    );
    Ok(["spectra.csv", "metadata.csv", "manifest.csv"].iter().map(|n| dir.join(n)).collect())
}

// ---------------------------------------------------------------- preprocess

pub(crate) fn preprocess(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cfg = ctx.cfg;
    let spectra_path = ctx.input(&cfg.paths.spectra, "spectra.csv");
    let meta_path = ctx.input(&cfg.paths.metadata, "metadata.csv");
    let raw = spectra::io::read_spectra(open(&spectra_path)?, spectra::Stage::Raw)?;
    let records = crate::meta::io::read_records(open(&meta_path)?)?;
    let policy = ctx.policy()?;

    let condition: BTreeMap<&str, String> =
        records.iter().map(|r| (r.patient_id.as_str(), r.diagnosis.label().to_string())).collect();
    let pre = Preprocessor::new(cfg.preprocess.clone())?;
    let processed = preprocess_all(&pre, &raw)?;
    let qc = run_qc(processed, |id| condition.get(id).cloned(), cfg.preprocess.baseline_divergence_k)?;
    let flagged = qc.spectra.iter().filter(|s| s.qc() != QcStatus::Passed).count();

    let exclusion = apply_exclusions(records, &policy)?;
    log::info!(
        "preprocessed {} replicates ({flagged} flagged by QC); kept {} patients, excluded {}",
        qc.spectra.len(),
        exclusion.kept.len(),
        exclusion.removed.len()
    );

    let dir = ctx.dir("preprocess");
    let paths: Vec<PathBuf> = ["spectra.csv", "qc.csv", "records.csv", "excluded.csv"].iter().map(|n| dir.join(n)).collect();
    spectra::io::write_spectra(create(&paths[0])?, &qc.spectra)?;
    spectra::io::write_qc(create(&paths[1])?, &qc.records)?;
    crate::meta::io::write_records(create(&paths[2])?, &exclusion.kept, &ctx.schema())?;
    let mut w = csv::Writer::from_writer(create(&paths[3])?);
    w.write_record(["patient_id", "reasons"])?;
    for r in &exclusion.removed {
        w.write_record([r.record.patient_id.as_str(), &r.reasons.join(";")])?;
    }
    w.flush().map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths)
}

/// QC'd spectra (status restored from `qc.csv`) and the kept records.
pub(crate) fn load_preprocessed(ctx: &Ctx) -> Result<(Vec<Spectrum>, Vec<PatientRecord>)> {
    let dir = ctx.dir("preprocess");
    let mut spectra = spectra::io::read_spectra(open(&dir.join("spectra.csv"))?, spectra::Stage::Normalized)?;
    let qc = spectra::io::read_qc(open(&dir.join("qc.csv"))?)?;
    let status: BTreeMap<(&str, usize), QcStatus> =
        qc.iter().map(|r| ((r.sample_id.as_str(), r.replicate), r.qc)).collect();
    for s in &mut spectra {
        let st = *status.get(&(s.sample_id(), s.replicate())).ok_or_else(|| Error::Format {
            what: "QC CSV",
            detail: format!("no entry for {} replicate {}", s.sample_id(), s.replicate()),
        })?;
        s.set_qc(st);
    }
    let records = crate::meta::io::read_records(open(&dir.join("records.csv"))?)?;
    Ok((spectra, records))
}

// ---------------------------------------------------------------- train

/// Split of one task, with the patients behind each partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub task: Task,
    pub train_patients: Vec<String>,
    pub val_patients: Vec<String>,
    pub test_patients: Vec<String>,
    pub plan: SplitPlan,
}

fn patients_of(cohort: &Cohort, rows: &[usize]) -> Vec<String> {
    let ids: BTreeSet<&str> = rows.iter().map(|&r| cohort.records[cohort.row_patient[r]].patient_id.as_str()).collect();
    ids.into_iter().map(str::to_string).collect()
}

fn task_cohort(ctx: &Ctx, spectra: &[Spectrum], records: &[PatientRecord], task: Task) -> Result<(Cohort, SplitPlan)> {
    let c = &ctx.cfg.cohort;
    let cohort = assemble(spectra, records, task, c.balance, c.aggregation, ctx.cfg.seed)?;
    let plan = make_splits(&cohort, ctx.cfg.split.k, ctx.cfg.seed)?;
    Ok((cohort, plan))
}

/// Rebuilds a task cohort and checks its split against the one trained on.
fn trained_cohort(ctx: &Ctx, spectra: &[Spectrum], records: &[PatientRecord], task: Task) -> Result<(Cohort, SplitPlan)> {
    let (cohort, plan) = task_cohort(ctx, spectra, records, task)?;
    let stored: SplitRecord = read_json(&ctx.task_dir("train", task).join("split.json"))?;
    if stored.plan != plan {
        return Err(Error::PipelineHalt(format!(
            "the {} split differs from the one used for training; rerun `train`",
            task.as_str()
        )));
    }
    Ok((cohort, plan))
}

fn model_stem(ctx: &Ctx, task: Task, variant: Variant) -> PathBuf {
    ctx.task_dir("train", task).join(variant.as_str())
}

fn features_path(ctx: &Ctx, task: Task, variant: Variant) -> PathBuf {
    ctx.task_dir("train", task).join(format!("{}.features.json", variant.as_str()))
}

fn load_trained(ctx: &Ctx, task: Task, variant: Variant) -> Result<TrainedFusion> {
    let model = load_model(&model_stem(ctx, task, variant))?;
    let features: FeaturePipeline = read_json(&features_path(ctx, task, variant))?;
    Ok(TrainedFusion { model, features })
}

pub(crate) fn train(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cfg = ctx.cfg;
    let (spectra, records) = load_preprocessed(ctx)?;
    let mut artifacts = Vec::new();
    for &task in &cfg.cohort.tasks {
        let (cohort, plan) = task_cohort(ctx, &spectra, &records, task)?;
        let split = SplitRecord {
            task,
            train_patients: patients_of(&cohort, &plan.train),
            val_patients: patients_of(&cohort, &plan.val),
            test_patients: patients_of(&cohort, &plan.test),
            plan: plan.clone(),
        };
        let split_path = ctx.task_dir("train", task).join("split.json");
        write_json(&split_path, &split)?;
        artifacts.push(split_path);
        for &variant in &cfg.models.variants {
            let (trained, report) = holdout_fusion(variant, &cfg.architecture, &cfg.train, &cohort, &plan)?;
            log::info!(
                "{} {}: {} epochs, holdout accuracy {:.3}",
                task.as_str(),
                variant.as_str(),
                trained.model.trace.len(),
                report.accuracy
            );
            let hyper = serde_json::json!({
                "architecture": cfg.architecture,
                "train": cfg.train,
                "task": task,
            });
            let stem = model_stem(ctx, task, variant);
            save_model(&trained.model, hyper, &stem)?;
            let fpath = features_path(ctx, task, variant);
            write_json(&fpath, &trained.features)?;
            artifacts.extend([stem.with_extension("csx"), stem.with_extension("json"), fpath]);
        }
    }
    Ok(artifacts)
}

// ---------------------------------------------------------------- evaluate

pub(crate) fn evaluate(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cfg = ctx.cfg;
    let (spectra, records) = load_preprocessed(ctx)?;
    let threshold = cfg.train.threshold;
    let mut artifacts = Vec::new();
    for &task in &cfg.cohort.tasks {
        let (cohort, plan) = trained_cohort(ctx, &spectra, &records, task)?;
        let dir = ctx.task_dir("evaluate", task);
        let y: Vec<u8> = plan.test.iter().map(|&i| cohort.labels[i]).collect();

        let pred_path = dir.join("predictions.csv");
        let mut preds = csv::Writer::from_writer(create(&pred_path)?);
        preds.write_record(["row", "patient_id", "label", "model", "probability"])?;
        let mut rows = Vec::new();
        for &variant in &cfg.models.variants {
            let trained = load_trained(ctx, task, variant)?;
            let scores = trained.predict(&cohort, &plan.test)?;
            for (k, &r) in plan.test.iter().enumerate() {
                preds.write_record([
                    r.to_string(),
                    cohort.records[cohort.row_patient[r]].patient_id.clone(),
                    cohort.labels[r].to_string(),
                    variant.as_str().to_string(),
                    format!("{:?}", scores[k]),
                ])?;
            }
            rows.push((variant.display().to_string(), crate::models::evaluate(&y, &scores, threshold)));
        }
        preds.flush().map_err(|e| Error::io(&pred_path, e))?;
        let table_path = dir.join("models.csv");
        write_text(&table_path, &model_table(&rows)?)?;
        artifacts.extend([pred_path, table_path]);

        if cfg.models.forest {
            let mut table = Vec::new();
            for (name, sex) in [("RF Women", Some(Sex::F)), ("RF Men", Some(Sex::M)), ("RF Both", None)] {
                match forest_row(ctx, name, &cohort, &plan, sex) {
                    Ok(row) => table.push(row),
                    // A one-sex cohort can be too small to split; the other rows still stand.
                    Err(e @ (Error::Split(_) | Error::Assembly(_))) if sex.is_some() => {
                        log::warn!("{}: skipping {name}: {e}", task.as_str())
                    }
                    Err(e) => return Err(e),
                }
            }
            let path = dir.join("forest.csv");
            write_text(&path, &forest_table(&table)?)?;
            artifacts.push(path);
        }
        log::info!("{}: evaluated {} models on {} test rows", task.as_str(), rows.len(), plan.test.len());
    }
    Ok(artifacts)
}

/// Spectra-only forest on the whole task cohort or on one sex. Sub-cohorts
/// get their own split, drawn with the run seed.
fn forest_row(ctx: &Ctx, name: &str, cohort: &Cohort, plan: &SplitPlan, sex: Option<Sex>) -> Result<ForestRow> {
    let cfg = ctx.cfg;
    let threshold = cfg.train.threshold;
    let filtered;
    let (cohort, plan) = match sex {
        None => (cohort, plan.clone()),
        Some(sex) => {
            filtered = cohort.filter_sex(sex);
            let plan = make_splits(&filtered, cfg.split.k, cfg.seed)?;
            (&filtered, plan)
        }
    };
    let (_, holdout) = holdout_forest(cohort, &plan, &cfg.forest, threshold)?;
    let kfold = cv_forest(cohort, &plan, &cfg.forest, CvScheme::StratifiedKFold, threshold)?;
    let loocv = if cfg.split.loocv {
        Some(cv_forest(cohort, &plan, &cfg.forest, CvScheme::Loocv, threshold)?.summary)
    } else {
        None
    };
    Ok(ForestRow { model: name.into(), holdout, kfold: kfold.summary, k: plan.k(), loocv })
}

// ---------------------------------------------------------------- explain

/// One model's explanation of one patient; the report is built from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientExplanation {
    pub patient_id: String,
    pub task: Task,
    pub variant: Variant,
    pub decision: Decision,
    pub wavenumbers: Vec<f64>,
    pub shap: Attribution,
    pub lime: Attribution,
    pub consensus: ConsensusSet,
}

fn explanation_path(ctx: &Ctx, task: Task, id: &str) -> PathBuf {
    ctx.task_dir("explain", task).join(format!("{id}.json"))
}

/// Patients in some task's test partition and in no task's train or
/// validation partition, in id order.
pub fn held_out_patients(splits: &[SplitRecord]) -> Vec<String> {
    let seen: BTreeSet<&str> =
        splits.iter().flat_map(|s| s.train_patients.iter().chain(&s.val_patients)).map(String::as_str).collect();
    let test: BTreeSet<&str> = splits.iter().flat_map(|s| &s.test_patients).map(String::as_str).collect();
    test.difference(&seen).map(|s| s.to_string()).collect()
}

/// One patient-mean row per requested patient over their passed replicates.
fn patient_rows(spectra: &[Spectrum], records: &[PatientRecord], ids: &[String]) -> Result<Cohort> {
    let by_id: BTreeMap<&str, &PatientRecord> = records.iter().map(|r| (r.patient_id.as_str(), r)).collect();
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut grid: Option<Vec<f64>> = None;
    for id in ids {
        let record = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Assembly(format!("patient `{id}` has no kept metadata record")))?;
        let reps: Vec<&Spectrum> =
            spectra.iter().filter(|s| s.sample_id() == id && s.qc() == QcStatus::Passed).collect();
        if reps.is_empty() {
            return Err(Error::Assembly(format!("patient `{id}` has no replicate that passed QC")));
        }
        let g = grid.get_or_insert_with(|| reps[0].wavenumbers().to_vec());
        let mut mean = vec![0.0; g.len()];
        for s in &reps {
            if !s.same_grid(g) {
                return Err(Error::GridMismatch(format!("{} is not on the common grid", s.sample_id())));
            }
            mean.iter_mut().zip(s.intensities()).for_each(|(m, y)| *m += y);
        }
        mean.iter_mut().for_each(|m| *m /= reps.len() as f64);
        rows.push(mean);
        kept.push((*record).clone());
    }
    let wavenumbers = grid.unwrap_or_default();
    let n = rows.len();
    Ok(Cohort {
        task: Task::PolypVsControl,
        balance: crate::dataset::Balance::Unbalanced,
        aggregation: Aggregation::PatientMean,
        spectra: DMatrix::from_fn(n, wavenumbers.len(), |i, j| rows[i][j]),
        wavenumbers,
        records: kept,
        row_patient: (0..n).collect(),
        labels: vec![0; n],
    })
}

fn joined(spectra: &DMatrix<f64>, meta: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d_s) = spectra.shape();
    let mut x = DMatrix::zeros(n, d_s + meta.ncols());
    x.columns_mut(0, d_s).copy_from(spectra);
    x.columns_mut(d_s, meta.ncols()).copy_from(meta);
    x
}

fn explain_patients(ctx: &Ctx) -> Result<Vec<String>> {
    let e = &ctx.cfg.explain;
    if !e.patients.is_empty() {
        return Ok(e.patients.clone());
    }
    let splits = ctx
        .cfg
        .cohort
        .tasks
        .iter()
        .map(|&t| read_json(&ctx.task_dir("train", t).join("split.json")))
        .collect::<Result<Vec<SplitRecord>>>()?;
    let mut ids = held_out_patients(&splits);
    ids.truncate(e.max_patients);
    if ids.is_empty() {
        return Err(Error::Assembly("no held-out patient to explain".into()));
    }
    Ok(ids)
}

pub(crate) fn explain(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cfg = ctx.cfg;
    let e = &cfg.explain;
    let (spectra, records) = load_preprocessed(ctx)?;
    let ids = explain_patients(ctx)?;
    let targets = patient_rows(&spectra, &records, &ids)?;
    let all_rows: Vec<usize> = (0..ids.len()).collect();
    let mut artifacts = Vec::new();

    let decisions_path = ctx.dir("explain").join("decisions.csv");
    let mut decisions = csv::Writer::from_writer(create(&decisions_path)?);
    decisions.write_record(["patient_id", "task", "model", "probability", "threshold"])?;
    for &task in &cfg.cohort.tasks {
        let (cohort, plan) = trained_cohort(ctx, &spectra, &records, task)?;
        let trained = load_trained(ctx, task, e.variant)?;
        let f = &trained.features;
        let train_data = f.transform(&cohort, &plan.train)?;
        let background = Background::from_rows(&joined(&train_data.spectra, &train_data.meta), cfg.seed)?;
        let data = f.transform(&targets, &all_rows)?;
        let x = joined(&data.spectra, &data.meta);
        let names = f.feature_names();
        let kinds = f.feature_kinds();
        let predictor = FusionPredictor { model: &trained.model, spectral_width: f.wavenumbers.len() };
        // Kernel SHAP needs at least 2M + 2 coalitions.
        let n_samples = e.kernel_samples.max(2 * names.len() + 2);

        for (i, id) in ids.iter().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let shap = shap_kernel(
                &predictor,
                &row,
                &background,
                &names,
                id,
                n_samples,
                explanation_seed(cfg.seed, id, Method::ShapKernel),
            )?;
            let lime_cfg = LimeConfig { seed: explanation_seed(cfg.seed, id, Method::Lime), ..e.lime.clone() };
            let lime = lime_explain(&predictor, &row, &kinds, &names, id, &lime_cfg)?;
            let consensus = consensus(&shap, &lime, e.top_k, task.condition());
            let decision = Decision { probability: shap.prediction, threshold: cfg.train.threshold };
            log::info!(
                "{} {id}: p = {:.3}, consensus {}",
                task.as_str(),
                decision.probability,
                consensus.describe()
            );

            let dir = ctx.task_dir("explain", task);
            let attr_path = dir.join(format!("{id}.attributions.csv"));
            write_attributions_csv(create(&attr_path)?, &[shap.clone(), lime.clone()])?;
            let cons_path = dir.join(format!("{id}.consensus.csv"));
            write_consensus_csv(create(&cons_path)?, std::slice::from_ref(&consensus))?;
            decisions.write_record([
                id.as_str(),
                task.as_str(),
                e.variant.as_str(),
                &format!("{:?}", decision.probability),
                &format!("{:?}", decision.threshold),
            ])?;
            let json_path = explanation_path(ctx, task, id);
            let record = PatientExplanation {
                patient_id: id.clone(),
                task,
                variant: e.variant,
                decision,
                wavenumbers: f.wavenumbers.clone(),
                shap,
                lime,
                consensus,
            };
            write_json(&json_path, &record)?;
            artifacts.extend([attr_path, cons_path, json_path]);
        }
    }
    decisions.flush().map_err(|e| Error::io(&decisions_path, e))?;
    let patients_path = ctx.dir("explain").join("patients.txt");
    write_text(&patients_path, &(ids.join("\n") + "\n"))?;
    artifacts.extend([decisions_path, patients_path]);
    Ok(artifacts)
}

// ---------------------------------------------------------------- report

fn condition_of(task: Task) -> Condition {
    match task {
        Task::PolypVsControl => Condition::Polyp,
        Task::CrcVsControl => Condition::Crc,
    }
}

pub(crate) fn report(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let patients_path = ctx.dir("explain").join("patients.txt");
    let text = std::fs::read_to_string(&patients_path).map_err(|e| Error::io(&patients_path, e))?;
    let ids: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    let records = crate::meta::io::read_records(open(&ctx.dir("preprocess").join("records.csv"))?)?;
    let by_id: BTreeMap<&str, &PatientRecord> = records.iter().map(|r| (r.patient_id.as_str(), r)).collect();
    let schema = ctx.schema();
    let policy = ctx.policy()?;
    let libs = ctx.libraries()?;
    let mut artifacts = Vec::new();

    for id in ids {
        let record =
            by_id.get(id).ok_or_else(|| Error::Assembly(format!("patient `{id}` has no kept metadata record")))?;
        let mut findings = BTreeMap::new();
        for task in Task::ALL {
            let condition = condition_of(task);
            let path = explanation_path(ctx, task, id);
            let f = if ctx.cfg.cohort.tasks.contains(&task) && path.exists() {
                let ex: PatientExplanation = read_json(&path)?;
                ModelFindings::new(condition, Some(ex.decision), &ex.consensus, &ex.shap, &ex.wavenumbers, &libs)?
            } else {
                log::warn!("{id}: no {} explanation; the model is reported as unavailable", task.as_str());
                ModelFindings::unavailable(condition, &libs)
            };
            findings.insert(condition, f);
        }
        let polyp = findings.remove(&Condition::Polyp).expect("both tasks visited");
        let crc = findings.remove(&Condition::Crc).expect("both tasks visited");
        let present: Vec<&str> =
            record.present_comorbidities().filter(|k| !policy.excluded_comorbidities.contains(*k)).collect();
        let overlap = overlap_report(&present, &[polyp.evidence.clone(), crc.evidence.clone()], &libs);
        let inputs = ReportInputs { record, schema: &schema, policy: &policy, libraries: &libs };
        let report = compose(&inputs, polyp, crc, overlap);

        let dir = ctx.dir("report");
        let txt = dir.join(format!("{id}.report.txt"));
        let md = dir.join(format!("{id}.report.md"));
        write_text(&txt, &render_text(&report))?;
        write_text(&md, &render_structured(&report))?;
        log::info!("{id}: tier {}", report.tier.map_or("undetermined", |t| t.as_str()));
        artifacts.extend([txt, md]);
    }
    Ok(artifacts)
}
