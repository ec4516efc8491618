//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! (written straight to stdout, so it shows without `--nocapture`) and then
//! fails the test if the criterion failed. Criteria run one at a time so
//! their wall-clock budgets are measured without interference.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{gradient_check, mann_whitney_auc, random_batch, ridge_logistic};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serumscope::annotate::Libraries;
use serumscope::dataset::*;
use serumscope::explain::*;
use serumscope::meta::{apply_exclusions, ExclusionPolicy, MetadataSchema};
use serumscope::models::*;
use serumscope::pipeline::{Pipeline, RunConfig};
use serumscope::report::demo::demo_report;
use serumscope::report::{render_structured, render_text};
use serumscope::spectra::*;

static SERIAL: Mutex<()> = Mutex::new(());

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Runs one criterion, prints its line and fails on a miss or an overrun.
fn criterion(id: u32, name: &str, budget: Option<Duration>, body: impl FnOnce() -> Outcome) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let elapsed = start.elapsed();
    let result = match (result, budget) {
        (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; over the {:.0} s budget", b.as_secs_f64())),
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!("[acceptance] {id:>2} {tag} {name} ({:.2} s): {detail}\n", elapsed.as_secs_f64());
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    if let Err(d) = result {
        panic!("criterion {id} failed: {d}");
    }
}

// ---------------------------------------------------------------- spectra

#[test]
fn c01_smoothing_reproduces_polynomials() {
    criterion(1, "smoothing reproduces low-degree polynomials", Some(Duration::from_secs(1)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for m in [2usize, 3, 4] {
            for order in [2usize, 3] {
                let sg = SavitzkyGolay::new(m, order).map_err(|e| e.to_string())?;
                for degree in 0..=order {
                    for _ in 0..5 {
                        let coef: Vec<f64> = (0..=degree).map(|_| rng.random_range(-3.0..3.0)).collect();
                        let y: Vec<f64> = (0..120)
                            .map(|i| {
                                let x = (i as f64 - 60.0) / 30.0;
                                coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
                            })
                            .collect();
                        let s = sg.smooth(&y).map_err(|e| e.to_string())?;
                        for i in m..y.len() - m {
                            worst = worst.max((s[i] - y[i]).abs());
                        }
                        cases += 1;
                    }
                }
            }
        }
        ensure(worst < 1e-9, format!("max interior error {worst:e}"))?;
        Ok(format!("{cases} polynomials, max interior error {worst:.1e}"))
    });
}

/// Centre row of the least-squares projection `(A^T A)^-1 A^T` for a
/// symmetric window, solved by SVD.
fn least_squares_weights(m: usize, order: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(2 * m + 1, order + 1, |r, c| (r as f64 - m as f64).powi(c as i32));
    let pinv = a.svd(true, true).pseudo_inverse(1e-14).unwrap();
    pinv.row(0).iter().copied().collect()
}

/// Literal single-pass despiking: threshold from median and MAD, spikes
/// replaced from the original neighbours.
fn despike_reference(y: &[f64], k: f64) -> Vec<f64> {
    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    };
    let med = median(y);
    let mad = median(&y.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
    let t = med + k * 1.4826 * mad;
    let n = y.len();
    (0..n)
        .map(|i| match i {
            _ if y[i] < t => y[i],
            0 => y[1],
            i if i == n - 1 => y[n - 2],
            i => (y[i - 1] + y[i + 1]) / 2.0,
        })
        .collect()
}

#[test]
fn c02_preprocessing_oracles() {
    criterion(2, "preprocessing oracles", Some(Duration::from_secs(10)), || {
        let sg = SavitzkyGolay::new(2, 2).map_err(|e| e.to_string())?;
        let ls = least_squares_weights(2, 2);
        let closed = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        let mut werr: f64 = 0.0;
        for ((a, b), c) in sg.central_weights().iter().zip(&ls).zip(closed) {
            werr = werr.max((a - b).abs()).max((a - c).abs());
        }
        ensure(werr < 1e-12, format!("weights differ by {werr:e}"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid: Vec<f64> = (0..300).map(|i| 400.0 + 4.0 * i as f64).collect();
        let mut spikes = 0;
        for n in 0..1000 {
            let mut y: Vec<f64> = grid.iter().map(|x| (x / 97.0).sin() + rng.random_range(-0.2..0.2)).collect();
            for _ in 0..rng.random_range(0..4) {
                let i = rng.random_range(0..y.len());
                y[i] += rng.random_range(5.0..50.0);
            }
            let s = Spectrum::with_stage(format!("S{n}"), 0, grid.clone(), y.clone(), Stage::BackgroundCorrected)
                .map_err(|e| e.to_string())?;
            let (out, replaced) = remove_cosmic_rays(&s, 8.0).map_err(|e| e.to_string())?;
            spikes += replaced.len();
            ensure(out.intensities() == despike_reference(&y, 8.0).as_slice(), format!("spectrum {n} differs from the reference"))?;
        }

        let mut nerr: f64 = 0.0;
        for n in 0..200 {
            let y: Vec<f64> = grid.iter().map(|x| 1.0 + (-(x - 1003.0f64).powi(2) / 20.0).exp() * rng.random_range(1.0..3.0)).collect();
            let c: f64 = rng.random_range(1e-3..1e3);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let a = Spectrum::with_stage(format!("N{n}"), 0, grid.clone(), y, Stage::Despiked).map_err(|e| e.to_string())?;
            let b = Spectrum::with_stage(format!("N{n}"), 0, grid.clone(), scaled, Stage::Despiked).map_err(|e| e.to_string())?;
            let na = normalize_to_phenylalanine(&a, (995.0, 1010.0), 1.0).map_err(|e| e.to_string())?;
            let nb = normalize_to_phenylalanine(&b, (995.0, 1010.0), 1.0).map_err(|e| e.to_string())?;
            for (p, q) in na.intensities().iter().zip(nb.intensities()) {
                nerr = nerr.max((p - q).abs());
            }
        }
        ensure(nerr < 1e-12, format!("normalization differs by {nerr:e} under scaling"))?;
        Ok(format!("weights err {werr:.1e}; 1000 spectra despiked identically ({spikes} points replaced); scale err {nerr:.1e}"))
    });
}

#[test]
fn c03_qc_recovers_planted_outliers() {
    criterion(3, "QC recovers planted outliers", Some(Duration::from_secs(30)), || {
        let cfg = SynthConfig::default();
        let c = generate_synthetic(&cfg, &MetadataSchema::compact(30), &SignalSpec::strong(), 3).map_err(|e| e.to_string())?;
        let pre = Preprocessor::new(PreprocessConfig::default()).map_err(|e| e.to_string())?;
        let processed = preprocess_all(&pre, &c.spectra).map_err(|e| e.to_string())?;
        let qc = run_qc(processed, |id| c.condition_of(id), 3.0).map_err(|e| e.to_string())?;
        let flagged: BTreeSet<String> = qc.condition_flagged_samples().into_iter().collect();
        let planted = c.outlier_ids();
        let tp = flagged.intersection(&planted).count();
        let precision = tp as f64 / flagged.len().max(1) as f64;
        let recall = tp as f64 / planted.len().max(1) as f64;
        let detail = format!(
            "{} patients, {} planted, {} flagged: precision {precision:.3}, recall {recall:.3}",
            c.records.len(),
            planted.len(),
            flagged.len()
        );
        ensure(precision == 1.0 && recall == 1.0 && !planted.is_empty(), detail.clone())?;
        Ok(detail)
    });
}

// ---------------------------------------------------------------- models

#[test]
fn c04_gradients_match_finite_differences() {
    criterion(4, "analytic gradients match central differences", Some(Duration::from_secs(60)), || {
        let data = random_batch(5, 24, 10, 4);
        let mut parts = Vec::new();
        let mut worst: f64 = 0.0;
        for v in Variant::ALL {
            let model = FusionModel::new(v, &Architecture::default(), 24, 10, 40).map_err(|e| e.to_string())?;
            let err = gradient_check(&model, &data, 1e-5);
            worst = worst.max(err);
            parts.push(format!("{} {err:.1e}", v.as_str()));
        }
        ensure(worst < 1e-4, parts.join(", "))?;
        Ok(parts.join(", "))
    });
}

/// Preprocessed, QC'd and exclusion-filtered CRC-vs-control cohort.
fn benchmark_cohort(signal: &SignalSpec, seed: u64) -> (Cohort, SplitPlan) {
    let cfg = SynthConfig { n_points: 176, ..Default::default() };
    let c = generate_synthetic(&cfg, &MetadataSchema::compact(30), signal, seed).unwrap();
    let pre = Preprocessor::new(PreprocessConfig::default()).unwrap();
    let qc = run_qc(preprocess_all(&pre, &c.spectra).unwrap(), |id| c.condition_of(id), 3.0).unwrap();
    let kept = apply_exclusions(c.records.clone(), &ExclusionPolicy::default()).unwrap().kept;
    let cohort = assemble(&qc.spectra, &kept, Task::CrcVsControl, Balance::Unbalanced, Aggregation::PatientMean, seed).unwrap();
    let plan = make_splits(&cohort, 5, seed).unwrap();
    (cohort, plan)
}

/// Ridge-logistic probe on both modalities, fitted on train + val.
fn linear_probe_auc(cohort: &Cohort, plan: &SplitPlan) -> f64 {
    let fit_rows: Vec<usize> = plan.train.iter().chain(&plan.val).copied().collect();
    let features = FeaturePipeline::fit(cohort, &fit_rows).unwrap();
    let joined = |rows: &[usize]| {
        let d = features.transform(cohort, rows).unwrap();
        (build_early_fusion(&d.spectra, &d.meta).unwrap(), d.labels)
    };
    let (x, y) = joined(&fit_rows);
    let (w, b) = ridge_logistic(&x, &y, 1.0);
    let (xt, yt) = joined(&plan.test);
    let scores: Vec<f64> = (&xt * &w).iter().map(|z| z + b).collect();
    mann_whitney_auc(&yt, &scores)
}

const SEEDS: u64 = 5;

#[test]
fn c05_separable_and_null_benchmarks() {
    criterion(5, "separable cohort is learned, null cohort is not", Some(Duration::from_secs(600)), || {
        let arch = Architecture::default();
        let mut strong = [0.0; 3];
        let mut strong_min = [f64::INFINITY; 3];
        let mut null = [0.0; 3];
        let mut probe = 0.0;
        for seed in 0..SEEDS {
            let tc = TrainConfig { seed, ..Default::default() };
            let (cohort, plan) = benchmark_cohort(&SignalSpec::strong(), seed);
            probe += linear_probe_auc(&cohort, &plan) / SEEDS as f64;
            for (k, v) in Variant::FUSION.into_iter().enumerate() {
                let auc = holdout_fusion(v, &arch, &tc, &cohort, &plan).unwrap().1.auc.unwrap();
                strong[k] += auc / SEEDS as f64;
                strong_min[k] = strong_min[k].min(auc);
            }
            let (cohort, plan) = benchmark_cohort(&SignalSpec::null(), seed);
            for (k, v) in Variant::FUSION.into_iter().enumerate() {
                null[k] += holdout_fusion(v, &arch, &tc, &cohort, &plan).unwrap().1.auc.unwrap() / SEEDS as f64;
            }
        }
        let names = Variant::FUSION.map(|v| v.as_str());
        let detail = format!(
            "probe {probe:.3}; strong mean (min) {}; null mean {}",
            (0..3).map(|k| format!("{} {:.3} ({:.3})", names[k], strong[k], strong_min[k])).collect::<Vec<_>>().join(", "),
            (0..3).map(|k| format!("{} {:.3}", names[k], null[k])).collect::<Vec<_>>().join(", "),
        );
        ensure(probe >= 0.95, format!("linear probe below 0.95: {detail}"))?;
        ensure(strong.iter().all(|&a| a >= 0.95), detail.clone())?;
        ensure(null.iter().all(|&a| (a - 0.5).abs() <= 0.07), detail.clone())?;
        Ok(detail)
    });
}

#[test]
fn c06_fusion_beats_single_modalities() {
    criterion(6, "early and joint fusion beat single modalities", None, || {
        let arch = Architecture::default();
        let mut mean = [0.0; 5];
        for seed in 0..SEEDS {
            let tc = TrainConfig { seed, ..Default::default() };
            let (cohort, plan) = benchmark_cohort(&SignalSpec::split_modalities(), seed);
            for (k, v) in Variant::ALL.into_iter().enumerate() {
                let r = cv_fusion(v, &arch, &tc, &cohort, &plan, CvScheme::StratifiedKFold).unwrap();
                mean[k] += r.pooled.auc.unwrap() / SEEDS as f64;
            }
        }
        let auc = |v: Variant| mean[Variant::ALL.iter().position(|&w| w == v).unwrap()];
        let best_single = auc(Variant::SpectraOnly).max(auc(Variant::MetaOnly));
        let detail = format!(
            "pooled 5-fold AUC over {SEEDS} seeds: {}; gains early {:+.3}, joint {:+.3}",
            Variant::ALL.iter().map(|&v| format!("{} {:.3}", v.as_str(), auc(v))).collect::<Vec<_>>().join(", "),
            auc(Variant::Early) - best_single,
            auc(Variant::Joint) - best_single,
        );
        ensure(auc(Variant::Early) >= best_single + 0.03 && auc(Variant::Joint) >= best_single + 0.03, detail.clone())?;
        Ok(detail)
    });
}

// ---------------------------------------------------------------- explain

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("f{i}")).collect()
}

fn interacting(r: &DMatrix<f64>) -> Vec<f64> {
    (0..r.nrows())
        .map(|i| {
            let x: Vec<f64> = r.row(i).iter().copied().collect();
            let mut z = 0.4 * x[0];
            for j in 1..x.len() {
                z += 0.3 * (j as f64).cos() * x[j] - 0.2 * x[j] * x[j - 1];
            }
            1.0 / (1.0 + (-z).exp())
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values by the subset-sum definition, mean imputation.
fn shapley_oracle(f: &dyn Fn(&DMatrix<f64>) -> Vec<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let m = x.len();
    let value = |mask: usize| {
        let row: Vec<f64> = (0..m).map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] }).collect();
        f(&DMatrix::from_row_slice(1, m, &row))[0]
    };
    let values: Vec<f64> = (0..1usize << m).map(value).collect();
    (0..m)
        .map(|i| {
            (0..1usize << m)
                .filter(|s| s >> i & 1 == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    factorial(k) * factorial(m - k - 1) / factorial(m) * (values[s | 1 << i] - values[s])
                })
                .sum()
        })
        .collect()
}

#[test]
fn c07_shap_exactness() {
    criterion(7, "SHAP exactness", Some(Duration::from_secs(120)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut kernel_err, mut oracle_err, mut eff_exact): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for m in 3..=10 {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let rows = DMatrix::from_fn(40, m, |_, _| rng.random_range(-1.0..1.0));
            let bg = Background::from_rows(&rows, 1).map_err(|e| e.to_string())?;
            let exact = shap_exact(&interacting, &x, &bg, &names(m), "p").map_err(|e| e.to_string())?;
            let kernel = shap_kernel(&interacting, &x, &bg, &names(m), "p", ((1 << m) - 2).max(2 * m + 2), 3).map_err(|e| e.to_string())?;
            let oracle = shapley_oracle(&interacting, &x, &bg.mean);
            for j in 0..m {
                kernel_err = kernel_err.max((exact.scores[j] - kernel.scores[j]).abs());
                oracle_err = oracle_err.max((exact.scores[j] - oracle[j]).abs());
            }
            eff_exact = eff_exact.max(exact.efficiency_residual().abs());
        }
        ensure(kernel_err < 1e-8, format!("kernel vs exact {kernel_err:e}"))?;
        ensure(oracle_err < 1e-10, format!("exact vs subset oracle {oracle_err:e}"))?;
        ensure(eff_exact < 1e-9, format!("exact efficiency residual {eff_exact:e}"))?;

        let m = 12;
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wl = w.clone();
        let linear = move |r: &DMatrix<f64>| (0..r.nrows()).map(|i| 0.3 + (0..m).map(|j| wl[j] * r[(i, j)]).sum::<f64>()).collect::<Vec<_>>();
        let a = shap_exact(&linear, &x, &Background::point(&b), &names(m), "p").map_err(|e| e.to_string())?;
        let lin_err = (0..m).map(|j| (a.scores[j] - w[j] * (x[j] - b[j])).abs()).fold(0.0, f64::max);
        ensure(lin_err < 1e-10, format!("linear closed form {lin_err:e}"))?;

        let m = 40;
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rows = DMatrix::from_fn(50, m, |_, _| rng.random_range(-1.0..1.0));
        let bg = Background::from_rows(&rows, 1).map_err(|e| e.to_string())?;
        let s = shap_kernel(&interacting, &x, &bg, &names(m), "p", 4096, 5).map_err(|e| e.to_string())?;
        let eff_sampled = s.efficiency_residual().abs();
        ensure(eff_sampled < 1e-3, format!("sampled efficiency residual {eff_sampled:e}"))?;
        Ok(format!(
            "kernel vs exact {kernel_err:.1e} (M 3..10), exact vs oracle {oracle_err:.1e}, linear {lin_err:.1e}, efficiency exact {eff_exact:.1e} sampled {eff_sampled:.1e}"
        ))
    });
}

#[test]
fn c08_lime_fidelity() {
    criterion(8, "LIME recovers a linear model", Some(Duration::from_secs(30)), || {
        let m = 40;
        let k = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w: Vec<f64> = (0..m).map(|j| if j % 4 == 0 { rng.random_range(0.5..3.0) * if j % 8 == 0 { 1.0 } else { -1.0 } } else { rng.random_range(-0.05..0.05) }).collect();
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wl = w.clone();
        let linear = move |r: &DMatrix<f64>| (0..r.nrows()).map(|i| -0.2 + (0..m).map(|j| wl[j] * r[(i, j)]).sum::<f64>()).collect::<Vec<_>>();
        let cfg = LimeConfig { top_k: k, seed: 3, ..Default::default() };
        let a = lime_explain(&linear, &x, &vec![FeatureKind::Numeric { sd: 1.0 }; m], &names(m), "p", &cfg)
            .map_err(|e| e.to_string())?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| w[j].abs().total_cmp(&w[i].abs()));
        let rel = order[..k].iter().map(|&j| (a.scores[j] - w[j]).abs() / w[j].abs()).fold(0.0, f64::max);
        let r2 = a.r_squared.unwrap_or(f64::NAN);
        let detail = format!("top-{k} max relative error {:.2}%, weighted R^2 {r2:.5}", 100.0 * rel);
        ensure(rel <= 0.05 && r2 >= 0.99, detail.clone())?;
        Ok(detail)
    });
}

// ---------------------------------------------------------------- metrics

#[test]
fn c09_metric_identities() {
    criterion(9, "metric identities", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels: Vec<u8> = (0..200).map(|_| rng.random_range(0..2u8)).collect();
        let scores: Vec<f64> = labels.iter().map(|&l| ((f64::from(l) * 0.25 + rng.random::<f64>()) * 20.0).round() / 20.0).collect();
        let r = evaluate(&labels, &scores, 0.6);
        let auc_err = (r.auc.unwrap() - mann_whitney_auc(&labels, &scores)).abs();
        ensure(auc_err < 1e-9, format!("AUC differs from Mann-Whitney by {auc_err:e}"))?;

        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&y, &s) in labels.iter().zip(&scores) {
            let call = s >= 0.6;
            tp += usize::from(y == 1 && call);
            fp += usize::from(y == 0 && call);
            fn_ += usize::from(y == 1 && !call);
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        let f1 = 2.0 * precision * recall / (precision + recall);
        ensure(r.precision == precision && r.recall == recall && r.f1 == f1, "threshold metrics differ from the confusion arithmetic")?;

        let n = 20;
        let group_labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let plan = SplitPlan::from_groups(&group_labels, &(0..n).collect::<Vec<_>>(), 5, 4).map_err(|e| e.to_string())?;
        let seen = Mutex::new(BTreeSet::new());
        let cv = cross_validate(&plan, &group_labels, CvScheme::Loocv, 0.5, |_, train, test| {
            assert_eq!((train.len(), test.len()), (n - 1, 1));
            seen.lock().unwrap().insert(test[0]);
            Ok(vec![0.5])
        })
        .map_err(|e| e.to_string())?;
        ensure(cv.folds.len() == n && seen.lock().unwrap().len() == n, format!("{} LOOCV folds", cv.folds.len()))?;
        Ok(format!("AUC err {auc_err:.1e}; precision/recall/F1 exact; LOOCV {} folds on {n} patients", cv.folds.len()))
    });
}

// ---------------------------------------------------------------- end to end

const SMALL: &str = r#"
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

fn run_all(out: &Path) -> Result<(), String> {
    let table: toml::Table = toml::from_str(SMALL).map_err(|e| e.to_string())?;
    let over = vec![("paths.output_dir".to_string(), format!("{:?}", out.to_string_lossy()))];
    let cfg = RunConfig::from_table(table, &over).map_err(|e| e.to_string())?;
    Pipeline::new(cfg).and_then(|p| p.run_all()).map(|_| ()).map_err(|e| e.to_string())
}

/// Metric CSVs and reports, keyed by path relative to the run directory.
fn compared_outputs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if p.is_dir() {
                stack.push(p);
            } else if (rel.starts_with("evaluate/") && rel.ends_with(".csv")) || rel.starts_with("report/") {
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn c10_end_to_end_determinism_and_goldens() {
    criterion(10, "run-all determinism and report goldens", None, || {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_all(a.path())?;
        run_all(b.path())?;
        let (oa, ob) = (compared_outputs(a.path()), compared_outputs(b.path()));
        ensure(oa.iter().map(|f| &f.0).eq(ob.iter().map(|f| &f.0)), "runs wrote different file sets")?;
        for ((name, x), (_, y)) in oa.iter().zip(&ob) {
            ensure(x == y, format!("{name} differs between runs"))?;
        }
        for want in ["models.csv", "forest.csv", "predictions.csv", ".report.txt", ".report.md"] {
            ensure(oa.iter().any(|f| f.0.ends_with(want)), format!("no {want} written"))?;
        }
        for (name, bytes) in oa.iter().filter(|f| f.0.ends_with(".report.txt")) {
            let text = String::from_utf8_lossy(bytes);
            ensure(text.contains(" risk for developing/suffering from CRC"), format!("{name} has no risk tier"))?;
            ensure(text.contains("features which could be false positives"), format!("{name} has no overlap section"))?;
        }

        let demo = demo_report(&Libraries::builtin()).map_err(|e| e.to_string())?;
        let text = render_text(&demo);
        for want in [
            "the patient is medium risk",
            "peaks suggesting the presence of a polyp: 6/10",
            "peaks suggesting the presence of CRC: 0/12",
            "names of features leading to potential false positives: acetate, organic acids",
        ] {
            ensure(text.contains(want), format!("demo report lacks {want:?}"))?;
        }
        let golden = |name: &str| std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap();
        ensure(text == golden("demo.report.txt"), "demo text report differs from the golden")?;
        ensure(render_structured(&demo) == golden("demo.report.md"), "demo structured report differs from the golden")?;
        Ok(format!("{} metric and report files byte-identical across runs; demo report matches goldens", oa.len()))
    });
}
