use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use serumscope::pipeline::{held_out_patients, Pipeline, RunConfig, RunManifest, SplitRecord};

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

fn small(out: &Path, jobs: usize) -> RunConfig {
    let table: toml::Table = toml::from_str(SMALL).unwrap();
    let over = vec![
        ("paths.output_dir".to_string(), format!("{:?}", out.to_string_lossy())),
        ("jobs".to_string(), jobs.to_string()),
    ];
    RunConfig::from_table(table, &over).unwrap()
}

/// Relative path -> bytes of every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn run_all_is_byte_identical_across_runs_and_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = Pipeline::new(small(a.path(), 1)).unwrap().run_all().unwrap();
    let mb = Pipeline::new(small(b.path(), 3)).unwrap().run_all().unwrap();
    assert_eq!(ma, mb);
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs");
    }
    assert!(sa.keys().any(|k| k.ends_with(".report.md")));
    assert!(sa.keys().any(|k| k.ends_with("models.csv")));
}

#[test]
fn manifests_cover_artifacts_and_stages_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    let p = Pipeline::new(cfg.clone()).unwrap();
    for m in p.run_all().unwrap() {
        assert_eq!(m.config_hash, cfg.hash());
        assert_eq!(RunManifest::read(dir.path(), &m.stage).unwrap(), m);
        for a in &m.artifacts {
            let path = dir.path().join(&a.path);
            assert_eq!(serumscope::pipeline::sha256_file(&path).unwrap(), a.sha256, "{}", a.path);
        }
    }
    // The QC table has one row per replicate.
    let spectra = std::fs::read_to_string(dir.path().join("preprocess/spectra.csv")).unwrap();
    let qc = std::fs::read_to_string(dir.path().join("preprocess/qc.csv")).unwrap();
    let replicates = spectra.lines().next().unwrap().split(',').count() - 1;
    assert_eq!(qc.lines().count() - 1, replicates);

    // Explained patients never took part in fitting any model.
    let splits: Vec<SplitRecord> = cfg
        .cohort
        .tasks
        .iter()
        .map(|t| serde_json::from_slice(&std::fs::read(dir.path().join("train").join(t.as_str()).join("split.json")).unwrap()).unwrap())
        .collect();
    let explained = std::fs::read_to_string(dir.path().join("explain/patients.txt")).unwrap();
    for id in explained.lines() {
        for s in &splits {
            assert!(!s.train_patients.iter().chain(&s.val_patients).any(|p| p == id), "{id} was used in training");
        }
    }
}

#[test]
fn held_out_selection_is_the_set_difference() {
    let plan = serumscope::dataset::SplitPlan::from_groups(&[0, 1].repeat(6), &(0..12).collect::<Vec<_>>(), 2, 0).unwrap();
    let s = |task: &str, tr: &[&str], va: &[&str], te: &[&str]| SplitRecord {
        task: serde_json::from_str(&format!("\"{task}\"")).unwrap(),
        train_patients: tr.iter().map(|x| x.to_string()).collect(),
        val_patients: va.iter().map(|x| x.to_string()).collect(),
        test_patients: te.iter().map(|x| x.to_string()).collect(),
        plan: plan.clone(),
    };
    let splits = [
        s("polyp_vs_control", &["a", "b"], &["c"], &["d", "e"]),
        s("crc_vs_control", &["d", "f"], &["g"], &["a", "h"]),
    ];
    assert_eq!(held_out_patients(&splits), vec!["e", "h"]);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_serumscope")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    // Configuration errors exit with 2.
    assert_eq!(cli(&["--output-dir", &out, "--set", "split.k=1", "synth"]).status.code(), Some(2));
    assert_eq!(cli(&["--output-dir", &out, "--set", "no_such_key=1", "synth"]).status.code(), Some(2));
    assert_eq!(cli(&["--output-dir", &out, "--set", "oops", "synth"]).status.code(), Some(2));
    // Missing inputs are data errors: 3.
    assert_eq!(cli(&["--output-dir", &out, "preprocess"]).status.code(), Some(3));
    let ok = cli(&["--output-dir", &out, "--set", "synth.n_patients=40", "--set", "synth.n_points=60", "-q", "synth"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("synth/manifest.json").exists());
}
