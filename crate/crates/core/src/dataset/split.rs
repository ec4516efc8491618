use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Cohort;
use crate::error::{Error, Result};

/// Row-index partitions of a cohort. Every partition is made over patients,
/// so replicate rows of one patient never straddle train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Test rows of each stratified fold.
    pub folds: Vec<Vec<usize>>,
    /// Test rows of each leave-one-patient-out round.
    pub loocv: Vec<Vec<usize>>,
    n_rows: usize,
}

impl SplitPlan {
    /// Group-level planning. `group_labels[g]` is the class of patient `g`,
    /// `row_group[i]` the patient of row `i`.
    pub fn from_groups(group_labels: &[u8], row_group: &[usize], k: usize, seed: u64) -> Result<Self> {
        let n = group_labels.len();
        if n < 10 {
            return Err(Error::Split(format!("need at least 10 patients, got {n}")));
        }
        if k < 2 || k > n {
            return Err(Error::Split(format!("fold count {k} must lie in 2..={n}")));
        }
        if let Some(&g) = row_group.iter().find(|&&g| g >= n) {
            return Err(Error::Split(format!("row refers to unknown patient {g}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = class_members(group_labels, &mut rng);

        let part = holdout(&classes, n);

        let mut group_fold = vec![0usize; n];
        let mut next = 0usize;
        for members in &classes {
            for &g in members {
                group_fold[g] = next % k;
                next += 1;
            }
        }

        let rows_where = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
            (0..row_group.len()).filter(|&i| pred(row_group[i])).collect()
        };
        let mut loocv = vec![Vec::new(); n];
        for (i, &g) in row_group.iter().enumerate() {
            loocv[g].push(i);
        }
        loocv.retain(|rows| !rows.is_empty());
        Ok(SplitPlan {
            seed,
            train: rows_where(&|g| part[g] == 0),
            val: rows_where(&|g| part[g] == 1),
            test: rows_where(&|g| part[g] == 2),
            folds: (0..k).map(|f| rows_where(&|g| group_fold[g] == f)).collect(),
            loocv,
            n_rows: row_group.len(),
        })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// (train rows, test rows) of fold `f`.
    pub fn fold(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        complement(&self.folds[f], self.n_rows)
    }

    /// (train rows, test rows) of leave-one-out round `r`.
    pub fn loocv_round(&self, r: usize) -> (Vec<usize>, Vec<usize>) {
        complement(&self.loocv[r], self.n_rows)
    }
}

/// Stratified holdout, k-fold and leave-one-patient-out plans for a cohort.
pub fn make_splits(cohort: &Cohort, k: usize, seed: u64) -> Result<SplitPlan> {
    let mut group_labels = vec![0u8; cohort.n_patients()];
    for (&p, &y) in cohort.row_patient.iter().zip(&cohort.labels) {
        group_labels[p] = y;
    }
    SplitPlan::from_groups(&group_labels, &cohort.row_patient, k, seed)
}

fn class_members(labels: &[u8], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<u8> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for c in seen {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&g| labels[g] == c).collect();
        members.shuffle(rng);
        classes.push(members);
    }
    classes
}

const HOLDOUT: [f64; 3] = [0.7, 0.1, 0.2];

/// Per-class floor/ceil apportionment of train/val/test. Each class gets
/// within one of its exact share in every set; which sets take the rounded
/// up units is steered toward the overall 70/10/20 sizes.
fn holdout(classes: &[Vec<usize>], n: usize) -> Vec<u8> {
    let train = (HOLDOUT[0] * n as f64).round() as usize;
    let val = (HOLDOUT[1] * n as f64).round() as usize;
    let totals = [train, val, n - train - val];
    let mut assigned = [0usize; 3];
    let mut seen = 0usize;
    let mut part = vec![0u8; n];
    for members in classes {
        let m = members.len();
        seen += m;
        let quota: Vec<f64> = HOLDOUT.iter().map(|f| f * m as f64).collect();
        let mut count: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
        let extra = m - count.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).filter(|&s| quota[s] > count[s] as f64).collect();
        let deficit = |s: usize| totals[s] as f64 * seen as f64 / n as f64 - (assigned[s] + count[s]) as f64;
        order.sort_by(|&a, &b| deficit(b).total_cmp(&deficit(a)).then(a.cmp(&b)));
        for &s in order.iter().take(extra) {
            count[s] += 1;
        }
        let mut it = members.iter();
        for (s, &c) in count.iter().enumerate() {
            for &g in it.by_ref().take(c) {
                part[g] = s as u8;
            }
            assigned[s] += c;
        }
    }
    part
}

fn complement(test: &[usize], n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut mask = vec![false; n];
    test.iter().for_each(|&i| mask[i] = true);
    ((0..n).filter(|&i| !mask[i]).collect(), test.to_vec())
}
