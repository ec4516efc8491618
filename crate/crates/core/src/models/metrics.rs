//! Threshold metrics, ROC/AUC and mean ± std summaries.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// `num / den`, or 0 when the denominator is empty.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl Confusion {
    /// Positive call when `score >= threshold`.
    pub fn from_scores(labels: &[u8], scores: &[f64], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&y, &s) in labels.iter().zip(scores) {
            match (y == 1, s >= threshold) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_of(self.precision(), self.recall())
    }

    /// Metrics with the control class treated as positive.
    pub fn swapped(&self) -> Confusion {
        Confusion { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

/// ROC points from sweeping every distinct score, highest first, starting
/// at (0, 0). `None` unless both classes are present.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Option<Vec<(f64, f64)>> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Some(points)
}

/// Trapezoidal area under a curve given in increasing x order.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// AUC, or the reason it is undefined.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64, String> {
    roc_curve(labels, scores)
        .map(|pts| trapezoid(&pts))
        .ok_or_else(|| "AUC undefined: evaluation set contains a single class".to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub threshold: f64,
    pub confusion: Confusion,
    pub accuracy: f64,
    /// Disease class as positive.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    /// Why `auc` is missing.
    pub auc_note: Option<String>,
    pub roc_points: Vec<(f64, f64)>,
    pub control: ClassMetrics,
    pub disease: ClassMetrics,
}

/// Scores are disease probabilities; labels are 0 (control) / 1 (disease).
pub fn evaluate(labels: &[u8], scores: &[f64], threshold: f64) -> EvalReport {
    assert_eq!(labels.len(), scores.len(), "labels and scores differ in length");
    let c = Confusion::from_scores(labels, scores, threshold);
    let class = |c: Confusion| ClassMetrics {
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        support: c.tp + c.fn_,
    };
    let roc = roc_curve(labels, scores);
    let (auc, auc_note) = match &roc {
        Some(pts) => (Some(trapezoid(pts)), None),
        None => (None, Some(roc_auc(labels, scores).unwrap_err())),
    };
    EvalReport {
        n: labels.len(),
        threshold,
        confusion: c,
        accuracy: c.accuracy(),
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        auc,
        auc_note,
        roc_points: roc.unwrap_or_default(),
        control: class(c.swapped()),
        disease: class(c),
    }
}

/// Arithmetic mean and sample standard deviation (0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }

    /// `0.84 ± 0.046` style.
    pub fn fmt_fraction(&self) -> String {
        format!("{:.2} ± {:.3}", self.mean, self.std)
    }

    /// `88.60% ± 9.48%` style.
    pub fn fmt_percent(&self) -> String {
        format!("{:.2}% ± {:.2}%", 100.0 * self.mean, 100.0 * self.std)
    }
}
