//! CSV renderings of evaluation results.

use super::cv::CvSummary;
use super::metrics::EvalReport;
use crate::error::Result;

pub const MODEL_TABLE_HEADER: [&str; 6] = ["Model", "Accuracy", "Precision", "Recall", "AUC", "F1 Score"];

fn fixed(v: f64) -> String {
    format!("{v:.3}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| crate::Error::Format { what: "csv table", detail: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

/// One row per model: accuracy, precision, recall, AUC, F1. A missing AUC
/// is written as `NA`.
pub fn model_table(rows: &[(String, EvalReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MODEL_TABLE_HEADER)?;
    for (name, r) in rows {
        let auc = r.auc.map_or_else(|| "NA".to_string(), fixed);
        w.write_record([name.clone(), fixed(r.accuracy), fixed(r.precision), fixed(r.recall), auc, fixed(r.f1)])?;
    }
    finish(w)
}

/// Holdout and cross-validation results of one forest sub-model.
#[derive(Debug, Clone)]
pub struct ForestRow {
    pub model: String,
    pub holdout: EvalReport,
    pub kfold: CvSummary,
    pub k: usize,
    pub loocv: Option<CvSummary>,
}

/// Two rows per sub-model (Control, Disease) with per-class precision,
/// recall and F1; accuracy and the cross-validation columns appear on the
/// first row only. The k-fold column is disease-class precision; the
/// leave-one-out column is fold accuracy, since precision of a
/// single-sample fold is undefined whenever it is called negative.
pub fn forest_table(rows: &[ForestRow]) -> Result<String> {
    let k = rows.first().map_or(5, |r| r.k);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Model", "Label", "Precision", "Recall", "F1", "Accuracy", &format!("{k}-fold CV Precision"), "LOOCV Accuracy"])?;
    for r in rows {
        let h = &r.holdout;
        let loocv = r.loocv.as_ref().map_or_else(|| "NA".to_string(), |s| s.accuracy.fmt_percent());
        let c = &h.control;
        w.write_record([
            r.model.clone(),
            "Control".into(),
            format!("{:.2}", c.precision),
            format!("{:.2}", c.recall),
            format!("{:.2}", c.f1),
            format!("{:.2}%", 100.0 * h.accuracy),
            r.kfold.precision.fmt_fraction(),
            loocv,
        ])?;
        let d = &h.disease;
        w.write_record([
            String::new(),
            "Disease".into(),
            format!("{:.2}", d.precision),
            format!("{:.2}", d.recall),
            format!("{:.2}", d.f1),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::metrics::{evaluate, MeanStd};

    #[test]
    fn model_table_columns() {
        let r = evaluate(&[0, 1, 1, 0], &[0.1, 0.9, 0.4, 0.2], 0.5);
        let t = model_table(&[("Early Fusion".into(), r)]).unwrap();
        let mut lines = t.lines();
        assert_eq!(lines.next(), Some("Model,Accuracy,Precision,Recall,AUC,F1 Score"));
        assert_eq!(lines.next(), Some("Early Fusion,0.750,1.000,0.500,1.000,0.667"));
    }

    #[test]
    fn forest_table_has_two_rows_per_model() {
        let h = evaluate(&[0, 0, 1, 1], &[0.1, 0.6, 0.7, 0.8], 0.5);
        let m = MeanStd::of(&[0.8, 0.88]).unwrap();
        let s = CvSummary { accuracy: m, precision: m, recall: m, f1: m, auc: None };
        let t = forest_table(&[ForestRow { model: "RF Both".into(), holdout: h, kfold: s.clone(), k: 5, loocv: Some(s) }]).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "RF Both,Control,1.00,0.50,0.67,75.00%,0.84 ± 0.057,84.00% ± 5.66%");
        assert_eq!(lines[2], ",Disease,0.67,1.00,0.80,,,");
    }
}
