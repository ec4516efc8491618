//! Train-only input scaling for both modalities.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::train::ModalData;
use crate::explain::FeatureKind;
use crate::dataset::Cohort;
use crate::error::Result;
use crate::meta::{MetaEncoder, PatientRecord, ScalerParam};

/// Per-column standardization with population statistics. Constant
/// columns keep unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub params: Vec<ScalerParam>,
}

impl ColumnScaler {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let params = x
            .column_iter()
            .map(|c| {
                let mean = c.sum() / n;
                let std = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                ScalerParam { mean, std: if std > 1e-12 { std } else { 1.0 } }
            })
            .collect();
        ColumnScaler { params }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.params[j].mean) / self.params[j].std)
    }
}

/// Spectral scaler and metadata encoder fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub spectral: ColumnScaler,
    pub meta: MetaEncoder,
    pub wavenumbers: Vec<f64>,
}

impl FeaturePipeline {
    /// The metadata encoder sees each training patient once, whatever the
    /// number of spectral rows per patient.
    pub fn fit(cohort: &Cohort, rows: &[usize]) -> Result<Self> {
        let spectral = ColumnScaler::fit(&cohort.spectra.select_rows(rows.iter()));
        let patients: BTreeSet<usize> = rows.iter().map(|&i| cohort.row_patient[i]).collect();
        let records: Vec<PatientRecord> = patients.into_iter().map(|p| cohort.records[p].clone()).collect();
        let meta = MetaEncoder::fit(&records)?;
        Ok(FeaturePipeline { spectral, meta, wavenumbers: cohort.wavenumbers.clone() })
    }

    pub fn transform(&self, cohort: &Cohort, rows: &[usize]) -> Result<ModalData> {
        let spectra = self.spectral.transform(&cohort.spectra.select_rows(rows.iter()));
        let records: Vec<PatientRecord> = rows.iter().map(|&i| cohort.records[cohort.row_patient[i]].clone()).collect();
        let meta = self.meta.transform(&records).matrix;
        ModalData::new(spectra, meta, rows.iter().map(|&i| cohort.labels[i]).collect())
    }

    /// `V1 .. Vd`, one per grid point in axis order.
    pub fn spectral_names(&self) -> Vec<String> {
        (1..=self.wavenumbers.len()).map(|i| format!("V{i}")).collect()
    }

    pub fn meta_names(&self) -> &[String] {
        self.meta.feature_names()
    }

    /// Spectral names followed by metadata names: the column order of the
    /// concatenated input.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.spectral_names();
        names.extend(self.meta_names().iter().cloned());
        names
    }

    /// Perturbation model of every input column in scaled units: spectral
    /// and continuous metadata columns are unit Gaussian, indicators move
    /// between their two scaled levels.
    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        let mut kinds = vec![FeatureKind::Numeric { sd: 1.0 }; self.wavenumbers.len()];
        for (binary, p) in self.meta.binary_columns().into_iter().zip(self.meta.scaler_params()) {
            kinds.push(if binary {
                FeatureKind::Binary { off: -p.mean / p.std, on: (1.0 - p.mean) / p.std }
            } else {
                FeatureKind::Numeric { sd: 1.0 }
            });
        }
        kinds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_gives_zero_mean_unit_std_and_zeroes_constants() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]);
        let z = ColumnScaler::fit(&x).transform(&x);
        let c0: Vec<f64> = z.column(0).iter().copied().collect();
        assert!(c0.iter().sum::<f64>().abs() < 1e-12);
        assert!((c0.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
    }
}
