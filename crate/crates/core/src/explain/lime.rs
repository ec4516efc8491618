use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{predict_many, predict_one, Attribution, Method, Model};
use crate::error::{Error, Result};
use crate::linalg::{weighted_lstsq, weighted_ridge};

/// How a feature is perturbed around the explained sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Gaussian noise with this standard deviation.
    Numeric { sd: f64 },
    /// Two-level indicator (in scaled units); flipped with the configured
    /// probability.
    Binary { off: f64, on: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    /// Proximity kernel width; `None` means 0.75 * sqrt(M).
    pub kernel_width: Option<f64>,
    /// Features kept by the surrogate.
    pub top_k: usize,
    pub flip_probability: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig { n_perturbations: 2000, kernel_width: None, top_k: 10, flip_probability: 0.3, seed: 0 }
    }
}

/// Minimum perturbation count accepted.
pub const MIN_PERTURBATIONS: usize = 50;

/// Local linear surrogate around `x`. Perturbations are weighted by
/// exp(-d^2 / width^2) with Euclidean d in the model's (scaled) input space;
/// a weighted fit on all features selects the `top_k` largest coefficients,
/// which are then refitted alone. Scores are the refitted coefficients and
/// zero elsewhere.
pub fn lime_explain(
    model: &dyn Model,
    x: &[f64],
    kinds: &[FeatureKind],
    names: &[String],
    sample_id: &str,
    cfg: &LimeConfig,
) -> Result<Attribution> {
    let m = x.len();
    if kinds.len() != m || names.len() != m || m == 0 {
        return Err(Error::Shape(format!("{m} features, {} kinds, {} names", kinds.len(), names.len())));
    }
    if cfg.n_perturbations < MIN_PERTURBATIONS {
        return Err(Error::Explain(format!("LIME needs at least {MIN_PERTURBATIONS} perturbations")));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (m as f64).sqrt());
    if !(width > 0.0) {
        return Err(Error::Explain("LIME kernel width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_perturbations;
    let mut samples = DMatrix::zeros(n, m);
    for i in 0..n {
        for (j, kind) in kinds.iter().enumerate() {
            samples[(i, j)] = match *kind {
                FeatureKind::Numeric { sd } => x[j] + sd * rng.sample::<f64, _>(StandardNormal),
                FeatureKind::Binary { off, on } => {
                    let at_on = (x[j] - on).abs() < (x[j] - off).abs();
                    let flip = rng.random::<f64>() < cfg.flip_probability;
                    if at_on != flip {
                        on
                    } else {
                        off
                    }
                }
            };
        }
    }
    let y = DVector::from_vec(predict_many(model, &samples));
    let weights = DVector::from_fn(n, |i, _| {
        let d2: f64 = (0..m).map(|j| (samples[(i, j)] - x[j]).powi(2)).sum();
        if width.is_infinite() {
            1.0
        } else {
            (-d2 / (width * width)).exp()
        }
    });
    let delta = DMatrix::from_fn(n, m, |i, j| samples[(i, j)] - x[j]);
    let wsum = weights.sum();
    for j in 0..m {
        let mean = (0..n).map(|i| weights[i] * delta[(i, j)]).sum::<f64>() / wsum;
        let var = (0..n).map(|i| weights[i] * (delta[(i, j)] - mean).powi(2)).sum::<f64>() / wsum;
        if !(var > 1e-300) {
            return Err(Error::DegeneratePerturbation(names[j].clone()));
        }
    }

    let prediction = predict_one(model, x);
    let k = cfg.top_k.clamp(1, m);
    let all: Vec<usize> = (0..m).collect();
    let first = fit(&delta, &y, &weights, &all)?;
    let keep: Vec<usize> = if k == m {
        all
    } else {
        let mut idx = all;
        idx.sort_by(|&a, &b| first.1[b].abs().total_cmp(&first.1[a].abs()).then_with(|| names[a].cmp(&names[b])));
        idx.truncate(k);
        idx.sort_unstable();
        idx
    };
    let (intercept, coef, r2) = fit(&delta, &y, &weights, &keep)?;
    let mut scores = vec![0.0; m];
    for (c, &j) in coef.iter().zip(&keep) {
        scores[j] = *c;
    }
    Ok(Attribution {
        sample_id: sample_id.to_string(),
        method: Method::Lime,
        feature_names: names.to_vec(),
        scores,
        base_value: intercept,
        prediction,
        n_perturbations: n,
        seed: cfg.seed,
        r_squared: r2,
    })
}

/// Weighted least squares of `y` on the selected columns plus intercept.
/// Returns (intercept, coefficients, weighted R^2). Falls back to a small
/// ridge when the design is rank deficient (more features than samples).
fn fit(delta: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, cols: &[usize]) -> Result<(f64, Vec<f64>, Option<f64>)> {
    let n = delta.nrows();
    let design = DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { delta[(i, cols[j - 1])] });
    let beta = match weighted_lstsq(&design, y, w) {
        Some(b) => b,
        None => weighted_ridge(&design, y, w, 1e-6 * w.sum())
            .ok_or_else(|| Error::Explain("LIME surrogate fit failed".into()))?,
    };
    let wsum = w.sum();
    let ybar = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let total: f64 = (0..n).map(|i| w[i] * (y[i] - ybar).powi(2)).sum();
    let fitted = &design * &beta;
    let resid: f64 = (0..n).map(|i| w[i] * (y[i] - fitted[i]).powi(2)).sum();
    let scale = (0..n).map(|i| w[i] * y[i] * y[i]).sum::<f64>().max(f64::MIN_POSITIVE);
    let r2 = if total > 1e-24 * scale { Some(1.0 - resid / total) } else { None };
    if r2.is_none() {
        // Constant response: the surrogate has nothing to explain.
        return Ok((ybar, vec![0.0; cols.len()], None));
    }
    Ok((beta[0], beta.iter().skip(1).copied().collect(), r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn constant_model_has_zero_coefficients_and_no_r2() {
        let f = |r: &DMatrix<f64>| vec![0.3; r.nrows()];
        let kinds = vec![FeatureKind::Numeric { sd: 1.0 }; 3];
        let a = lime_explain(&f, &[0.0; 3], &kinds, &names(3), "s", &LimeConfig { n_perturbations: 100, ..Default::default() }).unwrap();
        assert!(a.scores.iter().all(|&s| s == 0.0));
        assert!(a.r_squared.is_none());
    }

    #[test]
    fn infinite_width_without_sparsity_recovers_a_linear_model() {
        let w = [0.5, -2.0, 0.0, 1.25];
        let f = move |r: &DMatrix<f64>| (0..r.nrows()).map(|i| 0.1 + (0..4).map(|j| w[j] * r[(i, j)]).sum::<f64>()).collect();
        let kinds = vec![FeatureKind::Numeric { sd: 1.0 }; 4];
        let cfg = LimeConfig { n_perturbations: 200, kernel_width: Some(f64::INFINITY), top_k: 4, ..Default::default() };
        let a = lime_explain(&f, &[1.0, 0.0, -1.0, 2.0], &kinds, &names(4), "s", &cfg).unwrap();
        for j in 0..4 {
            assert!((a.scores[j] - w[j]).abs() < 1e-6);
        }
        assert!(a.r_squared.unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn zero_spread_feature_is_named_in_the_error() {
        let f = |r: &DMatrix<f64>| vec![0.0; r.nrows()];
        let kinds = vec![FeatureKind::Numeric { sd: 1.0 }, FeatureKind::Numeric { sd: 0.0 }];
        let err = lime_explain(&f, &[0.0; 2], &kinds, &names(2), "s", &LimeConfig { n_perturbations: 60, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::DegeneratePerturbation(ref n) if n == "f1"));
    }

    #[test]
    fn too_few_perturbations_is_an_error() {
        let f = |r: &DMatrix<f64>| vec![0.0; r.nrows()];
        let kinds = vec![FeatureKind::Numeric { sd: 1.0 }];
        assert!(lime_explain(&f, &[0.0], &kinds, &names(1), "s", &LimeConfig { n_perturbations: 49, ..Default::default() }).is_err());
    }
}
