use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_inputs, predict_many, predict_one, Attribution, Background, Method, Model};
use crate::error::{Error, Result};
use crate::linalg::{weighted_lstsq, weighted_ridge};

/// Exact enumeration visits 2^M coalitions.
pub const MAX_EXACT_FEATURES: usize = 20;

/// Row for coalition `mask`: present features from `x`, absent ones from
/// the background mean.
fn coalition_rows(x: &[f64], bg: &[f64], masks: &[Vec<bool>]) -> DMatrix<f64> {
    DMatrix::from_fn(masks.len(), x.len(), |r, j| if masks[r][j] { x[j] } else { bg[j] })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley values by summing over every coalition with weight
/// |S|!(M-|S|-1)!/M!.
pub fn shap_exact(model: &dyn Model, x: &[f64], background: &Background, names: &[String], sample_id: &str) -> Result<Attribution> {
    check_inputs(x, names, background)?;
    let m = x.len();
    if m > MAX_EXACT_FEATURES {
        return Err(Error::Explain(format!(
            "exact SHAP enumerates 2^{m} coalitions; use kernel SHAP for more than {MAX_EXACT_FEATURES} features"
        )));
    }
    let n = 1usize << m;
    let rows = DMatrix::from_fn(n, m, |s, j| if s >> j & 1 == 1 { x[j] } else { background.mean[j] });
    let v = predict_many(model, &rows);
    let weight: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phi = vec![0.0; m];
    for s in 0..n {
        let size = s.count_ones() as usize;
        if size == m {
            continue;
        }
        for (j, p) in phi.iter_mut().enumerate() {
            if s >> j & 1 == 0 {
                *p += weight[size] * (v[s | 1 << j] - v[s]);
            }
        }
    }
    Ok(Attribution {
        sample_id: sample_id.to_string(),
        method: Method::ShapExact,
        feature_names: names.to_vec(),
        scores: phi,
        base_value: v[0],
        prediction: v[n - 1],
        n_perturbations: n,
        seed: 0,
        r_squared: None,
    })
}

/// Kernel SHAP: Shapley-kernel weighted least squares over coalitions with
/// the empty and full coalitions imposed as constraints, so the scores sum
/// to `f(x) - base_value` exactly. With `n_samples >= 2^M - 2` every
/// coalition is enumerated and the result equals exact SHAP; otherwise
/// coalition pairs (S, complement) are drawn with sizes distributed as the
/// kernel.
pub fn shap_kernel(
    model: &dyn Model,
    x: &[f64],
    background: &Background,
    names: &[String],
    sample_id: &str,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    check_inputs(x, names, background)?;
    let m = x.len();
    if n_samples < 2 * m + 2 {
        return Err(Error::Explain(format!("kernel SHAP needs at least 2M+2 = {} samples, got {n_samples}", 2 * m + 2)));
    }
    let base = predict_one(model, &background.mean);
    let full = predict_one(model, x);
    let delta = full - base;
    let mut attribution = Attribution {
        sample_id: sample_id.to_string(),
        method: Method::ShapKernel,
        feature_names: names.to_vec(),
        scores: vec![0.0; m],
        base_value: base,
        prediction: full,
        n_perturbations: n_samples,
        seed,
        r_squared: None,
    };
    if m == 1 {
        attribution.scores[0] = delta;
        return Ok(attribution);
    }

    let enumerate = m < usize::BITS as usize - 1 && (1usize << m) - 2 <= n_samples;
    let (masks, weights) = if enumerate { all_coalitions(m) } else { sampled_coalitions(m, n_samples, seed) };
    let v = predict_many(model, &coalition_rows(x, &background.mean, &masks));

    // Eliminate the last feature through the sum constraint.
    let last = m - 1;
    let design = DMatrix::from_fn(masks.len(), last, |r, j| f64::from(u8::from(masks[r][j])) - f64::from(u8::from(masks[r][last])));
    let rhs = DVector::from_fn(masks.len(), |r, _| v[r] - base - f64::from(u8::from(masks[r][last])) * delta);
    let w = DVector::from_vec(weights);
    let beta = match weighted_lstsq(&design, &rhs, &w) {
        Some(b) => b,
        None => {
            log::warn!("kernel SHAP regression for {sample_id} is singular; using a ridge fallback");
            weighted_ridge(&design, &rhs, &w, 1e-8 * w.sum().max(1.0))
                .ok_or_else(|| Error::Explain("kernel SHAP ridge fallback failed".into()))?
        }
    };
    for j in 0..last {
        attribution.scores[j] = beta[j];
    }
    attribution.scores[last] = delta - beta.sum();
    Ok(attribution)
}

fn kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

fn all_coalitions(m: usize) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut masks = Vec::new();
    let mut weights = Vec::new();
    for s in 1..(1usize << m) - 1 {
        let mask: Vec<bool> = (0..m).map(|j| s >> j & 1 == 1).collect();
        weights.push(kernel_weight(m, s.count_ones() as usize));
        masks.push(mask);
    }
    (masks, weights)
}

/// Paired draws; repeated coalitions are merged and weighted by count,
/// since the sizes are already drawn in proportion to the kernel.
fn sampled_coalitions(m: usize, n_samples: usize, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size_mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    let total: f64 = size_mass.iter().sum();
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for _ in 0..n_samples.div_ceil(2) {
        let mut u = rng.random::<f64>() * total;
        let mut size = m - 1;
        for (i, &p) in size_mass.iter().enumerate() {
            if u < p {
                size = i + 1;
                break;
            }
            u -= p;
        }
        let mut mask = vec![false; m];
        for j in sample(&mut rng, m, size) {
            mask[j] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
        *counts.entry(mask).or_default() += 1.0;
        *counts.entry(complement).or_default() += 1.0;
    }
    counts.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn constant_model_gets_zero_scores() {
        let f = |r: &DMatrix<f64>| vec![2.5; r.nrows()];
        let bg = Background::point(&[0.0; 4]);
        let a = shap_kernel(&f, &[1.0, 2.0, 3.0, 4.0], &bg, &names(4), "s", 64, 1).unwrap();
        assert!(a.scores.iter().all(|s| s.abs() < 1e-12));
        assert_eq!(a.base_value, 2.5);
        let e = shap_exact(&f, &[1.0, 2.0, 3.0, 4.0], &bg, &names(4), "s").unwrap();
        assert!(e.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn too_many_features_for_exact_is_refused() {
        let f = |r: &DMatrix<f64>| vec![0.0; r.nrows()];
        let x = vec![0.0; 21];
        let err = shap_exact(&f, &x, &Background::point(&x), &names(21), "s").unwrap_err();
        assert!(err.to_string().contains("kernel SHAP"));
    }

    #[test]
    fn kernel_needs_enough_samples() {
        let f = |r: &DMatrix<f64>| vec![0.0; r.nrows()];
        let x = vec![0.0; 5];
        assert!(shap_kernel(&f, &x, &Background::point(&x), &names(5), "s", 11, 0).is_err());
    }

    #[test]
    fn kernel_weights_match_closed_form() {
        // M = 4, |S| = 1: 3 / (4 * 1 * 3) = 0.25.
        assert!((kernel_weight(4, 1) - 0.25).abs() < 1e-15);
        assert!((kernel_weight(4, 2) - 3.0 / 24.0).abs() < 1e-15);
    }
}
