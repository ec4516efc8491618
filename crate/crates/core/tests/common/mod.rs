//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serumscope::models::train::{batch_loss, batch_loss_and_gradient};
use serumscope::models::{FusionModel, ModalData};

/// Max relative error of the analytic gradient against central differences
/// over every parameter. The floor keeps near-zero gradients from
/// dominating through rounding noise alone.
pub fn gradient_check(model: &FusionModel, data: &ModalData, h: f64) -> f64 {
    let (_, analytic) = batch_loss_and_gradient(model, data).unwrap();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let shapes: Vec<usize> = probe.parameters_mut().iter().map(|s| s.len()).collect();
    for (t, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let original = probe.parameters_mut()[t][i];
            probe.parameters_mut()[t][i] = original + h;
            let up = batch_loss(&probe, data).unwrap();
            probe.parameters_mut()[t][i] = original - h;
            let down = batch_loss(&probe, data).unwrap();
            probe.parameters_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

pub fn random_batch(n: usize, d_s: usize, d_m: usize, seed: u64) -> ModalData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = DMatrix::from_fn(n, d_s, |_, _| rng.random_range(-1.5..1.5));
    let xm = DMatrix::from_fn(n, d_m, |_, _| rng.random_range(-1.5..1.5));
    let labels = (0..n).map(|i| (i % 2) as u8).collect();
    ModalData::new(xs, xm, labels).unwrap()
}

/// O(n^2) Mann-Whitney estimate: P(score_pos > score_neg) + 0.5 P(tie).
pub fn mann_whitney_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// L2-regularized logistic regression by Newton iterations. Columns of `x`
/// should be standardized; the intercept is not penalized.
pub fn ridge_logistic(x: &DMatrix<f64>, y: &[u8], lambda: f64) -> (DVector<f64>, f64) {
    let (n, d) = x.shape();
    let mut a = DMatrix::from_element(n, d + 1, 1.0);
    a.columns_mut(0, d).copy_from(x);
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let mut w = DVector::zeros(d + 1);
    for _ in 0..50 {
        let p = (&a * &w).map(|z| 1.0 / (1.0 + (-z).exp()));
        let mut grad = a.transpose() * (&p - &yv);
        let mut penalty = DVector::from_element(d + 1, lambda);
        penalty[d] = 0.0;
        grad += penalty.component_mul(&w);
        let s = p.map(|p| (p * (1.0 - p)).max(1e-12));
        let mut hess = a.transpose() * DMatrix::from_diagonal(&s) * &a;
        for k in 0..d {
            hess[(k, k)] += lambda;
        }
        let step = hess.lu().solve(&grad).expect("regularized Hessian is invertible");
        w -= &step;
        if step.norm() < 1e-10 {
            break;
        }
    }
    (w.rows(0, d).into_owned(), w[d])
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
