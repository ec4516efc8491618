use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serumscope::explain::*;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("f{i:02}")).collect()
}

fn linear(w: Vec<f64>, c: f64) -> impl Fn(&DMatrix<f64>) -> Vec<f64> + Sync {
    move |r: &DMatrix<f64>| (0..r.nrows()).map(|i| c + (0..w.len()).map(|j| w[j] * r[(i, j)]).sum::<f64>()).collect()
}

/// A smooth model with interactions, so Shapley values are not trivial.
fn interacting(r: &DMatrix<f64>) -> Vec<f64> {
    (0..r.nrows())
        .map(|i| {
            let x: Vec<f64> = r.row(i).iter().copied().collect();
            let mut z = 0.3 * x[0] - 0.7 * x[1] * x[2];
            for (j, v) in x.iter().enumerate().skip(3) {
                z += 0.2 * (j as f64).sin() * v + 0.1 * v * x[j - 1];
            }
            1.0 / (1.0 + (-z).exp())
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Literal Shapley sum over subsets, written without the bitmask tricks
/// of the library implementation.
fn subset_oracle(f: &dyn Fn(&DMatrix<f64>) -> Vec<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let m = x.len();
    let value = |set: &[usize]| {
        let row: Vec<f64> = (0..m).map(|j| if set.contains(&j) { x[j] } else { b[j] }).collect();
        f(&DMatrix::from_row_slice(1, m, &row))[0]
    };
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        for mask in 0..(1usize << others.len()) {
            let s: Vec<usize> = others.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &j)| j).collect();
            let mut with = s.clone();
            with.push(i);
            let weight = factorial(s.len()) * factorial(m - s.len() - 1) / factorial(m);
            *p += weight * (value(&with) - value(&s));
        }
    }
    phi
}

#[test]
fn exact_shap_of_a_linear_model_is_weight_times_offset() {
    let w = vec![1.5, -0.25, 0.0, 3.0, -2.0];
    let x = [0.2, 1.0, 5.0, -1.0, 0.4];
    let b = [1.0, 0.0, 2.0, 0.5, 0.4];
    let a = shap_exact(&linear(w.clone(), 0.7), &x, &Background::point(&b), &names(5), "p").unwrap();
    for j in 0..5 {
        assert!((a.scores[j] - w[j] * (x[j] - b[j])).abs() < 1e-10);
    }
    // The zero-weight column is a dummy.
    assert_eq!(a.scores[2], 0.0);
    assert!(a.efficiency_residual().abs() < 1e-9);
}

#[test]
fn exact_shap_matches_the_subset_oracle() {
    let x = [0.5, -1.2, 2.0];
    let b = [0.1, 0.3, -0.4];
    let a = shap_exact(&interacting, &x, &Background::point(&b), &names(3), "p").unwrap();
    let oracle = subset_oracle(&interacting, &x, &b);
    for j in 0..3 {
        assert!((a.scores[j] - oracle[j]).abs() < 1e-12);
    }
}

#[test]
fn symmetric_features_receive_equal_credit() {
    let f = |r: &DMatrix<f64>| (0..r.nrows()).map(|i| (r[(i, 0)] * r[(i, 1)]).tanh() + r[(i, 2)]).collect();
    let a = shap_exact(&f, &[0.8, 0.8, 0.1], &Background::point(&[0.0; 3]), &names(3), "p").unwrap();
    assert!((a.scores[0] - a.scores[1]).abs() < 1e-15);
}

#[test]
fn fully_enumerated_kernel_shap_equals_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [3usize, 5, 8, 10] {
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rows = DMatrix::from_fn(30, m, |_, _| rng.random_range(-1.0..1.0));
        let bg = Background::from_rows(&rows, 1).unwrap();
        let exact = shap_exact(&interacting_padded, &x, &bg, &names(m), "p").unwrap();
        let kernel = shap_kernel(&interacting_padded, &x, &bg, &names(m), "p", 1 << m, 3).unwrap();
        for j in 0..m {
            assert!((exact.scores[j] - kernel.scores[j]).abs() < 1e-8, "m={m} j={j}");
        }
        assert!(exact.efficiency_residual().abs() < 1e-9);
    }
}

#[test]
fn sampled_kernel_shap_is_efficient_and_stable_across_seeds() {
    let m = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let bg = Background::point(&vec![0.0; m]);
    let f = linear(w, 0.0);
    let a = shap_kernel(&f, &x, &bg, &names(m), "p", 4096, 1).unwrap();
    let b = shap_kernel(&f, &x, &bg, &names(m), "p", 4096, 2).unwrap();
    assert!(a.efficiency_residual().abs() < 1e-3);
    for j in 0..m {
        assert!((a.scores[j] - b.scores[j]).abs() < 5e-2);
    }
    let s = shap_kernel(&interacting, &x, &bg, &names(m), "p", 4096, 1).unwrap();
    assert!(s.efficiency_residual().abs() < 1e-3);
}

#[test]
fn lime_recovers_a_global_linear_model() {
    let m = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w: Vec<f64> = (0..m).map(|j| if j % 3 == 0 { rng.random_range(1.0..3.0) } else { rng.random_range(-0.1..0.1) }).collect();
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let kinds = vec![FeatureKind::Numeric { sd: 1.0 }; m];
    let cfg = LimeConfig { n_perturbations: 1000, top_k: 10, seed: 2, ..Default::default() };
    let a = lime_explain(&linear(w.clone(), 0.4), &x, &kinds, &names(m), "p", &cfg).unwrap();
    assert!(a.r_squared.unwrap() >= 0.99, "{:?} {:?}", a.r_squared, a.scores);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| w[j].abs().total_cmp(&w[i].abs()));
    for &j in &order[..10] {
        assert!((a.scores[j] - w[j]).abs() <= 0.05 * w[j].abs(), "feature {j}");
    }
}

#[test]
fn attribution_csv_has_one_row_per_feature() {
    let a = shap_exact(&linear(vec![1.0, -2.0], 0.0), &[1.0, 1.0], &Background::point(&[0.0, 0.0]), &names(2), "P0001").unwrap();
    let mut buf = Vec::new();
    write_attributions_csv(&mut buf, &[a]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sample_id,method,feature,score,rank");
    assert_eq!(lines[1], "P0001,shap_exact,f01,-2e0,1");
    assert_eq!(lines.len(), 3);
}

#[test]
fn explanation_seeds_depend_on_sample_and_method() {
    let a = explanation_seed(1, "P1", Method::Lime);
    assert_eq!(a, explanation_seed(1, "P1", Method::Lime));
    assert_ne!(a, explanation_seed(1, "P2", Method::Lime));
    assert_ne!(a, explanation_seed(1, "P1", Method::ShapKernel));
}

proptest! {
    #[test]
    fn self_consensus_has_exactly_k_features(scores in proptest::collection::vec(-5.0f64..5.0, 3..30), k in 1usize..10) {
        let nonzero = scores.iter().filter(|s| **s != 0.0).count();
        prop_assume!(nonzero >= k);
        let a = Attribution {
            sample_id: "p".into(),
            method: Method::ShapKernel,
            feature_names: names(scores.len()),
            scores,
            base_value: 0.0,
            prediction: 0.0,
            n_perturbations: 0,
            seed: 0,
            r_squared: None,
        };
        let c = consensus(&a, &a, k, "polyp");
        prop_assert_eq!(c.features.len(), k);
        prop_assert!(c.features.iter().all(|f| f.shap_rank == f.lime_rank));
    }

    #[test]
    fn exact_shap_is_efficient(x in proptest::collection::vec(-3.0f64..3.0, 1..9)) {
        let m = x.len();
        let a = shap_exact(&interacting_padded, &x, &Background::point(&vec![0.2; m]), &names(m), "p").unwrap();
        prop_assert!(a.efficiency_residual().abs() < 1e-9);
    }
}

fn interacting_padded(r: &DMatrix<f64>) -> Vec<f64> {
    let mut wide = DMatrix::zeros(r.nrows(), r.ncols().max(3));
    wide.columns_mut(0, r.ncols()).copy_from(r);
    interacting(&wide)
}
