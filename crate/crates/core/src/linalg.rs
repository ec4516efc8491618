//! Small dense least-squares helpers shared by the filters and explainers.

use nalgebra::{DMatrix, DVector};

/// Ordinary least squares through a thin QR factorisation.
///
/// Returns `None` when the design is numerically rank deficient.
pub fn lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols || cols == 0 {
        return None;
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || r.diagonal().iter().any(|v| v.abs() <= scale * 1e-12) {
        return None;
    }
    let qt_b = qr.q().transpose() * rhs;
    r.solve_upper_triangular(&qt_b)
}

/// Weighted least squares: minimises sum_i w_i (y_i - x_i . beta)^2.
pub fn weighted_lstsq(
    design: &DMatrix<f64>,
    rhs: &DVector<f64>,
    weights: &DVector<f64>,
) -> Option<DVector<f64>> {
    let (scaled_x, scaled_y) = sqrt_weighted(design, rhs, weights);
    lstsq(&scaled_x, &scaled_y)
}

/// Weighted ridge regression solved through the normal equations.
pub fn weighted_ridge(
    design: &DMatrix<f64>,
    rhs: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
) -> Option<DVector<f64>> {
    let (scaled_x, scaled_y) = sqrt_weighted(design, rhs, weights);
    let mut gram = scaled_x.transpose() * &scaled_x;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = scaled_x.transpose() * scaled_y;
    gram.cholesky().map(|c| c.solve(&rhs))
}

fn sqrt_weighted(
    design: &DMatrix<f64>,
    rhs: &DVector<f64>,
    weights: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = design.clone();
    let mut y = rhs.clone();
    for (i, w) in weights.iter().enumerate() {
        let s = w.max(0.0).sqrt();
        x.row_mut(i).scale_mut(s);
        y[i] *= s;
    }
    (x, y)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
