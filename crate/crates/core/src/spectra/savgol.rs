use nalgebra::{DMatrix, DVector};

use super::{Spectrum, Stage};
use crate::error::{Error, Result};

/// Savitzky-Golay smoother with precomputed convolution weights.
///
/// Interior points use the symmetric `2m+1` kernel. The first and last `m`
/// points use a window truncated at the spectrum edge and a polynomial refit
/// on what remains; no padding values are invented.
#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    half_width: usize,
    order: usize,
    central: Vec<f64>,
    /// `left[j]` smooths point `j` (j < m) from the window `0..=j+m`.
    left: Vec<Vec<f64>>,
    /// `right[j]` smooths point `len-1-j` from the window `len-1-j-m..len`.
    right: Vec<Vec<f64>>,
}

impl SavitzkyGolay {
    pub fn new(half_width: usize, order: usize) -> Result<Self> {
        let window = 2 * half_width + 1;
        if half_width == 0 {
            return Err(Error::InvalidWindow { half_width, len: 0 });
        }
        if order >= window {
            return Err(Error::InvalidOrder { order, window });
        }
        let m = half_width as i64;
        let central = fit_weights(-m, m, order)?;
        let mut left = Vec::with_capacity(half_width);
        let mut right = Vec::with_capacity(half_width);
        for j in 0..half_width as i64 {
            left.push(fit_weights(-j, m, order)?);
            right.push(fit_weights(-m, j, order)?);
        }
        Ok(SavitzkyGolay { half_width, order, central, left, right })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Central convolution weights `c_{-m..=m}`.
    pub fn central_weights(&self) -> &[f64] {
        &self.central
    }

    pub fn smooth(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m = self.half_width;
        let n = y.len();
        if 2 * m + 1 > n {
            return Err(Error::InvalidWindow { half_width: m, len: n });
        }
        let mut out = vec![0.0; n];
        for i in m..n - m {
            out[i] = dot(&self.central, &y[i - m..=i + m]);
        }
        for j in 0..m {
            out[j] = dot(&self.left[j], &y[..=j + m]);
            let i = n - 1 - j;
            out[i] = dot(&self.right[j], &y[i - m..]);
        }
        Ok(out)
    }

    pub fn apply(&self, s: &Spectrum) -> Result<Spectrum> {
        s.require(Stage::Raw)?;
        let smoothed = self.smooth(s.intensities())?;
        Ok(s.advance(smoothed, Stage::Smoothed))
    }
}

/// Smooths a raw spectrum with half-width `m` and polynomial `order`.
pub fn savitzky_golay(s: &Spectrum, m: usize, order: usize) -> Result<Spectrum> {
    s.require(Stage::Raw)?;
    if 2 * m + 1 > s.len() {
        return Err(Error::InvalidWindow { half_width: m, len: s.len() });
    }
    SavitzkyGolay::new(m, order)?.apply(s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares weights that evaluate, at offset 0, the polynomial fitted to
/// samples at integer offsets `lo..=hi`. The order is capped at `len - 1`.
fn fit_weights(lo: i64, hi: i64, order: usize) -> Result<Vec<f64>> {
    let len = (hi - lo + 1) as usize;
    let p = order.min(len - 1);
    let scale = lo.abs().max(hi.abs()).max(1) as f64;
    let design = DMatrix::from_fn(len, p + 1, |r, c| {
        let t = (lo + r as i64) as f64 / scale;
        t.powi(c as i32)
    });
    let gram = design.transpose() * &design;
    let mut e0 = DVector::zeros(p + 1);
    e0[0] = 1.0;
    let g = gram
        .lu()
        .solve(&e0)
        .ok_or_else(|| Error::FitFailure(format!("singular Gram matrix for window {lo}..={hi}")))?;
    Ok((design * g).iter().copied().collect())
}
