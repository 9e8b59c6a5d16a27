use nalgebra::DMatrix;

use crate::error::{ensure_finite, ensure_len, invalid, Result};
use crate::grid::MaskedGrid;

/// Scaled mean-squared error `mean((y - exp f)^2 / max(y, 1))` of count predictions
/// from a latent log-mean `f_hat`.
pub fn smse(y_test: &[f64], f_hat: &[f64]) -> Result<f64> {
    ensure_finite(f_hat, "f_hat")?;
    let y_hat: Vec<f64> = f_hat.iter().map(|f| f.exp()).collect();
    smse_counts(y_test, &y_hat)
}

/// SMSE of direct count predictions `y_hat`.
pub fn smse_counts(y_test: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y_test.is_empty() {
        return Err(invalid("SMSE needs at least one test point"));
    }
    ensure_len(y_hat, y_test.len(), "predictions")?;
    ensure_finite(y_test, "y_test")?;
    ensure_finite(y_hat, "predictions")?;
    let total: f64 = y_test
        .iter()
        .zip(y_hat)
        .map(|(y, p)| (y - p).powi(2) / y.max(1.0))
        .sum();
    Ok(total / y_test.len() as f64)
}

/// Half-width in cells of the truncated Gaussian filter.
pub fn filter_radius(lambda: f64) -> usize {
    (4.0 * lambda).ceil() as usize
}

fn gaussian_taps(lambda: f64) -> Vec<f64> {
    let r = filter_radius(lambda) as i64;
    (-r..=r).map(|d| (-0.5 * (d as f64 / lambda).powi(2)).exp()).collect()
}

/// Non-periodic separable convolution with zero padding outside the grid.
fn convolve(x: &DMatrix<f64>, taps: &[f64]) -> DMatrix<f64> {
    let (n1, n2) = x.shape();
    let r = (taps.len() / 2) as isize;
    let pass = |src: &DMatrix<f64>, along_rows: bool| {
        DMatrix::from_fn(n1, n2, |i, j| {
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let d = t as isize - r;
                let (ii, jj) = if along_rows {
                    (i as isize + d, j as isize)
                } else {
                    (i as isize, j as isize + d)
                };
                if ii >= 0 && jj >= 0 && (ii as usize) < n1 && (jj as usize) < n2 {
                    acc += w * src[(ii as usize, jj as usize)];
                }
            }
            acc
        })
    };
    pass(&pass(x, false), true)
}

/// Ratio `(g * (b y)) / (g * b)` of Gaussian-filtered observations and mask.
///
/// The filter is truncated at `ceil(4 lambda)` cells. Cells with no observed
/// neighbor inside that window are returned as missing.
pub fn gaussian_filter_estimate(y: &MaskedGrid, lambda: f64) -> Result<MaskedGrid> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("smoothing scale must be positive, got {lambda}")));
    }
    if y.observed_count() == 0 {
        return Err(invalid("the grid has no observed cells"));
    }
    let b = y.mask().map(|m| if m { 1.0 } else { 0.0 });
    let by = y.values().component_mul(&b);
    let taps = gaussian_taps(lambda);
    let num = convolve(&by, &taps);
    let den = convolve(&b, &taps);
    let mask = den.map(|d| d > 0.0);
    let est = num.zip_map(&den, |a, d| if d > 0.0 { a / d } else { 0.0 });
    MaskedGrid::new(est, mask, y.cell_size())
}
