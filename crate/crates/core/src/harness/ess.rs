//! Batch-means estimates of Monte Carlo error and effective sample size.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    /// Sample variance of the draws.
    pub variance: f64,
    /// Monte Carlo standard error of the mean.
    pub mcse: f64,
    /// Effective sample size, clamped to `(0, draws]`.
    pub ess: f64,
}

/// Batch means with `ceil(sqrt(n))` batches of equal size. Trailing draws that do not
/// fill a batch are dropped from the error estimate but not from the mean.
pub fn batch_means(x: &[f64]) -> BatchMeans {
    let n = x.len();
    assert!(n > 0, "batch means of an empty chain");
    let mean = x.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let batches = ((n as f64).sqrt().ceil() as usize).min(n);
    let size = n / batches;
    if batches < 2 || size == 0 {
        return BatchMeans {
            mean,
            variance,
            mcse: (variance / n as f64).sqrt(),
            ess: n as f64,
        };
    }
    let used = batches * size;
    let means: Vec<f64> = x[..used]
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let between = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let asymptotic = size as f64 * between;
    let mcse = (asymptotic / used as f64).sqrt();
    let ess = if variance == 0.0 {
        1.0
    } else if asymptotic == 0.0 {
        n as f64
    } else {
        (n as f64 * variance / asymptotic).clamp(f64::MIN_POSITIVE, n as f64)
    };
    BatchMeans {
        mean,
        variance,
        mcse,
        ess,
    }
}

/// Batch means of every coordinate of a chain stored draw by draw.
pub fn batch_means_columns(draws: &[Vec<f64>]) -> Vec<BatchMeans> {
    let dim = draws.first().map_or(0, Vec::len);
    let mut column = Vec::with_capacity(draws.len());
    (0..dim)
        .map(|j| {
            column.clear();
            column.extend(draws.iter().map(|d| d[j]));
            batch_means(&column)
        })
        .collect()
}
