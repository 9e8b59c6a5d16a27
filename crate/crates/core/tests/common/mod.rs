#![allow(dead_code)]

use std::f64::consts::PI;

use gpscale::fft::half_len;
use gpscale::grid::MaskedGrid;
use gpscale::kernels::{Spectrum1D, Spectrum2D};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n1, n2, |_, _| rng.sample(StandardNormal))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |a - b| / max |b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    max_abs_diff(a, b) / scale
}

/// Random positive 1D spectrum in the half layout.
pub fn random_spectrum_1d(rng: &mut ChaCha8Rng, n: usize) -> Spectrum1D {
    let values = (0..half_len(n)).map(|_| rng.random_range(-1.5..1.5f64).exp()).collect();
    Spectrum1D::new(values, n, n as f64).unwrap()
}

/// Random positive full `n1 x n2` spectrum with `S(k) = S(-k)`.
pub fn random_full_spectrum_2d(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n1, n2, |_, _| rng.random_range(-1.5..1.5f64));
    DMatrix::from_fn(n1, n2, |a, b| (0.5 * (r[(a, b)] + r[((n1 - a) % n1, (n2 - b) % n2)])).exp())
}

pub fn half_spectrum_2d(full: &DMatrix<f64>) -> Spectrum2D {
    let (n1, n2) = full.shape();
    let half = full.columns(0, half_len(n2)).into_owned();
    Spectrum2D::new(half, n1, n2, [n1 as f64, n2 as f64]).unwrap()
}

/// Full spectrum `k~_k` for `k = 0..n` from the half layout.
pub fn full_spectrum_1d(s: &Spectrum1D) -> Vec<f64> {
    let n = s.n();
    (0..n).map(|k| s.values()[k.min(n - k)]).collect()
}

/// Circulant covariance `C[a, b] = (1/n) sum_k S_k cos(2 pi k (a - b) / n)`.
pub fn circulant_cov(full: &[f64]) -> DMatrix<f64> {
    let n = full.len();
    let row: Vec<f64> = (0..n)
        .map(|d| {
            full.iter()
                .enumerate()
                .map(|(k, s)| s * (2.0 * PI * (k * d) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |a, b| row[(a + n - b) % n])
}

/// Block-circulant covariance of a periodic `n1 x n2` field, flattened column-major.
pub fn block_circulant_cov(full: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = full.shape();
    let nn = (n1 * n2) as f64;
    let lag = DMatrix::from_fn(n1, n2, |d1, d2| {
        let mut acc = 0.0;
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let phase = 2.0 * PI * ((k1 * d1) as f64 / n1 as f64 + (k2 * d2) as f64 / n2 as f64);
                acc += full[(k1, k2)] * phase.cos();
            }
        }
        acc / nn
    });
    let n = n1 * n2;
    DMatrix::from_fn(n, n, |p, q| {
        let (a1, a2) = (p % n1, p / n1);
        let (b1, b2) = (q % n1, q / n1);
        lag[((a1 + n1 - b1) % n1, (a2 + n2 - b2) % n2)]
    })
}

/// Multivariate normal log density through an independent Cholesky factorization.
pub fn mvn_lpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let n = x.len();
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let r = nalgebra::DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    let w = chol.l().solve_lower_triangular(&r).unwrap();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * n as f64 * (2.0 * PI).ln() - log_det - 0.5 * w.norm_squared()
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct double-loop Gaussian filter ratio with truncation at `ceil(4 lambda)`.
pub fn brute_force_filter(grid: &MaskedGrid, lambda: f64) -> DMatrix<Option<f64>> {
    let (n1, n2) = grid.shape();
    let r = (4.0 * lambda).ceil() as i64;
    DMatrix::from_fn(n1, n2, |i, j| {
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..n1 {
            for b in 0..n2 {
                let (di, dj) = (a as i64 - i as i64, b as i64 - j as i64);
                if di.abs() > r || dj.abs() > r {
                    continue;
                }
                if let Some(y) = grid.get(a, b) {
                    let w = (-0.5 * ((di * di + dj * dj) as f64) / (lambda * lambda)).exp();
                    num += w * y;
                    den += w;
                }
            }
        }
        (den > 0.0).then(|| num / den)
    })
}

pub fn brute_force_smse(y: &[f64], f_hat: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        let pred = f_hat[i].exp();
        let denom = if y[i] > 1.0 { y[i] } else { 1.0 };
        total += (y[i] - pred) * (y[i] - pred) / denom;
    }
    total / y.len() as f64
}

/// Random 8x8 count grid with roughly a third of the cells missing.
pub fn random_masked_grid(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> MaskedGrid {
    let values = DMatrix::from_fn(n1, n2, |_, _| {
        if rng.random::<f64>() < 0.35 {
            -1.0
        } else {
            rng.random_range(0..40) as f64
        }
    });
    MaskedGrid::from_sentinel(values, 1.0).unwrap()
}
