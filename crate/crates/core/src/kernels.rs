//! Stationary covariance kernels in the real domain and as discrete power spectra
//! on periodic grids.
//!
//! Spectra are the forward DFT of the periodic kernel row, so `irfft(spectrum)`
//! recovers the kernel at lags `0..n` and `n * spectrum[k]` is the variance of the
//! `k`-th Fourier coefficient of a draw. Frequencies are discretized naively, which
//! is accurate when the correlation length is small compared with the period.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_finite, invalid, GpError, Result};
use crate::fft::{self, half_len};

/// Covariance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern { nu: f64 },
}

/// Stationary kernel with marginal scale `sigma` and correlation lengths.
///
/// A single length scale is applied to every dimension; otherwise there must be one
/// per dimension of the points the kernel is evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    sigma: f64,
    length_scales: Vec<f64>,
}

impl Kernel {
    pub fn new(family: KernelFamily, sigma: f64, length_scales: Vec<f64>) -> Result<Self> {
        check_scale(sigma, "sigma")?;
        if length_scales.is_empty() {
            return Err(invalid("at least one length scale is required"));
        }
        for &ell in &length_scales {
            check_scale(ell, "length scale")?;
        }
        if let KernelFamily::Matern { nu } = family {
            check_scale(nu, "nu")?;
        }
        Ok(Self {
            family,
            sigma,
            length_scales,
        })
    }

    pub fn squared_exponential(sigma: f64, ell: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, sigma, vec![ell])
    }

    pub fn matern(nu: f64, sigma: f64, ell: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern { nu }, sigma, vec![ell])
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    /// Marginal variance `sigma^2`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Whether the kernel has a closed real-domain form.
    pub fn check_real_domain(&self) -> Result<()> {
        match self.family {
            KernelFamily::SquaredExponential => Ok(()),
            KernelFamily::Matern { nu } => matern_order(nu).map(|_| ()),
        }
    }

    /// Covariance between two points. Requires [`Kernel::check_real_domain`] to pass.
    pub fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.scaled_distance(a, b);
        let var = self.variance();
        match self.family {
            KernelFamily::SquaredExponential => var * (-0.5 * r * r).exp(),
            KernelFamily::Matern { nu } => match matern_order(nu) {
                Ok(order) => var * matern_unit(order, r),
                Err(_) => f64::NAN,
            },
        }
    }

    fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        if let [ell] = self.length_scales[..] {
            for (x, y) in a.iter().zip(b) {
                acc += (x - y) * (x - y);
            }
            acc.sqrt() / ell
        } else {
            for ((x, y), ell) in a.iter().zip(b).zip(&self.length_scales) {
                let d = (x - y) / ell;
                acc += d * d;
            }
            acc.sqrt()
        }
    }
}

fn check_scale(v: f64, name: &str) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MaternOrder {
    Half,
    ThreeHalves,
    FiveHalves,
}

fn matern_order(nu: f64) -> Result<MaternOrder> {
    const TOL: f64 = 1e-12;
    if (nu - 0.5).abs() < TOL {
        Ok(MaternOrder::Half)
    } else if (nu - 1.5).abs() < TOL {
        Ok(MaternOrder::ThreeHalves)
    } else if (nu - 2.5).abs() < TOL {
        Ok(MaternOrder::FiveHalves)
    } else {
        Err(GpError::UnsupportedParameter(format!(
            "real-domain Matern kernel needs nu in {{1/2, 3/2, 5/2}}, got {nu}; \
             use the Fourier-domain spectrum for other smoothness values"
        )))
    }
}

/// Matern correlation at distance `r` measured in length scales.
fn matern_unit(order: MaternOrder, r: f64) -> f64 {
    match order {
        MaternOrder::Half => (-r).exp(),
        MaternOrder::ThreeHalves => {
            let s = 3f64.sqrt() * r;
            (1.0 + s) * (-s).exp()
        }
        MaternOrder::FiveHalves => {
            let s = 5f64.sqrt() * r;
            (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
        }
    }
}

/// Squared exponential covariance `sigma^2 exp(-d^2 / (2 ell^2))`.
pub fn se_cov(distance: f64, sigma: f64, ell: f64) -> Result<f64> {
    check_scale(sigma, "sigma")?;
    check_scale(ell, "length scale")?;
    check_distance(distance)?;
    let r = distance / ell;
    Ok(sigma * sigma * (-0.5 * r * r).exp())
}

/// Closed-form Matern covariance for `nu` in `{1/2, 3/2, 5/2}`.
pub fn matern_cov(distance: f64, sigma: f64, ell: f64, nu: f64) -> Result<f64> {
    check_scale(sigma, "sigma")?;
    check_scale(ell, "length scale")?;
    check_distance(distance)?;
    let order = matern_order(nu)?;
    Ok(sigma * sigma * matern_unit(order, distance / ell))
}

fn check_distance(d: f64) -> Result<()> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(invalid(format!("distance must be finite and non-negative, got {d}")));
    }
    Ok(())
}

/// Dense covariance matrix of `kernel` over all pairs of `points`.
pub fn cov_matrix(kernel: &Kernel, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    kernel.check_real_domain()?;
    for p in points {
        ensure_finite(p, "location")?;
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    let var = kernel.variance();
    for j in 0..n {
        k[(j, j)] = var;
        for i in j + 1..n {
            let v = kernel.cov(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Power spectrum of a periodic kernel on a 1D grid of `n` points and period `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    values: Vec<f64>,
    n: usize,
    period: f64,
}

impl Spectrum1D {
    pub fn new(values: Vec<f64>, n: usize, period: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("grid size must be positive"));
        }
        check_scale(period, "period")?;
        if values.len() != half_len(n) {
            return Err(invalid(format!(
                "spectrum for n = {n} needs {} values, got {}",
                half_len(n),
                values.len()
            )));
        }
        check_power(&values)?;
        Ok(Self { values, n, period })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Errors unless every entry is strictly positive.
    pub fn require_positive(&self) -> Result<()> {
        require_positive(&self.values)
    }

    /// Variance of the periodic process, `sum over all frequencies / n`.
    pub fn total_variance(&self) -> f64 {
        full_sum_1d(&self.values, self.n) / self.n as f64
    }
}

fn full_sum_1d(values: &[f64], n: usize) -> f64 {
    let mut total = values[0];
    for v in &values[1..n.div_ceil(2)] {
        total += 2.0 * v;
    }
    if n.is_multiple_of(2) && n > 1 {
        total += values[n / 2];
    }
    total
}

fn check_power(values: &[f64]) -> Result<()> {
    ensure_finite(values, "spectrum")?;
    if let Some(i) = values.iter().position(|&v| v < 0.0) {
        return Err(invalid(format!("spectrum entry {i} is negative")));
    }
    Ok(())
}

fn require_positive(values: &[f64]) -> Result<()> {
    match values.iter().position(|&v| v <= 0.0) {
        Some(i) => Err(invalid(format!(
            "spectrum entry {i} is not strictly positive ({:e}); the prior is degenerate",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Power spectrum on a periodic `n1 x n2` grid, stored in the rfft2 half layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    values: DMatrix<f64>,
    n1: usize,
    n2: usize,
    periods: [f64; 2],
}

impl Spectrum2D {
    /// Validates shape, sign and the row symmetry required in the self-conjugate columns.
    pub fn new(values: DMatrix<f64>, n1: usize, n2: usize, periods: [f64; 2]) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("grid shape must be positive"));
        }
        check_scale(periods[0], "period")?;
        check_scale(periods[1], "period")?;
        if values.shape() != (n1, half_len(n2)) {
            return Err(invalid(format!(
                "spectrum for {n1}x{n2} needs shape {n1}x{}, got {:?}",
                half_len(n2),
                values.shape()
            )));
        }
        check_power(values.as_slice())?;
        for col in fft::self_conjugate_columns(n2) {
            for r in 1..n1 {
                let (a, b) = (values[(r, col)], values[(n1 - r, col)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(invalid(format!(
                        "spectrum column {col} is not symmetric between rows {r} and {}",
                        n1 - r
                    )));
                }
            }
        }
        Ok(Self {
            values,
            n1,
            n2,
            periods,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }

    pub fn require_positive(&self) -> Result<()> {
        require_positive(self.values.as_slice())
    }
}

fn check_spectrum_args(n: usize, sigma: f64, ell: f64, period: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("grid size must be positive"));
    }
    check_scale(sigma, "sigma")?;
    check_scale(ell, "length scale")?;
    check_scale(period, "period")
}

/// Discrete squared exponential power spectrum, frequencies `0..=n/2`.
pub fn se_spectrum_1d(n: usize, sigma: f64, ell: f64, period: f64) -> Result<Spectrum1D> {
    check_spectrum_args(n, sigma, ell, period)?;
    let values = (0..half_len(n))
        .map(|k| n as f64 * sigma * sigma * se_factor(k as f64, ell, period))
        .collect();
    Spectrum1D::new(values, n, period)
}

/// Per-dimension SE factor `sqrt(2 pi) ell / L exp(-2 (pi k ell / L)^2)`.
fn se_factor(freq: f64, ell: f64, period: f64) -> f64 {
    let a = PI * freq * ell / period;
    (2.0 * PI).sqrt() * ell / period * (-2.0 * a * a).exp()
}

/// Discrete Matern power spectrum for any `nu > 0`.
pub fn matern_spectrum_1d(n: usize, nu: f64, sigma: f64, ell: f64, period: f64) -> Result<Spectrum1D> {
    check_spectrum_args(n, sigma, ell, period)?;
    check_scale(nu, "nu")?;
    let p = 1.0;
    let prefactor = sigma * sigma * n as f64 * ell / period * matern_normalizer(nu, p);
    let values = (0..half_len(n))
        .map(|k| {
            let q = PI * ell * k as f64 / period;
            prefactor * (1.0 + 2.0 * q * q / nu).powf(-(nu + p / 2.0))
        })
        .collect();
    Spectrum1D::new(values, n, period)
}

/// `(2 pi / nu)^(p/2) Gamma(nu + p/2) / Gamma(nu)`.
fn matern_normalizer(nu: f64, p: f64) -> f64 {
    (2.0 * PI / nu).powf(p / 2.0) * (ln_gamma(nu + p / 2.0) - ln_gamma(nu)).exp()
}

fn folded(k: usize, n: usize) -> f64 {
    k.min(n - k) as f64
}

fn check_2d_args(n1: usize, n2: usize, sigma: f64, length_scales: [f64; 2], periods: [f64; 2]) -> Result<()> {
    check_spectrum_args(n1, sigma, length_scales[0], periods[0])?;
    check_spectrum_args(n2, sigma, length_scales[1], periods[1])
}

/// Separable squared exponential spectrum on an `n1 x n2` periodic grid.
pub fn se_spectrum_2d(
    n1: usize,
    n2: usize,
    sigma: f64,
    length_scales: [f64; 2],
    periods: [f64; 2],
) -> Result<Spectrum2D> {
    check_2d_args(n1, n2, sigma, length_scales, periods)?;
    let scale = sigma * sigma * (n1 * n2) as f64;
    let values = DMatrix::from_fn(n1, half_len(n2), |r, k| {
        scale
            * se_factor(folded(r, n1), length_scales[0], periods[0])
            * se_factor(k as f64, length_scales[1], periods[1])
    });
    Spectrum2D::new(values, n1, n2, periods)
}

/// Matern spectrum on an `n1 x n2` periodic grid.
///
/// Anisotropic length scales enter as a sum of squared rescaled frequencies inside
/// the power law and as the product `ell1 ell2 / (L1 L2)` in the prefactor.
pub fn matern_spectrum_2d(
    n1: usize,
    n2: usize,
    nu: f64,
    sigma: f64,
    length_scales: [f64; 2],
    periods: [f64; 2],
) -> Result<Spectrum2D> {
    check_2d_args(n1, n2, sigma, length_scales, periods)?;
    check_scale(nu, "nu")?;
    let p = 2.0;
    let prefactor = sigma * sigma * (n1 * n2) as f64 * length_scales[0] * length_scales[1]
        / (periods[0] * periods[1])
        * matern_normalizer(nu, p);
    let values = DMatrix::from_fn(n1, half_len(n2), |r, k| {
        let q1 = PI * length_scales[0] * folded(r, n1) / periods[0];
        let q2 = PI * length_scales[1] * k as f64 / periods[1];
        prefactor * (1.0 + 2.0 * (q1 * q1 + q2 * q2) / nu).powf(-(nu + p / 2.0))
    });
    Spectrum2D::new(values, n1, n2, periods)
}

/// Real-space kernel of the periodic process at lags `0..n`.
pub fn periodic_kernel_row(spectrum: &Spectrum1D) -> Vec<f64> {
    let c: Vec<Complex64> = spectrum
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft::irfft_unchecked(&c, spectrum.n)
}

/// Real-space kernel of the periodic 2D process at lags `(0..n1, 0..n2)`.
pub fn periodic_kernel_grid(spectrum: &Spectrum2D) -> DMatrix<f64> {
    let c = spectrum.values.map(|v| Complex64::new(v, 0.0));
    fft::irfft2_unchecked(&c, spectrum.n1, spectrum.n2)
}

/// Fraction of the total power carried by frequencies `0..modes`.
pub fn retained_power_fraction(spectrum: &Spectrum1D, modes: usize) -> f64 {
    let n = spectrum.n;
    let total = full_sum_1d(&spectrum.values, n);
    let mut kept = 0.0;
    for k in 0..modes.min(half_len(n)) {
        let multiplicity = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
        kept += multiplicity * spectrum.values[k];
    }
    kept / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn se_cov_examples() {
        assert_eq!(se_cov(0.0, 1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(se_cov(1.0, 1.0, 1.0).unwrap(), (-0.5f64).exp());
        assert_relative_eq!(se_cov(2.0, 3.0, 0.5).unwrap(), 9.0 * (-8.0f64).exp());
        assert!(se_cov(1.0, 0.0, 1.0).is_err());
        assert!(se_cov(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn matern_cov_examples() {
        for nu in [0.5, 1.5, 2.5] {
            assert_eq!(matern_cov(0.0, 2.0, 0.3, nu).unwrap(), 4.0);
        }
        assert_relative_eq!(matern_cov(1.0, 1.0, 1.0, 0.5).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(
            matern_cov(1.0, 1.0, 1.0, 1.5).unwrap(),
            0.483_357_724_596_507_8,
            max_relative = 1e-12
        );
        match matern_cov(1.0, 1.0, 1.0, 1.0) {
            Err(GpError::UnsupportedParameter(_)) => {}
            other => panic!("expected unsupported parameter, got {other:?}"),
        }
    }

    #[test]
    fn matern_cov_is_monotone() {
        for nu in [0.5, 1.5, 2.5] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let v = matern_cov(i as f64 * 0.05, 1.3, 0.7, nu).unwrap();
                assert!(v <= prev && v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn se_spectrum_dc_and_scaling() {
        let s = se_spectrum_1d(16, 1.0, 1.0, 16.0).unwrap();
        assert_relative_eq!(s.values()[0], (2.0 * PI).sqrt(), max_relative = 1e-14);
        let s2 = se_spectrum_1d(16, 2.0, 1.0, 16.0).unwrap();
        for (a, b) in s.values().iter().zip(s2.values()) {
            assert_relative_eq!(b / a, 4.0, max_relative = 1e-14);
        }
        assert!(s.values().windows(2).all(|w| w[1] < w[0]));
        assert!(se_spectrum_1d(0, 1.0, 1.0, 1.0).is_err());
        assert!(se_spectrum_1d(8, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn se_spectrum_total_power_is_marginal_variance() {
        let s = se_spectrum_1d(256, 1.0, 0.05, 1.0).unwrap();
        let row = periodic_kernel_row(&s);
        assert!((row[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matern_spectrum_ratio_and_tail() {
        let s = matern_spectrum_1d(64, 1.5, 1.0, 0.2, 1.0).unwrap();
        let want = (1.0 + 2.0 * PI * PI * 0.04 / 1.5).powi(-2);
        assert_relative_eq!(s.values()[1] / s.values()[0], want, max_relative = 1e-13);

        let m = matern_spectrum_1d(128, 1.5, 1.0, 0.2, 1.0).unwrap();
        let e = se_spectrum_1d(128, 1.0, 0.2, 1.0).unwrap();
        assert!(m.values()[32] / m.values()[0] > e.values()[32] / e.values()[0]);

        let s = matern_spectrum_1d(512, 1.5, 1.0, 0.02, 1.0).unwrap();
        let row = periodic_kernel_row(&s);
        assert!((row[0] - 1.0).abs() < 0.02, "{}", row[0]);
    }

    #[test]
    fn spectra_invariant_under_joint_rescaling() {
        for c in [0.1, 3.0, 17.0] {
            let a = se_spectrum_1d(33, 1.2, 0.1, 1.0).unwrap();
            let b = se_spectrum_1d(33, 1.2, 0.1 * c, c).unwrap();
            let m = matern_spectrum_1d(33, 2.3, 1.2, 0.1, 1.0).unwrap();
            let mb = matern_spectrum_1d(33, 2.3, 1.2, 0.1 * c, c).unwrap();
            for (x, y) in a.values().iter().zip(b.values()).chain(m.values().iter().zip(mb.values())) {
                assert_relative_eq!(x, y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn se_spectrum_2d_matches_product_of_1d() {
        let (n1, n2) = (4, 6);
        let (ls, ps) = ([0.3, 0.5], [2.0, 3.0]);
        let s = se_spectrum_2d(n1, n2, 1.5, ls, ps).unwrap();
        assert_relative_eq!(
            s.values()[(0, 0)],
            (n1 * n2) as f64 * 2.25 * 2.0 * PI * ls[0] * ls[1] / (ps[0] * ps[1]),
            max_relative = 1e-14
        );
        // Each 1D spectrum carries n sigma^2, so the product divides by sigma^2 n1 n2 / (n1 n2).
        let a = se_spectrum_1d(n1, 1.0, ls[0], ps[0]).unwrap();
        let b = se_spectrum_1d(n2, 1.5, ls[1], ps[1]).unwrap();
        let full_a: Vec<f64> = (0..n1).map(|r| a.values()[r.min(n1 - r)]).collect();
        for r in 0..n1 {
            for k in 0..half_len(n2) {
                assert_relative_eq!(s.values()[(r, k)], full_a[r] * b.values()[k], max_relative = 1e-13);
            }
        }
        for r in 1..n1 {
            for k in 0..half_len(n2) {
                assert_eq!(s.values()[(r, k)], s.values()[(n1 - r, k)]);
            }
        }
    }

    #[test]
    fn matern_spectrum_2d_examples() {
        let (nu, sigma, ell, l) = (1.5, 1.3, 0.1, 2.0);
        let s = matern_spectrum_2d(8, 8, nu, sigma, [ell, ell], [l, l]).unwrap();
        let dc = sigma * sigma * 64.0 * ell * ell / (l * l) * (2.0 * PI / nu)
            * (ln_gamma(nu + 1.0) - ln_gamma(nu)).exp();
        assert_relative_eq!(s.values()[(0, 0)], dc, max_relative = 1e-12);
        for a in 0..5 {
            for b in 0..5 {
                assert_relative_eq!(s.values()[(a, b)], s.values()[(b, a)], max_relative = 1e-14);
            }
        }
        let s = matern_spectrum_2d(64, 64, 1.5, 1.0, [0.05, 0.05], [1.0, 1.0]).unwrap();
        let row = periodic_kernel_grid(&s);
        assert!((row[(0, 0)] - 1.0).abs() < 0.02, "{}", row[(0, 0)]);
    }

    #[test]
    fn cov_matrix_examples() {
        let k = Kernel::squared_exponential(2.0, 1.0).unwrap();
        assert_eq!(cov_matrix(&k, &[vec![0.3]]).unwrap()[(0, 0)], 4.0);
        let dup = cov_matrix(&k, &[vec![1.0], vec![1.0]]).unwrap();
        assert!(dup.iter().all(|&v| v == 4.0));

        let k = Kernel::squared_exponential(1.0, 1.0).unwrap();
        let m = cov_matrix(&k, &[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_relative_eq!(m[(0, 1)], (-0.5f64).exp());
        assert_relative_eq!(m[(0, 2)], (-2.0f64).exp());
        assert_eq!(m, m.transpose());

        let bad = Kernel::matern(0.7, 1.0, 1.0).unwrap();
        assert!(matches!(cov_matrix(&bad, &[vec![0.0]]), Err(GpError::UnsupportedParameter(_))));
    }

    #[test]
    fn periodic_row_examples() {
        let flat = Spectrum1D::new(vec![1.0; 3], 4, 1.0).unwrap();
        let row = periodic_kernel_row(&flat);
        for (g, w) in row.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert!((g - w).abs() < 1e-15);
        }

        let s = se_spectrum_1d(128, 1.0, 0.2, 1.0).unwrap();
        let row = periodic_kernel_row(&s);
        for (lag, v) in row.iter().enumerate() {
            assert_relative_eq!(*v, row[(128 - lag) % 128], epsilon = 1e-14);
            let x = lag as f64 / 128.0;
            if x < 0.2 {
                assert!((v - se_cov(x, 1.0, 0.2).unwrap()).abs() < 0.01);
            }
        }
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum1D::new(vec![1.0, -1.0, 1.0], 4, 1.0).is_err());
        assert!(Spectrum1D::new(vec![1.0, 1.0], 4, 1.0).is_err());
        assert!(Spectrum1D::new(vec![1.0, 0.0, 1.0], 4, 1.0).unwrap().require_positive().is_err());
        let asym = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 3.0, 1.0, 1.0]);
        assert!(Spectrum2D::new(asym, 3, 4, [1.0, 1.0]).is_err());
    }

    #[test]
    fn retained_power() {
        let s = Spectrum1D::new(vec![1.0; 5], 8, 1.0).unwrap();
        assert_relative_eq!(retained_power_fraction(&s, 1), 1.0 / 8.0);
        assert_relative_eq!(retained_power_fraction(&s, 2), 3.0 / 8.0);
        assert_relative_eq!(retained_power_fraction(&s, 5), 1.0);
    }
}
