//! Real-input discrete Fourier transforms.
//!
//! Convention used throughout the crate: the forward transform is unnormalized,
//! `c[k] = sum_j exp(-2 pi i k j / n) x[j]`, and the inverse carries the `1/n`
//! factor. Only the non-negative frequencies `0..=n/2` are stored for real input.
//! In two dimensions the half spectrum is taken along the second (column) axis
//! and the first axis keeps all `n1` frequencies.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{ensure_finite, invalid, Result};

/// Absolute tolerance (relative to the largest coefficient) on imaginary parts that
/// must vanish for a spectrum to come from a real signal.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// Number of stored coefficients for a real signal of length `n`.
pub fn half_len(n: usize) -> usize {
    n / 2 + 1
}

/// Non-negative-frequency half of the spectrum of a real sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpectrum {
    coefficients: Vec<Complex64>,
    n: usize,
}

impl HalfSpectrum {
    pub fn new(coefficients: Vec<Complex64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("signal length must be positive"));
        }
        if coefficients.len() != half_len(n) {
            return Err(invalid(format!(
                "half spectrum for n = {n} needs {} coefficients, got {}",
                half_len(n),
                coefficients.len()
            )));
        }
        Ok(Self { coefficients, n })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Length of the real signal this spectrum describes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coefficients
    }

    /// Checks that the DC term (and the Nyquist term for even `n`) is real.
    pub fn check_real_signal(&self) -> Result<()> {
        let scale = self
            .coefficients
            .iter()
            .map(|c| c.norm())
            .fold(1.0, f64::max);
        let tol = SYMMETRY_TOLERANCE * scale;
        if self.coefficients[0].im.abs() > tol {
            return Err(invalid(format!(
                "DC coefficient has imaginary part {:e}",
                self.coefficients[0].im
            )));
        }
        if self.n.is_multiple_of(2) {
            let nyq = self.coefficients[self.n / 2];
            if nyq.im.abs() > tol {
                return Err(invalid(format!(
                    "Nyquist coefficient has imaginary part {:e}",
                    nyq.im
                )));
            }
        }
        Ok(())
    }
}

/// Forward real FFT.
pub fn rfft(x: &[f64]) -> Result<HalfSpectrum> {
    if x.is_empty() {
        return Err(invalid("rfft of an empty sequence"));
    }
    ensure_finite(x, "rfft input")?;
    Ok(HalfSpectrum {
        coefficients: rfft_unchecked(x),
        n: x.len(),
    })
}

pub(crate) fn rfft_unchecked(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, FftDirection::Forward).process(&mut buf);
    buf.truncate(half_len(n));
    buf[0].im = 0.0;
    if n.is_multiple_of(2) {
        buf[n / 2].im = 0.0;
    }
    buf
}

/// Inverse real FFT, normalized by `1/n`.
pub fn irfft(c: &HalfSpectrum) -> Result<Vec<f64>> {
    c.check_real_signal()?;
    ensure_finite_complex(&c.coefficients, "irfft input")?;
    Ok(irfft_unchecked(&c.coefficients, c.n))
}

pub(crate) fn irfft_unchecked(c: &[Complex64], n: usize) -> Vec<f64> {
    let mut buf = hermitian_completion(c, n);
    plan(n, FftDirection::Inverse).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v.re * scale).collect()
}

fn hermitian_completion(c: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..c.len()].copy_from_slice(c);
    buf[0].im = 0.0;
    if n.is_multiple_of(2) {
        buf[n / 2].im = 0.0;
    }
    for k in 1..n.div_ceil(2) {
        buf[n - k] = c[k].conj();
    }
    buf
}

fn ensure_finite_complex(c: &[Complex64], what: &str) -> Result<()> {
    match c.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        Some(i) => Err(invalid(format!("{what}: coefficient {i} is not finite"))),
        None => Ok(()),
    }
}

/// Half spectrum of a real `n1 x n2` matrix: shape `n1 x (n2/2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpectrum2 {
    coefficients: DMatrix<Complex64>,
    n1: usize,
    n2: usize,
}

impl HalfSpectrum2 {
    pub fn new(coefficients: DMatrix<Complex64>, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("grid shape must be positive"));
        }
        if coefficients.shape() != (n1, half_len(n2)) {
            return Err(invalid(format!(
                "half spectrum for {n1}x{n2} needs shape {n1}x{}, got {:?}",
                half_len(n2),
                coefficients.shape()
            )));
        }
        Ok(Self {
            coefficients,
            n1,
            n2,
        })
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coefficients
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Columns 0 and (for even `n2`) `n2/2` must be Hermitian along the first axis.
    pub fn check_real_signal(&self) -> Result<()> {
        let scale = self.coefficients.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let tol = SYMMETRY_TOLERANCE * scale;
        for col in self_conjugate_columns(self.n2) {
            for r in 0..self.n1 {
                let mirror = (self.n1 - r) % self.n1;
                let a = self.coefficients[(r, col)];
                let b = self.coefficients[(mirror, col)].conj();
                if (a - b).norm() > tol {
                    return Err(invalid(format!(
                        "coefficient ({r}, {col}) violates conjugate symmetry"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Column indices of the half spectrum whose entries are constrained by conjugate symmetry.
pub fn self_conjugate_columns(n2: usize) -> impl Iterator<Item = usize> {
    let nyquist = (n2.is_multiple_of(2) && n2 > 1).then_some(n2 / 2);
    std::iter::once(0).chain(nyquist)
}

/// Forward 2D real FFT.
pub fn rfft2(x: &DMatrix<f64>) -> Result<HalfSpectrum2> {
    let (n1, n2) = x.shape();
    if n1 == 0 || n2 == 0 {
        return Err(invalid("rfft2 of an empty matrix"));
    }
    ensure_finite(x.as_slice(), "rfft2 input")?;
    Ok(HalfSpectrum2 {
        coefficients: rfft2_unchecked(x),
        n1,
        n2,
    })
}

pub(crate) fn rfft2_unchecked(x: &DMatrix<f64>) -> DMatrix<Complex64> {
    let (n1, n2) = x.shape();
    let h2 = half_len(n2);
    let mut out = DMatrix::from_element(n1, h2, Complex64::new(0.0, 0.0));
    let row_plan = plan(n2, FftDirection::Forward);
    let mut row = vec![Complex64::new(0.0, 0.0); n2];
    for i in 0..n1 {
        for (j, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(x[(i, j)], 0.0);
        }
        row_plan.process(&mut row);
        for k in 0..h2 {
            out[(i, k)] = row[k];
        }
    }
    let col_plan = plan(n1, FftDirection::Forward);
    // nalgebra storage is column-major, so each column is a contiguous slice.
    for col in out.as_mut_slice().chunks_exact_mut(n1) {
        col_plan.process(col);
    }
    out
}

/// Inverse 2D real FFT, normalized by `1/(n1 n2)`.
pub fn irfft2(c: &HalfSpectrum2) -> Result<DMatrix<f64>> {
    c.check_real_signal()?;
    ensure_finite_complex(c.coefficients.as_slice(), "irfft2 input")?;
    Ok(irfft2_unchecked(&c.coefficients, c.n1, c.n2))
}

pub(crate) fn irfft2_unchecked(c: &DMatrix<Complex64>, n1: usize, n2: usize) -> DMatrix<f64> {
    let h2 = half_len(n2);
    let mut work = c.clone();
    let col_plan = plan(n1, FftDirection::Inverse);
    for col in work.as_mut_slice().chunks_exact_mut(n1) {
        col_plan.process(col);
    }
    let row_plan = plan(n2, FftDirection::Inverse);
    let scale = 1.0 / (n1 * n2) as f64;
    let mut out = DMatrix::zeros(n1, n2);
    let mut half = vec![Complex64::new(0.0, 0.0); h2];
    for i in 0..n1 {
        for (k, v) in half.iter_mut().enumerate() {
            *v = work[(i, k)];
        }
        let mut row = hermitian_completion(&half, n2);
        row_plan.process(&mut row);
        for j in 0..n2 {
            out[(i, j)] = row[j].re * scale;
        }
    }
    out
}
