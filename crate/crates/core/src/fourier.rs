//! Gaussian processes on periodic grids, diagonalized by the real FFT.
//!
//! For a stationary kernel on a periodic grid the Fourier coefficients of a draw are
//! independent, with `Var f~_k = n k~_k`. Interior coefficients split that variance
//! evenly between their real and imaginary parts. Densities and whitening maps are
//! therefore exact and cost `O(n log n)`.
//!
//! # Packed layout
//!
//! The independent real degrees of freedom of a half spectrum are stored in a real
//! vector of the same length as the signal:
//!
//! ```text
//! [Re c_0, Re c_1, ..., Re c_{n/2}, Im c_1, ..., Im c_{ceil(n/2)-1}]
//! ```
//!
//! In two dimensions the columns that are their own conjugate partners (column 0 and,
//! for even `n2`, column `n2/2`) are packed along the rows with the 1D layout. Every
//! other column `k2` stores its real parts in column `k2` and its imaginary parts in
//! column `n2/2 + k2`. The result is again an `n1 x n2` real matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::HALF_LN_2PI;
use crate::error::{ensure_finite, ensure_len, invalid, Result};
use crate::fft::{self, half_len, HalfSpectrum, HalfSpectrum2};
use crate::grid::MaskedGrid;
use crate::kernels::{retained_power_fraction, Spectrum1D, Spectrum2D};

/// Version tag written alongside serialized latent vectors.
pub const PACKED_LAYOUT_VERSION: &str = "packed-rfft-v1";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Number of frequencies with both a real and an imaginary degree of freedom.
pub fn interior_modes(n: usize) -> usize {
    n.div_ceil(2) - 1
}

fn is_real_mode(k: usize, n: usize) -> bool {
    k == 0 || (n.is_multiple_of(2) && 2 * k == n)
}

/// Frequency stored at each packed position.
fn packed_mode(index: usize, n: usize) -> usize {
    let h = half_len(n);
    if index < h {
        index
    } else {
        index - h + 1
    }
}

fn pack_into(c: &[Complex64], n: usize, out: &mut [f64]) {
    let h = half_len(n);
    for k in 0..h {
        out[k] = c[k].re;
    }
    for k in 1..=interior_modes(n) {
        out[h + k - 1] = c[k].im;
    }
}

fn unpack_from(p: &[f64], n: usize) -> Vec<Complex64> {
    let h = half_len(n);
    let mut c: Vec<Complex64> = p[..h].iter().map(|&re| Complex64::new(re, 0.0)).collect();
    for k in 1..=interior_modes(n) {
        c[k].im = p[h + k - 1];
    }
    c
}

/// Squared norm of the row of the packed transform behind each packed entry:
/// `n` for real coefficients and `n/2` for real or imaginary parts of the others.
fn packed_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i < half_len(n) && is_real_mode(i, n) {
                n as f64
            } else {
                n as f64 / 2.0
            }
        })
        .collect()
}

/// `log |det|` of the linear map from a real signal to its packed coefficients.
pub fn packed_log_jacobian(n: usize) -> f64 {
    0.5 * n as f64 * (n as f64).ln() - interior_modes(n) as f64 * std::f64::consts::LN_2
}

/// `log |det|` of the 2D packed transform of an `n1 x n2` grid.
pub fn packed_log_jacobian_2d(n1: usize, n2: usize) -> f64 {
    let total = n1 * n2;
    let real = fft::self_conjugate_columns(n2).count() * (1 + usize::from(n1.is_multiple_of(2) && n1 > 1));
    0.5 * total as f64 * (total as f64).ln() - ((total - real) / 2) as f64 * std::f64::consts::LN_2
}

/// Real degrees of freedom of a conjugate-symmetric spectrum in the packed layout.
///
/// Serializes as `{"layout": "packed-rfft-v1", "shape": [...], "values": [...]}` with
/// 2D values in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PackedRecord", into = "PackedRecord")]
pub struct PackedCoefficients {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PackedRecord {
    layout: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<PackedRecord> for PackedCoefficients {
    type Error = crate::GpError;

    fn try_from(r: PackedRecord) -> Result<Self> {
        if r.layout != PACKED_LAYOUT_VERSION {
            return Err(invalid(format!(
                "unknown packed layout {:?}, expected {PACKED_LAYOUT_VERSION:?}",
                r.layout
            )));
        }
        Self::new(r.values, r.shape)
    }
}

impl From<PackedCoefficients> for PackedRecord {
    fn from(p: PackedCoefficients) -> Self {
        Self {
            layout: PACKED_LAYOUT_VERSION.to_string(),
            shape: p.shape,
            values: p.values,
        }
    }
}

impl PackedCoefficients {
    pub fn new(values: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
            return Err(invalid(format!("packed shape must be 1D or 2D and non-empty, got {shape:?}")));
        }
        ensure_len(&values, shape.iter().product(), "packed values")?;
        Ok(Self { shape, values })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            values: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self.shape[..] {
            [n1, n2] => Ok(DMatrix::from_row_slice(n1, n2, &self.values)),
            _ => Err(invalid("packed coefficients are not two-dimensional")),
        }
    }
}

pub fn pack_rfft(c: &HalfSpectrum) -> Result<PackedCoefficients> {
    c.check_real_signal()?;
    let n = c.n();
    let mut values = vec![0.0; n];
    pack_into(c.coefficients(), n, &mut values);
    Ok(PackedCoefficients { shape: vec![n], values })
}

pub fn unpack_rfft(p: &PackedCoefficients) -> Result<HalfSpectrum> {
    match p.shape[..] {
        [n] => HalfSpectrum::new(unpack_from(&p.values, n), n),
        _ => Err(invalid("packed coefficients are not one-dimensional")),
    }
}

fn pack2_unchecked(c: &DMatrix<Complex64>, n1: usize, n2: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n1, n2);
    let mut buf = vec![0.0; n1];
    for k2 in 0..half_len(n2) {
        if is_real_mode(k2, n2) {
            pack_into(c.column(k2).as_slice(), n1, &mut buf);
            out.column_mut(k2).copy_from_slice(&buf);
        } else {
            for r in 0..n1 {
                out[(r, k2)] = c[(r, k2)].re;
                out[(r, n2 / 2 + k2)] = c[(r, k2)].im;
            }
        }
    }
    out
}

fn unpack2_unchecked(p: &DMatrix<f64>) -> DMatrix<Complex64> {
    let (n1, n2) = p.shape();
    let mut c = DMatrix::from_element(n1, half_len(n2), ZERO);
    for k2 in 0..half_len(n2) {
        if is_real_mode(k2, n2) {
            let half = unpack_from(p.column(k2).as_slice(), n1);
            for (r, v) in half.iter().enumerate() {
                c[(r, k2)] = *v;
                c[((n1 - r) % n1, k2)] = v.conj();
            }
        } else {
            for r in 0..n1 {
                c[(r, k2)] = Complex64::new(p[(r, k2)], p[(r, n2 / 2 + k2)]);
            }
        }
    }
    c
}

/// Packs a 2D half spectrum into an `n1 x n2` real matrix.
pub fn pack_rfft2(c: &HalfSpectrum2) -> Result<DMatrix<f64>> {
    c.check_real_signal()?;
    let (n1, n2) = c.shape();
    Ok(pack2_unchecked(c.coefficients(), n1, n2))
}

pub fn unpack_rfft2(p: &DMatrix<f64>) -> Result<HalfSpectrum2> {
    let (n1, n2) = p.shape();
    if n1 == 0 || n2 == 0 {
        return Err(invalid("packed matrix is empty"));
    }
    HalfSpectrum2::new(unpack2_unchecked(p), n1, n2)
}

/// Spectrum value and weight behind each entry of the 2D packed layout.
fn packed_spectrum_2d(spectrum: &Spectrum2D) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n1, n2) = spectrum.shape();
    let total = (n1 * n2) as f64;
    let s = spectrum.values();
    let mut power = DMatrix::zeros(n1, n2);
    let mut weight = DMatrix::from_element(n1, n2, total / 2.0);
    for col in 0..n2 {
        for r in 0..n1 {
            let k2 = if col < half_len(n2) { col } else { col - n2 / 2 };
            if is_real_mode(k2, n2) {
                let k1 = packed_mode(r, n1);
                power[(r, col)] = s[(k1, k2)];
                if r < half_len(n1) && is_real_mode(k1, n1) {
                    weight[(r, col)] = total;
                }
            } else {
                power[(r, col)] = s[(r, k2)];
            }
        }
    }
    (power, weight)
}

/// Standard deviations of the packed coefficients of a draw from the periodic GP.
pub fn coefficient_scales(spectrum: &Spectrum1D) -> Result<Vec<f64>> {
    Ok(FourierGp::new(spectrum)?.scales)
}

pub fn coefficient_scales_2d(spectrum: &Spectrum2D) -> Result<DMatrix<f64>> {
    Ok(FourierGp2::new(spectrum)?.scales)
}

/// Periodic GP on a 1D grid with precomputed coefficient scales.
#[derive(Debug, Clone)]
pub struct FourierGp {
    n: usize,
    power: Vec<f64>,
    scales: Vec<f64>,
    weights: Vec<f64>,
    log_norm: f64,
}

impl FourierGp {
    /// Fails unless every spectrum entry is strictly positive.
    pub fn new(spectrum: &Spectrum1D) -> Result<Self> {
        spectrum.require_positive()?;
        let n = spectrum.n();
        let weights = packed_weights(n);
        let scales: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| (w * spectrum.values()[packed_mode(i, n)]).sqrt())
            .collect();
        let log_norm =
            -(n as f64) * HALF_LN_2PI - scales.iter().map(|s| s.ln()).sum::<f64>() + packed_log_jacobian(n);
        Ok(Self {
            n,
            power: spectrum.values().to_vec(),
            scales,
            weights,
            log_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn residual(&self, f: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        ensure_len(f, self.n, "f")?;
        ensure_len(loc, self.n, "loc")?;
        ensure_finite(f, "f")?;
        ensure_finite(loc, "loc")?;
        Ok(f.iter().zip(loc).map(|(a, b)| a - b).collect())
    }

    fn whiten_coefficients(&self, c: &[Complex64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        pack_into(c, self.n, &mut z);
        for (v, s) in z.iter_mut().zip(&self.scales) {
            *v /= s;
        }
        z
    }

    pub fn whiten(&self, f: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(f, loc)?;
        Ok(self.whiten_coefficients(&fft::rfft_unchecked(&r)))
    }

    pub fn lpdf(&self, f: &[f64], loc: &[f64]) -> Result<f64> {
        let z = self.whiten(f, loc)?;
        Ok(self.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>())
    }

    /// Log density and its gradient with respect to `f`.
    pub fn lpdf_grad(&self, f: &[f64], loc: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = self.residual(f, loc)?;
        let c = fft::rfft_unchecked(&r);
        let z = self.whiten_coefficients(&c);
        let lp = self.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>();
        let scaled: Vec<Complex64> = c.iter().zip(&self.power).map(|(c, p)| -c / p).collect();
        Ok((lp, fft::irfft_unchecked(&scaled, self.n)))
    }

    pub fn inv_transform(&self, z: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        ensure_len(z, self.n, "z")?;
        ensure_len(loc, self.n, "loc")?;
        ensure_finite(z, "z")?;
        let u: Vec<f64> = z.iter().zip(&self.scales).map(|(z, s)| z * s).collect();
        let mut f = fft::irfft_unchecked(&unpack_from(&u, self.n), self.n);
        for (v, m) in f.iter_mut().zip(loc) {
            *v += m;
        }
        Ok(f)
    }

    /// Maps a gradient with respect to `f` to the gradient with respect to `z`.
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        ensure_len(g, self.n, "cotangent")?;
        let mut u = vec![0.0; self.n];
        pack_into(&fft::rfft_unchecked(g), self.n, &mut u);
        for ((v, s), w) in u.iter_mut().zip(&self.scales).zip(&self.weights) {
            *v *= s / w;
        }
        Ok(u)
    }
}

pub fn fourier_lpdf(f: &[f64], loc: &[f64], spectrum: &Spectrum1D) -> Result<f64> {
    FourierGp::new(spectrum)?.lpdf(f, loc)
}

pub fn fourier_lpdf_grad(f: &[f64], loc: &[f64], spectrum: &Spectrum1D) -> Result<Vec<f64>> {
    FourierGp::new(spectrum)?.lpdf_grad(f, loc).map(|(_, g)| g)
}

pub fn fourier_inv_transform(z: &[f64], loc: &[f64], spectrum: &Spectrum1D) -> Result<Vec<f64>> {
    FourierGp::new(spectrum)?.inv_transform(z, loc)
}

pub fn fourier_whiten(f: &[f64], loc: &[f64], spectrum: &Spectrum1D) -> Result<Vec<f64>> {
    FourierGp::new(spectrum)?.whiten(f, loc)
}

pub fn adjoint_inv_transform(g: &[f64], spectrum: &Spectrum1D) -> Result<Vec<f64>> {
    FourierGp::new(spectrum)?.adjoint(g)
}

/// Periodic GP on a 2D grid.
#[derive(Debug, Clone)]
pub struct FourierGp2 {
    n1: usize,
    n2: usize,
    power: DMatrix<f64>,
    scales: DMatrix<f64>,
    weights: DMatrix<f64>,
    log_norm: f64,
}

impl FourierGp2 {
    pub fn new(spectrum: &Spectrum2D) -> Result<Self> {
        spectrum.require_positive()?;
        let (n1, n2) = spectrum.shape();
        let (packed_power, weights) = packed_spectrum_2d(spectrum);
        let scales = packed_power.zip_map(&weights, |p, w| (p * w).sqrt());
        let log_norm = -((n1 * n2) as f64) * HALF_LN_2PI - scales.iter().map(|s| s.ln()).sum::<f64>()
            + packed_log_jacobian_2d(n1, n2);
        Ok(Self {
            n1,
            n2,
            power: spectrum.values().clone(),
            scales,
            weights,
            log_norm,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn scales(&self) -> &DMatrix<f64> {
        &self.scales
    }

    /// Spectrum value behind each packed coordinate. These are the eigenvalues of the
    /// covariance along the white-noise coordinate directions.
    pub fn packed_power(&self) -> DMatrix<f64> {
        self.scales.zip_map(&self.weights, |s, w| s * s / w)
    }

    fn check(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        if m.shape() != (self.n1, self.n2) {
            return Err(invalid(format!(
                "{what}: expected shape {:?}, got {:?}",
                (self.n1, self.n2),
                m.shape()
            )));
        }
        ensure_finite(m.as_slice(), what)
    }

    fn whiten_coefficients(&self, c: &DMatrix<Complex64>) -> DMatrix<f64> {
        pack2_unchecked(c, self.n1, self.n2).component_div(&self.scales)
    }

    pub fn whiten(&self, f: &DMatrix<f64>, loc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(f, "f")?;
        self.check(loc, "loc")?;
        Ok(self.whiten_coefficients(&fft::rfft2_unchecked(&(f - loc))))
    }

    pub fn lpdf(&self, f: &DMatrix<f64>, loc: &DMatrix<f64>) -> Result<f64> {
        let z = self.whiten(f, loc)?;
        Ok(self.log_norm - 0.5 * z.norm_squared())
    }

    pub fn lpdf_grad(&self, f: &DMatrix<f64>, loc: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.check(f, "f")?;
        self.check(loc, "loc")?;
        let c = fft::rfft2_unchecked(&(f - loc));
        let lp = self.log_norm - 0.5 * self.whiten_coefficients(&c).norm_squared();
        let scaled = c.zip_map(&self.power, |c, p| -c / p);
        Ok((lp, fft::irfft2_unchecked(&scaled, self.n1, self.n2)))
    }

    pub fn inv_transform(&self, z: &DMatrix<f64>, loc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(z, "z")?;
        self.check(loc, "loc")?;
        let c = unpack2_unchecked(&z.component_mul(&self.scales));
        Ok(fft::irfft2_unchecked(&c, self.n1, self.n2) + loc)
    }

    pub fn adjoint(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(g, "cotangent")?;
        let u = pack2_unchecked(&fft::rfft2_unchecked(g), self.n1, self.n2);
        Ok(u.component_mul(&self.scales).component_div(&self.weights))
    }
}

pub fn fourier_lpdf_2d(f: &DMatrix<f64>, loc: &DMatrix<f64>, spectrum: &Spectrum2D) -> Result<f64> {
    FourierGp2::new(spectrum)?.lpdf(f, loc)
}

pub fn fourier_lpdf_grad_2d(f: &DMatrix<f64>, loc: &DMatrix<f64>, spectrum: &Spectrum2D) -> Result<DMatrix<f64>> {
    FourierGp2::new(spectrum)?.lpdf_grad(f, loc).map(|(_, g)| g)
}

pub fn fourier_inv_transform_2d(z: &DMatrix<f64>, loc: &DMatrix<f64>, spectrum: &Spectrum2D) -> Result<DMatrix<f64>> {
    FourierGp2::new(spectrum)?.inv_transform(z, loc)
}

pub fn fourier_whiten_2d(f: &DMatrix<f64>, loc: &DMatrix<f64>, spectrum: &Spectrum2D) -> Result<DMatrix<f64>> {
    FourierGp2::new(spectrum)?.whiten(f, loc)
}

pub fn adjoint_inv_transform_2d(g: &DMatrix<f64>, spectrum: &Spectrum2D) -> Result<DMatrix<f64>> {
    FourierGp2::new(spectrum)?.adjoint(g)
}

/// Low-frequency basis keeping whole modes `0..modes`.
///
/// The latent vector holds the packed entries of the retained modes in packed order:
/// the real parts of modes `0..modes` followed by the imaginary parts of the retained
/// interior modes, so its length is `2 * modes - 1` unless the Nyquist mode of an
/// even grid is retained.
#[derive(Debug, Clone)]
pub struct TruncatedBasis {
    spectrum: Spectrum1D,
    modes: usize,
    retained: Vec<usize>,
    scales: Vec<f64>,
    weights: Vec<f64>,
    power_fraction: f64,
}

impl TruncatedBasis {
    pub fn new(spectrum: Spectrum1D, modes: usize) -> Result<Self> {
        let n = spectrum.n();
        if modes == 0 || modes > half_len(n) {
            return Err(invalid(format!(
                "number of modes must lie in 1..={}, got {modes}",
                half_len(n)
            )));
        }
        if let Some(k) = spectrum.values()[..modes].iter().position(|&v| v <= 0.0) {
            return Err(invalid(format!("retained mode {k} has non-positive power")));
        }
        let h = half_len(n);
        let retained: Vec<usize> = (0..modes)
            .chain((1..modes.min(interior_modes(n) + 1)).map(|k| h + k - 1))
            .collect();
        let all_weights = packed_weights(n);
        let weights: Vec<f64> = retained.iter().map(|&i| all_weights[i]).collect();
        let scales = retained
            .iter()
            .zip(&weights)
            .map(|(&i, w)| (w * spectrum.values()[packed_mode(i, n)]).sqrt())
            .collect();
        let power_fraction = retained_power_fraction(&spectrum, modes);
        Ok(Self {
            spectrum,
            modes,
            retained,
            scales,
            weights,
            power_fraction,
        })
    }

    pub fn spectrum(&self) -> &Spectrum1D {
        &self.spectrum
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    /// Length of the latent vector.
    pub fn latent_dim(&self) -> usize {
        self.retained.len()
    }

    /// Share of the prior variance carried by the retained modes.
    pub fn retained_power_fraction(&self) -> f64 {
        self.power_fraction
    }

    /// Positions of the latent entries in the full packed layout.
    pub fn retained_indices(&self) -> &[usize] {
        &self.retained
    }

    /// Full-length packed latent vector with zeros at the discarded entries.
    pub fn embed(&self, z: &[f64]) -> Result<Vec<f64>> {
        ensure_len(z, self.latent_dim(), "z")?;
        let mut full = vec![0.0; self.n()];
        for (&i, &v) in self.retained.iter().zip(z) {
            full[i] = v;
        }
        Ok(full)
    }

    pub fn inv_transform(&self, z: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        ensure_len(z, self.latent_dim(), "z")?;
        ensure_len(loc, n, "loc")?;
        ensure_finite(z, "z")?;
        let mut u = vec![0.0; n];
        for ((&i, &v), s) in self.retained.iter().zip(z).zip(&self.scales) {
            u[i] = v * s;
        }
        let mut f = fft::irfft_unchecked(&unpack_from(&u, n), n);
        for (v, m) in f.iter_mut().zip(loc) {
            *v += m;
        }
        Ok(f)
    }

    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        ensure_len(g, n, "cotangent")?;
        let mut u = vec![0.0; n];
        pack_into(&fft::rfft_unchecked(g), n, &mut u);
        Ok(self
            .retained
            .iter()
            .zip(&self.scales)
            .zip(&self.weights)
            .map(|((&i, s), w)| u[i] * s / w)
            .collect())
    }
}

pub fn truncated_inv_transform(z: &[f64], loc: &[f64], basis: &TruncatedBasis) -> Result<Vec<f64>> {
    basis.inv_transform(z, loc)
}

/// Appends `pad` missing rows and columns after the data.
pub fn pad_grid(y: &MaskedGrid, pad: [usize; 2]) -> MaskedGrid {
    let (r, c) = y.shape();
    let (nr, nc) = (r + pad[0], c + pad[1]);
    let values = DMatrix::from_fn(nr, nc, |i, j| if i < r && j < c { y.values()[(i, j)] } else { 0.0 });
    let mask = DMatrix::from_fn(nr, nc, |i, j| i < r && j < c && y.mask()[(i, j)]);
    MaskedGrid::new(values, mask, y.cell_size()).expect("padding preserves grid invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::se_spectrum_1d;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pack_examples() {
        let p = pack_rfft(&HalfSpectrum::new(vec![c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 4).unwrap()).unwrap();
        assert_eq!(p.values(), &[4.0, 0.0, 0.0, 0.0]);
        let h = HalfSpectrum::new(vec![c(5.0, 0.0), c(1.0, 2.0), c(3.0, -1.0)], 5).unwrap();
        let p = pack_rfft(&h).unwrap();
        assert_eq!(p.values(), &[5.0, 1.0, 3.0, 2.0, -1.0]);
        assert_eq!(unpack_rfft(&p).unwrap(), h);
    }

    #[test]
    fn pack_rejects_complex_dc() {
        let h = HalfSpectrum::new(vec![c(1.0, 0.5), c(0.0, 0.0)], 2).unwrap();
        assert!(pack_rfft(&h).is_err());
    }

    #[test]
    fn pack_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 7, 8, 9] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = fft::rfft(&x).unwrap();
            assert_eq!(unpack_rfft(&pack_rfft(&h).unwrap()).unwrap(), h);
        }
        for (n1, n2) in [(1, 1), (3, 4), (4, 6), (5, 5), (4, 3)] {
            let x = DMatrix::from_fn(n1, n2, |_, _| rng.random_range(-1.0..1.0));
            let h = fft::rfft2(&x).unwrap();
            let back = unpack_rfft2(&pack_rfft2(&h).unwrap()).unwrap();
            for (a, b) in back.coefficients().iter().zip(h.coefficients().iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn serialized_layout_is_versioned() {
        let p = PackedCoefficients::new(vec![1.0, 2.0], vec![2]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains(PACKED_LAYOUT_VERSION));
        assert_eq!(serde_json::from_str::<PackedCoefficients>(&json).unwrap(), p);
        let bad = json.replace(PACKED_LAYOUT_VERSION, "packed-rfft-v0");
        assert!(serde_json::from_str::<PackedCoefficients>(&bad).is_err());
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = PackedCoefficients::from_matrix(&m);
        assert_eq!(p.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(p.to_matrix().unwrap(), m);
    }

    #[test]
    fn flat_spectrum_scales() {
        let s = Spectrum1D::new(vec![1.0; 3], 4, 4.0).unwrap();
        let scales = coefficient_scales(&s).unwrap();
        let r2 = 2f64.sqrt();
        for (a, b) in scales.iter().zip([2.0, r2, 2.0, r2]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_positive_spectrum_is_rejected() {
        let s = Spectrum1D::new(vec![1.0, 0.0, 1.0], 4, 1.0).unwrap();
        assert!(fourier_lpdf(&[0.0; 4], &[0.0; 4], &s).is_err());
    }

    #[test]
    fn one_point_is_univariate_normal() {
        let s = Spectrum1D::new(vec![2.5], 1, 1.0).unwrap();
        let lp = fourier_lpdf(&[1.3], &[0.2], &s).unwrap();
        let expected = -HALF_LN_2PI - 0.5 * 2.5f64.ln() - 0.5 * 1.1 * 1.1 / 2.5;
        assert_relative_eq!(lp, expected, epsilon = 1e-12);
        let f = fourier_inv_transform(&[0.7], &[0.2], &s).unwrap();
        assert_relative_eq!(f[0], 0.2 + 2.5f64.sqrt() * 0.7, epsilon = 1e-14);
    }

    #[test]
    fn flat_spectrum_is_white_noise() {
        let sigma2: f64 = 1.7;
        let s = Spectrum1D::new(vec![sigma2; 3], 4, 1.0).unwrap();
        let f = [0.3, -1.0, 2.0, 0.5];
        let loc = [0.1, 0.0, -0.2, 0.4];
        let expected: f64 = f
            .iter()
            .zip(&loc)
            .map(|(a, b)| -HALF_LN_2PI - 0.5 * sigma2.ln() - 0.5 * (a - b) * (a - b) / sigma2)
            .sum();
        assert_relative_eq!(fourier_lpdf(&f, &loc, &s).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn whiten_at_loc_is_zero() {
        let s = se_spectrum_1d(9, 1.0, 0.3, 1.0).unwrap();
        let loc = vec![0.5; 9];
        assert!(fourier_whiten(&loc, &loc, &s).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(fourier_inv_transform(&[0.0; 9], &loc, &s).unwrap(), loc);
        assert!(fourier_lpdf_grad(&loc, &loc, &s).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(adjoint_inv_transform(&[0.0; 9], &s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_matches_explicit_determinant() {
        for n in 1..=9 {
            let mut m = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let mut col = vec![0.0; n];
                pack_into(&fft::rfft_unchecked(&e), n, &mut col);
                m.column_mut(j).copy_from_slice(&col);
            }
            assert_relative_eq!(m.determinant().abs().ln(), packed_log_jacobian(n), epsilon = 1e-10);
        }
        for (n1, n2) in [(1, 1), (2, 2), (3, 4), (4, 3), (2, 5)] {
            let total = n1 * n2;
            let mut m = DMatrix::zeros(total, total);
            for j in 0..total {
                let mut e = DMatrix::zeros(n1, n2);
                e[j] = 1.0;
                let p = pack2_unchecked(&fft::rfft2_unchecked(&e), n1, n2);
                m.column_mut(j).copy_from(&DMatrix::from_column_slice(total, 1, p.as_slice()).column(0));
            }
            assert_relative_eq!(m.determinant().abs().ln(), packed_log_jacobian_2d(n1, n2), epsilon = 1e-10);
        }
    }

    #[test]
    fn truncation_dimensions() {
        let s = se_spectrum_1d(8, 1.0, 0.2, 1.0).unwrap();
        assert_eq!(TruncatedBasis::new(s.clone(), 1).unwrap().latent_dim(), 1);
        assert_eq!(TruncatedBasis::new(s.clone(), 3).unwrap().latent_dim(), 5);
        assert_eq!(TruncatedBasis::new(s.clone(), 5).unwrap().latent_dim(), 8);
        assert!(TruncatedBasis::new(s.clone(), 0).is_err());
        assert!(TruncatedBasis::new(s, 6).is_err());
        let s = se_spectrum_1d(7, 1.0, 0.2, 1.0).unwrap();
        assert_eq!(TruncatedBasis::new(s, 4).unwrap().latent_dim(), 7);
    }

    #[test]
    fn dc_only_truncation_is_constant() {
        let s = se_spectrum_1d(10, 1.0, 0.2, 1.0).unwrap();
        let basis = TruncatedBasis::new(s.clone(), 1).unwrap();
        let f = truncated_inv_transform(&[1.5], &[0.0; 10], &basis).unwrap();
        let expected = (10.0 * s.values()[0]).sqrt() * 1.5 / 10.0;
        assert!(f.iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn pad_grid_examples() {
        let grid = MaskedGrid::full(DMatrix::from_element(25, 50, 1.0), 1.0).unwrap();
        let padded = pad_grid(&grid, [10, 10]);
        assert_eq!(padded.shape(), (35, 60));
        assert_eq!(padded.missing_count(), 35 * 60 - 25 * 50);
        assert_eq!(padded.values().view((0, 0), (25, 50)), grid.values().view((0, 0), (25, 50)));
        assert_eq!(pad_grid(&grid, [0, 0]), grid);
    }
}
