//! Exact multivariate normal machinery based on a Cholesky factor of the full
//! covariance matrix. Costs `O(n^3)` to build and serves as the reference for the
//! approximate backends.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, ensure_len, invalid, GpError, Result};
use crate::kernels::{cov_matrix, Kernel};

/// Relative jitter added to the diagonal before the first factorization attempt.
pub const DEFAULT_JITTER: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const MAX_JITTER: f64 = 1e-4;

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Cholesky factorization of `matrix + jitter * I`, escalating the jitter tenfold
/// from `DEFAULT_JITTER * scale` up to `MAX_JITTER * scale`.
pub(crate) fn factorize_with_jitter(matrix: &DMatrix<f64>, scale: f64) -> Option<(DMatrix<f64>, f64)> {
    let mut rel = DEFAULT_JITTER;
    while rel <= MAX_JITTER * (1.0 + 1e-9) {
        let jitter = rel * scale;
        if let Some(l) = factorize_exact(matrix, jitter) {
            return Some((l, jitter));
        }
        rel *= 10.0;
    }
    None
}

pub(crate) fn factorize_exact(matrix: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let mut m = matrix.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    let chol = m.cholesky()?;
    let l = chol.unpack();
    l.diagonal().iter().all(|&d| d > 0.0 && d.is_finite()).then_some(l)
}

/// Multivariate normal `N(loc, L L^T)` where `L L^T = K + jitter * I`.
#[derive(Debug, Clone)]
pub struct CholeskyGp {
    loc: DVector<f64>,
    chol: DMatrix<f64>,
    jitter: f64,
}

impl CholeskyGp {
    /// Factorizes `cov` with the default jitter policy, scaled by its largest diagonal entry.
    pub fn new(loc: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_shapes(&loc, &cov)?;
        let scale = cov.diagonal().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let (chol, jitter) = factorize_with_jitter(&cov, scale).ok_or(GpError::Factorization {
            node: None,
            jitter: MAX_JITTER * scale,
        })?;
        Ok(Self {
            loc: DVector::from_vec(loc),
            chol,
            jitter,
        })
    }

    /// Factorizes `cov + jitter * I` exactly, without escalation.
    pub fn with_jitter(loc: Vec<f64>, cov: DMatrix<f64>, jitter: f64) -> Result<Self> {
        check_shapes(&loc, &cov)?;
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(invalid("jitter must be finite and non-negative"));
        }
        let chol = factorize_exact(&cov, jitter).ok_or(GpError::Factorization { node: None, jitter })?;
        Ok(Self {
            loc: DVector::from_vec(loc),
            chol,
            jitter,
        })
    }

    /// GP prior of `kernel` at `points`, jitter relative to the kernel variance.
    pub fn from_kernel(kernel: &Kernel, points: &[Vec<f64>], loc: Vec<f64>) -> Result<Self> {
        let cov = cov_matrix(kernel, points)?;
        Self::new(loc, cov)
    }

    pub fn n(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &[f64] {
        self.loc.as_slice()
    }

    /// Lower-triangular factor `L`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `K + jitter * I`, reconstructed from the factor.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// `log det L`, half the log determinant of the covariance.
    pub fn log_det_chol(&self) -> f64 {
        self.chol.diagonal().iter().map(|d| d.ln()).sum()
    }

    fn residual(&self, f: &[f64]) -> Result<DVector<f64>> {
        ensure_len(f, self.n(), "f")?;
        ensure_finite(f, "f")?;
        Ok(DVector::from_column_slice(f) - &self.loc)
    }

    pub fn lpdf(&self, f: &[f64]) -> Result<f64> {
        let mut r = self.residual(f)?;
        self.chol.solve_lower_triangular_mut(&mut r);
        Ok(-(self.n() as f64) * HALF_LN_2PI - self.log_det_chol() - 0.5 * r.norm_squared())
    }

    /// Log density and its gradient `-(K + jitter I)^{-1} (f - loc)`.
    pub fn lpdf_grad(&self, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut r = self.residual(f)?;
        self.chol.solve_lower_triangular_mut(&mut r);
        let lp = -(self.n() as f64) * HALF_LN_2PI - self.log_det_chol() - 0.5 * r.norm_squared();
        self.chol.tr_solve_lower_triangular_mut(&mut r);
        Ok((lp, r.iter().map(|v| -v).collect()))
    }

    /// `f = loc + L z`.
    pub fn inv_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        ensure_len(z, self.n(), "z")?;
        ensure_finite(z, "z")?;
        let f = &self.loc + &self.chol * DVector::from_column_slice(z);
        Ok(f.data.into())
    }

    /// `z = L^{-1} (f - loc)`.
    pub fn whiten(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.residual(f)?;
        self.chol.solve_lower_triangular_mut(&mut r);
        Ok(r.data.into())
    }

    /// Pulls a gradient with respect to `f` back to `z`: `L^T g`.
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        ensure_len(g, self.n(), "cotangent")?;
        Ok((self.chol.tr_mul(&DVector::from_column_slice(g))).data.into())
    }
}

fn check_shapes(loc: &[f64], cov: &DMatrix<f64>) -> Result<()> {
    if !cov.is_square() {
        return Err(invalid("covariance must be square"));
    }
    if cov.nrows() != loc.len() {
        return Err(invalid(format!(
            "mean has length {} but covariance is {}x{}",
            loc.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.is_empty() {
        return Err(invalid("covariance must be non-empty"));
    }
    ensure_finite(loc, "loc")?;
    ensure_finite(cov.as_slice(), "covariance")
}

pub fn dense_lpdf(f: &[f64], gp: &CholeskyGp) -> Result<f64> {
    gp.lpdf(f)
}

pub fn dense_lpdf_grad(f: &[f64], gp: &CholeskyGp) -> Result<Vec<f64>> {
    gp.lpdf_grad(f).map(|(_, g)| g)
}

pub fn dense_inv_transform(z: &[f64], gp: &CholeskyGp) -> Result<Vec<f64>> {
    gp.inv_transform(z)
}

pub fn dense_whiten(f: &[f64], gp: &CholeskyGp) -> Result<Vec<f64>> {
    gp.whiten(f)
}

/// Log density of independent standard normals.
pub fn std_normal_lpdf(z: &[f64]) -> f64 {
    -(z.len() as f64) * HALF_LN_2PI - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

/// Conjugate posterior of `f` given `y ~ N(f, noise_sd^2 I)` and the prior `gp`.
///
/// Returns the posterior mean and covariance, with `K = L L^T` including jitter.
pub fn gp_regression_posterior(
    y: &[f64],
    noise_sd: f64,
    gp: &CholeskyGp,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(invalid(format!("noise scale must be positive, got {noise_sd}")));
    }
    let r = gp.residual(y)?;
    let n = gp.n();
    let k = gp.covariance();
    let mut s = k.clone();
    for i in 0..n {
        s[(i, i)] += noise_sd * noise_sd;
    }
    let chol = s.cholesky().ok_or(GpError::Factorization {
        node: None,
        jitter: 0.0,
    })?;
    let alpha = chol.solve(&r);
    let mean = &gp.loc + &k * alpha;
    let sk = chol.solve(&k);
    let mut cov = &k - &k * sk;
    cov = (&cov + cov.transpose()) * 0.5;
    Ok((mean.data.into(), cov))
}
