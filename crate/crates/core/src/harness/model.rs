//! A zero-mean benchmark prior behind a backend-independent interface.

use nalgebra::DMatrix;

use super::config::{Backend, BenchmarkConfig};
use crate::dense::CholeskyGp;
use crate::error::Result;
use crate::fourier::FourierGp;
use crate::graph::{DagGp, GraphConditionals};
use crate::kernels::{se_spectrum_1d, Kernel};

/// Integer locations `0..n` as one-dimensional points.
pub fn benchmark_locations(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![i as f64]).collect()
}

#[derive(Debug, Clone)]
enum Inner {
    Dense(CholeskyGp),
    Graph(GraphConditionals),
    Fourier(FourierGp),
}

/// Squared exponential GP prior on the benchmark locations for one backend.
///
/// The graph backend uses `q` nearest predecessors and the Fourier backend the
/// periodic kernel of period `n`, so the three priors agree only approximately.
#[derive(Debug, Clone)]
pub struct LatentPrior {
    inner: Inner,
    loc: Vec<f64>,
}

impl LatentPrior {
    pub fn new(config: &BenchmarkConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        let kernel = Kernel::squared_exponential(config.sigma, config.ell)?;
        let points = benchmark_locations(n);
        let inner = match config.backend {
            Backend::Dense => Inner::Dense(CholeskyGp::from_kernel(&kernel, &points, vec![0.0; n])?),
            Backend::Graph => Inner::Graph(DagGp::nearest_neighbors(points, config.q, kernel)?.conditionals()?),
            Backend::Fourier => Inner::Fourier(FourierGp::new(&se_spectrum_1d(
                n,
                config.sigma,
                config.ell,
                n as f64,
            )?)?),
        };
        Ok(Self {
            inner,
            loc: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.loc.len()
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            Inner::Dense(_) => Backend::Dense,
            Inner::Graph(_) => Backend::Graph,
            Inner::Fourier(_) => Backend::Fourier,
        }
    }

    pub fn lpdf_grad(&self, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &self.inner {
            Inner::Dense(gp) => gp.lpdf_grad(f),
            Inner::Graph(c) => c.lpdf_grad(f, &self.loc),
            Inner::Fourier(gp) => gp.lpdf_grad(f, &self.loc),
        }
    }

    pub fn inv_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Inner::Dense(gp) => gp.inv_transform(z),
            Inner::Graph(c) => c.inv_transform(z, &self.loc),
            Inner::Fourier(gp) => gp.inv_transform(z, &self.loc),
        }
    }

    pub fn whiten(&self, f: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Inner::Dense(gp) => gp.whiten(f),
            Inner::Graph(c) => c.whiten(f, &self.loc),
            Inner::Fourier(gp) => gp.whiten(f, &self.loc),
        }
    }

    /// Gradient with respect to `z` of a function of `f = inv_transform(z)`.
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Inner::Dense(gp) => gp.adjoint(g),
            Inner::Graph(c) => c.adjoint(g),
            Inner::Fourier(gp) => gp.adjoint(g),
        }
    }

    /// Covariance of the law this backend actually implies, built column by column
    /// from the inverse transform.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.inv_transform(&e)?;
            l.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(&l * l.transpose())
    }

    /// Dense Gaussian with the implied covariance, for conjugate posterior oracles.
    pub fn dense_equivalent(&self) -> Result<CholeskyGp> {
        CholeskyGp::with_jitter(self.loc.clone(), self.covariance()?, 0.0)
    }
}
