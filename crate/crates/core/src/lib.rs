//! Gaussian-process densities and whitening transforms with three interchangeable
//! backends: dense Cholesky, sparse DAG factorizations, and Fourier diagonalization
//! on regular grids.

pub mod dense;
pub mod error;
pub mod fft;
pub mod fourier;
pub mod graph;
pub mod grid;
pub mod harness;
pub mod kernels;

pub use error::{GpError, Result};
