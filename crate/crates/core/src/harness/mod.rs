//! Experiment harness: simulation, sampling, timing and the count-grid workflow.

pub mod config;
pub mod count_fit;
pub mod ess;
pub mod hmc;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod scaling;
pub mod simulate;
pub mod threads;

pub use config::{Backend, BenchmarkConfig, Parameterization};
pub use count_fit::{masked_count_fit, CountFitResult, CountFitSettings, CountModelParams};
pub use ess::{batch_means, BatchMeans};
pub use mcmc::{run_mcmc, ChainResult};
pub use metrics::{gaussian_filter_estimate, smse};
pub use model::LatentPrior;
pub use scaling::{scaling_benchmark, ScalingRow, ScalingSettings, ScalingTable};
pub use simulate::{simulate_benchmark, Simulation};
