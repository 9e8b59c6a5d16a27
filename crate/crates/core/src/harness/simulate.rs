use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::BenchmarkConfig;
use super::model::LatentPrior;
use crate::error::Result;

/// RNG stream used for data simulation; samplers use other streams of the same seed.
pub const SIMULATION_STREAM: u64 = 0;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub f: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Serialize)]
struct SimulationRow {
    x: usize,
    f: f64,
    y: f64,
}

impl Simulation {
    /// CSV with columns `x,f,y`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (x, (&f, &y)) in self.f.iter().zip(&self.y).enumerate() {
            wtr.serialize(SimulationRow { x, f, y })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draws `f` through the configured backend's inverse transform and `y ~ N(f, kappa^2)`.
pub fn simulate_benchmark(config: &BenchmarkConfig) -> Result<Simulation> {
    let prior = LatentPrior::new(config)?;
    simulate_with_prior(&prior, config.kappa, config.seed)
}

pub fn simulate_with_prior(prior: &LatentPrior, kappa: f64, seed: u64) -> Result<Simulation> {
    let mut rng = seeded_rng(seed, SIMULATION_STREAM);
    let n = prior.n();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let f = prior.inv_transform(&z)?;
    let y = f
        .iter()
        .map(|&v| {
            let e: f64 = rng.sample(StandardNormal);
            v + kappa * e
        })
        .collect();
    Ok(Simulation { f, y })
}
