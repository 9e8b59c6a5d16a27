//! Wall-time scaling of one log-density-plus-gradient evaluation per backend.
//!
//! Each timed evaluation starts from hyperparameters: the dense backend builds and
//! factorizes the kernel matrix, the graph backend computes its conditionals and
//! the Fourier backend evaluates the spectrum. The nearest-neighbor graph itself
//! does not depend on hyperparameters and is built outside the timer.

use std::hint::black_box;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{Backend, Parameterization};
use super::model::benchmark_locations;
use super::simulate::seeded_rng;
use crate::dense::CholeskyGp;
use crate::error::{invalid, Result};
use crate::fourier::FourierGp;
use crate::graph::DagGp;
use crate::kernels::{cov_matrix, se_spectrum_1d, Kernel};

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSettings {
    pub repetitions: usize,
    /// Wall-clock cap per backend.
    pub budget: Duration,
    pub q: usize,
    pub parameterization: Parameterization,
    /// Each repetition times a batch of evaluations lasting at least this long.
    pub min_batch: Duration,
    pub seed: u64,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            repetitions: 5,
            budget: Duration::from_secs(60),
            q: 5,
            parameterization: Parameterization::Centered,
            min_batch: Duration::from_millis(20),
            seed: 0,
        }
    }
}

/// One CSV row. Sizes skipped because of the budget have no timings and
/// `truncated = true`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub backend: Backend,
    pub n: usize,
    pub parameterization: Parameterization,
    pub mean_seconds: Option<f64>,
    pub sd_seconds: Option<f64>,
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn is_truncated(&self) -> bool {
        self.rows.iter().any(|r| r.truncated)
    }

    /// Least-squares slope of `log time` against `log n` over completed sizes.
    pub fn slope(&self, backend: Backend) -> Option<f64> {
        let points: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.backend == backend)
            .filter_map(|r| r.mean_seconds.map(|t| (r.n as f64, t)))
            .collect();
        loglog_slope(&points)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `ln y` on `ln x`; `None` with fewer than two points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Closure performing one timed evaluation at size `n`.
fn evaluator(backend: Backend, n: usize, settings: &ScalingSettings) -> Result<Box<dyn FnMut() -> Result<f64>>> {
    let mut rng = seeded_rng(settings.seed, n as u64);
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let zeros = vec![0.0; n];
    let kernel = Kernel::squared_exponential(1.0, 1.0)?;
    let non_centered = settings.parameterization == Parameterization::NonCentered;
    Ok(match backend {
        Backend::Dense => {
            let points = benchmark_locations(n);
            Box::new(move || {
                let gp = CholeskyGp::new(zeros.clone(), cov_matrix(&kernel, &points)?)?;
                if non_centered {
                    let f = gp.inv_transform(&v)?;
                    Ok(gp.adjoint(&f)?[0])
                } else {
                    Ok(gp.lpdf_grad(&v)?.0)
                }
            })
        }
        Backend::Graph => {
            let dag = DagGp::nearest_neighbors(benchmark_locations(n), settings.q, kernel)?;
            Box::new(move || {
                let cond = dag.conditionals()?;
                if non_centered {
                    let f = cond.inv_transform(&v, &zeros)?;
                    Ok(cond.adjoint(&f)?[0])
                } else {
                    Ok(cond.lpdf_grad(&v, &zeros)?.0)
                }
            })
        }
        Backend::Fourier => Box::new(move || {
            let gp = FourierGp::new(&se_spectrum_1d(n, 1.0, 1.0, n as f64)?)?;
            if non_centered {
                let f = gp.inv_transform(&v, &zeros)?;
                Ok(gp.adjoint(&f)?[0])
            } else {
                Ok(gp.lpdf_grad(&v, &zeros)?.0)
            }
        }),
    })
}

/// Times `backend` at each size in ascending order.
///
/// A size is skipped, and marked truncated together with all larger sizes, once the
/// elapsed time plus a cubic extrapolation of the next measurement exceeds the budget.
pub fn scaling_benchmark(backend: Backend, sizes: &[usize], settings: &ScalingSettings) -> Result<Vec<ScalingRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes must be strictly ascending"));
    }
    if sizes.first().is_some_and(|&n| n < 2) {
        return Err(invalid("sizes must be at least 2"));
    }
    if settings.repetitions == 0 {
        return Err(invalid("at least one repetition is required"));
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(sizes.len());
    let mut last: Option<(usize, f64)> = None;
    let mut truncated = false;
    for &n in sizes {
        if !truncated {
            let predicted = last.map_or(0.0, |(m, t)| t * (n as f64 / m as f64).powi(3) * (settings.repetitions + 1) as f64);
            truncated = start.elapsed().as_secs_f64() + predicted > settings.budget.as_secs_f64();
        }
        if truncated {
            rows.push(ScalingRow {
                backend,
                n,
                parameterization: settings.parameterization,
                mean_seconds: None,
                sd_seconds: None,
                truncated: true,
            });
            continue;
        }
        let mut eval = evaluator(backend, n, settings)?;
        let t0 = Instant::now();
        black_box(eval()?);
        let first = t0.elapsed().as_secs_f64().max(1e-9);
        let batch = (settings.min_batch.as_secs_f64() / first).ceil().max(1.0) as usize;
        let mut times = Vec::with_capacity(settings.repetitions);
        for _ in 0..settings.repetitions {
            let t0 = Instant::now();
            for _ in 0..batch {
                black_box(eval()?);
            }
            times.push(t0.elapsed().as_secs_f64() / batch as f64);
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let sd = if times.len() > 1 {
            (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        last = Some((n, mean));
        rows.push(ScalingRow {
            backend,
            n,
            parameterization: settings.parameterization,
            mean_seconds: Some(mean),
            sd_seconds: Some(sd),
            truncated: false,
        });
    }
    Ok(rows)
}

/// Powers of two `2^lo..=2^hi`.
pub fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(2.5))).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.5).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn small_run_and_csv() {
        let settings = ScalingSettings {
            repetitions: 2,
            min_batch: Duration::from_millis(1),
            ..Default::default()
        };
        let mut table = ScalingTable::default();
        for backend in Backend::ALL {
            table.rows.extend(scaling_benchmark(backend, &[8, 16], &settings).unwrap());
        }
        assert!(!table.is_truncated());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("backend,n,parameterization,mean_seconds,sd_seconds,truncated\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn zero_budget_truncates_every_size() {
        let settings = ScalingSettings {
            repetitions: 1,
            budget: Duration::ZERO,
            min_batch: Duration::from_millis(1),
            ..Default::default()
        };
        let rows = scaling_benchmark(Backend::Fourier, &[8, 16, 32], &settings).unwrap();
        assert!(rows.iter().all(|r| r.truncated && r.mean_seconds.is_none()));
        assert!(scaling_benchmark(Backend::Fourier, &[16, 8], &settings).is_err());
    }
}
