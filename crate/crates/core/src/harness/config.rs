use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, GpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Dense,
    Graph,
    Fourier,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Dense, Backend::Graph, Backend::Fourier];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Graph => "graph",
            Backend::Fourier => "fourier",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| invalid(format!("unknown backend {s:?}; expected dense, graph or fourier")))
    }
}

/// Whether the sampler moves on `f` directly or on white noise `z` with `f = phi^-1(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    Centered,
    NonCentered,
}

impl Parameterization {
    pub fn name(self) -> &'static str {
        match self {
            Parameterization::Centered => "centered",
            Parameterization::NonCentered => "non-centered",
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameterization {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(Parameterization::Centered),
            "non-centered" => Ok(Parameterization::NonCentered),
            _ => Err(invalid(format!(
                "unknown parameterization {s:?}; expected centered or non-centered"
            ))),
        }
    }
}

/// Settings of the one-dimensional regression benchmark.
///
/// Locations are the integers `0..n`. The Fourier backend treats them as a periodic
/// grid of period `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n: usize,
    /// Observation noise scale.
    pub kappa: f64,
    pub sigma: f64,
    pub ell: f64,
    pub backend: Backend,
    pub parameterization: Parameterization,
    /// Number of nearest predecessors for the graph backend.
    pub q: usize,
    pub seed: u64,
    pub budget_seconds: f64,
    pub warmup: usize,
    pub draws: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: 64,
            kappa: 1.0,
            sigma: 1.0,
            ell: 1.0,
            backend: Backend::Fourier,
            parameterization: Parameterization::Centered,
            q: 5,
            seed: 0,
            budget_seconds: 60.0,
            warmup: 500,
            draws: 500,
        }
    }
}

impl BenchmarkConfig {
    /// Checks the invariants. A zero noise scale passes here because simulation
    /// allows it; inference rejects it separately.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(invalid(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        for (name, v) in [("sigma", self.sigma), ("ell", self.ell), ("budget_seconds", self.budget_seconds)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.backend == Backend::Graph && self.q == 0 {
            return Err(invalid("the graph backend needs q >= 1"));
        }
        if self.draws == 0 {
            return Err(invalid("at least one draw is required"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in Backend::ALL {
            assert_eq!(b.name().parse::<Backend>().unwrap(), b);
        }
        for p in [Parameterization::Centered, Parameterization::NonCentered] {
            assert_eq!(p.name().parse::<Parameterization>().unwrap(), p);
        }
        assert!("sparse".parse::<Backend>().is_err());
    }

    #[test]
    fn validation() {
        assert!(BenchmarkConfig::default().validate().is_ok());
        let bad = [
            BenchmarkConfig { n: 1, ..Default::default() },
            BenchmarkConfig { kappa: -1.0, ..Default::default() },
            BenchmarkConfig { ell: 0.0, ..Default::default() },
            BenchmarkConfig {
                backend: Backend::Graph,
                q: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert!(BenchmarkConfig { kappa: 0.0, ..Default::default() }.validate().is_ok());
    }
}
