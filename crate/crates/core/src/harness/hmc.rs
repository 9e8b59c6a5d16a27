//! Hamiltonian Monte Carlo with an identity mass matrix, a fixed number of leapfrog
//! steps and a step size tuned by dual averaging during warmup.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmcSettings {
    pub warmup: usize,
    pub draws: usize,
    pub steps: usize,
    pub target_accept: f64,
    /// Each trajectory uses `step_size * U(1 - jitter, 1 + jitter)`.
    pub step_jitter: f64,
    /// Energy error beyond which a trajectory counts as divergent.
    pub max_energy_error: f64,
    /// Starting step size; found by a doubling search when absent.
    pub initial_step_size: Option<f64>,
}

impl Default for HmcSettings {
    fn default() -> Self {
        Self {
            warmup: 500,
            draws: 500,
            steps: 16,
            target_accept: 0.8,
            step_jitter: 0.8,
            max_energy_error: 1000.0,
            initial_step_size: None,
        }
    }
}

impl HmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.draws == 0 {
            return Err(invalid("HMC needs at least one leapfrog step and one draw"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(invalid("target acceptance must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(invalid("step jitter must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Nesterov dual averaging of the log step size (Hoffman and Gelman).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_step: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * initial_step).ln(),
            target,
            h_bar: 0.0,
            log_eps: initial_step.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Step size to keep after adaptation ends.
    pub fn final_step_size(&self) -> f64 {
        if self.t == 0.0 {
            self.step_size()
        } else {
            self.log_eps_bar.exp()
        }
    }

    pub fn update(&mut self, accept_prob: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }
}

/// Position with its cached log density and gradient.
#[derive(Debug, Clone)]
pub struct State {
    pub position: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl State {
    pub fn new<F>(position: Vec<f64>, target: &mut F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let (logp, grad) = target(&position)?;
        if !logp.is_finite() {
            return Err(invalid("initial position has non-finite log density"));
        }
        Ok(Self { position, logp, grad })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TransitionInfo {
    pub accept_prob: f64,
    pub accepted: bool,
    pub divergent: bool,
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

/// One HMC transition. Failed target evaluations inside the trajectory count as
/// divergences and the proposal is rejected.
pub fn transition<F, R>(
    state: &mut State,
    target: &mut F,
    step_size: f64,
    steps: usize,
    max_energy_error: f64,
    rng: &mut R,
) -> TransitionInfo
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    R: Rng + ?Sized,
{
    let mut p: Vec<f64> = (0..state.position.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = -state.logp + kinetic(&p);
    let mut q = state.position.clone();
    let mut grad = state.grad.clone();
    let mut logp = state.logp;
    let diverged = TransitionInfo {
        accept_prob: 0.0,
        accepted: false,
        divergent: true,
    };
    for _ in 0..steps {
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * g;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step_size * pi;
        }
        match target(&q) {
            Ok((lp, g)) if lp.is_finite() => {
                logp = lp;
                grad = g;
            }
            _ => return diverged,
        }
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * g;
        }
    }
    let h1 = -logp + kinetic(&p);
    let error = h1 - h0;
    if !error.is_finite() || error > max_energy_error {
        return diverged;
    }
    let accept_prob = (-error).exp().min(1.0);
    let accepted = rng.random::<f64>() < accept_prob;
    if accepted {
        state.position = q;
        state.logp = logp;
        state.grad = grad;
    }
    TransitionInfo {
        accept_prob,
        accepted,
        divergent: false,
    }
}

/// Doubles or halves a trial step size until a single leapfrog step crosses an
/// acceptance probability of one half.
pub fn find_reasonable_step_size<F, R>(state: &State, target: &mut F, rng: &mut R) -> f64
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    R: Rng + ?Sized,
{
    let mut eps = 1.0;
    let log_accept = |eps: f64, target: &mut F, rng: &mut R| -> f64 {
        let mut s = state.clone();
        let info = transition(&mut s, target, eps, 1, f64::INFINITY, rng);
        if info.divergent {
            f64::NEG_INFINITY
        } else {
            info.accept_prob.ln()
        }
    };
    let up = log_accept(eps, target, rng) > 0.5f64.ln();
    for _ in 0..60 {
        let la = log_accept(eps, target, rng);
        if up != (la > 0.5f64.ln()) {
            break;
        }
        eps = if up { eps * 2.0 } else { eps / 2.0 };
    }
    eps
}

#[derive(Debug, Clone)]
pub struct HmcOutput {
    pub draws: Vec<Vec<f64>>,
    /// Mean acceptance probability over the sampling phase.
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
}

/// Runs warmup with step-size adaptation, then collects `draws` positions.
pub fn sample<F, R>(mut target: F, init: Vec<f64>, settings: &HmcSettings, rng: &mut R) -> Result<HmcOutput>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    R: Rng + ?Sized,
{
    settings.validate()?;
    let mut state = State::new(init, &mut target)?;
    let eps0 = match settings.initial_step_size {
        Some(e) => e,
        None => find_reasonable_step_size(&state, &mut target, rng),
    };
    let mut adapt = DualAveraging::new(eps0, settings.target_accept);
    let jittered = |eps: f64, rng: &mut R| {
        if settings.step_jitter > 0.0 {
            eps * (1.0 + settings.step_jitter * (2.0 * rng.random::<f64>() - 1.0))
        } else {
            eps
        }
    };
    for _ in 0..settings.warmup {
        let eps = jittered(adapt.step_size(), rng);
        let info = transition(&mut state, &mut target, eps, settings.steps, settings.max_energy_error, rng);
        adapt.update(info.accept_prob);
    }
    let step_size = adapt.final_step_size();
    let mut draws = Vec::with_capacity(settings.draws);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    for _ in 0..settings.draws {
        let eps = jittered(step_size, rng);
        let info = transition(&mut state, &mut target, eps, settings.steps, settings.max_energy_error, rng);
        accept_sum += info.accept_prob;
        divergences += usize::from(info.divergent);
        draws.push(state.position.clone());
    }
    Ok(HmcOutput {
        draws,
        acceptance_rate: accept_sum / settings.draws as f64,
        step_size,
        divergences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(scales: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x: &[f64]| {
            let lp = -0.5 * x.iter().zip(&scales).map(|(v, s)| (v / s).powi(2)).sum::<f64>();
            let g = x.iter().zip(&scales).map(|(v, s)| -v / (s * s)).collect();
            Ok((lp, g))
        }
    }

    #[test]
    fn recovers_gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scales = vec![1.0, 3.0, 0.5];
        let settings = HmcSettings {
            draws: 4000,
            ..Default::default()
        };
        let out = sample(gaussian(scales.clone()), vec![1.0; 3], &settings, &mut rng).unwrap();
        assert!(out.acceptance_rate > 0.6 && out.acceptance_rate < 0.97, "{}", out.acceptance_rate);
        assert_eq!(out.divergences, 0);
        for (j, s) in scales.iter().enumerate() {
            let xs: Vec<f64> = out.draws.iter().map(|d| d[j]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!(mean.abs() < 0.2 * s, "mean {mean}");
            assert!((var.sqrt() / s - 1.0).abs() < 0.15, "sd {} vs {s}", var.sqrt());
        }
    }

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut da = DualAveraging::new(1.0, 0.8);
        for _ in 0..50 {
            da.update(0.2);
        }
        assert!(da.step_size() < 1.0);
        let mut da = DualAveraging::new(1.0, 0.8);
        for _ in 0..50 {
            da.update(1.0);
        }
        assert!(da.step_size() > 1.0);
    }

    #[test]
    fn huge_steps_diverge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut target = gaussian(vec![0.01]);
        let mut state = State::new(vec![0.0], &mut target).unwrap();
        let info = transition(&mut state, &mut target, 10.0, 16, 1000.0, &mut rng);
        assert!(info.divergent && !info.accepted);
        assert_eq!(state.position, vec![0.0]);
    }
}
