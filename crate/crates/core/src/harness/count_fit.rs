//! Counts on a masked grid with a negative-binomial likelihood and a latent
//! two-dimensional Fourier GP.
//!
//! `y[i, j] ~ NegBinomial2(mean = exp(f[i, j]), concentration = 1 / kappa)`, so the
//! variance is `mu + kappa mu^2`. The latent field lives on the padded grid, uses a
//! Matérn kernel whose length scale is measured in cells and whose period is the
//! padded shape, and is parameterized by white noise: `f = loc + phi^-1(z)`.
//!
//! Priors: half-t(2) on `sigma` and `kappa`, t(2) on `loc`, and `log(ell)` uniform
//! between the configured bounds. The white noise is updated by HMC and the four
//! hyperparameters by random-walk Metropolis on `(log sigma, log ell, log kappa, loc)`.
//! The HMC step on the white noise is preconditioned by `1 + w ktilde`, where `w` is
//! the average Fisher information per cell at the mean count and `ktilde` the current
//! spectrum. Each sweep moves every hyperparameter twice, once holding the white noise
//! fixed and once holding the latent field fixed, and adds a joint move that keeps
//! `sigma^2 / ell^(2 nu)` constant.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::hmc::{find_reasonable_step_size, transition, DualAveraging, HmcSettings, State};
use super::metrics::{gaussian_filter_estimate, smse, smse_counts};
use super::simulate::seeded_rng;
use crate::error::{invalid, Result};
use crate::fourier::{pad_grid, FourierGp2};
use crate::grid::MaskedGrid;
use crate::kernels::matern_spectrum_2d;

const SIGMA: usize = 0;
const ELL: usize = 1;
const KAPPA: usize = 2;
const LOC: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountFitSettings {
    /// Missing rows and columns appended to the grid.
    pub pad: [usize; 2],
    /// Bounds of the log-uniform length-scale prior, in cells.
    pub length_scale_bounds: [f64; 2],
    pub nu: f64,
    pub warmup: usize,
    pub draws: usize,
    pub steps: usize,
    /// Metropolis sweeps over the hyperparameters per iteration.
    pub hyper_sweeps: usize,
    /// Pins `sigma` instead of sampling it.
    pub fixed_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for CountFitSettings {
    fn default() -> Self {
        Self {
            pad: [10, 10],
            length_scale_bounds: [2.0, 28.0],
            nu: 1.5,
            warmup: 500,
            draws: 500,
            steps: 16,
            hyper_sweeps: 2,
            fixed_sigma: None,
            seed: 0,
        }
    }
}

impl CountFitSettings {
    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.length_scale_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(invalid(format!("length-scale bounds must satisfy 0 < lo < hi, got {lo}, {hi}")));
        }
        if !(self.nu > 0.0) {
            return Err(invalid("nu must be positive"));
        }
        if self.draws == 0 || self.steps == 0 {
            return Err(invalid("at least one draw and one leapfrog step are required"));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("a fixed sigma must be positive"));
            }
        }
        Ok(())
    }
}

/// Hyperparameters of the count model; the length scale is in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountModelParams {
    pub sigma: f64,
    pub length_scale: f64,
    pub kappa: f64,
    pub loc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountFitResult {
    /// Posterior median of the latent log mean over the unpadded grid.
    pub median_f: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub length_scale: Vec<f64>,
    pub kappa: Vec<f64>,
    pub loc: Vec<f64>,
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
    /// Post-warmup acceptance rate of every hyperparameter move.
    pub move_acceptance: Vec<MoveAcceptance>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoveAcceptance {
    /// Coordinate moved, or `ridge` for the joint move that keeps `sigma^2 / ell^(2 nu)`
    /// fixed.
    pub parameter: &'static str,
    /// Whether the move holds the latent field fixed rather than the white noise.
    pub holds_field: bool,
    pub rate: f64,
}

/// Linear-interpolation quantile of unsorted samples.
pub fn quantile(samples: &[f64], p: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let h = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

impl CountFitResult {
    /// Central interval of the length-scale draws with the given coverage.
    pub fn length_scale_interval(&self, level: f64) -> (f64, f64) {
        let tail = 0.5 * (1.0 - level);
        (quantile(&self.length_scale, tail), quantile(&self.length_scale, 1.0 - tail))
    }

    pub fn median_length_scale(&self) -> f64 {
        quantile(&self.length_scale, 0.5)
    }

    /// `exp(median f)`, the predicted counts.
    pub fn predicted_counts(&self) -> DMatrix<f64> {
        self.median_f.map(f64::exp)
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_half_t2(x: f64) -> f64 {
    -1.5 * (1.0 + 0.5 * x * x).ln()
}

struct Model {
    shape: (usize, usize),
    padded: MaskedGrid,
    observed: Vec<(usize, usize, f64)>,
    nu: f64,
    log_bounds: [f64; 2],
}

impl Model {
    fn gp(&self, sigma: f64, ell: f64) -> Result<FourierGp2> {
        let (n1, n2) = self.padded.shape();
        let s = matern_spectrum_2d(n1, n2, self.nu, sigma, [ell, ell], [n1 as f64, n2 as f64])?;
        FourierGp2::new(&s)
    }

    /// Negative-binomial log likelihood of the observed cells.
    fn loglik(&self, f: &DMatrix<f64>, kappa: f64) -> f64 {
        let phi = 1.0 / kappa;
        let ln_phi = phi.ln();
        let mut total = 0.0;
        for &(i, j, y) in &self.observed {
            let eta = f[(i, j)];
            let ln_den = ln_add_exp(ln_phi, eta);
            total += ln_gamma(y + phi) - ln_gamma(phi) - ln_gamma(y + 1.0) + phi * (ln_phi - ln_den) + y * (eta - ln_den);
        }
        total
    }

    /// Terms of the log likelihood that depend on `f`, and their gradient.
    fn loglik_grad(&self, f: &DMatrix<f64>, kappa: f64) -> (f64, DMatrix<f64>) {
        let phi = 1.0 / kappa;
        let ln_phi = phi.ln();
        let mut grad = DMatrix::zeros(f.nrows(), f.ncols());
        let mut total = 0.0;
        for &(i, j, y) in &self.observed {
            let eta = f[(i, j)];
            let ln_den = ln_add_exp(ln_phi, eta);
            total += y * eta - (y + phi) * ln_den;
            grad[(i, j)] = y - (y + phi) * (eta - ln_den).exp();
        }
        (total, grad)
    }

    fn log_prior(&self, theta: &[f64; 4]) -> f64 {
        let ln_ell = theta[ELL];
        if ln_ell < self.log_bounds[0] || ln_ell > self.log_bounds[1] {
            return f64::NEG_INFINITY;
        }
        let (sigma, kappa) = (theta[SIGMA].exp(), theta[KAPPA].exp());
        log_half_t2(sigma) + theta[SIGMA] + log_half_t2(kappa) + theta[KAPPA] + log_half_t2(theta[LOC])
    }
}

/// Random-walk proposal whose scale is tuned toward 0.44 acceptance during warmup.
#[derive(Debug, Clone, Copy)]
struct RandomWalk {
    scale: f64,
    accepts: usize,
    tries: usize,
}

impl Default for RandomWalk {
    fn default() -> Self {
        Self {
            scale: 0.1,
            accepts: 0,
            tries: 0,
        }
    }
}

impl RandomWalk {
    fn record(&mut self, accepted: bool, iter: usize, sampling: bool) {
        if sampling {
            self.tries += 1;
            self.accepts += usize::from(accepted);
        } else {
            let a = if accepted { 1.0 } else { 0.0 };
            self.scale *= ((a - 0.44) / (iter as f64 + 1.0).powf(0.6)).exp();
        }
    }

    fn rate(&self) -> f64 {
        if self.tries == 0 {
            0.0
        } else {
            self.accepts as f64 / self.tries as f64
        }
    }
}

/// Random-walk Metropolis update of the hyperparameters along `direction`.
struct Move {
    name: &'static str,
    direction: [f64; 4],
    hold_field: bool,
    walk: RandomWalk,
}

impl Move {
    fn new(name: &'static str, direction: [f64; 4], hold_field: bool) -> Self {
        Self {
            name,
            direction,
            hold_field,
            walk: RandomWalk::default(),
        }
    }
}

fn constant(shape: (usize, usize), v: f64) -> DMatrix<f64> {
    DMatrix::from_element(shape.0, shape.1, v)
}

/// Fits the count model and summarizes the posterior over the unpadded grid.
pub fn masked_count_fit(grid: &MaskedGrid, settings: &CountFitSettings) -> Result<CountFitResult> {
    settings.validate()?;
    if grid.observed_count() == 0 {
        return Err(invalid("the grid has no observed cells"));
    }
    let padded = pad_grid(grid, settings.pad);
    let observed: Vec<(usize, usize, f64)> = (0..grid.shape().0)
        .flat_map(|i| (0..grid.shape().1).map(move |j| (i, j)))
        .filter_map(|(i, j)| grid.get(i, j).map(|y| (i, j, y)))
        .collect();
    if observed.iter().any(|&(_, _, y)| y < 0.0 || y.fract() != 0.0) {
        return Err(invalid("observed counts must be non-negative integers"));
    }
    let [lo, hi] = settings.length_scale_bounds;
    let model = Model {
        shape: grid.shape(),
        padded,
        observed,
        nu: settings.nu,
        log_bounds: [lo.ln(), hi.ln()],
    };
    sample_model(&model, settings)
}

fn sample_model(model: &Model, settings: &CountFitSettings) -> Result<CountFitResult> {
    let pshape = model.padded.shape();
    let mean_count = if model.observed.is_empty() {
        1.0
    } else {
        model.observed.iter().map(|o| o.2).sum::<f64>() / model.observed.len() as f64
    };
    let observed_fraction = model.observed.len() as f64 / (pshape.0 * pshape.1) as f64;

    let mut rng = seeded_rng(settings.seed, 1);
    let mut theta = [
        settings.fixed_sigma.unwrap_or(1.0).ln(),
        0.5 * (model.log_bounds[0] + model.log_bounds[1]),
        0.5f64.ln(),
        (mean_count + 0.1).ln(),
    ];
    let mut gp = model.gp(theta[SIGMA].exp(), theta[ELL].exp())?;
    let mut state_z = DMatrix::zeros(pshape.0, pshape.1);
    let mut f: DMatrix<f64>;
    let mut loglik: f64;

    let mut moves = Vec::new();
    for hold_field in [false, true] {
        for (k, name) in ["sigma", "length_scale", "kappa", "loc"].into_iter().enumerate() {
            let skip = (k == SIGMA && settings.fixed_sigma.is_some()) || (k == KAPPA && hold_field);
            if !skip {
                let mut direction = [0.0; 4];
                direction[k] = 1.0;
                moves.push(Move::new(name, direction, hold_field));
            }
        }
        if settings.fixed_sigma.is_none() {
            moves.push(Move::new("ridge", [settings.nu, 1.0, 0.0, 0.0], hold_field));
        }
    }

    let jitter = HmcSettings::default().step_jitter;
    let mut adapt: Option<DualAveraging> = None;
    let mut step_size = 0.0;
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let (r, c) = model.shape;
    let mut f_draws: Vec<Vec<f64>> = vec![Vec::with_capacity(settings.draws); r * c];
    let mut hyper_draws: [Vec<f64>; 4] = Default::default();

    for iter in 0..settings.warmup + settings.draws {
        let sampling = iter >= settings.warmup;
        let kappa = theta[KAPPA].exp();
        let loc = constant(pshape, theta[LOC]);
        let info = observed_fraction * mean_count / (1.0 + kappa * mean_count);
        let precond = gp.packed_power().map(|p| (1.0 + info * p).sqrt());
        let mut target = |u: &[f64]| -> Result<(f64, Vec<f64>)> {
            let zm = DMatrix::from_column_slice(pshape.0, pshape.1, u).component_div(&precond);
            let fz = gp.inv_transform(&zm, &loc)?;
            let (ll, g) = model.loglik_grad(&fz, kappa);
            let grad = (gp.adjoint(&g)? - &zm).component_div(&precond);
            Ok((ll - 0.5 * zm.norm_squared(), grad.as_slice().to_vec()))
        };
        let mut state = State::new(state_z.component_mul(&precond).as_slice().to_vec(), &mut target)?;
        if iter == settings.warmup / 2 && iter > 0 {
            adapt = adapt.map(|da| DualAveraging::new(da.final_step_size(), 0.8));
        }
        let da = adapt.get_or_insert_with(|| {
            DualAveraging::new(find_reasonable_step_size(&state, &mut target, &mut rng), 0.8)
        });
        if sampling && step_size == 0.0 {
            step_size = da.final_step_size();
        }
        let eps = if sampling { step_size } else { da.step_size() };
        let eps = eps * (1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0));
        let info = transition(&mut state, &mut target, eps, settings.steps, 1000.0, &mut rng);
        if sampling {
            accept_sum += info.accept_prob;
            divergences += usize::from(info.divergent);
        } else {
            da.update(info.accept_prob);
        }
        state_z = DMatrix::from_vec(pshape.0, pshape.1, state.position).component_div(&precond);
        f = gp.inv_transform(&state_z, &loc)?;
        loglik = model.loglik(&f, kappa);

        for _ in 0..settings.hyper_sweeps {
            for mv in moves.iter_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                let mut proposal = theta;
                for (t, d) in proposal.iter_mut().zip(&mv.direction) {
                    *t += mv.walk.scale * xi * d;
                }
                let prior_new = model.log_prior(&proposal);
                let mut accepted = false;
                if prior_new.is_finite() {
                    let prior_old = model.log_prior(&theta);
                    let new_gp = if mv.direction[SIGMA] != 0.0 || mv.direction[ELL] != 0.0 {
                        Some(model.gp(proposal[SIGMA].exp(), proposal[ELL].exp())?)
                    } else {
                        None
                    };
                    let loc_new = constant(pshape, proposal[LOC]);
                    if mv.hold_field {
                        let gp_new = new_gp.as_ref().unwrap_or(&gp);
                        let log_ratio = gp_new.lpdf(&f, &loc_new)? - gp.lpdf(&f, &constant(pshape, theta[LOC]))?
                            + prior_new
                            - prior_old;
                        accepted = log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio;
                        if accepted {
                            state_z = gp_new.whiten(&f, &loc_new)?;
                        }
                    } else {
                        let new_f = match &new_gp {
                            Some(g) => g.inv_transform(&state_z, &loc_new)?,
                            None => f.add_scalar(proposal[LOC] - theta[LOC]),
                        };
                        let new_loglik = model.loglik(&new_f, proposal[KAPPA].exp());
                        let log_ratio = new_loglik + prior_new - loglik - prior_old;
                        accepted = log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio;
                        if accepted {
                            f = new_f;
                            loglik = new_loglik;
                        }
                    }
                    if accepted {
                        theta = proposal;
                        if let Some(g) = new_gp {
                            gp = g;
                        }
                    }
                }
                mv.walk.record(accepted, iter, sampling);
            }
        }

        if sampling {
            for j in 0..c {
                for i in 0..r {
                    f_draws[i + j * r].push(f[(i, j)]);
                }
            }
            hyper_draws[SIGMA].push(theta[SIGMA].exp());
            hyper_draws[ELL].push(theta[ELL].exp());
            hyper_draws[KAPPA].push(theta[KAPPA].exp());
            hyper_draws[LOC].push(theta[LOC]);
        }
    }

    let medians: Vec<f64> = f_draws.iter().map(|d| quantile(d, 0.5)).collect();
    let [sigma, length_scale, kappa, loc] = hyper_draws;
    Ok(CountFitResult {
        median_f: DMatrix::from_vec(r, c, medians),
        sigma,
        length_scale,
        kappa,
        loc,
        acceptance_rate: accept_sum / settings.draws as f64,
        step_size,
        divergences,
        move_acceptance: moves
            .iter()
            .map(|m| MoveAcceptance {
                parameter: m.name,
                holds_field: m.hold_field,
                rate: m.walk.rate(),
            })
            .collect(),
    })
}

/// Draws a latent field on the padded periodic grid, crops it to `shape` and samples
/// negative-binomial counts for every cell. Returns the fully observed grid and the
/// cropped latent field.
pub fn simulate_count_grid(
    shape: (usize, usize),
    pad: [usize; 2],
    params: &CountModelParams,
    nu: f64,
    seed: u64,
) -> Result<(MaskedGrid, DMatrix<f64>)> {
    if shape.0 == 0 || shape.1 == 0 {
        return Err(invalid("grid shape must be positive"));
    }
    if !(params.kappa > 0.0) {
        return Err(invalid("kappa must be positive"));
    }
    let (n1, n2) = (shape.0 + pad[0], shape.1 + pad[1]);
    let spectrum = matern_spectrum_2d(
        n1,
        n2,
        nu,
        params.sigma,
        [params.length_scale, params.length_scale],
        [n1 as f64, n2 as f64],
    )?;
    let gp = FourierGp2::new(&spectrum)?;
    let mut rng = seeded_rng(seed, 0);
    let z = DMatrix::from_fn(n1, n2, |_, _| rng.sample(StandardNormal));
    let f = gp.inv_transform(&z, &constant((n1, n2), params.loc))?;
    let f = f.view((0, 0), shape).into_owned();
    let phi = 1.0 / params.kappa;
    let mut counts = DMatrix::zeros(shape.0, shape.1);
    for (y, &eta) in counts.iter_mut().zip(f.iter()) {
        let mean = eta.exp();
        let rate = Gamma::new(phi, mean / phi)
            .map_err(|e| invalid(format!("gamma mixing distribution: {e}")))?
            .sample(&mut rng);
        *y = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| invalid(format!("poisson rate {rate}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
    }
    Ok((MaskedGrid::full(counts, 1.0)?, f))
}

/// Chooses `round(fraction * observed)` observed cells uniformly at random.
pub fn holdout_cells(grid: &MaskedGrid, fraction: f64, seed: u64) -> Vec<(usize, usize)> {
    let (r, c) = grid.shape();
    let observed: Vec<(usize, usize)> = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .filter(|&(i, j)| grid.mask()[(i, j)])
        .collect();
    let k = ((fraction.clamp(0.0, 1.0) * observed.len() as f64).round() as usize).min(observed.len());
    let mut rng = seeded_rng(seed, 2);
    let mut cells: Vec<(usize, usize)> = sample_indices(&mut rng, observed.len(), k).into_iter().map(|i| observed[i]).collect();
    cells.sort_unstable();
    cells
}

/// Held-out comparison of the GP fit with Gaussian filters.
#[derive(Debug, Clone, Serialize)]
pub struct HoldoutComparison {
    pub gp_smse: f64,
    /// `(lambda, smse)` for each smoothing scale.
    pub filter_smse: Vec<(f64, f64)>,
}

impl HoldoutComparison {
    pub fn best_filter_smse(&self) -> f64 {
        self.filter_smse.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

/// Scores a fit on the held-out `cells` of `truth` against Gaussian filters applied to
/// `train`. Cells the filter cannot reach are predicted by the training mean.
pub fn compare_with_filters(
    truth: &MaskedGrid,
    train: &MaskedGrid,
    cells: &[(usize, usize)],
    fit: &CountFitResult,
    lambdas: &[f64],
) -> Result<HoldoutComparison> {
    let y: Vec<f64> = cells
        .iter()
        .map(|&(i, j)| truth.get(i, j).ok_or_else(|| invalid("held-out cell is not observed in the truth grid")))
        .collect::<Result<_>>()?;
    let f_hat: Vec<f64> = cells.iter().map(|&(i, j)| fit.median_f[(i, j)]).collect();
    let gp_smse = smse(&y, &f_hat)?;
    let train_mean = train.values().iter().zip(train.mask().iter()).filter(|p| *p.1).map(|p| *p.0).sum::<f64>()
        / train.observed_count() as f64;
    let mut filter_smse = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let est = gaussian_filter_estimate(train, lambda)?;
        let pred: Vec<f64> = cells.iter().map(|&(i, j)| est.get(i, j).unwrap_or(train_mean)).collect();
        filter_smse.push((lambda, smse_counts(&y, &pred)?));
    }
    Ok(HoldoutComparison { gp_smse, filter_smse })
}
