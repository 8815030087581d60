//! Block-recursive estimators: a sequential importance resampling (SIR)
//! particle filter with the transition density as proposal, and the exact
//! Kalman filter for the linear-Gaussian model.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::state_space::{Gaussian, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampler {
    #[default]
    Systematic,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFilterConfig {
    particles: usize,
    kappa: f64,
    resampler: Resampler,
}

impl ParticleFilterConfig {
    pub fn new(particles: usize, kappa: f64, resampler: Resampler) -> Result<Self> {
        if particles < 2 {
            return Err(Error::invalid(format!("need at least 2 particles, got {particles}")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::invalid(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        Ok(ParticleFilterConfig {
            particles,
            kappa,
            resampler,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn resampler(&self) -> Resampler {
        self.resampler
    }
}

/// Weighted particle approximation of the filtering posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    particles: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleCloud {
    /// A cloud with uniform weights.
    pub fn uniform(particles: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("particle cloud cannot be empty"));
        }
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Ok(ParticleCloud { particles, weights })
    }

    /// A cloud with the given weights, normalized to unit sum.
    pub fn weighted(particles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if particles.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: particles.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights must not all be zero"));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(ParticleCloud { particles, weights })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.particles.iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (p - m) * (p - m))
            .sum()
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Smallest interval holding every particle.
    pub fn range(&self) -> (f64, f64) {
        self.particles
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }
}

/// `L` independent draws from the prior with uniform weights.
pub fn pf_init<R: Rng + ?Sized>(
    config: &ParticleFilterConfig,
    prior: Gaussian,
    rng: &mut R,
) -> ParticleCloud {
    let sd = prior.std_dev();
    let particles = (0..config.particles)
        .map(|_| prior.mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ParticleCloud::uniform(particles).expect("config guarantees L >= 2")
}

/// Moves every particle through the transition density.
pub fn pf_predict<R: Rng + ?Sized>(cloud: &mut ParticleCloud, model: &StateSpaceModel, rng: &mut R) {
    for p in &mut cloud.particles {
        *p = model.propagate(*p, rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Posterior mean from the reweighted cloud, before any resampling.
    pub estimate: f64,
    /// Effective sample size after reweighting.
    pub ess: f64,
    pub resampled: bool,
}

/// Multiplies the weights by the block likelihoods, forms the estimate, and
/// resamples when the effective sample size drops to `kappa * L` or below.
///
/// `block` only labels a degenerate-cloud error.
pub fn pf_update<R: Rng + ?Sized>(
    cloud: &mut ParticleCloud,
    log_likelihoods: &[f64],
    config: &ParticleFilterConfig,
    block: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    if log_likelihoods.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            actual: log_likelihoods.len(),
        });
    }
    let mut logw: Vec<f64> = cloud
        .weights
        .iter()
        .zip(log_likelihoods)
        .map(|(w, ll)| {
            let v = w.ln() + ll;
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        })
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateCloud { block });
    }
    for v in &mut logw {
        *v = (*v - max).exp();
    }
    let total: f64 = logw.iter().sum();
    for (w, v) in cloud.weights.iter_mut().zip(&logw) {
        *w = v / total;
    }
    let estimate = cloud.mean();
    let ess = cloud.ess();
    let resampled = ess <= config.kappa * cloud.len() as f64;
    if resampled {
        resample(cloud, config.resampler, rng);
    }
    Ok(StepOutcome {
        estimate,
        ess,
        resampled,
    })
}

/// Predict-update cycle with a batch log-likelihood evaluator.
pub fn pf_step<R, F>(
    cloud: &mut ParticleCloud,
    model: &StateSpaceModel,
    config: &ParticleFilterConfig,
    block: usize,
    rng: &mut R,
    mut loglik: F,
) -> Result<StepOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    pf_predict(cloud, model, rng);
    let mut ll = vec![0.0; cloud.len()];
    loglik(&cloud.particles, &mut ll)?;
    pf_update(cloud, &ll, config, block, rng)
}

/// Replaces the cloud by `L` equally weighted draws from itself.
pub fn resample<R: Rng + ?Sized>(cloud: &mut ParticleCloud, scheme: Resampler, rng: &mut R) {
    let n = cloud.len();
    let idx = match scheme {
        Resampler::Systematic => systematic_indices(&cloud.weights, rng.random::<f64>()),
        Resampler::Multinomial => {
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            indices_for_sorted_uniforms(&cloud.weights, &u)
        }
    };
    cloud.particles = idx.iter().map(|&i| cloud.particles[i]).collect();
    cloud.weights.fill(1.0 / n as f64);
}

/// Systematic resampling with offset `u0` in `[0, 1)`.
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let u: Vec<f64> = (0..n).map(|i| (i as f64 + u0) / n as f64).collect();
    indices_for_sorted_uniforms(weights, &u)
}

fn indices_for_sorted_uniforms(weights: &[f64], u: &[f64]) -> Vec<usize> {
    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(u.len());
    let (mut i, mut cum) = (0, weights[0]);
    for &x in u {
        while x >= cum && i < last {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// Polynomial interpolant on Chebyshev points of the first kind, used to
/// replace many exact log-likelihood evaluations inside the particle range by
/// a few.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevInterpolant {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl ChebyshevInterpolant {
    /// Nodes of an `n`-point fit on `[lo, hi]`.
    pub fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        (0..n)
            .map(|j| c + h * (PI * (j as f64 + 0.5) / n as f64).cos())
            .collect()
    }

    /// Fits to `values` taken at [`ChebyshevInterpolant::nodes`].
    pub fn from_values(lo: f64, hi: f64, values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::invalid("interpolant needs at least one node"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid interval [{lo}, {hi}]")));
        }
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum();
                2.0 * s / n as f64
            })
            .collect();
        Ok(ChebyshevInterpolant { lo, hi, coeffs })
    }

    pub fn fit<F: FnMut(f64) -> Result<f64>>(lo: f64, hi: f64, n: usize, mut f: F) -> Result<Self> {
        let values = Self::nodes(lo, hi, n)
            .into_iter()
            .map(&mut f)
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(lo, hi, &values)
    }

    /// Clenshaw evaluation; arguments are clamped to the fit interval.
    pub fn eval(&self, x: f64) -> f64 {
        let h = 0.5 * (self.hi - self.lo);
        let t = if h > 0.0 {
            ((x - 0.5 * (self.lo + self.hi)) / h).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * self.coeffs[0]
    }
}

/// One predict-update cycle of the Kalman filter for `y = gamma x theta + eta`,
/// `eta ~ N(0, I)`.
pub fn kalman_step(
    state: Gaussian,
    model: &StateSpaceModel,
    y: &[f64],
    pilot: &[f64],
    gamma: f64,
) -> Result<Gaussian> {
    if y.len() != pilot.len() {
        return Err(Error::LengthMismatch {
            expected: pilot.len(),
            actual: y.len(),
        });
    }
    if !(state.variance > 0.0) {
        return Err(Error::invalid("Kalman state variance must be positive"));
    }
    let a = model.alpha();
    let pred_mean = a * state.mean;
    let pred_var = a * a * state.variance + model.sigma() * model.sigma();
    let info: f64 = gamma * gamma * pilot.iter().map(|x| x * x).sum::<f64>();
    let score: f64 = gamma * pilot.iter().zip(y).map(|(x, v)| x * v).sum::<f64>();
    let variance = pred_var / (1.0 + pred_var * info);
    let mean = variance * (pred_mean / pred_var + score);
    Gaussian::new(mean, variance)
}
