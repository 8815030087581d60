//! First-order autoregressive parameter evolution
//! `theta_k = alpha * theta_{k-1} + z_k`, `z_k ~ N(0, sigma^2)`, with a
//! Gaussian initial prior `theta_0 ~ N(mu0, sigma0^2)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};

/// A univariate normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        ensure_finite("mean", mean)?;
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(format!(
                "variance must be finite and >= 0, got {variance}"
            )));
        }
        Ok(Gaussian { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceModel {
    alpha: f64,
    sigma: f64,
    mu0: f64,
    sigma0: f64,
}

impl StateSpaceModel {
    pub fn new(alpha: f64, sigma: f64, mu0: f64, sigma0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::invalid(format!("sigma0 must be positive, got {sigma0}")));
        }
        ensure_finite("mu0", mu0)?;
        Ok(StateSpaceModel {
            alpha,
            sigma,
            mu0,
            sigma0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn prior(&self) -> Gaussian {
        Gaussian {
            mean: self.mu0,
            variance: self.sigma0 * self.sigma0,
        }
    }

    /// `1 - alpha^2`, without cancellation for alpha close to one.
    pub fn one_minus_alpha_sq(&self) -> f64 {
        (1.0 - self.alpha) * (1.0 + self.alpha)
    }

    /// Mean and variance of `theta_k`:
    /// `alpha^k mu0` and `alpha^{2k} sigma0^2 + sigma^2 (1 - alpha^{2k}) / (1 - alpha^2)`.
    pub fn marginal_moments(&self, k: usize) -> Gaussian {
        let a2 = self.alpha * self.alpha;
        let mean = self.mu0 * self.alpha.powi(k as i32);
        let a2k = a2.powi(k as i32);
        let geometric = if self.alpha == 0.0 {
            if k == 0 {
                0.0
            } else {
                1.0
            }
        } else {
            // (1 - a^{2k}) / (1 - a^2) with 1 - a^{2k} = -expm1(2k ln a).
            -((2.0 * k as f64) * self.alpha.ln()).exp_m1() / self.one_minus_alpha_sq()
        };
        Gaussian {
            mean,
            variance: a2k * self.sigma0 * self.sigma0 + geometric * self.sigma * self.sigma,
        }
    }

    /// Limit of [`StateSpaceModel::marginal_moments`] as `k -> infinity`.
    pub fn stationary(&self) -> Gaussian {
        Gaussian {
            mean: 0.0,
            variance: self.sigma * self.sigma / self.one_minus_alpha_sq(),
        }
    }

    /// `theta_0 .. theta_K` drawn from `rng`.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, blocks: usize, rng: &mut R) -> Vec<f64> {
        let mut theta = Vec::with_capacity(blocks + 1);
        let z: f64 = rng.sample(StandardNormal);
        theta.push(self.mu0 + self.sigma0 * z);
        for k in 1..=blocks {
            let z: f64 = rng.sample(StandardNormal);
            theta.push(self.alpha * theta[k - 1] + self.sigma * z);
        }
        theta
    }

    /// Propagates a single value one block: `alpha * theta + sigma * z`.
    pub fn propagate<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.alpha * theta + self.sigma * z
    }

    /// `log p(theta_k | theta_prev)`.
    pub fn transition_logpdf(&self, theta_k: f64, theta_prev: f64) -> f64 {
        let d = (theta_k - self.alpha * theta_prev) / self.sigma;
        -0.5 * d * d - ((2.0 * PI).sqrt() * self.sigma).ln()
    }

    /// Expected squared score of the transition density with respect to
    /// `theta_{k-1}`: `alpha^2 / sigma^2`.
    pub fn info_prev(&self) -> f64 {
        self.alpha * self.alpha / (self.sigma * self.sigma)
    }

    /// Expected squared score with respect to `theta_k`: `1 / sigma^2`.
    pub fn info_current(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    /// Expected cross term of both scores: `-alpha / sigma^2`.
    pub fn info_cross(&self) -> f64 {
        -self.alpha / (self.sigma * self.sigma)
    }
}
