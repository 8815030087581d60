//! Fisher and Bayesian information of the ideal and 1-bit receivers.
//!
//! For a block with samples `s` and derivative `s'`:
//!
//! ```text
//! F_ideal = gamma^2 sum s'_n^2
//! F_1bit  = gamma^2 / (2 pi) sum s'_n^2 exp(-gamma^2 s_n^2) / (Q(gamma s_n) Q(-gamma s_n))
//! ```
//!
//! The 1-bit summands are formed in the log domain so that they stay finite
//! when `|gamma s_n|` is large.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal_models::{DelayWaveform, SampledWaveform, WaveformEval};
use crate::special::{log_q, GaussHermite};
use crate::state_space::Gaussian;

/// Which receiver an information measure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    OneBit,
    Ideal,
}

impl Receiver {
    pub const BOTH: [Receiver; 2] = [Receiver::OneBit, Receiver::Ideal];
}

/// Per-sample information weight of the hard limiter relative to the ideal
/// receiver, `exp(-x^2) / (2 pi Q(x) Q(-x))`; equals `2/pi` at `x = 0`.
pub fn onebit_sample_weight(x: f64) -> f64 {
    (-x * x - log_q(x) - log_q(-x)).exp() / (2.0 * PI)
}

pub fn fisher_onebit(eval: &WaveformEval, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    g2 * eval
        .s
        .iter()
        .zip(&eval.ds_dtheta)
        .map(|(&s, &d)| d * d * onebit_sample_weight(gamma * s))
        .sum::<f64>()
}

pub fn fisher_ideal(eval: &WaveformEval, gamma: f64) -> f64 {
    gamma * gamma * eval.ds_dtheta.iter().map(|d| d * d).sum::<f64>()
}

pub fn fisher(eval: &WaveformEval, gamma: f64, receiver: Receiver) -> f64 {
    match receiver {
        Receiver::OneBit => fisher_onebit(eval, gamma),
        Receiver::Ideal => fisher_ideal(eval, gamma),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoReport {
    pub fisher_onebit: f64,
    pub fisher_ideal: f64,
    /// `fisher_onebit / fisher_ideal`.
    pub chi: f64,
}

impl InfoReport {
    pub fn new(eval: &WaveformEval, gamma: f64) -> Self {
        let fisher_onebit = fisher_onebit(eval, gamma);
        let fisher_ideal = fisher_ideal(eval, gamma);
        InfoReport {
            fisher_onebit,
            fisher_ideal,
            chi: fisher_onebit / fisher_ideal,
        }
    }
}

/// `E[F(theta)]` for `theta ~ dist`, by Gauss-Hermite quadrature.
pub fn expected_fisher(
    waveform: &SampledWaveform,
    gamma: f64,
    block: usize,
    dist: Gaussian,
    receiver: Receiver,
    rule: &GaussHermite,
) -> Result<f64> {
    if !(dist.mean.is_finite() && dist.variance.is_finite() && dist.variance >= 0.0) {
        return Err(Error::invalid(format!(
            "parameter distribution needs finite moments, got {dist:?}"
        )));
    }
    rule.try_expect(dist.mean, dist.variance, |theta| {
        waveform.eval(theta, block).map(|e| fisher(&e, gamma, receiver))
    })
}

/// Spread of the 1-bit Fisher information over delays within one code period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayInvariance {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `max |F(theta_i) - mean| / mean` over the grid.
    pub max_relative_deviation: f64,
}

/// Evaluates the 1-bit Fisher information of a delay waveform on `grid`
/// equally spaced delays over one period, offset by `start`.
pub fn delay_invariance(
    waveform: &DelayWaveform,
    gamma: f64,
    start: f64,
    grid: usize,
) -> Result<DelayInvariance> {
    if grid == 0 {
        return Err(Error::invalid("delay grid needs at least one point"));
    }
    let period = waveform.period();
    let values = (0..grid)
        .map(|i| {
            let theta = start + period * i as f64 / grid as f64;
            waveform.eval(theta, 1).map(|e| fisher_onebit(&e, gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = values.iter().sum::<f64>() / grid as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_relative_deviation = values
        .iter()
        .map(|v| (v - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(DelayInvariance {
        mean,
        min,
        max,
        max_relative_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesReport {
    pub jbar_onebit: f64,
    pub jbar_ideal: f64,
    pub j_prior: f64,
    /// `(jbar_onebit + j_prior) / (jbar_ideal + j_prior)`.
    pub psi: f64,
}

impl BayesReport {
    pub fn j_onebit(&self) -> f64 {
        self.jbar_onebit + self.j_prior
    }

    pub fn j_ideal(&self) -> f64 {
        self.jbar_ideal + self.j_prior
    }
}

/// Assembles the Bayesian information of both receivers from expected Fisher
/// information and prior information.
pub fn bayes_report(fbar_onebit: f64, fbar_ideal: f64, j_prior: f64) -> Result<BayesReport> {
    for (name, v) in [
        ("fbar_onebit", fbar_onebit),
        ("fbar_ideal", fbar_ideal),
        ("j_prior", j_prior),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let j_onebit = fbar_onebit + j_prior;
    let j_ideal = fbar_ideal + j_prior;
    if j_ideal == 0.0 || j_onebit == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(BayesReport {
        jbar_onebit: fbar_onebit,
        jbar_ideal: fbar_ideal,
        j_prior,
        psi: j_onebit / j_ideal,
    })
}
