//! Block observations of the ideal and hard-limited receivers and their exact
//! log-likelihoods.
//!
//! The ideal receiver sees `y = gamma * s(theta) + eta` with `eta ~ N(0, I)`;
//! the 1-bit receiver only sees `r = sign(y)`, so that
//! `p(r | theta) = prod_n Q(-gamma r_n s_n)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::special::log_q;
use crate::streams::{StreamFactory, StreamPosition};

/// Hard limiter: `+1` for `x >= 0`, `-1` otherwise.
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// White Gaussian receiver noise with unit variance per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseModel {
    streams: StreamFactory,
}

impl NoiseModel {
    pub const VARIANCE: f64 = 1.0;

    pub fn new(seed: u64) -> Self {
        NoiseModel {
            streams: StreamFactory::new(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.streams.master_seed()
    }

    pub fn draw(&self, position: StreamPosition, n: usize) -> Vec<f64> {
        let mut rng = self.streams.rng(position);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockObservation {
    pub ideal: Option<Vec<f64>>,
    pub onebit: Vec<i8>,
}

impl BlockObservation {
    /// Quantizes an ideal observation; both views are kept.
    pub fn from_ideal(y: Vec<f64>) -> Self {
        let onebit = y.iter().map(|&v| sign(v)).collect();
        BlockObservation {
            ideal: Some(y),
            onebit,
        }
    }

    pub fn onebit_only(onebit: Vec<i8>) -> Result<Self> {
        check_signs(&onebit)?;
        Ok(BlockObservation {
            ideal: None,
            onebit,
        })
    }

    pub fn len(&self) -> usize {
        self.onebit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onebit.is_empty()
    }
}

/// Draws one block: `y = gamma * s + eta` and `r = sign(y)`.
///
/// The noise comes from the stream at `position`, so repeated calls with the
/// same seed and position return identical observations.
pub fn sample_block(
    signal: &[f64],
    gamma: f64,
    noise: &NoiseModel,
    position: StreamPosition,
) -> Result<BlockObservation> {
    check_gamma(gamma)?;
    let eta = noise.draw(position, signal.len());
    let y = signal
        .iter()
        .zip(eta)
        .map(|(s, e)| gamma * s + e)
        .collect();
    Ok(BlockObservation::from_ideal(y))
}

/// `sum_n log Q(-gamma r_n s_n)`; never positive.
pub fn loglik_onebit(r: &[i8], signal: &[f64], gamma: f64) -> Result<f64> {
    check_lengths(r.len(), signal.len())?;
    ensure_finite("gamma", gamma)?;
    Ok(r
        .iter()
        .zip(signal)
        .map(|(&rn, &sn)| log_q(-gamma * f64::from(rn) * sn))
        .sum())
}

/// `-(N/2) log(2 pi) - |y - gamma s|^2 / 2`.
pub fn loglik_ideal(y: &[f64], signal: &[f64], gamma: f64) -> Result<f64> {
    check_lengths(y.len(), signal.len())?;
    ensure_finite("gamma", gamma)?;
    let residual: f64 = y
        .iter()
        .zip(signal)
        .map(|(yn, sn)| {
            let d = yn - gamma * sn;
            d * d
        })
        .sum();
    Ok(-0.5 * y.len() as f64 * (2.0 * PI).ln() - 0.5 * residual)
}

fn check_lengths(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

fn check_signs(r: &[i8]) -> Result<()> {
    if r.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::invalid("1-bit samples must be +1 or -1"));
    }
    Ok(())
}
