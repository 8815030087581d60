//! Gaussian tail function and Gauss-Hermite quadrature.
//!
//! `q(x)` is the standard normal upper tail probability. `log_q` stays finite
//! far into both tails: for `x > 8` it goes through the scaled complementary
//! error function `erfcx(z) = exp(z^2) erfc(z)`, which never underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

const LOG_Q_TAIL_START: f64 = 8.0;

/// Upper tail probability of the standard normal distribution.
pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Natural logarithm of [`q`], accurate in both tails.
pub fn log_q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > LOG_Q_TAIL_START {
        let z = x * FRAC_1_SQRT_2;
        (0.5 * erfcx_large(z)).ln() - z * z
    } else if x < -1.0 {
        // Q(x) = 1 - Q(-x), and Q(-x) is small here.
        (-q(-x)).ln_1p()
    } else {
        q(x).ln()
    }
}

/// `exp(z^2) erfc(z)` by its continued fraction; valid for `z` above ~5.
fn erfcx_large(z: f64) -> f64 {
    let mut f = z;
    for n in (1..=64).rev() {
        f = z + (n as f64 * 0.5) / f;
    }
    1.0 / (PI.sqrt() * f)
}

/// Gauss-Hermite rule for expectations under a standard normal:
/// `E[f(Z)] ~= sum_i weights[i] * f(nodes[i])` with `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub const DEFAULT_NODES: usize = 65;

    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let (xs, ws) = physicists_rule(n);
        let nodes = xs.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
        let weights = ws.iter().map(|w| w / PI.sqrt()).collect();
        GaussHermite { nodes, weights }
    }

    /// Shared rule with [`Self::DEFAULT_NODES`] nodes.
    pub fn default_rule() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(Self::DEFAULT_NODES))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ N(mean, variance)`. Zero variance evaluates `f(mean)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mean: f64, variance: f64, mut f: F) -> f64 {
        if variance == 0.0 {
            return f(mean);
        }
        let sd = variance.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mean + sd * z))
            .sum()
    }

    /// Fallible variant of [`GaussHermite::expect`].
    pub fn try_expect<F, E>(&self, mean: f64, variance: f64, mut f: F) -> Result<f64, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        if variance == 0.0 {
            return f(mean);
        }
        let sd = variance.sqrt();
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + sd * z)?;
        }
        Ok(acc)
    }
}

/// Nodes and weights for the weight function `exp(-x^2)`, by Newton iteration
/// on the orthonormal Hermite recurrence.
fn physicists_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    // Ascending order.
    x.reverse();
    w.reverse();
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_reference_values() {
        assert!((q(0.0) - 0.5).abs() < 1e-16);
        assert!((q(-1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((q(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((q(3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
    }

    #[test]
    fn log_q_matches_direct_log_in_the_body() {
        for i in -60..=80 {
            let x = i as f64 * 0.1;
            let direct = q(x).ln();
            assert!(
                (log_q(x) - direct).abs() <= 1e-13 * direct.abs().max(1.0),
                "x = {x}"
            );
        }
    }

    #[test]
    fn log_q_is_continuous_at_the_tail_switch() {
        let below = log_q(LOG_Q_TAIL_START - 1e-12);
        let above = log_q(LOG_Q_TAIL_START + 1e-12);
        assert!((below - above).abs() < 1e-9 * below.abs());
    }

    #[test]
    fn log_q_far_tail_matches_high_precision_values() {
        // ln(erfc(x / sqrt 2) / 2) evaluated with 40-digit arithmetic.
        let reference = [
            (8.5, -39.197_396_428_217_669_289),
            (10.0, -53.231_285_150_512_470_578),
            (20.0, -203.917_155_371_097_263_94),
            (40.0, -804.608_442_013_753_788_17),
            (100.0, -5_005.524_208_694_205_088_6),
            (1000.0, -500_007.826_694_812_184_31),
        ];
        for (x, expected) in reference {
            let got = log_q(x);
            assert!((got - expected).abs() < 1e-13 * expected.abs(), "x = {x}: {got}");
        }
        // Leading asymptotics: log Q(x) ~ -x^2/2 - log(x sqrt(2 pi)).
        let x = 40.0_f64;
        let leading = -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln();
        assert!((log_q(x) - leading).abs() < 1e-3);
        assert!(log_q(1e3).is_finite());
    }

    #[test]
    fn log_q_negative_tail_is_tiny() {
        assert_eq!(log_q(-40.0), 0.0);
        assert!((log_q(-8.0) + q(8.0)).abs() < 1e-30);
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        let rule = GaussHermite::new(33);
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        // E[Z^2k] = (2k - 1)!!
        let mut double_factorial = 1.0;
        for k in 1..=10 {
            double_factorial *= (2 * k - 1) as f64;
            let m = rule.expect(0.0, 1.0, |z| z.powi(2 * k as i32));
            assert!((m - double_factorial).abs() < 1e-10 * double_factorial, "k = {k}");
            let odd = rule.expect(0.0, 1.0, |z| z.powi(2 * k as i32 - 1));
            assert!(odd.abs() < 1e-9 * double_factorial);
        }
    }

    #[test]
    fn gauss_hermite_shifted_gaussian() {
        let rule = GaussHermite::new(20);
        let (m, v) = (1.5, 0.25);
        assert!((rule.expect(m, v, |x| x) - m).abs() < 1e-13);
        assert!((rule.expect(m, v, |x| (x - m).powi(2)) - v).abs() < 1e-13);
        // E[cos X] = cos(m) exp(-v/2)
        let c = rule.expect(m, v, f64::cos);
        assert!((c - m.cos() * (-v / 2.0).exp()).abs() < 1e-13);
        assert_eq!(rule.expect(m, 0.0, |x| x * x), m * m);
    }

    #[test]
    fn gauss_hermite_large_rule_is_stable() {
        let rule = GaussHermite::new(129);
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
    }
}
