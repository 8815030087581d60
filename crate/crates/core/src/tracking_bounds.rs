//! Bayesian Cramér-Rao tracking bound for the AR(1) model.
//!
//! The tracking information obeys
//!
//! ```text
//! U_0 = 1 / sigma0^2
//! U_k = (sigma^2 + alpha^2 / U_{k-1})^-1 + Fbar_k
//! ```
//!
//! and `1 / U_k` lower-bounds the filtering MSE at block `k`.

use crate::error::{ensure_finite, Error, Result};
use crate::state_space::StateSpaceModel;

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Margin below which a "much smaller than" condition counts as satisfied.
pub const MUCH_SMALLER_RATIO: f64 = 0.01;

/// One step of the recursion in its simplified form.
pub fn recursion_step(model: &StateSpaceModel, u_prev: f64, fbar: f64) -> f64 {
    let (a, s) = (model.alpha(), model.sigma());
    1.0 / (s * s + a * a / u_prev) + fbar
}

/// One step assembled from the transition information terms,
/// `D22 - D21 (U_{k-1} + D11)^-1 D12`.
pub fn recursion_step_dmatrix(model: &StateSpaceModel, u_prev: f64, fbar: f64) -> f64 {
    let d11 = model.info_prev();
    let d12 = model.info_cross();
    let d22 = model.info_current() + fbar;
    d22 - d12 * d12 / (u_prev + d11)
}

fn check_fbar(values: &[f64]) -> Result<()> {
    for (k, &f) in values.iter().enumerate() {
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::invalid(format!(
                "expected Fisher information of block {} must be finite and >= 0, got {f}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// `U_0, ..., U_K` for `fbar[k - 1] = Fbar_k`, `k = 1..=K`.
pub fn bound_recursion(model: &StateSpaceModel, fbar: &[f64]) -> Result<Vec<f64>> {
    check_fbar(fbar)?;
    let mut u = Vec::with_capacity(fbar.len() + 1);
    let s0 = model.sigma0();
    u.push(1.0 / (s0 * s0));
    for &f in fbar {
        let prev = *u.last().expect("seeded with U_0");
        u.push(recursion_step(model, prev, f));
    }
    Ok(u)
}

/// Closed-form fixed point of the recursion for constant `fbar`.
pub fn steady_state(model: &StateSpaceModel, fbar: f64) -> Result<f64> {
    check_fbar(&[fbar])?;
    let (a, s2) = (model.alpha(), model.sigma() * model.sigma());
    let b = model.one_minus_alpha_sq() / (2.0 * s2) + fbar / 2.0;
    Ok(b + (b * b + a * a * fbar / s2).sqrt())
}

/// Block-wise bounds of both receivers and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTrajectory {
    pub u_onebit: Vec<f64>,
    pub u_ideal: Vec<f64>,
    /// `u_onebit[k] / u_ideal[k]`.
    pub rho: Vec<f64>,
    pub steady_onebit: f64,
    pub steady_ideal: f64,
    pub rho_steady: f64,
}

impl BoundTrajectory {
    /// Runs the recursion for both receivers. The `fbar_*` slices hold one
    /// entry per block; the `steady_*` values are the limiting expectations.
    pub fn compute(
        model: &StateSpaceModel,
        fbar_onebit: &[f64],
        fbar_ideal: &[f64],
        steady_fbar_onebit: f64,
        steady_fbar_ideal: f64,
    ) -> Result<Self> {
        if fbar_onebit.len() != fbar_ideal.len() {
            return Err(Error::LengthMismatch {
                expected: fbar_onebit.len(),
                actual: fbar_ideal.len(),
            });
        }
        let u_onebit = bound_recursion(model, fbar_onebit)?;
        let u_ideal = bound_recursion(model, fbar_ideal)?;
        let rho = u_onebit.iter().zip(&u_ideal).map(|(a, b)| a / b).collect();
        let steady_onebit = steady_state(model, steady_fbar_onebit)?;
        let steady_ideal = steady_state(model, steady_fbar_ideal)?;
        Ok(BoundTrajectory {
            u_onebit,
            u_ideal,
            rho,
            steady_onebit,
            steady_ideal,
            rho_steady: steady_onebit / steady_ideal,
        })
    }

    pub fn blocks(&self) -> usize {
        self.u_onebit.len() - 1
    }

    pub fn rho_db(&self, k: usize) -> f64 {
        to_db(self.rho[k])
    }

    pub fn rho_steady_db(&self) -> f64 {
        to_db(self.rho_steady)
    }
}

/// A "lhs much smaller than rhs" requirement evaluated numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub lhs: f64,
    pub rhs: f64,
}

impl Condition {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }

    pub fn holds(&self) -> bool {
        self.ratio() <= MUCH_SMALLER_RATIO
    }
}

/// Validity conditions of the slow-evolution approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowConditions {
    /// `((1 - alpha^2) / (2 sigma^2))^2` against `alpha^2 Fbar / sigma^2`.
    pub slow_memory: Condition,
    /// `(Fbar / 2)^2` against `alpha^2 Fbar / sigma^2`.
    pub weak_data: Condition,
    /// `Fbar` against `alpha^2 / sigma^2`.
    pub model_dominates: Condition,
    /// `Fbar_ideal` against `alpha^2 / sigma^2`.
    pub model_dominates_ideal: Condition,
}

impl SlowConditions {
    pub fn evaluate(model: &StateSpaceModel, fbar: f64, fbar_ideal: f64) -> Self {
        let (a2, s2) = (model.alpha().powi(2), model.sigma().powi(2));
        let memory = model.one_minus_alpha_sq() / (2.0 * s2);
        SlowConditions {
            slow_memory: Condition {
                lhs: memory * memory,
                rhs: a2 * fbar / s2,
            },
            weak_data: Condition {
                lhs: fbar * fbar / 4.0,
                rhs: a2 * fbar / s2,
            },
            model_dominates: Condition {
                lhs: fbar,
                rhs: a2 / s2,
            },
            model_dominates_ideal: Condition {
                lhs: fbar_ideal,
                rhs: a2 / s2,
            },
        }
    }

    /// Conditions under which `U ~ sqrt(alpha^2 Fbar / sigma^2)`.
    pub fn steady_approximation_holds(&self) -> bool {
        self.slow_memory.holds() && self.weak_data.holds()
    }

    /// Conditions under which `rho ~ sqrt(Fbar / Fbar_ideal)`.
    pub fn loss_approximation_holds(&self) -> bool {
        self.model_dominates.holds() && self.model_dominates_ideal.holds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowEvolutionLoss {
    /// Exact steady-state ratio `U / U_ideal`.
    pub rho: f64,
    /// `sqrt(Fbar / Fbar_ideal)`.
    pub rho_approx: f64,
    /// `rho_approx` minus `rho`, in dB.
    pub gap_db: f64,
    pub conditions: SlowConditions,
}

pub fn slow_evolution_loss(
    fbar_onebit: f64,
    fbar_ideal: f64,
    model: &StateSpaceModel,
) -> Result<SlowEvolutionLoss> {
    if !(fbar_onebit > 0.0 && fbar_ideal > 0.0) {
        return Err(Error::invalid(format!(
            "slow-evolution loss needs positive information, got {fbar_onebit} and {fbar_ideal}"
        )));
    }
    let rho = steady_state(model, fbar_onebit)? / steady_state(model, fbar_ideal)?;
    let rho_approx = (fbar_onebit / fbar_ideal).sqrt();
    Ok(SlowEvolutionLoss {
        rho,
        rho_approx,
        gap_db: to_db(rho_approx) - to_db(rho),
        conditions: SlowConditions::evaluate(model, fbar_onebit, fbar_ideal),
    })
}

/// Iteration cap for the empirical transient length.
pub const MAX_TRANSIENT_BLOCKS: usize = 100_000_000;

/// Convergence factor `alpha^2 (sigma^2 U + alpha^2)^-2` at the fixed point.
pub fn convergence_factor(model: &StateSpaceModel, u_steady: f64) -> f64 {
    let (a2, s2) = (model.alpha().powi(2), model.sigma().powi(2));
    a2 / (s2 * u_steady + a2).powi(2)
}

/// Smallest `k >= 1` with `|U_k - U| <= 10^-lambda |U_0 - U|` for constant
/// `fbar`.
pub fn transient_blocks(model: &StateSpaceModel, fbar: f64, lambda: f64) -> Result<usize> {
    let target = steady_state(model, fbar)?;
    let u0 = 1.0 / model.sigma0().powi(2);
    let tol = 10f64.powf(-lambda) * (u0 - target).abs();
    let mut u = u0;
    for k in 1..=MAX_TRANSIENT_BLOCKS {
        u = recursion_step(model, u, fbar);
        if (u - target).abs() <= tol {
            return Ok(k);
        }
    }
    Err(Error::Unsupported(format!(
        "transient phase longer than {MAX_TRANSIENT_BLOCKS} blocks"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientReport {
    pub lambda: f64,
    /// Order of convergence; the derivative at the fixed point is nonzero, so
    /// convergence is linear.
    pub nu: u32,
    pub xi: f64,
    pub xi_ideal: f64,
    /// Recursion-until-threshold durations.
    pub k_lambda: usize,
    pub k_lambda_ideal: usize,
    /// `-lambda / log10(xi)`.
    pub k_lambda_xi: f64,
    pub k_lambda_xi_ideal: f64,
    /// `lambda / (2 log10(sqrt(sigma^2 Fbar) + alpha))`.
    pub k_lambda_slow: f64,
    pub k_lambda_slow_ideal: f64,
    /// `k_lambda / k_lambda_ideal`.
    pub delta: f64,
    pub delta_xi: f64,
    /// `sqrt(Fbar_ideal / Fbar)`.
    pub delta_approx: f64,
    pub conditions: SlowConditions,
}

pub fn transient_report(
    model: &StateSpaceModel,
    fbar: f64,
    fbar_ideal: f64,
    lambda: f64,
) -> Result<TransientReport> {
    ensure_finite("lambda", lambda)?;
    if lambda <= 1.0 {
        return Err(Error::invalid(format!("lambda must exceed 1, got {lambda}")));
    }
    if !(fbar > 0.0 && fbar_ideal > 0.0) {
        return Err(Error::invalid("transient analysis needs positive information"));
    }
    let xi = convergence_factor(model, steady_state(model, fbar)?);
    let xi_ideal = convergence_factor(model, steady_state(model, fbar_ideal)?);
    let k_lambda = transient_blocks(model, fbar, lambda)?;
    let k_lambda_ideal = transient_blocks(model, fbar_ideal, lambda)?;
    let k_xi = |x: f64| -lambda / x.log10();
    let s2 = model.sigma().powi(2);
    let k_slow = |f: f64| lambda / (2.0 * ((s2 * f).sqrt() + model.alpha()).log10());
    Ok(TransientReport {
        lambda,
        nu: 1,
        xi,
        xi_ideal,
        k_lambda,
        k_lambda_ideal,
        k_lambda_xi: k_xi(xi),
        k_lambda_xi_ideal: k_xi(xi_ideal),
        k_lambda_slow: k_slow(fbar),
        k_lambda_slow_ideal: k_slow(fbar_ideal),
        delta: k_lambda as f64 / k_lambda_ideal as f64,
        delta_xi: k_xi(xi) / k_xi(xi_ideal),
        delta_approx: (fbar_ideal / fbar).sqrt(),
        conditions: SlowConditions::evaluate(model, fbar, fbar_ideal),
    })
}
