//! The five subcommands. Each returns a CSV table plus the number of
//! discarded Monte-Carlo trials.

use onebit_core::experiments::{
    finite_k_loss, log_grid, run_bounds, run_montecarlo, sweep_beta, MonteCarloConfig, Scenario,
};
use onebit_core::tracking_bounds::to_db;
use onebit_core::units::DelayUnit;

use crate::config::RunConfig;
use crate::table::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub discarded: usize,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Report { table, discarded: 0 }
    }
}

/// Converts internal values (seconds for delays) to the reporting unit.
struct Scale {
    unit: Option<DelayUnit>,
    chip: f64,
}

impl Scale {
    fn new(cfg: &RunConfig, scenario: &Scenario) -> Self {
        Scale {
            unit: cfg.unit,
            chip: scenario.native_scale(),
        }
    }

    fn delay(&self, seconds: f64) -> f64 {
        match self.unit {
            Some(u) => u.from_seconds(seconds, self.chip),
            None => seconds,
        }
    }

    /// Information scales with the inverse square of the delay unit.
    fn info(&self, per_s2: f64) -> f64 {
        match self.unit {
            Some(u) => {
                let s = u.seconds_per_unit(self.chip);
                per_s2 * s * s
            }
            None => per_s2,
        }
    }
}

fn scenario(cfg: &RunConfig) -> Result<Scenario, CliError> {
    Ok(cfg.params.build()?)
}

/// One-block Fisher information at the prior mean, optionally followed by
/// the Bayesian information under the stationary prior.
pub fn cmd_fisher(cfg: &RunConfig, bayes: bool) -> Result<Report, CliError> {
    let sc = scenario(cfg)?;
    let scale = Scale::new(cfg, &sc);
    let info = sc.info_at_prior_mean()?;
    let mut header = vec!["fisher_onebit", "fisher_ideal", "chi", "chi_db"];
    let mut row: Vec<Cell> = vec![
        scale.info(info.fisher_onebit).into(),
        scale.info(info.fisher_ideal).into(),
        info.chi.into(),
        to_db(info.chi).into(),
    ];
    if bayes {
        let b = sc.bayes()?;
        header.extend(["j_onebit", "j_ideal", "j_prior", "psi", "psi_db"]);
        row.extend([
            scale.info(b.j_onebit()).into(),
            scale.info(b.j_ideal()).into(),
            scale.info(b.j_prior).into(),
            b.psi.into(),
            to_db(b.psi).into(),
        ]);
    }
    let mut t = Table::new(&header);
    t.push(row);
    Ok(t.into())
}

/// `U_k^-1/2` of both receivers for `k = 0..=K`, then the steady state.
pub fn cmd_bound(cfg: &RunConfig) -> Result<Report, CliError> {
    let sc = scenario(cfg)?;
    let scale = Scale::new(cfg, &sc);
    let b = run_bounds(&sc)?;
    let mut t = Table::new(&["k", "u_inv_sqrt_onebit", "u_inv_sqrt_ideal", "rho_db"]);
    for k in 0..=b.blocks() {
        t.push(vec![
            k.into(),
            scale.delay(b.u_onebit[k].sqrt().recip()).into(),
            scale.delay(b.u_ideal[k].sqrt().recip()).into(),
            b.rho_db(k).into(),
        ]);
    }
    t.push(vec![
        Cell::Text("steady"),
        scale.delay(b.steady_onebit.sqrt().recip()).into(),
        scale.delay(b.steady_ideal.sqrt().recip()).into(),
        b.rho_steady_db().into(),
    ]);
    Ok(t.into())
}

/// Monte-Carlo RMSE of both particle filters beside the bounds.
pub fn cmd_track(cfg: &RunConfig) -> Result<Report, CliError> {
    let sc = scenario(cfg)?;
    let scale = Scale::new(cfg, &sc);
    let mc = MonteCarloConfig {
        workers: cfg.workers.threads(),
        ..MonteCarloConfig::for_scenario(&sc, cfg.seed)
    };
    let result = run_montecarlo(&sc, &mc)?;
    let mut t = Table::new(&["k", "rmse_onebit", "rmse_ideal", "bound_onebit", "bound_ideal", "discarded"]);
    for r in &result.per_block {
        t.push(vec![
            r.k.into(),
            scale.delay(r.rmse_onebit).into(),
            scale.delay(r.rmse_ideal).into(),
            scale.delay(r.bound_onebit).into(),
            scale.delay(r.bound_ideal).into(),
            result.discarded.into(),
        ]);
    }
    Ok(Report {
        table: t,
        discarded: result.discarded,
    })
}

/// Steady-state and Bayesian losses over a log grid of `beta = 1 - alpha`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let betas = log_grid(cfg.beta_min, cfg.beta_max, cfg.points)?;
    let mut t = Table::new(&["beta", "rho_db", "psi_db"]);
    for r in sweep_beta(&cfg.params, &betas)? {
        t.push(vec![r.beta.into(), r.rho_db.into(), r.psi_db.into()]);
    }
    Ok(t.into())
}

/// Block-wise loss `rho_k` over the same grid of `beta`.
pub fn cmd_sweep_blocks(cfg: &RunConfig) -> Result<Report, CliError> {
    let betas = log_grid(cfg.beta_min, cfg.beta_max, cfg.points)?;
    let mut t = Table::new(&["beta", "k", "rho_db"]);
    for r in finite_k_loss(&cfg.params, &betas, cfg.params.blocks)? {
        t.push(vec![r.beta.into(), r.k.into(), r.rho_db.into()]);
    }
    Ok(t.into())
}

/// Convergence speed of the bound and the extra delay of the 1-bit receiver.
pub fn cmd_transient(cfg: &RunConfig) -> Result<Report, CliError> {
    let sc = scenario(cfg)?;
    let r = sc.transient(cfg.lambda)?;
    let mut t = Table::new(&[
        "lambda",
        "nu",
        "xi_onebit",
        "xi_ideal",
        "k_lambda_onebit",
        "k_lambda_ideal",
        "k_lambda_xi_onebit",
        "k_lambda_xi_ideal",
        "k_lambda_slow_onebit",
        "k_lambda_slow_ideal",
        "delta",
        "delta_xi",
        "delta_approx",
        "slow_regime",
    ]);
    t.push(vec![
        r.lambda.into(),
        (r.nu as usize).into(),
        r.xi.into(),
        r.xi_ideal.into(),
        r.k_lambda.into(),
        r.k_lambda_ideal.into(),
        r.k_lambda_xi.into(),
        r.k_lambda_xi_ideal.into(),
        r.k_lambda_slow.into(),
        r.k_lambda_slow_ideal.into(),
        r.delta.into(),
        r.delta_xi.into(),
        r.delta_approx.into(),
        r.conditions.loss_approximation_holds().into(),
    ]);
    Ok(t.into())
}
