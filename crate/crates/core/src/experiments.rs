//! Scenario definitions, analytic bound trajectories, the Monte-Carlo
//! tracking runner, and the loss sweeps over `beta = 1 - alpha`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{
    pf_init, pf_predict, pf_update, ChebyshevInterpolant, ParticleCloud, ParticleFilterConfig,
    Resampler,
};
use crate::info_measures::{bayes_report, expected_fisher, BayesReport, InfoReport, Receiver};
use crate::quantized_channel::{loglik_ideal, loglik_onebit, sample_block, NoiseModel};
use crate::signal_models::{
    generate_gps_ca_code, CodeSequence, DelayWaveform, LinearGainWaveform, Pulse,
    SampledWaveform, GPS_CA_CHIP_RATE,
};
use crate::special::GaussHermite;
use crate::state_space::{Gaussian, StateSpaceModel};
use crate::streams::{Purpose, StreamFactory, StreamPosition};
use crate::tracking_bounds::{to_db, transient_report, BoundTrajectory, TransientReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// GPS C/A code delay tracking.
    Ranging,
    /// UWB channel coefficient tracking at low SNR.
    Uwb,
    /// Mobile channel coefficient tracking at medium SNR.
    Mobile,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Ranging, ScenarioKind::Uwb, ScenarioKind::Mobile];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Ranging => "ranging",
            ScenarioKind::Uwb => "uwb",
            ScenarioKind::Mobile => "mobile",
        }
    }

    /// Whether the tracked parameter is a delay.
    pub fn is_delay(self) -> bool {
        self == ScenarioKind::Ranging
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Every tunable of a scenario. Delay quantities (`sigma`, `mu0`, `sigma0`)
/// are in chips for the ranging scenario; channel coefficients are
/// dimensionless. `None` selects the scenario's derived default.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub kind: ScenarioKind,
    pub snr_db: f64,
    pub alpha: f64,
    pub sigma: Option<f64>,
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub blocks: usize,
    /// GPS PRN of the ranging code; the linear scenarios take their pilot
    /// symbols from the first chips of this code.
    pub prn: u32,
    /// One-sided receiver bandwidth in Hz.
    pub bandwidth: f64,
    /// Samples per block.
    pub samples: usize,
    /// Pilot symbols of the linear scenarios.
    pub pilot_symbols: usize,
    pub particles: usize,
    pub kappa: f64,
    pub resampler: Resampler,
    pub processes: usize,
    pub realizations: usize,
    /// Chebyshev nodes for the particle log-likelihood; 0 evaluates every
    /// particle exactly.
    pub likelihood_nodes: usize,
}

/// Default first-kind Chebyshev node count for ranging likelihoods.
pub const RANGING_LIKELIHOOD_NODES: usize = 16;

impl ScenarioParams {
    pub fn builtin(kind: ScenarioKind) -> Self {
        let common = ScenarioParams {
            kind,
            snr_db: -15.0,
            alpha: 1.0 - 1e-3,
            sigma: None,
            mu0: None,
            sigma0: None,
            blocks: 250,
            prn: 5,
            bandwidth: GPS_CA_CHIP_RATE,
            samples: 2046,
            pilot_symbols: 10,
            particles: 100,
            kappa: 0.66,
            resampler: Resampler::Systematic,
            processes: 20,
            realizations: 50,
            likelihood_nodes: 0,
        };
        match kind {
            ScenarioKind::Ranging => ScenarioParams {
                sigma: Some(1e-3),
                mu0: Some(398.7342),
                sigma0: Some(0.1),
                likelihood_nodes: RANGING_LIKELIHOOD_NODES,
                ..common
            },
            ScenarioKind::Uwb => ScenarioParams {
                alpha: 1.0 - 1e-4,
                sigma0: Some(0.05),
                bandwidth: 528e6,
                samples: 10,
                ..common
            },
            ScenarioKind::Mobile => ScenarioParams {
                snr_db: 6.0,
                alpha: 1.0 - 1e-3,
                blocks: 1000,
                bandwidth: 2.5e6,
                samples: 10,
                ..common
            },
        }
    }

    pub fn snr(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn build(&self) -> Result<Scenario> {
        Scenario::new(self.clone())
    }
}

/// A fully constructed experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    params: ScenarioParams,
    waveform: SampledWaveform,
    gamma: f64,
    model: StateSpaceModel,
    native_scale: f64,
}

impl Scenario {
    pub fn builtin(kind: ScenarioKind) -> Result<Self> {
        ScenarioParams::builtin(kind).build()
    }

    pub fn new(params: ScenarioParams) -> Result<Self> {
        if !params.snr_db.is_finite() {
            return Err(Error::invalid("SNR must be finite"));
        }
        match params.kind {
            ScenarioKind::Ranging => Self::ranging(params),
            ScenarioKind::Uwb | ScenarioKind::Mobile => Self::linear(params),
        }
    }

    fn ranging(params: ScenarioParams) -> Result<Self> {
        let code = generate_gps_ca_code(params.prn)?;
        let tc = code.chip_duration();
        let waveform = DelayWaveform::new(code, Pulse::BandlimitedRect, params.bandwidth, params.samples)?;
        if !waveform.blocks_phase_aligned() {
            return Err(Error::Unsupported(
                "ranging blocks must span whole code periods".into(),
            ));
        }
        let native = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::invalid(format!("ranging scenario needs {name}")))
        };
        let model = StateSpaceModel::new(
            params.alpha,
            native(params.sigma, "sigma")? * tc,
            native(params.mu0, "mu0")? * tc,
            native(params.sigma0, "sigma0")? * tc,
        )?;
        Ok(Scenario {
            gamma: 10f64.powf(params.snr_db / 20.0),
            waveform: SampledWaveform::DelayModulated(waveform),
            model,
            native_scale: tc,
            params,
        })
    }

    fn linear(params: ScenarioParams) -> Result<Self> {
        if params.pilot_symbols == 0 || params.pilot_symbols > 1023 {
            return Err(Error::invalid("pilot needs between 1 and 1023 symbols"));
        }
        let ca = generate_gps_ca_code(params.prn)?;
        let chip = 1.0 / (2.0 * params.bandwidth);
        let code = CodeSequence::new(ca.symbols()[..params.pilot_symbols].to_vec(), chip)?;
        let pilot = LinearGainWaveform::from_code(&code, Pulse::Nyquist { rolloff: 0.0 }, params.samples)?;
        let waveform = SampledWaveform::LinearGain(pilot);
        let snr = params.snr();
        let sigma = match params.sigma {
            Some(s) => s,
            None => ((1.0 - params.alpha) * (1.0 + params.alpha) * snr).sqrt(),
        };
        let mu0 = params.mu0.unwrap_or(snr.sqrt());
        let sigma0 = match params.sigma0 {
            Some(s) => s,
            None => {
                // Inverse square root of the prior-averaged ideal information.
                let point = Gaussian::new(mu0, 0.0)?;
                let f = expected_fisher(&waveform, 1.0, 1, point, Receiver::Ideal, GaussHermite::default_rule())?;
                f.sqrt().recip()
            }
        };
        let model = StateSpaceModel::new(params.alpha, sigma, mu0, sigma0)?;
        Ok(Scenario {
            gamma: 1.0,
            waveform,
            model,
            native_scale: 1.0,
            params,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn kind(&self) -> ScenarioKind {
        self.params.kind
    }

    pub fn waveform(&self) -> &SampledWaveform {
        &self.waveform
    }

    /// Amplitude applied to the waveform before the unit-variance noise.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// State-space model in internal units (seconds for delays).
    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    /// Internal units per native unit: the chip duration for delays, 1 for
    /// channel coefficients.
    pub fn native_scale(&self) -> f64 {
        self.native_scale
    }

    pub fn blocks(&self) -> usize {
        self.params.blocks
    }

    pub fn filter_config(&self) -> Result<ParticleFilterConfig> {
        ParticleFilterConfig::new(self.params.particles, self.params.kappa, self.params.resampler)
    }

    fn expected_pair(&self, dist: Gaussian) -> Result<(f64, f64)> {
        let rule = GaussHermite::default_rule();
        let onebit = expected_fisher(&self.waveform, self.gamma, 1, dist, Receiver::OneBit, rule)?;
        let ideal = expected_fisher(&self.waveform, self.gamma, 1, dist, Receiver::Ideal, rule)?;
        Ok((onebit, ideal))
    }

    /// Expected Fisher information of both receivers for blocks `1..=K` and
    /// in the limit.
    ///
    /// The ranging information barely depends on the delay, so it is taken at
    /// the prior mean for every block. The channel coefficient information is
    /// averaged over the exact block marginal.
    pub fn expected_information(&self) -> Result<ExpectedInformation> {
        match self.kind() {
            ScenarioKind::Ranging => {
                let (f, fi) = self.expected_pair(Gaussian::new(self.model.mu0(), 0.0)?)?;
                Ok(ExpectedInformation {
                    onebit: vec![f; self.blocks()],
                    ideal: vec![fi; self.blocks()],
                    steady_onebit: f,
                    steady_ideal: fi,
                })
            }
            ScenarioKind::Uwb | ScenarioKind::Mobile => {
                let mut onebit = Vec::with_capacity(self.blocks());
                let mut ideal = Vec::with_capacity(self.blocks());
                for k in 1..=self.blocks() {
                    let (f, fi) = self.expected_pair(self.model.marginal_moments(k))?;
                    onebit.push(f);
                    ideal.push(fi);
                }
                let (steady_onebit, steady_ideal) = self.expected_pair(self.model.stationary())?;
                Ok(ExpectedInformation {
                    onebit,
                    ideal,
                    steady_onebit,
                    steady_ideal,
                })
            }
        }
    }

    /// Fisher information of one block at the prior mean.
    pub fn info_at_prior_mean(&self) -> Result<InfoReport> {
        Ok(InfoReport::new(&self.waveform.eval(self.model.mu0(), 1)?, self.gamma))
    }

    /// Block-independent Bayesian information with the stationary marginal
    /// as prior.
    pub fn bayes(&self) -> Result<BayesReport> {
        let stationary = self.model.stationary();
        let (f, fi) = self.expected_pair(stationary)?;
        bayes_report(f, fi, 1.0 / stationary.variance)
    }

    pub fn transient(&self, lambda: f64) -> Result<TransientReport> {
        let info = self.expected_information()?;
        transient_report(&self.model, info.steady_onebit, info.steady_ideal, lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedInformation {
    pub onebit: Vec<f64>,
    pub ideal: Vec<f64>,
    pub steady_onebit: f64,
    pub steady_ideal: f64,
}

/// Tracking bounds of both receivers over the scenario's blocks, in internal
/// units.
pub fn run_bounds(scenario: &Scenario) -> Result<BoundTrajectory> {
    let info = scenario.expected_information()?;
    BoundTrajectory::compute(
        scenario.model(),
        &info.onebit,
        &info.ideal,
        info.steady_onebit,
        info.steady_ideal,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub processes: usize,
    pub realizations: usize,
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
}

impl MonteCarloConfig {
    pub fn for_scenario(scenario: &Scenario, seed: u64) -> Self {
        MonteCarloConfig {
            processes: scenario.params().processes,
            realizations: scenario.params().realizations,
            seed,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    pub k: usize,
    pub rmse_onebit: f64,
    pub rmse_ideal: f64,
    /// `U_k^-1/2` of the 1-bit receiver.
    pub bound_onebit: f64,
    pub bound_ideal: f64,
}

/// Monte-Carlo tracking errors in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub per_block: Vec<BlockStats>,
    pub processes: usize,
    pub realizations: usize,
    /// Trials dropped because a particle cloud degenerated.
    pub discarded: usize,
}

impl MonteCarloResult {
    pub fn trials(&self) -> usize {
        self.processes * self.realizations
    }

    /// Mean of `rmse / bound` over blocks `from..`, for both receivers, with
    /// each ratio formed from the mean squared quantities.
    pub fn efficiency(&self, from: usize) -> (f64, f64) {
        let rows = &self.per_block[from.min(self.per_block.len())..];
        let ratio = |num: fn(&BlockStats) -> f64, den: fn(&BlockStats) -> f64| {
            let n: f64 = rows.iter().map(|r| num(r).powi(2)).sum();
            let d: f64 = rows.iter().map(|r| den(r).powi(2)).sum();
            (n / d).sqrt()
        };
        (
            ratio(|r| r.rmse_onebit, |r| r.bound_onebit),
            ratio(|r| r.rmse_ideal, |r| r.bound_ideal),
        )
    }
}

/// Squared estimation errors of one trial for blocks `0..=K`.
struct TrialErrors {
    onebit: Vec<f64>,
    ideal: Vec<f64>,
}

/// Runs `P` trajectories times `R` noise realizations through the particle
/// filters of both receivers. Results do not depend on the worker count.
pub fn run_montecarlo(scenario: &Scenario, config: &MonteCarloConfig) -> Result<MonteCarloResult> {
    if config.processes == 0 || config.realizations == 0 {
        return Err(Error::invalid("processes and realizations must be at least 1"));
    }
    if config.workers == Some(0) {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let pf = scenario.filter_config()?;
    let bounds = run_bounds(scenario)?;
    let streams = StreamFactory::new(config.seed);
    let noise = NoiseModel::new(config.seed);
    let trajectories: Vec<Vec<f64>> = (0..config.processes)
        .map(|p| {
            let mut rng = streams.rng(StreamPosition::new(Purpose::Trajectory, p as u64, 0, 0));
            scenario.model().sample_trajectory(scenario.blocks(), &mut rng)
        })
        .collect();

    let trials = config.processes * config.realizations;
    let work = || -> Vec<Result<Option<TrialErrors>>> {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let (p, r) = (t / config.realizations, t % config.realizations);
                run_trial(scenario, &pf, &streams, &noise, &trajectories[p], p as u64, r as u64)
            })
            .collect()
    };
    let outcomes = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let blocks = scenario.blocks();
    let mut sum_onebit = vec![0.0; blocks + 1];
    let mut sum_ideal = vec![0.0; blocks + 1];
    let (mut kept, mut discarded) = (0usize, 0usize);
    for outcome in outcomes {
        match outcome? {
            Some(e) => {
                kept += 1;
                for (s, v) in sum_onebit.iter_mut().zip(&e.onebit) {
                    *s += v;
                }
                for (s, v) in sum_ideal.iter_mut().zip(&e.ideal) {
                    *s += v;
                }
            }
            None => discarded += 1,
        }
    }
    let per_block = (0..=blocks)
        .map(|k| BlockStats {
            k,
            rmse_onebit: (sum_onebit[k] / kept as f64).sqrt(),
            rmse_ideal: (sum_ideal[k] / kept as f64).sqrt(),
            bound_onebit: bounds.u_onebit[k].sqrt().recip(),
            bound_ideal: bounds.u_ideal[k].sqrt().recip(),
        })
        .collect();
    Ok(MonteCarloResult {
        per_block,
        processes: config.processes,
        realizations: config.realizations,
        discarded,
    })
}

fn run_trial(
    scenario: &Scenario,
    pf: &ParticleFilterConfig,
    streams: &StreamFactory,
    noise: &NoiseModel,
    truth: &[f64],
    process: u64,
    realization: u64,
) -> Result<Option<TrialErrors>> {
    let model = scenario.model();
    let mut rng_onebit = streams.rng(StreamPosition::new(Purpose::FilterOneBit, process, realization, 0));
    let mut rng_ideal = streams.rng(StreamPosition::new(Purpose::FilterIdeal, process, realization, 0));
    let mut cloud_onebit = pf_init(pf, model.prior(), &mut rng_onebit);
    let mut cloud_ideal = pf_init(pf, model.prior(), &mut rng_ideal);
    let mut eval = LikelihoodEvaluator::new(scenario);

    let e0 = (model.mu0() - truth[0]).powi(2);
    let mut errors = TrialErrors {
        onebit: vec![e0],
        ideal: vec![e0],
    };
    let mut ll_onebit = vec![0.0; pf.particles()];
    let mut ll_ideal = vec![0.0; pf.particles()];
    for (k, &theta) in truth.iter().enumerate().skip(1) {
        eval.observe(theta, k, noise, StreamPosition::new(Purpose::Noise, process, realization, k as u64))?;
        pf_predict(&mut cloud_onebit, model, &mut rng_onebit);
        pf_predict(&mut cloud_ideal, model, &mut rng_ideal);
        eval.log_likelihoods(&cloud_onebit, &cloud_ideal, &mut ll_onebit, &mut ll_ideal)?;
        let step_onebit = pf_update(&mut cloud_onebit, &ll_onebit, pf, k, &mut rng_onebit);
        let step_ideal = pf_update(&mut cloud_ideal, &ll_ideal, pf, k, &mut rng_ideal);
        match (step_onebit, step_ideal) {
            (Ok(a), Ok(b)) => {
                errors.onebit.push((a.estimate - theta).powi(2));
                errors.ideal.push((b.estimate - theta).powi(2));
            }
            (Err(Error::DegenerateCloud { .. }), _) | (_, Err(Error::DegenerateCloud { .. })) => {
                return Ok(None)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(Some(errors))
}

/// Block log-likelihoods of both receivers for particle sets.
struct LikelihoodEvaluator<'a> {
    scenario: &'a Scenario,
    block: usize,
    y: Vec<f64>,
    r: Vec<i8>,
    signal: Vec<f64>,
}

impl<'a> LikelihoodEvaluator<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let n = scenario.waveform().samples_per_block();
        LikelihoodEvaluator {
            scenario,
            block: 0,
            y: Vec::new(),
            r: Vec::new(),
            signal: vec![0.0; n],
        }
    }

    fn observe(&mut self, theta: f64, block: usize, noise: &NoiseModel, position: StreamPosition) -> Result<()> {
        self.scenario.waveform().signal_into(theta, block, &mut self.signal)?;
        let obs = sample_block(&self.signal, self.scenario.gamma(), noise, position)?;
        self.block = block;
        self.y = obs.ideal.expect("sampled blocks keep the ideal view");
        self.r = obs.onebit;
        Ok(())
    }

    fn exact(&mut self, theta: f64, receiver: Receiver) -> Result<f64> {
        let gamma = self.scenario.gamma();
        self.scenario.waveform().signal_into(theta, self.block, &mut self.signal)?;
        match receiver {
            Receiver::OneBit => loglik_onebit(&self.r, &self.signal, gamma),
            Receiver::Ideal => loglik_ideal(&self.y, &self.signal, gamma),
        }
    }

    fn log_likelihoods(
        &mut self,
        onebit: &ParticleCloud,
        ideal: &ParticleCloud,
        out_onebit: &mut [f64],
        out_ideal: &mut [f64],
    ) -> Result<()> {
        let nodes = self.scenario.params().likelihood_nodes;
        let (lo1, hi1) = onebit.range();
        let (lo2, hi2) = ideal.range();
        let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
        // Beyond about one chip the likelihood is no longer low-order smooth.
        let max_width = self.scenario.native_scale();
        if nodes > 0 && hi - lo <= max_width {
            let xs = ChebyshevInterpolant::nodes(lo, hi, nodes);
            let mut v1 = Vec::with_capacity(nodes);
            let mut v2 = Vec::with_capacity(nodes);
            let gamma = self.scenario.gamma();
            let mut other = vec![0.0; self.signal.len()];
            for pair in xs.chunks(2) {
                let second = *pair.last().expect("chunks are non-empty");
                self.scenario.waveform().signal_pair_into(
                    [pair[0], second],
                    self.block,
                    [&mut self.signal, &mut other],
                )?;
                for s in [&self.signal, &other].into_iter().take(pair.len()) {
                    v1.push(loglik_onebit(&self.r, s, gamma)?);
                    v2.push(loglik_ideal(&self.y, s, gamma)?);
                }
            }
            let p1 = ChebyshevInterpolant::from_values(lo, hi, &v1)?;
            let p2 = ChebyshevInterpolant::from_values(lo, hi, &v2)?;
            for (o, &p) in out_onebit.iter_mut().zip(onebit.particles()) {
                *o = p1.eval(p);
            }
            for (o, &p) in out_ideal.iter_mut().zip(ideal.particles()) {
                *o = p2.eval(p);
            }
        } else {
            for (o, &p) in out_onebit.iter_mut().zip(onebit.particles()) {
                *o = self.exact(p, Receiver::OneBit)?;
            }
            for (o, &p) in out_ideal.iter_mut().zip(ideal.particles()) {
                *o = self.exact(p, Receiver::Ideal)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub rho_db: f64,
    pub psi_db: f64,
}

fn with_beta(base: &ScenarioParams, beta: f64) -> Result<ScenarioParams> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok(ScenarioParams {
        alpha: 1.0 - beta,
        ..base.clone()
    })
}

/// Steady-state tracking loss and the block-wise Bayesian loss for each
/// `beta = 1 - alpha`.
pub fn sweep_beta(base: &ScenarioParams, betas: &[f64]) -> Result<Vec<SweepRow>> {
    betas
        .iter()
        .map(|&beta| {
            let scenario = with_beta(base, beta)?.build()?;
            let info = scenario.expected_information()?;
            let model = scenario.model();
            let rho = crate::tracking_bounds::steady_state(model, info.steady_onebit)?
                / crate::tracking_bounds::steady_state(model, info.steady_ideal)?;
            let psi = scenario.bayes()?.psi;
            Ok(SweepRow {
                beta,
                rho_db: to_db(rho),
                psi_db: to_db(psi),
            })
        })
        .collect()
}

/// `points` values spaced evenly in `log10` between `lo` and `hi`, both
/// included.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || points == 0 {
        return Err(Error::invalid(format!("invalid grid [{lo}, {hi}] with {points} points")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut g: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect();
    g[0] = lo;
    g[points - 1] = hi;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteKRow {
    pub beta: f64,
    pub k: usize,
    pub rho_db: f64,
}

/// Block-wise tracking loss `rho_k`, `k = 0..=K`, for each `beta`.
pub fn finite_k_loss(base: &ScenarioParams, betas: &[f64], blocks: usize) -> Result<Vec<FiniteKRow>> {
    let mut rows = Vec::new();
    for &beta in betas {
        let params = ScenarioParams {
            blocks,
            ..with_beta(base, beta)?
        };
        let trajectory = run_bounds(&params.build()?)?;
        rows.extend((0..=blocks).map(|k| FiniteKRow {
            beta,
            k,
            rho_db: trajectory.rho_db(k),
        }));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::kalman_step;
    use crate::info_measures::fisher_onebit;
    use crate::tracking_bounds::transient_blocks;

    #[test]
    fn builtin_parameters() {
        let r = Scenario::builtin(ScenarioKind::Ranging).unwrap();
        assert_eq!(r.waveform().samples_per_block(), 2046);
        assert_eq!(r.blocks(), 250);
        assert_eq!(r.params().snr_db, -15.0);
        let tc = 1.0 / GPS_CA_CHIP_RATE;
        assert!((r.model().mu0() - 398.7342 * tc).abs() < 1e-18);
        assert!((r.gamma() - 10f64.powf(-0.75)).abs() < 1e-15);

        let u = Scenario::builtin(ScenarioKind::Uwb).unwrap();
        assert_eq!(u.model().sigma0(), 0.05);
        assert_eq!(u.model().alpha(), 1.0 - 1e-4);
        assert_eq!(u.gamma(), 1.0);
        assert!((u.model().stationary().variance - 10f64.powf(-1.5)).abs() < 1e-12);

        let m = Scenario::builtin(ScenarioKind::Mobile).unwrap();
        assert!((m.model().sigma0() - 10f64.sqrt().recip()).abs() < 1e-15);
        assert!((m.model().mu0() - 10f64.powf(0.3)).abs() < 1e-12);
        assert_eq!(m.blocks(), 1000);

        assert!(matches!("radar".parse::<ScenarioKind>(), Err(Error::UnknownScenario(_))));
        assert_eq!("uwb".parse::<ScenarioKind>().unwrap(), ScenarioKind::Uwb);
    }

    #[test]
    fn ranging_bound_endpoints() {
        let t = run_bounds(&Scenario::builtin(ScenarioKind::Ranging).unwrap()).unwrap();
        assert_eq!(t.rho[0], 1.0);
        assert!((t.rho_db(1) + 1.38).abs() < 0.05, "{}", t.rho_db(1));
        assert!((t.rho_db(15) + 1.90).abs() < 0.05, "{}", t.rho_db(15));
        assert!((t.rho_steady_db() + 0.93).abs() < 0.05, "{}", t.rho_steady_db());
    }

    #[test]
    fn uwb_steady_loss() {
        let t = run_bounds(&Scenario::builtin(ScenarioKind::Uwb).unwrap()).unwrap();
        assert!((t.rho_steady_db() + 1.02).abs() < 0.05, "{}", t.rho_steady_db());
    }

    #[test]
    fn ranging_information_is_delay_invariant() {
        let s = Scenario::builtin(ScenarioKind::Ranging).unwrap();
        let SampledWaveform::DelayModulated(w) = s.waveform() else {
            panic!("ranging uses a delay waveform")
        };
        let inv = crate::info_measures::delay_invariance(w, s.gamma(), s.model().mu0(), 64).unwrap();
        assert!(inv.max_relative_deviation < 0.01);
        let at_mu0 = fisher_onebit(&w.eval(s.model().mu0(), 1).unwrap(), s.gamma());
        assert!((at_mu0 - inv.mean).abs() < 0.01 * inv.mean);
    }

    #[test]
    fn ideal_uwb_bound_matches_kalman() {
        let s = Scenario::builtin(ScenarioKind::Uwb).unwrap();
        let t = run_bounds(&s).unwrap();
        let SampledWaveform::LinearGain(w) = s.waveform() else {
            panic!("uwb uses a pilot")
        };
        let mut st = s.model().prior();
        // The Kalman variance does not depend on the data.
        let y = vec![0.0; w.pilot().len()];
        for u in &t.u_ideal[1..] {
            st = kalman_step(st, s.model(), &y, w.pilot(), s.gamma()).unwrap();
            assert!(((1.0 / u) - st.variance).abs() < 1e-10 * st.variance);
        }
    }

    #[test]
    fn sweep_shape() {
        let base = ScenarioParams::builtin(ScenarioKind::Mobile);
        let betas = log_grid(1e-7, 1.0, 29).unwrap();
        assert_eq!(betas[0], 1e-7);
        assert_eq!(betas[28], 1.0);
        let rows = sweep_beta(&base, &betas).unwrap();
        // Loss magnitude shrinks as the evolution slows down.
        for w in rows.windows(2) {
            assert!(w[0].rho_db >= w[1].rho_db - 1e-9, "{w:?}");
        }
        let last = rows.last().unwrap();
        assert!((last.rho_db - last.psi_db).abs() < 0.1, "{last:?}");
        assert!(rows.iter().all(|r| r.psi_db == rows[0].psi_db));
        assert!(sweep_beta(&base, &[0.0]).is_err());
    }

    #[test]
    fn finite_k_curves() {
        let base = ScenarioParams::builtin(ScenarioKind::Mobile);
        let betas = [1e-1, 1e-2, 1e-3];
        let rows = finite_k_loss(&base, &betas, 1000).unwrap();
        assert_eq!(rows.len(), 3 * 1001);
        for chunk in rows.chunks(1001) {
            assert_eq!(chunk[0].k, 0);
            assert_eq!(chunk[0].rho_db, 0.0);
        }
        // beta = 0.1 has settled well before k = 1000.
        let fast = &rows[..1001];
        assert!((fast[1000].rho_db - fast[500].rho_db).abs() < 1e-6);
        // Slower evolution enters steady state later.
        let k: Vec<usize> = betas
            .iter()
            .map(|&b| {
                let s = with_beta(&base, b).unwrap().build().unwrap();
                let info = s.expected_information().unwrap();
                transient_blocks(s.model(), info.steady_onebit, 3.0).unwrap()
            })
            .collect();
        assert!(k[0] < k[1] && k[1] < k[2], "{k:?}");
    }

    fn small(kind: ScenarioKind, blocks: usize) -> Scenario {
        ScenarioParams {
            blocks,
            ..ScenarioParams::builtin(kind)
        }
        .build()
        .unwrap()
    }

    #[test]
    fn montecarlo_is_deterministic_across_workers() {
        let s = small(ScenarioKind::Uwb, 30);
        let cfg = |w| MonteCarloConfig {
            processes: 3,
            realizations: 4,
            seed: 5,
            workers: Some(w),
        };
        let a = run_montecarlo(&s, &cfg(1)).unwrap();
        let b = run_montecarlo(&s, &cfg(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_block.len(), 31);
        assert_eq!(a.discarded, 0);
        assert_eq!(a.per_block[0].bound_onebit, 0.05);
        let mut c = cfg(2);
        c.realizations = 0;
        assert!(run_montecarlo(&s, &c).is_err());
    }

    #[test]
    fn ranging_chebyshev_likelihood_matches_exact() {
        let s = Scenario::builtin(ScenarioKind::Ranging).unwrap();
        let mut eval = LikelihoodEvaluator::new(&s);
        let noise = NoiseModel::new(3);
        let theta = s.model().mu0();
        eval.observe(theta, 1, &noise, StreamPosition::new(Purpose::Noise, 0, 0, 1)).unwrap();
        let pf = s.filter_config().unwrap();
        let mut rng = StreamFactory::new(3).rng(StreamPosition::new(Purpose::Test, 0, 0, 0));
        // Prior-wide clouds: the widest interval the filter interpolates over.
        let c1 = pf_init(&pf, s.model().prior(), &mut rng);
        let c2 = pf_init(&pf, s.model().prior(), &mut rng);
        let (mut a1, mut a2) = (vec![0.0; 100], vec![0.0; 100]);
        eval.log_likelihoods(&c1, &c2, &mut a1, &mut a2).unwrap();
        for (i, &p) in c1.particles().iter().enumerate() {
            let exact = eval.exact(p, Receiver::OneBit).unwrap();
            assert!((a1[i] - exact).abs() < 1e-6, "{} vs {exact}", a1[i]);
        }
        for (i, &p) in c2.particles().iter().enumerate() {
            let exact = eval.exact(p, Receiver::Ideal).unwrap();
            assert!((a2[i] - exact).abs() < 1e-6, "{} vs {exact}", a2[i]);
        }
    }
}
