//! Run configuration: built-in scenario defaults, then `key = value` file
//! entries, then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use onebit_core::experiments::{ScenarioKind, ScenarioParams};
use onebit_core::filters::Resampler;
use onebit_core::signal_models::GPS_CA_CHIP_RATE;
use onebit_core::units::DelayUnit;

use crate::CliError;

/// Every key a config file may set. Anything else is rejected.
pub const KEYS: &[&str] = &[
    "scenario",
    "unit",
    "seed",
    "workers",
    "snr_db",
    "alpha",
    "sigma",
    "mu0",
    "sigma0",
    "blocks",
    "prn",
    "bandwidth",
    "samples",
    "pilot_symbols",
    "particles",
    "kappa",
    "resampler",
    "trials",
    "realizations",
    "likelihood_nodes",
    "lambda",
    "beta_min",
    "beta_max",
    "points",
];

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_LAMBDA: f64 = 3.0;
pub const DEFAULT_BETA_MIN: f64 = 1e-7;
pub const DEFAULT_BETA_MAX: f64 = 1.0;
/// Seven points per decade over the default range.
pub const DEFAULT_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Workers {
    pub fn threads(self) -> Option<usize> {
        match self {
            Workers::Auto => None,
            Workers::Count(n) => Some(n),
        }
    }
}

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Setting {
    fn error(&self, why: impl fmt::Display) -> CliError {
        CliError::Config(format!("{}: invalid value `{}` for key `{}`: {why}", self.origin, self.value, self.key))
    }

    fn parse<T: std::str::FromStr>(&self) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| self.error(e))
    }
}

/// Parses flat `key = value` text. Blank lines and lines starting with `#`
/// or `;` are skipped; a `#` after whitespace starts a trailing comment.
pub fn parse_settings(text: &str, path: &Path) -> Result<Vec<Setting>, CliError> {
    let mut out: Vec<Setting> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::File {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("{origin}: expected `key = value`, got `{line}`")));
        };
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("{origin}: unknown key `{key}`")));
        }
        if let Some(prev) = out.iter().find(|s| s.key == key) {
            return Err(CliError::Config(format!(
                "{origin}: key `{key}` already set at {}",
                prev.origin
            )));
        }
        out.push(Setting {
            key,
            value: value.trim().to_string(),
            origin,
        });
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn read_settings(path: &Path) -> Result<Vec<Setting>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_settings(&text, path)
}

/// Fully resolved inputs of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ScenarioParams,
    /// Delay unit for ranging inputs and outputs; `None` for the channel
    /// coefficient scenarios, which are dimensionless.
    pub unit: Option<DelayUnit>,
    pub seed: u64,
    pub workers: Workers,
    pub lambda: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
}

impl RunConfig {
    /// Resolves `scenario` (a built-in name or a config file path), the
    /// optional `--config` file and the flag settings, later sources
    /// overriding earlier ones.
    pub fn resolve(
        scenario: Option<&str>,
        config: Option<&Path>,
        flags: Vec<Setting>,
    ) -> Result<Self, CliError> {
        let mut layers: Vec<Setting> = Vec::new();
        let mut kind_name: Option<String> = None;
        if let Some(s) = scenario {
            if s.parse::<ScenarioKind>().is_ok() {
                kind_name = Some(s.to_string());
            } else if Path::new(s).is_file() {
                layers.extend(read_settings(Path::new(s))?);
            } else {
                return Err(CliError::Config(format!(
                    "unknown scenario `{s}`, expected ranging, uwb, mobile or a config file"
                )));
            }
        }
        if let Some(path) = config {
            layers.extend(read_settings(path)?);
        }
        layers.extend(flags);

        // The scenario fixes the defaults everything else overrides.
        if let Some(s) = layers.iter().rev().find(|s| s.key == "scenario") {
            if kind_name.is_none() {
                kind_name = Some(s.value.clone());
            }
        }
        let kind: ScenarioKind = match kind_name {
            Some(name) => name
                .parse()
                .map_err(|_| CliError::Config(format!("unknown scenario `{name}`")))?,
            None => ScenarioKind::Ranging,
        };

        let mut unit = kind.is_delay().then_some(DelayUnit::Meters);
        for s in layers.iter().filter(|s| s.key == "unit") {
            if !kind.is_delay() {
                return Err(s.error(format!("the {} scenario has no delay unit", kind.name())));
            }
            unit = Some(s.parse()?);
        }

        let mut cfg = RunConfig {
            params: ScenarioParams::builtin(kind),
            unit,
            seed: DEFAULT_SEED,
            workers: Workers::Auto,
            lambda: DEFAULT_LAMBDA,
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
            points: DEFAULT_POINTS,
        };
        for s in &layers {
            cfg.apply(s)?;
        }
        Ok(cfg)
    }

    /// Converts a delay given in the configured unit to chips.
    fn to_chips(&self, v: f64) -> f64 {
        let tc = 1.0 / GPS_CA_CHIP_RATE;
        match self.unit {
            Some(u) => u.to_seconds(v, tc) / tc,
            None => v,
        }
    }

    fn apply(&mut self, s: &Setting) -> Result<(), CliError> {
        let p = &mut self.params;
        match s.key.as_str() {
            "scenario" | "unit" => {}
            "seed" => self.seed = s.parse()?,
            "workers" => {
                self.workers = if s.value == "auto" {
                    Workers::Auto
                } else {
                    match s.parse::<usize>()? {
                        0 => return Err(s.error("need at least one worker, or `auto`")),
                        n => Workers::Count(n),
                    }
                }
            }
            "snr_db" => p.snr_db = finite(s)?,
            "alpha" => p.alpha = finite(s)?,
            "sigma" | "mu0" | "sigma0" => {
                let v = finite(s)?;
                let v = if p.kind.is_delay() { self.to_chips(v) } else { v };
                let p = &mut self.params;
                match s.key.as_str() {
                    "sigma" => p.sigma = Some(v),
                    "mu0" => p.mu0 = Some(v),
                    _ => p.sigma0 = Some(v),
                }
            }
            "blocks" => p.blocks = s.parse()?,
            "prn" => p.prn = s.parse()?,
            "bandwidth" => p.bandwidth = finite(s)?,
            "samples" => p.samples = positive(s)?,
            "pilot_symbols" => p.pilot_symbols = positive(s)?,
            "particles" => p.particles = s.parse()?,
            "kappa" => p.kappa = finite(s)?,
            "resampler" => {
                p.resampler = match s.value.as_str() {
                    "systematic" => Resampler::Systematic,
                    "multinomial" => Resampler::Multinomial,
                    _ => return Err(s.error("expected systematic or multinomial")),
                }
            }
            "trials" => p.processes = positive(s)?,
            "realizations" => p.realizations = positive(s)?,
            "likelihood_nodes" => p.likelihood_nodes = s.parse()?,
            "lambda" => self.lambda = finite(s)?,
            "beta_min" => self.beta_min = finite(s)?,
            "beta_max" => self.beta_max = finite(s)?,
            "points" => self.points = positive(s)?,
            other => return Err(CliError::Config(format!("{}: unknown key `{other}`", s.origin))),
        }
        Ok(())
    }
}

fn finite(s: &Setting) -> Result<f64, CliError> {
    let v: f64 = s.parse()?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(s.error("must be finite"))
    }
}

fn positive(s: &Setting) -> Result<usize, CliError> {
    match s.parse::<usize>()? {
        0 => Err(s.error("must be at least 1")),
        n => Ok(n),
    }
}
