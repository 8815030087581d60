//! Sampled transmit waveforms and their parameter derivatives.
//!
//! Two families are supported:
//!
//! * [`DelayWaveform`]: a periodic spreading code shaped by a band-limited
//!   pulse and delayed by the parameter `theta` (seconds). One code period is
//!   represented on the `f_s = 2B` grid, transformed once, and evaluated at
//!   arbitrary delays by phase rotation. The derivative with respect to the
//!   delay comes from the same spectrum multiplied by `-j 2 pi f`, so it is
//!   exact for the band-limited interpolant and periodic by construction.
//! * [`LinearGainWaveform`]: a known unit-power pilot scaled by the parameter.
//!
//! All waveforms are normalized to unit average power.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_finite, Error, Result};

/// GPS C/A chip rate in chips per second.
pub const GPS_CA_CHIP_RATE: f64 = 1.023e6;
/// Length of a GPS C/A Gold code.
pub const GPS_CA_LENGTH: usize = 1023;

/// A periodic binary spreading code with symbols in {+1, -1}.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSequence {
    symbols: Vec<i8>,
    chip_duration: f64,
}

impl CodeSequence {
    pub fn new(symbols: Vec<i8>, chip_duration: f64) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("code sequence must contain at least one symbol"));
        }
        if let Some(pos) = symbols.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!(
                "symbol {pos} is {}, expected +1 or -1",
                symbols[pos]
            )));
        }
        if !(chip_duration.is_finite() && chip_duration > 0.0) {
            return Err(Error::invalid(format!(
                "chip duration must be positive, got {chip_duration}"
            )));
        }
        Ok(CodeSequence {
            symbols,
            chip_duration,
        })
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Chip duration `T_c` in seconds.
    pub fn chip_duration(&self) -> f64 {
        self.chip_duration
    }

    /// Code period `C * T_c` in seconds.
    pub fn period(&self) -> f64 {
        self.symbols.len() as f64 * self.chip_duration
    }
}

// G2 phase-selector taps (1-based register stages) for PRN 1..=32.
const CA_G2_TAPS: [(usize, usize); 32] = [
    (2, 6),
    (3, 7),
    (4, 8),
    (5, 9),
    (1, 9),
    (2, 10),
    (1, 8),
    (2, 9),
    (3, 10),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (1, 3),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
];

/// Raw C/A code chips (logic 0/1) for a PRN.
///
/// G1 feedback taps 3,10; G2 feedback taps 2,3,6,8,9,10; both registers start
/// all-ones. The chip is `G1[10] ^ G2[a] ^ G2[b]`.
pub fn gps_ca_bits(prn: u32) -> Result<Vec<u8>> {
    if !(1..=32).contains(&prn) {
        return Err(Error::invalid(format!("GPS PRN must be in 1..=32, got {prn}")));
    }
    let (a, b) = CA_G2_TAPS[prn as usize - 1];
    // Bit i of the register word holds stage i + 1.
    let mut g1: u16 = 0x3ff;
    let mut g2: u16 = 0x3ff;
    let stage = |reg: u16, s: usize| (reg >> (s - 1)) & 1;
    let mut bits = Vec::with_capacity(GPS_CA_LENGTH);
    for _ in 0..GPS_CA_LENGTH {
        bits.push((stage(g1, 10) ^ stage(g2, a) ^ stage(g2, b)) as u8);
        let f1 = stage(g1, 3) ^ stage(g1, 10);
        let f2 = stage(g2, 2)
            ^ stage(g2, 3)
            ^ stage(g2, 6)
            ^ stage(g2, 8)
            ^ stage(g2, 9)
            ^ stage(g2, 10);
        g1 = ((g1 << 1) | f1) & 0x3ff;
        g2 = ((g2 << 1) | f2) & 0x3ff;
    }
    Ok(bits)
}

/// The 1023-chip C/A Gold code of a GPS satellite, logic 1 mapped to +1 and
/// logic 0 to -1, with `T_c = 1 / 1.023 MHz`.
pub fn generate_gps_ca_code(prn: u32) -> Result<CodeSequence> {
    let symbols = gps_ca_bits(prn)?
        .into_iter()
        .map(|b| if b == 1 { 1 } else { -1 })
        .collect();
    CodeSequence::new(symbols, 1.0 / GPS_CA_CHIP_RATE)
}

/// Parses a code listing: one symbol per line, `1`/`+1` or `0`/`-1`.
/// Whitespace-only lines are skipped.
pub fn parse_code(text: &str, chip_duration: f64, origin: &Path) -> Result<CodeSequence> {
    let mut symbols = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let token = raw.trim();
        if token.is_empty() {
            continue;
        }
        let symbol = match token {
            "1" | "+1" => 1,
            "0" | "-1" => -1,
            other => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected a binary symbol (0, 1, +1, -1), found `{other}`"),
                })
            }
        };
        symbols.push(symbol);
    }
    if symbols.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "code file contains no symbols".into(),
        });
    }
    CodeSequence::new(symbols, chip_duration)
}

pub fn load_code_from_file(path: impl AsRef<Path>, chip_duration: f64) -> Result<CodeSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_code(&text, chip_duration, path)
}

/// Transmit pulse shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pulse {
    /// Rectangular chip pulse seen through the `B`-bandwidth receive filter.
    BandlimitedRect,
    /// Nyquist pulse; only the ideal sinc (`rolloff = 0`) is supported.
    Nyquist { rolloff: f64 },
}

/// Samples of `s(theta)` and `ds/dtheta` for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformEval {
    pub s: Vec<f64>,
    pub ds_dtheta: Vec<f64>,
}

impl WaveformEval {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Periodic code waveform delayed by `theta` seconds.
#[derive(Clone)]
pub struct DelayWaveform {
    code: CodeSequence,
    pulse: Pulse,
    bandwidth: f64,
    samples_per_block: usize,
    samples_per_chip: usize,
    /// Unit-power spectrum of one code period on the sampling grid.
    spectrum: Vec<Complex64>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DelayWaveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayWaveform")
            .field("chips", &self.code.len())
            .field("chip_duration", &self.code.chip_duration())
            .field("pulse", &self.pulse)
            .field("bandwidth", &self.bandwidth)
            .field("samples_per_block", &self.samples_per_block)
            .finish()
    }
}

impl DelayWaveform {
    pub fn new(
        code: CodeSequence,
        pulse: Pulse,
        bandwidth: f64,
        samples_per_block: usize,
    ) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if samples_per_block == 0 {
            return Err(Error::invalid("samples per block must be at least 1"));
        }
        let samples_per_chip = samples_per_chip(&code, bandwidth)?;
        let grid = chip_grid(&code, pulse, samples_per_chip)?;

        let len = grid.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum: Vec<Complex64> = grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward.process(&mut spectrum);

        let power = grid.iter().map(|v| v * v).sum::<f64>() / len as f64;
        let scale = 1.0 / power.sqrt();
        for c in &mut spectrum {
            *c *= scale;
        }
        // A real period of even length carries a real Nyquist coefficient; drop
        // the rounding residue so the interpolant stays exactly real.
        if len % 2 == 0 {
            spectrum[len / 2].im = 0.0;
        }
        Ok(DelayWaveform {
            code,
            pulse,
            bandwidth,
            samples_per_block,
            samples_per_chip,
            spectrum,
            inverse,
        })
    }

    pub fn code(&self) -> &CodeSequence {
        &self.code
    }

    pub fn pulse(&self) -> Pulse {
        self.pulse
    }

    /// One-sided bandwidth `B` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Sampling rate `f_s = 2B`.
    pub fn sample_rate(&self) -> f64 {
        2.0 * self.bandwidth
    }

    pub fn samples_per_block(&self) -> usize {
        self.samples_per_block
    }

    pub fn samples_per_chip(&self) -> usize {
        self.samples_per_chip
    }

    /// Samples in one code period.
    pub fn period_samples(&self) -> usize {
        self.spectrum.len()
    }

    /// Delay period `C * T_c` in seconds.
    pub fn period(&self) -> f64 {
        self.code.period()
    }

    /// Whether every block starts at the same code phase.
    pub fn blocks_phase_aligned(&self) -> bool {
        self.samples_per_block % self.period_samples() == 0
    }

    /// Delay in samples reduced to `[0, P)`.
    fn reduced_delay(&self, theta: f64) -> f64 {
        let p = self.period_samples() as f64;
        let d = (theta * self.sample_rate()).rem_euclid(p);
        if d >= p {
            0.0
        } else {
            d
        }
    }

    fn block_offset(&self, block: usize) -> usize {
        let p = self.period_samples();
        (block.saturating_sub(1) % p) * (self.samples_per_block % p) % p
    }

    /// `exp(-j 2 pi k d / P)` for `k = 0..=P/2`, by recurrence with an exact
    /// restart every few steps to bound the rounding drift.
    fn phasors(&self, delay: f64) -> Vec<Complex64> {
        const RESTART: usize = 32;
        let p = self.period_samples() as f64;
        let half = self.period_samples() / 2;
        let exact = |k: usize| {
            let turns = (k as f64 * delay).rem_euclid(p) / p;
            let (sin, cos) = (-2.0 * PI * turns).sin_cos();
            Complex64::new(cos, sin)
        };
        let step = exact(1);
        let mut out = Vec::with_capacity(half + 1);
        let mut cur = Complex64::new(1.0, 0.0);
        for k in 0..=half {
            if k % RESTART == 0 {
                cur = exact(k);
            }
            out.push(cur);
            cur *= step;
        }
        out
    }

    /// Phase-rotated period spectrum. When `with_derivative` is set the
    /// derivative spectrum (per sample of delay) is packed into the imaginary
    /// channel, so one inverse transform yields both real sequences.
    fn rotated_spectrum(&self, delay: f64, with_derivative: bool) -> Vec<Complex64> {
        let len = self.period_samples();
        let p = len as f64;
        let half = len / 2;
        let phasors = self.phasors(delay);
        let mut buf = Vec::with_capacity(len);
        for (k, &x) in self.spectrum.iter().enumerate() {
            if len % 2 == 0 && k == half {
                // Real Nyquist term: X cos(pi (m - d)) = X (-1)^m cos(pi d).
                let (sin, cos) = (PI * delay).sin_cos();
                let value = x.re * cos;
                let slope = -x.re * PI * sin;
                buf.push(if with_derivative {
                    Complex64::new(value, slope)
                } else {
                    Complex64::new(value, 0.0)
                });
                continue;
            }
            let (signed, phase) = if k > half {
                (k as f64 - p, phasors[len - k].conj())
            } else {
                (k as f64, phasors[k])
            };
            let rotated = x * phase;
            if with_derivative {
                // d/dd of exp(-j 2 pi k d / P) is -j 2 pi k / P times itself.
                let slope = rotated * Complex64::new(0.0, -2.0 * PI * signed / p);
                // pack: A + jB
                buf.push(rotated + Complex64::new(-slope.im, slope.re));
            } else {
                buf.push(rotated);
            }
        }
        buf
    }

    fn check_theta(theta: f64) -> Result<()> {
        ensure_finite("delay", theta)
    }

    /// `s(theta)` and `ds/dtheta` (per second) for block `block` (1-based).
    pub fn eval(&self, theta: f64, block: usize) -> Result<WaveformEval> {
        Self::check_theta(theta)?;
        let len = self.period_samples();
        let delay = self.reduced_delay(theta);
        let mut buf = self.rotated_spectrum(delay, true);
        self.inverse.process(&mut buf);
        let norm = 1.0 / len as f64;
        let fs = self.sample_rate();
        let offset = self.block_offset(block);
        let n = self.samples_per_block;
        let mut s = Vec::with_capacity(n);
        let mut ds = Vec::with_capacity(n);
        for i in 0..n {
            let v = buf[(offset + i) % len];
            s.push(v.re * norm);
            ds.push(v.im * norm * fs);
        }
        Ok(WaveformEval { s, ds_dtheta: ds })
    }

    /// `s(theta)` only, written into `out` (length `samples_per_block`).
    pub fn signal_into(&self, theta: f64, block: usize, out: &mut [f64]) -> Result<()> {
        Self::check_theta(theta)?;
        if out.len() != self.samples_per_block {
            return Err(Error::LengthMismatch {
                expected: self.samples_per_block,
                actual: out.len(),
            });
        }
        let len = self.period_samples();
        let delay = self.reduced_delay(theta);
        let mut buf = self.rotated_spectrum(delay, false);
        self.inverse.process(&mut buf);
        let norm = 1.0 / len as f64;
        let offset = self.block_offset(block);
        for (i, o) in out.iter_mut().enumerate() {
            *o = buf[(offset + i) % len].re * norm;
        }
        Ok(())
    }

    /// Signals at two delays from a single inverse transform: the spectrum of
    /// a real sequence is Hermitian, so the second one rides in the imaginary
    /// channel.
    pub fn signal_pair_into(
        &self,
        theta: [f64; 2],
        block: usize,
        out: [&mut [f64]; 2],
    ) -> Result<()> {
        for (t, o) in theta.iter().zip(&out) {
            Self::check_theta(*t)?;
            if o.len() != self.samples_per_block {
                return Err(Error::LengthMismatch {
                    expected: self.samples_per_block,
                    actual: o.len(),
                });
            }
        }
        let len = self.period_samples();
        let a = self.rotated_spectrum(self.reduced_delay(theta[0]), false);
        let b = self.rotated_spectrum(self.reduced_delay(theta[1]), false);
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.inverse.process(&mut buf);
        let norm = 1.0 / len as f64;
        let offset = self.block_offset(block);
        let [o1, o2] = out;
        for (i, (x, y)) in o1.iter_mut().zip(o2.iter_mut()).enumerate() {
            let v = buf[(offset + i) % len];
            *x = v.re * norm;
            *y = v.im * norm;
        }
        Ok(())
    }
}

fn samples_per_chip(code: &CodeSequence, bandwidth: f64) -> Result<usize> {
    let ratio = 2.0 * bandwidth * code.chip_duration();
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio {
        return Err(Error::Unsupported(format!(
            "sampling grid needs an integer number of samples per chip, got f_s * T_c = {ratio}"
        )));
    }
    Ok(rounded as usize)
}

/// One code period on the sampling grid.
fn chip_grid(code: &CodeSequence, pulse: Pulse, samples_per_chip: usize) -> Result<Vec<f64>> {
    match pulse {
        Pulse::BandlimitedRect => Ok(code
            .symbols()
            .iter()
            .flat_map(|&b| std::iter::repeat_n(f64::from(b), samples_per_chip))
            .collect()),
        Pulse::Nyquist { rolloff } if rolloff == 0.0 => {
            if samples_per_chip != 1 {
                return Err(Error::Unsupported(format!(
                    "sinc pulse needs one sample per symbol, got {samples_per_chip}"
                )));
            }
            Ok(code.symbols().iter().map(|&b| f64::from(b)).collect())
        }
        Pulse::Nyquist { rolloff } => Err(Error::Unsupported(format!(
            "Nyquist pulse roll-off {rolloff} (only 0 is implemented)"
        ))),
    }
}

/// Known pilot `x` scaled by the channel coefficient: `s(theta) = theta * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGainWaveform {
    pilot: Vec<f64>,
}

impl LinearGainWaveform {
    /// Uses `pilot` rescaled to unit average power.
    pub fn new(pilot: Vec<f64>) -> Result<Self> {
        if pilot.is_empty() {
            return Err(Error::invalid("pilot must have at least one sample"));
        }
        if pilot.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pilot samples must be finite"));
        }
        let power = pilot.iter().map(|v| v * v).sum::<f64>() / pilot.len() as f64;
        if power == 0.0 {
            return Err(Error::invalid("pilot has zero power"));
        }
        let scale = power.sqrt().recip();
        Ok(LinearGainWaveform {
            pilot: pilot.into_iter().map(|v| v * scale).collect(),
        })
    }

    /// Pilot from a symbol sequence under a sinc Nyquist pulse sampled at the
    /// symbol rate: the samples are the symbols, repeated to fill the block.
    pub fn from_code(code: &CodeSequence, pulse: Pulse, samples_per_block: usize) -> Result<Self> {
        if samples_per_block == 0 {
            return Err(Error::invalid("samples per block must be at least 1"));
        }
        let period = chip_grid(code, pulse, 1)?;
        let pilot = period.iter().copied().cycle().take(samples_per_block).collect();
        Self::new(pilot)
    }

    pub fn pilot(&self) -> &[f64] {
        &self.pilot
    }

    pub fn samples_per_block(&self) -> usize {
        self.pilot.len()
    }

    pub fn eval(&self, theta: f64) -> Result<WaveformEval> {
        ensure_finite("gain", theta)?;
        Ok(WaveformEval {
            s: self.pilot.iter().map(|x| theta * x).collect(),
            ds_dtheta: self.pilot.clone(),
        })
    }
}

/// Block-level signal evaluator.
#[derive(Debug, Clone)]
pub enum SampledWaveform {
    DelayModulated(DelayWaveform),
    LinearGain(LinearGainWaveform),
}

impl SampledWaveform {
    pub fn samples_per_block(&self) -> usize {
        match self {
            SampledWaveform::DelayModulated(w) => w.samples_per_block(),
            SampledWaveform::LinearGain(w) => w.samples_per_block(),
        }
    }

    pub fn eval(&self, theta: f64, block: usize) -> Result<WaveformEval> {
        match self {
            SampledWaveform::DelayModulated(w) => w.eval(theta, block),
            SampledWaveform::LinearGain(w) => w.eval(theta),
        }
    }

    /// Samples of the delayed code signal; fails for other waveform kinds.
    pub fn eval_delay(&self, theta: f64, block: usize) -> Result<WaveformEval> {
        match self {
            SampledWaveform::DelayModulated(w) => w.eval(theta, block),
            SampledWaveform::LinearGain(_) => Err(Error::invalid(
                "delay evaluation requested on a linear-gain waveform",
            )),
        }
    }

    /// Samples of the scaled pilot; fails for other waveform kinds. The pilot
    /// is the same in every block.
    pub fn eval_linear(&self, theta: f64, _block: usize) -> Result<WaveformEval> {
        match self {
            SampledWaveform::LinearGain(w) => w.eval(theta),
            SampledWaveform::DelayModulated(_) => Err(Error::invalid(
                "linear-gain evaluation requested on a delay waveform",
            )),
        }
    }

    /// Two signals at once; cheaper than two calls for delay waveforms.
    pub fn signal_pair_into(&self, theta: [f64; 2], block: usize, out: [&mut [f64]; 2]) -> Result<()> {
        match self {
            SampledWaveform::DelayModulated(w) => w.signal_pair_into(theta, block, out),
            SampledWaveform::LinearGain(_) => {
                let [o1, o2] = out;
                self.signal_into(theta[0], block, o1)?;
                self.signal_into(theta[1], block, o2)
            }
        }
    }

    pub fn signal_into(&self, theta: f64, block: usize, out: &mut [f64]) -> Result<()> {
        match self {
            SampledWaveform::DelayModulated(w) => w.signal_into(theta, block, out),
            SampledWaveform::LinearGain(w) => {
                ensure_finite("gain", theta)?;
                if out.len() != w.pilot.len() {
                    return Err(Error::LengthMismatch {
                        expected: w.pilot.len(),
                        actual: out.len(),
                    });
                }
                for (o, x) in out.iter_mut().zip(&w.pilot) {
                    *o = theta * x;
                }
                Ok(())
            }
        }
    }
}
