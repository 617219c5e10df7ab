//! Word-line input encoders and their charge model.
//!
//! Charge is measured in units of `Q_unit = W_p1 · I[1]`, the charge a
//! `g_on` cell collects while driven at DAC level 1 for one unit pulse.

use serde::{Deserialize, Serialize};

use crate::error::CimError;

/// MOSFET current as a function of word-line voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TransferFn {
    /// `gain · max(v − vt, 0)`
    Linear { gain: f64, vt: f64 },
    /// `k · max(v − vt, 0)^2`
    SquareLaw { k: f64, vt: f64 },
}

impl TransferFn {
    pub fn current(&self, v: f64) -> f64 {
        match *self {
            TransferFn::Linear { gain, vt } => gain * (v - vt).max(0.0),
            TransferFn::SquareLaw { k, vt } => {
                let d = (v - vt).max(0.0);
                k * d * d
            }
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            TransferFn::Linear { vt, .. } | TransferFn::SquareLaw { vt, .. } => vt,
        }
    }

    fn validate(&self) -> Result<(), CimError> {
        let (scale, vt) = match *self {
            TransferFn::Linear { gain, vt } => (gain, vt),
            TransferFn::SquareLaw { k, vt } => (k, vt),
        };
        if scale > 0.0 && scale.is_finite() && vt.is_finite() {
            Ok(())
        } else {
            Err(CimError::Config(format!("transfer function {self:?} is not strictly increasing")))
        }
    }
}

impl Default for TransferFn {
    fn default() -> Self {
        TransferFn::Linear { gain: 1.0, vt: 0.3 }
    }
}

const BISECT_REL_TOL: f64 = 1e-9;

/// Solve `f(v) = target` on `[lo, hi]` by bisection.
fn bisect(f: &TransferFn, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let i = f.current(mid);
        if (i - target).abs() <= BISECT_REL_TOL * target * 1e-3 || hi - lo <= f64::EPSILON * hi.abs() {
            return mid;
        }
        if i < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `levels` DAC voltages with `f(V[k]) = k · unit` and `V[0]` at threshold.
pub fn calibrate_dac_with_unit(
    f: &TransferFn,
    levels: usize,
    unit: f64,
    v_max: f64,
) -> Result<Vec<f64>, CimError> {
    f.validate()?;
    let vt = f.threshold();
    if !(v_max > vt) {
        return Err(CimError::Calibration {
            level: 1,
            reason: format!("headroom v_max = {v_max} is not above threshold {vt}"),
        });
    }
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(CimError::Calibration {
            level: 1,
            reason: format!("unit current {unit} must be positive"),
        });
    }
    let top = f.current(v_max);
    let mut out = Vec::with_capacity(levels);
    out.push(vt);
    for k in 1..levels {
        let target = k as f64 * unit;
        if target > top * (1.0 + BISECT_REL_TOL) {
            return Err(CimError::Calibration {
                level: k,
                reason: format!("needs {target:e} A but headroom only reaches {top:e} A"),
            });
        }
        let v = bisect(f, target.min(top), vt, v_max);
        let got = f.current(v);
        if (got - target).abs() > BISECT_REL_TOL * target {
            return Err(CimError::Calibration {
                level: k,
                reason: format!("bisection reached {got:e} A for target {target:e} A"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// `2^n` DAC voltages spanning the headroom: `I[k] = k · f(v_max) / (2^n − 1)`.
pub fn calibrate_dac(f: &TransferFn, n: u32, v_max: f64) -> Result<Vec<f64>, CimError> {
    let levels = 1usize << n;
    calibrate_dac_with_unit(f, levels, f.current(v_max) / (levels - 1) as f64, v_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderScheme {
    PureVoltage,
    #[serde(rename = "pwm", alias = "pure_pwm")]
    PurePwm,
    Tmdv,
}

impl EncoderScheme {
    pub const ALL: [EncoderScheme; 3] = [EncoderScheme::PureVoltage, EncoderScheme::PurePwm, EncoderScheme::Tmdv];

    pub fn name(self) -> &'static str {
        match self {
            EncoderScheme::PureVoltage => "pure_voltage",
            EncoderScheme::PurePwm => "pwm",
            EncoderScheme::Tmdv => "tmdv",
        }
    }

    /// Cycle length in unit pulses for a `2n`-bit input.
    pub fn latency_units(self, n: u32) -> u64 {
        match self {
            EncoderScheme::PureVoltage => 1,
            EncoderScheme::PurePwm => 1 << (2 * n),
            EncoderScheme::Tmdv => 1 + (1 << n),
        }
    }

    pub fn dac_levels(self, n: u32) -> usize {
        match self {
            EncoderScheme::PureVoltage => 1 << (2 * n),
            EncoderScheme::PurePwm => 2,
            EncoderScheme::Tmdv => 1 << n,
        }
    }

    /// Delay-chain stages needed to time the pulses.
    pub fn delay_chain_len(self, n: u32) -> u64 {
        match self {
            EncoderScheme::PureVoltage => 1,
            EncoderScheme::PurePwm => 1 << (2 * n),
            EncoderScheme::Tmdv => 1 << (n + 1),
        }
    }
}

/// High-performance (`TdP`) or high-accuracy (`TdA`) operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum EncoderMode {
    #[default]
    #[serde(rename = "TD_P")]
    TdP,
    #[serde(rename = "TD_A")]
    TdA,
}

impl EncoderMode {
    pub fn name(self) -> &'static str {
        match self {
            EncoderMode::TdP => "TD_P",
            EncoderMode::TdA => "TD_A",
        }
    }

    /// Default half-width: 4+4 bits for throughput, 3+3 for accuracy.
    pub fn default_n(self) -> u32 {
        match self {
            EncoderMode::TdP => 4,
            EncoderMode::TdA => 3,
        }
    }
}

/// One constant-voltage piece of a word-line waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// DAC level index (0 = transistor off).
    pub level: u32,
    pub voltage: f64,
    /// Width in unit pulses.
    pub width_units: u64,
    /// Width in seconds.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub segments: Vec<Segment>,
}

impl PulseTrain {
    pub fn total_units(&self) -> u64 {
        self.segments.iter().map(|s| s.width_units).sum()
    }
}

/// Encoder parameters plus the calibrated DAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub scheme: EncoderScheme,
    /// Half input width; inputs are `2n`-bit.
    pub n: u32,
    pub unit_pulse: f64,
    pub transfer: TransferFn,
    pub v_max: f64,
    pub voltage_noise_sigma: f64,
    pub mode: EncoderMode,
    dac_levels: Vec<f64>,
}

impl EncoderConfig {
    pub fn new(
        scheme: EncoderScheme,
        n: u32,
        transfer: TransferFn,
        v_max: f64,
        unit_pulse: f64,
    ) -> Result<Self, CimError> {
        if !(1..=4).contains(&n) {
            return Err(CimError::Config(format!("N must be 1..=4, got {n}")));
        }
        if !(unit_pulse > 0.0 && unit_pulse.is_finite()) {
            return Err(CimError::Config("unit pulse width must be positive".into()));
        }
        let levels = scheme.dac_levels(n);
        let top = transfer.current(v_max);
        let dac_levels = calibrate_dac_with_unit(&transfer, levels, top / (levels - 1) as f64, v_max)?;
        Ok(Self {
            scheme,
            n,
            unit_pulse,
            transfer,
            v_max,
            voltage_noise_sigma: 0.0,
            mode: EncoderMode::default(),
            dac_levels,
        })
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.voltage_noise_sigma = sigma;
        self
    }

    pub fn with_mode(mut self, mode: EncoderMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn dac_levels(&self) -> &[f64] {
        &self.dac_levels
    }

    /// Largest encodable input, `2^(2n) − 1`.
    pub fn max_input(&self) -> u64 {
        (1u64 << (2 * self.n)) - 1
    }

    /// Current of DAC level 1, `I[1]`.
    pub fn unit_current(&self) -> f64 {
        self.transfer.current(self.dac_levels[1])
    }

    /// `Q_unit = W_p1 · I[1]` in coulombs.
    pub fn charge_unit(&self) -> f64 {
        self.unit_pulse * self.unit_current()
    }

    pub fn latency_units(&self) -> u64 {
        self.scheme.latency_units(self.n)
    }

    fn segment(&self, level: u32, width_units: u64) -> Segment {
        Segment {
            level,
            voltage: self.dac_levels[level as usize],
            width_units,
            width: width_units as f64 * self.unit_pulse,
        }
    }

    pub fn encode(&self, x: u64) -> Result<PulseTrain, CimError> {
        if x > self.max_input() {
            return Err(CimError::InputOutOfRange { x, max: self.max_input() });
        }
        let segments = match self.scheme {
            EncoderScheme::Tmdv => {
                let mask = (1u64 << self.n) - 1;
                vec![
                    self.segment((x & mask) as u32, 1),
                    self.segment((x >> self.n) as u32, 1 << self.n),
                ]
            }
            EncoderScheme::PureVoltage => vec![self.segment(x as u32, 1)],
            EncoderScheme::PurePwm => {
                if x == 0 {
                    vec![self.segment(0, 1)]
                } else {
                    vec![self.segment(1, x)]
                }
            }
        };
        Ok(PulseTrain { segments })
    }

    /// Charge of a `g_on` cell in `Q_unit`, assuming every calibrated level
    /// delivers exactly `level · I[1]`.
    pub fn ideal_charge(&self, train: &PulseTrain) -> f64 {
        train
            .segments
            .iter()
            .map(|s| s.level as u64 * s.width_units)
            .sum::<u64>() as f64
    }

    /// Charge in `Q_unit` through the actual transfer curve, with optional
    /// additive word-line voltage offsets per segment. Level-0 segments
    /// leave the access transistor off.
    pub fn physical_charge(&self, train: &PulseTrain, dv: &[f64]) -> f64 {
        let q: f64 = train
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.level > 0)
            .map(|(k, s)| {
                let v = s.voltage + dv.get(k).copied().unwrap_or(0.0);
                self.transfer.current(v) * s.width
            })
            .sum();
        q / self.charge_unit()
    }
}

pub fn encode_input(x: u64, cfg: &EncoderConfig) -> Result<PulseTrain, CimError> {
    cfg.encode(x)
}

pub fn ideal_charge(train: &PulseTrain, cfg: &EncoderConfig) -> f64 {
    cfg.ideal_charge(train)
}
