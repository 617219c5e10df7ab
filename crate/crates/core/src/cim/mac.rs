//! Bit-sliced analog MAC on one crossbar tile.
//!
//! Each logical output owns two column groups (positive and negative
//! coefficients), each with `SLICE_BITS` magnitude columns ordered MSB to
//! LSB and one all-`g_off` reference column whose charge is subtracted.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossbar::CrossbarConfig;
use super::encoder::{EncoderConfig, EncoderScheme};
use super::ladder::{BitLineSolver, TridiagonalSolver};
use crate::error::CimError;
use crate::rng::substream;

pub const SLICE_BITS: u32 = 8;
const WL_NOISE_TAG: u64 = 0x776c;
const VARIATION_TAG: u64 = 0x766172;
const REF_COLUMN: u64 = SLICE_BITS as u64;

/// Signed integer coefficients placed on physical rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarState {
    rows: usize,
    /// Physical row of each logical row.
    row_of: Vec<usize>,
    /// `[output][physical row]`
    weights: Vec<Vec<i32>>,
}

impl CrossbarState {
    /// `weights[o][l]` is the code for output `o`, logical row `l`, stored on
    /// physical row `row_of[l]`.
    pub fn program(rows: usize, weights: &[Vec<i32>], row_of: &[usize]) -> Result<Self, CimError> {
        let logical = row_of.len();
        if logical > rows {
            return Err(CimError::Config(format!("{logical} logical rows do not fit in {rows}")));
        }
        let mut used = vec![false; rows];
        for &r in row_of {
            if r >= rows || used[r] {
                return Err(CimError::Config(format!("row map is not injective into 0..{rows} (row {r})")));
            }
            used[r] = true;
        }
        let limit = (1i64 << SLICE_BITS) - 1;
        let mut phys = Vec::with_capacity(weights.len());
        for (o, w) in weights.iter().enumerate() {
            if w.len() != logical {
                return Err(CimError::Config(format!(
                    "output {o} has {} weights for {logical} rows",
                    w.len()
                )));
            }
            let mut col = vec![0i32; rows];
            for (l, &c) in w.iter().enumerate() {
                if (c as i64).abs() > limit {
                    return Err(CimError::Config(format!("weight {c} exceeds {SLICE_BITS} magnitude bits")));
                }
                col[row_of[l]] = c;
            }
            phys.push(col);
        }
        Ok(Self { rows, row_of: row_of.to_vec(), weights: phys })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn logical_rows(&self) -> usize {
        self.row_of.len()
    }

    pub fn row_of(&self) -> &[usize] {
        &self.row_of
    }

    /// Digital reference `Σ_l w[o][l] · x[l]`.
    pub fn ideal_sums(&self, inputs: &[u64]) -> Vec<i64> {
        self.weights
            .iter()
            .map(|w| {
                self.row_of
                    .iter()
                    .zip(inputs)
                    .map(|(&r, &x)| w[r] as i64 * x as i64)
                    .sum()
            })
            .collect()
    }

    fn max_ones_per_column(&self) -> u64 {
        let mut best = 0u64;
        for w in &self.weights {
            for negative in [false, true] {
                for b in 0..SLICE_BITS {
                    let n = w.iter().filter(|&&c| bit_of(c, negative, b)).count() as u64;
                    best = best.max(n);
                }
            }
        }
        best
    }
}

#[inline]
fn bit_of(c: i32, negative: bool, b: u32) -> bool {
    (c < 0) == negative && c != 0 && (c.unsigned_abs() >> b) & 1 == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacResult {
    pub ideal_sum: i64,
    pub decoded_sum: i64,
    /// Shift-and-add weighted differential charge, coulombs.
    pub analog_charge: f64,
    /// Decoded minus ideal per slice column: positive group MSB..LSB, then
    /// negative group.
    pub slice_errors: Vec<i64>,
    pub saturated: bool,
}

impl MacResult {
    pub fn error(&self) -> i64 {
        self.decoded_sum - self.ideal_sum
    }
}

/// One interval of constant word-line drive.
struct Slot {
    width: f64,
    /// Per physical row: DAC level (0 = off) and the pulse segment it belongs to.
    drive: Vec<(u32, usize)>,
}

fn build_slots(phys_inputs: &[u64], enc: &EncoderConfig) -> Result<Vec<Slot>, CimError> {
    let rows = phys_inputs.len();
    match enc.scheme {
        EncoderScheme::PurePwm => {
            let mut cuts: Vec<u64> = phys_inputs.iter().copied().filter(|&x| x > 0).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut prev = 0u64;
            let mut slots = Vec::with_capacity(cuts.len());
            for t in cuts {
                let drive = phys_inputs.iter().map(|&x| (u32::from(x > prev), 0)).collect();
                slots.push(Slot { width: (t - prev) as f64 * enc.unit_pulse, drive });
                prev = t;
            }
            Ok(slots)
        }
        _ => {
            let trains = phys_inputs
                .iter()
                .map(|&x| enc.encode(x))
                .collect::<Result<Vec<_>, _>>()?;
            let nseg = trains.first().map_or(0, |t| t.segments.len());
            Ok((0..nseg)
                .map(|s| Slot {
                    width: trains[0].segments[s].width,
                    drive: (0..rows).map(|r| (trains[r].segments[s].level, s)).collect(),
                })
                .collect())
        }
    }
}

/// Per-row, per-segment word-line voltage offsets shared by every column.
fn wl_noise(rows: usize, xbar: &CrossbarConfig, enc: &EncoderConfig, trial: u64) -> Vec<[f64; 2]> {
    if enc.voltage_noise_sigma == 0.0 {
        return vec![[0.0; 2]; rows];
    }
    let mut rng = substream(xbar.seed, &[WL_NOISE_TAG, trial]);
    (0..rows)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [enc.voltage_noise_sigma * a, enc.voltage_noise_sigma * b]
        })
        .collect()
}

fn variation(base: &mut [f64], xbar: &CrossbarConfig, output: usize, column: u64, trial: u64) {
    if xbar.variation_sigma == 0.0 {
        return;
    }
    let mut rng = substream(xbar.seed, &[VARIATION_TAG, output as u64, column, trial]);
    for g in base.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *g *= 1.0 + xbar.variation_sigma * z.clamp(-3.0, 3.0);
    }
}

pub fn simulate_mac(
    state: &CrossbarState,
    inputs: &[u64],
    enc: &EncoderConfig,
    xbar: &CrossbarConfig,
    trial: u64,
) -> Result<Vec<MacResult>, CimError> {
    simulate_mac_with(&TridiagonalSolver, state, inputs, enc, xbar, trial)
}

pub fn simulate_mac_with(
    solver: &dyn BitLineSolver,
    state: &CrossbarState,
    inputs: &[u64],
    enc: &EncoderConfig,
    xbar: &CrossbarConfig,
    trial: u64,
) -> Result<Vec<MacResult>, CimError> {
    xbar.validate()?;
    if xbar.rows != state.rows {
        return Err(CimError::Config(format!(
            "state has {} rows, crossbar {}",
            state.rows, xbar.rows
        )));
    }
    if inputs.len() != state.logical_rows() {
        return Err(CimError::Config(format!(
            "{} inputs for {} logical rows",
            inputs.len(),
            state.logical_rows()
        )));
    }
    let mut phys = vec![0u64; state.rows];
    for (&r, &x) in state.row_of.iter().zip(inputs) {
        if x > enc.max_input() {
            return Err(CimError::InputOutOfRange { x, max: enc.max_input() });
        }
        phys[r] = x;
    }
    let slots = build_slots(&phys, enc)?;
    let noise = wl_noise(state.rows, xbar, enc, trial);
    let dac = enc.dac_levels();
    // drive[slot][row]: read voltage above clamp, None when the cell is off
    let drives: Vec<Vec<Option<f64>>> = slots
        .iter()
        .map(|slot| {
            slot.drive
                .iter()
                .enumerate()
                .map(|(r, &(level, seg))| {
                    if level == 0 {
                        return None;
                    }
                    let i = enc.transfer.current(dac[level as usize] + noise[r][seg]);
                    (i > 0.0).then(|| i / xbar.g_on)
                })
                .collect()
        })
        .collect();

    let max_code = (1u64 << xbar.adc_bits) - 1;
    let full_scale = state.max_ones_per_column() * enc.max_input();
    let step = (full_scale as f64 / max_code as f64).max(1.0);
    let q_unit = enc.charge_unit() * (xbar.g_on - xbar.g_off) / xbar.g_on;
    let ideal = state.ideal_sums(inputs);

    let column_charge = |g_col: &[f64]| -> Result<f64, CimError> {
        let mut q = 0.0;
        let mut g = vec![0.0; g_col.len()];
        let mut d = vec![0.0; g_col.len()];
        for (slot, drive) in slots.iter().zip(&drives) {
            let mut any = false;
            for r in 0..g_col.len() {
                match drive[r] {
                    Some(v) if g_col[r] > 0.0 => {
                        g[r] = g_col[r];
                        d[r] = v;
                        any = true;
                    }
                    _ => {
                        g[r] = 0.0;
                        d[r] = 0.0;
                    }
                }
            }
            if !any {
                continue;
            }
            let sol = solver.solve(&g, &d, xbar.wire_r, xbar.v_clamp)?;
            q += slot.width * sol.currents.iter().sum::<f64>();
        }
        Ok(q)
    };

    (0..state.outputs())
        .into_par_iter()
        .map(|o| {
            let w = &state.weights[o];
            let mut decoded = 0i64;
            let mut charge = 0.0;
            let mut slice_errors = Vec::with_capacity(2 * SLICE_BITS as usize);
            let mut saturated = false;
            for (gi, negative) in [false, true].into_iter().enumerate() {
                let group = gi as u64 * (SLICE_BITS as u64 + 1);
                let mut g_ref = vec![xbar.g_off; state.rows];
                variation(&mut g_ref, xbar, o, group + REF_COLUMN, trial);
                let q_ref = column_charge(&g_ref)?;
                for b in (0..SLICE_BITS).rev() {
                    let mut g_col: Vec<f64> = w
                        .iter()
                        .map(|&c| if bit_of(c, negative, b) { xbar.g_on } else { xbar.g_off })
                        .collect();
                    variation(&mut g_col, xbar, o, group + b as u64, trial);
                    let q = column_charge(&g_col)? - q_ref;
                    let level = q / q_unit / step;
                    let code = level.round();
                    if code < 0.0 || code > max_code as f64 {
                        saturated = true;
                    }
                    let value = (code.clamp(0.0, max_code as f64) * step).round() as i64;
                    let exact: i64 = w
                        .iter()
                        .zip(&phys)
                        .filter(|(&c, _)| bit_of(c, negative, b))
                        .map(|(_, &x)| x as i64)
                        .sum();
                    slice_errors.push(value - exact);
                    let sign = if negative { -1 } else { 1 };
                    decoded += sign * (value << b);
                    charge += sign as f64 * q * (1u64 << b) as f64;
                }
            }
            Ok(MacResult { ideal_sum: ideal[o], decoded_sum: decoded, analog_charge: charge, slice_errors, saturated })
        })
        .collect()
}
