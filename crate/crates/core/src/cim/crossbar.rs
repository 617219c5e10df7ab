use serde::{Deserialize, Serialize};

use crate::error::CimError;

/// Physical parameters of one crossbar tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossbarConfig {
    pub rows: usize,
    pub cols: usize,
    /// Bit-line wire resistance per row segment, ohms.
    pub wire_r: f64,
    /// Cell conductance for a stored 1 / 0, siemens.
    pub g_on: f64,
    pub g_off: f64,
    pub v_clamp: f64,
    /// Sampling capacitor, farads.
    pub c_sample: f64,
    pub adc_bits: u32,
    /// Relative std-dev of cell conductance.
    pub variation_sigma: f64,
    pub seed: u64,
}

impl Default for CrossbarConfig {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
            wire_r: 1.0,
            g_on: 1e-5,
            g_off: 1e-7,
            v_clamp: 0.2,
            c_sample: 1e-13,
            adc_bits: 18,
            variation_sigma: 0.0,
            seed: 0,
        }
    }
}

pub const MAX_ROWS: usize = 4096;

impl CrossbarConfig {
    pub fn with_rows(mut self, rows: usize) -> Self {
        self.rows = rows;
        self
    }

    pub fn validate(&self) -> Result<(), CimError> {
        if self.rows == 0 || self.rows > MAX_ROWS {
            return Err(CimError::Config(format!("rows must be in 1..={MAX_ROWS}, got {}", self.rows)));
        }
        if self.cols == 0 {
            return Err(CimError::Config("cols must be positive".into()));
        }
        if !(self.wire_r >= 0.0 && self.wire_r.is_finite()) {
            return Err(CimError::Config(format!("wire_r must be >= 0, got {}", self.wire_r)));
        }
        if !(self.g_off >= 0.0 && self.g_on > self.g_off && self.g_on.is_finite()) {
            return Err(CimError::Config(format!(
                "need g_on > g_off >= 0, got g_on={} g_off={}",
                self.g_on, self.g_off
            )));
        }
        if !(self.variation_sigma >= 0.0 && self.variation_sigma < 1.0 / 3.0) {
            return Err(CimError::Config(format!(
                "variation_sigma must be in [0, 1/3), got {}",
                self.variation_sigma
            )));
        }
        if !(1..=30).contains(&self.adc_bits) {
            return Err(CimError::Config(format!("adc_bits must be 1..=30, got {}", self.adc_bits)));
        }
        if !(self.c_sample > 0.0) || !self.v_clamp.is_finite() {
            return Err(CimError::Config("c_sample must be positive and v_clamp finite".into()));
        }
        Ok(())
    }
}
