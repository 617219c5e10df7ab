//! Technology unit costs.

use serde::{Deserialize, Serialize};

use crate::error::CostError;

pub const TECH_SCHEMA_VERSION: u32 = 1;

/// Unit costs in arbitrary but consistent area / energy / time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechParams {
    pub version: u32,
    /// Per stored LUT bit.
    pub lut_bit_area: f64,
    /// Per LUT bit read.
    pub lut_bit_energy: f64,
    /// Per MUX / DEMUX way.
    pub mux_way_area: f64,
    pub mux_way_energy: f64,
    /// Per decoder output line (a `b`-bit decoder has `2^b`).
    pub decoder_line_area: f64,
    pub decoder_line_energy: f64,
    /// Per DAC output level, per word line.
    pub dac_level_area: f64,
    /// Per DAC conversion, per level.
    pub dac_level_energy: f64,
    pub delay_stage_area: f64,
    pub delay_stage_energy: f64,
    pub cell_area: f64,
    /// Per unit charge quantum delivered by a cell.
    pub cell_energy: f64,
    /// ADC area and per-conversion energy scale as `unit · bits`.
    pub adc_area: f64,
    pub adc_energy: f64,
    pub clock_period: f64,
}

pub const TECH_KEYS: [&str; 16] = [
    "version",
    "lut_bit_area",
    "lut_bit_energy",
    "mux_way_area",
    "mux_way_energy",
    "decoder_line_area",
    "decoder_line_energy",
    "dac_level_area",
    "dac_level_energy",
    "delay_stage_area",
    "delay_stage_energy",
    "cell_area",
    "cell_energy",
    "adc_area",
    "adc_energy",
    "clock_period",
];

impl Default for TechParams {
    /// Illustrative order-of-magnitude values, not a calibrated process.
    fn default() -> Self {
        Self {
            version: TECH_SCHEMA_VERSION,
            lut_bit_area: 1.0,
            lut_bit_energy: 0.01,
            mux_way_area: 2.0,
            mux_way_energy: 0.02,
            decoder_line_area: 1.5,
            decoder_line_energy: 0.015,
            dac_level_area: 4.0,
            dac_level_energy: 0.05,
            delay_stage_area: 3.0,
            delay_stage_energy: 0.03,
            cell_area: 0.5,
            cell_energy: 1e-4,
            adc_area: 0.05,
            adc_energy: 1e-3,
            clock_period: 1e-9,
        }
    }
}

impl TechParams {
    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CostError::Inconsistent(format!("tech file: {e}")))?;
        for key in TECH_KEYS {
            if !table.contains_key(key) {
                return Err(CostError::MissingParam(key.to_string()));
            }
        }
        let tech: TechParams =
            toml::from_str(text).map_err(|e| CostError::Inconsistent(format!("tech file: {e}")))?;
        tech.validate()?;
        Ok(tech)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CostError::Inconsistent(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn values(&self) -> [(&'static str, f64); 15] {
        [
            ("lut_bit_area", self.lut_bit_area),
            ("lut_bit_energy", self.lut_bit_energy),
            ("mux_way_area", self.mux_way_area),
            ("mux_way_energy", self.mux_way_energy),
            ("decoder_line_area", self.decoder_line_area),
            ("decoder_line_energy", self.decoder_line_energy),
            ("dac_level_area", self.dac_level_area),
            ("dac_level_energy", self.dac_level_energy),
            ("delay_stage_area", self.delay_stage_area),
            ("delay_stage_energy", self.delay_stage_energy),
            ("cell_area", self.cell_area),
            ("cell_energy", self.cell_energy),
            ("adc_area", self.adc_area),
            ("adc_energy", self.adc_energy),
            ("clock_period", self.clock_period),
        ]
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.version != TECH_SCHEMA_VERSION {
            return Err(CostError::Inconsistent(format!(
                "tech schema version {} (expected {TECH_SCHEMA_VERSION})",
                self.version
            )));
        }
        for (k, v) in self.values() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CostError::MissingParam(format!("{k} = {v} (must be finite and >= 0)")));
            }
        }
        Ok(())
    }
}
