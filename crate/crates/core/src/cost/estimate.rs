//! Closed-form area / energy / latency roll-up.

use serde::{Deserialize, Serialize};

use super::tech::TechParams;
use crate::cim::{CrossbarConfig, EncoderConfig, EncoderScheme, SLICE_BITS};
use crate::error::CostError;
use crate::haq::{count_resources, quantize_coeffs, QuantMode, QuantScheme, ResourceCount};
use crate::sam::BasisStats;
use crate::spline::{KanLayer, KanModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub lut: f64,
    pub mux: f64,
    pub decoder: f64,
    pub input_gen: f64,
    pub array: f64,
    pub adc: f64,
    pub other: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.lut + self.mux + self.decoder + self.input_gen + self.array + self.adc + self.other
    }

    /// Area of the basis-generation path alone.
    pub fn lookup_path(&self) -> f64 {
        self.lut + self.mux + self.decoder
    }

    fn add(&mut self, o: &Breakdown) {
        self.lut += o.lut;
        self.mux += o.mux;
        self.decoder += o.decoder;
        self.input_gen += o.input_gen;
        self.array += o.array;
        self.adc += o.adc;
        self.other += o.other;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub area: f64,
    pub energy: f64,
    pub latency: f64,
    pub power: f64,
    pub area_breakdown: Breakdown,
    pub energy_breakdown: Breakdown,
    pub latency_breakdown: Breakdown,
}

impl CostReport {
    fn from_parts(area: Breakdown, energy: Breakdown, latency: Breakdown) -> Self {
        let (a, e, l) = (area.total(), energy.total(), latency.total());
        Self {
            area: a,
            energy: e,
            latency: l,
            power: if l > 0.0 { e / l } else { 0.0 },
            area_breakdown: area,
            energy_breakdown: energy,
            latency_breakdown: latency,
        }
    }
}

/// One scheme per layer at that layer's grid.
pub fn schemes_for(model: &KanModel<f64>, mode: QuantMode, n_bits: u32) -> Result<Vec<QuantScheme>, CostError> {
    model
        .layers()
        .iter()
        .map(|l| QuantScheme::new(mode, l.spec().grid(), n_bits).map_err(|e| CostError::Inconsistent(e.to_string())))
        .collect()
}

/// Area of one lookup path (LUT + MUX + decoders) for a resource inventory.
pub fn lookup_area(res: &ResourceCount, value_bits: u32, tech: &TechParams) -> f64 {
    res.lut_entries as f64 * value_bits as f64 * tech.lut_bit_area
        + res.mux_ways_total() as f64 * tech.mux_way_area
        + res.decoder_lines() as f64 * tech.decoder_line_area
}

fn segments_per_input(scheme: EncoderScheme) -> f64 {
    match scheme {
        EncoderScheme::Tmdv => 2.0,
        EncoderScheme::PureVoltage | EncoderScheme::PurePwm => 1.0,
    }
}

fn layer_cost(
    layer: &KanLayer<f64>,
    scheme: &QuantScheme,
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    tech: &TechParams,
    stats: Option<&[BasisStats]>,
) -> Result<(Breakdown, Breakdown, Breakdown), CostError> {
    let order = layer.spec().order();
    let nb = layer.num_basis();
    let (in_dim, out_dim) = (layer.in_dim() as f64, layer.out_dim());
    if scheme.grid != layer.spec().grid() {
        return Err(CostError::Inconsistent(format!(
            "scheme solved for G = {} but layer has G = {}",
            scheme.grid,
            layer.spec().grid()
        )));
    }
    if let Some(s) = stats {
        if s.len() != layer.in_dim() || s.iter().any(|c| c.len() != nb) {
            return Err(CostError::Inconsistent("activity statistics do not match layer shape".into()));
        }
    }
    let (_, res): (_, ResourceCount) = count_resources(scheme, order);
    let value_bits = scheme.value_bits as f64;
    let full_scale = scheme.value_full_scale() as f64;

    let rows_used = layer.in_dim() * nb;
    let cols_needed = out_dim * 2 * (SLICE_BITS as usize + 1);
    let row_tiles = rows_used.div_ceil(xbar.rows);
    let tiles = row_tiles * cols_needed.div_ceil(xbar.cols);
    let adc_columns = (cols_needed * row_tiles) as f64;
    // successive-approximation converter: cost per resolved bit
    let adc_scale = xbar.adc_bits as f64;
    let dac_levels = enc.scheme.dac_levels(enc.n) as f64;
    let chain = enc.scheme.delay_chain_len(enc.n) as f64;

    // expected B_i(x) per (channel, basis); partition of unity makes the
    // uniform fallback 1 / (K+G)
    let mean_b = |j: usize, i: usize| match stats {
        Some(s) => s[j].p[i] * s[j].mu[i],
        None => 1.0 / nb as f64,
    };
    let active_rows: f64 = match stats {
        Some(s) => s.iter().map(|c| c.p.iter().sum::<f64>()).sum(),
        None => in_dim * (order + 1) as f64,
    };

    let q = quantize_coeffs(layer, scheme.coeff_bits).map_err(|e| CostError::Inconsistent(e.to_string()))?;
    let mut charge = 0.0;
    for j in 0..layer.in_dim() {
        for i in 0..nb {
            let ones: u32 = (0..out_dim)
                .map(|o| (q.codes[layer.coeff_index(o, j, i)].unsigned_abs()).count_ones())
                .sum();
            charge += mean_b(j, i) * full_scale * ones as f64;
        }
    }

    let area = Breakdown {
        lut: in_dim * res.lut_entries as f64 * value_bits * tech.lut_bit_area,
        mux: in_dim * res.mux_ways_total() as f64 * tech.mux_way_area,
        decoder: in_dim * res.decoder_lines() as f64 * tech.decoder_line_area,
        input_gen: rows_used as f64 * dac_levels * tech.dac_level_area + tiles as f64 * chain * tech.delay_stage_area,
        array: (rows_used * cols_needed) as f64 * tech.cell_area,
        adc: adc_columns * adc_scale * tech.adc_area,
        other: 0.0,
    };
    let energy = Breakdown {
        lut: in_dim * (order + 1) as f64 * value_bits * tech.lut_bit_energy,
        mux: in_dim * res.mux_ways_total() as f64 * tech.mux_way_energy,
        decoder: in_dim * res.decoder_lines() as f64 * tech.decoder_line_energy,
        input_gen: active_rows * segments_per_input(enc.scheme) * dac_levels * tech.dac_level_energy
            + tiles as f64 * chain * tech.delay_stage_energy,
        array: charge * tech.cell_energy,
        adc: adc_columns * adc_scale * tech.adc_energy,
        other: 0.0,
    };
    let latency = Breakdown {
        lut: tech.clock_period,
        mux: tech.clock_period,
        decoder: tech.clock_period,
        input_gen: enc.latency_units() as f64 * enc.unit_pulse,
        array: 0.0,
        adc: xbar.adc_bits as f64 * tech.clock_period,
        other: 0.0,
    };
    Ok((area, energy, latency))
}

/// Roll-up over all layers. `activity[l][j]` are the basis statistics of
/// layer `l`, channel `j`; without them every basis gets the uniform share.
pub fn estimate(
    model: &KanModel<f64>,
    schemes: &[QuantScheme],
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    tech: &TechParams,
    activity: Option<&[Vec<BasisStats>]>,
) -> Result<CostReport, CostError> {
    let encs = vec![enc.clone(); schemes.len()];
    estimate_layers(model, schemes, xbar, &encs, tech, activity)
}

/// Like [`estimate`] with one input encoder per layer.
pub fn estimate_layers(
    model: &KanModel<f64>,
    schemes: &[QuantScheme],
    xbar: &CrossbarConfig,
    encs: &[EncoderConfig],
    tech: &TechParams,
    activity: Option<&[Vec<BasisStats>]>,
) -> Result<CostReport, CostError> {
    tech.validate()?;
    xbar.validate().map_err(|e| CostError::Inconsistent(e.to_string()))?;
    if schemes.len() != model.layers().len() {
        return Err(CostError::Inconsistent(format!(
            "{} schemes for {} layers",
            schemes.len(),
            model.layers().len()
        )));
    }
    if encs.len() != schemes.len() {
        return Err(CostError::Inconsistent("one encoder per layer required".into()));
    }
    if let Some(a) = activity {
        if a.len() != schemes.len() {
            return Err(CostError::Inconsistent("one activity profile per layer required".into()));
        }
    }
    let (mut area, mut energy, mut latency) = (Breakdown::default(), Breakdown::default(), Breakdown::default());
    for (l, (layer, scheme)) in model.layers().iter().zip(schemes).enumerate() {
        let (a, e, t) = layer_cost(layer, scheme, xbar, &encs[l], tech, activity.map(|a| a[l].as_slice()))?;
        area.add(&a);
        energy.add(&e);
        latency.add(&t);
    }
    Ok(CostReport::from_parts(area, energy, latency))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub area: Option<f64>,
    pub energy: Option<f64>,
    pub latency: Option<f64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Area,
    Energy,
    Latency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub pass: bool,
    pub violations: Vec<Dimension>,
}

/// A dimension passes when its budget is unset or `value <= budget`.
pub fn check_constraints(report: &CostReport, budget: &Budget) -> ConstraintCheck {
    let mut violations = Vec::new();
    for (dim, value, limit) in [
        (Dimension::Area, report.area, budget.area),
        (Dimension::Energy, report.energy, budget.energy),
        (Dimension::Latency, report.latency, budget.latency),
    ] {
        if let Some(b) = limit {
            if value > b {
                violations.push(dim);
            }
        }
    }
    ConstraintCheck { pass: violations.is_empty(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::TransferFn;
    use crate::rng::substream;
    use crate::spline::BSplineSpec;
    use proptest::prelude::*;

    fn enc() -> EncoderConfig {
        EncoderConfig::new(EncoderScheme::Tmdv, 4, TransferFn::default(), 0.9, 1e-9).unwrap()
    }

    fn model(g: usize) -> KanModel<f64> {
        let spec = BSplineSpec::new(3, g, -1.0, 1.0).unwrap();
        KanModel::random(&[4, 3, 2], &spec, 0.5, &mut substream(3, &[])).unwrap()
    }

    fn report(m: &KanModel<f64>, mode: QuantMode, tech: &TechParams) -> CostReport {
        let s = schemes_for(m, mode, 8).unwrap();
        estimate(m, &s, &CrossbarConfig::default(), &enc(), tech, None).unwrap()
    }

    #[test]
    fn empty_model_costs_nothing() {
        let r = estimate(&KanModel::empty(), &[], &CrossbarConfig::default(), &enc(), &TechParams::default(), None)
            .unwrap();
        assert_eq!((r.area, r.energy, r.latency, r.power), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn totals_equal_breakdown() {
        let r = report(&model(8), QuantMode::AlignSymPowergap, &TechParams::default());
        for (t, b) in [(r.area, r.area_breakdown), (r.energy, r.energy_breakdown), (r.latency, r.latency_breakdown)] {
            assert!((t - b.total()).abs() <= 1e-9 * t.abs());
        }
        assert!((r.power - r.energy / r.latency).abs() <= 1e-12 * r.power);
    }

    #[test]
    fn lookup_path_ratio_at_least_ten() {
        let tech = TechParams::default();
        for g in [8, 16, 32, 64] {
            let m = model(g);
            let conv = report(&m, QuantMode::Conventional, &tech).area_breakdown.lookup_path();
            let opt = report(&m, QuantMode::AlignSymPowergap, &tech).area_breakdown.lookup_path();
            assert!(conv / opt >= 10.0, "G={g}: {}", conv / opt);
        }
    }

    #[test]
    fn decoder_split_cheaper() {
        for d in 1..=7u32 {
            assert!((1u64 << 8) > (1u64 << (8 - d)) + (1u64 << d));
        }
    }

    #[test]
    fn adc_bits_monotone() {
        let m = model(8);
        let s = schemes_for(&m, QuantMode::AlignSym, 8).unwrap();
        let mut prev = 0.0;
        for bits in 4..=18 {
            let x = CrossbarConfig { adc_bits: bits, ..Default::default() };
            let r = estimate(&m, &s, &x, &enc(), &TechParams::default(), None).unwrap();
            let adc = r.area_breakdown.adc + r.energy_breakdown.adc;
            assert!(adc > prev);
            prev = adc;
        }
    }

    #[test]
    fn activity_changes_array_energy() {
        let m = model(8);
        let s = schemes_for(&m, QuantMode::AlignSym, 8).unwrap();
        let quiet: Vec<Vec<BasisStats>> = m
            .layers()
            .iter()
            .map(|l| {
                (0..l.in_dim())
                    .map(|_| BasisStats { samples: 1, p: vec![0.0; 11], mu: vec![0.0; 11], var: vec![0.0; 11], cnt: vec![0; 11] })
                    .collect()
            })
            .collect();
        let x = CrossbarConfig::default();
        let r = estimate(&m, &s, &x, &enc(), &TechParams::default(), Some(&quiet)).unwrap();
        assert_eq!(r.energy_breakdown.array, 0.0);
        let u = estimate(&m, &s, &x, &enc(), &TechParams::default(), None).unwrap();
        assert!(u.energy_breakdown.array > 0.0);
    }

    #[test]
    fn constraint_semantics() {
        let r = report(&model(5), QuantMode::AlignSym, &TechParams::default());
        let exact = Budget { area: Some(r.area), energy: Some(r.energy), latency: Some(r.latency) };
        assert!(check_constraints(&r, &exact).pass);
        let tight = Budget { energy: Some(r.energy * 0.5), ..exact };
        let c = check_constraints(&r, &tight);
        assert_eq!(c.violations, vec![Dimension::Energy]);
        assert!(check_constraints(&r, &Budget::unlimited()).pass);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let m = model(8);
        let s = schemes_for(&model(5), QuantMode::AlignSym, 8).unwrap();
        assert!(estimate(&m, &s, &CrossbarConfig::default(), &enc(), &TechParams::default(), None).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_unit_costs(idx in 0usize..15, bump in 0.1f64..10.0) {
            let m = model(6);
            let base = TechParams::default();
            let mut more = base.clone();
            let fields: [&mut f64; 15] = [
                &mut more.lut_bit_area, &mut more.lut_bit_energy, &mut more.mux_way_area, &mut more.mux_way_energy,
                &mut more.decoder_line_area, &mut more.decoder_line_energy, &mut more.dac_level_area,
                &mut more.dac_level_energy, &mut more.delay_stage_area, &mut more.delay_stage_energy,
                &mut more.cell_area, &mut more.cell_energy, &mut more.adc_area, &mut more.adc_energy,
                &mut more.clock_period,
            ];
            *fields.into_iter().nth(idx).unwrap() += bump;
            let a = report(&m, QuantMode::AlignSymPowergap, &base);
            let b = report(&m, QuantMode::AlignSymPowergap, &more);
            prop_assert!(b.area >= a.area && b.energy >= a.energy && b.latency >= a.latency);
        }
    }
}
