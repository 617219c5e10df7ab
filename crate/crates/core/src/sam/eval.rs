//! Crossbar simulation of a quantized layer under several row mappings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{assign_rows, nearest_first, reversed_plan, uniform_plan, MappingPlan, PlanKind};
use super::score::{score, CriticalityScore, ScoreParams};
use super::stats::profile_channels;
use crate::cim::{simulate_mac, CrossbarConfig, CrossbarState, EncoderConfig};
use crate::error::MappingError;
use crate::haq::LutLayer;

/// Per-channel scores concatenated over logical rows `j·(K+G) + i`. A row
/// serves every output, so its magnitude is the mean `|c'|_Q` over outputs.
pub fn layer_scores(
    ll: &LutLayer<'_>,
    train: &[&[f64]],
    params: ScoreParams,
    theta: f64,
) -> Result<CriticalityScore, MappingError> {
    let layer = ll.layer;
    if train.is_empty() {
        return Err(MappingError::Invalid("empty training split".into()));
    }
    if train.iter().any(|r| r.len() != layer.in_dim()) {
        return Err(MappingError::Invalid(format!("samples must have {} features", layer.in_dim())));
    }
    let stats = profile_channels(train, layer.spec(), theta);
    let weights = ll.crossbar_weights();
    let nb = layer.num_basis();
    let outs = layer.out_dim().max(1) as f64;
    let parts = stats
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let mag: Vec<f64> = (0..nb)
                .map(|i| weights.iter().map(|w| w[j * nb + i].unsigned_abs() as f64).sum::<f64>() / outs)
                .collect();
            score(st, &mag, params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CriticalityScore::concat(&parts))
}

/// SAM, uniform and reversed plans for the same scores.
pub fn standard_plans(scores: &CriticalityScore, rows: usize) -> Result<Vec<MappingPlan>, MappingError> {
    let order = nearest_first(rows);
    Ok(vec![
        assign_rows(&scores.criticality, &order)?,
        uniform_plan(scores.len(), &order)?,
        reversed_plan(&scores.criticality, &order)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEval {
    pub kind: PlanKind,
    pub samples: usize,
    /// Mean `|decoded − ideal|` per output column.
    pub mean_mac_error: f64,
    /// RMS deviation of the analog output from the bit-exact digital
    /// output, relative to the RMS of the float layer output.
    pub degradation: f64,
    /// RMS deviation of the digital output from the float layer, same
    /// normalization: the floor set by quantization alone.
    pub digital_degradation: f64,
    pub saturated: usize,
}

/// Raw error sums, mergeable across layers and sample shards.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalTotals {
    pub samples: usize,
    pub columns: usize,
    pub abs_error: f64,
    pub sq_error: f64,
    pub sq_digital: f64,
    pub sq_reference: f64,
    pub saturated: usize,
}

impl EvalTotals {
    pub fn merge(&mut self, o: &EvalTotals) {
        self.samples += o.samples;
        self.columns += o.columns;
        self.abs_error += o.abs_error;
        self.sq_error += o.sq_error;
        self.sq_digital += o.sq_digital;
        self.sq_reference += o.sq_reference;
        self.saturated += o.saturated;
    }

    pub fn finish(&self, kind: PlanKind) -> MappingEval {
        let r = self.sq_reference.max(f64::MIN_POSITIVE);
        MappingEval {
            kind,
            samples: self.samples,
            mean_mac_error: self.abs_error / self.columns.max(1) as f64,
            degradation: (self.sq_error / r).sqrt(),
            digital_degradation: (self.sq_digital / r).sqrt(),
            saturated: self.saturated,
        }
    }
}

/// Per-plan raw totals; see [`evaluate_mapping`].
pub fn evaluate_mapping_totals(
    ll: &LutLayer<'_>,
    plans: &[MappingPlan],
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    inputs: &[&[f64]],
) -> Result<Vec<EvalTotals>, MappingError> {
    let layer = ll.layer;
    if enc.max_input() < ll.lut.value_full_scale() as u64 {
        return Err(MappingError::Invalid(format!(
            "encoder range {} cannot carry {}-bit LUT values",
            enc.max_input(),
            ll.lut.value_bits()
        )));
    }
    let weights = ll.crossbar_weights();
    let scale = ll.mac_scale();
    let act = layer.activation();
    plans
        .iter()
        .map(|plan| {
            let state = CrossbarState::program(xbar.rows, &weights, &plan.row_of)?;
            let per_sample = inputs
                .par_iter()
                .enumerate()
                .map(|(s, x)| -> Result<EvalTotals, MappingError> {
                    let codes = ll.quantize_inputs(x);
                    let wl = ll.wordline_codes(&codes)?;
                    let macs = simulate_mac(&state, &wl, enc, xbar, s as u64)?;
                    let reference = layer.forward(x)?;
                    let mut a = EvalTotals { samples: 1, columns: macs.len(), ..Default::default() };
                    for (o, m) in macs.iter().enumerate() {
                        let base: f64 = codes
                            .iter()
                            .enumerate()
                            .map(|(j, &c)| layer.base_weight(o, j) * act.apply(ll.scheme.dequantize(layer.spec(), c)))
                            .sum();
                        let y = base + m.decoded_sum as f64 * scale;
                        let yd = base + m.ideal_sum as f64 * scale;
                        a.abs_error += m.error().unsigned_abs() as f64;
                        a.sq_error += (y - yd).powi(2);
                        a.sq_digital += (yd - reference[o]).powi(2);
                        a.sq_reference += reference[o].powi(2);
                        a.saturated += m.saturated as usize;
                    }
                    Ok(a)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut t = EvalTotals::default();
            for a in &per_sample {
                t.merge(a);
            }
            Ok(t)
        })
        .collect()
}

/// Simulate every sample under each plan. Sample `s` uses trial `s`, so all
/// plans see the same noise draws.
pub fn evaluate_mapping(
    ll: &LutLayer<'_>,
    plans: &[MappingPlan],
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    inputs: &[&[f64]],
) -> Result<Vec<MappingEval>, MappingError> {
    let totals = evaluate_mapping_totals(ll, plans, xbar, enc, inputs)?;
    Ok(plans.iter().zip(&totals).map(|(p, t)| t.finish(p.kind)).collect())
}

/// `degradation(baseline) / degradation(SAM)`.
pub fn improvement_factor(evals: &[MappingEval], baseline: PlanKind) -> Option<f64> {
    let get = |k| evals.iter().find(|e| e.kind == k).map(|e| e.degradation);
    let (b, s) = (get(baseline)?, get(PlanKind::Sam)?);
    Some(if s == 0.0 { if b == 0.0 { 1.0 } else { f64::INFINITY } } else { b / s })
}
