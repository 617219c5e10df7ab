//! Array-size sweep: SAM against the uniform and reversed plans.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_mapping_totals, layer_scores, standard_plans, EvalTotals};
use super::plan::PlanKind;
use super::score::ScoreParams;
use crate::cim::{CrossbarConfig, EncoderConfig};
use crate::error::MappingError;
use crate::haq::{LutLayer, QuantMode, QuantScheme};
use crate::rng::{derive_seed, substream};
use crate::spline::{refit_grid, BSplineSpec, KanLayer};

const SWEEP_TAG: u64 = 0x737765;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// `(rows, grid)` pairs.
    pub cells: Vec<(usize, usize)>,
    pub order: usize,
    pub outputs: usize,
    /// Input std-dev as a fraction of the half domain width.
    pub input_sigma: f64,
    /// Independent synthetic layers pooled per cell.
    pub layers: usize,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub n_bits: u32,
    pub mode: QuantMode,
    pub score: ScoreParams,
    pub theta: f64,
    /// Append a zero-wire-resistance control for the first cell.
    pub control: bool,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cells: vec![(128, 7), (256, 15), (512, 30), (1024, 60)],
            order: 3,
            outputs: 4,
            input_sigma: 0.05,
            layers: 8,
            train_samples: 4000,
            eval_samples: 64,
            n_bits: 8,
            mode: QuantMode::AlignSym,
            score: ScoreParams::default(),
            theta: 0.0,
            control: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rows: usize,
    pub grid: usize,
    pub in_dim: usize,
    pub wire_r: f64,
    pub plan: PlanKind,
    pub mean_mac_error: f64,
    pub degradation: f64,
    pub digital_degradation: f64,
    /// `degradation(uniform) / degradation(SAM)` for the cell.
    pub improvement: f64,
}

fn gaussian_rows(n: usize, dim: usize, spec: &BSplineSpec<f64>, sigma: f64, seed: u64, keys: &[u64]) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, keys);
    let mid = 0.5 * (spec.lo() + spec.hi());
    let half = 0.5 * (spec.hi() - spec.lo());
    (0..n)
        .map(|_| (0..dim).map(|_| mid + sigma * half * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn run_cell(
    cfg: &SweepConfig,
    rows: usize,
    grid: usize,
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    base: Option<&KanLayer<f64>>,
) -> Result<(usize, [EvalTotals; 3]), MappingError> {
    let spec = match base {
        Some(l) => l.spec().with_grid(grid)?,
        None => BSplineSpec::new(cfg.order, grid, -1.0, 1.0)?,
    };
    let in_dim = match base {
        Some(l) => l.in_dim(),
        None => rows / spec.num_basis(),
    };
    if in_dim == 0 || in_dim * spec.num_basis() > rows {
        return Err(MappingError::TooManyCoefficients { coeffs: in_dim.max(1) * spec.num_basis(), rows });
    }
    let scheme = QuantScheme::new(cfg.mode, grid, cfg.n_bits)?;
    let xbar = CrossbarConfig { rows, ..xbar.clone() };
    let n_layers = if base.is_some() { 1 } else { cfg.layers.max(1) };
    let mut totals = [EvalTotals::default(); 3];
    for l in 0..n_layers as u64 {
        let key = [SWEEP_TAG, rows as u64, grid as u64, l];
        let layer = match base {
            Some(b) => refit_grid(b, grid)?,
            None => KanLayer::random(in_dim, cfg.outputs, spec.clone(), 1.0, &mut substream(cfg.seed, &[key[0], key[1], key[2], key[3], 0])),
        };
        let ll = LutLayer::new(&layer, scheme.clone())?;
        let train = gaussian_rows(cfg.train_samples, in_dim, &spec, cfg.input_sigma, cfg.seed, &[key[0], key[1], key[2], key[3], 1]);
        let eval = gaussian_rows(cfg.eval_samples, in_dim, &spec, cfg.input_sigma, cfg.seed, &[key[0], key[1], key[2], key[3], 2]);
        let tr: Vec<&[f64]> = train.iter().map(|r| r.as_slice()).collect();
        let ev: Vec<&[f64]> = eval.iter().map(|r| r.as_slice()).collect();
        let scores = layer_scores(&ll, &tr, cfg.score, cfg.theta)?;
        let plans = standard_plans(&scores, rows)?;
        let cell_xbar = CrossbarConfig { seed: derive_seed(xbar.seed, &key), ..xbar.clone() };
        let t = evaluate_mapping_totals(&ll, &plans, &cell_xbar, enc, &ev)?;
        for k in 0..3 {
            totals[k].merge(&t[k]);
        }
    }
    Ok((in_dim, totals))
}

/// One row per (cell, plan), plus the optional zero-resistance control.
pub fn array_sweep(
    cfg: &SweepConfig,
    xbar: &CrossbarConfig,
    enc: &EncoderConfig,
    base: Option<&KanLayer<f64>>,
) -> Result<Vec<SweepRow>, MappingError> {
    if cfg.eval_samples == 0 || cfg.train_samples == 0 || !(cfg.input_sigma > 0.0) {
        return Err(MappingError::Invalid("sweep needs samples and a positive input sigma".into()));
    }
    let mut cells: Vec<(usize, usize, f64)> = cfg.cells.iter().map(|&(r, g)| (r, g, xbar.wire_r)).collect();
    if cfg.control {
        if let Some(&(r, g)) = cfg.cells.first() {
            cells.push((r, g, 0.0));
        }
    }
    let kinds = [PlanKind::Sam, PlanKind::Uniform, PlanKind::Reversed];
    let mut out = Vec::new();
    for (rows, grid, wire_r) in cells {
        let x = CrossbarConfig { wire_r, ..xbar.clone() };
        let (in_dim, totals) = run_cell(cfg, rows, grid, &x, enc, base)?;
        let evals: Vec<_> = kinds.iter().zip(&totals).map(|(&k, t)| t.finish(k)).collect();
        let improvement = super::eval::improvement_factor(&evals, PlanKind::Uniform).unwrap_or(1.0);
        for e in evals {
            out.push(SweepRow {
                rows,
                grid,
                in_dim,
                wire_r,
                plan: e.kind,
                mean_mac_error: e.mean_mac_error,
                degradation: e.degradation,
                digital_degradation: e.digital_degradation,
                improvement,
            });
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "rows",
        "grid",
        "in_dim",
        "wire_r",
        "plan",
        "mean_mac_error",
        "degradation",
        "digital_degradation",
        "improvement",
    ])?;
    for r in rows {
        wr.write_record([
            r.rows.to_string(),
            r.grid.to_string(),
            r.in_dim.to_string(),
            r.wire_r.to_string(),
            r.plan.name().to_string(),
            r.mean_mac_error.to_string(),
            r.degradation.to_string(),
            r.digital_degradation.to_string(),
            r.improvement.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::{EncoderScheme, TransferFn};

    #[test]
    fn small_sweep_orders_plans() {
        let cfg = SweepConfig { cells: vec![(64, 5)], layers: 2, train_samples: 500, eval_samples: 16, ..Default::default() };
        let enc = EncoderConfig::new(EncoderScheme::Tmdv, 4, TransferFn::Linear { gain: 5e-6, vt: 0.3 }, 0.7, 1e-9).unwrap();
        let xbar = CrossbarConfig { wire_r: 5.0, ..Default::default() };
        let rows = array_sweep(&cfg, &xbar, &enc, None).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].degradation <= rows[1].degradation && rows[1].degradation <= rows[2].degradation);
        assert!(rows[3..].iter().all(|r| r.degradation == 0.0 && r.wire_r == 0.0));
        let mut a = Vec::new();
        write_sweep_csv(&mut a, &rows).unwrap();
        let mut b = Vec::new();
        write_sweep_csv(&mut b, &array_sweep(&cfg, &xbar, &enc, None).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
