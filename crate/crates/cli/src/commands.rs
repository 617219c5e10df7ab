//! One function per subcommand. Each writes its files plus `report.json`.

use std::path::Path;

use kan_cim::cim::{compare_encoders, write_encoder_csv};
use kan_cim::cost::{lookup_area, TechParams};
use kan_cim::haq::{count_resources, QuantScheme, ShLut};
use kan_cim::rng::substream;
use kan_cim::sam::{array_sweep, write_sweep_csv, PlanKind};
use kan_cim::spline::{checkpoint, train, BSplineSpec, Dataset, KanModel, Split};
use kan_cim::tune::{resume, trace_jsonl, Hardware, TuneState, TuneStatus};
use serde::Serialize;
use serde_json::json;
use tracing::{info, warn};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::OutDir;

const MODEL_TAG: u64 = 0x6d6f64656c;

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset<f64>, CliError> {
    let path = cfg
        .paths
        .dataset
        .as_deref()
        .ok_or_else(|| CliError::Config("paths.dataset is required for this command".into()))?;
    let mut data = Dataset::load(path).map_err(|e| CliError::input(path, e))?;
    if data.subset(Split::Val).is_empty() && cfg.train.val_fraction > 0.0 {
        data.assign_random_split(cfg.train.val_fraction, cfg.seed);
    }
    Ok(data)
}

fn load_checkpoint(path: &Path) -> Result<KanModel<f64>, CliError> {
    checkpoint::load(path).map_err(|e| CliError::input(path, e))
}

fn load_tech(cfg: &ExperimentConfig) -> Result<TechParams, CliError> {
    match &cfg.paths.tech {
        Some(p) => TechParams::load(p).map_err(|e| CliError::input(p, e)),
        None => Ok(TechParams::default()),
    }
}

/// The configured checkpoint, or a fresh model shaped by `model` and the data.
fn initial_model(cfg: &ExperimentConfig, data: &Dataset<f64>) -> Result<KanModel<f64>, CliError> {
    if let Some(p) = &cfg.paths.checkpoint {
        let m = load_checkpoint(p)?;
        if m.in_dim() != data.n_features() || m.out_dim() != data.n_targets() {
            return Err(CliError::Config(format!(
                "checkpoint maps {} -> {} but the dataset has {} features and {} targets",
                m.in_dim(),
                m.out_dim(),
                data.n_features(),
                data.n_targets()
            )));
        }
        return Ok(m);
    }
    let m = &cfg.model;
    let dims = if m.dims.is_empty() { vec![data.n_features(), data.n_targets()] } else { m.dims.clone() };
    if dims.first() != Some(&data.n_features()) || dims.last() != Some(&data.n_targets()) {
        return Err(CliError::Config(format!(
            "model.dims {dims:?} does not match the dataset ({} features, {} targets)",
            data.n_features(),
            data.n_targets()
        )));
    }
    let spec = BSplineSpec::new(m.order, m.grid, m.domain[0], m.domain[1])?;
    Ok(KanModel::random(&dims, &spec, m.init_std, &mut substream(cfg.seed, &[MODEL_TAG]))?)
}

pub fn train_cmd(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<serde_json::Value, CliError> {
    let data = load_dataset(cfg)?;
    let model = initial_model(cfg, &data)?;
    let tc = cfg.train.train_config(cfg.seed);
    info!(rows = data.len(), epochs = tc.epochs, "training");
    let outcome = train(&model, &data, &tc)?;
    out.write("model.json", checkpoint::to_json(&outcome.model))?;
    out.write_csv("train_loss.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for h in &outcome.history {
            w.write_record([h.epoch.to_string(), h.train.to_string(), h.val.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let last = outcome.history.last();
    let final_val = last.map(|h| h.val);
    let target_met = match (cfg.train.target_loss, final_val) {
        (Some(t), Some(v)) => v <= t,
        (Some(_), None) => false,
        (None, _) => true,
    };
    if !target_met {
        warn!(?final_val, target = ?cfg.train.target_loss, "target loss not reached");
    }
    Ok(json!({
        "epochs": outcome.history.len(),
        "final_train_loss": last.map(|h| h.train),
        "final_val_loss": final_val,
        "target_loss": cfg.train.target_loss,
        "target_met": target_met,
        "grids": outcome.model.grids(),
        "checkpoint": "model.json",
    }))
}

#[derive(Serialize)]
struct ResourceRow {
    grid: usize,
    mode: &'static str,
    n_bits: u32,
    feasible: bool,
    l: Option<u32>,
    ld: Option<u32>,
    codes_per_interval: Option<u32>,
    baseline_lut_entries: Option<u64>,
    optimized_lut_entries: Option<u64>,
    lut_ratio: Option<f64>,
    baseline_mux_ways: Option<u64>,
    optimized_mux_ways: Option<u64>,
    baseline_decoder_lines: Option<u64>,
    optimized_decoder_lines: Option<u64>,
    lookup_area_ratio: Option<f64>,
}

pub fn quantize_cmd(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<serde_json::Value, CliError> {
    let q = &cfg.quantize;
    let tech = load_tech(cfg)?;
    let model = cfg.paths.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let order = model
        .as_ref()
        .and_then(|m| m.layers().first())
        .map_or(q.order, |l| l.spec().order());

    let rows: Vec<ResourceRow> = q
        .grids
        .iter()
        .map(|&g| match QuantScheme::new(q.mode, g, q.n_bits) {
            Ok(s) => {
                let (base, opt) = count_resources(&s, order);
                ResourceRow {
                    grid: g,
                    mode: q.mode.name(),
                    n_bits: q.n_bits,
                    feasible: true,
                    l: Some(s.l),
                    ld: Some(s.ld),
                    codes_per_interval: Some(s.codes_per_interval()),
                    baseline_lut_entries: Some(base.lut_entries),
                    optimized_lut_entries: Some(opt.lut_entries),
                    lut_ratio: Some(base.lut_entries as f64 / opt.lut_entries as f64),
                    baseline_mux_ways: Some(base.mux_ways_total()),
                    optimized_mux_ways: Some(opt.mux_ways_total()),
                    baseline_decoder_lines: Some(base.decoder_lines()),
                    optimized_decoder_lines: Some(opt.decoder_lines()),
                    lookup_area_ratio: Some(
                        lookup_area(&base, s.value_bits, &tech) / lookup_area(&opt, s.value_bits, &tech),
                    ),
                }
            }
            Err(_) => ResourceRow {
                grid: g,
                mode: q.mode.name(),
                n_bits: q.n_bits,
                feasible: false,
                l: None,
                ld: None,
                codes_per_interval: None,
                baseline_lut_entries: None,
                optimized_lut_entries: None,
                lut_ratio: None,
                baseline_mux_ways: None,
                optimized_mux_ways: None,
                baseline_decoder_lines: None,
                optimized_decoder_lines: None,
                lookup_area_ratio: None,
            },
        })
        .collect();
    out.write_csv("resources.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })?;

    let mut luts = Vec::new();
    if let Some(m) = &model {
        for (i, layer) in m.layers().iter().enumerate() {
            let scheme = QuantScheme::new(q.mode, layer.spec().grid(), q.n_bits)?;
            let lut = ShLut::build(layer.spec(), &scheme)?;
            let dump = lut.to_dump();
            if ShLut::from_dump(&dump)? != lut {
                return Err(CliError::Numeric(format!("SH-LUT of layer {i} does not survive a reload")));
            }
            let name = format!("sh_lut_layer{i}.txt");
            out.write(&name, dump)?;
            luts.push(json!({
                "layer": i,
                "grid": layer.spec().grid(),
                "stored_entries": lut.stored_len(),
                "file": name,
            }));
        }
    }
    Ok(json!({
        "mode": q.mode,
        "n_bits": q.n_bits,
        "order": order,
        "rows": rows.iter().map(|r| json!({
            "grid": r.grid,
            "feasible": r.feasible,
            "lut_ratio": r.lut_ratio,
            "lookup_area_ratio": r.lookup_area_ratio,
        })).collect::<Vec<_>>(),
        "luts": luts,
    }))
}

pub fn compare_cmd(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<serde_json::Value, CliError> {
    info!(trials = cfg.compare.trials, "comparing encoders");
    let stats = compare_encoders(&cfg.compare)?;
    out.write_csv("encoders.csv", |buf| write_encoder_csv(buf, &stats))?;
    Ok(json!({ "trials": cfg.compare.trials, "rows": stats.len() }))
}

pub fn map_cmd(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<serde_json::Value, CliError> {
    let enc = cfg.encoder.build()?;
    let model = cfg.paths.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let base = model.as_ref().and_then(|m| m.layers().first());
    info!(cells = cfg.mapping.cells.len(), from_checkpoint = base.is_some(), "mapping sweep");
    let rows = array_sweep(&cfg.mapping, &cfg.crossbar, &enc, base)?;
    out.write_csv("mapping.csv", |buf| write_sweep_csv(buf, &rows))?;
    let cells: Vec<_> = rows
        .chunks(3)
        .map(|c| {
            let deg = |k: PlanKind| c.iter().find(|r| r.plan == k).map_or(f64::NAN, |r| r.degradation);
            json!({
                "rows": c[0].rows,
                "grid": c[0].grid,
                "wire_r": c[0].wire_r,
                "improvement": c[0].improvement,
                "ordered": deg(PlanKind::Sam) <= deg(PlanKind::Uniform) && deg(PlanKind::Uniform) <= deg(PlanKind::Reversed),
            })
        })
        .collect();
    Ok(json!({ "cells": cells }))
}

pub struct TuneOptions {
    pub resume: bool,
    /// Stop after this many windows in this invocation.
    pub stop_after: Option<usize>,
}

pub fn tune_cmd(cfg: &ExperimentConfig, out: &mut OutDir, opts: &TuneOptions) -> Result<serde_json::Value, CliError> {
    const STATE: &str = "tune_state.json";
    let data = load_dataset(cfg)?;
    let hw = Hardware { tech: load_tech(cfg)?, crossbar: cfg.crossbar.clone(), encoder: cfg.encoder.build()? };
    let state_path = out.path(STATE);
    let mut state = if opts.resume && state_path.exists() {
        let text = std::fs::read_to_string(&state_path).map_err(|e| CliError::input(&state_path, e))?;
        info!("resuming from {}", state_path.display());
        serde_json::from_str::<TuneState>(&text).map_err(|e| CliError::input(&state_path, e))?
    } else {
        let model = initial_model(cfg, &data)?;
        let s = TuneState::start(&model, &data, &cfg.tuning, &hw)?;
        out.write_json(STATE, &s)?;
        s
    };

    let mut budget_left = opts.stop_after;
    let mut write_err = None;
    resume(&mut state, &data, &cfg.tuning, &hw, |s| {
        let last = s.trace.last().expect("trace is never empty");
        info!(window = last.window, grids = ?last.grids, decision = ?last.decision, val = last.val_loss, "window");
        if let Err(e) = out.write_json(STATE, s) {
            write_err = Some(e);
            return false;
        }
        match budget_left.as_mut() {
            Some(n) => {
                *n = n.saturating_sub(1);
                *n > 0
            }
            None => true,
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    out.write_json(STATE, &state)?;
    out.write("tune_trace.jsonl", trace_jsonl(&state.trace))?;
    let outcome = state.outcome();
    let finished = state.is_done();
    let last = outcome.trace.last().expect("trace is never empty");
    let summary = json!({
        "status": outcome.status,
        "finished": finished,
        "windows": state.window,
        "epochs": state.epoch,
        "grids": outcome.model.grids(),
        "classes": outcome.profile.classes,
        "sensitivity": outcome.profile.scores,
        "modes": last.modes,
        "decision": last.decision,
        "val_loss": last.val_loss,
        "budget": cfg.tuning.budget,
        "report": outcome.report,
    });
    out.write_json("tune_summary.json", &summary)?;
    out.write("tune_model.json", checkpoint::to_json(&outcome.model))?;
    if finished && outcome.status == TuneStatus::Infeasible {
        warn!("no grid assignment meets the budget");
    }
    Ok(summary)
}
