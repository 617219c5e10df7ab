//! Constraint-checked training with periodic grid extension and rollback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sensitivity::{assign_grids, classify, profile_sensitivity, GridTemplates, Sensitivity, SensitivityProfile};
use crate::cim::{CrossbarConfig, EncoderConfig, EncoderMode};
use crate::cost::{check_constraints, estimate_layers, Budget, CostReport, TechParams};
use crate::error::{CimError, CostError, QuantError, SplineError};
use crate::haq::{QuantMode, QuantScheme};
use crate::spline::{evaluate, grid_extend, refit_grid, split_views, Dataset, KanModel, TrainConfig, TrainError, Trainer};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("invalid tuning configuration: {0}")]
    Invalid(String),
    #[error("resume state does not match this configuration")]
    StateMismatch,
    #[error(transparent)]
    Train(#[from] TrainError<f64>),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Cim(#[from] CimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    /// `epochs` is ignored; the loop decides how long to train.
    pub train: TrainConfig,
    pub warmup_epochs: usize,
    /// Epochs per extension window.
    pub interval: usize,
    /// Grid increment per extension.
    pub increment: usize,
    pub max_grid: usize,
    pub min_grid: usize,
    pub max_windows: usize,
    /// Relative validation-loss drop a window must achieve.
    pub min_rel_gain: f64,
    /// Re-grid every layer from its sensitivity class after warmup.
    pub templates: Option<GridTemplates>,
    pub budget: Budget,
    pub high_mode: EncoderMode,
    pub other_mode: EncoderMode,
    pub quant_mode: QuantMode,
    pub n_bits: u32,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            warmup_epochs: 10,
            interval: 10,
            increment: 5,
            max_grid: 20,
            min_grid: 3,
            max_windows: 64,
            min_rel_gain: 1e-4,
            templates: None,
            budget: Budget::unlimited(),
            high_mode: EncoderMode::TdA,
            other_mode: EncoderMode::TdP,
            quant_mode: QuantMode::AlignSymPowergap,
            n_bits: 8,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::Invalid(m.into()));
        if self.interval == 0 {
            return bad("interval must be >= 1");
        }
        if self.increment == 0 {
            return bad("increment must be >= 1");
        }
        if self.min_grid == 0 || self.min_grid > self.max_grid {
            return bad("need 1 <= min_grid <= max_grid");
        }
        if self.max_windows == 0 {
            return bad("max_windows must be >= 1");
        }
        if !(self.min_rel_gain >= 0.0 && self.min_rel_gain < 1.0) {
            return bad("min_rel_gain must lie in [0, 1)");
        }
        for b in [self.budget.area, self.budget.energy, self.budget.latency].into_iter().flatten() {
            if !(b > 0.0) {
                return bad("budget values must be positive");
            }
        }
        Ok(())
    }

    fn mode_for(&self, class: Sensitivity) -> EncoderMode {
        match class {
            Sensitivity::High => self.high_mode,
            Sensitivity::Medium | Sensitivity::Low => self.other_mode,
        }
    }
}

/// Hardware the configuration is costed against. `encoder` supplies the
/// scheme and the analog parameters; `N` comes from each layer's mode.
#[derive(Debug, Clone)]
pub struct Hardware {
    pub tech: TechParams,
    pub crossbar: CrossbarConfig,
    pub encoder: EncoderConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Initial,
    Extend,
    Rollback,
    CapStop,
    BudgetStop,
    NoGainStop,
    WindowLimit,
    Infeasible,
}

impl Decision {
    fn terminal(self) -> bool {
        !matches!(self, Decision::Initial | Decision::Extend)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub window: usize,
    /// Epochs trained so far.
    pub epoch: usize,
    pub val_loss_start: f64,
    pub val_loss: f64,
    /// Grids in force after the decision.
    pub grids: Vec<usize>,
    pub modes: Vec<EncoderMode>,
    pub report: CostReport,
    pub pass: bool,
    pub decision: Decision,
    /// Grids that were proposed and checked but not adopted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub candidate: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneStatus {
    Feasible,
    Infeasible,
}

/// Everything needed to continue the loop at a window boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneState {
    pub config: TuneConfig,
    pub model: KanModel<f64>,
    /// Pre-extension model, kept for exactly one window.
    pub pre_extension: Option<KanModel<f64>>,
    pub profile: SensitivityProfile,
    pub epoch: usize,
    pub window: usize,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub status: TuneStatus,
    pub model: KanModel<f64>,
    pub profile: SensitivityProfile,
    pub report: CostReport,
    pub trace: Vec<TraceRecord>,
}

fn modes_for(cfg: &TuneConfig, profile: &SensitivityProfile) -> Vec<EncoderMode> {
    profile.classes.iter().map(|&c| cfg.mode_for(c)).collect()
}

fn cost(model: &KanModel<f64>, modes: &[EncoderMode], cfg: &TuneConfig, hw: &Hardware) -> Result<(CostReport, bool), TuneError> {
    let schemes = model
        .layers()
        .iter()
        .map(|l| QuantScheme::new(cfg.quant_mode, l.spec().grid(), cfg.n_bits))
        .collect::<Result<Vec<_>, _>>()?;
    let e = &hw.encoder;
    let encs = modes
        .iter()
        .map(|&m| {
            EncoderConfig::new(e.scheme, m.default_n(), e.transfer, e.v_max, e.unit_pulse).map(|c| c.with_mode(m))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = estimate_layers(model, &schemes, &hw.crossbar, &encs, &hw.tech, None)?;
    let pass = check_constraints(&report, &cfg.budget).pass;
    Ok((report, pass))
}

fn val_loss(model: &KanModel<f64>, val: &Dataset<f64>, cfg: &TuneConfig) -> Result<f64, SplineError> {
    evaluate(model, val, cfg.train.loss)
}

impl TuneState {
    /// Warm up, classify layers, apply templates and shrink grids until the
    /// budget is met (or nothing is left to shrink).
    pub fn start(model: &KanModel<f64>, data: &Dataset<f64>, cfg: &TuneConfig, hw: &Hardware) -> Result<Self, TuneError> {
        cfg.validate()?;
        if model.is_empty() {
            return Err(TuneError::Invalid("model has no layers".into()));
        }
        let (train, val) = split_views(data);
        let mut model = model.clone();
        let v0 = val_loss(&model, &val, cfg)?;
        let mut trainer = Trainer::new(cfg.train.clone())?;
        trainer.run(&mut model, &train, &val, 0, cfg.warmup_epochs)?;

        let profile = classify(&profile_sensitivity(&model, &val, cfg.train.loss)?);
        let modes = modes_for(cfg, &profile);
        let mut grids = match &cfg.templates {
            Some(t) => assign_grids(&profile, t),
            None => model.grids(),
        };
        grids.iter_mut().for_each(|g| *g = (*g).clamp(cfg.min_grid, cfg.max_grid));
        if grids != model.grids() {
            model = regrid(&model, &grids)?;
        }
        let mut requested = None;
        let (mut report, mut pass) = cost(&model, &modes, cfg, hw)?;
        while !pass && grids.iter().any(|&g| g > cfg.min_grid) {
            requested.get_or_insert_with(|| grids.clone());
            grids.iter_mut().for_each(|g| *g = g.saturating_sub(cfg.increment).max(cfg.min_grid));
            model = regrid(&model, &grids)?;
            (report, pass) = cost(&model, &modes, cfg, hw)?;
        }
        let record = TraceRecord {
            window: 0,
            epoch: cfg.warmup_epochs,
            val_loss_start: v0,
            val_loss: val_loss(&model, &val, cfg)?,
            grids,
            modes,
            report,
            pass,
            decision: if pass { Decision::Initial } else { Decision::Infeasible },
            candidate: requested,
        };
        Ok(Self {
            config: cfg.clone(),
            model,
            pre_extension: None,
            profile,
            epoch: cfg.warmup_epochs,
            window: 0,
            trace: vec![record],
        })
    }

    pub fn is_done(&self) -> bool {
        self.trace.last().is_some_and(|r| r.decision.terminal())
    }

    /// Train one window and take one decision.
    pub fn step(&mut self, data: &Dataset<f64>, hw: &Hardware) -> Result<Decision, TuneError> {
        if let Some(r) = self.trace.last().filter(|r| r.decision.terminal()) {
            return Ok(r.decision);
        }
        let cfg = self.config.clone();
        let (train, val) = split_views(data);
        let mut trainer = Trainer::new(cfg.train.clone())?;
        let start = val_loss(&self.model, &val, &cfg)?;
        trainer.run(&mut self.model, &train, &val, self.epoch, cfg.interval)?;
        self.epoch += cfg.interval;
        self.window += 1;
        let end = val_loss(&self.model, &val, &cfg)?;
        let improved = start > 0.0 && end < start * (1.0 - cfg.min_rel_gain);
        let modes = modes_for(&cfg, &self.profile);

        let mut candidate = None;
        let decision = if !improved {
            match self.pre_extension.take() {
                Some(prev) => {
                    self.model = prev;
                    Decision::Rollback
                }
                None => Decision::NoGainStop,
            }
        } else {
            self.pre_extension = None;
            let grids = self.model.grids();
            if grids.iter().all(|&g| g >= cfg.max_grid) {
                Decision::CapStop
            } else {
                let next: Vec<usize> = grids.iter().map(|&g| (g + cfg.increment).min(cfg.max_grid).max(g)).collect();
                let extended = extend(&self.model, &next)?;
                let (_, pass) = cost(&extended, &modes, &cfg, hw)?;
                if pass {
                    self.pre_extension = Some(std::mem::replace(&mut self.model, extended));
                    Decision::Extend
                } else {
                    candidate = Some(next);
                    Decision::BudgetStop
                }
            }
        };
        let decision = if decision == Decision::Extend && self.window >= cfg.max_windows {
            // the extension stands but is never validated
            Decision::WindowLimit
        } else {
            decision
        };
        let (report, pass) = cost(&self.model, &modes, &cfg, hw)?;
        self.trace.push(TraceRecord {
            window: self.window,
            epoch: self.epoch,
            val_loss_start: start,
            val_loss: if decision == Decision::Rollback { val_loss(&self.model, &val, &cfg)? } else { end },
            grids: self.model.grids(),
            modes,
            report,
            pass,
            decision,
            candidate,
        });
        Ok(decision)
    }

    pub fn outcome(&self) -> TuneOutcome {
        let last = self.trace.last().expect("trace starts with the initial record");
        TuneOutcome {
            status: if last.decision == Decision::Infeasible { TuneStatus::Infeasible } else { TuneStatus::Feasible },
            model: self.model.clone(),
            profile: self.profile.clone(),
            report: last.report.clone(),
            trace: self.trace.clone(),
        }
    }
}

fn regrid(model: &KanModel<f64>, grids: &[usize]) -> Result<KanModel<f64>, SplineError> {
    let layers = model
        .layers()
        .iter()
        .zip(grids)
        .map(|(l, &g)| if g == l.spec().grid() { Ok(l.clone()) } else { refit_grid(l, g) })
        .collect::<Result<Vec<_>, _>>()?;
    KanModel::new(layers)
}

fn extend(model: &KanModel<f64>, grids: &[usize]) -> Result<KanModel<f64>, SplineError> {
    let layers = model
        .layers()
        .iter()
        .zip(grids)
        .map(|(l, &g)| if g == l.spec().grid() { Ok(l.clone()) } else { grid_extend(l, g) })
        .collect::<Result<Vec<_>, _>>()?;
    KanModel::new(layers)
}

/// Run the whole loop.
pub fn tune(model: &KanModel<f64>, data: &Dataset<f64>, cfg: &TuneConfig, hw: &Hardware) -> Result<TuneOutcome, TuneError> {
    let mut state = TuneState::start(model, data, cfg, hw)?;
    resume(&mut state, data, cfg, hw, |_| true)?;
    Ok(state.outcome())
}

/// Continue `state` until it finishes or `keep_going` (called after every
/// window) returns false.
pub fn resume(
    state: &mut TuneState,
    data: &Dataset<f64>,
    cfg: &TuneConfig,
    hw: &Hardware,
    mut keep_going: impl FnMut(&TuneState) -> bool,
) -> Result<(), TuneError> {
    if &state.config != cfg {
        return Err(TuneError::StateMismatch);
    }
    while !state.is_done() {
        state.step(data, hw)?;
        if !keep_going(state) {
            break;
        }
    }
    Ok(())
}

/// One JSON object per line.
pub fn trace_jsonl(trace: &[TraceRecord]) -> String {
    let mut s = String::new();
    for r in trace {
        s.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        s.push('\n');
    }
    s
}
