use kan_cim::cim::{CrossbarConfig, EncoderConfig, EncoderScheme, TransferFn};
use kan_cim::cost::{check_constraints, Budget, TechParams};
use kan_cim::rng::substream;
use kan_cim::spline::{BSplineSpec, Dataset, KanModel, TrainConfig};
use kan_cim::tune::*;
use rand::Rng;

fn hw() -> Hardware {
    Hardware {
        tech: TechParams::default(),
        crossbar: CrossbarConfig::default(),
        encoder: EncoderConfig::new(EncoderScheme::Tmdv, 4, TransferFn::default(), 0.9, 1e-9).unwrap(),
    }
}

fn smooth_task() -> Dataset<f64> {
    let mut rng = substream(2, &[]);
    let rows: Vec<_> = (0..400)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            (vec![x], vec![(4.0 * x).sin()])
        })
        .collect();
    let mut d = Dataset::from_rows(&rows).unwrap();
    d.assign_random_split(0.25, 2);
    d
}

/// 20 training rows of a weak trend buried in noise; a fine grid only
/// memorizes the noise.
fn noisy_task(seed: u64) -> Dataset<f64> {
    let mut rng = substream(seed, &[]);
    let rows: Vec<_> = (0..200)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            (vec![x], vec![0.5 * x + rng.random_range(-1.0..1.0)])
        })
        .collect();
    let mut d = Dataset::from_rows(&rows).unwrap();
    d.assign_random_split(0.9, seed);
    d
}

fn start_model(std: f64) -> KanModel<f64> {
    model_at(5, std)
}

fn model_at(g: usize, std: f64) -> KanModel<f64> {
    let spec = BSplineSpec::new(3, g, -1.0, 1.0).unwrap();
    KanModel::random(&[1, 1], &spec, std, &mut substream(1, &[])).unwrap()
}

fn easy_cfg() -> TuneConfig {
    TuneConfig {
        warmup_epochs: 5,
        interval: 10,
        increment: 5,
        max_grid: 20,
        train: TrainConfig { learning_rate: 0.1, batch_size: 8, momentum: 0.5, ..Default::default() },
        ..Default::default()
    }
}

fn plateau_cfg() -> TuneConfig {
    TuneConfig {
        warmup_epochs: 0,
        interval: 10,
        increment: 59,
        max_grid: 64,
        train: TrainConfig { learning_rate: 0.1, batch_size: 2, momentum: 0.5, ..Default::default() },
        ..Default::default()
    }
}

/// Above G = 10 every extension adds area.
fn budget_cfg() -> TuneConfig {
    TuneConfig { max_grid: 30, min_grid: 10, ..easy_cfg() }
}

fn decisions(t: &[TraceRecord]) -> Vec<Decision> {
    t.iter().map(|r| r.decision).collect()
}

#[test]
fn generous_budget_extends_to_cap() {
    let out = tune(&start_model(0.1), &smooth_task(), &easy_cfg(), &hw()).unwrap();
    let grids: Vec<usize> = out.trace.iter().map(|r| r.grids[0]).collect();
    assert_eq!(grids, vec![5, 10, 15, 20, 20]);
    use Decision::*;
    assert_eq!(decisions(&out.trace), vec![Initial, Extend, Extend, Extend, CapStop]);
    assert_eq!(out.status, TuneStatus::Feasible);
    assert_eq!(out.model.grids(), vec![20]);
}

#[test]
fn budget_below_next_step_blocks_every_extension() {
    let free = tune(&model_at(10, 0.1), &smooth_task(), &budget_cfg(), &hw()).unwrap();
    let at_start = &free.trace[0].report;
    let cfg = TuneConfig {
        budget: Budget { area: Some(at_start.area * (1.0 + 1e-12)), ..Budget::unlimited() },
        ..budget_cfg()
    };
    let out = tune(&model_at(10, 0.1), &smooth_task(), &cfg, &hw()).unwrap();
    assert_eq!(out.model.grids(), vec![10]);
    assert!(!decisions(&out.trace).contains(&Decision::Extend));
    assert_eq!(out.trace.last().unwrap().decision, Decision::BudgetStop);
    assert_eq!(out.trace.last().unwrap().candidate, Some(vec![15]));
    for r in &out.trace {
        assert!(r.pass && check_constraints(&r.report, &cfg.budget).pass);
    }
}

#[test]
fn accepted_configurations_always_within_budget() {
    let free = tune(&model_at(10, 0.1), &smooth_task(), &budget_cfg(), &hw()).unwrap();
    // room for one extension but not two
    let cfg = TuneConfig {
        budget: Budget { area: Some(free.trace[1].report.area * (1.0 + 1e-12)), ..Budget::unlimited() },
        ..budget_cfg()
    };
    let out = tune(&model_at(10, 0.1), &smooth_task(), &cfg, &hw()).unwrap();
    assert_eq!(out.model.grids(), vec![15]);
    for r in &out.trace {
        assert!(check_constraints(&r.report, &cfg.budget).pass);
    }
}

#[test]
fn plateau_rolls_back_once() {
    for seed in 0..3 {
        let start = start_model(0.0);
        let out = tune(&start, &noisy_task(seed), &plateau_cfg(), &hw()).unwrap();
        use Decision::*;
        assert_eq!(decisions(&out.trace), vec![Initial, Extend, Rollback], "seed {seed}");
        assert_eq!(out.trace[1].grids, vec![64]);
        assert_eq!(out.model.grids(), vec![5]);
        // coefficients are restored, not re-fit
        let rb = &out.trace[2];
        assert_eq!(rb.val_loss, out.trace[1].val_loss);
    }
}

#[test]
fn grids_monotone_until_terminal_rollback() {
    let out = tune(&start_model(0.0), &noisy_task(0), &plateau_cfg(), &hw()).unwrap();
    let body = &out.trace[..out.trace.len() - 1];
    assert!(body.windows(2).all(|w| w[0].grids.iter().zip(&w[1].grids).all(|(a, b)| a <= b)));
}

#[test]
fn unsatisfiable_budget_reports_minimal_cost() {
    let cfg = TuneConfig {
        budget: Budget { energy: Some(1e-30), ..Budget::unlimited() },
        templates: Some(GridTemplates { high: 16, medium: 8, low: 4 }),
        ..easy_cfg()
    };
    let out = tune(&start_model(0.1), &smooth_task(), &cfg, &hw()).unwrap();
    assert_eq!(out.status, TuneStatus::Infeasible);
    assert_eq!(out.trace.len(), 1);
    let r = &out.trace[0];
    assert_eq!(r.decision, Decision::Infeasible);
    assert_eq!(r.grids, vec![cfg.min_grid]);
    assert_eq!(r.candidate, Some(vec![16]));
    assert!(r.report.energy > 0.0);
}

#[test]
fn templates_shrink_toward_budget() {
    let free = tune(&model_at(10, 0.1), &smooth_task(), &budget_cfg(), &hw()).unwrap();
    let cfg = TuneConfig {
        budget: Budget { area: Some(free.trace[1].report.area * (1.0 + 1e-12)), ..Budget::unlimited() },
        templates: Some(GridTemplates { high: 25, medium: 15, low: 10 }),
        ..budget_cfg()
    };
    let out = tune(&model_at(10, 0.1), &smooth_task(), &cfg, &hw()).unwrap();
    assert_eq!(out.trace[0].candidate, Some(vec![25]));
    assert_eq!(out.trace[0].grids, vec![15]);
    assert!(out.trace[0].pass);
}

#[test]
fn trace_is_byte_identical_across_runs_and_threads() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| trace_jsonl(&tune(&start_model(0.1), &smooth_task(), &easy_cfg(), &hw()).unwrap().trace))
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(4));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn resume_reproduces_remaining_trace() {
    let cfg = easy_cfg();
    let data = smooth_task();
    let full = tune(&start_model(0.1), &data, &cfg, &hw()).unwrap();

    let mut state = TuneState::start(&start_model(0.1), &data, &cfg, &hw()).unwrap();
    let mut windows = 0;
    resume(&mut state, &data, &cfg, &hw(), |_| {
        windows += 1;
        windows < 2
    })
    .unwrap();
    assert!(!state.is_done());
    let saved = serde_json::to_string(&state).unwrap();
    let mut restored: TuneState = serde_json::from_str(&saved).unwrap();
    assert_eq!(restored, state);
    resume(&mut restored, &data, &cfg, &hw(), |_| true).unwrap();
    assert_eq!(trace_jsonl(&restored.trace), trace_jsonl(&full.trace));
    assert_eq!(restored.model, full.model);

    let other = TuneConfig { interval: 3, ..cfg };
    assert!(matches!(resume(&mut state, &data, &other, &hw(), |_| true), Err(TuneError::StateMismatch)));
}

#[test]
fn high_layers_get_accuracy_mode() {
    let spec = BSplineSpec::new(3, 5, -1.0, 1.0).unwrap();
    let m = KanModel::random(&[1, 2, 2, 1], &spec, 0.3, &mut substream(4, &[])).unwrap();
    let cfg = TuneConfig { max_windows: 1, ..easy_cfg() };
    let out = tune(&m, &smooth_task(), &cfg, &hw()).unwrap();
    let r = &out.trace[0];
    for (c, m) in out.profile.classes.iter().zip(&r.modes) {
        let want = if *c == Sensitivity::High { cfg.high_mode } else { cfg.other_mode };
        assert_eq!(*m, want);
    }
    assert!(out.profile.classes.contains(&Sensitivity::High));
}

#[test]
fn invalid_configs_rejected() {
    let m = start_model(0.1);
    for cfg in [
        TuneConfig { interval: 0, ..easy_cfg() },
        TuneConfig { increment: 0, ..easy_cfg() },
        TuneConfig { min_grid: 30, ..easy_cfg() },
        TuneConfig { budget: Budget { area: Some(-1.0), ..Budget::unlimited() }, ..easy_cfg() },
    ] {
        assert!(matches!(tune(&m, &smooth_task(), &cfg, &hw()), Err(TuneError::Invalid(_))));
    }
}
