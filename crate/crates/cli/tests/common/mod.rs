#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kancim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kancim"))
        .current_dir(dir)
        .env_remove("KANCIM_OUT_DIR")
        .env_remove("KANCIM_LOG")
        .args(args)
        .output()
        .expect("kancim runs")
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// `y = sin(3x)` on a fixed lattice of 300 points.
pub fn write_smooth_dataset(dir: &Path) -> PathBuf {
    let mut s = String::from("f0,t0\n");
    for i in 0..300 {
        let x = -1.0 + 2.0 * ((i * 7919) % 300) as f64 / 299.0;
        s.push_str(&format!("{x},{}\n", (3.0 * x).sin()));
    }
    let p = dir.join("data.csv");
    std::fs::write(&p, s).unwrap();
    p
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p
}

/// Small settings that keep every command fast in unoptimized builds.
pub const FAST: &str = r#"
[paths]
dataset = "data.csv"

[train]
epochs = 30
batch_size = 8
learning_rate = 0.1
target_loss = 0.01

[compare]
trials = 400

[mapping]
cells = [[128, 7], [256, 15]]
layers = 2
train_samples = 400
eval_samples = 4

[tuning]
warmup_epochs = 5
interval = 5
increment = 5
max_grid = 15
[tuning.train]
epochs = 0
batch_size = 8
learning_rate = 0.1
"#;

pub fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

pub fn json(p: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}
