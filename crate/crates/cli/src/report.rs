//! Output directory bookkeeping and the JSON report envelope.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Files written into one output directory, in creation order.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.to_owned(), source: e })?;
        Ok(Self { dir: dir.to_owned(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Output { path, source: e })?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_owned());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
        text.push('\n');
        self.write(name, text)
    }

    /// Render with `f` into memory, then write.
    pub fn write_csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::Output { path: self.path(name), source: std::io::Error::other(e) })?;
        self.write(name, buf)
    }

    /// Write `report.json` listing every file produced so far.
    pub fn finish(mut self, command: &str, seed: u64, results: serde_json::Value) -> Result<(), CliError> {
        let report = Report {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: "kancim",
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            files: self.files.clone(),
            results,
        };
        self.write_json("report.json", &report)
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    tool: &'a str,
    tool_version: &'a str,
    command: &'a str,
    seed: u64,
    files: Vec<String>,
    results: serde_json::Value,
}
