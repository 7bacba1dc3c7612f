//! Artifact directory: CSV tables, JSON summaries and the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Floats are written with 17 significant digits so golden files round-trip.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One table cell.
pub enum Cell {
    F(f64),
    O(Option<f64>),
    I(i64),
    U(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => num(*x),
            Cell::O(x) => opt(*x),
            Cell::I(v) => v.to_string(),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Warning {
    pub kind: String,
    pub message: String,
}

impl Warning {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Warning { kind: kind.into(), message: message.into() }
    }
}

pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<String>,
    pub warnings: Vec<Warning>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(ArtifactDir { root: root.to_path_buf(), files: Vec::new(), warnings: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<(), CliError> {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("json value serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn warn(&mut self, kind: &str, message: impl Into<String>) {
        let w = Warning::new(kind, message);
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    /// Writes `manifest.json`; its `config` member re-runs the command.
    pub fn finish(mut self, config: &RunConfig) -> Result<Vec<Warning>, CliError> {
        let manifest = json!({
            "manifest_version": MANIFEST_VERSION,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": config.command.map(|c| c.name()),
            "seed": config.seed,
            "config": serde_json::to_value(config).expect("config serializes"),
            "artifacts": self.files,
            "warnings": self.warnings,
        });
        let path = self.path("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(std::mem::take(&mut self.warnings))
    }
}
