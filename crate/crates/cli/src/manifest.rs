//! Run manifests and artifact writers.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TaskStatus {
    pub fn ok(task: impl Into<String>) -> Self {
        TaskStatus { task: task.into(), status: "ok".into(), detail: None }
    }

    pub fn failed(task: impl Into<String>, detail: impl Into<String>) -> Self {
        TaskStatus { task: task.into(), status: "failed".into(), detail: Some(detail.into()) }
    }

    pub fn error(task: impl Into<String>, detail: impl Into<String>) -> Self {
        TaskStatus { task: task.into(), status: "error".into(), detail: Some(detail.into()) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub input_sha256: String,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub cap: Option<u64>,
    pub threads: usize,
    pub strict: bool,
    pub wall_time_seconds: f64,
    pub status: String,
    pub tasks: Vec<TaskStatus>,
    #[serde(skip)]
    started: Instant,
}

impl RunManifest {
    pub fn new(kind: &str, input: &[u8], threads: usize, strict: bool) -> Self {
        RunManifest {
            tool: "aisbound",
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.to_string(),
            input_sha256: hex::encode(Sha256::digest(input)),
            seed: None,
            trials: None,
            cap: None,
            threads,
            strict,
            wall_time_seconds: 0.0,
            status: "ok".into(),
            tasks: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Stamps wall time and the overall status from the task list.
    pub fn finish(&mut self) {
        self.wall_time_seconds = self.started.elapsed().as_secs_f64();
        self.status = if self.failed() {
            "failed"
        } else if self.tasks.iter().any(|t| t.status == "error") {
            "partial"
        } else {
            "ok"
        }
        .into();
    }

    pub fn failed(&self) -> bool {
        self.tasks.iter().any(|t| t.status == "failed")
    }
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// `run.csv` gets `run.manifest.json` next to it.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn manifest_json(m: &RunManifest) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(m).map_err(io)?;
    v.push(b'\n');
    Ok(v)
}

/// CSV to `out` (with a manifest sidecar) or to stdout (manifest on stderr).
pub fn emit_csv(out: Option<&Path>, csv: &[u8], m: &RunManifest) -> Result<(), CliError> {
    match out {
        Some(p) => {
            write_file(p, csv)?;
            write_file(&sidecar_path(p), &manifest_json(m)?)
        }
        None => {
            std::io::stdout().write_all(csv).map_err(io)?;
            std::io::stderr().write_all(&manifest_json(m)?).map_err(io)
        }
    }
}

#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    result: &'a T,
}

/// JSON artifact with the manifest embedded under `manifest`.
pub fn emit_json<T: Serialize>(out: Option<&Path>, result: &T, m: &RunManifest) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(&WithManifest { manifest: m, result }).map_err(io)?;
    bytes.push(b'\n');
    match out {
        Some(p) => write_file(p, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(io),
    }
}
