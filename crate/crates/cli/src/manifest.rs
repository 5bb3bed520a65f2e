//! Run manifests and Ctrl-C handling.
//!
//! Every invocation records one manifest. It is written when the command
//! finishes, fails, or is interrupted; an interrupt exits with status 130.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Ok,
    Interrupted,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full command line; re-running it reproduces the run.
    pub argv: Vec<String>,
    /// Resolved configuration after defaults, config files and flag overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub precision: Option<String>,
    pub parallel: bool,
    pub tool_version: String,
    pub artifacts: Vec<PathBuf>,
    pub started_unix_s: f64,
    pub finished_unix_s: Option<f64>,
    pub status: Status,
    pub error: Option<String>,
}

struct Active {
    path: PathBuf,
    manifest: RunManifest,
}

static ACTIVE: Mutex<Option<Active>> = Mutex::new(None);
/// Set by the first Ctrl-C when the running command stops cooperatively.
pub static STOP: AtomicBool = AtomicBool::new(false);
static COOPERATIVE: AtomicBool = AtomicBool::new(false);

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn write(path: &Path, m: &RunManifest) {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        let _ = std::fs::create_dir_all(dir);
    }
    match serde_json::to_string_pretty(m) {
        Ok(text) => {
            if let Err(e) = std::fs::write(path, text) {
                log::error!("cannot write manifest {}: {e}", path.display());
            }
        }
        Err(e) => log::error!("cannot serialise manifest: {e}"),
    }
}

pub fn begin(path: PathBuf, command: &str, config: serde_json::Value, seed: Option<u64>, precision: Option<&str>) {
    let manifest = RunManifest {
        command: command.to_string(),
        argv: std::env::args().collect(),
        config,
        seed,
        precision: precision.map(str::to_string),
        parallel: spherevlad::parallel::enabled(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        artifacts: Vec::new(),
        started_unix_s: now(),
        finished_unix_s: None,
        status: Status::Running,
        error: None,
    };
    *ACTIVE.lock().unwrap_or_else(|e| e.into_inner()) = Some(Active { path, manifest });
}

pub fn artifact(p: impl Into<PathBuf>) {
    if let Some(a) = ACTIVE.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
        a.manifest.artifacts.push(p.into());
    }
}

/// Writes the manifest with its final status and returns where it went.
pub fn finish(status: Status, error: Option<String>) -> Option<PathBuf> {
    let mut guard = ACTIVE.lock().unwrap_or_else(|e| e.into_inner());
    let a = guard.as_mut()?;
    a.manifest.status = status;
    a.manifest.error = error;
    a.manifest.finished_unix_s = Some(now());
    write(&a.path, &a.manifest);
    Some(a.path.clone())
}

/// The next Ctrl-C only raises [`STOP`]; the command must poll it.
pub fn cooperative(on: bool) {
    COOPERATIVE.store(on, Ordering::SeqCst);
}

pub fn install_interrupt_handler() {
    let res = ctrlc::set_handler(|| {
        if COOPERATIVE.load(Ordering::SeqCst) && !STOP.swap(true, Ordering::SeqCst) {
            eprintln!("interrupt: stopping after the current step (Ctrl-C again to abort)");
            return;
        }
        finish(Status::Interrupted, Some("interrupted".into()));
        std::process::exit(130);
    });
    if let Err(e) = res {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
}
