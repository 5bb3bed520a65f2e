//! Wall-clock runtime per frame, split into projection and forward pass.

use std::time::Instant;

use serde::Serialize;

use super::check_bandwidth;
use crate::error::{Error, Result};
use crate::ingest::SubmapFrame;
use crate::model::Model;
use crate::parallel;
use crate::projection::{project, ProjectionConfig};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub runs: usize,
    pub warmup: usize,
    pub precision: &'static str,
    pub parallel: bool,
    pub mean_preprocess_ms: f64,
    pub mean_inference_ms: f64,
    pub mean_total_ms: f64,
    /// Peak resident set size of the process, where the platform reports it.
    pub peak_rss_mb: Option<f64>,
}

/// Peak resident memory from `/proc/self/status` (`VmHWM`), Linux only.
pub fn peak_rss_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Times `warmup + n_runs` single-frame passes cycling over `frames`; the
/// warm-up passes are discarded.
pub fn benchmark_runtime<T: Real>(
    model: &Model<T>,
    frames: &[SubmapFrame],
    proj: &ProjectionConfig,
    n_runs: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to benchmark"));
    }
    if n_runs == 0 {
        return Err(Error::Config("benchmark needs at least one run".into()));
    }
    check_bandwidth(model, proj)?;
    let (mut pre, mut inf) = (0.0, 0.0);
    for i in 0..warmup + n_runs {
        let frame = &frames[i % frames.len()];
        let t0 = Instant::now();
        let pano = project(frame, proj);
        let t1 = Instant::now();
        std::hint::black_box(model.describe(&pano)?);
        let t2 = Instant::now();
        if i >= warmup {
            pre += (t1 - t0).as_secs_f64();
            inf += (t2 - t1).as_secs_f64();
        }
    }
    let n = n_runs as f64;
    Ok(BenchReport {
        runs: n_runs,
        warmup,
        precision: T::NAME,
        parallel: parallel::enabled(),
        mean_preprocess_ms: 1e3 * pre / n,
        mean_inference_ms: 1e3 * inf / n,
        mean_total_ms: 1e3 * (pre + inf) / n,
        peak_rss_mb: peak_rss_mb(),
    })
}
