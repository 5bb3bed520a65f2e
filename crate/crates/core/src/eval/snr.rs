//! Centroid activity and the signal-to-noise ratio of soft assignments.
//!
//! A centroid is active when it is the argmax assignment of at least a given
//! fraction of all local descriptors. `SNR = N_active / (N_total − N_active)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel;
use crate::projection::SphericalPanorama;
use crate::real::Real;

pub const DEFAULT_MIN_ARGMAX_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActivityRule {
    pub min_argmax_fraction: f64,
}

impl Default for ActivityRule {
    fn default() -> Self {
        ActivityRule {
            min_argmax_fraction: DEFAULT_MIN_ARGMAX_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    pub n_total: usize,
    pub n_active: usize,
    /// `+∞` when every centroid is active.
    pub snr: f64,
    /// Set when `N_active = N_total` and the ratio has a zero denominator.
    pub degenerate: bool,
    /// Argmax counts per centroid.
    pub histogram: Vec<u64>,
    pub min_argmax_fraction: f64,
}

/// `(snr, degenerate)` for the given counts.
pub fn snr(n_active: usize, n_total: usize) -> (f64, bool) {
    assert!(n_active <= n_total, "{n_active} active of {n_total}");
    if n_active == n_total {
        (f64::INFINITY, true)
    } else {
        (n_active as f64 / (n_total - n_active) as f64, false)
    }
}

/// Argmax counts over row-major `rows × k` assignments; ties go to the lowest index.
pub fn argmax_histogram<T: Real>(assignments: &[T], k: usize) -> Vec<u64> {
    let mut hist = vec![0u64; k];
    for row in assignments.chunks_exact(k) {
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        hist[best] += 1;
    }
    hist
}

pub fn snr_from_histogram(histogram: &[u64], rule: ActivityRule) -> SnrReport {
    let total: u64 = histogram.iter().sum();
    let n_active = if total == 0 {
        0
    } else {
        histogram
            .iter()
            .filter(|&&c| c as f64 / total as f64 >= rule.min_argmax_fraction)
            .count()
    };
    let (snr, degenerate) = snr(n_active, histogram.len());
    SnrReport {
        n_total: histogram.len(),
        n_active,
        snr,
        degenerate,
        histogram: histogram.to_vec(),
        min_argmax_fraction: rule.min_argmax_fraction,
    }
}

/// Argmax counts over every local descriptor of every panorama.
pub fn cluster_histogram<T: Real>(model: &Model<T>, panos: &[SphericalPanorama]) -> Result<Vec<u64>> {
    let k = model.config.clusters;
    let per: Vec<Result<Vec<u64>>> = parallel::map(panos, |p| Ok(argmax_histogram(&model.assignments(p)?, k)));
    let mut hist = vec![0u64; k];
    for h in per {
        for (a, b) in hist.iter_mut().zip(h?) {
            *a += b;
        }
    }
    Ok(hist)
}

pub fn snr_report<T: Real>(model: &Model<T>, panos: &[SphericalPanorama], rule: ActivityRule) -> Result<SnrReport> {
    Ok(snr_from_histogram(&cluster_histogram(model, panos)?, rule))
}

/// Reads an assignment matrix from CSV: one row per local descriptor, one
/// column per centroid, optional header row. Returns `(k, row-major values)`.
pub fn read_assignments(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::unreadable(path, io),
            other => Error::malformed(path, format!("{other:?}")),
        })?;
    let mut k = 0;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::malformed(path, format!("row {}: {e}", i + 1))),
        };
        if k == 0 {
            k = row.len();
        } else if row.len() != k {
            return Err(Error::malformed(path, format!("row {} has {} columns, expected {k}", i + 1, row.len())));
        }
        values.extend(row);
    }
    if k == 0 {
        return Err(Error::EmptyInput("assignment file has no rows"));
    }
    Ok((k, values))
}
