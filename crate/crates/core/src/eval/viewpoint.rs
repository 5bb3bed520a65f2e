//! Query-side viewpoint perturbation: yaw plus random sensor displacement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_bandwidth, score, DescriptorIndex, FrameSet, RetrievalResult};
use crate::error::{Error, Result};
use crate::ingest::SplitSpec;
use crate::model::Model;
use crate::parallel;
use crate::projection::{project_points, yaw_points, ProjectionConfig};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YawSweepConfig {
    pub yaws_deg: Vec<f64>,
    /// Displacement drawn uniformly from `[−r, r]` on each horizontal axis, metres.
    pub translation_noise_m: f64,
    pub seed: u64,
    pub max_n: usize,
}

impl Default for YawSweepConfig {
    fn default() -> Self {
        YawSweepConfig {
            yaws_deg: (0..=6).map(|i| 30.0 * i as f64).collect(),
            translation_noise_m: 1.0,
            seed: 0,
            max_n: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YawRow {
    pub yaw_deg: f64,
    pub ar1: f64,
    pub ar1_percent: f64,
    pub evaluated: usize,
}

#[derive(Debug, Clone)]
pub struct YawSweep {
    pub rows: Vec<YawRow>,
    /// Per-yaw retrieval results, in query order.
    pub results: Vec<Vec<RetrievalResult>>,
}

/// Moves the sensor origin by `offset` (sensor frame), then rotates the cloud by `yaw` about `+z`.
pub fn perturb_points(points: &[[f64; 3]], yaw_rad: f64, offset: [f64; 2]) -> Vec<[f64; 3]> {
    let shifted: Vec<[f64; 3]> = if offset == [0.0, 0.0] {
        points.to_vec()
    } else {
        points.iter().map(|p| [p[0] - offset[0], p[1] - offset[1], p[2]]).collect()
    };
    if yaw_rad == 0.0 {
        shifted
    } else {
        yaw_points(&shifted, yaw_rad)
    }
}

fn offsets(n: usize, r: f64, seed: u64) -> Vec<[f64; 2]> {
    if r <= 0.0 {
        return vec![[0.0; 2]; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(-r..=r), rng.random_range(-r..=r)])
        .collect()
}

/// AR@1 and AR@1% of the split's queries for each yaw, against a fixed database.
pub fn yaw_sweep_eval<T: Real>(
    model: &Model<T>,
    index: &DescriptorIndex,
    frames: &FrameSet<'_>,
    split: &SplitSpec,
    proj: &ProjectionConfig,
    cfg: &YawSweepConfig,
) -> Result<YawSweep> {
    if cfg.yaws_deg.is_empty() {
        return Err(Error::EmptyInput("yaw list"));
    }
    check_bandwidth(model, proj)?;
    let queries = frames.select(&split.query_ids)?;
    // Each query keeps the same displacement at every yaw, so rows differ by yaw alone.
    let offs = offsets(queries.len(), cfg.translation_noise_m, cfg.seed);
    let mut rows = Vec::with_capacity(cfg.yaws_deg.len());
    let mut results = Vec::with_capacity(cfg.yaws_deg.len());
    for &yaw_deg in &cfg.yaws_deg {
        let yaw = yaw_deg.to_radians();
        let work: Vec<_> = queries.iter().zip(&offs).collect();
        let descriptors: Vec<Vec<T>> = parallel::map(&work, |(f, off)| {
            let pts = perturb_points(&f.points, yaw, **off);
            model.describe(&project_points(&pts, f.frame_id, proj))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let eval = score(index, &queries, descriptors, split.success_threshold_m, cfg.max_n)?;
        rows.push(YawRow {
            yaw_deg,
            ar1: eval.recall.ar1,
            ar1_percent: eval.recall.ar1_percent,
            evaluated: eval.recall.evaluated,
        });
        results.push(eval.results);
    }
    Ok(YawSweep { rows, results })
}
