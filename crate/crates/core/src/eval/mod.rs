//! Retrieval evaluation and diagnostics: exact-NN indexing, recall metrics,
//! viewpoint sweeps, centroid activity, the ablation driver and runtime
//! benchmarking.

pub mod ablation;
pub mod bench;
pub mod index;
pub mod recall;
pub mod report;
pub mod snr;
pub mod viewpoint;

use std::collections::HashMap;

pub use ablation::{run_ablation, AblationRow, AblationSetup};
pub use bench::{benchmark_runtime, BenchReport};
pub use index::{DescriptorIndex, IndexEntry, Neighbor, RetrievalResult};
pub use recall::{one_percent_cutoff, recall_at_n, RecallCurve};
pub use snr::{
    argmax_histogram, cluster_histogram, read_assignments, snr, snr_from_histogram, snr_report, ActivityRule,
    SnrReport,
};
pub use viewpoint::{perturb_points, yaw_sweep_eval, YawRow, YawSweep, YawSweepConfig};

use crate::error::{Error, Result};
use crate::ingest::{SplitSpec, SubmapFrame};
use crate::model::Model;
use crate::parallel;
use crate::projection::{project, ProjectionConfig};
use crate::real::Real;

/// Frames addressed by frame id.
pub struct FrameSet<'a> {
    frames: &'a [SubmapFrame],
    by_id: HashMap<usize, usize>,
}

impl<'a> FrameSet<'a> {
    pub fn new(frames: &'a [SubmapFrame]) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(frames.len());
        for (i, f) in frames.iter().enumerate() {
            if by_id.insert(f.frame_id, i).is_some() {
                return Err(Error::DuplicateId(f.frame_id));
            }
        }
        Ok(FrameSet { frames, by_id })
    }

    pub fn get(&self, id: usize) -> Result<&'a SubmapFrame> {
        self.by_id
            .get(&id)
            .map(|&i| &self.frames[i])
            .ok_or(Error::UnknownFrame(id))
    }

    pub fn select(&self, ids: &[usize]) -> Result<Vec<&'a SubmapFrame>> {
        ids.iter().map(|&id| self.get(id)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub results: Vec<RetrievalResult>,
    pub recall: RecallCurve,
}

pub(crate) fn check_bandwidth<T: Real>(model: &Model<T>, proj: &ProjectionConfig) -> Result<()> {
    if proj.bandwidth != model.config.input_bandwidth {
        return Err(Error::BandwidthMismatch(proj.bandwidth, model.config.input_bandwidth));
    }
    Ok(())
}

/// Projects and describes frames in parallel.
pub fn describe_frames<T: Real>(
    model: &Model<T>,
    frames: &[&SubmapFrame],
    proj: &ProjectionConfig,
) -> Result<Vec<Vec<T>>> {
    check_bandwidth(model, proj)?;
    parallel::map(frames, |f| model.describe(&project(f, proj)))
        .into_iter()
        .collect()
}

pub fn build_index<T: Real>(
    model: &Model<T>,
    frames: &FrameSet<'_>,
    database_ids: &[usize],
    proj: &ProjectionConfig,
) -> Result<DescriptorIndex> {
    let db = frames.select(database_ids)?;
    let descriptors = describe_frames(model, &db, proj)?;
    let positions: Vec<[f64; 3]> = db.iter().map(|f| f.position()).collect();
    DescriptorIndex::build(database_ids, &positions, &descriptors)
}

/// Neighbours kept per query so both recall@`max_n` and the 1% cutoff are covered.
pub fn ranking_depth(max_n: usize, database_size: usize) -> usize {
    max_n.max(one_percent_cutoff(database_size))
}

/// Describes the split's queries, queries `index`, and scores against the split threshold.
pub fn evaluate_queries<T: Real>(
    model: &Model<T>,
    index: &DescriptorIndex,
    frames: &FrameSet<'_>,
    split: &SplitSpec,
    proj: &ProjectionConfig,
    max_n: usize,
) -> Result<Evaluation> {
    let queries = frames.select(&split.query_ids)?;
    let descriptors = describe_frames(model, &queries, proj)?;
    score(index, &queries, descriptors, split.success_threshold_m, max_n)
}

pub(crate) fn score<T: Real>(
    index: &DescriptorIndex,
    queries: &[&SubmapFrame],
    descriptors: Vec<Vec<T>>,
    threshold_m: f64,
    max_n: usize,
) -> Result<Evaluation> {
    let depth = ranking_depth(max_n, index.len());
    let q: Vec<(usize, [f64; 3], Vec<T>)> = queries
        .iter()
        .zip(descriptors)
        .map(|(f, d)| (f.frame_id, f.position(), d))
        .collect();
    let results = index.query_all(&q, depth)?;
    let recall = recall_at_n(&results, threshold_m, index.len(), max_n);
    Ok(Evaluation { results, recall })
}

/// Builds the database from the split and evaluates its queries.
pub fn evaluate<T: Real>(
    model: &Model<T>,
    frames: &[SubmapFrame],
    split: &SplitSpec,
    proj: &ProjectionConfig,
    max_n: usize,
) -> Result<(DescriptorIndex, Evaluation)> {
    let set = FrameSet::new(frames)?;
    let index = build_index(model, &set, &split.database_ids, proj)?;
    let eval = evaluate_queries(model, &index, &set, split, proj, max_n)?;
    Ok((index, eval))
}
