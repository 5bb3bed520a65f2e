//! Keypose selection and query/database splits.

use serde::{Deserialize, Serialize};

use super::frame::{DistanceMetric, SubmapFrame};
use crate::error::{Error, Result};

/// Indices of frames kept by the greedy rule: the first frame, then every frame
/// at least `spacing_m` from the last kept one.
pub fn keypose_indices(positions: &[[f64; 3]], spacing_m: f64, metric: DistanceMetric) -> Result<Vec<usize>> {
    let Some(&first) = positions.first() else {
        return Err(Error::EmptyInput("no frames to select keyposes from"));
    };
    if !(spacing_m > 0.0) {
        return Err(Error::Config(format!("keypose spacing must be positive, got {spacing_m}")));
    }
    let mut kept = vec![0];
    let mut last = first;
    for (i, &p) in positions.iter().enumerate().skip(1) {
        if metric.between(p, last) >= spacing_m {
            kept.push(i);
            last = p;
        }
    }
    Ok(kept)
}

pub fn select_keyposes(frames: &[SubmapFrame], spacing_m: f64) -> Result<Vec<SubmapFrame>> {
    let pos: Vec<_> = frames.iter().map(|f| f.position()).collect();
    Ok(keypose_indices(&pos, spacing_m, DistanceMetric::Euclidean3d)?
        .into_iter()
        .map(|i| frames[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Keyposes form the database, every other frame is a query.
    KeyposeRest { spacing_m: f64 },
    /// A frame is a query if it lies within `radius_m` of a frame at least
    /// `min_gap_frames` earlier in traversal order; the rest form the database.
    Revisit { radius_m: f64, min_gap_frames: usize },
    /// Frames of one recording form the database; the listed recordings (all
    /// others when empty) are queries.
    CrossRecording {
        database_label: usize,
        #[serde(default)]
        query_labels: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub database_ids: Vec<usize>,
    pub query_ids: Vec<usize>,
    pub success_threshold_m: f64,
}

pub fn split_query_database(
    frames: &[SubmapFrame],
    strategy: &SplitStrategy,
    success_threshold_m: f64,
    metric: DistanceMetric,
) -> Result<SplitSpec> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to split"));
    }
    let ids = |sel: &dyn Fn(usize) -> bool| -> Vec<usize> {
        (0..frames.len()).filter(|&i| sel(i)).map(|i| frames[i].frame_id).collect()
    };
    let (database_ids, query_ids) = match strategy {
        SplitStrategy::KeyposeRest { spacing_m } => {
            let pos: Vec<_> = frames.iter().map(|f| f.position()).collect();
            let mut is_key = vec![false; frames.len()];
            for i in keypose_indices(&pos, *spacing_m, metric)? {
                is_key[i] = true;
            }
            (ids(&|i| is_key[i]), ids(&|i| !is_key[i]))
        }
        SplitStrategy::Revisit { radius_m, min_gap_frames } => {
            let mut is_query = vec![false; frames.len()];
            for j in 0..frames.len() {
                let pj = frames[j].position();
                is_query[j] = (0..j.saturating_sub(*min_gap_frames))
                    .any(|i| metric.between(frames[i].position(), pj) <= *radius_m);
            }
            let q = ids(&|i| is_query[i]);
            if q.is_empty() {
                return Err(Error::NoRevisitsFound { radius_m: *radius_m });
            }
            (ids(&|i| !is_query[i]), q)
        }
        SplitStrategy::CrossRecording {
            database_label,
            query_labels,
        } => {
            let known = |l: usize| frames.iter().any(|f| f.trajectory_id == l);
            if let Some(&bad) = std::iter::once(database_label)
                .chain(query_labels.iter())
                .find(|&&l| !known(l))
            {
                return Err(Error::UnknownRecordingLabel(bad));
            }
            let t = |i: usize| frames[i].trajectory_id;
            let is_query = |i: usize| {
                t(i) != *database_label && (query_labels.is_empty() || query_labels.contains(&t(i)))
            };
            (ids(&|i| t(i) == *database_label), ids(&is_query))
        }
    };
    if database_ids.is_empty() {
        return Err(Error::EmptyInput("split produced an empty database"));
    }
    Ok(SplitSpec {
        database_ids,
        query_ids,
        success_threshold_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Pose;

    fn line(xs: &[f64]) -> Vec<SubmapFrame> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| SubmapFrame {
                frame_id: i,
                trajectory_id: 0,
                points: vec![],
                pose: Pose::planar(x, 0.0, 0.0, 0.0),
                timestamp: None,
            })
            .collect()
    }

    #[test]
    fn greedy_keyposes_every_five_metres() {
        let xs: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let kept = select_keyposes(&line(&xs), 5.0).unwrap();
        let got: Vec<f64> = kept.iter().map(|f| f.pose.translation[0]).collect();
        assert_eq!(got, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(select_keyposes(&kept, 5.0).unwrap(), kept);
        assert_eq!(select_keyposes(&line(&[3.0]), 100.0).unwrap().len(), 1);
        assert!(matches!(select_keyposes(&[], 5.0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn keypose_rest_counts() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let s = split_query_database(&line(&xs), &SplitStrategy::KeyposeRest { spacing_m: 5.0 }, 5.0, DistanceMetric::Euclidean3d).unwrap();
        assert_eq!(s.database_ids.len(), 21);
        assert_eq!(s.query_ids.len(), 80);
    }

    #[test]
    fn out_and_back_return_leg_is_query() {
        let mut xs: Vec<f64> = (0..=30).map(|i| i as f64).collect();
        xs.extend((0..30).rev().map(|i| i as f64 + 0.5));
        let frames = line(&xs);
        let s = split_query_database(
            &frames,
            &SplitStrategy::Revisit { radius_m: 3.0, min_gap_frames: 10 },
            5.0,
            DistanceMetric::Euclidean3d,
        )
        .unwrap();
        assert!(s.query_ids.iter().all(|&id| id > 30));
        assert!(s.query_ids.len() > 20);
        let none = split_query_database(
            &line(&[0.0, 10.0, 20.0]),
            &SplitStrategy::Revisit { radius_m: 3.0, min_gap_frames: 1 },
            5.0,
            DistanceMetric::Euclidean3d,
        );
        assert!(matches!(none, Err(Error::NoRevisitsFound { .. })));
    }

    #[test]
    fn cross_recording_labels() {
        let mut frames = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        for (i, f) in frames.iter_mut().enumerate() {
            f.trajectory_id = i / 2;
        }
        let s = split_query_database(
            &frames,
            &SplitStrategy::CrossRecording { database_label: 0, query_labels: vec![] },
            3.0,
            DistanceMetric::Euclidean3d,
        )
        .unwrap();
        assert_eq!(s.database_ids, vec![0, 1]);
        assert_eq!(s.query_ids, vec![2, 3, 4, 5]);
        let bad = split_query_database(
            &frames,
            &SplitStrategy::CrossRecording { database_label: 9, query_labels: vec![] },
            3.0,
            DistanceMetric::Euclidean3d,
        );
        assert!(matches!(bad, Err(Error::UnknownRecordingLabel(9))));
    }
}
