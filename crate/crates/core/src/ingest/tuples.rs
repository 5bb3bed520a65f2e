//! Training tuple mining.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{DistanceMetric, SubmapFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleConfig {
    pub d_pos: f64,
    pub d_neg: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default)]
    pub metric: DistanceMetric,
}

impl Default for TupleConfig {
    fn default() -> Self {
        TupleConfig {
            d_pos: 8.0,
            d_neg: 16.0,
            n_pos: 2,
            n_neg: 6,
            metric: DistanceMetric::Euclidean3d,
        }
    }
}

/// Indices into the frame list the tuple was mined from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTuple {
    pub anchor: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub extra_negative: usize,
}

impl TrainingTuple {
    /// Anchor, positives, negatives, extra negative.
    pub fn members(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(2 + self.positives.len() + self.negatives.len());
        v.push(self.anchor);
        v.extend(&self.positives);
        v.extend(&self.negatives);
        v.push(self.extra_negative);
        v
    }
}

const NEGATIVE_ATTEMPTS: usize = 16;

/// Precomputed neighbour lists for repeated sampling.
#[derive(Debug, Clone)]
pub struct TupleMiner {
    cfg: TupleConfig,
    positions: Vec<[f64; 3]>,
    positives: Vec<Vec<usize>>,
    negatives: Vec<Vec<usize>>,
    anchors: Vec<usize>,
}

impl TupleMiner {
    pub fn new(positions: Vec<[f64; 3]>, cfg: TupleConfig) -> Result<Self> {
        if !(cfg.d_pos < cfg.d_neg) || cfg.d_pos <= 0.0 {
            return Err(Error::Config(format!(
                "need 0 < d_pos < d_neg, got d_pos = {}, d_neg = {}",
                cfg.d_pos, cfg.d_neg
            )));
        }
        let n = positions.len();
        let mut positives = vec![Vec::new(); n];
        let mut negatives = vec![Vec::new(); n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = cfg.metric.between(positions[a], positions[b]);
                if d <= cfg.d_pos {
                    positives[a].push(b);
                } else if d > cfg.d_neg {
                    negatives[a].push(b);
                }
            }
        }
        // S_neg* needs one more candidate beyond the chosen negatives.
        let anchors: Vec<usize> = (0..n)
            .filter(|&a| positives[a].len() >= cfg.n_pos && negatives[a].len() > cfg.n_neg)
            .collect();
        if anchors.is_empty() {
            return Err(Error::InsufficientCandidates(format!(
                "no frame has {} positives within {} m and {} negatives beyond {} m",
                cfg.n_pos,
                cfg.d_pos,
                cfg.n_neg + 1,
                cfg.d_neg
            )));
        }
        Ok(TupleMiner {
            cfg,
            positions,
            positives,
            negatives,
            anchors,
        })
    }

    pub fn from_frames(frames: &[SubmapFrame], cfg: TupleConfig) -> Result<Self> {
        Self::new(frames.iter().map(|f| f.position()).collect(), cfg)
    }

    pub fn eligible_anchors(&self) -> &[usize] {
        &self.anchors
    }

    fn try_anchor(&self, a: usize, rng: &mut ChaCha8Rng) -> Option<TrainingTuple> {
        let positives: Vec<usize> = self.positives[a].choose_multiple(rng, self.cfg.n_pos).copied().collect();
        for _ in 0..NEGATIVE_ATTEMPTS {
            let negatives: Vec<usize> = self.negatives[a].choose_multiple(rng, self.cfg.n_neg).copied().collect();
            let extra: Vec<usize> = self.negatives[a]
                .iter()
                .copied()
                .filter(|&c| {
                    !negatives.contains(&c)
                        && negatives
                            .iter()
                            .all(|&n| self.cfg.metric.between(self.positions[c], self.positions[n]) > self.cfg.d_neg)
                })
                .collect();
            if let Some(&extra_negative) = extra.choose(rng) {
                return Some(TrainingTuple {
                    anchor: a,
                    positives,
                    negatives,
                    extra_negative,
                });
            }
        }
        None
    }

    /// Uniform anchor, then uniform positives, negatives and extra negative.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<TrainingTuple> {
        let a = self.anchors[rng.random_range(0..self.anchors.len())];
        if let Some(t) = self.try_anchor(a, rng) {
            return Ok(t);
        }
        let mut order = self.anchors.clone();
        order.shuffle(rng);
        order
            .into_iter()
            .find_map(|a| self.try_anchor(a, rng))
            .ok_or_else(|| {
                Error::InsufficientCandidates(format!(
                    "no anchor admits an extra negative beyond {} m of all its negatives",
                    self.cfg.d_neg
                ))
            })
    }
}

pub fn mine_tuples(frames: &[SubmapFrame], cfg: &TupleConfig, rng_seed: u64) -> Result<TrainingTuple> {
    let miner = TupleMiner::from_frames(frames, *cfg)?;
    miner.sample(&mut ChaCha8Rng::seed_from_u64(rng_seed))
}
