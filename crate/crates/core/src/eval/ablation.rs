//! Trains the four batch-norm × attention variants under one configuration.

use std::path::Path;

use serde::Serialize;

use super::{evaluate, FrameSet};
use crate::error::Result;
use crate::ingest::{SplitSpec, SubmapFrame};
use crate::model::{Ablation, Model, ModelConfig};
use crate::projection::ProjectionConfig;
use crate::real::Real;
use crate::training::{train, TrainConfig, TrainData, TrainHooks};

pub struct AblationSetup<'a> {
    /// Layer schedule and clusters; the two switches are overridden per row.
    pub base: ModelConfig,
    pub train: TrainConfig,
    pub model_seed: u64,
    pub train_data: TrainData<'a>,
    pub eval_frames: &'a [SubmapFrame],
    pub split: &'a SplitSpec,
    pub proj: ProjectionConfig,
    pub max_n: usize,
    /// Each variant trains into `<out_dir>/<label>` when set.
    pub out_dir: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub batchnorm: bool,
    pub attention: bool,
    pub ar1: f64,
    pub ar1_percent: f64,
    pub final_val_loss: Option<f64>,
}

pub fn run_ablation<T: Real>(setup: &AblationSetup<'_>) -> Result<Vec<AblationRow>> {
    FrameSet::new(setup.eval_frames)?;
    let mut rows = Vec::with_capacity(4);
    for ablation in Ablation::table() {
        let label = ablation.label();
        log::info!("ablation: training {label}");
        let model = Model::<T>::new(setup.base.clone().with_ablation(ablation), setup.model_seed)?;
        let dir = setup.out_dir.map(|d| d.join(label.replace(':', "-").replace(',', "_")));
        let data = TrainData {
            panoramas: setup.train_data.panoramas,
            positions: setup.train_data.positions,
        };
        let outcome = train(model, data, &setup.train, dir.as_deref(), TrainHooks::default())?;
        let (_, eval) = evaluate(&outcome.model, setup.eval_frames, setup.split, &setup.proj, setup.max_n)?;
        rows.push(AblationRow {
            label: label.to_string(),
            batchnorm: ablation.batchnorm,
            attention: ablation.attention,
            ar1: eval.recall.ar1,
            ar1_percent: eval.recall.ar1_percent,
            final_val_loss: outcome.curve.iter().rev().find_map(|r| r.val_loss),
        });
    }
    Ok(rows)
}
