use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::Margins;
use super::optim::AdamConfig;
use crate::error::{Error, Result};
use crate::ingest::{DistanceMetric, TupleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Float32,
    #[default]
    Float64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub m1: f64,
    pub m2: f64,
    pub d_pos: f64,
    pub d_neg: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub metric: DistanceMetric,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub steps: usize,
    pub batch_tuples: usize,
    pub seed: u64,
    pub rotation_augmentation: bool,
    pub precision: Precision,
    /// Write a checkpoint every this many steps (0: final only).
    pub checkpoint_every: usize,
    /// Evaluate the frozen validation tuples every this many steps (0: first and last only).
    pub val_every: usize,
    pub val_tuples: usize,
    /// Parameter-name prefixes excluded from updates, e.g. `attention.omega`.
    pub frozen: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let t = TupleConfig::default();
        let a = AdamConfig::default();
        let m = Margins::default();
        TrainConfig {
            m1: m.m1,
            m2: m.m2,
            d_pos: t.d_pos,
            d_neg: t.d_neg,
            n_pos: t.n_pos,
            n_neg: t.n_neg,
            metric: t.metric,
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            adam_eps: a.eps,
            steps: 2000,
            batch_tuples: 1,
            seed: 0,
            rotation_augmentation: false,
            precision: Precision::Float64,
            checkpoint_every: 500,
            val_every: 100,
            val_tuples: 8,
            frozen: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn margins(&self) -> Margins {
        Margins {
            m1: self.m1,
            m2: self.m2,
        }
    }

    pub fn tuples(&self) -> TupleConfig {
        TupleConfig {
            d_pos: self.d_pos,
            d_neg: self.d_neg,
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            metric: self.metric,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m1 > 0.0 && self.m2 > 0.0) {
            return Err(Error::Config("margins m1 and m2 must be positive".into()));
        }
        if !(self.d_pos < self.d_neg) {
            return Err(Error::Config(format!(
                "d_pos ({}) must be smaller than d_neg ({})",
                self.d_pos, self.d_neg
            )));
        }
        if self.n_pos == 0 || self.n_neg == 0 || self.batch_tuples == 0 {
            return Err(Error::Config("n_pos, n_neg and batch_tuples must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Reads `.toml` by extension, JSON otherwise. Missing keys take defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        let cfg: TrainConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_fill_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "steps = 10\nprecision = \"float32\"\nfrozen = [\"attention.omega\"]\n").unwrap();
        let c = TrainConfig::load(&t).unwrap();
        assert_eq!(c.steps, 10);
        assert_eq!(c.precision, Precision::Float32);
        assert_eq!(c.m1, 0.5);
        let j = dir.path().join("c.json");
        std::fs::write(&j, r#"{"lr": 0.01, "seed": 4}"#).unwrap();
        let c = TrainConfig::load(&j).unwrap();
        assert_eq!((c.lr, c.seed, c.n_neg), (0.01, 4, 6));
    }

    #[test]
    fn unknown_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "stepz = 10\n").unwrap();
        let err = TrainConfig::load(&t).unwrap_err().to_string();
        assert!(err.contains("stepz"), "{err}");
    }

    #[test]
    fn rejects_inverted_thresholds() {
        let c = TrainConfig {
            d_pos: 20.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
