use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SphereVlad,
    SphereVladPp,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::SphereVlad => "sphere_vlad",
            Variant::SphereVladPp => "sphere_vlad_pp",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere_vlad" => Ok(Variant::SphereVlad),
            "sphere_vlad_pp" => Ok(Variant::SphereVladPp),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub batchnorm: bool,
    pub attention: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        batchnorm: true,
        attention: true,
    };

    /// The four rows of the component ablation, in table order.
    pub fn table() -> [Ablation; 4] {
        [
            Ablation { batchnorm: false, attention: false },
            Ablation { batchnorm: false, attention: true },
            Ablation { batchnorm: true, attention: false },
            Ablation { batchnorm: true, attention: true },
        ]
    }

    pub fn label(self) -> &'static str {
        match (self.batchnorm, self.attention) {
            (false, false) => "bn:off,att:off",
            (false, true) => "bn:off,att:on",
            (true, false) => "bn:on,att:off",
            (true, true) => "bn:on,att:on",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub channels: usize,
    pub bandwidth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_bandwidth: usize,
    /// Layer 1 is S² → SO(3); the rest are SO(3) → SO(3).
    pub layers: Vec<LayerSpec>,
    pub batchnorm: bool,
    pub attention: bool,
    /// VLAD cluster count `K`.
    pub clusters: usize,
    #[serde(default = "default_momentum")]
    pub bn_momentum: f64,
    #[serde(default = "default_eps")]
    pub bn_eps: f64,
}

fn default_momentum() -> f64 {
    0.1
}

fn default_eps() -> f64 {
    1e-5
}

fn schedule(pairs: &[(usize, usize)]) -> Vec<LayerSpec> {
    pairs
        .iter()
        .map(|&(channels, bandwidth)| LayerSpec { channels, bandwidth })
        .collect()
}

impl ModelConfig {
    /// `B₀ = 32`, bandwidths 32 → 16 → 8 → 4 → 4, `L = 512`, `K = 32`, `D = 512`.
    pub fn full() -> Self {
        ModelConfig {
            input_bandwidth: 32,
            layers: schedule(&[(16, 16), (32, 8), (64, 4), (16, 4)]),
            batchnorm: true,
            attention: true,
            clusters: 32,
            bn_momentum: default_momentum(),
            bn_eps: default_eps(),
        }
    }

    /// Desk-scale configuration at `B₀ = 16` with the same `L`, `K`, `D`.
    pub fn desk() -> Self {
        ModelConfig {
            input_bandwidth: 16,
            layers: schedule(&[(16, 8), (32, 4), (64, 4), (16, 4)]),
            ..Self::full()
        }
    }

    /// Gradient-check size: `B₀ = 4`, `C ≤ 4`, `K = 4`, `L = 64`.
    pub fn tiny() -> Self {
        ModelConfig {
            input_bandwidth: 4,
            layers: schedule(&[(2, 4), (3, 2), (4, 2), (4, 2)]),
            clusters: 4,
            ..Self::full()
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.batchnorm = ablation.batchnorm;
        self.attention = ablation.attention;
        self
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            batchnorm: self.batchnorm,
            attention: self.attention,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.attention {
            Variant::SphereVladPp
        } else {
            Variant::SphereVlad
        }
    }

    /// Local feature channels `C`.
    pub fn feature_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.channels)
    }

    pub fn final_bandwidth(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bandwidth)
    }

    /// Local descriptors per frame, `L = (2B_f)³`.
    pub fn local_count(&self) -> usize {
        let n = 2 * self.final_bandwidth();
        n * n * n
    }

    pub fn descriptor_dim(&self) -> usize {
        self.clusters * self.feature_channels()
    }

    pub fn attention_channels(&self) -> usize {
        (self.feature_channels() / 2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_bandwidth < 2 {
            return Err(Error::Config("input bandwidth must be at least 2".into()));
        }
        if self.layers.len() < 2 {
            return Err(Error::Config("need one S² layer and at least one SO(3) layer".into()));
        }
        if self.clusters < 2 {
            return Err(Error::Config("need at least 2 clusters".into()));
        }
        let mut b_in = self.input_bandwidth;
        for (i, l) in self.layers.iter().enumerate() {
            if l.channels == 0 || l.bandwidth == 0 {
                return Err(Error::Config(format!("layer {} has zero channels or bandwidth", i + 1)));
            }
            if l.bandwidth > b_in {
                return Err(Error::Config(format!(
                    "layer {} bandwidth {} exceeds its input bandwidth {b_in}",
                    i + 1,
                    l.bandwidth
                )));
            }
            b_in = l.bandwidth;
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps > 0.0) {
            return Err(Error::Config("batch-norm momentum must be in (0, 1] and eps positive".into()));
        }
        Ok(())
    }
}
