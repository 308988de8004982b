use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::TrainConfig;
use crate::dec::{DecConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::gnn::GnnTrainConfig;
use crate::graph::DEFAULT_SPLIT;
use crate::preprocess::{DEFAULT_COMPLETENESS, DEFAULT_KNN_K};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub features: PathBuf,
    pub links: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub completeness_threshold: f64,
    pub knn_k: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            completeness_threshold: DEFAULT_COMPLETENESS,
            knn_k: DEFAULT_KNN_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderParams {
    pub latent_dim: usize,
    /// One model is trained per rate; the lowest best loss wins.
    pub lr_grid: Vec<f64>,
    pub train: TrainConfig,
}

impl Default for AutoencoderParams {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            lr_grid: vec![1e-3],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecParams {
    /// Fixed cluster count; when absent k is chosen by the silhouette sweep.
    pub k: Option<usize>,
    pub sweep: SweepConfig,
    pub train: DecConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        let (train, val, test) = DEFAULT_SPLIT;
        Self { train, val, test }
    }
}

impl SplitParams {
    pub fn ratios(&self) -> (f64, f64, f64) {
        (self.train, self.val, self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingParams {
    pub probability_threshold: f64,
}

impl Default for RankingParams {
    fn default() -> Self {
        Self {
            probability_threshold: 0.99,
        }
    }
}

/// Everything a pipeline run needs.
///
/// The `seed` fields inside the stage sections are ignored by
/// [`run_pipeline`](super::run_pipeline); every stage seed is derived from
/// `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub paths: Paths,
    #[serde(default)]
    pub preprocess: PreprocessParams,
    #[serde(default)]
    pub autoencoder: AutoencoderParams,
    #[serde(default)]
    pub dec: DecParams,
    #[serde(default)]
    pub split: SplitParams,
    #[serde(default)]
    pub gnn: GnnTrainConfig,
    #[serde(default)]
    pub ranking: RankingParams,
    #[serde(default)]
    pub master_seed: u64,
}

impl PipelineConfig {
    pub fn new(features: impl Into<PathBuf>, links: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            version: CONFIG_VERSION,
            paths: Paths {
                features: features.into(),
                links: links.into(),
                output_dir: output_dir.into(),
            },
            preprocess: PreprocessParams::default(),
            autoencoder: AutoencoderParams::default(),
            dec: DecParams::default(),
            split: SplitParams::default(),
            gnn: GnnTrainConfig::default(),
            ranking: RankingParams::default(),
            master_seed: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate_values()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Checks every parameter without touching the filesystem.
    pub fn validate_values(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let t = self.ranking.probability_threshold;
        if !(t > 0.5 && t < 1.0) {
            return Err(Error::Config(format!("probability_threshold {t} must lie in (0.5, 1)")));
        }
        let c = self.preprocess.completeness_threshold;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Config(format!("completeness_threshold {c} must lie in [0, 1]")));
        }
        if self.preprocess.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        if self.autoencoder.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if self.autoencoder.lr_grid.is_empty() || self.autoencoder.lr_grid.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("lr_grid needs at least one positive learning rate".into()));
        }
        self.autoencoder.train.validate()?;
        if let Some(k) = self.dec.k {
            if k < 2 {
                return Err(Error::Config(format!("dec k = {k} must be at least 2")));
            }
        }
        self.dec.train.validate()?;
        self.gnn.validate()?;
        let (a, b, c) = self.split.ratios();
        if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {:?} must be in [0, 1] and sum to 1", self.split.ratios())));
        }
        Ok(())
    }

    /// Value checks plus readable inputs and a creatable output directory.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        for p in [&self.paths.features, &self.paths.links] {
            if !p.is_file() {
                return Err(Error::Config(format!("input {} is not a readable file", p.display())));
            }
        }
        std::fs::create_dir_all(&self.paths.output_dir).map_err(|e| Error::io(&self.paths.output_dir, e))
    }
}
