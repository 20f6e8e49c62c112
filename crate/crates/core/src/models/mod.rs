//! Frozen, seed-deterministic model stand-ins: the autoencoder pair, the
//! noise-prediction network, and the surrogate/evaluation embedders.

mod autoencoder;
mod embedder;
mod noise;
pub mod weights;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use autoencoder::{AutoencoderPair, ORTHOGONALITY_TOL};
pub use embedder::{
    descriptor_var, Embedding, FeatureNorm, MomentEmbedder, CALIBRATION_SEED, FEATURE_DIM, FRAME_MOMENTS, MASS_GUARD,
    STD_GUARD,
};
pub use noise::{NoisePredictor, PriorMode};
pub use weights::WeightFile;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::silhouette::Dims;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Seed of the autoencoder and the noise predictor.
    pub seed: u64,
    pub clamp: f64,
    pub hidden: usize,
    pub embed_dim: usize,
    pub prior: PriorMode,
    pub surrogate_seeds: Vec<u64>,
    /// Seed of the held-out evaluation embedder.
    pub evaluation_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            clamp: 0.01,
            hidden: 64,
            embed_dim: 32,
            prior: PriorMode::Seeded,
            surrogate_seeds: vec![11, 12],
            evaluation_seed: 13,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.surrogate_seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one surrogate embedder is required".into(),
            ));
        }
        Ok(())
    }

    /// True when the evaluation embedder shares a seed with a surrogate.
    pub fn is_whitebox(&self) -> bool {
        self.surrogate_seeds.contains(&self.evaluation_seed)
    }

    pub fn whitebox(mut self) -> Self {
        self.evaluation_seed = self.surrogate_seeds[0];
        self
    }
}

/// Matrices stored ahead of the embedder projections.
const FIXED_MATRICES: usize = 8;

/// Every frozen component needed by protection and evaluation.
#[derive(Clone, Debug)]
pub struct FrozenModels<S: Scalar = f64> {
    pub dims: Dims,
    pub seed: u64,
    pub autoencoder: AutoencoderPair<S>,
    pub noise: NoisePredictor<S>,
    pub surrogates: Vec<MomentEmbedder<S>>,
    pub evaluator: MomentEmbedder<S>,
}

impl<S: Scalar> FrozenModels<S> {
    /// Builds every component from seeds; `steps` is the diffusion length T.
    pub fn build(cfg: &ModelConfig, dims: Dims, steps: usize) -> Result<Self> {
        cfg.validate()?;
        let norm = FeatureNorm::calibrate(dims)?;
        let embed = |seed| MomentEmbedder::seeded(seed, dims, cfg.embed_dim, &norm);
        Ok(Self {
            dims,
            seed: cfg.seed,
            autoencoder: AutoencoderPair::seeded(dims, cfg.clamp, cfg.seed)?,
            noise: NoisePredictor::seeded(dims.numel(), steps, cfg.hidden, cfg.seed, cfg.prior)?,
            surrogates: cfg.surrogate_seeds.iter().map(|&s| embed(s)).collect::<Result<_>>()?,
            evaluator: embed(cfg.evaluation_seed)?,
        })
    }

    /// Weight container in declared order: pixel block, frame block, W1,
    /// b1, W2, b2, feature centre, feature scale, surrogate projections,
    /// evaluator projection.
    pub fn to_weight_file(&self) -> WeightFile {
        let norm = self.evaluator.feature_norm();
        let mut matrices: Vec<Tensor<f64>> = vec![self.autoencoder.block().cast(), self.autoencoder.temporal().cast()];
        matrices.extend(self.noise.weights().iter().map(|w| w.cast()));
        matrices.push(Tensor::from_parts(vec![FEATURE_DIM, 1], norm.center));
        matrices.push(Tensor::from_parts(vec![FEATURE_DIM, 1], norm.scale));
        matrices.extend(self.surrogates.iter().map(|e| e.projection().cast()));
        matrices.push(self.evaluator.projection().cast());
        WeightFile {
            seed: self.seed,
            matrices,
        }
    }

    /// Restores models saved by [`FrozenModels::to_weight_file`]; seeds of
    /// the embedders are taken from `cfg`.
    pub fn from_weight_file(file: &WeightFile, cfg: &ModelConfig, dims: Dims, steps: usize) -> Result<Self> {
        cfg.validate()?;
        let expected = FIXED_MATRICES + cfg.surrogate_seeds.len() + 1;
        if file.matrices.len() != expected {
            return Err(Error::InvalidInput(format!(
                "weight file holds {} matrices, expected {expected}",
                file.matrices.len()
            )));
        }
        let m = |i: usize| -> Tensor<S> { file.matrices[i].cast() };
        let flat = |i: usize| -> Result<Tensor<S>> { Ok(m(i).reshaped(vec![file.matrices[i].len()])?) };
        let norm = FeatureNorm {
            center: file.matrices[6].data().to_vec(),
            scale: file.matrices[7].data().to_vec(),
        };
        let autoencoder = AutoencoderPair::from_blocks(dims, cfg.clamp, m(1), m(0))?;
        let noise = NoisePredictor::from_weights(cfg.prior, dims.numel(), steps, [m(2), flat(3)?, m(4), flat(5)?])?;
        let surrogates = cfg
            .surrogate_seeds
            .iter()
            .enumerate()
            .map(|(k, &seed)| MomentEmbedder::from_projection(seed, dims, m(FIXED_MATRICES + k), &norm))
            .collect::<Result<_>>()?;
        let evaluator = MomentEmbedder::from_projection(cfg.evaluation_seed, dims, m(expected - 1), &norm)?;
        Ok(Self {
            dims,
            seed: file.seed,
            autoencoder,
            noise,
            surrogates,
            evaluator,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_weight_file().save(path)
    }

    pub fn load(path: &Path, cfg: &ModelConfig, dims: Dims, steps: usize) -> Result<Self> {
        Self::from_weight_file(&WeightFile::load(path)?, cfg, dims, steps)
    }
}
