//! Training-free gait de-identification at desk scale.
//!
//! Silhouette sequences are encoded by an exactly invertible autoencoder,
//! inverted a few steps along a deterministic diffusion trajectory, and the
//! resulting latent is optimised so that the decoded sequence moves away
//! from the source identity and towards a chosen target under a surrogate
//! ensemble of moment-based gait embedders. Every numeric type is generic
//! over [`Scalar`]; the aliases below fix it to `f64`.

pub mod baseline_pgd;
pub mod diffcore;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod models;
pub mod objective;
pub mod protector;
pub mod rng;
pub mod scalar;
pub mod silhouette;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = diffcore::Tensor<f64>;
pub type Sequence = silhouette::SilhouetteSequence<f64>;
pub type Models = models::FrozenModels<f64>;
pub type Embedder = models::MomentEmbedder<f64>;
pub type Embedding = models::Embedding<f64>;
pub type Gallery = eval::Gallery<f64>;
pub type Ddim = diffusion::Ddim<f64>;
