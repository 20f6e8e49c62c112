//! Differentiable moment-based gait embedder.
//!
//! Per frame the embedder measures six soft moments of the intensity map
//! (mass fraction, row/column centroid, and the three second central
//! moments in normalised image coordinates). Their temporal mean and
//! standard deviation form a 12-dimensional descriptor, which is
//! standardised with fixed corpus statistics, projected by a seeded matrix
//! and L2-normalised.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::silhouette::{synth_corpus, CorpusSpec, Dims, SilhouetteSequence};

/// Moments measured per frame.
pub const FRAME_MOMENTS: usize = 6;
/// Descriptor length: temporal mean and std of every frame moment.
pub const FEATURE_DIM: usize = 2 * FRAME_MOMENTS;
/// Guard added to the mass before dividing.
pub const MASS_GUARD: f64 = 1e-6;
/// Guard added to a temporal variance before the square root.
pub const STD_GUARD: f64 = 1e-8;
/// Seed of the reference corpus used for feature standardisation.
pub const CALIBRATION_SEED: u64 = 0x5EED_CA11;
/// Standardisation scales never drop below this.
const MIN_FEATURE_SCALE: f64 = 0.03;

/// Unit-norm identity embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<S = f64>(Vec<S>);

impl<S: Scalar> Embedding<S> {
    /// Normalises `v` with the guarded norm.
    pub fn from_raw(v: Vec<S>) -> Self {
        let n = (v.iter().fold(S::zero(), |a, &x| a + x * x) + S::lit(1e-12)).sqrt();
        Self(v.into_iter().map(|x| x / n).collect())
    }

    /// Wraps a vector that is already unit-norm.
    pub fn from_unit(v: Vec<S>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> S {
        self.0.iter().fold(S::zero(), |a, &x| a + x * x).sqrt()
    }
}

/// Fixed centring and scaling of the 12-dimensional descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity() -> Self {
        Self {
            center: vec![0.0; FEATURE_DIM],
            scale: vec![1.0; FEATURE_DIM],
        }
    }

    /// Mean and standard deviation of the descriptor over a fixed reference
    /// corpus (64 identities x 2 sequences, [`CALIBRATION_SEED`]).
    pub fn calibrate(dims: Dims) -> Result<Self> {
        let mut spec = CorpusSpec::new(64, 2, CALIBRATION_SEED);
        spec.dims = dims;
        let corpus = synth_corpus(&spec)?;
        let rows: Vec<Vec<f64>> = corpus
            .iter()
            .flat_map(|s| s.sequences.iter())
            .map(descriptor)
            .collect::<Result<_>>()?;
        let n = rows.len() as f64;
        let center: Vec<f64> = (0..FEATURE_DIM)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let scale = (0..FEATURE_DIM)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / n;
                var.sqrt().max(MIN_FEATURE_SCALE)
            })
            .collect();
        Ok(Self { center, scale })
    }

    fn validate(&self) -> Result<()> {
        if self.center.len() != FEATURE_DIM || self.scale.len() != FEATURE_DIM {
            return Err(Error::Dimension {
                expected: vec![FEATURE_DIM],
                got: vec![self.center.len(), self.scale.len()],
            });
        }
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("feature scales must be positive".into()));
        }
        Ok(())
    }
}

/// `n x 6` matrix with columns `1, r, c, r^2, c^2, r*c` over pixel centres
/// in normalised coordinates.
fn moment_basis<S: Scalar>(dims: Dims) -> Tensor<S> {
    let (h, w) = (dims.height as f64, dims.width as f64);
    let mut data = Vec::with_capacity(dims.frame_len() * FRAME_MOMENTS);
    for r in 0..dims.height {
        for c in 0..dims.width {
            let (y, x) = ((r as f64 + 0.5) / h, (c as f64 + 0.5) / w);
            data.extend([1.0, y, x, y * y, x * x, y * x].map(S::lit));
        }
    }
    Tensor::from_parts(vec![dims.frame_len(), FRAME_MOMENTS], data)
}

/// Raw 12-dimensional descriptor (before standardisation) on the tape.
pub fn descriptor_var<'t, S: Scalar>(x: &Var<'t, S>, dims: Dims) -> Result<Var<'t, S>, DiffError> {
    let tape = x.tape();
    let (l, n) = (dims.frames, dims.frame_len());
    let basis = tape.constant(moment_basis(dims))?;
    let raw = x.reshape(&[l, n])?.matmul(&basis)?.reshape(&[l * FRAME_MOMENTS])?;
    let column = |j: usize| raw.gather((0..l).map(|f| f * FRAME_MOMENTS + j).collect::<Vec<_>>());
    let (s0, s1, s2, s3, s4, s5) = (column(0)?, column(1)?, column(2)?, column(3)?, column(4)?, column(5)?);

    let den = s0.shift(S::lit(MASS_GUARD))?;
    let row_mean = s1.div(&den)?;
    let col_mean = s2.div(&den)?;
    // sum (r - rbar)^2 x / den == s3/den - rbar^2 (2 - s0/den)
    let two_minus_q = s0.div(&den)?.scale(-S::one())?.shift(S::lit(2.0))?;
    let central = |raw: &Var<'t, S>, a: &Var<'t, S>, b: &Var<'t, S>| raw.div(&den)?.sub(&a.mul(b)?.mul(&two_minus_q)?);
    let frame_features = [
        s0.scale(S::lit(1.0 / n as f64))?,
        row_mean,
        col_mean,
        central(&s3, &row_mean, &row_mean)?,
        central(&s4, &col_mean, &col_mean)?,
        central(&s5, &row_mean, &col_mean)?,
    ];

    let mut means = Vec::with_capacity(FRAME_MOMENTS);
    let mut stds = Vec::with_capacity(FRAME_MOMENTS);
    for f in &frame_features {
        let mean = f.mean()?;
        let centred = f.sub(&mean.broadcast(&[l])?)?;
        let std = centred.square()?.mean()?.shift(S::lit(STD_GUARD))?.sqrt()?;
        means.push(mean);
        stds.push(std);
    }
    means.extend(stds);
    tape.concat(&means)
}

fn descriptor(seq: &SilhouetteSequence) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let x = tape.constant(seq.to_tensor())?;
    Ok(descriptor_var(&x, seq.dims())?.value().data().to_vec())
}

/// Seeded projection of the standardised moment descriptor.
#[derive(Clone, Debug)]
pub struct MomentEmbedder<S: Scalar = f64> {
    seed: u64,
    dims: Dims,
    projection: Arc<Tensor<S>>,
    center: Arc<Tensor<S>>,
    inv_scale: Arc<Tensor<S>>,
}

impl<S: Scalar> MomentEmbedder<S> {
    pub fn seeded(seed: u64, dims: Dims, embed_dim: usize, norm: &FeatureNorm) -> Result<Self> {
        if embed_dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
        }
        let mut rng = SplitMix64::derive(seed, 0xE3B);
        let s = 1.0 / (FEATURE_DIM as f64).sqrt();
        let w = (0..embed_dim * FEATURE_DIM).map(|_| rng.symmetric(s)).collect();
        Self::from_projection(seed, dims, Tensor::new(vec![embed_dim, FEATURE_DIM], w)?.cast(), norm)
    }

    pub fn from_projection(seed: u64, dims: Dims, projection: Tensor<S>, norm: &FeatureNorm) -> Result<Self> {
        norm.validate()?;
        if projection.shape().len() != 2 || projection.shape()[1] != FEATURE_DIM {
            return Err(Error::Dimension {
                expected: vec![0, FEATURE_DIM],
                got: projection.shape().to_vec(),
            });
        }
        let center = Tensor::vector(norm.center.iter().map(|&v| S::lit(v)).collect())?;
        let inv_scale = Tensor::vector(norm.scale.iter().map(|&v| S::lit(1.0 / v)).collect())?;
        Ok(Self {
            seed,
            dims,
            projection: Arc::new(projection),
            center: Arc::new(center),
            inv_scale: Arc::new(inv_scale),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn embed_dim(&self) -> usize {
        self.projection.shape()[0]
    }

    pub fn projection(&self) -> &Tensor<S> {
        &self.projection
    }

    pub fn feature_norm(&self) -> FeatureNorm {
        FeatureNorm {
            center: self.center.data().iter().map(|v| v.as_f64()).collect(),
            scale: self.inv_scale.data().iter().map(|v| 1.0 / v.as_f64()).collect(),
        }
    }

    /// Differentiable embedding of a flat intensity vector.
    pub fn embed_var<'t>(&self, x: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        let tape = x.tape();
        let features = descriptor_var(x, self.dims)?;
        let center = tape.constant_shared(Arc::clone(&self.center))?;
        let inv_scale = tape.constant_shared(Arc::clone(&self.inv_scale))?;
        let projection = tape.constant_shared(Arc::clone(&self.projection))?;
        let standardised = features.sub(&center)?.mul(&inv_scale)?;
        projection.matvec(&standardised)?.normalize()
    }

    pub fn embed(&self, x: &SilhouetteSequence<S>) -> Result<Embedding<S>> {
        x.check_dims(self.dims)?;
        let tape = Tape::new();
        let xv = tape.constant(x.to_tensor())?;
        let e = self.embed_var(&xv)?.value();
        Ok(Embedding::from_unit(e.data().to_vec()))
    }
}
