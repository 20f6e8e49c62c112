use std::sync::Arc;

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::silhouette::{Dims, SequenceMeta, SilhouetteSequence};

/// Tolerance of the orthogonality check run at construction.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Exactly invertible encoder/decoder pair.
///
/// `encode(x) = Q logit(clamp(x, c, 1 - c))` and `decode(z) = sigmoid(Q^T z)`
/// with `Q = T (x) B`: an orthogonal `L x L` block `T` mixes frames and an
/// orthogonal `n x n` block `B` (n = H*W) mixes pixels, so every latent
/// coordinate touches the whole sequence. On the `L x n` logit grid `U`
/// this reads `Z = T U B^T` and `X = sigmoid(T^T Z B)`.
#[derive(Clone, Debug)]
pub struct AutoencoderPair<S: Scalar = f64> {
    dims: Dims,
    clamp: f64,
    temporal: Arc<Tensor<S>>,
    temporal_t: Arc<Tensor<S>>,
    block: Arc<Tensor<S>>,
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass, rows as vectors.
fn orthonormal_rows(mut m: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for i in 0..n {
        for _pass in 0..2 {
            for j in 0..i {
                let proj: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
                for k in 0..n {
                    m[i * n + k] -= proj * m[j * n + k];
                }
            }
        }
        let norm = (0..n).map(|k| m[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::InvalidParameter("degenerate mixing matrix draw".into()));
        }
        for k in 0..n {
            m[i * n + k] /= norm;
        }
    }
    Ok(m)
}

fn eye<S: Scalar>(n: usize) -> Tensor<S> {
    let mut data = vec![S::zero(); n * n];
    for i in 0..n {
        data[i * n + i] = S::one();
    }
    Tensor::from_parts(vec![n, n], data)
}

/// Largest entry of `|M^T M - I|` for a square `k x k` matrix.
fn orthogonality_error<S: Scalar>(m: &Tensor<S>, k: usize) -> Result<f64> {
    if m.shape() != [k, k] {
        return Err(Error::Dimension {
            expected: vec![k, k],
            got: m.shape().to_vec(),
        });
    }
    let d = m.data();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in i..k {
            let dot = (0..k).fold(S::zero(), |acc, r| acc + d[r * k + i] * d[r * k + j]);
            let target = if i == j { S::one() } else { S::zero() };
            worst = worst.max((dot - target).abs().as_f64());
        }
    }
    Ok(worst)
}

impl<S: Scalar> AutoencoderPair<S> {
    /// Seeded orthogonal mixing.
    pub fn seeded(dims: Dims, clamp: f64, seed: u64) -> Result<Self> {
        let (l, n) = (dims.frames, dims.frame_len());
        let mut rng = SplitMix64::derive(seed, 0xAE);
        let mut draw = |k: usize| orthonormal_rows((0..k * k).map(|_| rng.symmetric(1.0)).collect(), k);
        let block = draw(n)?;
        let temporal = draw(l)?;
        Self::from_blocks(
            dims,
            clamp,
            Tensor::new(vec![l, l], temporal)?.cast(),
            Tensor::new(vec![n, n], block)?.cast(),
        )
    }

    /// `Q = I`: the latent is the per-pixel logit.
    pub fn identity(dims: Dims, clamp: f64) -> Result<Self> {
        Self::from_blocks(dims, clamp, eye(dims.frames), eye(dims.frame_len()))
    }

    /// Wraps given blocks after checking `T^T T = I` and `B^T B = I`; the
    /// combined bound covers `Q^T Q = I` entrywise.
    pub fn from_blocks(dims: Dims, clamp: f64, temporal: Tensor<S>, block: Tensor<S>) -> Result<Self> {
        if !(clamp > 0.0 && clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clamp margin must lie in (0, 0.5), got {clamp}"
            )));
        }
        let a = orthogonality_error(&temporal, dims.frames)?;
        let c = orthogonality_error(&block, dims.frame_len())?;
        let err = a + c + a * c;
        if err > ORTHOGONALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixing is not orthogonal: error {err:e}"
            )));
        }
        let l = dims.frames;
        let t = temporal.data();
        let transposed = (0..l * l).map(|k| t[(k % l) * l + k / l]).collect();
        Ok(Self {
            dims,
            clamp,
            temporal_t: Arc::new(Tensor::new(vec![l, l], transposed)?),
            temporal: Arc::new(temporal),
            block: Arc::new(block),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn latent_len(&self) -> usize {
        self.dims.numel()
    }

    /// Pixel-mixing block `B`.
    pub fn block(&self) -> &Tensor<S> {
        &self.block
    }

    /// Frame-mixing block `T`.
    pub fn temporal(&self) -> &Tensor<S> {
        &self.temporal
    }

    pub fn encode(&self, x: &SilhouetteSequence<S>) -> Result<Tensor<S>> {
        x.check_dims(self.dims)?;
        let n = self.dims.frame_len();
        let (lo, hi) = (S::lit(self.clamp), S::lit(1.0 - self.clamp));
        let l = self.dims.frames;
        let (b, t) = (self.block.data(), self.temporal.data());
        // Y = U B^T, then Z = T Y.
        let mut y = Vec::with_capacity(self.latent_len());
        for frame in x.frames() {
            let u: Vec<S> = frame.iter().map(|&v| v.max(lo).min(hi).logit()).collect();
            for i in 0..n {
                y.push(
                    b[i * n..(i + 1) * n]
                        .iter()
                        .zip(&u)
                        .fold(S::zero(), |acc, (&q, &uv)| acc + q * uv),
                );
            }
        }
        let mut z = vec![S::zero(); self.latent_len()];
        for f in 0..l {
            for g in 0..l {
                let w = t[f * l + g];
                for i in 0..n {
                    z[f * n + i] = z[f * n + i] + w * y[g * n + i];
                }
            }
        }
        Ok(Tensor::vector(z)?)
    }

    /// Differentiable decoder on a flat latent; returns flat intensities.
    pub fn decode_var<'t>(&self, z: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        let (l, n) = (self.dims.frames, self.dims.frame_len());
        let tape = z.tape();
        let block = tape.constant_shared(Arc::clone(&self.block))?;
        let temporal_t = tape.constant_shared(Arc::clone(&self.temporal_t))?;
        temporal_t
            .matmul(&z.reshape(&[l, n])?)?
            .matmul(&block)?
            .reshape(&[l * n])?
            .sigmoid()
    }

    pub fn decode(&self, z: &Tensor<S>) -> Result<SilhouetteSequence<S>> {
        if z.len() != self.latent_len() {
            return Err(Error::Dimension {
                expected: vec![self.latent_len()],
                got: z.shape().to_vec(),
            });
        }
        let tape = Tape::new();
        let zv = tape.constant(z.reshaped(vec![z.len()])?)?;
        let x = self.decode_var(&zv)?.value();
        SilhouetteSequence::from_tensor(self.dims, &x, SequenceMeta::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::silhouette::{synth_walker, WalkerIdentity};

    fn walker_seq() -> SilhouetteSequence {
        let id = WalkerIdentity {
            torso_width: 0.25,
            torso_height: 0.4,
            limb_length: 0.4,
            stride_frequency: 0.125,
            phase: 1.0,
            tilt: -0.2,
        };
        synth_walker(&id, Dims::DESK, 3).unwrap()
    }

    #[test]
    fn half_gray_encodes_to_zero_under_identity() {
        let ae = AutoencoderPair::<f64>::identity(Dims::new(2, 3, 3), 0.01).unwrap();
        let x = SilhouetteSequence::filled(Dims::new(2, 3, 3), 0.5).unwrap();
        assert!(ae.encode(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_latent_decodes_to_half() {
        let ae = AutoencoderPair::<f64>::seeded(Dims::new(2, 4, 4), 0.01, 5).unwrap();
        let x = ae.decode(&Tensor::zeros(&[32])).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn roundtrip_on_walker() {
        let ae = AutoencoderPair::<f64>::seeded(Dims::DESK, 0.01, 17).unwrap();
        let x = walker_seq();
        let back = ae.decode(&ae.encode(&x).unwrap()).unwrap();
        let clamped: Vec<f64> = x.data().iter().map(|v| v.clamp(0.01, 0.99)).collect();
        let err = back
            .data()
            .iter()
            .zip(&clamped)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max abs error {err}");
    }

    #[test]
    fn all_ones_hits_clamp_boundary() {
        let dims = Dims::new(1, 4, 4);
        let ae = AutoencoderPair::<f64>::seeded(dims, 0.01, 2).unwrap();
        let z = ae.encode(&SilhouetteSequence::filled(dims, 1.0).unwrap()).unwrap();
        let top = (0.99f64 / 0.01).ln();
        let (b, t) = (ae.block().data(), ae.temporal().data()[0]);
        for (i, &zi) in z.data().iter().enumerate() {
            let expect: f64 = t * b[i * 16..(i + 1) * 16].iter().sum::<f64>() * top;
            assert!((zi - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_dims_and_lengths() {
        let ae = AutoencoderPair::<f64>::identity(Dims::new(2, 2, 2), 0.01).unwrap();
        let x = SilhouetteSequence::filled(Dims::new(3, 2, 2), 0.2).unwrap();
        assert!(matches!(ae.encode(&x), Err(Error::Dimension { .. })));
        assert!(matches!(ae.decode(&Tensor::zeros(&[5])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rejects_non_orthogonal_block() {
        let dims = Dims::new(1, 1, 2);
        let block = Tensor::new(vec![2, 2], vec![1.0, 0.1, 0.0, 1.0]).unwrap();
        assert!(AutoencoderPair::from_blocks(dims, 0.01, eye(1), block.clone()).is_err());
        let dims = Dims::new(2, 1, 1);
        assert!(AutoencoderPair::from_blocks(dims, 0.01, block, eye(1)).is_err());
    }

    #[test]
    fn decode_gradient_matches_finite_differences() {
        let dims = Dims::new(2, 3, 3);
        let ae = AutoencoderPair::<f64>::seeded(dims, 0.01, 8).unwrap();
        let mut rng = SplitMix64::new(4);
        let z0: Vec<f64> = (0..18).map(|_| rng.symmetric(2.0)).collect();
        let f = |z: &[f64]| {
            let tape = Tape::new();
            let zv = tape.constant(Tensor::vector(z.to_vec()).unwrap()).unwrap();
            ae.decode_var(&zv).unwrap().mean().unwrap().item()
        };
        let tape = Tape::new();
        let zv = tape.leaf(Tensor::vector(z0.clone()).unwrap()).unwrap();
        let g = tape.backward(ae.decode_var(&zv).unwrap().mean().unwrap()).unwrap();
        let g = g.wrt(zv).unwrap();
        for i in 0..18 {
            let (mut up, mut dn) = (z0.clone(), z0.clone());
            up[i] += 1e-5;
            dn[i] -= 1e-5;
            let fd = (f(&up) - f(&dn)) / 2e-5;
            let a = g.data()[i];
            assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8) < 1e-5);
        }
    }
}
