use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    #[default]
    Seeded,
    /// Predicts zero noise everywhere.
    Null,
}

/// Frozen noise-prediction network:
/// `eps(z, t) = W2 tanh(W1 [z; onehot(t)] + b1) + b2`.
#[derive(Clone, Debug)]
pub struct NoisePredictor<S: Scalar = f64> {
    mode: PriorMode,
    latent_len: usize,
    steps: usize,
    w1: Arc<Tensor<S>>,
    b1: Arc<Tensor<S>>,
    w2: Arc<Tensor<S>>,
    b2: Arc<Tensor<S>>,
}

fn uniform_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, fan_in: usize) -> Vec<f64> {
    let s = 1.0 / (fan_in as f64).sqrt();
    (0..rows * cols).map(|_| rng.symmetric(s)).collect()
}

impl<S: Scalar> NoisePredictor<S> {
    /// Draws all weights from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn seeded(latent_len: usize, steps: usize, hidden: usize, seed: u64, mode: PriorMode) -> Result<Self> {
        if hidden == 0 || latent_len == 0 {
            return Err(Error::InvalidParameter("network sizes must be positive".into()));
        }
        let mut rng = SplitMix64::derive(seed, 0xE95);
        let fan1 = latent_len + steps + 1;
        let w1 = uniform_matrix(&mut rng, hidden, fan1, fan1);
        let b1 = uniform_matrix(&mut rng, hidden, 1, fan1);
        let w2 = uniform_matrix(&mut rng, latent_len, hidden, hidden);
        let b2 = uniform_matrix(&mut rng, latent_len, 1, hidden);
        Self::from_weights(
            mode,
            latent_len,
            steps,
            [
                Tensor::new(vec![hidden, fan1], w1)?.cast(),
                Tensor::new(vec![hidden], b1)?.cast(),
                Tensor::new(vec![latent_len, hidden], w2)?.cast(),
                Tensor::new(vec![latent_len], b2)?.cast(),
            ],
        )
    }

    pub fn from_weights(mode: PriorMode, latent_len: usize, steps: usize, weights: [Tensor<S>; 4]) -> Result<Self> {
        let [w1, b1, w2, b2] = weights;
        let hidden = b1.len();
        let expected = [
            vec![hidden, latent_len + steps + 1],
            vec![hidden],
            vec![latent_len, hidden],
            vec![latent_len],
        ];
        for (t, e) in [&w1, &b1, &w2, &b2].into_iter().zip(&expected) {
            if t.shape() != e.as_slice() {
                return Err(Error::Dimension {
                    expected: e.clone(),
                    got: t.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            mode,
            latent_len,
            steps,
            w1: Arc::new(w1),
            b1: Arc::new(b1),
            w2: Arc::new(w2),
            b2: Arc::new(b2),
        })
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: PriorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn latent_len(&self) -> usize {
        self.latent_len
    }

    pub fn weights(&self) -> [&Tensor<S>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn check(&self, len: usize, t: usize) -> Result<()> {
        if t > self.steps {
            return Err(Error::StepOutOfRange {
                step: t,
                lo: 0,
                hi: self.steps,
            });
        }
        if len != self.latent_len {
            return Err(Error::Dimension {
                expected: vec![self.latent_len],
                got: vec![len],
            });
        }
        Ok(())
    }

    /// Differentiable prediction for step `t` in `0..=T`.
    pub fn predict_var<'t>(&self, z: &Var<'t, S>, t: usize) -> Result<Var<'t, S>> {
        self.check(z.value().len(), t)?;
        let tape = z.tape();
        if self.mode == PriorMode::Null {
            return Ok(tape.constant(Tensor::zeros(&[self.latent_len]))?);
        }
        let mut onehot = vec![S::zero(); self.steps + 1];
        onehot[t] = S::one();
        let input = tape.concat(&[*z, tape.constant(Tensor::vector(onehot)?)?])?;
        let w1 = tape.constant_shared(Arc::clone(&self.w1))?;
        let b1 = tape.constant_shared(Arc::clone(&self.b1))?;
        let w2 = tape.constant_shared(Arc::clone(&self.w2))?;
        let b2 = tape.constant_shared(Arc::clone(&self.b2))?;
        let hidden = w1.matvec(&input)?.add(&b1)?.tanh()?;
        Ok(w2.matvec(&hidden)?.add(&b2)?)
    }

    pub fn predict(&self, z: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let zv = tape.constant(z.clone())?;
        let out = self.predict_var(&zv, t)?.value();
        Ok(out.as_ref().clone())
    }
}
