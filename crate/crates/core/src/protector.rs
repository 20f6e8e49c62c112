//! The protection loop: invert the source, then refine the latent under the
//! unified objective through `phi = soft_binarize . decode . sample_from`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::diffusion::{Ddim, DiffusionConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::models::{FrozenModels, MomentEmbedder};
use crate::objective::{loss_total_var, Anchors, LossRecord, LossReport, LossWeights};
use crate::scalar::Scalar;
use crate::silhouette::{soft_binarize_var, BinarizationConfig, SilhouetteSequence};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    /// Denoise, decode, soft-binarize.
    #[default]
    Full,
    /// Optimise directly in the autoencoder latent.
    VaeOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && [self.lr, self.eps, self.weight_decay].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// Adaptive-moment optimiser with decoupled weight decay and bias
/// correction.
#[derive(Clone, Debug)]
pub struct AdamW<S: Scalar = f64> {
    cfg: AdamWConfig,
    m: Vec<S>,
    v: Vec<S>,
    step: i32,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(cfg: AdamWConfig, len: usize) -> Self {
        Self {
            cfg,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, z: &mut [S], grad: &[S]) {
        assert_eq!(z.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let c = &self.cfg;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let (one, lr, eps) = (S::one(), S::lit(c.lr), S::lit(c.eps));
        let decay = one - lr * S::lit(c.weight_decay);
        let bc1 = one - b1.powi(self.step);
        let bc2 = one - b2.powi(self.step);
        for i in 0..z.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            z[i] = z[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectionConfig {
    pub diffusion: DiffusionConfig,
    pub iterations: usize,
    pub optimizer: AdamWConfig,
    pub weights: LossWeights,
    pub binarization: BinarizationConfig,
    pub mode: PipelineMode,
    /// Keep the latent of every forward pass in the result.
    #[serde(default)]
    pub record_latents: bool,
}

impl Default for ProtectionConfig {
    fn default() -> Self {
        Self {
            diffusion: DiffusionConfig::default(),
            iterations: 50,
            optimizer: AdamWConfig::default(),
            weights: LossWeights::default(),
            binarization: BinarizationConfig::default(),
            mode: PipelineMode::Full,
            record_latents: false,
        }
    }
}

impl ProtectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.optimizer.validate()?;
        self.weights.validate()?;
        self.binarization.validate()
    }
}

#[derive(Clone, Debug)]
pub struct ProtectedResult<S: Scalar = f64> {
    pub sequence: SilhouetteSequence<S>,
    pub latent: Tensor<S>,
    pub trace: LossReport,
    /// Latents fed to each forward pass, when requested.
    pub latents: Option<Vec<Tensor<S>>>,
    pub wall_time_secs: f64,
    pub config: ProtectionConfig,
    pub model_seed: u64,
    pub surrogate_seeds: Vec<u64>,
}

/// Maps tape failures inside the loop to an abort naming the iteration.
fn at_iteration(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Diff(DiffError::NonFinite { op, index }) => Error::NumericalAbort {
            iteration,
            message: format!("non-finite value in {op} at index {index}"),
        },
        other => other,
    }
}

/// Frozen models plus one protection configuration.
pub struct Protector<'m, S: Scalar = f64> {
    models: &'m FrozenModels<S>,
    ddim: Ddim<S>,
    cfg: ProtectionConfig,
}

impl<'m, S: Scalar> Protector<'m, S> {
    pub fn new(models: &'m FrozenModels<S>, cfg: ProtectionConfig) -> Result<Self> {
        cfg.validate()?;
        let schedule = NoiseSchedule::linear(cfg.diffusion.steps)?;
        let ddim = Ddim::new(schedule, cfg.diffusion.variant, models.noise.clone())?;
        Ok(Self { models, ddim, cfg })
    }

    pub fn config(&self) -> &ProtectionConfig {
        &self.cfg
    }

    pub fn ddim(&self) -> &Ddim<S> {
        &self.ddim
    }

    /// Initial `z_adv`: the inverted source latent (full) or its encoding
    /// (vae-only).
    pub fn initial_latent(&self, x_src: &SilhouetteSequence<S>) -> Result<Tensor<S>> {
        let z0 = self.models.autoencoder.encode(x_src)?;
        match self.cfg.mode {
            PipelineMode::Full => self.ddim.invert_to(&z0, self.cfg.diffusion.t_init),
            PipelineMode::VaeOnly => Ok(z0),
        }
    }

    /// Differentiable `phi(z_adv)` on the tape, flat intensities out.
    pub fn phi_var<'t>(&self, z: &Var<'t, S>) -> Result<Var<'t, S>> {
        let z0 = match self.cfg.mode {
            PipelineMode::Full => self.ddim.sample_from_var(z, self.cfg.diffusion.t_init)?,
            PipelineMode::VaeOnly => *z,
        };
        let x = self.models.autoencoder.decode_var(&z0)?;
        Ok(soft_binarize_var(&x, self.cfg.binarization.tau)?)
    }

    pub fn phi(&self, z: &Tensor<S>) -> Result<SilhouetteSequence<S>> {
        let tape = Tape::new();
        let x = self.phi_var(&tape.constant(z.clone())?)?.value();
        SilhouetteSequence::from_tensor(self.models.dims, &x, Default::default())
    }

    /// Total loss at `z` and its gradient.
    pub fn objective_and_grad(
        &self,
        z: &Tensor<S>,
        anchors: &Anchors<S>,
        ensemble: &[MomentEmbedder<S>],
    ) -> Result<(LossRecord, Tensor<S>)> {
        let tape = Tape::new();
        let zv = tape.leaf(z.clone())?;
        let loss = loss_total_var(&self.phi_var(&zv)?, anchors, ensemble, &self.cfg.weights)?;
        let record = loss.record(0);
        let grads = tape.backward(loss.total)?;
        let g = grads.wrt(zv).expect("leaf on this tape").clone();
        Ok((record, g))
    }

    pub fn objective(&self, z: &Tensor<S>, anchors: &Anchors<S>, ensemble: &[MomentEmbedder<S>]) -> Result<LossRecord> {
        let tape = Tape::new();
        let zv = tape.constant(z.clone())?;
        Ok(loss_total_var(&self.phi_var(&zv)?, anchors, ensemble, &self.cfg.weights)?.record(0))
    }

    /// Runs the fixed-budget loop. The trace holds one record per forward
    /// pass: `iterations + 1` entries, the last one for the returned output.
    pub fn protect(
        &self,
        x_src: &SilhouetteSequence<S>,
        x_tar: &SilhouetteSequence<S>,
        ensemble: &[MomentEmbedder<S>],
    ) -> Result<ProtectedResult<S>> {
        let start = Instant::now();
        let anchors = Anchors::new(x_src, x_tar, ensemble)?;
        let mut z = self.initial_latent(x_src)?;
        let mut optimizer = AdamW::<S>::new(self.cfg.optimizer, z.len());
        let mut trace = Vec::with_capacity(self.cfg.iterations + 1);
        let mut latents = self.cfg.record_latents.then(Vec::new);
        let mut output = None;
        for it in 0..=self.cfg.iterations {
            let abort = at_iteration(it);
            if let Some(l) = latents.as_mut() {
                l.push(z.clone());
            }
            let tape = Tape::new();
            let zv = tape.leaf(z.clone()).map_err(|e| abort(e.into()))?;
            let x = self.phi_var(&zv).map_err(&abort)?;
            let loss = loss_total_var(&x, &anchors, ensemble, &self.cfg.weights).map_err(&abort)?;
            let record = loss.record(it);
            if !record.total.is_finite() {
                return Err(Error::NumericalAbort {
                    iteration: it,
                    message: format!("loss is {}", record.total),
                });
            }
            log::debug!(
                "iter {it}: total {:.6} imp {:.6} obf {:.6}",
                record.total,
                record.l_imp,
                record.l_obf
            );
            trace.push(record);
            if it == self.cfg.iterations {
                output = Some(x.value());
                break;
            }
            let grads = tape.backward(loss.total).map_err(|e| abort(e.into()))?;
            let g = grads.wrt(zv).expect("leaf on this tape");
            if !g.is_finite() {
                return Err(Error::NumericalAbort {
                    iteration: it,
                    message: "non-finite gradient".into(),
                });
            }
            let mut data = z.into_data();
            optimizer.step(&mut data, g.data());
            z = Tensor::vector(data).map_err(|e| abort(e.into()))?;
        }
        let mut meta = x_src.meta.clone();
        meta.target_identity = x_tar.meta.identity.clone();
        let x = output.expect("loop runs at least once");
        let sequence = SilhouetteSequence::from_tensor(self.models.dims, &x, meta)?;
        Ok(ProtectedResult {
            sequence,
            latent: z,
            trace,
            latents,
            wall_time_secs: start.elapsed().as_secs_f64(),
            config: self.cfg.clone(),
            model_seed: self.models.seed,
            surrogate_seeds: ensemble.iter().map(|e| e.seed()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain re-statement of the update recurrence.
    fn reference_adamw(z: &mut [f64], grads: &[Vec<f64>], c: AdamWConfig) {
        let n = z.len();
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            for i in 0..n {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mh = m[i] / (1.0 - c.beta1.powi(t));
                let vh = v[i] / (1.0 - c.beta2.powi(t));
                z[i] -= c.lr * c.weight_decay * z[i];
                z[i] -= c.lr * mh / (vh.sqrt() + c.eps);
            }
        }
    }

    #[test]
    fn first_step_is_normalised_gradient() {
        let c = AdamWConfig::default();
        let mut opt = AdamW::<f64>::new(c, 3);
        let mut z = vec![1.0, -2.0, 0.5];
        let g = [0.3, -4.0, 0.0];
        opt.step(&mut z, &g);
        for (i, (zi, z0)) in z.iter().zip([1.0, -2.0, 0.5]).enumerate() {
            let want = z0 - c.lr * g[i] / ((g[i] * g[i]).sqrt() + c.eps);
            assert!((zi - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut opt = AdamW::<f64>::new(AdamWConfig::default(), 3);
        let mut z = vec![1.0, 2.0, 3.0];
        for _ in 0..10 {
            opt.step(&mut z, &[0.0; 3]);
        }
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn five_steps_match_reference_recurrence() {
        let grads = vec![
            vec![0.5, -1.0, 2.0],
            vec![0.1, 0.3, -0.7],
            vec![-2.0, 0.0, 1.5],
            vec![1e-3, -5.0, 0.2],
            vec![0.4, 0.4, -0.4],
        ];
        for wd in [0.0, 0.01] {
            let c = AdamWConfig {
                weight_decay: wd,
                ..AdamWConfig::default()
            };
            let mut z = vec![0.2, -0.1, 1.0];
            let mut want = z.clone();
            let mut opt = AdamW::<f64>::new(c, 3);
            for g in &grads {
                opt.step(&mut z, g);
            }
            reference_adamw(&mut want, &grads, c);
            for (a, b) in z.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(ProtectionConfig::default().validate().is_ok());
        let mut c = ProtectionConfig::default();
        c.optimizer.lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = ProtectionConfig::default();
        c.diffusion.t_init = 30;
        assert!(c.validate().is_err());
    }
}
