//! Deterministic DDIM (eta = 0): noise schedule, inversion to an
//! intermediate step and sampling back to step 0.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::NoisePredictor;
use crate::scalar::Scalar;

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// Cumulative coefficients `alpha_bar[0..=T]`, `alpha_bar[0] = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear betas from 1e-4 to 0.02 over `steps` steps.
    pub fn linear(steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidParameter("diffusion needs at least one step".into()));
        }
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        let mut prod = 1.0;
        for t in 1..=steps {
            let frac = if steps == 1 {
                0.0
            } else {
                (t - 1) as f64 / (steps - 1) as f64
            };
            prod *= 1.0 - (BETA_START + (BETA_END - BETA_START) * frac);
            alpha_bar.push(prod);
        }
        Ok(Self { alpha_bar })
    }

    /// Arbitrary coefficients without the monotonicity check, for probing
    /// degenerate schedules.
    pub fn from_alpha_bar_unchecked(alpha_bar: Vec<f64>) -> Self {
        Self { alpha_bar }
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// `(a, b)` with `z_to = a z_from + b eps(z_from, from)`.
    fn coefficients(&self, from: usize, to: usize, variant: FormulaVariant) -> (f64, f64) {
        let (af, at) = (self.alpha_bar[from], self.alpha_bar[to]);
        let a = (at / af).sqrt();
        let diff = (1.0 / at - 1.0).sqrt() - (1.0 / af - 1.0).sqrt();
        let b = match variant {
            FormulaVariant::Standard => at.sqrt() * diff,
            FormulaVariant::Unscaled => diff,
        };
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaVariant {
    /// Textbook deterministic DDIM update.
    #[default]
    Standard,
    /// Drops the `sqrt(alpha_bar)` factor on the noise term.
    Unscaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub steps: usize,
    pub t_init: usize,
    pub variant: FormulaVariant,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            t_init: 3,
            variant: FormulaVariant::Standard,
        }
    }
}

impl DiffusionConfig {
    /// `t_init = 0` is accepted and means "no denoising".
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 || self.t_init > self.steps {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= t_init <= T with T >= 1, got t_init={} T={}",
                self.t_init, self.steps
            )));
        }
        Ok(())
    }
}

/// DDIM sampler bound to a frozen noise predictor.
#[derive(Clone, Debug)]
pub struct Ddim<S: Scalar = f64> {
    schedule: NoiseSchedule,
    variant: FormulaVariant,
    net: NoisePredictor<S>,
}

impl<S: Scalar> Ddim<S> {
    pub fn new(schedule: NoiseSchedule, variant: FormulaVariant, net: NoisePredictor<S>) -> Result<Self> {
        if net.steps() != schedule.steps() {
            return Err(Error::InvalidParameter(format!(
                "noise predictor conditioned on {} steps, schedule has {}",
                net.steps(),
                schedule.steps()
            )));
        }
        Ok(Self { schedule, variant, net })
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn variant(&self) -> FormulaVariant {
        self.variant
    }

    pub fn net(&self) -> &NoisePredictor<S> {
        &self.net
    }

    fn range_check(&self, step: usize, lo: usize, hi: usize) -> Result<()> {
        if step < lo || step > hi {
            return Err(Error::StepOutOfRange { step, lo, hi });
        }
        Ok(())
    }

    fn step_var<'t>(&self, z: &Var<'t, S>, from: usize, to: usize) -> Result<Var<'t, S>> {
        let (a, b) = self.schedule.coefficients(from, to, self.variant);
        let eps = self.net.predict_var(z, from)?;
        Ok(z.scale(S::lit(a))?.add(&eps.scale(S::lit(b))?)?)
    }

    /// `z_t -> z_{t+1}` using `eps(z_t, t)`.
    pub fn invert_step(&self, z: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let steps = self.schedule.steps();
        if t >= steps {
            return Err(Error::StepOutOfRange {
                step: t,
                lo: 0,
                hi: steps - 1,
            });
        }
        let tape = Tape::new();
        let zv = tape.constant(z.clone())?;
        Ok(self.step_var(&zv, t, t + 1)?.value().as_ref().clone())
    }

    /// `z_t -> z_{t-1}` using `eps(z_t, t)`; differentiable.
    pub fn sample_step_var<'t>(&self, z: &Var<'t, S>, t: usize) -> Result<Var<'t, S>> {
        self.range_check(t, 1, self.schedule.steps())?;
        self.step_var(z, t, t - 1)
    }

    pub fn sample_step(&self, z: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let zv = tape.constant(z.clone())?;
        Ok(self.sample_step_var(&zv, t)?.value().as_ref().clone())
    }

    /// Runs `invert_step` for `0, 1, ..., t_init - 1`.
    pub fn invert_to(&self, z0: &Tensor<S>, t_init: usize) -> Result<Tensor<S>> {
        self.range_check(t_init, 0, self.schedule.steps())?;
        let mut z = z0.clone();
        for t in 0..t_init {
            z = self.invert_step(&z, t)?;
        }
        Ok(z)
    }

    /// Runs `sample_step` for `t_init, ..., 1`; differentiable.
    pub fn sample_from_var<'t>(&self, z: &Var<'t, S>, t_init: usize) -> Result<Var<'t, S>> {
        self.range_check(t_init, 0, self.schedule.steps())?;
        let mut z = *z;
        for t in (1..=t_init).rev() {
            z = self.sample_step_var(&z, t)?;
        }
        Ok(z)
    }

    pub fn sample_from(&self, z: &Tensor<S>, t_init: usize) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let zv = tape.constant(z.clone())?;
        Ok(self.sample_from_var(&zv, t_init)?.value().as_ref().clone())
    }
}
