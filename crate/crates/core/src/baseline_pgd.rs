//! Contour-localised projected-gradient baseline with strictly binary
//! iterates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffcore::Tape;
use crate::error::{Error, Result};
use crate::models::MomentEmbedder;
use crate::objective::{loss_total_var, Anchors, LossReport, LossWeights};
use crate::scalar::Scalar;
use crate::silhouette::{hard_binarize, Dims, SilhouetteSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub iterations: usize,
    /// Signed step applied to masked pixels.
    pub step: f64,
    pub momentum: f64,
    /// Per-pixel l-infinity budget around the source.
    pub budget: f64,
    pub weights: LossWeights,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            step: 0.25,
            momentum: 0.9,
            budget: 1.0,
            weights: LossWeights::default(),
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "budget must lie in (0, 1], got {}",
                self.budget
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        self.weights.validate()
    }
}

/// Boundary pixels of a binary sequence: `dilate(x) XOR erode(x)` per frame
/// with the 3x3 cross. Outside the frame counts as background, so a full
/// frame keeps its border ring.
pub fn contour_mask<S: Scalar>(x: &SilhouetteSequence<S>) -> Result<Vec<bool>> {
    if !x.is_binary() {
        return Err(Error::InvalidInput(
            "contour mask needs a strictly binary sequence".into(),
        ));
    }
    let Dims { frames, height, width } = x.dims();
    let on = |f: usize, r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < height
            && (c as usize) < width
            && x.get(f, r as usize, c as usize) == S::one()
    };
    let mut mask = Vec::with_capacity(x.dims().numel());
    for f in 0..frames {
        for r in 0..height as isize {
            for c in 0..width as isize {
                let cross = [(r, c), (r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)].map(|(i, j)| on(f, i, j));
                let dilated = cross.iter().any(|&v| v);
                let eroded = cross.iter().all(|&v| v);
                mask.push(dilated != eroded);
            }
        }
    }
    Ok(mask)
}

#[derive(Clone, Debug)]
pub struct PgdResult<S: Scalar = f64> {
    pub sequence: SilhouetteSequence<S>,
    /// One record per evaluated iterate, `iterations + 1` in total.
    pub trace: LossReport,
    /// Union of every contour mask that was allowed to move.
    pub mask_union: Vec<bool>,
    pub wall_time_secs: f64,
    pub config: PgdConfig,
    pub surrogate_seeds: Vec<u64>,
}

fn within_budget<S: Scalar>(
    x: &SilhouetteSequence<S>,
    original: &SilhouetteSequence<S>,
    budget: S,
) -> Result<SilhouetteSequence<S>> {
    let data = x
        .data()
        .iter()
        .zip(original.data())
        .map(|(&v, &o)| if (v - o).abs() > budget { o } else { v })
        .collect();
    SilhouetteSequence::new(x.dims(), data)
}

/// Method tag written next to PGD outputs.
pub const METHOD_TAG: &str = "pgd";

/// Momentum PGD on boundary pixels. A continuous accumulator carries the
/// signed steps; the loss is always evaluated on its hard binarization and
/// the gradient passes straight through that threshold.
pub fn pgd_protect<S: Scalar>(
    x_src: &SilhouetteSequence<S>,
    x_tar: &SilhouetteSequence<S>,
    cfg: &PgdConfig,
    ensemble: &[MomentEmbedder<S>],
) -> Result<PgdResult<S>> {
    cfg.validate()?;
    let start = Instant::now();
    let original = hard_binarize(x_src);
    let anchors = Anchors::new(&original, x_tar, ensemble)?;
    let n = original.data().len();
    let (step, mu, budget) = (S::lit(cfg.step), S::lit(cfg.momentum), S::lit(cfg.budget));

    let mut acc = original.data().to_vec();
    let mut current = original.clone();
    let mut velocity = vec![S::zero(); n];
    let mut mask_union = vec![false; n];
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..=cfg.iterations {
        let tape = Tape::new();
        let xv = tape.leaf(current.to_tensor())?;
        let loss = loss_total_var(&xv, &anchors, ensemble, &cfg.weights)?;
        trace.push(loss.record(it));
        if it == cfg.iterations {
            break;
        }
        let grads = tape.backward(loss.total)?;
        let g = grads.wrt(xv).expect("leaf on this tape");
        if !g.is_finite() {
            return Err(Error::NumericalAbort {
                iteration: it,
                message: "non-finite gradient".into(),
            });
        }
        let l1 = g.data().iter().fold(S::zero(), |a, v| a + v.abs());
        let inv = if l1 > S::zero() { S::one() / l1 } else { S::zero() };
        let mask = contour_mask(&current)?;
        for i in 0..n {
            velocity[i] = mu * velocity[i] + g.data()[i] * inv;
            if mask[i] {
                mask_union[i] = true;
                let dir = if velocity[i] > S::zero() {
                    S::one()
                } else if velocity[i] < S::zero() {
                    -S::one()
                } else {
                    S::zero()
                };
                acc[i] = acc[i] - step * dir;
            }
            let o = original.data()[i];
            acc[i] = acc[i].max(o - budget).min(o + budget).max(S::zero()).min(S::one());
        }
        current = hard_binarize(&SilhouetteSequence::new(original.dims(), acc.clone())?);
        // A flip moves a pixel by 1; below a unit budget flips are reverted.
        if cfg.budget < 1.0 {
            current = within_budget(&current, &original, budget)?;
        }
    }
    let mut meta = x_src.meta.clone();
    meta.target_identity = x_tar.meta.identity.clone();
    Ok(PgdResult {
        sequence: current.with_meta(meta),
        trace,
        mask_union,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: *cfg,
        surrogate_seeds: ensemble.iter().map(|e| e.seed()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(h: usize, w: usize, on: &[(usize, usize)]) -> SilhouetteSequence {
        let mut data = vec![0.0; h * w];
        for &(r, c) in on {
            data[r * w + c] = 1.0;
        }
        SilhouetteSequence::new(Dims::new(1, h, w), data).unwrap()
    }

    #[test]
    fn empty_frame_has_empty_mask() {
        assert!(contour_mask(&frame(4, 5, &[])).unwrap().iter().all(|&m| !m));
    }

    #[test]
    fn non_binary_input_is_rejected() {
        let x = SilhouetteSequence::filled(Dims::new(1, 2, 2), 0.5).unwrap();
        assert!(contour_mask(&x).is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(PgdConfig::default().validate().is_ok());
        for bad in [
            PgdConfig {
                budget: 0.0,
                ..Default::default()
            },
            PgdConfig {
                budget: 1.5,
                ..Default::default()
            },
            PgdConfig {
                step: 0.0,
                ..Default::default()
            },
            PgdConfig {
                momentum: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
