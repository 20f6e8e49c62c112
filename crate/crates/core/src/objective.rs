//! Impersonation pull, obfuscation push and their weighted sum over the
//! surrogate ensemble.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Tensor, Var};
use crate::error::{Error, Result};
use crate::models::{Embedding, MomentEmbedder};
use crate::scalar::Scalar;
use crate::silhouette::SilhouetteSequence;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub imp: f64,
    pub obf: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { imp: 1.5, obf: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_imp", self.imp), ("lambda_obf", self.obf)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for w in self.warnings() {
            log::warn!("{w}");
        }
        Ok(())
    }

    /// Values outside the recommended ranges (imp in [1, 2], obf in [0, 0.3]).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1.0..=2.0).contains(&self.imp) {
            out.push(format!(
                "lambda_imp = {} is outside the recommended range [1, 2]",
                self.imp
            ));
        }
        if !(0.0..=0.3).contains(&self.obf) {
            out.push(format!(
                "lambda_obf = {} is outside the recommended range [0, 0.3]",
                self.obf
            ));
        }
        out
    }
}

/// Dot product of unit embeddings, clamped against rounding overshoot.
pub fn cosine<S: Scalar>(a: &Embedding<S>, b: &Embedding<S>) -> S {
    let dot = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(S::zero(), |acc, (&x, &y)| acc + x * y);
    dot.max(-S::one()).min(S::one())
}

fn check_ensemble<S: Scalar>(ensemble: &[MomentEmbedder<S>]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter("empty surrogate ensemble".into()));
    }
    Ok(())
}

fn mean<S: Scalar>(v: impl Iterator<Item = S>, k: usize) -> S {
    v.fold(S::zero(), |a, b| a + b) / S::from_count(k)
}

/// Impersonation loss `(1/K) sum_k (1 - cos(e_k(pro), e_k(tar)))`.
pub fn loss_imp<S: Scalar>(
    x_pro: &SilhouetteSequence<S>,
    x_tar: &SilhouetteSequence<S>,
    ensemble: &[MomentEmbedder<S>],
) -> Result<S> {
    check_ensemble(ensemble)?;
    let terms = ensemble
        .iter()
        .map(|e| Ok(S::one() - cosine(&e.embed(x_pro)?, &e.embed(x_tar)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(terms.into_iter(), ensemble.len()))
}

/// Obfuscation loss `(1/K) sum_k cos(e_k(pro), e_k(src))`.
pub fn loss_obf<S: Scalar>(
    x_pro: &SilhouetteSequence<S>,
    x_src: &SilhouetteSequence<S>,
    ensemble: &[MomentEmbedder<S>],
) -> Result<S> {
    check_ensemble(ensemble)?;
    let terms = ensemble
        .iter()
        .map(|e| Ok(cosine(&e.embed(x_pro)?, &e.embed(x_src)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(terms.into_iter(), ensemble.len()))
}

/// One iteration of the loss trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub l_imp: f64,
    pub l_obf: f64,
    pub total: f64,
    pub cos_source: Vec<f64>,
    pub cos_target: Vec<f64>,
}

pub type LossReport = Vec<LossRecord>;

/// Frozen source and target embeddings, one pair per surrogate.
#[derive(Clone, Debug)]
pub struct Anchors<S: Scalar = f64> {
    source: Vec<Arc<Tensor<S>>>,
    target: Vec<Arc<Tensor<S>>>,
}

impl<S: Scalar> Anchors<S> {
    pub fn new(
        x_src: &SilhouetteSequence<S>,
        x_tar: &SilhouetteSequence<S>,
        ensemble: &[MomentEmbedder<S>],
    ) -> Result<Self> {
        check_ensemble(ensemble)?;
        let embed = |x: &SilhouetteSequence<S>| -> Result<Vec<Arc<Tensor<S>>>> {
            ensemble
                .iter()
                .map(|e| Ok(Arc::new(Tensor::vector(e.embed(x)?.as_slice().to_vec())?)))
                .collect()
        };
        Ok(Self {
            source: embed(x_src)?,
            target: embed(x_tar)?,
        })
    }
}

/// Differentiable loss terms of one forward pass.
pub struct LossVars<'t, S: Scalar> {
    pub l_imp: Var<'t, S>,
    pub l_obf: Var<'t, S>,
    pub total: Var<'t, S>,
    pub cos_source: Vec<S>,
    pub cos_target: Vec<S>,
}

impl<S: Scalar> LossVars<'_, S> {
    pub fn record(&self, iteration: usize) -> LossRecord {
        LossRecord {
            iteration,
            l_imp: self.l_imp.item().as_f64(),
            l_obf: self.l_obf.item().as_f64(),
            total: self.total.item().as_f64(),
            cos_source: self.cos_source.iter().map(|c| c.as_f64()).collect(),
            cos_target: self.cos_target.iter().map(|c| c.as_f64()).collect(),
        }
    }
}

/// Weighted total loss on a flat protected-intensity variable. The clamp of [`cosine`]
/// is applied to reported similarities only; the differentiable path uses
/// the raw dot product, which agrees away from +-1.
pub fn loss_total_var<'t, S: Scalar>(
    x_pro: &Var<'t, S>,
    anchors: &Anchors<S>,
    ensemble: &[MomentEmbedder<S>],
    weights: &LossWeights,
) -> Result<LossVars<'t, S>> {
    check_ensemble(ensemble)?;
    if anchors.source.len() != ensemble.len() {
        return Err(Error::InvalidInput(
            "anchors were built for a different ensemble".into(),
        ));
    }
    let tape = x_pro.tape();
    let k = S::from_count(ensemble.len());
    let (mut sum_tar, mut sum_src) = (None::<Var<'t, S>>, None::<Var<'t, S>>);
    let (mut cos_source, mut cos_target) = (Vec::new(), Vec::new());
    for ((e, src), tar) in ensemble.iter().zip(&anchors.source).zip(&anchors.target) {
        let emb = e.embed_var(x_pro)?;
        let ct = emb.dot(&tape.constant_shared(Arc::clone(tar))?)?;
        let cs = emb.dot(&tape.constant_shared(Arc::clone(src))?)?;
        let clamp = |v: S| v.max(-S::one()).min(S::one());
        cos_target.push(clamp(ct.item()));
        cos_source.push(clamp(cs.item()));
        sum_tar = Some(match sum_tar {
            Some(acc) => acc.add(&ct)?,
            None => ct,
        });
        sum_src = Some(match sum_src {
            Some(acc) => acc.add(&cs)?,
            None => cs,
        });
    }
    let (sum_tar, sum_src) = (sum_tar.expect("non-empty"), sum_src.expect("non-empty"));
    let l_imp = sum_tar.scale(-S::one() / k)?.shift(S::one())?;
    let l_obf = sum_src.scale(S::one() / k)?;
    let total = l_imp
        .scale(S::lit(weights.imp))?
        .add(&l_obf.scale(S::lit(weights.obf))?)?;
    Ok(LossVars {
        l_imp,
        l_obf,
        total,
        cos_source,
        cos_target,
    })
}

/// Value-level [`loss_total_var`].
pub fn loss_total<S: Scalar>(
    x_pro: &SilhouetteSequence<S>,
    x_src: &SilhouetteSequence<S>,
    x_tar: &SilhouetteSequence<S>,
    weights: &LossWeights,
    ensemble: &[MomentEmbedder<S>],
) -> Result<LossRecord> {
    let anchors = Anchors::new(x_src, x_tar, ensemble)?;
    let tape = crate::diffcore::Tape::new();
    let xv = tape.constant(x_pro.to_tensor())?;
    Ok(loss_total_var(&xv, &anchors, ensemble, weights)?.record(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FeatureNorm;
    use crate::silhouette::{synth_walker, Dims, WalkerIdentity};

    fn unit(v: Vec<f64>) -> Embedding {
        Embedding::from_unit(v)
    }

    fn walker(limb: f64, tilt: f64) -> SilhouetteSequence {
        let id = WalkerIdentity {
            torso_width: 0.22,
            torso_height: 0.38,
            limb_length: limb,
            stride_frequency: 0.12,
            phase: 0.3,
            tilt,
        };
        synth_walker(&id, Dims::DESK, 1).unwrap()
    }

    fn ensemble(seeds: &[u64]) -> Vec<MomentEmbedder> {
        let norm = FeatureNorm::calibrate(Dims::DESK).unwrap();
        seeds
            .iter()
            .map(|&s| MomentEmbedder::seeded(s, Dims::DESK, 32, &norm).unwrap())
            .collect()
    }

    #[test]
    fn cosine_basics() {
        let a = unit(vec![0.6, 0.8]);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&unit(vec![1.0, 0.0]), &unit(vec![0.0, 1.0])), 0.0);
        assert_eq!(cosine(&a, &unit(vec![-0.6, -0.8])), -1.0);
        let over = Embedding::from_unit(vec![1.0 + 1e-15, 0.0]);
        assert!(cosine(&over, &over) <= 1.0);
    }

    #[test]
    fn identical_inputs() {
        let ens = ensemble(&[11, 12]);
        let (a, b) = (walker(0.32, 0.2), walker(0.42, -0.2));
        // The 1e-12 norm guard leaves |e|^2 = 1 - 1e-12/|v|^2, a bias well under 1e-10.
        assert!(loss_imp(&a, &a, &ens).unwrap().abs() < 1e-10);
        assert!((loss_obf(&a, &a, &ens).unwrap() - 1.0).abs() < 1e-10);
        let r = loss_total(&b, &a, &b, &LossWeights::default(), &ens).unwrap();
        let cross = loss_obf(&b, &a, &ens).unwrap();
        assert!((r.total - 0.1 * cross).abs() < 1e-10);
    }

    #[test]
    fn decomposition_and_weight_zeroing() {
        let ens = ensemble(&[11, 12]);
        let (src, tar, pro) = (walker(0.32, 0.2), walker(0.42, -0.2), walker(0.37, 0.1));
        let w = LossWeights { imp: 1.5, obf: 0.0 };
        let r = loss_total(&pro, &src, &tar, &w, &ens).unwrap();
        assert_eq!(r.total, 1.5 * r.l_imp);
        let d = loss_total(&pro, &src, &tar, &LossWeights::default(), &ens).unwrap();
        assert!((d.total - (1.5 * d.l_imp + 0.1 * d.l_obf)).abs() < 1e-12);
        assert!((d.l_imp - loss_imp(&pro, &tar, &ens).unwrap()).abs() < 1e-12);
        assert!((d.l_obf - loss_obf(&pro, &src, &ens).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identical_embedders_match_single() {
        let (src, tar, pro) = (walker(0.32, 0.2), walker(0.42, -0.2), walker(0.37, 0.1));
        let one = loss_total(&pro, &src, &tar, &LossWeights::default(), &ensemble(&[5])).unwrap();
        let three = loss_total(&pro, &src, &tar, &LossWeights::default(), &ensemble(&[5, 5, 5])).unwrap();
        assert!((one.l_imp - three.l_imp).abs() < 1e-15);
        assert!((one.l_obf - three.l_obf).abs() < 1e-15);
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().warnings().is_empty());
        assert_eq!(LossWeights { imp: 3.0, obf: 0.5 }.warnings().len(), 2);
        assert!(LossWeights { imp: -1.0, obf: 0.1 }.validate().is_err());
        assert!(LossWeights {
            imp: 1.0,
            obf: f64::NAN
        }
        .validate()
        .is_err());
        assert!(check_ensemble::<f64>(&[]).is_err());
    }
}
