//! Synthetic walker renderer standing in for real silhouette datasets.
//!
//! A walker is a tilted torso rectangle standing on a hip point with two
//! legs swinging in anti-phase. Shapes are rasterised with a one-pixel
//! linear ramp across each edge (coverage `clamp(0.5 - d, 0, 1)` for signed
//! distance `d`), which produces realistic anti-aliased gray pixels before
//! the final hard threshold.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::{hard_binarize, Dims, SequenceMeta, SilhouetteSequence};

/// Fixed leg swing amplitude in radians.
pub const STRIDE_AMPLITUDE: f64 = 0.45;
/// Leg half-thickness in pixels.
pub const LIMB_RADIUS: f64 = 1.0;
/// Hip height as a fraction of the frame height.
pub const HIP_ROW: f64 = 0.5;

/// Per-parameter sampling bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkerBounds {
    pub torso_width: (f64, f64),
    pub torso_height: (f64, f64),
    pub limb_length: (f64, f64),
    pub stride_frequency: (f64, f64),
    /// Range of |tilt|; the sign is drawn separately.
    pub tilt_magnitude: (f64, f64),
}

impl Default for WalkerBounds {
    fn default() -> Self {
        Self {
            torso_width: (0.15, 0.35),
            torso_height: (0.28, 0.46),
            limb_length: (0.28, 0.46),
            stride_frequency: (0.10, 0.16),
            tilt_magnitude: (0.10, 0.35),
        }
    }
}

/// Body and gait parameters of one synthetic subject.
///
/// Widths are fractions of the frame width, heights and lengths fractions
/// of the frame height, frequency in cycles per frame, angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkerIdentity {
    pub torso_width: f64,
    pub torso_height: f64,
    pub limb_length: f64,
    pub stride_frequency: f64,
    pub phase: f64,
    pub tilt: f64,
}

impl WalkerIdentity {
    pub fn sample(rng: &mut SplitMix64, bounds: &WalkerBounds) -> Self {
        let mut draw = |(lo, hi): (f64, f64)| rng.uniform(lo, hi);
        let torso_width = draw(bounds.torso_width);
        let torso_height = draw(bounds.torso_height);
        let limb_length = draw(bounds.limb_length);
        let stride_frequency = draw(bounds.stride_frequency);
        let phase = draw((0.0, TAU));
        let magnitude = draw(bounds.tilt_magnitude);
        let tilt = if rng.next_f64() < 0.5 { -magnitude } else { magnitude };
        Self {
            torso_width,
            torso_height,
            limb_length,
            stride_frequency,
            phase,
            tilt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.torso_width)
            && (0.0..=1.0).contains(&self.torso_height)
            && (0.0..=1.0).contains(&self.limb_length)
            && (0.0..=0.5).contains(&self.stride_frequency)
            && self.phase.is_finite()
            && self.tilt.abs() < std::f64::consts::FRAC_PI_2;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "walker parameters out of bounds: {self:?}"
            )));
        }
        Ok(())
    }

    /// Binary utility label: 1 for a rightward lean, 0 for leftward.
    /// Upright walkers have no sign and get `None`.
    pub fn tilt_label(&self) -> Option<u8> {
        if self.tilt > 0.0 {
            Some(1)
        } else if self.tilt < 0.0 {
            Some(0)
        } else {
            None
        }
    }
}

fn box_distance(p: (f64, f64), half: (f64, f64)) -> f64 {
    let q = (p.0.abs() - half.0, p.1.abs() - half.1);
    let outside = (q.0.max(0.0).powi(2) + q.1.max(0.0).powi(2)).sqrt();
    outside + q.0.max(q.1).min(0.0)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ab, ap) = ((b.0 - a.0, b.1 - a.1), (p.0 - a.0, p.1 - a.1));
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 > 0.0 {
        ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = (ap.0 - t * ab.0, ap.1 - t * ab.1);
    (d.0 * d.0 + d.1 * d.1).sqrt()
}

fn coverage(signed_distance: f64) -> f64 {
    (0.5 - signed_distance).clamp(0.0, 1.0)
}

/// Phase offset contributed by the per-sequence seed.
fn seed_phase(seed: u64) -> f64 {
    SplitMix64::derive(seed, 0x5EED).uniform(0.0, TAU)
}

/// Renders one walker with soft (anti-aliased) edges.
pub fn render_walker_soft(identity: &WalkerIdentity, dims: Dims, seed: u64) -> Result<SilhouetteSequence> {
    identity.validate()?;
    let (h, w) = (dims.height as f64, dims.width as f64);
    let hip = (HIP_ROW * h, 0.5 * w);
    let torso_w = identity.torso_width * w;
    let torso_h = identity.torso_height * h;
    let limb = identity.limb_length * h;
    // torso axis points up the body; perpendicular spans its width
    let axis = (-identity.tilt.cos(), identity.tilt.sin());
    let across = (identity.tilt.sin(), identity.tilt.cos());
    let phase = identity.phase + seed_phase(seed);

    let mut data = Vec::with_capacity(dims.numel());
    for f in 0..dims.frames {
        let swing = STRIDE_AMPLITUDE * (TAU * identity.stride_frequency * f as f64 + phase).sin();
        let feet = [swing, -swing].map(|a| (hip.0 + limb * a.cos(), hip.1 + limb * a.sin()));
        for r in 0..dims.height {
            for c in 0..dims.width {
                let p = (r as f64 + 0.5, c as f64 + 0.5);
                let d = (p.0 - hip.0, p.1 - hip.1);
                let along = d.0 * axis.0 + d.1 * axis.1;
                let side = d.0 * across.0 + d.1 * across.1;
                let torso = box_distance((along - 0.5 * torso_h, side), (0.5 * torso_h, 0.5 * torso_w));
                let legs = feet
                    .iter()
                    .map(|&foot| segment_distance(p, hip, foot) - LIMB_RADIUS)
                    .fold(f64::INFINITY, f64::min);
                data.push(coverage(torso).max(coverage(legs)));
            }
        }
    }
    SilhouetteSequence::new(dims, data)
}

/// Renders a walker and thresholds it to a strictly binary sequence.
/// The same identity with a different seed differs only in gait phase.
pub fn synth_walker(identity: &WalkerIdentity, dims: Dims, seed: u64) -> Result<SilhouetteSequence> {
    let soft = render_walker_soft(identity, dims, seed)?;
    let mut out = hard_binarize(&soft);
    out.meta.tilt_label = identity.tilt_label();
    Ok(out)
}

/// One generated subject with its sequences.
#[derive(Clone, Debug)]
pub struct CorpusSubject {
    pub identity: String,
    pub params: WalkerIdentity,
    pub sequences: Vec<SilhouetteSequence>,
}

/// Parameters of a synthetic corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub identities: usize,
    pub sequences_per_identity: usize,
    pub dims: Dims,
    pub seed: u64,
    pub bounds: WalkerBounds,
}

impl CorpusSpec {
    pub fn new(identities: usize, sequences_per_identity: usize, seed: u64) -> Self {
        Self {
            identities,
            sequences_per_identity,
            dims: Dims::DESK,
            seed,
            bounds: WalkerBounds::default(),
        }
    }
}

pub fn identity_tag(index: usize) -> String {
    format!("id{index:03}")
}

pub fn condition_tag(index: usize) -> String {
    format!("seq{index:02}")
}

/// Generates `identities x sequences_per_identity` binary walkers.
///
/// Upright walkers (zero tilt) have no natural label; they are assigned
/// label `identity index mod 2`.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusSubject>> {
    let mut rng = SplitMix64::derive(spec.seed, 0xC0_4B05);
    (0..spec.identities)
        .map(|i| {
            let params = WalkerIdentity::sample(&mut rng, &spec.bounds);
            let label = params.tilt_label().unwrap_or((i % 2) as u8);
            let sequences = (0..spec.sequences_per_identity)
                .map(|j| {
                    let seq_seed = rng.next_u64();
                    let mut s = synth_walker(&params, spec.dims, seq_seed)?;
                    s.meta = SequenceMeta {
                        identity: Some(identity_tag(i)),
                        condition: Some(condition_tag(j)),
                        tilt_label: Some(label),
                        ..SequenceMeta::default()
                    };
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CorpusSubject {
                identity: identity_tag(i),
                params,
                sequences,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::silhouette::gray_fraction;

    fn walker() -> WalkerIdentity {
        WalkerIdentity {
            torso_width: 0.25,
            torso_height: 0.4,
            limb_length: 0.4,
            stride_frequency: 0.125,
            phase: 0.3,
            tilt: 0.2,
        }
    }

    #[test]
    fn zero_frequency_freezes_motion() {
        let id = WalkerIdentity {
            stride_frequency: 0.0,
            ..walker()
        };
        let s = synth_walker(&id, Dims::DESK, 5).unwrap();
        for f in 1..s.dims().frames {
            assert_eq!(s.frame(f), s.frame(0));
        }
    }

    #[test]
    fn every_frame_has_foreground() {
        let mut rng = SplitMix64::new(11);
        for seed in 0..20 {
            let id = WalkerIdentity::sample(&mut rng, &WalkerBounds::default());
            let s = synth_walker(&id, Dims::DESK, seed).unwrap();
            assert!(s.is_binary());
            for frame in s.frames() {
                assert!(frame.iter().sum::<f64>() > 0.0);
            }
        }
    }

    #[test]
    fn soft_render_has_anti_aliased_edges() {
        let slim = WalkerIdentity {
            torso_width: 0.2,
            torso_height: 0.35,
            limb_length: 0.35,
            ..walker()
        };
        let soft = render_walker_soft(&slim, Dims::DESK, 1).unwrap();
        let g = gray_fraction(&soft, 0.01).unwrap();
        // brute-force count of pixels strictly inside the band
        let count = soft.data().iter().filter(|&&v| v > 0.01 && v < 0.99).count();
        assert_eq!(g, count as f64 / soft.data().len() as f64);
        assert!(g > 0.0 && g < 0.15, "gray fraction {g}");
    }

    #[test]
    fn seed_changes_phase_only() {
        let a = synth_walker(&walker(), Dims::DESK, 1).unwrap();
        let b = synth_walker(&walker(), Dims::DESK, 2).unwrap();
        assert_ne!(a, b);
        let frozen = WalkerIdentity {
            stride_frequency: 0.0,
            phase: 0.0,
            ..walker()
        };
        // with legs at rest at their phase-independent extreme, torso pixels agree
        let a = synth_walker(&frozen, Dims::DESK, 1).unwrap();
        let b = synth_walker(&frozen, Dims::DESK, 2).unwrap();
        let top = |s: &SilhouetteSequence| s.frame(0)[..16 * 7].to_vec();
        assert_eq!(top(&a), top(&b));
    }

    #[test]
    fn corpus_is_deterministic() {
        let spec = CorpusSpec::new(3, 2, 99);
        let a = synth_corpus(&spec).unwrap();
        let b = synth_corpus(&spec).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sequences, y.sequences);
            assert_eq!(x.sequences.len(), 2);
        }
    }

    #[test]
    fn upright_walkers_get_parity_labels() {
        let mut spec = CorpusSpec::new(4, 1, 3);
        spec.bounds.tilt_magnitude = (0.0, 0.0);
        let corpus = synth_corpus(&spec).unwrap();
        let labels: Vec<u8> = corpus.iter().map(|s| s.sequences[0].meta.tilt_label.unwrap()).collect();
        assert_eq!(labels, vec![0, 1, 0, 1]);
    }
}
