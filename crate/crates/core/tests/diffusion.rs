mod common;

use gait_deid::diffusion::{Ddim, FormulaVariant, NoiseSchedule};
use gait_deid::models::{AutoencoderPair, NoisePredictor, PriorMode};
use gait_deid::silhouette::Dims;

fn ddim(mode: PriorMode, variant: FormulaVariant) -> Ddim {
    let net = NoisePredictor::seeded(Dims::DESK.numel(), 20, 64, 7, mode).unwrap();
    Ddim::new(NoiseSchedule::linear(20).unwrap(), variant, net).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn null_prior_roundtrip_on_encoded_walkers() {
    let ae = AutoencoderPair::<f64>::seeded(Dims::DESK, 0.01, 7).unwrap();
    for variant in [FormulaVariant::Standard, FormulaVariant::Unscaled] {
        let d = ddim(PriorMode::Null, variant);
        for s in common::corpus().iter().take(4) {
            let z0 = ae.encode(&s.sequences[0]).unwrap();
            for t in [0, 1, 3, 20] {
                let back = d.sample_from(&d.invert_to(&z0, t).unwrap(), t).unwrap();
                assert!(rel_err(back.data(), z0.data()) < 1e-10);
            }
        }
    }
}

#[test]
fn seeded_prior_roundtrip_is_close_but_inexact() {
    let ae = AutoencoderPair::<f64>::seeded(Dims::DESK, 0.01, 7).unwrap();
    let d = ddim(PriorMode::Seeded, FormulaVariant::Standard);
    let z0 = ae.encode(&common::corpus()[0].sequences[0]).unwrap();
    let zt = d.invert_to(&z0, 3).unwrap();
    assert!(rel_err(zt.data(), z0.data()) > 1e-4);
    let back = d.sample_from(&zt, 3).unwrap();
    let err = rel_err(back.data(), z0.data());
    assert!(err > 0.0 && err < 1e-2, "{err:e}");
    assert!(ae.decode(&back).unwrap().data().iter().all(|v| (0.0..=1.0).contains(v)));
}
