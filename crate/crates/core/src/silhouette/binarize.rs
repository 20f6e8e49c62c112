use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::SilhouetteSequence;

/// Foreground threshold shared by soft and hard binarization.
pub const THRESHOLD: f64 = 0.5;

/// Default width of the gray band used by [`gray_fraction`].
pub const GRAY_BAND: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationConfig {
    /// Sigmoid temperature; smaller is closer to a hard threshold.
    pub tau: f64,
    pub gray_band: f64,
}

impl Default for BinarizationConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            gray_band: GRAY_BAND,
        }
    }
}

impl BinarizationConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_band(self.gray_band)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    Ok(())
}

fn check_band(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "gray band must lie in (0, 0.5), got {eps}"
        )));
    }
    Ok(())
}

/// `sigmoid((x - 0.5) / tau)` elementwise.
pub fn soft_binarize<S: Scalar>(x: &SilhouetteSequence<S>, tau: f64) -> Result<SilhouetteSequence<S>> {
    check_tau(tau)?;
    let (half, tau) = (S::lit(THRESHOLD), S::lit(tau));
    Ok(x.map_values(|v| ((v - half) / tau).sigmoid()))
}

/// Tape version of [`soft_binarize`] on a flat intensity vector.
pub fn soft_binarize_var<'t, S: Scalar>(x: &Var<'t, S>, tau: f64) -> Result<Var<'t, S>, DiffError> {
    x.shift(S::lit(-THRESHOLD))?.scale(S::lit(1.0 / tau))?.sigmoid()
}

/// Thresholds at 0.5; values exactly at the threshold become foreground.
pub fn hard_binarize<S: Scalar>(x: &SilhouetteSequence<S>) -> SilhouetteSequence<S> {
    let half = S::lit(THRESHOLD);
    x.map_values(|v| if v >= half { S::one() } else { S::zero() })
}

/// Fraction of pixels strictly inside `(eps, 1 - eps)`.
pub fn gray_fraction<S: Scalar>(x: &SilhouetteSequence<S>, eps: f64) -> Result<f64> {
    check_band(eps)?;
    let (lo, hi) = (S::lit(eps), S::lit(1.0 - eps));
    let gray = x.data().iter().filter(|&&v| v > lo && v < hi).count();
    Ok(gray as f64 / x.data().len() as f64)
}

/// Fixes the frame count: longer inputs keep a contiguous centre window
/// (left-biased when the surplus is odd), shorter inputs repeat cyclically.
pub fn preprocess_length<S: Scalar>(x: &SilhouetteSequence<S>, frames: usize) -> Result<SilhouetteSequence<S>> {
    let n = x.dims().frames;
    if n == 0 || frames == 0 {
        return Err(Error::InvalidInput("sequence has zero frames".into()));
    }
    let order: Vec<usize> = if n >= frames {
        let start = (n - frames) / 2;
        (start..start + frames).collect()
    } else {
        (0..frames).map(|i| i % n).collect()
    };
    let mut dims = x.dims();
    dims.frames = frames;
    let data = order.iter().flat_map(|&i| x.frame(i).iter().copied()).collect();
    Ok(SilhouetteSequence::new(dims, data)?.with_meta(x.meta.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::silhouette::Dims;
    use proptest::prelude::*;

    fn seq(frames: usize, values: &[f64]) -> SilhouetteSequence {
        let dims = Dims::new(frames, 1, values.len() / frames);
        SilhouetteSequence::new(dims, values.to_vec()).unwrap()
    }

    #[test]
    fn half_is_a_fixed_point() {
        for &tau in &[0.01, 0.1, 1.0, 7.0] {
            let out = soft_binarize(&seq(1, &[0.5]), tau).unwrap();
            assert_eq!(out.data()[0], 0.5);
        }
    }

    #[test]
    fn one_at_default_temperature() {
        // 1 / (1 + e^-5), e^-5 = 0.006737946999085467...
        let expected = 0.993_307_149_075_715_2;
        let out = soft_binarize(&seq(1, &[1.0]), 0.1).unwrap();
        assert!((out.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_temperature() {
        assert!(soft_binarize(&seq(1, &[0.3]), 0.0).is_err());
        assert!(soft_binarize(&seq(1, &[0.3]), -1.0).is_err());
    }

    #[test]
    fn hard_binarize_tie_goes_to_foreground() {
        let out = hard_binarize(&seq(1, &[0.5, 0.5, 0.49999, 0.6]));
        assert_eq!(out.data(), &[1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn gray_fraction_cases() {
        assert_eq!(gray_fraction(&seq(1, &[0.0, 1.0, 1.0]), 0.01).unwrap(), 0.0);
        assert_eq!(gray_fraction(&seq(1, &[0.5; 4]), 0.01).unwrap(), 1.0);
        assert_eq!(gray_fraction(&seq(1, &[0.01, 0.99, 0.5, 0.0]), 0.01).unwrap(), 0.25);
        assert!(gray_fraction(&seq(1, &[0.5]), 0.5).is_err());
    }

    #[test]
    fn cyclic_repetition_for_short_input() {
        let x = seq(3, &[0.0, 0.5, 1.0]);
        let out = preprocess_length(&x, 8).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn left_biased_centre_window() {
        let vals: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let out = preprocess_length(&seq(10, &vals), 8).unwrap();
        // frames 2..9 one-indexed
        assert_eq!(out.data(), &vals[1..9]);
        let out = preprocess_length(&seq(10, &vals), 7).unwrap();
        assert_eq!(out.data(), &vals[1..8]);
    }

    #[test]
    fn exact_length_is_unchanged() {
        let vals: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        assert_eq!(preprocess_length(&seq(8, &vals), 8).unwrap().data(), &vals[..]);
    }

    proptest! {
        #[test]
        fn soft_binarize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, tau in 0.001f64..5.0) {
            let out = soft_binarize(&seq(1, &[a, b]), tau).unwrap();
            let (ya, yb) = (out.data()[0], out.data()[1]);
            if a <= b { prop_assert!(ya <= yb) } else { prop_assert!(ya >= yb) }
        }

        #[test]
        fn hard_after_soft_equals_hard(v in prop::collection::vec(0.0f64..=1.0, 1..32), tau in 0.001f64..5.0) {
            let x = seq(1, &v);
            prop_assert_eq!(hard_binarize(&soft_binarize(&x, tau).unwrap()), hard_binarize(&x));
        }

        #[test]
        fn hard_binarize_is_idempotent(v in prop::collection::vec(0.0f64..=1.0, 1..32)) {
            let once = hard_binarize(&seq(1, &v));
            let twice = hard_binarize(&once);
            prop_assert_eq!(twice.data(), once.data());
            prop_assert_eq!(gray_fraction(&once, 0.01).unwrap(), 0.0);
        }

        #[test]
        fn preprocess_always_hits_target_length(n in 1usize..40, target in 1usize..40) {
            let vals: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let out = preprocess_length(&seq(n, &vals), target).unwrap();
            prop_assert_eq!(out.dims().frames, target);
        }
    }
}
