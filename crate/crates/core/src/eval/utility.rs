use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::silhouette::SilhouetteSequence;

/// Mean over frames of (upper-half centroid column - lower-half centroid
/// column); frames with an empty half contribute zero.
pub fn lean_offset<S: Scalar>(x: &SilhouetteSequence<S>) -> f64 {
    let d = x.dims();
    let mid = d.height / 2;
    let centroid = |frame: &[S], rows: std::ops::Range<usize>| {
        let (mut mass, mut moment) = (0.0, 0.0);
        for r in rows {
            for c in 0..d.width {
                let v = frame[r * d.width + c].as_f64();
                mass += v;
                moment += v * c as f64;
            }
        }
        (mass > 0.0).then(|| moment / mass)
    };
    let total: f64 = x
        .frames()
        .map(|f| match (centroid(f, 0..mid), centroid(f, mid..d.height)) {
            (Some(up), Some(lo)) => up - lo,
            _ => 0.0,
        })
        .sum();
    total / d.frames as f64
}

/// Fixed analytic lean classifier: 1 when the upper body sits right of the
/// lower body, 0 otherwise (ties included).
pub fn classify_lean<S: Scalar>(x: &SilhouetteSequence<S>) -> u8 {
    u8::from(lean_offset(x) > 0.0)
}

/// Share of sequences whose predicted lean matches the tilt label.
pub fn utility_accuracy<S: Scalar>(sequences: &[&SilhouetteSequence<S>]) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::InvalidInput("no sequences to score".into()));
    }
    let mut correct = 0usize;
    for (i, s) in sequences.iter().enumerate() {
        let label = s
            .meta
            .tilt_label
            .ok_or_else(|| Error::InvalidInput(format!("sequence {i} has no tilt label")))?;
        if classify_lean(s) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / sequences.len() as f64)
}
