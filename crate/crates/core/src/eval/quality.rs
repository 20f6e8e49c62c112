use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::silhouette::SilhouetteSequence;

pub const PSNR_CAP: f64 = 99.0;
/// MSE below which PSNR is reported as the cap.
pub const MSE_FLOOR: f64 = 1e-10;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

fn same_dims<S: Scalar>(x: &SilhouetteSequence<S>, y: &SilhouetteSequence<S>) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::Dimension {
            expected: x.dims().as_vec(),
            got: y.dims().as_vec(),
        });
    }
    Ok(())
}

/// Frame-averaged `10 log10(1 / MSE)` for unit dynamic range; frames with
/// MSE below [`MSE_FLOOR`] score `cap`.
pub fn psnr<S: Scalar>(x: &SilhouetteSequence<S>, y: &SilhouetteSequence<S>, cap: f64) -> Result<f64> {
    same_dims(x, y)?;
    let dims = x.dims();
    let total: f64 = x
        .frames()
        .zip(y.frames())
        .map(|(a, b)| {
            let mse = a
                .iter()
                .zip(b)
                .map(|(p, q)| (p.as_f64() - q.as_f64()).powi(2))
                .sum::<f64>()
                / dims.frame_len() as f64;
            if mse < MSE_FLOOR {
                cap
            } else {
                (10.0 * (1.0 / mse).log10()).min(cap)
            }
        })
        .sum();
    Ok(total / dims.frames as f64)
}

fn gaussian_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect()
}

/// Weighted local mean with the window clipped at the borders and the
/// remaining weights renormalised.
fn local_mean(img: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for i in 0..h as isize {
        for j in 0..w as isize {
            let (mut acc, mut norm) = (0.0, 0.0);
            for di in -r..=r {
                let ii = i + di;
                if ii < 0 || ii >= h as isize {
                    continue;
                }
                for dj in -r..=r {
                    let jj = j + dj;
                    if jj < 0 || jj >= w as isize {
                        continue;
                    }
                    let k = kernel[(di + r) as usize] * kernel[(dj + r) as usize];
                    acc += k * img[ii as usize * w + jj as usize];
                    norm += k;
                }
            }
            out[i as usize * w + j as usize] = acc / norm;
        }
    }
    out
}

fn ssim_frame(a: &[f64], b: &[f64], h: usize, w: usize, kernel: &[f64]) -> f64 {
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = local_mean(a, h, w, kernel);
    let mu_b = local_mean(b, h, w, kernel);
    let e_aa = local_mean(&prod(a, a), h, w, kernel);
    let e_bb = local_mean(&prod(b, b), h, w, kernel);
    let e_ab = local_mean(&prod(a, b), h, w, kernel);
    let sum: f64 = (0..h * w)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .sum();
    sum / (h * w) as f64
}

/// Mean over frames of the Gaussian-windowed SSIM map.
pub fn ssim<S: Scalar>(x: &SilhouetteSequence<S>, y: &SilhouetteSequence<S>) -> Result<f64> {
    same_dims(x, y)?;
    let dims = x.dims();
    let kernel = gaussian_kernel();
    let to64 = |f: &[S]| f.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
    let total: f64 = x
        .frames()
        .zip(y.frames())
        .map(|(a, b)| ssim_frame(&to64(a), &to64(b), dims.height, dims.width, &kernel))
        .sum();
    Ok(total / dims.frames as f64)
}

pub fn quality<S: Scalar>(x: &SilhouetteSequence<S>, y: &SilhouetteSequence<S>) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(x, y, PSNR_CAP)?,
        ssim: ssim(x, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::silhouette::Dims;

    fn random_seq(dims: Dims, seed: u64) -> SilhouetteSequence {
        let mut rng = SplitMix64::new(seed);
        SilhouetteSequence::new(dims, (0..dims.numel()).map(|_| rng.next_f64()).collect()).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let dims = Dims::new(2, 4, 4);
        let x = SilhouetteSequence::filled(dims, 0.3).unwrap();
        assert_eq!(psnr(&x, &x, PSNR_CAP).unwrap(), PSNR_CAP);
        let y = SilhouetteSequence::filled(dims, 0.4).unwrap();
        assert!((psnr(&x, &y, PSNR_CAP).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_direct_mse() {
        let dims = Dims::new(1, 8, 8);
        let (x, y) = (random_seq(dims, 1), random_seq(dims, 2));
        let mse: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 64.0;
        assert!((psnr(&x, &y, PSNR_CAP).unwrap() - (-10.0 * mse.log10())).abs() < 1e-12);
        assert_eq!(psnr(&x, &y, PSNR_CAP).unwrap(), psnr(&y, &x, PSNR_CAP).unwrap());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let dims = Dims::new(2, 6, 7);
        let x = random_seq(dims, 4);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let (a, b) = (0.2, 0.7);
        let ca = SilhouetteSequence::filled(dims, a).unwrap();
        let cb = SilhouetteSequence::filled(dims, b).unwrap();
        let want = (2.0 * a * b + SSIM_C1) / (a * a + b * b + SSIM_C1);
        assert!((ssim(&ca, &cb).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn ssim_of_inverted_binary_frame_is_negative() {
        let dims = Dims::new(1, 16, 16);
        let data: Vec<f64> = (0..256)
            .map(|i| if (i / 16 + i % 16) % 3 == 0 { 1.0 } else { 0.0 })
            .collect();
        let x = SilhouetteSequence::new(dims, data).unwrap();
        let y = SilhouetteSequence::new(dims, x.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&x, &y).unwrap() < 0.0);
    }

    #[test]
    fn ssim_is_symmetric_and_below_one_when_different() {
        let dims = Dims::new(1, 9, 9);
        let (x, y) = (random_seq(dims, 5), random_seq(dims, 6));
        let (s1, s2) = (ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap());
        assert!((s1 - s2).abs() < 1e-15);
        assert!(s1 < 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = SilhouetteSequence::filled(Dims::new(1, 2, 2), 0.0).unwrap();
        let b = SilhouetteSequence::filled(Dims::new(2, 2, 2), 0.0).unwrap();
        assert!(psnr(&a, &b, PSNR_CAP).is_err());
        assert!(ssim(&a, &b).is_err());
    }
}
