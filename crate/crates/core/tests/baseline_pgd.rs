mod common;

use gait_deid::baseline_pgd::{contour_mask, pgd_protect, PgdConfig};
use gait_deid::models::ModelConfig;
use gait_deid::rng::SplitMix64;
use gait_deid::silhouette::{hard_binarize, Dims, SilhouetteSequence};

/// Direct morphology: a pixel is on the contour when some cross neighbour
/// (or the pixel itself) differs from the rest, with background outside.
fn brute_mask(x: &SilhouetteSequence) -> Vec<bool> {
    let d = x.dims();
    let mut out = Vec::new();
    for f in 0..d.frames {
        for r in 0..d.height as i64 {
            for c in 0..d.width as i64 {
                let mut vals = Vec::new();
                for (dr, dc) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (i, j) = (r + dr, c + dc);
                    let inside = i >= 0 && j >= 0 && i < d.height as i64 && j < d.width as i64;
                    vals.push(inside && x.get(f, i as usize, j as usize) == 1.0);
                }
                let any = vals.iter().any(|&v| v);
                let all = vals.iter().all(|&v| v);
                out.push(any && !all);
            }
        }
    }
    out
}

#[test]
fn single_pixel_and_full_frame_masks() {
    let mut data = vec![0.0; 25];
    data[12] = 1.0;
    let x = SilhouetteSequence::new(Dims::new(1, 5, 5), data).unwrap();
    let m = contour_mask(&x).unwrap();
    let on: Vec<usize> = (0..25).filter(|&i| m[i]).collect();
    assert_eq!(on, vec![7, 11, 12, 13, 17]);

    let full = SilhouetteSequence::filled(Dims::new(1, 5, 5), 1.0).unwrap();
    let m = contour_mask(&full).unwrap();
    for r in 0..5 {
        for c in 0..5 {
            assert_eq!(m[r * 5 + c], r == 0 || c == 0 || r == 4 || c == 4);
        }
    }
}

#[test]
fn mask_matches_brute_force_on_random_frames() {
    let mut rng = SplitMix64::new(11);
    for _ in 0..20 {
        let data: Vec<f64> = (0..3 * 7 * 9).map(|_| f64::from(rng.next_f64() < 0.5)).collect();
        let x = SilhouetteSequence::new(Dims::new(3, 7, 9), data).unwrap();
        assert_eq!(contour_mask(&x).unwrap(), brute_mask(&x));
    }
    let walker = &common::corpus()[0].sequences[0];
    assert_eq!(contour_mask(walker).unwrap(), brute_mask(walker));
}

#[test]
fn pgd_contracts() {
    let corpus = common::corpus();
    let m = common::models(&ModelConfig::default());
    let (src, tar) = (&corpus[2].sequences[0], &corpus[7].sequences[0]);

    let zero = PgdConfig {
        iterations: 0,
        ..PgdConfig::default()
    };
    let r = pgd_protect(src, tar, &zero, &m.surrogates).unwrap();
    assert_eq!(r.sequence.data(), hard_binarize(src).data());
    assert_eq!(r.trace.len(), 1);

    let cfg = PgdConfig {
        iterations: 10,
        ..PgdConfig::default()
    };
    let r = pgd_protect(src, tar, &cfg, &m.surrogates).unwrap();
    assert!(r.sequence.is_binary());
    assert_eq!(r.trace.len(), 11);
    assert_eq!(r.sequence.meta.target_identity, tar.meta.identity);
    for (i, (a, b)) in r.sequence.data().iter().zip(src.data()).enumerate() {
        if a != b {
            assert!(r.mask_union[i], "pixel {i} changed outside every contour mask");
        }
    }
    assert!(r.sequence.data() != src.data());
    assert!(r.trace.last().unwrap().total < r.trace[0].total);

    let tight = PgdConfig { budget: 0.4, ..cfg };
    let r = pgd_protect(src, tar, &tight, &m.surrogates).unwrap();
    assert_eq!(r.sequence.data(), src.data());
}

#[test]
fn non_binary_pgd_source_is_thresholded_first() {
    let corpus = common::corpus();
    let m = common::models(&ModelConfig::default());
    let src = &corpus[0].sequences[0];
    let gray = SilhouetteSequence::new(src.dims(), src.data().iter().map(|v| 0.2 + 0.6 * v).collect())
        .unwrap()
        .with_meta(src.meta.clone());
    let cfg = PgdConfig {
        iterations: 0,
        ..PgdConfig::default()
    };
    let r = pgd_protect(&gray, &corpus[1].sequences[0], &cfg, &m.surrogates).unwrap();
    assert_eq!(r.sequence.data(), src.data());
}
