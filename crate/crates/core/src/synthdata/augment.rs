use super::gen::rotate_in_tangent;
use super::{Mode, SynthConfig};
use crate::numerics::{derive_rng, SeededRng, StreamPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    Weak,
    Strong,
}

/// Weak and strong views of one sample for a given epoch. Both derive
/// deterministically from (sample id, epoch, seed).
#[derive(Debug, Clone)]
pub struct ViewPair {
    pub weak: Vec<f64>,
    pub strong: Vec<f64>,
}

impl ViewPair {
    pub fn make(sample: &[f64], sample_id: u64, epoch: usize, seed: u64, config: &SynthConfig) -> Self {
        Self {
            weak: augment(sample, sample_id, epoch, seed, Strength::Weak, config),
            strong: augment(sample, sample_id, epoch, seed, Strength::Strong, config),
        }
    }
}

/// Fraction of coordinates dropped by the strong feature-mode augmentation.
const DROPOUT_FRACTION: f64 = 0.10;
/// Per-transform probability in strong image-mode augmentation.
const STRONG_IMAGE_P: f64 = 0.2;

/// Produces one augmented view of a sample.
///
/// Feature mode: the weak view rotates by at most eta/4 toward a random
/// tangent direction; the strong view rotates by at most eta and then drops
/// 10% of coordinates before renormalizing. Image mode: the weak view is a
/// horizontal flip with probability 0.5; the strong view applies flip,
/// crop-and-resize, and brightness jitter, each with probability 0.2.
pub fn augment(
    sample: &[f64],
    sample_id: u64,
    epoch: usize,
    seed: u64,
    strength: Strength,
    config: &SynthConfig,
) -> Vec<f64> {
    let purpose = match strength {
        Strength::Weak => StreamPurpose::AugmentWeak,
        Strength::Strong => StreamPurpose::AugmentStrong,
    };
    let mut rng = derive_rng(seed, purpose, sample_id, epoch as u64);
    match config.mode {
        Mode::FeatureVector => augment_feature(sample, strength, config, &mut rng),
        Mode::ToyImage => augment_image(sample, strength, config, &mut rng),
    }
}

fn augment_feature(
    sample: &[f64],
    strength: Strength,
    config: &SynthConfig,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let max_angle = match strength {
        Strength::Weak => config.intra_noise_eta / 4.0,
        Strength::Strong => config.intra_noise_eta,
    };
    let angle = if max_angle > 0.0 {
        rng.uniform(0.0, max_angle)
    } else {
        0.0
    };
    let mut view = rotate_in_tangent(sample, angle, rng);
    if strength == Strength::Strong {
        let d = view.len();
        let n_drop = ((d as f64) * DROPOUT_FRACTION).floor() as usize;
        let mut indices: Vec<usize> = (0..d).collect();
        rng.shuffle(&mut indices);
        for &i in indices.iter().take(n_drop) {
            view[i] = 0.0;
        }
        let norm = view.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in view.iter_mut() {
                *x /= norm;
            }
        }
    }
    view
}

fn augment_image(
    sample: &[f64],
    strength: Strength,
    config: &SynthConfig,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let side = config.image_side;
    let mut img = sample.to_vec();
    match strength {
        Strength::Weak => {
            if rng.bernoulli(0.5) {
                hflip(&mut img, side);
            }
        }
        Strength::Strong => {
            if rng.bernoulli(STRONG_IMAGE_P) {
                hflip(&mut img, side);
            }
            if rng.bernoulli(STRONG_IMAGE_P) {
                img = crop_resize(&img, side, rng);
            }
            if rng.bernoulli(STRONG_IMAGE_P) {
                let factor = rng.uniform(0.8, 1.2);
                for v in img.iter_mut() {
                    *v *= factor;
                }
            }
        }
    }
    img
}

fn hflip(img: &mut [f64], side: usize) {
    for r in 0..side {
        img[r * side..(r + 1) * side].reverse();
    }
}

/// Random crop of 70-100% scale, resized back with bilinear interpolation.
fn crop_resize(img: &[f64], side: usize, rng: &mut SeededRng) -> Vec<f64> {
    let scale = rng.uniform(0.7, 1.0);
    let crop = ((side as f64 * scale).round() as usize).clamp(2, side);
    let max_off = side - crop;
    let (r0, c0) = (
        if max_off > 0 { rng.usize_below(max_off + 1) } else { 0 },
        if max_off > 0 { rng.usize_below(max_off + 1) } else { 0 },
    );
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            // Map output pixel into the crop window.
            let fr = r0 as f64 + (r as f64 / (side - 1).max(1) as f64) * (crop - 1) as f64;
            let fc = c0 as f64 + (c as f64 / (side - 1).max(1) as f64) * (crop - 1) as f64;
            let (ri, ci) = (fr.floor() as usize, fc.floor() as usize);
            let (rf, cf) = (fr - ri as f64, fc - ci as f64);
            let r1 = (ri + 1).min(side - 1);
            let c1 = (ci + 1).min(side - 1);
            let v00 = img[ri * side + ci];
            let v01 = img[ri * side + c1];
            let v10 = img[r1 * side + ci];
            let v11 = img[r1 * side + c1];
            out[r * side + c] = v00 * (1.0 - rf) * (1.0 - cf)
                + v01 * (1.0 - rf) * cf
                + v10 * rf * (1.0 - cf)
                + v11 * rf * cf;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::gen::angle_between;
    use super::*;
    use crate::synthdata::{generate, SynthConfig};

    #[test]
    fn weak_view_is_identity_when_eta_is_zero() {
        let config = SynthConfig {
            intra_noise_eta: 0.0,
            min_angle_gamma: 0.5,
            ..SynthConfig::default()
        };
        // Bypass validation (2*0 < 0.5 holds anyway); build a unit sample.
        let sample = vec![1.0, 0.0, 0.0, 0.0];
        let view = augment(&sample, 3, 1, 7, Strength::Weak, &config);
        assert_eq!(view, sample);
    }

    #[test]
    fn weak_view_angular_bound_holds_over_many_draws() {
        let config = SynthConfig::default();
        let data = generate(&config).unwrap();
        let sample = &data.labeled()[0].0;
        for trial in 0..10_000u64 {
            let view = augment(sample, 0, trial as usize, 5, Strength::Weak, &config);
            let a = angle_between(sample, &view);
            assert!(
                a <= config.intra_noise_eta / 4.0 + 1e-9,
                "trial {trial}: angle {a}"
            );
        }
    }

    #[test]
    fn views_are_deterministic_in_their_key() {
        let config = SynthConfig::default();
        let sample = vec![0.5; 32];
        let a = ViewPair::make(&sample, 11, 4, 9, &config);
        let b = ViewPair::make(&sample, 11, 4, 9, &config);
        assert_eq!(a.weak, b.weak);
        assert_eq!(a.strong, b.strong);
        let c = ViewPair::make(&sample, 11, 5, 9, &config);
        assert_ne!(a.strong, c.strong);
    }

    #[test]
    fn strong_feature_view_keeps_unit_norm_and_drops_coords() {
        let config = SynthConfig::default();
        let data = generate(&config).unwrap();
        let sample = &data.labeled()[0].0;
        let view = augment(sample, 0, 0, 5, Strength::Strong, &config);
        let norm: f64 = view.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        let zeros = view.iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 3); // floor(32 * 0.10)
    }

    #[test]
    fn image_weak_view_flips_about_half_the_time() {
        let config = SynthConfig {
            labeled_per_known: 2,
            unlabeled_per_known: 1,
            unlabeled_per_novel: 1,
            ..SynthConfig::image_preset()
        };
        let data = generate(&config).unwrap();
        let sample = &data.labeled()[0].0;
        let mut flipped = 0usize;
        let n = 2000;
        for e in 0..n {
            let view = augment(sample, 0, e, 3, Strength::Weak, &config);
            if view != *sample {
                flipped += 1;
            }
        }
        let rate = flipped as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.05, "flip rate {rate}");
    }

    #[test]
    fn image_strong_view_transform_rates_match_config() {
        let config = SynthConfig {
            labeled_per_known: 2,
            unlabeled_per_known: 1,
            unlabeled_per_novel: 1,
            ..SynthConfig::image_preset()
        };
        let data = generate(&config).unwrap();
        let sample = &data.labeled()[0].0;
        // Identity survives only when all three transforms miss.
        let mut unchanged = 0usize;
        let n = 4000;
        for e in 0..n {
            let view = augment(sample, 0, e, 3, Strength::Strong, &config);
            if view == *sample {
                unchanged += 1;
            }
        }
        let rate = unchanged as f64 / n as f64;
        let expect = (1.0 - STRONG_IMAGE_P).powi(3);
        assert!((rate - expect).abs() < 0.04, "identity rate {rate} vs {expect}");
    }
}
