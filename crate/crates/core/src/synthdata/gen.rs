use super::{Fingerprint, Mode, SynthConfig, SynthDataset, SynthError};
use crate::numerics::{derive_rng, idct2, SeededRng, StreamPurpose, Tensor};
use rayon::prelude::*;

/// Per-class fingerprint coefficient count in toy-image mode.
const FP_COEFFS: usize = 4;
/// Fingerprint amplitude; large against pixel noise so a nearest-fingerprint
/// classifier separates clean images perfectly.
const FP_AMPLITUDE: f64 = 3.0;
/// Pixel noise standard deviation in toy-image mode.
const PIXEL_NOISE: f64 = 0.05;
/// Attempt budget for the rejection sampler placing class means.
const MEAN_ATTEMPTS: usize = 50_000;

pub(crate) fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Rotates `mean` by `angle` toward a random tangent direction, staying on
/// the unit sphere.
pub(crate) fn rotate_in_tangent(mean: &[f64], angle: f64, rng: &mut SeededRng) -> Vec<f64> {
    if angle == 0.0 {
        return mean.to_vec();
    }
    let d = mean.len();
    // Project a random direction onto the tangent space at `mean`.
    let mut tangent = loop {
        let raw = rng.unit_vector(d);
        let dot: f64 = raw.iter().zip(mean).map(|(x, y)| x * y).sum();
        let mut t: Vec<f64> = raw.iter().zip(mean).map(|(x, m)| x - dot * m).collect();
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for x in t.iter_mut() {
                *x /= norm;
            }
            break t;
        }
    };
    let (s, c) = angle.sin_cos();
    for (t, m) in tangent.iter_mut().zip(mean) {
        *t = c * m + s * *t;
    }
    normalize(&mut tangent);
    tangent
}

/// Places K unit-norm class means with pairwise angles >= gamma.
///
/// Greedy rejection sampling with a deterministic fallback to the canonical
/// orthogonal basis when the dimension allows it.
fn place_class_means(config: &SynthConfig) -> Result<Vec<Vec<f64>>, SynthError> {
    let k = config.total_classes();
    let d = config.feature_dim;
    let gamma = config.min_angle_gamma;
    let mut rng = derive_rng(config.seed, StreamPurpose::ClassMeans, 0, 0);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0usize;
    while means.len() < k && attempts < MEAN_ATTEMPTS {
        attempts += 1;
        let cand = rng.unit_vector(d);
        if means.iter().all(|m| angle_between(m, &cand) >= gamma) {
            means.push(cand);
        }
    }
    if means.len() == k {
        return Ok(means);
    }
    // Orthogonal fallback: basis vectors are exactly pi/2 apart.
    if d >= k && gamma <= std::f64::consts::FRAC_PI_2 {
        let mut basis = Vec::with_capacity(k);
        for i in 0..k {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            basis.push(e);
        }
        return Ok(basis);
    }
    Err(SynthError::GeometryInfeasible {
        placed: means.len(),
        requested: k,
        min_angle: gamma,
        dim: d,
    })
}

/// Deterministic fingerprint layout: each class owns a disjoint block of
/// non-DC coefficients with alternating signs.
fn class_fingerprints(config: &SynthConfig) -> Vec<Fingerprint> {
    let k = config.total_classes();
    let slots = config.image_side * config.image_side;
    assert!(
        1 + k * FP_COEFFS <= slots,
        "image too small for {k} class fingerprints"
    );
    (0..k)
        .map(|c| {
            let indices: Vec<usize> = (0..FP_COEFFS).map(|j| 1 + c * FP_COEFFS + j).collect();
            let values: Vec<f64> = (0..FP_COEFFS)
                .map(|j| if j % 2 == 0 { FP_AMPLITUDE } else { -FP_AMPLITUDE })
                .collect();
            Fingerprint { indices, values }
        })
        .collect()
}

fn feature_sample(mean: &[f64], eta: f64, rng: &mut SeededRng) -> Vec<f64> {
    let angle = if eta > 0.0 { rng.uniform(0.0, eta) } else { 0.0 };
    rotate_in_tangent(mean, angle, rng)
}

fn image_sample(
    base_coeffs: &[f64],
    fp: &Fingerprint,
    side: usize,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let mut coeffs = base_coeffs.to_vec();
    for (&idx, &val) in fp.indices.iter().zip(&fp.values) {
        coeffs[idx] += val;
    }
    let clean = idct2(&Tensor::new(vec![side, side], coeffs));
    clean
        .data()
        .iter()
        .map(|&v| v + PIXEL_NOISE * rng.normal())
        .collect()
}

/// Shared low-frequency texture all images are built on.
fn base_texture_coeffs(config: &SynthConfig) -> Vec<f64> {
    let side = config.image_side;
    let mut rng = derive_rng(config.seed, StreamPurpose::ImageBase, 0, 0);
    let mut coeffs = vec![0.0; side * side];
    coeffs[0] = 4.0 + rng.normal();
    for u in 0..3.min(side) {
        for v in 0..3.min(side) {
            if u == 0 && v == 0 {
                continue;
            }
            coeffs[u * side + v] += 0.5 * rng.normal();
        }
    }
    coeffs
}

/// Generates a dataset. The same (config, seed) always produces the same
/// dataset; per-sample RNG streams keep generation order-independent.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    let means = place_class_means(config)?;
    let fingerprints = match config.mode {
        Mode::ToyImage => class_fingerprints(config),
        Mode::FeatureVector => Vec::new(),
    };
    let base_coeffs = match config.mode {
        Mode::ToyImage => base_texture_coeffs(config),
        Mode::FeatureVector => Vec::new(),
    };

    // Sample plan: (global id, class, labeled?) in a fixed order.
    let mut plan: Vec<(u64, usize, bool)> = Vec::new();
    let mut next_id = 0u64;
    for class in 0..config.k_known {
        for _ in 0..config.labeled_per_known {
            plan.push((next_id, class, true));
            next_id += 1;
        }
    }
    for class in 0..config.k_known {
        for _ in 0..config.unlabeled_per_known {
            plan.push((next_id, class, false));
            next_id += 1;
        }
    }
    for class in config.k_known..config.total_classes() {
        for _ in 0..config.unlabeled_per_novel {
            plan.push((next_id, class, false));
            next_id += 1;
        }
    }

    let samples: Vec<(u64, usize, bool, Vec<f64>)> = plan
        .par_iter()
        .map(|&(id, class, labeled)| {
            let mut rng = derive_rng(config.seed, StreamPurpose::SampleNoise, id, 0);
            let features = match config.mode {
                Mode::FeatureVector => {
                    feature_sample(&means[class], config.intra_noise_eta, &mut rng)
                }
                Mode::ToyImage => {
                    let mut pix_rng = derive_rng(config.seed, StreamPurpose::PixelNoise, id, 0);
                    image_sample(
                        &base_coeffs,
                        &fingerprints[class],
                        config.image_side,
                        &mut pix_rng,
                    )
                }
            };
            (id, class, labeled, features)
        })
        .collect();

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    let mut hidden = Vec::new();
    for (_, class, is_labeled, features) in samples {
        if is_labeled {
            labeled.push((features, class));
        } else {
            unlabeled.push(features);
            hidden.push(class);
        }
    }

    Ok(SynthDataset::from_parts(
        config.clone(),
        means,
        fingerprints,
        labeled,
        unlabeled,
        hidden,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dct2;

    #[test]
    fn forced_orthogonal_geometry() {
        let config = SynthConfig {
            k_known: 2,
            k_novel: 0,
            feature_dim: 2,
            min_angle_gamma: std::f64::consts::FRAC_PI_2,
            intra_noise_eta: 0.1,
            labeled_per_known: 20,
            unlabeled_per_known: 5,
            unlabeled_per_novel: 0,
            ..SynthConfig::default()
        };
        let data = generate(&config).unwrap();
        let angle = angle_between(&data.class_means[0], &data.class_means[1]);
        assert!(angle >= config.min_angle_gamma - 1e-9);
        for (features, class) in data.labeled() {
            let a = angle_between(features, &data.class_means[*class]);
            assert!(a <= config.intra_noise_eta + 1e-9, "angle {a}");
        }
    }

    #[test]
    fn default_split_sizes() {
        let config = SynthConfig::default();
        let data = generate(&config).unwrap();
        assert_eq!(data.n_labeled(), 5 * 150);
        assert_eq!(data.n_unlabeled(), 5 * 50 + 10 * 150);
        // Labeled set never contains a novel class.
        assert!(data.labeled().iter().all(|(_, c)| *c < config.k_known));
    }

    #[test]
    fn determinism() {
        let config = SynthConfig::default();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn class_means_respect_min_angle() {
        let config = SynthConfig::default();
        let data = generate(&config).unwrap();
        let k = config.total_classes();
        for i in 0..k {
            for j in (i + 1)..k {
                let angle = angle_between(&data.class_means[i], &data.class_means[j]);
                assert!(
                    angle >= config.min_angle_gamma - 1e-9,
                    "classes {i},{j}: {angle}"
                );
            }
        }
    }

    #[test]
    fn samples_stay_in_cones() {
        let config = SynthConfig::default();
        let data = generate(&config).unwrap();
        for (i, features) in data.unlabeled().iter().enumerate() {
            let class = data.hidden_truths()[i];
            let a = angle_between(features, &data.class_means[class]);
            assert!(a <= config.intra_noise_eta + 1e-9);
        }
    }

    #[test]
    fn infeasible_geometry_is_rejected() {
        let config = SynthConfig {
            k_known: 5,
            k_novel: 3,
            feature_dim: 2,
            min_angle_gamma: 1.2,
            intra_noise_eta: 0.1,
            ..SynthConfig::default()
        };
        match generate(&config) {
            Err(SynthError::GeometryInfeasible { .. }) => {}
            other => panic!("expected geometry error, got {other:?}"),
        }
    }

    /// Nearest-fingerprint classification of clean toy images is perfect.
    #[test]
    fn image_fingerprints_are_separable() {
        let config = SynthConfig {
            labeled_per_known: 10,
            unlabeled_per_known: 5,
            unlabeled_per_novel: 10,
            ..SynthConfig::image_preset()
        };
        let data = generate(&config).unwrap();
        let side = config.image_side;
        let classify = |img: &[f64]| -> usize {
            let coeffs = dct2(&Tensor::new(vec![side, side], img.to_vec()));
            let mut best = (0, f64::NEG_INFINITY);
            for (c, fp) in data.fingerprints.iter().enumerate() {
                let score: f64 = fp
                    .indices
                    .iter()
                    .zip(&fp.values)
                    .map(|(&i, &v)| coeffs.data()[i] * v.signum())
                    .sum();
                if score > best.1 {
                    best = (c, score);
                }
            }
            best.0
        };
        for (img, class) in data.labeled() {
            assert_eq!(classify(img), *class);
        }
        for (i, img) in data.unlabeled().iter().enumerate() {
            assert_eq!(classify(img), data.hidden_truths()[i]);
        }
    }
}
