//! Synthetic open-world attribution datasets.
//!
//! Classes live on the unit sphere: class means are separated by a minimum
//! pairwise angle and every sample sits inside a cone of bounded angular
//! radius around its mean, so the separability assumptions the losses and
//! pruning analysis rely on hold by construction. A toy-image mode instead
//! plants a class-specific sparse DCT fingerprint into each image.

mod augment;
mod gen;
mod io;

pub use augment::{augment, Strength, ViewPair};
pub use io::{load, save};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("geometry infeasible: could not place {placed} of {requested} class means with min angle {min_angle} in {dim} dimensions")]
    GeometryInfeasible {
        placed: usize,
        requested: usize,
        min_angle: f64,
        dim: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("checksum mismatch: samples file does not match manifest")]
    ChecksumMismatch,
    #[error("malformed samples row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

/// Sample representation: feature vectors or small square images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FeatureVector,
    ToyImage,
}

/// Generation parameters. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub k_known: usize,
    pub k_novel: usize,
    pub feature_dim: usize,
    pub min_angle_gamma: f64,
    pub intra_noise_eta: f64,
    pub labeled_per_known: usize,
    pub unlabeled_per_known: usize,
    pub unlabeled_per_novel: usize,
    pub mode: Mode,
    pub image_side: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Desk-scale defaults: 5 known + 10 novel classes in 32 dimensions,
    /// 0.6 rad minimum separation, 0.2 rad intra-class spread, and a 3:1
    /// labeled:unlabeled split for known classes (150/50 per class, 150 per
    /// novel class).
    fn default() -> Self {
        Self {
            k_known: 5,
            k_novel: 10,
            feature_dim: 32,
            min_angle_gamma: 0.6,
            intra_noise_eta: 0.2,
            labeled_per_known: 150,
            unlabeled_per_known: 50,
            unlabeled_per_novel: 150,
            mode: Mode::FeatureVector,
            image_side: 16,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Toy-image preset with the same class structure as the default.
    pub fn image_preset() -> Self {
        Self {
            mode: Mode::ToyImage,
            ..Self::default()
        }
    }

    pub fn total_classes(&self) -> usize {
        self.k_known + self.k_novel
    }

    /// Sample dimensionality as seen by the model.
    pub fn input_dim(&self) -> usize {
        match self.mode {
            Mode::FeatureVector => self.feature_dim,
            Mode::ToyImage => self.image_side * self.image_side,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.k_known < 1 {
            return Err(SynthError::InvalidConfig("k_known must be >= 1".into()));
        }
        if self.feature_dim < 2 {
            return Err(SynthError::InvalidConfig("feature_dim must be >= 2".into()));
        }
        if !(self.min_angle_gamma > 0.0 && self.min_angle_gamma.is_finite()) {
            return Err(SynthError::InvalidConfig(
                "min_angle_gamma must be positive".into(),
            ));
        }
        if self.intra_noise_eta < 0.0 || !self.intra_noise_eta.is_finite() {
            return Err(SynthError::InvalidConfig(
                "intra_noise_eta must be nonnegative".into(),
            ));
        }
        if 2.0 * self.intra_noise_eta >= self.min_angle_gamma {
            return Err(SynthError::InvalidConfig(format!(
                "separability requires 2*eta < gamma (eta={}, gamma={})",
                self.intra_noise_eta, self.min_angle_gamma
            )));
        }
        if self.labeled_per_known == 0 {
            return Err(SynthError::InvalidConfig(
                "labeled_per_known must be positive".into(),
            ));
        }
        if self.mode == Mode::ToyImage && self.image_side < 2 {
            return Err(SynthError::InvalidConfig("image_side must be >= 2".into()));
        }
        Ok(())
    }
}

/// Sparse DCT signature identifying one class in toy-image mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// A generated dataset. Hidden truths for unlabeled samples are private;
/// training code sees only [`SynthDataset::unlabeled`], while the evaluator
/// reads [`SynthDataset::hidden_truths`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub class_means: Vec<Vec<f64>>,
    pub fingerprints: Vec<Fingerprint>,
    labeled: Vec<(Vec<f64>, usize)>,
    unlabeled: Vec<Vec<f64>>,
    hidden: Vec<usize>,
}

impl SynthDataset {
    pub(crate) fn from_parts(
        config: SynthConfig,
        class_means: Vec<Vec<f64>>,
        fingerprints: Vec<Fingerprint>,
        labeled: Vec<(Vec<f64>, usize)>,
        unlabeled: Vec<Vec<f64>>,
        hidden: Vec<usize>,
    ) -> Self {
        assert_eq!(unlabeled.len(), hidden.len());
        Self {
            config,
            class_means,
            fingerprints,
            labeled,
            unlabeled,
            hidden,
        }
    }

    pub fn labeled(&self) -> &[(Vec<f64>, usize)] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[Vec<f64>] {
        &self.unlabeled
    }

    /// Ground truth for unlabeled samples. Evaluator-only; the trainer never
    /// reads this.
    pub fn hidden_truths(&self) -> &[usize] {
        &self.hidden
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    /// Class role per class index: true means novel (absent from labels).
    pub fn is_novel_class(&self, class: usize) -> bool {
        class >= self.config.k_known
    }

    /// Global sample id of the i-th labeled sample.
    pub fn labeled_sample_id(&self, i: usize) -> u64 {
        i as u64
    }

    /// Global sample id of the i-th unlabeled sample.
    pub fn unlabeled_sample_id(&self, i: usize) -> u64 {
        (self.labeled.len() + i) as u64
    }
}

pub use gen::generate;
