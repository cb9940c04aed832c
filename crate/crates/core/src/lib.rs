//! Desk-scale laboratory for open-world attribution.
//!
//! The crate trains a prototypical classifier on synthetic open-world data
//! where only part of the class set carries labels, and studies how pseudo-label
//! confidence behaves across known and novel classes. It contains:
//!
//! * [`numerics`] — dense tensors, a reverse-mode gradient tape, orthonormal
//!   2-D DCT, and seeded sampling (including Gumbel-max categorical draws);
//! * [`synthdata`] — synthetic dataset generation with angular cluster
//!   geometry, deterministic augmentation, and a diff-able on-disk format;
//! * [`model`] — the encoder + prototype bank + frequency-enhancement path;
//! * [`losses`] — supervised, consistency, self-calibrated, and asymmetric
//!   reinforcement objectives, plus the thresholded and Gumbel baselines;
//! * [`dpp`] — dynamic prototype pruning for class-count estimation;
//! * [`metrics`] — Hungarian-aligned clustering accuracy, NMI, ARI, and
//!   confidence-skew observables;
//! * [`skewlab`] — executable diagnostics for the pseudo-label pathology;
//! * [`trainer`] — the deterministic training loop with checkpoint/resume.

pub mod dpp;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod skewlab;
pub mod synthdata;
pub mod trainer;
pub mod util;

pub use dpp::{DppConfig, PruneReport, UsageCounter};
pub use losses::{LossBundle, LossConfig};
pub use metrics::EvalReport;
pub use model::{FfeParams, ModelParams, PrototypeBank};
pub use numerics::{SeededRng, Tape, Tensor, Var};
pub use synthdata::{Mode, SynthConfig, SynthDataset};
pub use trainer::{Method, RunState, RunSummary, TrainConfig};
