//! The training loop: stratified batch assembly, view generation, loss
//! composition per method, adaptive-moment updates, warm-up gating, the
//! per-epoch confidence-gap refresh and prototype pruning, evaluation
//! logging, and bit-identical checkpoint/resume.

mod batches;
mod checkpoint;
mod run;
mod step;

pub use batches::{make_batches, Batch};
pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use run::{resume, run};
pub use step::train_step;

use crate::dpp::{DppConfig, DppError};
use crate::losses::{LossBundle, LossConfig, LossError};
use crate::metrics::{EvalReport, MetricsError};
use crate::model::{ModelError, ModelParams, PrototypeBank};
use crate::numerics::NumericsError;
use crate::synthdata::SynthError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(
        "non-finite loss at epoch {epoch} step {step} \
         (l_ce={l_ce}, r_reg={r_reg}, l_ccr={l_ccr}, l_acr={l_acr}; \
         labeled batch {labeled:?}, unlabeled batch {unlabeled:?})"
    )]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        l_ce: f64,
        r_reg: f64,
        l_ccr: f64,
        l_acr: f64,
        labeled: Vec<usize>,
        unlabeled: Vec<usize>,
    },
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Dpp(#[from] DppError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which unlabeled objective the run trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Confidence-aware consistency plus asymmetric reinforcement.
    Cal,
    /// Gumbel-sampled hard pseudo-labels weighted by their own confidence.
    GumbelBaseline,
    /// Fixed-threshold consistency in place of the self-calibrated weights
    /// (asymmetric reinforcement stays on).
    FixmatchBaseline,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cal" => Ok(Method::Cal),
            "gumbel-baseline" => Ok(Method::GumbelBaseline),
            "fixmatch-baseline" => Ok(Method::FixmatchBaseline),
            other => Err(format!(
                "unknown method {other:?}; expected cal | gumbel-baseline | fixmatch-baseline"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cal => "cal",
            Method::GumbelBaseline => "gumbel-baseline",
            Method::FixmatchBaseline => "fixmatch-baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub hidden_dim: usize,
    pub loss: LossConfig,
    pub dpp: DppConfig,
    pub method: Method,
    /// True: the prototype budget is the exact class count. False: a large
    /// budget is allocated and pruned down.
    pub know_k_u: bool,
    /// Set false to keep the full budget while still tracking usage
    /// (class-count estimation off, diagnostics on).
    pub prune: bool,
    pub seed: u64,
    pub eval_every: usize,
    /// 0 disables intermediate checkpoints; the final epoch is always
    /// written when an output directory is given.
    pub checkpoint_every: usize,
    /// Frequency-enhancement toggle (toy-image datasets only).
    pub ffe_enabled: bool,
    /// Dataset directory this run was started from, echoed for tooling.
    pub data_dir: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            hidden_dim: 64,
            loss: LossConfig::default(),
            dpp: DppConfig::default(),
            method: Method::Cal,
            know_k_u: true,
            prune: true,
            seed: 0,
            eval_every: 1,
            checkpoint_every: 0,
            ffe_enabled: false,
            data_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 2".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        let mut loss = self.loss.clone();
        loss.epochs_total = self.epochs;
        loss.validate().map_err(TrainError::InvalidConfig)?;
        self.dpp.validate().map_err(TrainError::InvalidConfig)?;
        Ok(())
    }
}

/// First- and second-moment accumulators keyed by parameter name, plus the
/// shared step counter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    /// One update of `param` from `grad`; `row_live` masks prototype rows so
    /// retired slots neither move nor accumulate moments.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        name: &str,
        param: &mut [f64],
        grad: &[f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        row_live: Option<(&[bool], usize)>,
    ) {
        let m = self
            .m
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; param.len()]);
        let v = self
            .v
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; param.len()]);
        let t = self.t as f64;
        let bc1 = 1.0 - beta1.powf(t);
        let bc2 = 1.0 - beta2.powf(t);
        for i in 0..param.len() {
            if let Some((live, dim)) = row_live {
                if !live[i / dim] {
                    continue;
                }
            }
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// Drops the moment rows of a retired prototype.
    pub fn drop_prototype_rows(&mut self, retired: &[usize], dim: usize) {
        for buf in [self.m.get_mut("prototypes"), self.v.get_mut("prototypes")]
            .into_iter()
            .flatten()
        {
            for &k in retired {
                for x in &mut buf[k * dim..(k + 1) * dim] {
                    *x = 0.0;
                }
            }
        }
    }
}

/// Everything the loop carries across epochs; checkpoints serialize exactly
/// this plus the config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub epoch_completed: usize,
    pub model: ModelParams,
    pub bank: PrototypeBank,
    pub adam: AdamState,
    /// Confidence gap ratio refreshed at epoch boundaries; neutral before
    /// warm-up ends.
    pub gap_ratio: f64,
}

/// Per-step loss log row.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLossRow {
    pub epoch: usize,
    pub step: usize,
    pub l_ce: f64,
    pub r_reg: f64,
    pub l_ccr: f64,
    pub l_acr: f64,
    pub gap_ratio: f64,
    pub total: f64,
}

/// Per-epoch class-count estimation row.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub epoch: usize,
    pub k_star: usize,
    pub n_low: usize,
    pub estimated_k: usize,
}

/// Full in-memory record of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: TrainConfig,
    pub state: RunState,
    pub metrics: Vec<(usize, EvalReport)>,
    pub losses: Vec<StepLossRow>,
    pub estimates: Vec<EstimateRow>,
    /// Usage counts accumulated per epoch (snapshot before pruning resets
    /// them); only populated when the class count is treated as unknown.
    pub usage_history: Vec<(usize, Vec<u64>)>,
}

impl RunSummary {
    pub fn final_report(&self) -> Option<&EvalReport> {
        self.metrics.last().map(|(_, r)| r)
    }

    pub fn final_estimate(&self) -> Option<usize> {
        self.estimates.last().map(|row| row.estimated_k)
    }
}

impl From<&LossBundle> for StepLossRow {
    fn from(bundle: &LossBundle) -> Self {
        Self {
            epoch: 0,
            step: 0,
            l_ce: bundle.l_ce,
            r_reg: bundle.r_reg,
            l_ccr: bundle.l_ccr,
            l_acr: bundle.l_acr,
            gap_ratio: bundle.gap_ratio,
            total: bundle.total,
        }
    }
}
