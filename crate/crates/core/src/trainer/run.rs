use super::checkpoint::{checkpoint_load, checkpoint_save};
use super::{
    make_batches, train_step, EstimateRow, RunState, RunSummary, StepLossRow, TrainConfig,
    TrainError,
};
use crate::dpp::{run_epoch as dpp_run_epoch, UsageCounter};
use crate::losses::acr_gap;
use crate::metrics::{evaluate, EvalReport};
use crate::model::{logits_nograd, EncoderParams, FfeParams, ModelParams, PrototypeBank};
use crate::numerics::{softmax, Tensor};
use crate::synthdata::{augment, Mode, Strength, SynthDataset};
use crate::util::fmt_f64;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Builds the initial run state: fresh encoder, prototype budget sized by
/// whether the class count is known, known prototypes warm-started from
/// labeled feature means, novel prototypes random on the sphere.
pub(crate) fn init_state(
    config: &TrainConfig,
    dataset: &SynthDataset,
) -> Result<RunState, TrainError> {
    config.validate()?;
    let data_cfg = &dataset.config;
    let k_known = data_cfg.k_known;
    let k_total = if config.know_k_u {
        data_cfg.total_classes()
    } else {
        config.dpp.initial_k_multiplier * k_known
    };
    if k_total < data_cfg.total_classes() && !config.know_k_u {
        return Err(TrainError::InvalidConfig(format!(
            "prototype budget {k_total} below true class count {}",
            data_cfg.total_classes()
        )));
    }
    let encoder = EncoderParams::init(
        data_cfg.input_dim(),
        config.hidden_dim,
        data_cfg.feature_dim,
        config.seed,
    );
    let ffe = match data_cfg.mode {
        Mode::ToyImage if config.ffe_enabled => Some(FfeParams::init(data_cfg.image_side, config.seed)),
        _ => None,
    };
    if config.ffe_enabled && data_cfg.mode == Mode::FeatureVector {
        return Err(TrainError::InvalidConfig(
            "frequency enhancement requires a toy-image dataset".into(),
        ));
    }
    let model = ModelParams::new(data_cfg.mode, encoder, ffe)?;

    let mut bank = PrototypeBank::init(k_known, k_total, data_cfg.feature_dim, config.seed);
    let mut sums = vec![vec![0.0; data_cfg.feature_dim]; k_known];
    let mut counts = vec![0usize; k_known];
    for (sample, class) in dataset.labeled() {
        let h = model.features_nograd(sample);
        for (s, v) in sums[*class].iter_mut().zip(&h) {
            *s += v;
        }
        counts[*class] += 1;
    }
    for (sum, count) in sums.iter_mut().zip(counts) {
        if count > 0 {
            for v in sum.iter_mut() {
                *v /= count as f64;
            }
        }
    }
    bank.set_known_from_means(&sums);
    bank.renormalize_live();

    Ok(RunState {
        epoch_completed: 0,
        model,
        bank,
        adam: Default::default(),
        gap_ratio: 1.0,
    })
}

/// Known/novel confidence ratio over the entire unlabeled set, using the
/// epoch's weak views and the current parameters.
fn refresh_gap_ratio(state: &RunState, dataset: &SynthDataset, epoch: usize, seed: u64) -> f64 {
    let live_map = state.bank.live_indices();
    let k_known = state.bank.k_known;
    let items = dataset.unlabeled().iter().enumerate().map(|(ui, sample)| {
        let id = dataset.unlabeled_sample_id(ui);
        let weak = augment(sample, id, epoch, seed, Strength::Weak, &dataset.config);
        let h = state.model.features_nograd(&weak);
        let p = softmax(&Tensor::vector(logits_nograd(&h, &state.bank)), 1.0)
            .expect("unit temperature")
            .into_data();
        let arg = super::step::argmax(&p);
        (p[arg], live_map[arg] < k_known)
    });
    acr_gap(items).ratio
}

struct RunWriters {
    dir: PathBuf,
    metrics: fs::File,
    losses: fs::File,
    estimates: fs::File,
}

impl RunWriters {
    fn create(dir: &Path, config: &TrainConfig) -> Result<Self, TrainError> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        let mut config_file = fs::File::create(dir.join("config.json"))?;
        config_file.write_all(serde_json::to_string_pretty(config)?.as_bytes())?;
        config_file.write_all(b"\n")?;
        let mut metrics = fs::File::create(dir.join("metrics.csv"))?;
        metrics.write_all(METRICS_HEADER.as_bytes())?;
        let mut losses = fs::File::create(dir.join("losses.csv"))?;
        losses.write_all(b"epoch,step,l_ce,r_reg,l_ccr,l_acr,gap_ratio,total\n")?;
        let mut estimates = fs::File::create(dir.join("estimates.csv"))?;
        estimates.write_all(b"epoch,k_star,n_low,estimated_K\n")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics,
            losses,
            estimates,
        })
    }
}

pub const METRICS_HEADER: &str =
    "epoch,all_acc,all_nmi,all_ari,novel_acc,novel_nmi,novel_ari,known_acc,skew_delta,lowconf_noise\n";

/// Renders one metrics row exactly as it appears in metrics.csv; shared by
/// the training loop and re-evaluation so the bytes match.
pub fn format_metrics_row(epoch: usize, report: &EvalReport) -> String {
    let skew = report.skew_delta.map(fmt_f64).unwrap_or_default();
    format!(
        "{epoch},{},{},{},{},{},{},{},{skew},{}\n",
        fmt_f64(report.all_acc),
        fmt_f64(report.all_nmi),
        fmt_f64(report.all_ari),
        fmt_f64(report.novel_acc),
        fmt_f64(report.novel_nmi),
        fmt_f64(report.novel_ari),
        fmt_f64(report.known_acc),
        fmt_f64(report.lowconf_noise),
    )
}

fn format_loss_row(row: &StepLossRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        row.epoch,
        row.step,
        fmt_f64(row.l_ce),
        fmt_f64(row.r_reg),
        fmt_f64(row.l_ccr),
        fmt_f64(row.l_acr),
        fmt_f64(row.gap_ratio),
        fmt_f64(row.total),
    )
}

/// Trains from scratch. With an output directory the run writes config.json,
/// metrics.csv, losses.csv, estimates.csv, and checkpoints/.
pub fn run(
    config: &TrainConfig,
    dataset: &SynthDataset,
    out_dir: Option<&Path>,
) -> Result<RunSummary, TrainError> {
    let state = init_state(config, dataset)?;
    run_epochs(config.clone(), dataset, state, out_dir)
}

/// Continues a checkpointed run to its configured epoch count. The resumed
/// trajectory is bit-identical to the uninterrupted one.
pub fn resume(
    ckpt_path: &Path,
    dataset: &SynthDataset,
    out_dir: Option<&Path>,
) -> Result<RunSummary, TrainError> {
    let (config, state) = checkpoint_load(ckpt_path)?;
    run_epochs(config, dataset, state, out_dir)
}

fn run_epochs(
    config: TrainConfig,
    dataset: &SynthDataset,
    mut state: RunState,
    out_dir: Option<&Path>,
) -> Result<RunSummary, TrainError> {
    config.validate()?;
    let mut writers = match out_dir {
        Some(dir) => Some(RunWriters::create(dir, &config)?),
        None => None,
    };
    let mut summary = RunSummary {
        config: config.clone(),
        state: state.clone(),
        metrics: Vec::new(),
        losses: Vec::new(),
        estimates: Vec::new(),
        usage_history: Vec::new(),
    };

    let warmup = config.loss.warmup_epochs;
    for epoch in state.epoch_completed..config.epochs {
        let batches = make_batches(
            dataset.n_labeled(),
            dataset.n_unlabeled(),
            config.batch_size,
            epoch,
            config.seed,
        );
        // Usage statistics exist only when the class count is unknown.
        let mut counter = (!config.know_k_u).then(|| UsageCounter::new(state.bank.k_total));
        for (step_idx, batch) in batches.iter().enumerate() {
            let bundle = train_step(
                dataset,
                batch,
                &mut state,
                &config,
                counter.as_mut(),
                epoch,
                step_idx,
            )?;
            let row = StepLossRow {
                epoch,
                step: step_idx,
                ..StepLossRow::from(&bundle)
            };
            if let Some(w) = writers.as_mut() {
                w.losses.write_all(format_loss_row(&row).as_bytes())?;
            }
            summary.losses.push(row);
        }

        // Epoch boundary: gap refresh, then pruning, then evaluation.
        if epoch >= warmup {
            state.gap_ratio = refresh_gap_ratio(&state, dataset, epoch, config.seed);
        }
        if let Some(counter) = counter.as_mut() {
            summary.usage_history.push((epoch, counter.counts().to_vec()));
            if config.prune {
                let report = dpp_run_epoch(counter, &mut state.bank, &config.dpp)?;
                let row = EstimateRow {
                    epoch,
                    k_star: report.k_star,
                    n_low: report.low.len(),
                    estimated_k: report.estimated_total,
                };
                if let Some(w) = writers.as_mut() {
                    w.estimates.write_all(
                        format!(
                            "{},{},{},{}\n",
                            row.epoch, row.k_star, row.n_low, row.estimated_k
                        )
                        .as_bytes(),
                    )?;
                }
                summary.estimates.push(row);
            }
        }
        let last_epoch = epoch + 1 == config.epochs;
        if config.eval_every > 0 && ((epoch + 1) % config.eval_every == 0 || last_epoch) {
            let report = evaluate(&state.model, &state.bank, dataset)?;
            if let Some(w) = writers.as_mut() {
                w.metrics
                    .write_all(format_metrics_row(epoch, &report).as_bytes())?;
            }
            summary.metrics.push((epoch, report));
        }

        state.epoch_completed = epoch + 1;
        if let Some(w) = writers.as_ref() {
            let due = config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0;
            if due || last_epoch {
                let path = w.dir.join(format!("checkpoints/epoch_{:03}.ckpt", epoch + 1));
                checkpoint_save(&config, &state, &path)?;
            }
        }
    }

    summary.state = state;
    Ok(summary)
}
