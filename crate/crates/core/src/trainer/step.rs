use super::{Batch, Method, RunState, TrainConfig, TrainError};
use crate::dpp::UsageCounter;
use crate::losses::{
    acr_targets, ccr_targets, gumbel_targets, loss_entropy_reg, loss_supervised, target_ce_mean,
    ws_targets, LossBundle, LossConfig,
};
use crate::model::logits_nograd;
use crate::numerics::{derive_rng, softmax, StreamPurpose, Tensor};
use crate::synthdata::{augment, Strength, SynthDataset};

/// Lowest index of the maximal entry.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One optimization step over one stratified batch.
///
/// The weak views of unlabeled samples run without gradient tracking: every
/// quantity derived from them (sharpened targets, hard pseudo-labels,
/// confidences) enters the tape as constant data. Returns the audited loss
/// bundle; the model, bank, and optimizer state are updated in place.
pub fn train_step(
    dataset: &SynthDataset,
    batch: &Batch,
    state: &mut RunState,
    config: &TrainConfig,
    mut counter: Option<&mut UsageCounter>,
    epoch: usize,
    step_idx: usize,
) -> Result<LossBundle, TrainError> {
    assert!(
        !batch.labeled.is_empty() && !batch.unlabeled.is_empty(),
        "batches must mix labeled and unlabeled samples"
    );
    let loss_cfg = LossConfig {
        epochs_total: config.epochs,
        ..config.loss.clone()
    };
    let data_cfg = &dataset.config;
    let seed = config.seed;
    let k_known = state.bank.k_known;
    let live_map = state.bank.live_indices();
    let k_live = live_map.len();

    // Unlabeled weak views: inference only.
    let n_u = batch.unlabeled.len();
    let mut plain_weak: Vec<Vec<f64>> = Vec::with_capacity(n_u);
    let mut sharp_weak: Vec<Vec<f64>> = Vec::with_capacity(n_u);
    let mut weak_stats: Vec<(f64, usize, bool)> = Vec::with_capacity(n_u);
    for &ui in &batch.unlabeled {
        let sample = &dataset.unlabeled()[ui];
        let id = dataset.unlabeled_sample_id(ui);
        let weak = augment(sample, id, epoch, seed, Strength::Weak, data_cfg);
        let h = state.model.features_nograd(&weak);
        let logits = Tensor::vector(logits_nograd(&h, &state.bank));
        let p_w = softmax(&logits, 1.0)?.into_data();
        let p_sharp = softmax(&logits, loss_cfg.tau)?.into_data();
        let live_argmax = argmax(&p_w);
        let global = live_map[live_argmax];
        if let Some(c) = counter.as_deref_mut() {
            c.record(global);
        }
        weak_stats.push((p_w[live_argmax], live_argmax, global < k_known));
        plain_weak.push(p_w);
        sharp_weak.push(p_sharp);
    }

    // Augmented views that receive gradient.
    let labeled_weak: Vec<Vec<f64>> = batch
        .labeled
        .iter()
        .map(|&li| {
            let (sample, _) = &dataset.labeled()[li];
            augment(
                sample,
                dataset.labeled_sample_id(li),
                epoch,
                seed,
                Strength::Weak,
                data_cfg,
            )
        })
        .collect();
    let labeled_strong: Vec<Vec<f64>> = batch
        .labeled
        .iter()
        .map(|&li| {
            let (sample, _) = &dataset.labeled()[li];
            augment(
                sample,
                dataset.labeled_sample_id(li),
                epoch,
                seed,
                Strength::Strong,
                data_cfg,
            )
        })
        .collect();
    let unlabeled_strong: Vec<Vec<f64>> = batch
        .unlabeled
        .iter()
        .map(|&ui| {
            augment(
                &dataset.unlabeled()[ui],
                dataset.unlabeled_sample_id(ui),
                epoch,
                seed,
                Strength::Strong,
                data_cfg,
            )
        })
        .collect();
    let labels: Vec<usize> = batch.labeled.iter().map(|&li| dataset.labeled()[li].1).collect();

    let mut tape = crate::numerics::Tape::new();
    let binding = state.model.bind(&mut tape, &state.bank);
    fn as_refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(|r| r.as_slice()).collect()
    }

    let h_lw = binding.features(&mut tape, &as_refs(&labeled_weak));
    let s_lw = binding.logits(&mut tape, h_lw);
    let p_lw = tape.softmax_rows(s_lw, 1.0)?;
    let h_ls = binding.features(&mut tape, &as_refs(&labeled_strong));
    let s_ls = binding.logits(&mut tape, h_ls);
    let p_ls = tape.softmax_rows(s_ls, 1.0)?;
    let h_us = binding.features(&mut tape, &as_refs(&unlabeled_strong));
    let s_us = binding.logits(&mut tape, h_us);
    let p_us = tape.softmax_rows(s_us, 1.0)?;

    let l_ce = loss_supervised(&mut tape, p_lw, p_ls, &labels, k_known, k_live)?;
    let all_preds = tape.concat_rows(vec![p_lw, p_ls, p_us]);
    let p_bar = tape.mean_axis0(all_preds);
    let r_reg = loss_entropy_reg(&mut tape, p_bar);

    let acr_active = epoch > loss_cfg.warmup_epochs && config.method != Method::GumbelBaseline;
    let (ccr_var, acr_var, ccr_weights, acr_mask) = match config.method {
        Method::Cal => {
            let (targets, weights) = ccr_targets(&sharp_weak, epoch, &loss_cfg);
            let ccr = target_ce_mean(&mut tape, p_us, targets);
            let (acr, mask) = if acr_active {
                let (targets, mask) = acr_targets(&weak_stats, k_live, state.gap_ratio, &loss_cfg);
                (Some(target_ce_mean(&mut tape, p_us, targets)), mask)
            } else {
                (None, vec![false; n_u])
            };
            (Some(ccr), acr, weights, mask)
        }
        Method::FixmatchBaseline => {
            let (targets, selected) = ws_targets(&sharp_weak, loss_cfg.delta);
            let ws = target_ce_mean(&mut tape, p_us, targets);
            let weights = selected.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
            let (acr, mask) = if acr_active {
                let (targets, mask) = acr_targets(&weak_stats, k_live, state.gap_ratio, &loss_cfg);
                (Some(target_ce_mean(&mut tape, p_us, targets)), mask)
            } else {
                (None, vec![false; n_u])
            };
            (Some(ws), acr, weights, mask)
        }
        Method::GumbelBaseline => {
            let mut rng = derive_rng(
                seed,
                StreamPurpose::PseudoLabel,
                epoch as u64,
                step_idx as u64,
            );
            let (targets, _draws) = gumbel_targets(&plain_weak, &mut rng)?;
            let g = target_ce_mean(&mut tape, p_us, targets);
            (None, Some(g), Vec::new(), Vec::new())
        }
    };

    // Total per the weighted sum: L_ce + R + L_acr + alpha * L_ccr.
    let mut total = tape.add(l_ce, r_reg);
    if let Some(acr) = acr_var {
        total = tape.add(total, acr);
    }
    if let Some(ccr) = ccr_var {
        let scaled = tape.scale(ccr, loss_cfg.alpha);
        total = tape.add(total, scaled);
    }

    let value = |v| tape.value(v).data()[0];
    let bundle = LossBundle {
        l_ce: value(l_ce),
        r_reg: value(r_reg),
        l_ccr: ccr_var.map_or(0.0, value),
        l_acr: acr_var.map_or(0.0, value),
        total: value(total),
        ccr_weights,
        acr_mask,
        gap_ratio: state.gap_ratio,
    };
    if !bundle.total.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            epoch,
            step: step_idx,
            l_ce: bundle.l_ce,
            r_reg: bundle.r_reg,
            l_ccr: bundle.l_ccr,
            l_acr: bundle.l_acr,
            labeled: batch.labeled.clone(),
            unlabeled: batch.unlabeled.clone(),
        });
    }

    let grads = tape.backward(total)?;
    let RunState {
        model, bank, adam, ..
    } = state;
    adam.t += 1;
    let (lr, b1, b2, eps) = (
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_eps,
    );
    let enc = &mut model.encoder;
    adam.update("encoder.w1", &mut enc.w1, grads.get(binding.w1), lr, b1, b2, eps, None);
    adam.update("encoder.b1", &mut enc.b1, grads.get(binding.b1), lr, b1, b2, eps, None);
    adam.update("encoder.w2", &mut enc.w2, grads.get(binding.w2), lr, b1, b2, eps, None);
    adam.update("encoder.b2", &mut enc.b2, grads.get(binding.b2), lr, b1, b2, eps, None);
    if let (Some(gain_var), Some(bias_var), Some(ffe)) =
        (binding.ffe_gain, binding.ffe_bias, model.ffe.as_mut())
    {
        adam.update("ffe.gain", &mut ffe.gain, grads.get(gain_var), lr, b1, b2, eps, None);
        adam.update("ffe.bias", &mut ffe.bias, grads.get(bias_var), lr, b1, b2, eps, None);
    }
    let live = bank.live.clone();
    let dim = bank.dim;
    adam.update(
        "prototypes",
        &mut bank.protos,
        grads.get(binding.protos_full),
        lr,
        b1,
        b2,
        eps,
        Some((&live, dim)),
    );
    bank.renormalize_live();

    Ok(bundle)
}
