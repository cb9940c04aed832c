use super::{acc, ari, hungarian_align, nmi, MetricsError};
use crate::model::{logits_nograd, ModelParams, PrototypeBank};
use crate::numerics::softmax;
use crate::synthdata::SynthDataset;
use std::collections::BTreeMap;

/// One evaluation pass: Hungarian-aligned All/Novel metrics, direct Known
/// accuracy, the known-vs-novel confidence gap, and the low-confidence noise
/// proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub all_acc: f64,
    pub all_nmi: f64,
    pub all_ari: f64,
    pub novel_acc: f64,
    pub novel_nmi: f64,
    pub novel_ari: f64,
    pub known_acc: f64,
    /// Mean top-1 confidence on truth-known minus truth-novel samples; None
    /// when either side is empty.
    pub skew_delta: Option<f64>,
    /// Fraction of truth-novel samples that are both low-confidence (< 0.5)
    /// and wrongly pseudo-labeled under the global alignment.
    pub lowconf_noise: f64,
    pub alignment: BTreeMap<usize, usize>,
}

/// Confidence gap between truth-known and truth-novel samples.
pub fn skew_delta(confidences: &[f64], novel_mask: &[bool]) -> Option<f64> {
    let (mut known_sum, mut known_n) = (0.0, 0usize);
    let (mut novel_sum, mut novel_n) = (0.0, 0usize);
    for (&c, &novel) in confidences.iter().zip(novel_mask) {
        if novel {
            novel_sum += c;
            novel_n += 1;
        } else {
            known_sum += c;
            known_n += 1;
        }
    }
    if known_n == 0 || novel_n == 0 {
        return None;
    }
    Some(known_sum / known_n as f64 - novel_sum / novel_n as f64)
}

/// Among truth-novel samples: fraction with confidence in [0, 0.5) whose
/// aligned pseudo-label disagrees with the hidden truth.
pub fn lowconf_noise(
    pred: &[usize],
    confidences: &[f64],
    truth: &[usize],
    novel_mask: &[bool],
    alignment: &BTreeMap<usize, usize>,
) -> f64 {
    let mut novel_total = 0usize;
    let mut noisy = 0usize;
    for i in 0..pred.len() {
        if !novel_mask[i] {
            continue;
        }
        novel_total += 1;
        let mapped_ok = alignment.get(&pred[i]) == Some(&truth[i]);
        if confidences[i] < 0.5 && !mapped_ok {
            noisy += 1;
        }
    }
    if novel_total == 0 {
        0.0
    } else {
        noisy as f64 / novel_total as f64
    }
}

/// Metric computation over raw prediction arrays. `pred` carries global
/// prototype indices; truth classes below `k_known` are the known ones.
pub fn evaluate_predictions(
    pred: &[usize],
    confidences: &[f64],
    truth: &[usize],
    k_known: usize,
) -> Result<EvalReport, MetricsError> {
    if pred.len() != truth.len() || pred.len() != confidences.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let alignment = hungarian_align(pred, truth)?;
    let all_acc = acc(pred, truth, &alignment)?;
    let all_nmi = nmi(pred, truth)?;
    let all_ari = ari(pred, truth)?;

    let novel_mask: Vec<bool> = truth.iter().map(|&t| t >= k_known).collect();
    let novel_pred: Vec<usize> = pred
        .iter()
        .zip(&novel_mask)
        .filter(|(_, &m)| m)
        .map(|(&p, _)| p)
        .collect();
    let novel_truth: Vec<usize> = truth
        .iter()
        .zip(&novel_mask)
        .filter(|(_, &m)| m)
        .map(|(&t, _)| t)
        .collect();
    // Novel ACC keeps the global alignment; NMI/ARI compare the restricted
    // partitions directly and need no alignment.
    let (novel_acc, novel_nmi, novel_ari) = if novel_pred.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            acc(&novel_pred, &novel_truth, &alignment)?,
            nmi(&novel_pred, &novel_truth)?,
            ari(&novel_pred, &novel_truth)?,
        )
    };

    // Known ACC is plain accuracy: labeled classes are identifiable, so raw
    // prototype indices align with truth classes.
    let (mut known_hits, mut known_total) = (0usize, 0usize);
    for i in 0..pred.len() {
        if !novel_mask[i] {
            known_total += 1;
            if pred[i] == truth[i] {
                known_hits += 1;
            }
        }
    }
    let known_acc = if known_total == 0 {
        f64::NAN
    } else {
        known_hits as f64 / known_total as f64
    };

    let delta = skew_delta(confidences, &novel_mask);
    let noise = lowconf_noise(pred, confidences, truth, &novel_mask, &alignment);

    Ok(EvalReport {
        all_acc,
        all_nmi,
        all_ari,
        novel_acc,
        novel_nmi,
        novel_ari,
        known_acc,
        skew_delta: delta,
        lowconf_noise: noise,
        alignment,
    })
}

/// Evaluates a model over the unlabeled set: clean forward pass, argmax over
/// live prototypes as predicted label, unsharpened top-1 probability as
/// confidence.
pub fn evaluate(
    model: &ModelParams,
    bank: &PrototypeBank,
    dataset: &SynthDataset,
) -> Result<EvalReport, MetricsError> {
    let live = bank.live_indices();
    let mut pred = Vec::with_capacity(dataset.n_unlabeled());
    let mut conf = Vec::with_capacity(dataset.n_unlabeled());
    for sample in dataset.unlabeled() {
        let h = model.features_nograd(sample);
        let logits = logits_nograd(&h, bank);
        let probs = softmax(&crate::numerics::Tensor::vector(logits), 1.0)
            .expect("unit temperature is valid");
        let (arg, top) = probs
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("live prototype set is nonempty");
        pred.push(live[arg]);
        conf.push(*top);
    }
    evaluate_predictions(&pred, &conf, dataset.hidden_truths(), bank.k_known)
}
