//! Training objectives: supervised classification with an anti-collapse
//! regularizer, thresholded consistency (baseline), confidence-aware
//! consistency with the self-calibration weight schedule, asymmetric
//! confidence reinforcement, the Gumbel pseudo-label baseline, and the
//! weighted total.
//!
//! Every unlabeled objective shares one kernel: a per-row cross-entropy of
//! the strong-view prediction against a constant target matrix, averaged
//! over the batch. Targets are plain data (never tape nodes), so pseudo-label
//! paths are gradient-detached by construction.

use crate::numerics::{gumbel_categorical, NumericsError, SeededRng, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("labeled sample carries class {label}, but only {k_known} known classes exist")]
    LabelOutOfRange { label: usize, k_known: usize },
    #[error("numerics error: {0}")]
    Numerics(#[from] NumericsError),
}

/// Loss hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the confidence-aware consistency term.
    pub alpha: f64,
    /// Confidence threshold for samples predicted as known classes.
    pub conf_threshold_gamma: f64,
    /// Fixed threshold of the baseline consistency loss.
    pub delta: f64,
    /// Sharpening temperature for weak-view targets.
    pub tau: f64,
    /// Epochs before asymmetric reinforcement activates.
    pub warmup_epochs: usize,
    pub epochs_total: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            conf_threshold_gamma: 0.9,
            delta: 0.5,
            tau: 0.1,
            warmup_epochs: 5,
            epochs_total: 50,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.alpha < 0.0 {
            return Err("alpha must be nonnegative".into());
        }
        for (name, v) in [
            ("gamma", self.conf_threshold_gamma),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1]"));
            }
        }
        if self.tau <= 0.0 {
            return Err("tau must be positive".into());
        }
        if self.warmup_epochs >= self.epochs_total {
            return Err("warmup_epochs must be below epochs_total".into());
        }
        Ok(())
    }
}

/// Per-batch loss components and audit data. The total always satisfies
/// total = l_ce + r_reg + l_acr + alpha * l_ccr.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub l_ce: f64,
    pub r_reg: f64,
    pub l_ccr: f64,
    pub l_acr: f64,
    pub total: f64,
    pub ccr_weights: Vec<f64>,
    pub acr_mask: Vec<bool>,
    pub gap_ratio: f64,
}

/// Self-calibration weight: (1 − e/E)·ρ̂ + (e/E)·(1 − ρ̂).
///
/// At e = 0 the weight equals the confidence; at e = E it equals one minus
/// the confidence; at e = E/2 every sample weighs 0.5.
pub fn ccr_weight(rho_hat: f64, epoch: usize, epochs_total: usize) -> f64 {
    let t = epoch as f64 / epochs_total as f64;
    (1.0 - t) * rho_hat + t * (1.0 - rho_hat)
}

/// Known/novel confidence averages over the unlabeled set and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    pub rho_known: Option<f64>,
    pub rho_novel: Option<f64>,
    /// ρ̄n / ρ̄k, 1 when either side is empty, clamped to (0, 1.5].
    pub ratio: f64,
}

/// Ratio clamp keeping the relaxed novel threshold meaningful late in
/// training.
pub const GAP_RATIO_MAX: f64 = 1.5;

/// Computes the confidence gap from (top-1 confidence, predicted-known) pairs
/// of unsharpened weak-view predictions.
pub fn acr_gap<I>(items: I) -> GapStats
where
    I: IntoIterator<Item = (f64, bool)>,
{
    let (mut k_sum, mut k_n, mut n_sum, mut n_n) = (0.0, 0usize, 0.0, 0usize);
    for (conf, predicted_known) in items {
        if predicted_known {
            k_sum += conf;
            k_n += 1;
        } else {
            n_sum += conf;
            n_n += 1;
        }
    }
    let rho_known = (k_n > 0).then(|| k_sum / k_n as f64);
    let rho_novel = (n_n > 0).then(|| n_sum / n_n as f64);
    let ratio = match (rho_known, rho_novel) {
        (Some(k), Some(n)) => (n / k).min(GAP_RATIO_MAX),
        _ => 1.0,
    };
    GapStats {
        rho_known,
        rho_novel,
        ratio,
    }
}

/// Asymmetric selection rule: known-predicted samples pass at confidence γ,
/// novel-predicted samples at the relaxed ratio·γ.
pub fn acr_select(
    confidence: f64,
    predicted_known: bool,
    gap_ratio: f64,
    gamma: f64,
) -> bool {
    if predicted_known {
        confidence >= gamma
    } else {
        confidence >= gap_ratio * gamma
    }
}

/// Shared kernel: mean over rows of −Σ_k T_ik ln(p_ik + ε).
pub fn target_ce_mean(tape: &mut Tape, p: Var, targets: Tensor) -> Var {
    let rows = targets.rows();
    let ce = tape.ce_rows(p, targets);
    let total = tape.sum_all(ce);
    tape.scale(total, 1.0 / rows as f64)
}

/// Supervised loss: cross-entropy of both views against ground-truth labels,
/// averaged over the two views. Labels index known classes, which occupy the
/// first columns of the live prediction matrices.
pub fn loss_supervised(
    tape: &mut Tape,
    p_weak: Var,
    p_strong: Var,
    labels: &[usize],
    k_known: usize,
    k_live: usize,
) -> Result<Var, LossError> {
    assert!(!labels.is_empty(), "empty labeled batch");
    for &label in labels {
        if label >= k_known {
            return Err(LossError::LabelOutOfRange {
                label,
                k_known,
            });
        }
    }
    let mut data = vec![0.0; labels.len() * k_live];
    for (i, &label) in labels.iter().enumerate() {
        data[i * k_live + label] = 1.0;
    }
    let targets = Tensor::matrix(labels.len(), k_live, data);
    let ce_w = target_ce_mean(tape, p_weak, targets.clone());
    let ce_s = target_ce_mean(tape, p_strong, targets);
    let sum = tape.add(ce_w, ce_s);
    Ok(tape.scale(sum, 0.5))
}

/// Anti-collapse regularizer on the batch-mean prediction p̄:
/// R = Σ p̄ ln(p̄ + ε) + ln K, which is −H(p̄) + ln K — zero when the
/// marginal is uniform and growing as it collapses.
pub fn loss_entropy_reg(tape: &mut Tape, mean_prediction: Var) -> Var {
    let k = tape.value(mean_prediction).numel();
    let logs = tape.ln_eps(mean_prediction);
    let plogp = tape.mul(mean_prediction, logs);
    let neg_h = tape.sum_all(plogp);
    tape.add_scalar(neg_h, (k as f64).ln())
}

/// Baseline thresholded consistency: rows whose sharpened weak confidence
/// does not exceed δ contribute nothing.
pub fn ws_targets(sharp_weak: &[Vec<f64>], delta: f64) -> (Tensor, Vec<bool>) {
    let k = sharp_weak[0].len();
    let mut mask = Vec::with_capacity(sharp_weak.len());
    let mut data = Vec::with_capacity(sharp_weak.len() * k);
    for row in sharp_weak {
        let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let selected = top > delta;
        mask.push(selected);
        let w = if selected { 1.0 } else { 0.0 };
        data.extend(row.iter().map(|&v| w * v));
    }
    (Tensor::matrix(sharp_weak.len(), k, data), mask)
}

/// Confidence-aware consistency: every row weighted by the schedule value of
/// its sharpened weak confidence.
pub fn ccr_targets(
    sharp_weak: &[Vec<f64>],
    epoch: usize,
    config: &LossConfig,
) -> (Tensor, Vec<f64>) {
    let k = sharp_weak[0].len();
    let mut weights = Vec::with_capacity(sharp_weak.len());
    let mut data = Vec::with_capacity(sharp_weak.len() * k);
    for row in sharp_weak {
        let rho_hat = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = ccr_weight(rho_hat, epoch, config.epochs_total);
        weights.push(w);
        data.extend(row.iter().map(|&v| w * v));
    }
    (Tensor::matrix(sharp_weak.len(), k, data), weights)
}

/// Asymmetric reinforcement targets: η-selected hard pseudo-labels from the
/// weak view. `weak_stats` carries (unsharpened confidence, live argmax,
/// predicted-known flag) per unlabeled sample.
pub fn acr_targets(
    weak_stats: &[(f64, usize, bool)],
    k_live: usize,
    gap_ratio: f64,
    config: &LossConfig,
) -> (Tensor, Vec<bool>) {
    let mut mask = Vec::with_capacity(weak_stats.len());
    let mut data = vec![0.0; weak_stats.len() * k_live];
    for (i, &(conf, live_argmax, predicted_known)) in weak_stats.iter().enumerate() {
        let selected = acr_select(
            conf,
            predicted_known,
            gap_ratio,
            config.conf_threshold_gamma,
        );
        mask.push(selected);
        if selected {
            data[i * k_live + live_argmax] = 1.0;
        }
    }
    (Tensor::matrix(weak_stats.len(), k_live, data), mask)
}

/// Gumbel pseudo-label targets: a class is sampled from each weak-view
/// distribution; its (detached) probability becomes the loss weight.
pub fn gumbel_targets(
    plain_weak: &[Vec<f64>],
    rng: &mut SeededRng,
) -> Result<(Tensor, Vec<(usize, f64)>), NumericsError> {
    let k = plain_weak[0].len();
    let mut draws = Vec::with_capacity(plain_weak.len());
    let mut data = vec![0.0; plain_weak.len() * k];
    for (i, row) in plain_weak.iter().enumerate() {
        let c_star = gumbel_categorical(row, rng)?;
        let lambda = row[c_star];
        draws.push((c_star, lambda));
        data[i * k + c_star] = lambda;
    }
    Ok((Tensor::matrix(plain_weak.len(), k, data), draws))
}

/// Total loss value: L_ce + R + L_acr + α·L_ccr.
pub fn loss_total(l_ce: f64, r_reg: f64, l_acr: f64, l_ccr: f64, alpha: f64) -> f64 {
    l_ce + r_reg + l_acr + alpha * l_ccr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::EPS_LOG;

    fn simplex_rows(tape: &mut Tape, rows: Vec<Vec<f64>>) -> Var {
        let k = rows[0].len();
        let n = rows.len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        // Leaf (not constant) so gradients can be inspected.
        let logits = tape.leaf(Tensor::matrix(n, k, data.iter().map(|v| v.ln()).collect()));
        tape.softmax_rows(logits, 1.0).unwrap()
    }

    #[test]
    fn ccr_weight_schedule_endpoints() {
        for rho in [0.0, 0.17, 0.5, 0.83, 1.0] {
            assert!((ccr_weight(rho, 0, 50) - rho).abs() < 1e-15);
            assert!((ccr_weight(rho, 50, 50) - (1.0 - rho)).abs() < 1e-15);
            assert!((ccr_weight(rho, 25, 50) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn ccr_weight_monotonicity_flips_over_training() {
        // Early: increasing in confidence. Late: decreasing.
        assert!(ccr_weight(0.9, 0, 50) > ccr_weight(0.2, 0, 50));
        assert!(ccr_weight(0.9, 50, 50) < ccr_weight(0.2, 50, 50));
    }

    #[test]
    fn supervised_loss_perfect_prediction_is_near_zero() {
        let mut tape = Tape::new();
        let p = simplex_rows(
            &mut tape,
            vec![vec![1.0 - 1e-9, 1e-9, 1e-9], vec![1e-9, 1.0 - 1e-9, 1e-9]],
        );
        let loss = loss_supervised(&mut tape, p, p, &[0, 1], 3, 3).unwrap();
        assert!(tape.value(loss).data()[0] < 1e-6);
    }

    #[test]
    fn supervised_loss_uniform_prediction_is_ln_k() {
        let mut tape = Tape::new();
        let k = 5;
        let p = simplex_rows(&mut tape, vec![vec![1.0 / k as f64; k]; 3]);
        let loss = loss_supervised(&mut tape, p, p, &[0, 1, 2], 3, k).unwrap();
        assert!((tape.value(loss).data()[0] - (k as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn supervised_loss_is_order_invariant() {
        let rows = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, rows.clone());
        let a = loss_supervised(&mut tape, p, p, &[0, 1, 2], 3, 3).unwrap();
        let mut tape2 = Tape::new();
        let reordered = vec![rows[2].clone(), rows[0].clone(), rows[1].clone()];
        let p2 = simplex_rows(&mut tape2, reordered);
        let b = loss_supervised(&mut tape2, p2, p2, &[2, 0, 1], 3, 3).unwrap();
        assert!((tape.value(a).data()[0] - tape2.value(b).data()[0]).abs() < 1e-12);
    }

    #[test]
    fn supervised_loss_rejects_novel_labels() {
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, vec![vec![0.5, 0.5]]);
        assert!(matches!(
            loss_supervised(&mut tape, p, p, &[1], 1, 2),
            Err(LossError::LabelOutOfRange { label: 1, k_known: 1 })
        ));
    }

    #[test]
    fn entropy_reg_zero_at_uniform_and_positive_otherwise() {
        let mut tape = Tape::new();
        let uniform = tape.leaf(Tensor::vector(vec![0.1; 10]));
        let r = loss_entropy_reg(&mut tape, uniform);
        assert!(tape.value(r).data()[0].abs() < 1e-9);

        let mut tape = Tape::new();
        let collapsed = tape.leaf(Tensor::vector(
            (0..10).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
        ));
        let r = loss_entropy_reg(&mut tape, collapsed);
        assert!((tape.value(r).data()[0] - 10.0f64.ln()).abs() < 1e-9);

        let mut rng = crate::numerics::SeededRng::new(2, 0);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..6).map(|_| rng.uniform_open01()).collect();
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.into_iter().map(|v| v / total).collect();
            let mut tape = Tape::new();
            let pv = tape.leaf(Tensor::vector(p));
            let r = loss_entropy_reg(&mut tape, pv);
            assert!(tape.value(r).data()[0] >= -1e-12);
        }
    }

    #[test]
    fn ws_loss_fully_filtered_is_zero() {
        let rows = vec![vec![0.4, 0.3, 0.3], vec![0.34, 0.33, 0.33]];
        let (targets, mask) = ws_targets(&rows, 0.5);
        assert!(mask.iter().all(|&m| !m));
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, rows);
        let loss = target_ce_mean(&mut tape, p, targets);
        assert_eq!(tape.value(loss).data()[0], 0.0);
    }

    #[test]
    fn ws_with_zero_delta_equals_ccr_with_unit_weights() {
        let rows = vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3]];
        let (ws_t, mask) = ws_targets(&rows, 0.0);
        assert!(mask.iter().all(|&m| m));
        // CCR with all weights one is the plain unfiltered consistency loss;
        // both reduce to the same kernel on identical targets.
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.6, 0.3]]);
        let a = target_ce_mean(&mut tape, p, ws_t.clone());
        let unit_t = Tensor::matrix(2, 3, rows.into_iter().flatten().collect());
        let b = target_ce_mean(&mut tape, p, unit_t);
        assert_eq!(tape.value(a).data()[0], tape.value(b).data()[0]);
    }

    #[test]
    fn ws_hand_batch_single_selected_sample() {
        let rows = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.4, 0.3, 0.3],
            vec![0.45, 0.3, 0.25],
        ];
        let (targets, mask) = ws_targets(&rows, 0.5);
        assert_eq!(mask, vec![true, false, false]);
        let strong = vec![
            vec![0.5, 0.3, 0.2],
            vec![0.3, 0.4, 0.3],
            vec![0.2, 0.3, 0.5],
        ];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, strong.clone());
        let loss = target_ce_mean(&mut tape, p, targets);
        let expect: f64 = rows[0]
            .iter()
            .zip(&strong[0])
            .map(|(&t, &q)| -t * (q + EPS_LOG).ln())
            .sum::<f64>()
            / 3.0;
        assert!((tape.value(loss).data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn ccr_loss_hand_weighted_batch() {
        // Sharpened weak rows with confidences 0.9 and 0.2 at epoch 0.
        let rows = vec![vec![0.9, 0.05, 0.05], vec![0.2, 0.2, 0.6]];
        let config = LossConfig::default();
        let (targets, weights) = ccr_targets(&rows, 0, &config);
        assert!((weights[0] - 0.9).abs() < 1e-15);
        assert!((weights[1] - 0.6).abs() < 1e-15);
        let strong = vec![vec![0.5, 0.25, 0.25], vec![0.3, 0.4, 0.3]];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, strong.clone());
        let loss = target_ce_mean(&mut tape, p, targets);
        let ce = |t: &[f64], q: &[f64]| -> f64 {
            t.iter().zip(q).map(|(&tv, &qv)| -tv * (qv + EPS_LOG).ln()).sum()
        };
        let expect = (0.9 * ce(&rows[0], &strong[0]) + 0.6 * ce(&rows[1], &strong[1])) / 2.0;
        assert!((tape.value(loss).data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn ccr_zero_confidence_weights_vanish_at_epoch_zero() {
        // rho-hat of exactly zero only occurs degenerately, but the endpoint
        // algebra must hold.
        assert_eq!(ccr_weight(0.0, 0, 50), 0.0);
    }

    #[test]
    fn ccr_midpoint_epoch_halves_the_unweighted_loss() {
        let rows = vec![vec![0.7, 0.2, 0.1], vec![0.25, 0.5, 0.25]];
        let config = LossConfig::default();
        let (targets, weights) = ccr_targets(&rows, 25, &config);
        assert!(weights.iter().all(|&w| (w - 0.5).abs() < 1e-15));
        let strong = vec![vec![0.4, 0.4, 0.2], vec![0.2, 0.6, 0.2]];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, strong.clone());
        let weighted = target_ce_mean(&mut tape, p, targets);
        let plain_t = Tensor::matrix(2, 3, rows.into_iter().flatten().collect());
        let plain = target_ce_mean(&mut tape, p, plain_t);
        assert!(
            (tape.value(weighted).data()[0] - 0.5 * tape.value(plain).data()[0]).abs() < 1e-12
        );
    }

    #[test]
    fn acr_gap_arithmetic_and_empty_side_rule() {
        let stats = acr_gap([(0.8, true), (0.8, true)]);
        assert_eq!(stats.rho_known, Some(0.8));
        assert_eq!(stats.rho_novel, None);
        assert_eq!(stats.ratio, 1.0);

        let stats = acr_gap([(0.9, true), (0.6, false)]);
        assert!((stats.ratio - 2.0 / 3.0).abs() < 1e-12);
        // Relaxed novel threshold at gamma = 0.9.
        assert!((stats.ratio * 0.9 - 0.6).abs() < 1e-12);
        assert!(stats.ratio <= 1.0);

        // Ratio is clamped when novel confidence overtakes known.
        let stats = acr_gap([(0.5, true), (0.9, false)]);
        assert_eq!(stats.ratio, GAP_RATIO_MAX);
    }

    #[test]
    fn acr_selection_rule_cases() {
        assert!(acr_select(0.95, true, 2.0 / 3.0, 0.9));
        assert!(acr_select(0.65, false, 2.0 / 3.0, 0.9));
        assert!(!acr_select(0.55, false, 2.0 / 3.0, 0.9));
        assert!(!acr_select(0.85, true, 2.0 / 3.0, 0.9));
    }

    #[test]
    fn acr_selection_is_monotone_in_gamma_and_ratio() {
        let mut rng = crate::numerics::SeededRng::new(9, 0);
        for _ in 0..1000 {
            let conf = rng.uniform_open01();
            let known = rng.bernoulli(0.5);
            let gamma_lo = rng.uniform(0.1, 0.9);
            let gamma_hi = gamma_lo + rng.uniform(0.0, 1.0 - gamma_lo);
            let ratio_lo = rng.uniform(0.1, 1.4);
            let ratio_hi = ratio_lo + rng.uniform(0.0, 1.5 - ratio_lo);
            // Raising gamma never adds selections.
            if acr_select(conf, known, ratio_lo, gamma_hi) {
                assert!(acr_select(conf, known, ratio_lo, gamma_lo));
            }
            // Raising the ratio never adds novel selections.
            if !known && acr_select(conf, known, ratio_hi, gamma_lo) {
                assert!(acr_select(conf, known, ratio_lo, gamma_lo));
            }
        }
    }

    #[test]
    fn acr_loss_hand_case_single_selection() {
        // One selected sample with p(yhat) = 0.5 in a batch of 4 → ln2 / 4.
        let weak_stats = vec![
            (0.95, 0usize, true),
            (0.3, 1, true),
            (0.4, 2, false),
            (0.2, 0, false),
        ];
        let config = LossConfig::default();
        let (targets, mask) = acr_targets(&weak_stats, 3, 1.0, &config);
        assert_eq!(mask, vec![true, false, false, false]);
        let strong = vec![
            vec![0.5, 0.25, 0.25],
            vec![0.3, 0.4, 0.3],
            vec![0.2, 0.3, 0.5],
            vec![0.4, 0.4, 0.2],
        ];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, strong);
        let loss = target_ce_mean(&mut tape, p, targets);
        assert!((tape.value(loss).data()[0] - std::f64::consts::LN_2 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn acr_no_selection_gives_zero() {
        let weak_stats = vec![(0.1, 0usize, true), (0.2, 1, false)];
        let (targets, mask) = acr_targets(&weak_stats, 2, 1.0, &LossConfig::default());
        assert!(mask.iter().all(|&m| !m));
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let loss = target_ce_mean(&mut tape, p, targets);
        assert_eq!(tape.value(loss).data()[0], 0.0);
    }

    #[test]
    fn gumbel_degenerate_weak_distribution() {
        let mut rng = SeededRng::new(3, 7);
        let rows = vec![vec![0.0, 1.0, 0.0]];
        let (targets, draws) = gumbel_targets(&rows, &mut rng).unwrap();
        assert_eq!(draws[0], (1, 1.0));
        let strong = vec![vec![0.2, 0.5, 0.3]];
        let mut tape = Tape::new();
        let p = simplex_rows(&mut tape, strong);
        let loss = target_ce_mean(&mut tape, p, targets);
        assert!((tape.value(loss).data()[0] + (0.5f64 + EPS_LOG).ln()).abs() < 1e-9);
    }

    #[test]
    fn gumbel_uniform_weak_matches_closed_form_in_expectation() {
        // E[loss] over c* ~ uniform = (1/K) * mean_c(-lambda ln p_c) with
        // lambda = 1/K.
        let k = 4;
        let uniform = vec![1.0 / k as f64; k];
        let strong = vec![0.4, 0.3, 0.2, 0.1];
        let mut rng = SeededRng::new(5, 11);
        let trials = 200_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let (targets, _) = gumbel_targets(&[uniform.clone()], &mut rng).unwrap();
            let mut tape = Tape::new();
            let p = simplex_rows(&mut tape, vec![strong.clone()]);
            let loss = target_ce_mean(&mut tape, p, targets);
            total += tape.value(loss).data()[0];
        }
        let empirical = total / trials as f64;
        let expect: f64 = strong
            .iter()
            .map(|&q| -(1.0 / k as f64) * (q + EPS_LOG).ln())
            .sum::<f64>()
            / k as f64;
        assert!(
            (empirical - expect).abs() < 2e-3,
            "{empirical} vs {expect}"
        );
    }

    #[test]
    fn detached_targets_leave_weak_path_without_gradient() {
        // Weak and strong predictions share a parameter; targets built from
        // the weak values are constants, so after backward the weak-view
        // nodes hold zero gradient.
        let mut tape = Tape::new();
        let logits = tape.leaf(Tensor::matrix(1, 3, vec![0.2, -0.1, 0.4]));
        let p_weak = tape.softmax_rows(logits, 0.1).unwrap();
        let weak_values = vec![tape.value(p_weak).data().to_vec()];
        let p_strong = tape.softmax_rows(logits, 1.0).unwrap();
        let (targets, _) = ccr_targets(&weak_values, 0, &LossConfig::default());
        let loss = target_ce_mean(&mut tape, p_strong, targets.clone());
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(p_weak).iter().all(|&g| g == 0.0));
        assert!(grads.get(logits).iter().any(|&g| g != 0.0));

        // The same loss computed without the weak pass on the tape yields the
        // identical parameter gradient.
        let mut tape2 = Tape::new();
        let logits2 = tape2.leaf(Tensor::matrix(1, 3, vec![0.2, -0.1, 0.4]));
        let p_strong2 = tape2.softmax_rows(logits2, 1.0).unwrap();
        let loss2 = target_ce_mean(&mut tape2, p_strong2, targets);
        let grads2 = tape2.backward(loss2).unwrap();
        assert_eq!(grads.get(logits), grads2.get(logits2));
    }

    #[test]
    fn total_loss_weighted_sum() {
        assert!((loss_total(1.0, 0.5, 0.2, 1.0, 0.2) - 1.9).abs() < 1e-15);
        assert_eq!(loss_total(1.0, 0.5, 0.2, 123.0, 0.0), 1.7);
    }
}
