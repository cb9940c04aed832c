//! Dynamic prototype pruning: per epoch, sort novel prototypes by usage,
//! split them at the cumulative-coverage knee, filter the tail by usage and
//! coverage increments, and merge the filtered prototypes into their nearest
//! surviving anchors. The live novel count becomes the running class-count
//! estimate.

use crate::model::PrototypeBank;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DppError {
    #[error("low-confidence prototypes exist but no high-confidence anchors")]
    NoAnchors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppConfig {
    /// Cumulative-coverage cut for high-confidence prototypes; the default
    /// is the two-sigma mass of a normal distribution.
    pub coverage_threshold: f64,
    /// Prototype budget multiplier over the known-class count.
    pub initial_k_multiplier: usize,
}

impl Default for DppConfig {
    fn default() -> Self {
        Self {
            coverage_threshold: 0.9544,
            initial_k_multiplier: 10,
        }
    }
}

impl DppConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold < 1.0) {
            return Err("coverage_threshold must lie in (0, 1)".into());
        }
        if self.initial_k_multiplier < 1 {
            return Err("initial_k_multiplier must be >= 1".into());
        }
        Ok(())
    }
}

/// Per-epoch usage counts over all prototype slots (indexed globally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageCounter {
    counts: Vec<u64>,
}

impl UsageCounter {
    pub fn new(k_total: usize) -> Self {
        Self {
            counts: vec![0; k_total],
        }
    }

    pub fn record(&mut self, prototype: usize) {
        self.counts[prototype] += 1;
    }

    pub fn count(&self, prototype: usize) -> u64 {
        self.counts[prototype]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

/// Outcome of one pruning epoch. Prototype indices are global.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    /// Number of high-confidence prototypes (1-based coverage position).
    pub k_star: usize,
    pub high: Vec<usize>,
    pub candidates: Vec<usize>,
    pub low: Vec<usize>,
    /// (retired prototype, anchor it merged into).
    pub assignments: Vec<(usize, usize)>,
    /// Estimated total class count after the epoch.
    pub estimated_total: usize,
    /// Cumulative coverage over the usage-sorted novel prototypes.
    pub coverage: Vec<f64>,
}

impl PruneReport {
    fn no_op(bank: &PrototypeBank) -> Self {
        Self {
            k_star: 0,
            high: Vec::new(),
            candidates: Vec::new(),
            low: Vec::new(),
            assignments: Vec::new(),
            estimated_total: bank.estimated_total(),
            coverage: Vec::new(),
        }
    }
}

/// Novel prototypes sorted by usage descending, ties broken by lower index.
fn sorted_novel(counter: &UsageCounter, bank: &PrototypeBank) -> Vec<(usize, u64)> {
    let mut novel: Vec<(usize, u64)> = bank
        .live_novel_indices()
        .into_iter()
        .map(|k| (k, counter.count(k)))
        .collect();
    novel.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    novel
}

/// Stage I: split the usage-sorted novel prototypes at the first position
/// whose cumulative coverage reaches the threshold.
///
/// Returns (high ids, candidate ids, coverage curve over the sorted order).
pub fn stage1_identify(
    counter: &UsageCounter,
    bank: &PrototypeBank,
    coverage_threshold: f64,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let novel = sorted_novel(counter, bank);
    let total: u64 = novel.iter().map(|&(_, u)| u).sum();
    if total == 0 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let mut coverage = Vec::with_capacity(novel.len());
    let mut cum = 0u64;
    for &(_, u) in &novel {
        cum += u;
        coverage.push(cum as f64 / total as f64);
    }
    let k_star = coverage
        .iter()
        .position(|&r| r >= coverage_threshold)
        .map(|p| p + 1)
        .unwrap_or(novel.len());
    let high = novel[..k_star].iter().map(|&(k, _)| k).collect();
    let candidates = novel[k_star..].iter().map(|&(k, _)| k).collect();
    (high, candidates, coverage)
}

/// Stage II: from the candidate tail, keep only prototypes strictly below
/// both the mean usage and the mean coverage increment. All-tied candidates
/// therefore prune nothing.
pub fn stage2_filter(
    candidates: &[usize],
    counter: &UsageCounter,
    coverage: &[f64],
    k_star: usize,
) -> Vec<usize> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let usages: Vec<f64> = candidates.iter().map(|&k| counter.count(k) as f64).collect();
    let mean_usage: f64 = usages.iter().sum::<f64>() / usages.len() as f64;
    // Candidate at sorted position k_star + i (0-based) has increment
    // r_k - r_{k-1}; positions are >= 1 so the predecessor always exists.
    let increments: Vec<f64> = (0..candidates.len())
        .map(|i| {
            let pos = k_star + i;
            coverage[pos] - coverage[pos - 1]
        })
        .collect();
    let mean_increment: f64 = increments.iter().sum::<f64>() / increments.len() as f64;
    candidates
        .iter()
        .zip(usages.iter().zip(&increments))
        .filter(|(_, (&u, &dr))| u < mean_usage && dr < mean_increment)
        .map(|(&k, _)| k)
        .collect()
}

/// Stage III: merge each low-confidence prototype into its most similar
/// high-confidence anchor (ties to the lower anchor index), update anchors
/// to the renormalized mean of themselves and their assignees, and retire
/// the merged prototypes.
pub fn stage3_merge(
    bank: &mut PrototypeBank,
    high: &[usize],
    low: &[usize],
) -> Result<Vec<(usize, usize)>, DppError> {
    if low.is_empty() {
        return Ok(Vec::new());
    }
    if high.is_empty() {
        return Err(DppError::NoAnchors);
    }
    bank.renormalize_live();
    let dim = bank.dim;
    let mut assignments = Vec::with_capacity(low.len());
    let mut anchor_sums: Vec<Vec<f64>> = high.iter().map(|&a| bank.proto(a).to_vec()).collect();
    let mut anchor_counts = vec![1usize; high.len()];
    for &l in low {
        let lp = bank.proto(l);
        let mut best = (0usize, f64::NEG_INFINITY);
        for (ai, &a) in high.iter().enumerate() {
            let cos: f64 = bank.proto(a).iter().zip(lp).map(|(x, y)| x * y).sum();
            if cos > best.1 {
                best = (ai, cos);
            }
        }
        assignments.push((l, high[best.0]));
        for (s, &v) in anchor_sums[best.0].iter_mut().zip(lp) {
            *s += v;
        }
        anchor_counts[best.0] += 1;
    }
    for ((&a, sum), count) in high.iter().zip(anchor_sums).zip(anchor_counts) {
        if count == 1 {
            continue;
        }
        let mean: Vec<f64> = sum.into_iter().map(|v| v / count as f64).collect();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for (j, v) in mean.into_iter().enumerate() {
            bank.protos[a * dim + j] = v / norm;
        }
    }
    for &l in low {
        bank.retire(l);
    }
    Ok(assignments)
}

/// One pruning epoch: Stages I → II → III, then the counter resets.
pub fn run_epoch(
    counter: &mut UsageCounter,
    bank: &mut PrototypeBank,
    config: &DppConfig,
) -> Result<PruneReport, DppError> {
    let (high, candidates, coverage) = stage1_identify(counter, bank, config.coverage_threshold);
    if high.is_empty() {
        counter.reset();
        return Ok(PruneReport::no_op(bank));
    }
    let k_star = high.len();
    let low = stage2_filter(&candidates, counter, &coverage, k_star);
    let assignments = stage3_merge(bank, &high, &low)?;
    counter.reset();
    Ok(PruneReport {
        k_star,
        high,
        candidates,
        low,
        assignments,
        estimated_total: bank.estimated_total(),
        coverage,
    })
}
