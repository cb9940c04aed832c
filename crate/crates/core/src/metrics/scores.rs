use super::MetricsError;
use std::collections::BTreeMap;

/// Contingency table between two label arrays plus marginals, in sorted
/// label order so downstream float sums are deterministic.
struct Contingency {
    joint: BTreeMap<(usize, usize), f64>,
    left: BTreeMap<usize, f64>,
    right: BTreeMap<usize, f64>,
    n: f64,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut joint = BTreeMap::new();
    let mut left = BTreeMap::new();
    let mut right = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *left.entry(x).or_insert(0.0) += 1.0;
        *right.entry(y).or_insert(0.0) += 1.0;
    }
    Ok(Contingency {
        joint,
        left,
        right,
        n: a.len() as f64,
    })
}

/// Matched fraction of samples under an injective cluster→class mapping.
pub fn acc(
    pred: &[usize],
    truth: &[usize],
    mapping: &BTreeMap<usize, usize>,
) -> Result<f64, MetricsError> {
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| mapping.get(p) == Some(t))
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Normalized mutual information with natural logarithms:
/// Σ n_ij ln(n·n_ij / (n_i n_j)) / sqrt((Σ n_i ln(n_i/n)) (Σ n_j ln(n_j/n))).
///
/// When either partition has zero entropy the quotient is undefined; the
/// convention here returns 1 if the partitions are identical and 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let c = contingency(pred, truth)?;
    let h_left: f64 = c.left.values().map(|&ni| ni * (ni / c.n).ln()).sum();
    let h_right: f64 = c.right.values().map(|&nj| nj * (nj / c.n).ln()).sum();
    let left_zero = c.left.len() == 1;
    let right_zero = c.right.len() == 1;
    if left_zero || right_zero {
        return Ok(if left_zero && right_zero { 1.0 } else { 0.0 });
    }
    let numerator: f64 = c
        .joint
        .iter()
        .map(|(&(i, j), &nij)| nij * (c.n * nij / (c.left[&i] * c.right[&j])).ln())
        .sum();
    Ok(numerator / (h_left * h_right).sqrt())
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Pair counts (a, b, c, d) over unordered sample pairs: both same, same
/// only in the first partition, same only in the second, both different.
fn pair_counts(pred: &[usize], truth: &[usize]) -> Result<(f64, f64, f64, f64), MetricsError> {
    let c = contingency(pred, truth)?;
    let a: f64 = c.joint.values().map(|&nij| comb2(nij)).sum();
    let same_pred: f64 = c.left.values().map(|&ni| comb2(ni)).sum();
    let same_truth: f64 = c.right.values().map(|&nj| comb2(nj)).sum();
    let total = comb2(c.n);
    let b = same_pred - a;
    let cc = same_truth - a;
    let d = total - a - b - cc;
    Ok((a, b, cc, d))
}

/// Rand-style index 2(ad − bc) / ((a+b)(b+d) + (a+c)(c+d)) over pair counts.
///
/// A vanishing denominator is resolved to 1 for identical partitions and 0
/// otherwise.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let (a, b, c, d) = pair_counts(pred, truth)?;
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        // b = c = 0 means the partitions agree on every pair.
        return Ok(if b == 0.0 && c == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(2.0 * (a * d - b * c) / denom)
}

/// Textbook expected-index-adjusted Rand index, kept alongside the
/// pair-count form above for comparison.
pub fn ari_adjusted(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let c = contingency(pred, truth)?;
    let sum_ij: f64 = c.joint.values().map(|&nij| comb2(nij)).sum();
    let sum_i: f64 = c.left.values().map(|&ni| comb2(ni)).sum();
    let sum_j: f64 = c.right.values().map(|&nj| comb2(nj)).sum();
    let total = comb2(c.n);
    let expected = sum_i * sum_j / total;
    let max_index = 0.5 * (sum_i + sum_j);
    if (max_index - expected).abs() < 1e-12 {
        return Ok(if (sum_ij - expected).abs() < 1e-12 { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / (max_index - expected))
}
