use super::MetricsError;
use std::collections::BTreeMap;

/// Optimal injective mapping from predicted cluster labels to truth class
/// labels, maximizing the number of matched samples.
///
/// The co-occurrence matrix is square-padded with zeros; clusters assigned
/// to padding columns are left out of the returned map.
pub fn hungarian_align(
    pred: &[usize],
    truth: &[usize],
) -> Result<BTreeMap<usize, usize>, MetricsError> {
    if pred.is_empty() || truth.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    // Compact labels to contiguous ids with deterministic (sorted) order.
    let pred_ids = sorted_unique(pred);
    let truth_ids = sorted_unique(truth);
    let pred_pos: BTreeMap<usize, usize> =
        pred_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let truth_pos: BTreeMap<usize, usize> =
        truth_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let n = pred_ids.len().max(truth_ids.len());
    let mut counts = vec![0.0f64; n * n];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[pred_pos[&p] * n + truth_pos[&t]] += 1.0;
    }

    // Minimize (max - count) over a square matrix == maximize count.
    let max_count = counts.iter().cloned().fold(0.0f64, f64::max);
    let cost: Vec<f64> = counts.iter().map(|&c| max_count - c).collect();
    let assignment = min_cost_assignment(&cost, n);

    let mut map = BTreeMap::new();
    for (row, col) in assignment.into_iter().enumerate() {
        if row < pred_ids.len() && col < truth_ids.len() {
            map.insert(pred_ids[row], truth_ids[col]);
        }
    }
    Ok(map)
}

fn sorted_unique(labels: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Jonker-style O(n³) assignment on a square cost matrix (row-major),
/// returning the column matched to each row.
fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // Potentials formulation; rows and columns are 1-indexed, index 0 is the
    // virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Matched count achieved by a mapping; shared by tests and the accuracy
/// metric.
pub fn matched_count(pred: &[usize], truth: &[usize], map: &BTreeMap<usize, usize>) -> usize {
    pred.iter()
        .zip(truth)
        .filter(|(p, t)| map.get(p) == Some(t))
        .count()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn pure_relabel_matches_fully() {
        let pred = [0, 0, 1, 1];
        let truth = [1, 1, 0, 0];
        let map = hungarian_align(&pred, &truth).unwrap();
        assert_eq!(map[&0], 1);
        assert_eq!(map[&1], 0);
        assert_eq!(matched_count(&pred, &truth, &map), 4);
    }

    #[test]
    fn identity_maps_fully() {
        let pred = [0, 1, 2, 2, 1];
        let map = hungarian_align(&pred, &pred).unwrap();
        for (k, v) in &map {
            assert_eq!(k, v);
        }
        assert_eq!(matched_count(&pred, &pred, &map), 5);
    }

    #[test]
    fn three_of_four_case() {
        let pred = [0, 0, 1, 2];
        let truth = [0, 0, 1, 1];
        let map = hungarian_align(&pred, &truth).unwrap();
        assert_eq!(matched_count(&pred, &truth, &map), 3);
        assert_eq!(oracle::brute_force_best_count(&pred, &truth), 3);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            hungarian_align(&[], &[]),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = SeededRng::new(17, 0);
        for trial in 0..200 {
            let k_pred = 1 + rng.usize_below(7);
            let k_truth = 1 + rng.usize_below(7);
            let n = 5 + rng.usize_below(60);
            let pred: Vec<usize> = (0..n).map(|_| rng.usize_below(k_pred)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.usize_below(k_truth)).collect();
            let map = hungarian_align(&pred, &truth).unwrap();
            let got = matched_count(&pred, &truth, &map);
            let best = oracle::brute_force_best_count(&pred, &truth);
            assert_eq!(got, best, "trial {trial}: {got} vs brute force {best}");
        }
    }

    #[test]
    fn beats_random_injective_mappings() {
        let mut rng = SeededRng::new(23, 1);
        for _ in 0..50 {
            let n = 30 + rng.usize_below(40);
            let pred: Vec<usize> = (0..n).map(|_| rng.usize_below(5)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.usize_below(6)).collect();
            let map = hungarian_align(&pred, &truth).unwrap();
            let optimal = matched_count(&pred, &truth, &map);
            // Probe: random injective maps never beat the Hungarian result.
            for _ in 0..20 {
                let mut classes: Vec<usize> = (0..6).collect();
                rng.shuffle(&mut classes);
                let probe: BTreeMap<usize, usize> =
                    (0..5).map(|c| (c, classes[c])).collect();
                assert!(matched_count(&pred, &truth, &probe) <= optimal);
            }
        }
    }
}
