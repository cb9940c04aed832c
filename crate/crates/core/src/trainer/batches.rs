use crate::numerics::{derive_rng, StreamPurpose};

/// Indices into the labeled and unlabeled sample lists for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// Epoch-seeded stratified batches: every sample appears exactly once per
/// epoch, and each batch carries labeled and unlabeled samples in the
/// dataset's global ratio (within one sample, at least one of each).
pub fn make_batches(
    n_labeled: usize,
    n_unlabeled: usize,
    batch_size: usize,
    epoch: usize,
    seed: u64,
) -> Vec<Batch> {
    assert!(n_labeled > 0 && n_unlabeled > 0, "both streams must be nonempty");
    let total = n_labeled + n_unlabeled;
    let n_batches = total
        .div_ceil(batch_size)
        .clamp(1, n_labeled.min(n_unlabeled));

    let mut labeled: Vec<usize> = (0..n_labeled).collect();
    let mut unlabeled: Vec<usize> = (0..n_unlabeled).collect();
    derive_rng(seed, StreamPurpose::BatchShuffle, epoch as u64, 0).shuffle(&mut labeled);
    derive_rng(seed, StreamPurpose::BatchShuffle, epoch as u64, 1).shuffle(&mut unlabeled);

    // Quota split: batch i takes items [round(i*n/B), round((i+1)*n/B)) of
    // each stream, so totals are exact and each batch is within one sample
    // of the global ratio.
    let cut = |n: usize, i: usize| (i * n + n_batches / 2) / n_batches;
    (0..n_batches)
        .map(|i| Batch {
            labeled: labeled[cut(n_labeled, i)..cut(n_labeled, i + 1)].to_vec(),
            unlabeled: unlabeled[cut(n_unlabeled, i)..cut(n_unlabeled, i + 1)].to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_sample_appears_exactly_once() {
        let batches = make_batches(750, 1750, 128, 3, 7);
        let mut lab: Vec<usize> = batches.iter().flat_map(|b| b.labeled.clone()).collect();
        let mut unl: Vec<usize> = batches.iter().flat_map(|b| b.unlabeled.clone()).collect();
        lab.sort_unstable();
        unl.sort_unstable();
        assert_eq!(lab, (0..750).collect::<Vec<_>>());
        assert_eq!(unl, (0..1750).collect::<Vec<_>>());
    }

    #[test]
    fn batch_ratio_within_one_of_global() {
        let (n_l, n_u) = (750usize, 1750usize);
        let batches = make_batches(n_l, n_u, 128, 0, 0);
        let per_batch_l = n_l as f64 / batches.len() as f64;
        let per_batch_u = n_u as f64 / batches.len() as f64;
        for b in &batches {
            assert!(!b.labeled.is_empty() && !b.unlabeled.is_empty());
            assert!((b.labeled.len() as f64 - per_batch_l).abs() <= 1.0);
            assert!((b.unlabeled.len() as f64 - per_batch_u).abs() <= 1.0);
        }
    }

    #[test]
    fn fixed_seed_reproduces_order() {
        let a = make_batches(100, 300, 64, 5, 11);
        let b = make_batches(100, 300, 64, 5, 11);
        assert_eq!(a, b);
        let c = make_batches(100, 300, 64, 6, 11);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_streams_still_get_one_of_each() {
        let batches = make_batches(2, 50, 8, 0, 0);
        assert_eq!(batches.len(), 2);
        for b in &batches {
            assert!(!b.labeled.is_empty());
            assert!(!b.unlabeled.is_empty());
        }
    }
}
