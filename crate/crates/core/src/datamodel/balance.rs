use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pads every non-empty group up to the largest group's size by sampling
/// with replacement, then shuffles the concatenation.
pub fn balance_epoch<S: Clone>(groups: &[Vec<S>], seed: u64) -> Vec<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(target * groups.len());
    for g in groups.iter().filter(|g| !g.is_empty()) {
        out.extend(g.iter().cloned());
        for _ in g.len()..target {
            out.push(g[rng.gen_range(0..g.len())].clone());
        }
    }
    out.shuffle(&mut rng);
    out
}

/// Iterator of class-balanced batches of sample indices.
///
/// Each batch gives every class `batch_size / C` or `batch_size / C + 1`
/// slots (the remainder rotates across classes from batch to batch). Each
/// class is drawn from its own reshuffled cycle, so minority classes repeat.
/// One epoch is `ceil(len / batch_size)` batches.
pub struct BalancedBatches {
    per_class: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    batch_size: usize,
    batches: usize,
    emitted: usize,
    rng: ChaCha8Rng,
}

impl Iterator for BalancedBatches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.emitted == self.batches {
            return None;
        }
        let c = self.per_class.len();
        let (q, r) = (self.batch_size / c, self.batch_size % c);
        let start = (self.emitted * r) % c;
        let mut batch = Vec::with_capacity(self.batch_size);
        for k in 0..c {
            let extra = usize::from((k + c - start) % c < r);
            for _ in 0..q + extra {
                if self.cursors[k] == self.per_class[k].len() {
                    self.per_class[k].shuffle(&mut self.rng);
                    self.cursors[k] = 0;
                }
                batch.push(self.per_class[k][self.cursors[k]]);
                self.cursors[k] += 1;
            }
        }
        batch.shuffle(&mut self.rng);
        self.emitted += 1;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.batches - self.emitted;
        (left, Some(left))
    }
}

/// Class-balanced batches over samples with the given class `labels`.
/// Only classes that occur in `labels` take part.
pub fn balance_batch(labels: &[usize], batch_size: usize, seed: u64) -> BalancedBatches {
    assert!(batch_size > 0, "batch size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut per_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        per_class[l].push(i);
    }
    per_class.retain(|v| !v.is_empty());
    for v in &mut per_class {
        v.shuffle(&mut rng);
    }
    let cursors = vec![0; per_class.len()];
    let batches = if labels.is_empty() { 0 } else { labels.len().div_ceil(batch_size) };
    BalancedBatches { per_class, cursors, batch_size, batches, emitted: 0, rng }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn histogram(items: &[usize], classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &i in items {
            h[i] += 1;
        }
        h
    }

    #[test]
    fn epoch_pads_minority() {
        let groups = vec![vec![0usize; 2], vec![1usize; 5]];
        assert_eq!(histogram(&balance_epoch(&groups, 0), 2), vec![5, 5]);
    }

    #[test]
    fn balanced_epoch_is_a_permutation() {
        let groups: Vec<Vec<(usize, usize)>> = (0..3).map(|c| (0..4).map(|i| (c, i)).collect()).collect();
        let mut out = balance_epoch(&groups, 7);
        out.sort();
        let mut all: Vec<_> = groups.concat();
        all.sort();
        assert_eq!(out, all);
    }

    #[test]
    fn padded_samples_come_from_their_group() {
        let groups = vec![vec![10, 11], vec![20, 21, 22, 23, 24, 25]];
        let out = balance_epoch(&groups, 3);
        assert_eq!(out.iter().filter(|&&v| v < 20).count(), 6);
        assert!(out.iter().all(|v| groups[0].contains(v) || groups[1].contains(v)));
    }

    #[test]
    fn one_or_two_per_class() {
        let labels: Vec<usize> = (0..33).flat_map(|c| vec![c; 1 + c % 4]).collect();
        for (bs, per) in [(33, 1), (66, 2)] {
            for batch in balance_batch(&labels, bs, 1) {
                let h = histogram(&batch.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 33);
                assert!(h.iter().all(|&v| v == per), "{h:?}");
            }
        }
    }

    #[test]
    fn uneven_split_differs_by_at_most_one() {
        let labels = [vec![0; 50], vec![1; 3], vec![2; 9]].concat();
        let batches: Vec<_> = balance_batch(&labels, 10, 4).collect();
        assert_eq!(batches.len(), 7);
        for b in batches {
            let h = histogram(&b.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 3);
            assert_eq!(h.iter().sum::<usize>(), 10);
            assert!(h.iter().max().unwrap() - h.iter().min().unwrap() <= 1);
        }
    }
}
