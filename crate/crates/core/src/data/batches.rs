use super::Dataset;
use crate::numerics::{Matrix, Rng};

/// One epoch of mini-batches over a seeded permutation of the rows.
pub struct BatchIter<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch: usize,
    pos: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = (Matrix, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        let x = self.ds.features.select_rows(idx);
        let y = idx.iter().map(|&i| self.ds.labels[i]).collect();
        Some((x, y))
    }
}

/// Panics if `batch` is zero.
pub fn iterate_batches(ds: &Dataset, batch: usize, epoch_seed: u64) -> BatchIter<'_> {
    assert!(batch >= 1, "batch size must be at least 1");
    BatchIter {
        ds,
        order: Rng::new(epoch_seed).permutation(ds.len()),
        batch,
        pos: 0,
    }
}
