//! Mini-batch partitioning of a triple split.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::rng;

/// Shuffles `split` with a seeded permutation and cuts it into `n_batches`
/// contiguous chunks whose sizes differ by at most one (larger chunks first).
pub fn make_batches(split: &[Triple], n_batches: usize, seed: u64) -> Result<Vec<Vec<Triple>>> {
    if n_batches == 0 || n_batches > split.len() {
        return Err(Error::InvalidBatchCount { n_batches, len: split.len() });
    }
    let mut order = split.to_vec();
    order.shuffle(&mut rng::stream(seed, &[0xBA7C]));

    let base = order.len() / n_batches;
    let extra = order.len() % n_batches;
    let mut batches = Vec::with_capacity(n_batches);
    let mut rest = order.as_slice();
    for i in 0..n_batches {
        let size = base + usize::from(i < extra);
        let (chunk, tail) = rest.split_at(size);
        batches.push(chunk.to_vec());
        rest = tail;
    }
    Ok(batches)
}
