//! Balanced two-domain mini-batching. Every batch holds the same number of
//! source and target samples; each domain cycles through reshuffled epochs
//! of its own dataset independently, so a tiny target set simply recycles
//! and the stream never ends.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, DomainSample};
use crate::rng::{derive_seed, seed_rng, Stream};

pub struct MixedBatch<'a> {
    pub source: Vec<&'a DomainSample>,
    pub target: Vec<&'a DomainSample>,
}

struct DomainCursor {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl DomainCursor {
    fn new(len: usize, seed: u64) -> Self {
        let mut c = DomainCursor {
            order: (0..len).collect(),
            pos: 0,
            rng: seed_rng(seed),
        };
        c.order.shuffle(&mut c.rng);
        c
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let i = self.order[self.pos];
        self.pos += 1;
        i
    }
}

pub struct MixedBatches<'a> {
    source: &'a Dataset,
    target: &'a Dataset,
    half: usize,
    source_cursor: DomainCursor,
    target_cursor: DomainCursor,
}

impl<'a> MixedBatches<'a> {
    pub fn new(
        source: &'a Dataset,
        target: &'a Dataset,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self, DataError> {
        if batch_size == 0 || batch_size % 2 != 0 {
            return Err(DataError::BadBatchSize { batch_size });
        }
        for ds in [source, target] {
            if ds.is_empty() {
                return Err(DataError::EmptyDomain { domain: ds.domain });
            }
        }
        Ok(MixedBatches {
            source,
            target,
            half: batch_size / 2,
            source_cursor: DomainCursor::new(source.len(), derive_seed(seed, Stream::Batch)),
            target_cursor: DomainCursor::new(
                target.len(),
                derive_seed(seed.wrapping_add(1), Stream::Batch),
            ),
        })
    }

    pub fn next_batch(&mut self) -> MixedBatch<'a> {
        let source = (0..self.half)
            .map(|_| &self.source.samples[self.source_cursor.next()])
            .collect();
        let target = (0..self.half)
            .map(|_| &self.target.samples[self.target_cursor.next()])
            .collect();
        MixedBatch { source, target }
    }
}

impl<'a> Iterator for MixedBatches<'a> {
    type Item = MixedBatch<'a>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_batch())
    }
}

/// Single-domain epoch batching for plain classifier training: reshuffles
/// per epoch and yields index slices of at most `batch_size`.
pub fn epoch_batches(len: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}
