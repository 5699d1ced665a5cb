use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Deterministic per-epoch shuffling of the training clips.
///
/// Epoch `e` uses ChaCha8 seeded with `seed` on stream `e`, so each epoch
/// order is a pure function of `(seed, epoch)`.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    seed: u64,
    batch_size: usize,
    clip_ids: Vec<String>,
}

impl BatchPlan {
    pub fn new(clip_ids: Vec<String>, seed: u64, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if clip_ids.is_empty() {
            return Err(Error::Data("training split is empty".into()));
        }
        Ok(Self {
            seed,
            batch_size,
            clip_ids,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Fisher–Yates permutation of the clip ids for `epoch`.
    pub fn epoch_order(&self, epoch: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let mut order = self.clip_ids.clone();
        order.shuffle(&mut rng);
        order
    }

    pub fn batches(&self, epoch: u64) -> Vec<Vec<String>> {
        self.epoch_order(epoch)
            .chunks(self.batch_size)
            .map(<[String]>::to_vec)
            .collect()
    }
}

/// Shuffled batches of `clip_ids` for one epoch; the last batch may be short.
pub fn make_batches(clip_ids: &[String], seed: u64, batch_size: usize, epoch: u64) -> Result<Vec<Vec<String>>> {
    Ok(BatchPlan::new(clip_ids.to_vec(), seed, batch_size)?.batches(epoch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i:03}")).collect()
    }

    #[test]
    fn batch_sizes() {
        let b = make_batches(&ids(5), 3, 2, 0).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn deterministic_and_epoch_dependent() {
        let a = make_batches(&ids(40), 17, 8, 4).unwrap();
        assert_eq!(a, make_batches(&ids(40), 17, 8, 4).unwrap());
        assert_ne!(a, make_batches(&ids(40), 17, 8, 5).unwrap());
        assert_ne!(a, make_batches(&ids(40), 18, 8, 4).unwrap());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(make_batches(&[], 0, 4, 0).is_err());
        assert!(make_batches(&ids(3), 0, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn each_epoch_is_a_permutation(n in 1usize..200, bs in 1usize..40, seed: u64, epoch in 0u64..100) {
            let all = ids(n);
            let mut flat: Vec<String> = make_batches(&all, seed, bs, epoch).unwrap().concat();
            flat.sort();
            prop_assert_eq!(flat, all);
        }
    }
}
