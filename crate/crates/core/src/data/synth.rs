//! Synthetic paired embeddings with a planted MOS signal.
//!
//! Each clip draws a latent quality `q ~ U[1, 5]`. The two embeddings are
//! `w_a * q + noise` and `w_b * q + noise` for fixed random directions `w_a`, `w_b`,
//! and the label is `clamp(q + noise_sd * N(0, 1), 1, 5)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::embeddings::EmbeddingTable;
use super::labels::{ClipLabel, Split, MOS_MAX, MOS_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test_main: usize,
    pub test_other1: usize,
}

impl SplitCounts {
    pub fn new(train: usize, dev: usize, test_main: usize, test_other1: usize) -> Self {
        Self {
            train,
            dev,
            test_main,
            test_other1,
        }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::TestMain => self.test_main,
            Split::TestOther1 => self.test_other1,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test_main + self.test_other1
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub table_a: EmbeddingTable,
    pub table_b: EmbeddingTable,
    pub labels: Vec<ClipLabel>,
}

pub fn synth_generate(seed: u64, dims: (usize, usize), counts: SplitCounts, noise_sd: f64) -> Result<SynthData> {
    if Split::ALL.iter().any(|&s| counts.get(s) == 0) {
        return Err(Error::Config("synthetic data needs at least one clip per split".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Config(format!("noise_sd {noise_sd} must be finite and non-negative")));
    }
    let (dim_a, dim_b) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_a: Vec<f64> = (0..dim_a).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let w_b: Vec<f64> = (0..dim_b).map(|_| rng.random_range(-1.0..=1.0)).collect();

    let mut table_a = EmbeddingTable::new("synth-a", dim_a)?;
    let mut table_b = EmbeddingTable::new("synth-b", dim_b)?;
    let mut labels = Vec::with_capacity(counts.total());

    let noisy = |w: &[f64], q: f64, rng: &mut ChaCha8Rng| -> Vec<f32> {
        w.iter()
            .map(|&wi| {
                let e: f64 = rng.sample(StandardNormal);
                (wi * q + noise_sd * e) as f32
            })
            .collect()
    };

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut idx = 0usize;
    for split in Split::ALL {
        for _ in 0..counts.get(split) {
            let clip_id = format!("synth_{idx:06}");
            idx += 1;
            let q: f64 = rng.random_range(MOS_MIN..=MOS_MAX);
            let va = noisy(&w_a, q, &mut rng);
            let vb = noisy(&w_b, q, &mut rng);
            let mos = (q + noise_sd * unit.sample(&mut rng)).clamp(MOS_MIN, MOS_MAX);
            table_a.push(clip_id.clone(), va)?;
            table_b.push(clip_id.clone(), vb)?;
            labels.push(ClipLabel { clip_id, mos, split });
        }
    }
    Ok(SynthData {
        table_a,
        table_b,
        labels,
    })
}
