//! Embedding files, label manifests, batching and synthetic data.

pub mod batching;
pub(crate) mod bytes;
pub mod embeddings;
pub mod labels;
pub mod synth;

pub use batching::{make_batches, BatchPlan};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingRecord, EmbeddingTable};
pub use labels::{load_labels, parse_labels, write_labels, ClipLabel, Split};
pub use synth::{synth_generate, SplitCounts, SynthData};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labels joined with one or two embedding tables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub table_a: EmbeddingTable,
    pub table_b: Option<EmbeddingTable>,
    pub labels: Vec<ClipLabel>,
    by_id: HashMap<String, usize>,
}

/// Inputs and targets for one batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub a: Tensor,
    pub b: Option<Tensor>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(table_a: EmbeddingTable, table_b: Option<EmbeddingTable>, labels: Vec<ClipLabel>) -> Self {
        let by_id = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clip_id.clone(), i))
            .collect();
        Self {
            table_a,
            table_b,
            labels,
            by_id,
        }
    }

    pub fn from_synth(data: SynthData, paired: bool) -> Self {
        let b = paired.then_some(data.table_b);
        Self::new(data.table_a, b, data.labels)
    }

    pub fn dim_a(&self) -> usize {
        self.table_a.dim()
    }

    pub fn dim_b(&self) -> Option<usize> {
        self.table_b.as_ref().map(EmbeddingTable::dim)
    }

    pub fn split(&self, split: Split) -> Vec<&ClipLabel> {
        self.labels.iter().filter(|l| l.split == split).collect()
    }

    pub fn label(&self, clip_id: &str) -> Option<&ClipLabel> {
        self.by_id.get(clip_id).map(|&i| &self.labels[i])
    }

    /// Every labeled clip in `splits` must be present in every table.
    pub fn check_consistency(&self, splits: &[Split]) -> Result<()> {
        for l in self.labels.iter().filter(|l| splits.contains(&l.split)) {
            for table in std::iter::once(&self.table_a).chain(self.table_b.as_ref()) {
                if table.get(&l.clip_id).is_none() {
                    return Err(Error::MissingEmbedding {
                        clip: l.clip_id.clone(),
                        table: table.ptm_id().to_owned(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Stacks embeddings (promoted to `f64`) and MOS targets for `clip_ids`.
    pub fn batch<S: AsRef<str>>(&self, clip_ids: &[S]) -> Result<Batch> {
        let n = clip_ids.len();
        let stack = |table: &EmbeddingTable| -> Result<Tensor> {
            let mut data = Vec::with_capacity(n * table.dim());
            for id in clip_ids {
                let v = table.get(id.as_ref()).ok_or_else(|| Error::MissingEmbedding {
                    clip: id.as_ref().to_owned(),
                    table: table.ptm_id().to_owned(),
                })?;
                data.extend(v.iter().map(|&x| f64::from(x)));
            }
            Tensor::new(vec![n, table.dim()], data)
        };
        let a = stack(&self.table_a)?;
        let b = self.table_b.as_ref().map(stack).transpose()?;
        let targets = clip_ids
            .iter()
            .map(|id| {
                self.label(id.as_ref())
                    .map(|l| l.mos)
                    .ok_or_else(|| Error::Data(format!("no label for clip `{}`", id.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(Batch { a, b, targets })
    }
}
