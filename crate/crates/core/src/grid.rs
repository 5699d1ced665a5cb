//! Experiment grids: many (embedding pair, model kind) cells trained independently.
//!
//! Each cell gets its own seed, `base_seed ^ fnv1a(cell name)`, so adding or
//! editing one cell never shifts another's results. Cells may run on a rayon
//! pool; rows are always collected in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_labels, read_embeddings, ClipLabel, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::ptm::{resolve_id, PTMS};
use crate::train::{train, TrainConfig};

pub const RESULTS_HEADER: [&str; 8] = ["cell", "kind", "split", "mae", "mse", "stopped_epoch", "seed", "error"];

/// One manifest entry. `a` and `b` are grid abbreviations (`XV`) or PTM ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    pub kind: ModelKind,
}

impl GridCell {
    pub fn single(a: &str, kind: ModelKind) -> Self {
        Self {
            name: None,
            a: a.to_owned(),
            b: None,
            kind,
        }
    }

    pub fn pair(a: &str, b: &str, kind: ModelKind) -> Self {
        Self {
            name: None,
            a: a.to_owned(),
            b: Some(b.to_owned()),
            kind,
        }
    }

    /// Explicit name, or `kind:A` / `kind:A+B`.
    pub fn cell_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.b {
            Some(b) => format!("{}:{}+{}", self.kind, self.a, b),
            None => format!("{}:{}", self.kind, self.a),
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn cell_seed(base_seed: u64, cell_name: &str) -> u64 {
    base_seed ^ fnv1a(cell_name.as_bytes())
}

/// Single-embedding FCN and CNN cells for all thirteen models.
pub fn single_model_cells() -> Vec<GridCell> {
    PTMS.iter()
        .flat_map(|p| [ModelKind::Fcn, ModelKind::Cnn].map(|k| GridCell::single(p.abbrev, k)))
        .collect()
}

pub fn parse_manifest(json: &str) -> Result<Vec<GridCell>> {
    let cells: Vec<GridCell> = serde_json::from_str(json)?;
    for c in &cells {
        if c.kind.is_fusion() != c.b.is_some() {
            return Err(Error::Config(format!(
                "cell `{}`: kind {} {} a second embedding",
                c.cell_name(),
                c.kind,
                if c.kind.is_fusion() { "needs" } else { "does not take" }
            )));
        }
    }
    Ok(cells)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<GridCell>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Directory holding `<ptm_id>.smos` files.
    pub data_root: PathBuf,
    pub labels: PathBuf,
    /// Base config; each cell's seed is derived from `config.seed`.
    pub config: TrainConfig,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cell: String,
    pub kind: ModelKind,
    pub split: Option<Split>,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub stopped_epoch: Option<usize>,
    pub seed: u64,
    pub error: Option<String>,
}

pub fn embedding_path(root: &Path, name: &str) -> PathBuf {
    root.join(format!("{}.smos", resolve_id(name)))
}

fn run_cell(cell: &GridCell, labels: &[ClipLabel], opts: &GridOptions) -> Vec<GridRow> {
    let name = cell.cell_name();
    let seed = cell_seed(opts.config.seed, &name);
    let outcome = (|| {
        let a = read_embeddings(embedding_path(&opts.data_root, &cell.a))?;
        let b = cell
            .b
            .as_ref()
            .map(|b| read_embeddings(embedding_path(&opts.data_root, b)))
            .transpose()?;
        let spec = ModelSpec::of_kind(cell.kind, a.dim(), b.as_ref().map(|t| t.dim()))?;
        let data = Dataset::new(a, b, labels.to_vec());
        let config = TrainConfig {
            seed,
            ..opts.config.clone()
        };
        train(&spec, &data, &config).map(|(_, report)| report)
    })();
    match outcome {
        Ok(report) => report
            .test_metrics
            .iter()
            .map(|(split, m)| GridRow {
                cell: name.clone(),
                kind: cell.kind,
                split: split.parse().ok(),
                mae: Some(m.mae),
                mse: Some(m.mse),
                stopped_epoch: Some(report.stopped_epoch),
                seed,
                error: None,
            })
            .collect(),
        Err(e) => vec![GridRow {
            cell: name,
            kind: cell.kind,
            split: None,
            mae: None,
            mse: None,
            stopped_epoch: None,
            seed,
            error: Some(e.to_string()),
        }],
    }
}

/// Trains every cell. Per-cell failures become error rows; only a missing or
/// invalid label file aborts the whole run.
pub fn run_grid(cells: &[GridCell], opts: &GridOptions) -> Result<Vec<GridRow>> {
    opts.config.validate()?;
    if cells.is_empty() {
        return Ok(Vec::new());
    }
    let labels = load_labels(&opts.labels)?;
    let per_cell: Vec<Vec<GridRow>> = if opts.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", opts.workers)))?;
        pool.install(|| cells.par_iter().map(|c| run_cell(c, &labels, opts)).collect())
    } else {
        cells.iter().map(|c| run_cell(c, &labels, opts)).collect()
    };
    Ok(per_cell.into_iter().flatten().collect())
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn results_to_csv(rows: &[GridRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.cell.clone(),
            r.kind.to_string(),
            r.split.map(|s| s.to_string()).unwrap_or_default(),
            opt_num(r.mae),
            opt_num(r.mse),
            r.stopped_epoch.map(|e| e.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_results(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, results_to_csv(rows)?).map_err(|e| Error::io(path, e))
}
