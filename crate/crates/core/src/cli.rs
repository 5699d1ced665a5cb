//! The `batchmos` command line.
//!
//! Exit codes: 0 success (including `--help`), 1 runtime error, 2 usage error.
//! Results go to stdout with six decimals; diagnostics go to stderr. Output
//! files are written only after the whole command has succeeded.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{checkpoint_to_bytes, load_checkpoint, read_checkpoint_header, CHECKPOINT_MAGIC};
use crate::data::embeddings::{read_embedding_header, EMBEDDING_MAGIC};
use crate::data::labels::labels_to_csv;
use crate::data::{load_labels, read_embeddings, synth_generate, Dataset, EmbeddingTable, Split, SplitCounts};
use crate::error::{Error, Result};
use crate::grid::{load_manifest, results_to_csv, run_grid, GridOptions};
use crate::model::{Model, ModelKind, ModelSpec, DEFAULT_ALPHA, DEFAULT_DROPOUT};
use crate::ptm::resolve_id;
use crate::tensor::Tensor;
use crate::train::{evaluate, train, TrainConfig};

pub const DATA_ROOT_ENV: &str = "SMOS_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "batchmos", version, about = "Singing-voice MOS regression over pre-trained embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write paired synthetic embedding files and a label CSV
    Synth(SynthArgs),
    /// Train a model and write its checkpoint and report
    Train(TrainArgs),
    /// Report MAE and MSE of a checkpoint on one split
    Evaluate(EvaluateArgs),
    /// Print the predicted MOS of one clip
    Predict(PredictArgs),
    /// Train and evaluate every cell of a JSON manifest
    Grid(GridArgs),
    /// Print the header of an SMOS or SMCK file
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct DataRoot {
    /// Directory for relative or abbreviated embedding names [env: SMOS_DATA_ROOT]
    #[arg(long)]
    data_root: Option<PathBuf>,
}

impl DataRoot {
    fn get(&self) -> Option<PathBuf> {
        self.data_root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
    }

    /// `name` as given if it exists, else `<root>/name`, else `<root>/<ptm_id>.smos`.
    fn resolve(&self, name: &Path) -> PathBuf {
        if name.exists() {
            return name.to_path_buf();
        }
        if let Some(root) = self.get() {
            let joined = root.join(name);
            if joined.exists() {
                return joined;
            }
            if let Some(s) = name.to_str() {
                let by_id = root.join(format!("{}.smos", resolve_id(s)));
                if by_id.exists() {
                    return by_id;
                }
            }
        }
        name.to_path_buf()
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding widths as `A,B`
    #[arg(long, default_value = "512,192")]
    dims: String,
    /// Clip counts as `train,dev,test-main,test-other1`
    #[arg(long, default_value = "1000,200,200,200")]
    counts: String,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    /// Output directory (synth-a.smos, synth-b.smos, labels.csv)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_kind)]
    model: ModelKind,
    #[arg(long)]
    emb_a: PathBuf,
    #[arg(long)]
    emb_b: Option<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_checkpoint: PathBuf,
    #[arg(long)]
    out_report: PathBuf,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    /// Epochs without dev improvement before stopping (0 disables)
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_DROPOUT)]
    dropout: f64,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    emb_a: PathBuf,
    #[arg(long)]
    emb_b: Option<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Split,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    emb_a: PathBuf,
    #[arg(long)]
    emb_b: Option<PathBuf>,
    #[arg(long)]
    clip_id: String,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Results CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Label CSV (default: <data root>/labels.csv)
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    root: DataRoot,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    file: PathBuf,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<usize>> {
    let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match parts.into_iter().collect::<std::result::Result<Vec<_>, _>>() {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Error::Config(format!("--{what} expects {n} comma-separated integers, got `{s}`"))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn load_tables(root: &DataRoot, a: &Path, b: Option<&PathBuf>) -> Result<(EmbeddingTable, Option<EmbeddingTable>)> {
    let ta = read_embeddings(root.resolve(a))?;
    let tb = b.map(|p| read_embeddings(root.resolve(p))).transpose()?;
    Ok((ta, tb))
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let dims = parse_list(&args.dims, 2, "dims")?;
    let c = parse_list(&args.counts, 4, "counts")?;
    let data = synth_generate(args.seed, (dims[0], dims[1]), SplitCounts::new(c[0], c[1], c[2], c[3]), args.noise_sd)?;
    let files = [
        (args.out.join("synth-a.smos"), data.table_a.to_bytes()?),
        (args.out.join("synth-b.smos"), data.table_b.to_bytes()?),
        (args.out.join("labels.csv"), labels_to_csv(&data.labels).into_bytes()),
    ];
    for (path, bytes) in &files {
        write_file(path, bytes)?;
    }
    for (path, _) in &files {
        writeln!(out, "{}", path.display()).ok();
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let (ta, tb) = load_tables(&args.root, &args.emb_a, args.emb_b.as_ref())?;
    let labels = load_labels(args.root.resolve(&args.labels))?;
    let spec = ModelSpec::of_kind(args.model, ta.dim(), tb.as_ref().map(EmbeddingTable::dim))?;
    let data = Dataset::new(ta, tb, labels);
    let config = TrainConfig {
        lr: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        alpha: args.alpha,
        patience: args.patience,
        seed: args.seed,
        dropout_rate: args.dropout,
    };
    let (model, report) = train(&spec, &data, &config)?;
    let ckpt = checkpoint_to_bytes(&model)?;
    let json = report.to_json()? + "\n";
    write_file(&args.out_checkpoint, &ckpt)?;
    write_file(&args.out_report, json.as_bytes())?;
    writeln!(out, "best_epoch {}", report.best_epoch).ok();
    writeln!(out, "stopped_epoch {}", report.stopped_epoch).ok();
    writeln!(out, "dev_mse {:.6}", report.best_dev_mse()).ok();
    for (split, m) in &report.test_metrics {
        writeln!(out, "{split} mae {:.6} mse {:.6}", m.mae, m.mse).ok();
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let mut model = load_checkpoint(&args.checkpoint)?;
    let (ta, tb) = load_tables(&args.root, &args.emb_a, args.emb_b.as_ref())?;
    let labels = load_labels(args.root.resolve(&args.labels))?;
    let m = evaluate(&mut model, args.split, &Dataset::new(ta, tb, labels))?;
    writeln!(out, "mae {:.6}", m.mae).ok();
    writeln!(out, "mse {:.6}", m.mse).ok();
    Ok(())
}

fn row(table: &EmbeddingTable, clip: &str) -> Result<Tensor> {
    let v = table.get_f64(clip)?;
    Tensor::new(vec![1, v.len()], v)
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let mut model: Model = load_checkpoint(&args.checkpoint)?;
    let (ta, tb) = load_tables(&args.root, &args.emb_a, args.emb_b.as_ref())?;
    let a = row(&ta, &args.clip_id)?;
    let b = tb.as_ref().map(|t| row(t, &args.clip_id)).transpose()?;
    let p = model.predict(&a, b.as_ref())?;
    writeln!(out, "{:.6}", p[0]).ok();
    Ok(())
}

fn cmd_grid(args: &GridArgs, out: &mut dyn Write) -> Result<()> {
    let cells = load_manifest(&args.manifest)?;
    let root = args.root.get().unwrap_or_else(|| PathBuf::from("."));
    let labels = args.labels.clone().unwrap_or_else(|| root.join("labels.csv"));
    let opts = GridOptions {
        data_root: root,
        labels,
        config: TrainConfig {
            seed: args.seed,
            max_epochs: args.max_epochs,
            patience: args.patience,
            alpha: args.alpha,
            ..TrainConfig::default()
        },
        workers: args.workers.max(1),
    };
    let rows = run_grid(&cells, &opts)?;
    write_file(&args.out, results_to_csv(&rows)?.as_bytes())?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    writeln!(out, "cells {} rows {} failed {}", cells.len(), rows.len(), failed).ok();
    Ok(())
}

fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = std::fs::read(&args.file).map_err(|e| Error::io(&args.file, e))?;
    match bytes.get(..4) {
        Some(m) if m == EMBEDDING_MAGIC => {
            let h = read_embedding_header(&bytes)?;
            writeln!(out, "format SMOS\nversion {}\nptm_id {}\ndim {}\ncount {}", h.version, h.ptm_id, h.dim, h.count).ok();
        }
        Some(m) if m == CHECKPOINT_MAGIC => {
            let spec = read_checkpoint_header(&bytes)?;
            let params = Model::build(&spec).map(|m| m.num_params())?;
            let dim_b = spec.dim_b.map_or_else(|| "none".to_owned(), |d| d.to_string());
            let alpha = spec.alpha.map_or_else(|| "none".to_owned(), |a| format!("{a:.6}"));
            writeln!(
                out,
                "format SMCK\nkind {}\ndim_a {}\ndim_b {}\nhidden {}\nalpha {}\ndropout {:.6}\nseed {}\nparams {}",
                spec.kind, spec.dim_a, dim_b, spec.hidden, alpha, spec.dropout_rate, spec.seed, params
            )
            .ok();
        }
        _ => {
            return Err(Error::Format(format!(
                "{}: not an SMOS or SMCK file",
                args.file.display()
            )))
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{}", e.render()).ok();
                    0
                }
                _ => {
                    write!(err, "{}", e.render()).ok();
                    2
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Grid(a) => cmd_grid(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            1
        }
    }
}
