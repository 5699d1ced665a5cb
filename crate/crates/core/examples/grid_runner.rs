//! A small experiment grid over synthetic embedding files.
//!
//! ```text
//! cargo run --release --example grid_runner
//! ```
//!
//! Cells name embeddings by PTM id or by grid abbreviation (`XV`, `EC`, ...);
//! each resolves to `<data_root>/<ptm_id>.smos`. The `XV` cell below has no
//! file and shows up as an error row.

use batchmos::data::{synth_generate, write_embeddings, write_labels, SplitCounts};
use batchmos::grid::{parse_manifest, results_to_csv, run_grid, GridOptions};
use batchmos::train::TrainConfig;

fn main() -> batchmos::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    let data = synth_generate(1, (48, 24), SplitCounts::new(200, 40, 40, 40), 0.2)?;
    write_embeddings(&data.table_a, root.join("synth-a.smos"))?;
    write_embeddings(&data.table_b, root.join("synth-b.smos"))?;
    write_labels(&data.labels, root.join("labels.csv"))?;

    let cells = parse_manifest(
        r#"[
            {"a": "synth-a", "kind": "fcn"},
            {"a": "synth-a", "kind": "cnn"},
            {"a": "synth-a", "b": "synth-b", "kind": "concat"},
            {"a": "synth-a", "b": "synth-b", "kind": "batch"},
            {"a": "XV", "kind": "cnn"}
        ]"#,
    )?;
    let opts = GridOptions {
        data_root: root.to_path_buf(),
        labels: root.join("labels.csv"),
        config: TrainConfig {
            max_epochs: 10,
            patience: 5,
            ..TrainConfig::default()
        },
        workers: 2,
    };
    let rows = run_grid(&cells, &opts)?;
    print!("{}", results_to_csv(&rows)?);
    Ok(())
}
