//! Generate paired synthetic embeddings, train a BatchFusion model and report test metrics.
//!
//! ```text
//! cargo run --release --example synthetic_pipeline
//! ```

use std::time::Instant;

use batchmos::data::{synth_generate, Dataset, Split, SplitCounts};
use batchmos::train::{constant_mean_mae, train_with_observer, TrainConfig};
use batchmos::ModelSpec;

fn main() -> batchmos::Result<()> {
    let synth = synth_generate(7, (512, 192), SplitCounts::new(1000, 200, 200, 200), 0.1)?;
    let data = Dataset::from_synth(synth, true);
    let config = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let mut last_epoch = 0;
    let (_, report) = train_with_observer(&ModelSpec::batch(512, 192), &data, &config, |log| {
        if log.epoch != last_epoch {
            last_epoch = log.epoch;
            println!("epoch {:>2} starts at {:>7.2}s", log.epoch, start.elapsed().as_secs_f64());
        }
    })?;
    for (i, (loss, dev)) in report.epochs.iter().zip(&report.dev_mse).enumerate() {
        println!("epoch {:>2}  mse {:.6}  bd {:.6}  total {:.6}  dev_mse {:.6}", i + 1, loss.mse, loss.bd, loss.total, dev);
    }
    println!("best epoch {} of {}", report.best_epoch, report.stopped_epoch);
    for (split, m) in &report.test_metrics {
        println!("{split:<12} mae {:.6}  mse {:.6}", m.mae, m.mse);
    }
    println!("constant-mean test-main mae {:.6}", constant_mean_mae(&data, Split::TestMain)?);
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
