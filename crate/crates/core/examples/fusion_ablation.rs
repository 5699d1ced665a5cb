//! BatchFusion against its ablation (no gate, no alignment term), which is ConcatFusion.
//!
//! ```text
//! cargo run --release --example fusion_ablation
//! ```

use batchmos::data::{synth_generate, Dataset, SplitCounts};
use batchmos::train::{train, TrainConfig};
use batchmos::{Model, ModelSpec, Tensor};

fn main() -> batchmos::Result<()> {
    // with copied weights, alpha = 0 and the gate switched off, the two heads agree
    let concat = Model::build(&ModelSpec::concat(64, 32).with_seed(1))?;
    let mut ablated = Model::build(&ModelSpec::batch(64, 32).with_alpha(0.0))?;
    ablated.copy_params_from(&concat)?;
    ablated.set_gate_enabled(false);
    let a = Tensor::new(vec![2, 64], (0..128).map(|i| (i as f64 * 0.1).sin()).collect())?;
    let b = Tensor::new(vec![2, 32], (0..64).map(|i| (i as f64 * 0.3).cos()).collect())?;
    let mut concat = concat;
    println!("concat  {:?}", concat.predict(&a, Some(&b))?);
    println!("ablated {:?}", ablated.predict(&a, Some(&b))?);

    // trained side by side on noisy synthetic data
    let data = Dataset::from_synth(synth_generate(3, (64, 32), SplitCounts::new(400, 80, 80, 80), 0.5)?, true);
    let config = TrainConfig {
        seed: 3,
        max_epochs: 20,
        ..TrainConfig::default()
    };
    for spec in [ModelSpec::concat(64, 32), ModelSpec::batch(64, 32)] {
        let (_, report) = train(&spec, &data, &config)?;
        let tm = report.test_metrics["test-main"];
        println!(
            "{:<7} best epoch {:>2}  test-main mae {:.6}  mse {:.6}",
            spec.kind, report.best_epoch, tm.mae, tm.mse
        );
    }
    Ok(())
}
