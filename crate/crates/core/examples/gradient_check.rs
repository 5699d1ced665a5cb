//! Finite-difference checks of a conv layer and a full BatchFusion model.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use batchmos::nn::gradcheck::DEFAULT_STEP;
use batchmos::nn::{grad_check, max_relative_error, Conv1d};
use batchmos::{Model, ModelSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> batchmos::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    // conv1d: gradient of sum(conv(x)) with respect to the input
    let x: Vec<f64> = (0..2 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut conv = Conv1d::new(2, 4, 3, &mut rng);
    let y = conv.forward(&Tensor::new(vec![2, 12], x.clone())?)?;
    let dx = conv.backward(&Tensor::new(y.shape().to_vec(), vec![1.0; y.len()])?)?;
    let mut probe = conv.clone();
    let err = grad_check(
        |v| probe.forward(&Tensor::new(vec![2, 12], v.to_vec()).unwrap()).unwrap().data().iter().sum(),
        &x,
        dx.data(),
        DEFAULT_STEP,
    );
    println!("conv1d input gradient     max rel err {err:.3e}");

    // whole model: mse + alpha * bd with respect to the projection weights of branch a
    let spec = ModelSpec::batch(16, 12).with_hidden(8).with_seed(3);
    let mut model = Model::build(&spec)?;
    let a = Tensor::new(vec![4, 16], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let b = Tensor::new(vec![4, 12], (0..48).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let targets = [1.5, 2.0, 4.0, 3.5];
    let out = model.forward(&a, Some(&b), false)?;
    model.backward(&out, &targets)?;
    let analytic = model.params()[2].weights.grad()[..20].to_vec();
    let mut numeric = Vec::new();
    for i in 0..20 {
        let mut loss_at = |delta: f64| {
            model.params_mut()[2].weights.data_mut()[i] += delta;
            let out = model.forward(&a, Some(&b), false).unwrap();
            model.params_mut()[2].weights.data_mut()[i] -= delta;
            model.loss(&out, &targets).unwrap().total
        };
        numeric.push((loss_at(DEFAULT_STEP) - loss_at(-DEFAULT_STEP)) / (2.0 * DEFAULT_STEP));
    }
    println!("BatchFusion projection    max rel err {:.3e}", max_relative_error(&analytic, &numeric));
    Ok(())
}
