//! The Bhattacharyya distance between two discrete distributions and its gradient.
//!
//! ```text
//! cargo run --example bhattacharyya
//! ```

use batchmos::nn::activation::softmax_slice;
use batchmos::nn::{bhattacharyya_backward, bhattacharyya_distance};
use batchmos::Tensor;

fn show(p: &[f64], q: &[f64]) -> batchmos::Result<()> {
    let d = bhattacharyya_distance(&Tensor::from_vec(p.to_vec()), &Tensor::from_vec(q.to_vec()))?;
    let (dp, _) = bhattacharyya_backward(p, q);
    println!("p = {p:?}\nq = {q:?}\n  BD = {d:.6}  dBD/dp = {dp:.4?}");
    Ok(())
}

fn main() -> batchmos::Result<()> {
    show(&[0.5, 0.5], &[0.5, 0.5])?;
    show(&[0.8, 0.2], &[0.2, 0.8])?;
    // disjoint supports: BC is clamped at 1e-12 and the gradient is zero
    show(&[1.0, 0.0], &[0.0, 1.0])?;

    // inside BatchFusion both sides are softmax-normalised gated features
    let p = softmax_slice(&[0.3, -1.2, 2.0, 0.0]);
    let q = softmax_slice(&[0.1, -0.8, 1.5, 0.4]);
    show(&p, &q)?;

    let invalid = bhattacharyya_distance(&Tensor::from_vec(vec![0.7, 0.7]), &Tensor::from_vec(vec![0.5, 0.5]));
    println!("unnormalised input: {}", invalid.unwrap_err());
    Ok(())
}
