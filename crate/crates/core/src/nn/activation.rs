//! Elementwise activations, the sigmoid gate, softmax and inverted dropout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(input: &Tensor) -> Tensor {
    // NaN passes through so divergence stays visible downstream
    input.map(|x| if x > 0.0 || x.is_nan() { x } else { 0.0 })
}

/// `G(x) = sigmoid(x) * x`, elementwise.
pub fn gate(input: &Tensor) -> Tensor {
    input.map(|x| sigmoid(x) * x)
}

/// `d/dx [sigmoid(x) * x] = s * (1 + x * (1 - s))`.
pub fn gate_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

fn cached<'a>(cache: &'a Option<Tensor>, op: &str) -> Result<&'a Tensor> {
    cache
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{op} backward called before forward")))
}

fn check_grad_len(op: &'static str, input: &Tensor, grad: &Tensor) -> Result<()> {
    if input.len() != grad.len() {
        return Err(Error::dim(op, "grad_output", input.len(), grad.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache: Option<Tensor>,
}

impl Relu {
    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        self.cache = Some(input.clone());
        relu(input)
    }

    /// Derivative taken as 0 at exactly 0.
    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = cached(&self.cache, "relu")?;
        check_grad_len("relu backward", input, grad_output)?;
        let dx = input
            .data()
            .iter()
            .zip(grad_output.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::new(input.shape().to_vec(), dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Gate {
    cache: Option<Tensor>,
}

impl Gate {
    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        self.cache = Some(input.clone());
        gate(input)
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = cached(&self.cache, "gate")?;
        check_grad_len("gate backward", input, grad_output)?;
        let dx = input
            .data()
            .iter()
            .zip(grad_output.data())
            .map(|(&x, &g)| g * gate_derivative(x))
            .collect();
        Tensor::new(input.shape().to_vec(), dx)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Gradient through softmax: `dx = s ⊙ (ds - <ds, s>)`.
pub fn softmax_backward_slice(s: &[f64], ds: &[f64]) -> Vec<f64> {
    let dot: f64 = s.iter().zip(ds).map(|(a, b)| a * b).sum();
    s.iter().zip(ds).map(|(&si, &g)| si * (g - dot)).collect()
}

/// Softmax over a 1-D tensor.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    if input.rank() != 1 || input.is_empty() {
        return Err(Error::dim("softmax", "rank", 1, input.rank()));
    }
    Ok(Tensor::from_vec(softmax_slice(input.data())))
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// In eval mode, or with rate 0, this is the identity.
    pub fn forward<R: Rng + ?Sized>(&mut self, input: &Tensor, training: bool, rng: &mut R) -> Tensor {
        if !training || self.rate == 0.0 {
            self.mask = None;
            return input.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.random::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        let out = self.apply_mask(input, &mask);
        self.mask = Some(mask);
        out
    }

    /// Forward with an externally fixed mask; used to check gradients with the mask held constant.
    pub fn forward_with_mask(&mut self, input: &Tensor, mask: Vec<f64>) -> Result<Tensor> {
        if mask.len() != input.len() {
            return Err(Error::dim("dropout", "mask", input.len(), mask.len()));
        }
        let out = self.apply_mask(input, &mask);
        self.mask = Some(mask);
        Ok(out)
    }

    pub fn mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }

    fn apply_mask(&self, input: &Tensor, mask: &[f64]) -> Tensor {
        let data = input.data().iter().zip(mask).map(|(x, m)| x * m).collect();
        Tensor::new(input.shape().to_vec(), data).expect("same shape as input")
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Tensor {
        match &self.mask {
            Some(mask) => self.apply_mask(grad_output, mask),
            None => grad_output.clone(),
        }
    }
}

/// Functional dropout over a whole tensor.
pub fn dropout<R: Rng + ?Sized>(input: &Tensor, rate: f64, training: bool, rng: &mut R) -> Result<Tensor> {
    Ok(Dropout::new(rate)?.forward(input, training, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&t(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&t(&[-3.0, -0.1, -1e9])).data().iter().all(|&v| v == 0.0));
        assert_eq!(relu(&t(&[0.5, 3.0])).data(), &[0.5, 3.0]);
        let mut r = Relu::default();
        r.forward(&t(&[-1.0, 0.0, 2.0]));
        assert_eq!(r.backward(&t(&[1.0, 1.0, 1.0])).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gate(&t(&[0.0])).data(), &[0.0]);
        assert!((gate(&t(&[1000.0])).data()[0] - 1000.0).abs() < 1e-9);
        let sigma_one = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((gate(&t(&[1.0])).data()[0] - 0.7310585786300049).abs() < 1e-15);
        assert!((sigma_one - 0.7310585786300049).abs() < 1e-15);
        // saturates to 0 on the negative side without NaN
        assert_eq!(gate(&t(&[-1000.0])).data()[0], -0.0);
    }

    #[test]
    fn gate_shrinks_and_keeps_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-50.0..50.0);
            let g = gate(&t(&[x])).data()[0];
            assert!(g == 0.0 || g.signum() == x.signum());
            assert!(g.abs() <= x.abs());
        }
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&t(&[2.5, 2.5, 2.5])).unwrap();
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&t(&[0.0, 3.0f64.ln()])).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
        assert_eq!(softmax(&t(&[-42.0])).unwrap().data(), &[1.0]);
        // large inputs must not overflow
        let s = softmax(&t(&[1000.0, 1000.0])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t(&[1.0, -2.0, 3.0, 4.0]);
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.3, false, &mut rng).unwrap(), x);
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }

    #[test]
    fn dropout_mask_is_reproducible() {
        let x = t(&[1.0; 64]);
        let a = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let c = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dropout_statistics() {
        let n = 200_000;
        let x = Tensor::from_vec(vec![1.0; n]);
        let y = dropout(&x, 0.3, true, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
        assert!((zeros - 0.3).abs() < 0.01, "zero fraction {zeros}");
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }
}
