use rand::Rng;

use crate::tensor::Tensor;

/// Trainable weights and bias of one layer, with Adam moment estimates for each.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub(crate) m_weights: Vec<f64>,
    pub(crate) v_weights: Vec<f64>,
    pub(crate) m_bias: Vec<f64>,
    pub(crate) v_bias: Vec<f64>,
    pub(crate) step_count: u64,
}

impl LayerParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Self {
        let nw = weights.len();
        let nb = bias.len();
        Self {
            weights,
            bias,
            m_weights: vec![0.0; nw],
            v_weights: vec![0.0; nw],
            m_bias: vec![0.0; nb],
            v_bias: vec![0.0; nb],
            step_count: 0,
        }
    }

    pub fn zeros(weight_shape: Vec<usize>, bias_len: usize) -> Self {
        Self::new(Tensor::zeros(weight_shape), Tensor::zeros(vec![bias_len]))
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        weight_shape: Vec<usize>,
        bias_len: usize,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut params = Self::zeros(weight_shape, bias_len);
        for w in params.weights.data_mut() {
            *w = rng.random_range(-limit..=limit);
        }
        params
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moments(&self) -> (&[f64], &[f64]) {
        (&self.m_weights, &self.m_bias)
    }

    pub fn second_moments(&self) -> (&[f64], &[f64]) {
        (&self.v_weights, &self.v_bias)
    }

    pub fn zero_grad(&mut self) {
        self.weights.zero_grad();
        self.bias.zero_grad();
    }

    /// Copies weight and bias values (not grads or moments) from `other`.
    pub fn copy_values_from(&mut self, other: &LayerParams) {
        self.weights.data_mut().copy_from_slice(other.weights.data());
        self.bias.data_mut().copy_from_slice(other.bias.data());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` using the gradients currently
/// stored in `params.weights.grad()` and `params.bias.grad()`.
pub fn adam_step(params: &mut LayerParams, lr: f64, beta1: f64, beta2: f64, eps: f64) {
    params.step_count += 1;
    let t = params.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let LayerParams {
        weights,
        bias,
        m_weights,
        v_weights,
        m_bias,
        v_bias,
        ..
    } = params;

    for (tensor, m, v) in [(weights, m_weights, v_weights), (bias, m_bias, v_bias)] {
        let (data, grad) = tensor.data_and_grad_mut();
        for (((w, &g), m), v) in data.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
