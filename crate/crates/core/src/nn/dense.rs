use rand::Rng;

use super::linalg::{gemm, Mat};
use super::params::LayerParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer `y = W·x + b` with `W` of shape `[d_out, d_in]`.
///
/// Accepts a single vector `[d_in]` or a batch `[n, d_in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub params: LayerParams,
    d_in: usize,
    d_out: usize,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn from_params(params: LayerParams) -> Result<Self> {
        let [d_out, d_in] = *params.weights.shape() else {
            return Err(Error::dim("dense", "weight rank", 2, params.weights.rank()));
        };
        if params.bias.len() != d_out {
            return Err(Error::dim("dense", "bias", d_out, params.bias.len()));
        }
        Ok(Self {
            params,
            d_in,
            d_out,
            cache: None,
        })
    }

    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let params = LayerParams::glorot(vec![d_out, d_in], d_out, d_in, d_out, rng);
        Self::from_params(params).expect("shape built from the same dimensions")
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    fn rows(&self, input: &Tensor) -> Result<(usize, bool)> {
        let (n, d, batched) = match *input.shape() {
            [d] => (1, d, false),
            [n, d] => (n, d, true),
            _ => return Err(Error::dim("dense", "rank", 2, input.rank())),
        };
        if d != self.d_in {
            return Err(Error::dim("dense", "d_in", self.d_in, d));
        }
        Ok((n, batched))
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (n, batched) = self.rows(input)?;
        let mut out = Vec::with_capacity(n * self.d_out);
        for _ in 0..n {
            out.extend_from_slice(self.params.bias.data());
        }
        gemm(
            1.0,
            Mat::new(input.data(), n, self.d_in),
            Mat::new(self.params.weights.data(), self.d_out, self.d_in).t(),
            1.0,
            &mut out,
        );
        self.cache = Some(input.clone());
        let shape = if batched { vec![n, self.d_out] } else { vec![self.d_out] };
        Tensor::new(shape, out)
    }

    /// Accumulates `dL/dW`, `dL/db` and returns `dL/dinput`.
    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("dense backward called before forward".into()))?;
        let n = input.len() / self.d_in;
        if grad_output.len() != n * self.d_out {
            return Err(Error::dim("dense backward", "grad_output", n * self.d_out, grad_output.len()));
        }
        let g = grad_output.data();
        gemm(
            1.0,
            Mat::new(g, n, self.d_out).t(),
            Mat::new(input.data(), n, self.d_in),
            1.0,
            self.params.weights.grad_mut(),
        );
        let db = self.params.bias.grad_mut();
        for row in g.chunks_exact(self.d_out) {
            for (d, v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dx = vec![0.0; n * self.d_in];
        gemm(
            1.0,
            Mat::new(g, n, self.d_out),
            Mat::new(self.params.weights.data(), self.d_out, self.d_in),
            0.0,
            &mut dx,
        );
        Tensor::new(input.shape().to_vec(), dx)
    }
}

/// Forward-only `W·input + b` for a single vector.
pub fn dense(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    Dense::from_params(params.clone())?.forward(input)
}
