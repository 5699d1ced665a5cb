//! Valid (unpadded), stride-1 1D convolution and 1D max pooling.

use rand::Rng;

use super::linalg::{gemm, Mat};
use super::params::LayerParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Views a `[C, L]` or `[N, C, L]` tensor as `(batch, channels, length, batched)`.
fn batch_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize, bool)> {
    match *t.shape() {
        [c, l] => Ok((1, c, l, false)),
        [n, c, l] => Ok((n, c, l, true)),
        _ => Err(Error::dim(op, "rank", 3, t.rank())),
    }
}

fn out_shape(n: usize, c: usize, l: usize, batched: bool) -> Vec<usize> {
    if batched {
        vec![n, c, l]
    } else {
        vec![c, l]
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub params: LayerParams,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    cache: Option<ConvCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    input_shape: Vec<usize>,
    batch: usize,
    length: usize,
    cols: Vec<f64>,
}

impl Conv1d {
    /// Wraps parameters whose weights have shape `[out_channels, in_channels, kernel]`.
    pub fn from_params(params: LayerParams) -> Result<Self> {
        let [out_channels, in_channels, kernel] = *params.weights.shape() else {
            return Err(Error::dim("conv1d", "weight rank", 3, params.weights.rank()));
        };
        if params.bias.len() != out_channels {
            return Err(Error::dim("conv1d", "bias", out_channels, params.bias.len()));
        }
        Ok(Self {
            params,
            in_channels,
            out_channels,
            kernel,
            cache: None,
        })
    }

    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let params = LayerParams::glorot(
            vec![out_channels, in_channels, kernel],
            out_channels,
            in_channels * kernel,
            out_channels * kernel,
            rng,
        );
        Self::from_params(params).expect("shape built from the same dimensions")
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn output_len(&self, length: usize) -> Option<usize> {
        length.checked_sub(self.kernel).map(|d| d + 1)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (n, c, l, batched) = batch_dims("conv1d", input)?;
        if c != self.in_channels {
            return Err(Error::dim("conv1d", "channels_in", self.in_channels, c));
        }
        if l < self.kernel {
            return Err(Error::dim("conv1d", "length", self.kernel, l));
        }
        let k = self.kernel;
        let lout = l - k + 1;
        let rows = c * k;
        let x = input.data();

        // im2col: cols[s][(j*k + kk), i] = x[s, j, i + kk]
        let mut cols = vec![0.0; n * rows * lout];
        for s in 0..n {
            let xs = &x[s * c * l..(s + 1) * c * l];
            let cs = &mut cols[s * rows * lout..(s + 1) * rows * lout];
            for j in 0..c {
                for kk in 0..k {
                    let dst = &mut cs[(j * k + kk) * lout..(j * k + kk + 1) * lout];
                    dst.copy_from_slice(&xs[j * l + kk..j * l + kk + lout]);
                }
            }
        }

        let cout = self.out_channels;
        let mut out = vec![0.0; n * cout * lout];
        let w = self.params.weights.data();
        let b = self.params.bias.data();
        for s in 0..n {
            let os = &mut out[s * cout * lout..(s + 1) * cout * lout];
            for (row, &bias) in os.chunks_exact_mut(lout).zip(b) {
                row.fill(bias);
            }
            gemm(
                1.0,
                Mat::new(w, cout, rows),
                Mat::new(&cols[s * rows * lout..(s + 1) * rows * lout], rows, lout),
                1.0,
                os,
            );
        }

        self.cache = Some(ConvCache {
            input_shape: input.shape().to_vec(),
            batch: n,
            length: l,
            cols,
        });
        Tensor::new(out_shape(n, cout, lout, batched), out)
    }

    /// Accumulates weight/bias gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("conv1d backward called before forward".into()))?;
        let (n, l, k) = (cache.batch, cache.length, self.kernel);
        let (c, cout) = (self.in_channels, self.out_channels);
        let lout = l - k + 1;
        let rows = c * k;
        if grad_output.len() != n * cout * lout {
            return Err(Error::dim("conv1d backward", "grad_output", n * cout * lout, grad_output.len()));
        }
        let g = grad_output.data();

        let mut dcols = vec![0.0; rows * lout];
        let mut dx = vec![0.0; n * c * l];
        for s in 0..n {
            let gs = &g[s * cout * lout..(s + 1) * cout * lout];
            let cs = &cache.cols[s * rows * lout..(s + 1) * rows * lout];
            gemm(
                1.0,
                Mat::new(gs, cout, lout),
                Mat::new(cs, rows, lout).t(),
                1.0,
                self.params.weights.grad_mut(),
            );
            for (db, row) in self.params.bias.grad_mut().iter_mut().zip(gs.chunks_exact(lout)) {
                *db += row.iter().sum::<f64>();
            }
            gemm(
                1.0,
                Mat::new(self.params.weights.data(), cout, rows).t(),
                Mat::new(gs, cout, lout),
                0.0,
                &mut dcols,
            );
            let dxs = &mut dx[s * c * l..(s + 1) * c * l];
            for j in 0..c {
                for kk in 0..k {
                    let src = &dcols[(j * k + kk) * lout..(j * k + kk + 1) * lout];
                    for (d, v) in dxs[j * l + kk..j * l + kk + lout].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
        }
        Tensor::new(cache.input_shape.clone(), dx)
    }
}

/// Forward-only valid convolution of a `[channels_in, length]` input.
pub fn conv1d(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    Conv1d::from_params(params.clone())?.forward(input)
}

#[derive(Debug, Clone)]
pub struct MaxPool1d {
    window: usize,
    stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::Config("maxpool window and stride must be positive".into()));
        }
        Ok(Self {
            window,
            stride,
            cache: None,
        })
    }

    pub fn output_len(&self, length: usize) -> Option<usize> {
        length.checked_sub(self.window).map(|d| d / self.stride + 1)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (n, c, l, batched) = batch_dims("maxpool1d", input)?;
        let lout = self
            .output_len(l)
            .ok_or(Error::dim("maxpool1d", "length", self.window, l))?;
        let x = input.data();
        let mut out = Vec::with_capacity(n * c * lout);
        let mut argmax = Vec::with_capacity(n * c * lout);
        for row in 0..n * c {
            let base = row * l;
            for o in 0..lout {
                let start = base + o * self.stride;
                let mut best = start;
                for idx in start + 1..start + self.window {
                    // strict comparison keeps the first occurrence on ties
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
        self.cache = Some((input.shape().to_vec(), argmax));
        Tensor::new(out_shape(n, c, lout, batched), out)
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (shape, argmax) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("maxpool1d backward called before forward".into()))?;
        if grad_output.len() != argmax.len() {
            return Err(Error::dim("maxpool1d backward", "grad_output", argmax.len(), grad_output.len()));
        }
        let mut dx = Tensor::zeros(shape.clone());
        let d = dx.data_mut();
        for (&idx, &g) in argmax.iter().zip(grad_output.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

/// Forward-only max pooling of a `[channels, length]` input.
pub fn maxpool1d(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    MaxPool1d::new(window, stride)?.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(weights: Vec<f64>, shape: [usize; 3], bias: Vec<f64>) -> LayerParams {
        LayerParams::new(
            Tensor::new(shape.to_vec(), weights).unwrap(),
            Tensor::from_vec(bias),
        )
    }

    #[test]
    fn identity_kernel() {
        let p = params(vec![1.0], [1, 1, 1], vec![0.0]);
        let x = Tensor::new(vec![1, 3], vec![5.0, -2.0, 3.0]).unwrap();
        assert_eq!(conv1d(&x, &p).unwrap().data(), &[5.0, -2.0, 3.0]);
    }

    #[test]
    fn box_kernel_sums_windows() {
        let p = params(vec![1.0, 1.0, 1.0], [1, 1, 3], vec![0.0]);
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = conv1d(&x, &p).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[6.0, 9.0]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let p = LayerParams::zeros(vec![4, 2, 3], 4);
        let x = Tensor::new(vec![2, 6], (0..12).map(|v| v as f64 - 3.5).collect()).unwrap();
        let y = conv1d(&x, &p).unwrap();
        assert_eq!(y.shape(), &[4, 4]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors_name_the_axis() {
        let p = LayerParams::zeros(vec![1, 2, 3], 1);
        let x = Tensor::new(vec![1, 5], vec![0.0; 5]).unwrap();
        match conv1d(&x, &p) {
            Err(Error::Dimension { axis, expected, actual, .. }) => {
                assert_eq!((axis, expected, actual), ("channels_in", 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        let short = Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(conv1d(&short, &p), Err(Error::Dimension { axis: "length", .. })));
    }

    #[test]
    fn batched_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut conv = Conv1d::new(3, 5, 3, &mut rng);
        for b in conv.params.bias.data_mut() {
            *b = rng.random_range(-1.0..1.0);
        }
        let x = Tensor::new(vec![2, 3, 9], (0..54).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y = conv.forward(&x).unwrap();
        let w = conv.params.weights.data();
        let bias = conv.params.bias.data();
        for s in 0..2 {
            for co in 0..5 {
                for i in 0..7 {
                    let mut acc = bias[co];
                    for j in 0..3 {
                        for kk in 0..3 {
                            acc += w[(co * 3 + j) * 3 + kk] * x.data()[(s * 3 + j) * 9 + i + kk];
                        }
                    }
                    let got = y.data()[(s * 5 + co) * 7 + i];
                    assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn pool_examples() {
        let x = Tensor::new(vec![1, 4], vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(maxpool1d(&x, 2, 2).unwrap().data(), &[3.0, 5.0]);
        let c = Tensor::new(vec![1, 4], vec![0.7; 4]).unwrap();
        assert_eq!(maxpool1d(&c, 2, 2).unwrap().data(), &[0.7, 0.7]);
        let one = Tensor::new(vec![1, 1], vec![7.0]).unwrap();
        assert_eq!(maxpool1d(&one, 1, 1).unwrap().data(), &[7.0]);
        // odd length drops the trailing element
        let odd = Tensor::new(vec![1, 5], vec![1.0, 2.0, 3.0, 4.0, 9.0]).unwrap();
        assert_eq!(maxpool1d(&odd, 2, 2).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn pool_window_longer_than_input() {
        let x = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(matches!(maxpool1d(&x, 2, 2), Err(Error::Dimension { .. })));
    }

    #[test]
    fn pool_gradient_goes_to_first_max() {
        let mut pool = MaxPool1d::new(2, 2).unwrap();
        let x = Tensor::new(vec![1, 4], vec![4.0, 4.0, 1.0, 2.0]).unwrap();
        pool.forward(&x).unwrap();
        let dx = pool.backward(&Tensor::new(vec![1, 2], vec![1.5, -2.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[1.5, 0.0, 0.0, -2.0]);
    }
}
