//! Shared helpers for the integration tests.

#![allow(dead_code)]

use batchmos::nn::activation::{softmax_backward_slice, softmax_slice};
use batchmos::nn::gradcheck::DEFAULT_STEP;
use batchmos::nn::loss::{bhattacharyya_coefficient, mse_backward};
use batchmos::nn::{grad_check, Conv1d, Dense, Dropout, Gate, LayerParams, MaxPool1d, Relu};
use batchmos::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_err: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values bounded away from `0` so kinks are never straddled by the finite difference.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..2.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// `d/dpoint of <r, f(point)>` against central differences.
fn check_linearized<F>(point: &[f64], r: &[f64], f: F, analytic: &[f64]) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    grad_check(|v| dot(r, &f(v)), point, analytic, DEFAULT_STEP)
}

fn tensor(shape: Vec<usize>, data: &[f64]) -> Tensor {
    Tensor::new(shape, data.to_vec()).unwrap()
}

fn dense_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..4);
    let d_in = rng.random_range(1..8);
    let d_out = rng.random_range(1..6);
    let (nx, nw) = (n * d_in, d_out * d_in);
    let point = uniform(rng, nx + nw + d_out, -1.0, 1.0);
    let r = uniform(rng, n * d_out, -1.0, 1.0);
    let eval = |v: &[f64]| -> (Dense, Tensor) {
        let params = LayerParams::new(tensor(vec![d_out, d_in], &v[nx..nx + nw]), tensor(vec![d_out], &v[nx + nw..]));
        let layer = Dense::from_params(params).unwrap();
        (layer, tensor(vec![n, d_in], &v[..nx]))
    };
    let (mut layer, x) = eval(&point);
    layer.forward(&x).unwrap();
    let dx = layer.backward(&tensor(vec![n, d_out], &r)).unwrap();
    let mut analytic = dx.data().to_vec();
    analytic.extend_from_slice(layer.params.weights.grad());
    analytic.extend_from_slice(layer.params.bias.grad());
    check_linearized(
        &point,
        &r,
        |v| {
            let (mut l, x) = eval(v);
            l.forward(&x).unwrap().into_data()
        },
        &analytic,
    )
}

fn conv_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..3);
    let cin = rng.random_range(1..4);
    let cout = rng.random_range(1..4);
    let k = rng.random_range(1..5);
    let len = k + rng.random_range(0..8);
    let lout = len - k + 1;
    let (nx, nw) = (n * cin * len, cout * cin * k);
    let point = uniform(rng, nx + nw + cout, -1.0, 1.0);
    let r = uniform(rng, n * cout * lout, -1.0, 1.0);
    let eval = |v: &[f64]| -> (Conv1d, Tensor) {
        let params = LayerParams::new(tensor(vec![cout, cin, k], &v[nx..nx + nw]), tensor(vec![cout], &v[nx + nw..]));
        (Conv1d::from_params(params).unwrap(), tensor(vec![n, cin, len], &v[..nx]))
    };
    let (mut layer, x) = eval(&point);
    layer.forward(&x).unwrap();
    let dx = layer.backward(&tensor(vec![n, cout, lout], &r)).unwrap();
    let mut analytic = dx.data().to_vec();
    analytic.extend_from_slice(layer.params.weights.grad());
    analytic.extend_from_slice(layer.params.bias.grad());
    check_linearized(
        &point,
        &r,
        |v| {
            let (mut l, x) = eval(v);
            l.forward(&x).unwrap().into_data()
        },
        &analytic,
    )
}

fn maxpool_trial(rng: &mut ChaCha8Rng) -> f64 {
    let c = rng.random_range(1..4);
    let len = rng.random_range(2..12);
    // distinct values at least 0.1 apart so the step never changes an argmax
    let mut point: Vec<f64> = (0..c * len).map(|i| i as f64 * 0.1).collect();
    point.shuffle(rng);
    let mut pool = MaxPool1d::new(2, 2).unwrap();
    let out = pool.forward(&tensor(vec![c, len], &point)).unwrap();
    let r = uniform(rng, out.len(), -1.0, 1.0);
    let dx = pool.backward(&tensor(out.shape().to_vec(), &r)).unwrap();
    check_linearized(
        &point,
        &r,
        |v| MaxPool1d::new(2, 2).unwrap().forward(&tensor(vec![c, len], v)).unwrap().into_data(),
        dx.data(),
    )
}

fn relu_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..16);
    let point = away_from_zero(rng, n);
    let r = uniform(rng, n, -1.0, 1.0);
    let mut layer = Relu::default();
    layer.forward(&Tensor::from_vec(point.clone()));
    let dx = layer.backward(&Tensor::from_vec(r.clone())).unwrap();
    check_linearized(&point, &r, |v| batchmos::nn::relu(&Tensor::from_vec(v.to_vec())).into_data(), dx.data())
}

fn gate_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..16);
    let point = uniform(rng, n, -6.0, 6.0);
    let r = uniform(rng, n, -1.0, 1.0);
    let mut layer = Gate::default();
    layer.forward(&Tensor::from_vec(point.clone()));
    let dx = layer.backward(&Tensor::from_vec(r.clone())).unwrap();
    check_linearized(&point, &r, |v| batchmos::nn::gate(&Tensor::from_vec(v.to_vec())).into_data(), dx.data())
}

fn softmax_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..12);
    let point = uniform(rng, n, -3.0, 3.0);
    let r = uniform(rng, n, -1.0, 1.0);
    let s = softmax_slice(&point);
    let dx = softmax_backward_slice(&s, &r);
    check_linearized(&point, &r, softmax_slice, &dx)
}

fn dropout_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..20);
    let point = uniform(rng, n, -2.0, 2.0);
    let r = uniform(rng, n, -1.0, 1.0);
    let rate = 0.3;
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / (1.0 - rate) })
        .collect();
    let mut layer = Dropout::new(rate).unwrap();
    layer.forward_with_mask(&Tensor::from_vec(point.clone()), mask.clone()).unwrap();
    let dx = layer.backward(&Tensor::from_vec(r.clone()));
    check_linearized(
        &point,
        &r,
        |v| {
            Dropout::new(rate)
                .unwrap()
                .forward_with_mask(&Tensor::from_vec(v.to_vec()), mask.clone())
                .unwrap()
                .into_data()
        },
        dx.data(),
    )
}

fn mse_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..10);
    let pred = uniform(rng, n, 0.0, 6.0);
    let target = uniform(rng, n, 1.0, 5.0);
    let analytic = mse_backward(&pred, &target);
    grad_check(
        |v| batchmos::nn::mse_loss(&Tensor::from_vec(v.to_vec()), &Tensor::from_vec(target.clone())).unwrap(),
        &pred,
        &analytic,
        DEFAULT_STEP,
    )
}

/// Gradient w.r.t. both distributions, treating `-ln BC(p, q)` as a function of free `p`, `q`.
fn bd_trial(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(2..10);
    let p = softmax_slice(&uniform(rng, n, -2.0, 2.0));
    let q = softmax_slice(&uniform(rng, n, -2.0, 2.0));
    let (dp, dq) = batchmos::nn::bhattacharyya_backward(&p, &q);
    let mut point = p.clone();
    point.extend_from_slice(&q);
    let mut analytic = dp;
    analytic.extend(dq);
    grad_check(
        |v| -bhattacharyya_coefficient(&v[..n], &v[n..]).ln(),
        &point,
        &analytic,
        DEFAULT_STEP,
    )
}

pub type Trial = fn(&mut ChaCha8Rng) -> f64;

pub const GRAD_CASES: [(&str, Trial); 9] = [
    ("conv1d", conv_trial),
    ("maxpool1d", maxpool_trial),
    ("dense", dense_trial),
    ("relu", relu_trial),
    ("gate", gate_trial),
    ("softmax", softmax_trial),
    ("dropout (fixed mask)", dropout_trial),
    ("mse loss", mse_trial),
    ("bhattacharyya loss", bd_trial),
];

/// Runs `trials` random instances of every layer and loss check.
pub fn gradient_suite(trials: usize, seed: u64) -> Vec<GradResult> {
    GRAD_CASES
        .iter()
        .enumerate()
        .map(|(i, (name, trial))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64) << 32);
            let max_err = (0..trials).map(|_| trial(&mut rng)).fold(0.0, f64::max);
            GradResult { name, trials, max_err }
        })
        .collect()
}
