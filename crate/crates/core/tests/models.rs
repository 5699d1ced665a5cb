use batchmos::model::conv_stack_flat_len;
use batchmos::nn::activation::softmax_slice;
use batchmos::nn::gradcheck::DEFAULT_STEP;
use batchmos::nn::loss::bhattacharyya_coefficient;
use batchmos::nn::{max_relative_error, LayerParams};
use batchmos::{Error, Model, ModelKind, ModelSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    Tensor::new(vec![n, d], (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn total_loss(model: &mut Model, a: &Tensor, b: Option<&Tensor>, t: &[f64]) -> f64 {
    let out = model.forward(a, b, false).unwrap();
    model.loss(&out, t).unwrap().total
}

/// Central differences on a sample of every layer's weights and biases, model in eval mode.
fn end_to_end_check(spec: &ModelSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::build(spec).unwrap();
    let n = 4;
    let a = random_batch(&mut rng, n, spec.dim_a);
    let b = spec.dim_b.map(|d| random_batch(&mut rng, n, d));
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();

    model.zero_grad();
    let out = model.forward(&a, b.as_ref(), false).unwrap();
    model.backward(&out, &t).unwrap();
    let grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.weights.grad().to_vec(), p.bias.grad().to_vec()))
        .collect();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (layer, (gw, gb)) in grads.iter().enumerate() {
        for (is_bias, g) in [(false, gw), (true, gb)] {
            for _ in 0..8 {
                let idx = rng.random_range(0..g.len());
                let eval = |delta: f64, model: &mut Model| {
                    let p = &mut model.params_mut()[layer];
                    let v = if is_bias { &mut p.bias.data_mut()[idx] } else { &mut p.weights.data_mut()[idx] };
                    *v += delta;
                    let l = total_loss(model, &a, b.as_ref(), &t);
                    let p = &mut model.params_mut()[layer];
                    let v = if is_bias { &mut p.bias.data_mut()[idx] } else { &mut p.weights.data_mut()[idx] };
                    *v -= delta;
                    l
                };
                let plus = eval(DEFAULT_STEP, &mut model);
                let minus = eval(-DEFAULT_STEP, &mut model);
                numeric.push((plus - minus) / (2.0 * DEFAULT_STEP));
                analytic.push(g[idx]);
            }
        }
    }
    max_relative_error(&analytic, &numeric)
}

#[test]
fn end_to_end_gradients_for_every_kind() {
    let specs = [
        ModelSpec::fcn(9).with_hidden(6),
        ModelSpec::cnn(14).with_hidden(6),
        ModelSpec::concat(13, 11).with_hidden(5),
        ModelSpec::batch(13, 11).with_hidden(5).with_alpha(0.3),
        ModelSpec::batch(12, 16).with_hidden(7).with_alpha(1.0),
    ];
    for (i, spec) in specs.iter().enumerate() {
        for seed in 0..3 {
            let spec = spec.clone().with_seed(seed + 10 * i as u64);
            let err = end_to_end_check(&spec, seed);
            assert!(err < 1e-4, "{:?} seed {seed}: {err:e}", spec.kind);
        }
    }
}

#[test]
fn cnn_output_shapes_for_every_embedding_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for dim in [192, 512, 768, 1024, 1280] {
        let expected_len = ((dim - 2) / 2 - 2) / 2;
        assert_eq!(conv_stack_flat_len(dim), Some(128 * expected_len));
        let mut model = Model::build(&ModelSpec::cnn(dim)).unwrap();
        let preds = model.predict(&random_batch(&mut rng, 2, dim), None).unwrap();
        assert_eq!(preds.len(), 2);
        assert!(preds.iter().all(|p| p.is_finite()));
    }
    assert_eq!(conv_stack_flat_len(512), Some(16128));
}

fn conv_stack_params() -> usize {
    let conv1 = 64 * 3 + 64;
    let conv2 = 128 * 64 * 3 + 128;
    conv1 + conv2
}

fn head_params(d_in: usize) -> usize {
    d_in * 128 + 128 + 128 + 1
}

#[test]
fn parameter_counts() {
    let flat = |d: usize| 128 * (((d - 2) / 2 - 2) / 2);
    assert_eq!(Model::build(&ModelSpec::fcn(768)).unwrap().num_params(), head_params(768));
    assert_eq!(head_params(768), 98_561);
    assert_eq!(
        Model::build(&ModelSpec::cnn(512)).unwrap().num_params(),
        conv_stack_params() + head_params(flat(512))
    );
    let branch = |d: usize| conv_stack_params() + flat(d) * 128 + 128;
    let fused = branch(512) + branch(192) + head_params(256);
    assert_eq!(fused, 2_901_249);
    assert_eq!(Model::build(&ModelSpec::batch(512, 192)).unwrap().num_params(), fused);
    assert_eq!(Model::build(&ModelSpec::concat(512, 192)).unwrap().num_params(), fused);
}

#[test]
fn glorot_bounds_and_zero_bias() {
    let model = Model::build(&ModelSpec::batch(32, 20).with_seed(3)).unwrap();
    for p in model.params() {
        let s = p.weights.shape();
        let (fan_in, fan_out) = match s.len() {
            2 => (s[1], s[0]),
            3 => (s[1] * s[2], s[0] * s[2]),
            _ => unreachable!(),
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        assert!(p.weights.data().iter().all(|w| w.abs() <= limit));
        assert!(p.bias.data().iter().all(|&b| b == 0.0));
    }
}

#[test]
fn small_dims_are_rejected_for_conv_kinds() {
    assert!(matches!(Model::build(&ModelSpec::cnn(9)), Err(Error::Config(_))));
    assert!(matches!(Model::build(&ModelSpec::batch(512, 8)), Err(Error::Config(_))));
    assert!(Model::build(&ModelSpec::cnn(10)).is_ok());
    assert!(Model::build(&ModelSpec::fcn(3)).is_ok());
}

#[test]
fn zero_network_predicts_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for spec in [ModelSpec::fcn(12), ModelSpec::cnn(20), ModelSpec::concat(16, 12), ModelSpec::batch(16, 12)] {
        let mut model = Model::build(&spec).unwrap();
        for p in model.params_mut() {
            p.weights.data_mut().fill(0.0);
            p.bias.data_mut().fill(0.0);
        }
        let b = spec.dim_b.map(|d| random_batch(&mut rng, 4, d));
        let preds = model.predict(&random_batch(&mut rng, 4, spec.dim_a), b.as_ref()).unwrap();
        assert_eq!(preds, vec![0.0; 4]);
    }
}

#[test]
fn ablated_batch_fusion_equals_concat_fusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut concat = Model::build(&ModelSpec::concat(40, 24).with_seed(1)).unwrap();
    let mut batch = Model::build(&ModelSpec::batch(40, 24).with_seed(2).with_alpha(0.0)).unwrap();
    batch.copy_params_from(&concat).unwrap();
    batch.set_gate_enabled(false);
    let a = random_batch(&mut rng, 6, 40);
    let b = random_batch(&mut rng, 6, 24);
    let pc = concat.predict(&a, Some(&b)).unwrap();
    let pb = batch.predict(&a, Some(&b)).unwrap();
    for (x, y) in pc.iter().zip(&pb) {
        assert!((x - y).abs() < 1e-9);
    }
    let t = vec![3.0; 6];
    let out = batch.forward(&a, Some(&b), false).unwrap();
    assert_eq!(batch.loss(&out, &t).unwrap().total, batch.loss(&out, &t).unwrap().mse);
}

#[test]
fn identical_branches_have_zero_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = Model::build(&ModelSpec::batch(30, 30)).unwrap();
    let branch_a: Vec<LayerParams> = model.params()[..3].iter().map(|p| (*p).clone()).collect();
    for (dst, src) in model.params_mut()[3..6].iter_mut().zip(&branch_a) {
        dst.copy_values_from(src);
    }
    let x = random_batch(&mut rng, 5, 30);
    let out = model.forward(&x, Some(&x), false).unwrap();
    // equal up to summation rounding over 128 bins
    assert!(out.bd_value.unwrap() < 1e-12, "{:?}", out.bd_value);
}

#[test]
fn eval_mode_is_deterministic_and_training_mode_is_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut model = Model::build(&ModelSpec::fcn(20)).unwrap();
    let x = random_batch(&mut rng, 8, 20);
    let p1 = model.predict(&x, None).unwrap();
    let p2 = model.predict(&x, None).unwrap();
    assert_eq!(p1, p2);
    let t1 = model.forward(&x, None, true).unwrap().predictions;
    let t2 = model.forward(&x, None, true).unwrap().predictions;
    assert_ne!(t1, t2);
}

#[test]
fn dimension_errors_name_the_axis() {
    let mut model = Model::build(&ModelSpec::batch(20, 12)).unwrap();
    let a = Tensor::zeros(vec![2, 20]);
    match model.forward(&a, Some(&Tensor::zeros(vec![2, 13])), false) {
        Err(Error::Dimension { expected: 12, actual: 13, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(model.forward(&a, None, false).is_err());
    assert!(matches!(model.forward(&Tensor::zeros(vec![2, 19]), Some(&Tensor::zeros(vec![2, 12])), false), Err(Error::Dimension { .. })));
}

// Naive loop implementations of the forward passes, independent of the gemm-based layers.

fn naive_conv(x: &[Vec<f64>], p: &LayerParams) -> Vec<Vec<f64>> {
    let s = p.weights.shape();
    let (cout, cin, k) = (s[0], s[1], s[2]);
    let w = p.weights.data();
    let lout = x[0].len() - k + 1;
    (0..cout)
        .map(|o| {
            (0..lout)
                .map(|i| {
                    let mut acc = p.bias.data()[o];
                    for c in 0..cin {
                        for kk in 0..k {
                            acc += w[(o * cin + c) * k + kk] * x[c][i + kk];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn naive_pool(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| (0..row.len() / 2).map(|i| row[2 * i].max(row[2 * i + 1])).collect())
        .collect()
}

fn naive_dense(x: &[f64], p: &LayerParams) -> Vec<f64> {
    let d_in = x.len();
    p.bias
        .data()
        .iter()
        .enumerate()
        .map(|(o, b)| b + (0..d_in).map(|i| p.weights.data()[o * d_in + i] * x[i]).sum::<f64>())
        .collect()
}

fn naive_stack(x: &[f64], conv1: &LayerParams, conv2: &LayerParams) -> Vec<f64> {
    let h = naive_pool(&naive_conv(&[x.to_vec()], conv1));
    naive_pool(&naive_conv(&h, conv2)).concat()
}

fn naive_head(x: &[f64], hidden: &LayerParams, out: &LayerParams) -> f64 {
    let h: Vec<f64> = naive_dense(x, hidden).into_iter().map(|v| v.max(0.0)).collect();
    naive_dense(&h, out)[0]
}

#[test]
fn cnn_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = Model::build(&ModelSpec::cnn(37).with_seed(3)).unwrap();
    let x = random_batch(&mut rng, 3, 37);
    let preds = model.predict(&x, None).unwrap();
    let p = model.params();
    for (i, row) in x.data().chunks(37).enumerate() {
        let feat = naive_stack(row, p[0], p[1]);
        let want = naive_head(&feat, p[2], p[3]);
        assert!((preds[i] - want).abs() < 1e-10, "{} vs {want}", preds[i]);
    }
}

#[test]
fn batch_fusion_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = Model::build(&ModelSpec::batch(31, 22).with_seed(4)).unwrap();
    let a = random_batch(&mut rng, 4, 31);
    let b = random_batch(&mut rng, 4, 22);
    let out = model.forward(&a, Some(&b), false).unwrap();
    let p = model.params();
    let gate = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x / (1.0 + (-x).exp())).collect() };
    let mut bd_sum = 0.0;
    for i in 0..4 {
        let ga = gate(naive_dense(&naive_stack(&a.data()[i * 31..(i + 1) * 31], p[0], p[1]), p[2]));
        let gb = gate(naive_dense(&naive_stack(&b.data()[i * 22..(i + 1) * 22], p[3], p[4]), p[5]));
        let bc = bhattacharyya_coefficient(&softmax_slice(&ga), &softmax_slice(&gb));
        bd_sum += -bc.ln();
        let want = naive_head(&[ga, gb].concat(), p[6], p[7]);
        assert!((out.predictions[i] - want).abs() < 1e-10);
    }
    assert!((out.bd_value.unwrap() - bd_sum / 4.0).abs() < 1e-12);
    assert_eq!(model.kind(), ModelKind::BatchFusion);
}
