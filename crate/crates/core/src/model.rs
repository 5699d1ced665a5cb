//! Regression heads over pooled PTM embeddings.
//!
//! Four architectures share the same building blocks:
//!
//! - `Fcn`: `dense(hidden) → ReLU → dropout → dense(1)` directly on the embedding.
//! - `Cnn`: the embedding is read as a 1-channel sequence, passed through
//!   `conv(64,k3) → pool(2,2) → conv(128,k3) → pool(2,2)`, flattened, then the FCN head.
//! - `ConcatFusion`: one conv stack per embedding, each projected to `hidden`,
//!   concatenated, then the FCN head.
//! - `BatchFusion`: as `ConcatFusion`, but each projection is gated with
//!   `sigmoid(x) * x` and the softmax-normalised gated vectors of the two
//!   branches are pulled together by a Bhattacharyya-distance penalty weighted by `alpha`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::{softmax_backward_slice, softmax_slice, Dropout, Gate, Relu};
use crate::nn::conv::{Conv1d, MaxPool1d};
use crate::nn::dense::Dense;
use crate::nn::loss::{bd_unchecked, bhattacharyya_backward, mse_backward, mse_slices, LossBreakdown};
use crate::nn::params::{adam_step, AdamConfig, LayerParams};
use crate::tensor::Tensor;

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_DROPOUT: f64 = 0.3;

pub const CONV1_FILTERS: usize = 64;
pub const CONV2_FILTERS: usize = 128;
pub const KERNEL: usize = 3;
pub const POOL_WINDOW: usize = 2;
pub const POOL_STRIDE: usize = 2;

/// Smallest embedding length that survives two conv+pool stages.
pub const MIN_CONV_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fcn,
    Cnn,
    #[serde(rename = "concat")]
    ConcatFusion,
    #[serde(rename = "batch")]
    BatchFusion,
}

impl ModelKind {
    pub fn is_fusion(self) -> bool {
        matches!(self, ModelKind::ConcatFusion | ModelKind::BatchFusion)
    }

    pub fn token(self) -> &'static str {
        match self {
            ModelKind::Fcn => "fcn",
            ModelKind::Cnn => "cnn",
            ModelKind::ConcatFusion => "concat",
            ModelKind::BatchFusion => "batch",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::Fcn => 0,
            ModelKind::Cnn => 1,
            ModelKind::ConcatFusion => 2,
            ModelKind::BatchFusion => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ModelKind::Fcn,
            1 => ModelKind::Cnn,
            2 => ModelKind::ConcatFusion,
            3 => ModelKind::BatchFusion,
            _ => return None,
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcn" => Ok(ModelKind::Fcn),
            "cnn" => Ok(ModelKind::Cnn),
            "concat" => Ok(ModelKind::ConcatFusion),
            "batch" => Ok(ModelKind::BatchFusion),
            other => Err(Error::Config(format!(
                "unknown model kind `{other}` (expected fcn, cnn, concat or batch)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.token())
    }
}

/// Declarative architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dim_a: usize,
    pub dim_b: Option<usize>,
    pub hidden: usize,
    pub alpha: Option<f64>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl ModelSpec {
    fn base(kind: ModelKind, dim_a: usize) -> Self {
        Self {
            kind,
            dim_a,
            dim_b: None,
            hidden: DEFAULT_HIDDEN,
            alpha: None,
            dropout_rate: DEFAULT_DROPOUT,
            seed: 0,
        }
    }

    pub fn fcn(dim: usize) -> Self {
        Self::base(ModelKind::Fcn, dim)
    }

    pub fn cnn(dim: usize) -> Self {
        Self::base(ModelKind::Cnn, dim)
    }

    pub fn concat(dim_a: usize, dim_b: usize) -> Self {
        Self {
            dim_b: Some(dim_b),
            ..Self::base(ModelKind::ConcatFusion, dim_a)
        }
    }

    pub fn batch(dim_a: usize, dim_b: usize) -> Self {
        Self {
            dim_b: Some(dim_b),
            alpha: Some(DEFAULT_ALPHA),
            ..Self::base(ModelKind::BatchFusion, dim_a)
        }
    }

    /// Spec of `kind` over the given dims, with defaults for everything else.
    pub fn of_kind(kind: ModelKind, dim_a: usize, dim_b: Option<usize>) -> Result<Self> {
        let spec = match (kind, dim_b) {
            (ModelKind::Fcn, None) => Self::fcn(dim_a),
            (ModelKind::Cnn, None) => Self::cnn(dim_a),
            (ModelKind::ConcatFusion, Some(b)) => Self::concat(dim_a, b),
            (ModelKind::BatchFusion, Some(b)) => Self::batch(dim_a, b),
            (k, None) => return Err(Error::Config(format!("{k} needs a second embedding"))),
            (k, Some(_)) => return Err(Error::Config(format!("{k} takes a single embedding"))),
        };
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    /// Sets alpha; ignored unless the kind is `BatchFusion`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        if self.kind == ModelKind::BatchFusion {
            self.alpha = Some(alpha);
        }
        self
    }

    /// Weight of the alignment term (0 for kinds without one).
    pub fn alpha_or_zero(&self) -> f64 {
        self.alpha.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_fusion() != self.dim_b.is_some() {
            return Err(Error::Config(format!(
                "dim_b must be given exactly for fusion kinds ({} has dim_b = {:?})",
                self.kind, self.dim_b
            )));
        }
        if (self.kind == ModelKind::BatchFusion) != self.alpha.is_some() {
            return Err(Error::Config(format!(
                "alpha must be given exactly for the batch kind ({} has alpha = {:?})",
                self.kind, self.alpha
            )));
        }
        if let Some(alpha) = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
            }
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        let min = if self.kind == ModelKind::Fcn { 1 } else { MIN_CONV_DIM };
        for (name, dim) in [("dim_a", Some(self.dim_a)), ("dim_b", self.dim_b)] {
            if let Some(d) = dim {
                if d < min {
                    return Err(Error::Config(format!(
                        "{name} = {d} is too small for {} (minimum {min})",
                        self.kind
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Length of the flattened conv-stack output for an embedding of length `dim`.
pub fn conv_stack_flat_len(dim: usize) -> Option<usize> {
    let pool = |l: usize| l.checked_sub(POOL_WINDOW).map(|d| d / POOL_STRIDE + 1);
    let conv = |l: usize| l.checked_sub(KERNEL).map(|d| d + 1);
    let len = pool(conv(pool(conv(dim)?)?)?)?;
    Some(len * CONV2_FILTERS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub predictions: Vec<f64>,
    /// Batch mean of the per-item Bhattacharyya distance (`BatchFusion` only).
    pub bd_value: Option<f64>,
}

#[derive(Debug, Clone)]
struct ConvStack {
    conv1: Conv1d,
    pool1: MaxPool1d,
    conv2: Conv1d,
    pool2: MaxPool1d,
    dim: usize,
    pooled_shape: Vec<usize>,
}

impl ConvStack {
    fn new(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            conv1: Conv1d::new(1, CONV1_FILTERS, KERNEL, rng),
            pool1: MaxPool1d::new(POOL_WINDOW, POOL_STRIDE).expect("positive pool geometry"),
            conv2: Conv1d::new(CONV1_FILTERS, CONV2_FILTERS, KERNEL, rng),
            pool2: MaxPool1d::new(POOL_WINDOW, POOL_STRIDE).expect("positive pool geometry"),
            dim,
            pooled_shape: Vec::new(),
        }
    }

    /// `[n, dim]` → flattened `[n, 128 * L]`.
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let n = x.shape()[0];
        let seq = x.clone().reshape(vec![n, 1, self.dim])?;
        let h = self.conv1.forward(&seq)?;
        let h = self.pool1.forward(&h)?;
        let h = self.conv2.forward(&h)?;
        let h = self.pool2.forward(&h)?;
        self.pooled_shape = h.shape().to_vec();
        let flat = h.len() / n;
        h.reshape(vec![n, flat])
    }

    fn backward(&mut self, grad: Tensor) -> Result<()> {
        let g = grad.reshape(self.pooled_shape.clone())?;
        let g = self.pool2.backward(&g)?;
        let g = self.conv2.backward(&g)?;
        let g = self.pool1.backward(&g)?;
        // the input gradient of the first conv is not needed
        self.conv1.backward(&g)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Head {
    hidden: Dense,
    relu: Relu,
    dropout: Dropout,
    out: Dense,
}

impl Head {
    fn new(d_in: usize, hidden: usize, dropout: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            hidden: Dense::new(d_in, hidden, rng),
            relu: Relu::default(),
            dropout: Dropout::new(dropout)?,
            out: Dense::new(hidden, 1, rng),
        })
    }

    fn forward(&mut self, x: &Tensor, training: bool, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let h = self.hidden.forward(x)?;
        let h = self.relu.forward(&h);
        let h = self.dropout.forward(&h, training, rng);
        self.out.forward(&h)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let g = self.out.backward(grad)?;
        let g = self.dropout.backward(&g);
        let g = self.relu.backward(&g)?;
        self.hidden.backward(&g)
    }
}

#[derive(Debug, Clone)]
struct FusionBranch {
    stack: ConvStack,
    proj: Dense,
    gate: Gate,
}

impl FusionBranch {
    fn new(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let stack = ConvStack::new(dim, rng);
        let flat = conv_stack_flat_len(dim).expect("dim validated against MIN_CONV_DIM");
        Self {
            stack,
            proj: Dense::new(flat, hidden, rng),
            gate: Gate::default(),
        }
    }

    fn forward(&mut self, x: &Tensor, gated: bool) -> Result<Tensor> {
        let flat = self.stack.forward(x)?;
        let z = self.proj.forward(&flat)?;
        Ok(if gated { self.gate.forward(&z) } else { z })
    }

    fn backward(&mut self, grad: Tensor, gated: bool) -> Result<()> {
        let g = if gated { self.gate.backward(&grad)? } else { grad };
        let g = self.proj.backward(&g)?;
        self.stack.backward(g)
    }
}

#[derive(Debug, Clone)]
enum Body {
    Fcn,
    Cnn(Box<ConvStack>),
    Fusion {
        a: Box<FusionBranch>,
        b: Box<FusionBranch>,
    },
}

/// Cached normalised distributions of the last `BatchFusion` forward.
#[derive(Debug, Clone, Default)]
struct AlignmentCache {
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    body: Body,
    head: Head,
    gate_enabled: bool,
    rng: ChaCha8Rng,
    alignment: AlignmentCache,
    batch_len: usize,
}

/// Stream offset so dropout masks are not drawn from the same stream as the init weights.
const DROPOUT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let hidden = spec.hidden;
        let (body, head_in) = match spec.kind {
            ModelKind::Fcn => (Body::Fcn, spec.dim_a),
            ModelKind::Cnn => {
                let flat = conv_stack_flat_len(spec.dim_a).expect("validated");
                (Body::Cnn(Box::new(ConvStack::new(spec.dim_a, &mut rng))), flat)
            }
            ModelKind::ConcatFusion | ModelKind::BatchFusion => {
                let dim_b = spec.dim_b.expect("validated");
                let a = FusionBranch::new(spec.dim_a, hidden, &mut rng);
                let b = FusionBranch::new(dim_b, hidden, &mut rng);
                (
                    Body::Fusion {
                        a: Box::new(a),
                        b: Box::new(b),
                    },
                    2 * hidden,
                )
            }
        };
        let head = Head::new(head_in, hidden, spec.dropout_rate, &mut rng)?;
        Ok(Self {
            spec: spec.clone(),
            body,
            head,
            gate_enabled: spec.kind == ModelKind::BatchFusion,
            rng: ChaCha8Rng::seed_from_u64(spec.seed ^ DROPOUT_STREAM),
            alignment: AlignmentCache::default(),
            batch_len: 0,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha_or_zero()
    }

    /// Replaces the gate of a fusion model by the identity (ablation hook).
    pub fn set_gate_enabled(&mut self, enabled: bool) {
        if self.spec.kind.is_fusion() {
            self.gate_enabled = enabled;
        }
    }

    /// Reseeds the dropout stream.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ DROPOUT_STREAM);
    }

    /// All trainable layers in declaration order.
    pub fn params(&self) -> Vec<&LayerParams> {
        let mut out = Vec::new();
        match &self.body {
            Body::Fcn => {}
            Body::Cnn(s) => out.extend([&s.conv1.params, &s.conv2.params]),
            Body::Fusion { a, b } => {
                for br in [a, b] {
                    out.extend([&br.stack.conv1.params, &br.stack.conv2.params, &br.proj.params]);
                }
            }
        }
        out.extend([&self.head.hidden.params, &self.head.out.params]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out = Vec::new();
        match &mut self.body {
            Body::Fcn => {}
            Body::Cnn(s) => out.extend([&mut s.conv1.params, &mut s.conv2.params]),
            Body::Fusion { a, b } => {
                for br in [a, b] {
                    out.extend([
                        &mut br.stack.conv1.params,
                        &mut br.stack.conv2.params,
                        &mut br.proj.params,
                    ]);
                }
            }
        }
        out.extend([&mut self.head.hidden.params, &mut self.head.out.params]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.num_params()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        for p in self.params_mut() {
            adam_step(p, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        }
    }

    /// Copies weights from a model with the same layer shapes (e.g. a snapshot).
    pub fn copy_params_from(&mut self, other: &Model) -> Result<()> {
        let src = other.params();
        let mut dst = self.params_mut();
        if src.len() != dst.len() {
            return Err(Error::dim("copy_params", "layers", dst.len(), src.len()));
        }
        for (d, s) in dst.iter_mut().zip(&src) {
            if d.weights.shape() != s.weights.shape() || d.bias.shape() != s.bias.shape() {
                return Err(Error::dim("copy_params", "layer shape", d.num_params(), s.num_params()));
            }
            d.copy_values_from(s);
        }
        Ok(())
    }

    fn check_batch(&self, name: &'static str, t: &Tensor, dim: usize) -> Result<usize> {
        match *t.shape() {
            [n, d] if d == dim && n >= 1 => Ok(n),
            [_, d] => Err(Error::dim(name, "dim", dim, d)),
            _ => Err(Error::dim(name, "rank", 2, t.rank())),
        }
    }

    pub fn forward(&mut self, batch_a: &Tensor, batch_b: Option<&Tensor>, training: bool) -> Result<ForwardOutput> {
        let n = self.check_batch("forward(batch_a)", batch_a, self.spec.dim_a)?;
        let gated = self.gate_enabled;
        let mut bd_value = None;
        let features = match &mut self.body {
            Body::Fcn | Body::Cnn(_) if batch_b.is_some() => {
                return Err(Error::Config(format!("{} takes a single embedding", self.spec.kind)));
            }
            Body::Fcn => batch_a.clone(),
            Body::Cnn(stack) => stack.forward(batch_a)?,
            Body::Fusion { a, b } => {
                let batch_b = batch_b
                    .ok_or_else(|| Error::Config(format!("{} needs a second embedding", self.spec.kind)))?;
                let dim_b = self.spec.dim_b.expect("validated");
                let nb = match *batch_b.shape() {
                    [nb, d] if d == dim_b => nb,
                    [_, d] => return Err(Error::dim("forward(batch_b)", "dim", dim_b, d)),
                    _ => return Err(Error::dim("forward(batch_b)", "rank", 2, batch_b.rank())),
                };
                if nb != n {
                    return Err(Error::dim("forward(batch_b)", "n", n, nb));
                }
                let ga = a.forward(batch_a, gated)?;
                let gb = b.forward(batch_b, gated)?;
                let h = self.spec.hidden;
                if self.spec.kind == ModelKind::BatchFusion {
                    let (p, q): (Vec<_>, Vec<_>) = ga
                        .data()
                        .chunks_exact(h)
                        .zip(gb.data().chunks_exact(h))
                        .map(|(x, y)| (softmax_slice(x), softmax_slice(y)))
                        .unzip();
                    let bd_sum: f64 = p.iter().zip(&q).map(|(p, q)| bd_unchecked(p, q)).sum();
                    bd_value = Some(bd_sum / n as f64);
                    self.alignment = AlignmentCache { p, q };
                }
                let mut cat = Vec::with_capacity(n * 2 * h);
                for (x, y) in ga.data().chunks_exact(h).zip(gb.data().chunks_exact(h)) {
                    cat.extend_from_slice(x);
                    cat.extend_from_slice(y);
                }
                Tensor::new(vec![n, 2 * h], cat)?
            }
        };
        let out = self.head.forward(&features, training, &mut self.rng)?;
        self.batch_len = n;
        Ok(ForwardOutput {
            predictions: out.into_data(),
            bd_value,
        })
    }

    pub fn loss(&self, output: &ForwardOutput, targets: &[f64]) -> Result<LossBreakdown> {
        let mse = mse_slices(&output.predictions, targets)?;
        Ok(match (self.spec.kind, output.bd_value) {
            (ModelKind::BatchFusion, Some(bd)) => LossBreakdown::new(mse, bd, self.alpha()),
            _ => LossBreakdown::mse_only(mse),
        })
    }

    /// Accumulates gradients of `mse + alpha * bd` for the most recent `forward`.
    pub fn backward(&mut self, output: &ForwardOutput, targets: &[f64]) -> Result<()> {
        let n = self.batch_len;
        if output.predictions.len() != n || targets.len() != n {
            return Err(Error::dim("backward", "n", n, targets.len()));
        }
        let dpred = Tensor::new(vec![n, 1], mse_backward(&output.predictions, targets))?;
        let dfeat = self.head.backward(&dpred)?;
        let gated = self.gate_enabled;
        let h = self.spec.hidden;
        let alpha = self.alpha();
        let is_batch = self.spec.kind == ModelKind::BatchFusion;
        match &mut self.body {
            Body::Fcn => {}
            Body::Cnn(stack) => stack.backward(dfeat)?,
            Body::Fusion { a, b } => {
                let mut ga = Vec::with_capacity(n * h);
                let mut gb = Vec::with_capacity(n * h);
                for row in dfeat.data().chunks_exact(2 * h) {
                    ga.extend_from_slice(&row[..h]);
                    gb.extend_from_slice(&row[h..]);
                }
                if is_batch && alpha != 0.0 {
                    let scale = alpha / n as f64;
                    for (i, (p, q)) in self.alignment.p.iter().zip(&self.alignment.q).enumerate() {
                        let (dp, dq) = bhattacharyya_backward(p, q);
                        let dp: Vec<f64> = dp.iter().map(|g| g * scale).collect();
                        let dq: Vec<f64> = dq.iter().map(|g| g * scale).collect();
                        let dxa = softmax_backward_slice(p, &dp);
                        let dxb = softmax_backward_slice(q, &dq);
                        for (d, v) in ga[i * h..(i + 1) * h].iter_mut().zip(dxa) {
                            *d += v;
                        }
                        for (d, v) in gb[i * h..(i + 1) * h].iter_mut().zip(dxb) {
                            *d += v;
                        }
                    }
                }
                a.backward(Tensor::new(vec![n, h], ga)?, gated)?;
                b.backward(Tensor::new(vec![n, h], gb)?, gated)?;
            }
        }
        Ok(())
    }

    /// Eval-mode predictions for a batch.
    pub fn predict(&mut self, batch_a: &Tensor, batch_b: Option<&Tensor>) -> Result<Vec<f64>> {
        Ok(self.forward(batch_a, batch_b, false)?.predictions)
    }
}
