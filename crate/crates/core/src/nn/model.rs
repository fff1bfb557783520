//! The full network: configuration, parameters, initialization, batched
//! forward/backward, and parameter accounting.
//!
//! Pipeline (lengths for the default config in parentheses):
//!
//! ```text
//! input (115, 1)
//!   -> Conv1D same-padded + ReLU          (115, 64)
//!   -> B ConvNeXt blocks                  (115, 64)
//!   -> flatten row-major                  (7360)
//!   -> dense1 + ReLU                      (128)
//!   -> dense2 + ReLU                      (64)
//!   -> dropout (training only)            (64)
//!   -> output dense + softmax             (8)
//! ```
//!
//! The sequence length never changes (no stride or pooling), so the
//! flatten stage is well-defined for any `seq_len`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::block::{block_backward, block_forward, block_forward_infer, BlockCache, ConvNeXtBlock};
use crate::nn::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, dropout_backward,
    relu, relu_backward, softmax_inplace, Conv1dLayer, DenseLayer, LayerNorm,
};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;
use crate::preprocess::ScalerParams;
use crate::rng::SplitMix64;

/// Architecture and regularization hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub in_channels: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub convnext_blocks: usize,
    pub convnext_dim: usize,
    pub convnext_kernel: usize,
    pub convnext_expansion: usize,
    pub dense1_units: usize,
    pub dense2_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub layer_scale_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            seq_len: 115,
            in_channels: 1,
            conv_filters: 64,
            conv_kernel: 5,
            convnext_blocks: 2,
            convnext_dim: 64,
            convnext_kernel: 7,
            convnext_expansion: 4,
            dense1_units: 128,
            dense2_units: 64,
            dropout_rate: 0.1,
            num_classes: 8,
            layer_scale_init: 1e-6,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("seq_len", self.seq_len),
            ("in_channels", self.in_channels),
            ("conv_filters", self.conv_filters),
            ("conv_kernel", self.conv_kernel),
            ("convnext_blocks", self.convnext_blocks),
            ("convnext_dim", self.convnext_dim),
            ("convnext_kernel", self.convnext_kernel),
            ("convnext_expansion", self.convnext_expansion),
            ("dense1_units", self.dense1_units),
            ("dense2_units", self.dense2_units),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.conv_kernel % 2 == 0 || self.convnext_kernel % 2 == 0 {
            return Err(Error::Config(
                "kernel sizes must be odd (centered same padding)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        if self.convnext_dim != self.conv_filters {
            // the conv output feeds the blocks directly; there is no
            // projection layer between them
            return Err(Error::Config(format!(
                "convnext_dim ({}) must equal conv_filters ({})",
                self.convnext_dim, self.conv_filters
            )));
        }
        Ok(())
    }

    pub fn flat_dim(&self) -> usize {
        self.seq_len * self.convnext_dim
    }
}

/// All trainable tensors, used both for model parameters and for
/// shape-congruent gradient buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    pub conv: Conv1dLayer<T>,
    pub blocks: Vec<ConvNeXtBlock<T>>,
    pub dense1: DenseLayer<T>,
    pub dense2: DenseLayer<T>,
    pub output: DenseLayer<T>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        ParamSet {
            conv: Conv1dLayer::zeros(config.conv_filters, config.in_channels, config.conv_kernel),
            blocks: (0..config.convnext_blocks)
                .map(|_| {
                    ConvNeXtBlock::zeros(
                        config.convnext_dim,
                        config.convnext_kernel,
                        config.convnext_expansion,
                    )
                })
                .collect(),
            dense1: DenseLayer::zeros(config.dense1_units, config.flat_dim()),
            dense2: DenseLayer::zeros(config.dense2_units, config.dense1_units),
            output: DenseLayer::zeros(config.num_classes, config.dense2_units),
        }
    }

    /// Every parameter tensor in the canonical order used by the
    /// optimizer, serializer, and gradient checker: conv (w, b); per
    /// block depthwise (w, b), layernorm (gamma, beta), pointwise1
    /// (w, b), pointwise2 (w, b), layer scale; then dense1, dense2,
    /// output (w, b each).
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![&self.conv.weights, &self.conv.bias];
        for b in &self.blocks {
            out.push(&b.depthwise.weights);
            out.push(&b.depthwise.bias);
            out.push(&b.norm.gamma);
            out.push(&b.norm.beta);
            out.push(b.pw1.weights.data());
            out.push(&b.pw1.bias);
            out.push(b.pw2.weights.data());
            out.push(&b.pw2.bias);
            out.push(&b.layer_scale);
        }
        out.push(self.dense1.weights.data());
        out.push(&self.dense1.bias);
        out.push(self.dense2.weights.data());
        out.push(&self.dense2.bias);
        out.push(self.output.weights.data());
        out.push(&self.output.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![&mut self.conv.weights, &mut self.conv.bias];
        for b in &mut self.blocks {
            out.push(&mut b.depthwise.weights);
            out.push(&mut b.depthwise.bias);
            out.push(&mut b.norm.gamma);
            out.push(&mut b.norm.beta);
            out.push(b.pw1.weights.data_mut());
            out.push(&mut b.pw1.bias);
            out.push(b.pw2.weights.data_mut());
            out.push(&mut b.pw2.bias);
            out.push(&mut b.layer_scale);
        }
        out.push(self.dense1.weights.data_mut());
        out.push(&mut self.dense1.bias);
        out.push(self.dense2.weights.data_mut());
        out.push(&mut self.dense2.bias);
        out.push(self.output.weights.data_mut());
        out.push(&mut self.output.bias);
        out
    }

    /// Elementwise `self += other`, used to reduce per-chunk gradients.
    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        for (a, b) in mine.iter_mut().zip(theirs) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Per-parameter gradients, shape-congruent with [`ParamSet`].
#[derive(Clone, Debug)]
pub struct GradientSet<T>(pub ParamSet<T>);

impl<T: Scalar> GradientSet<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        GradientSet(ParamSet::zeros(config))
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.0.tensors()
    }
}

/// The trained artifact: configuration, embedded input scaler, class
/// names for reporting, and all layer parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub scaler: ScalerParams,
    pub class_names: Vec<String>,
    pub params: ParamSet<T>,
}

/// Deterministically initialize a model from `seed`.
///
/// Conv and dense weights are He-uniform (`±sqrt(6 / fan_in)`), layernorm
/// starts as the identity (`gamma = 1`, `beta = 0`), pointwise weights are
/// `normal(0, 0.02)`, biases are zero, and every `layer_scale` entry is
/// `layer_scale_init`. Each tensor draws from its own seed substream, so
/// the values do not depend on how other tensors are sized.
pub fn init_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let mut params = ParamSet::zeros(config);
    let mut stream = 0u64;
    let next_rng = |stream: &mut u64| {
        let r = SplitMix64::with_stream(seed, *stream);
        *stream += 1;
        r
    };

    let he_uniform = |w: &mut [T], fan_in: usize, rng: &mut SplitMix64| {
        let limit = (6.0 / fan_in as f64).sqrt();
        for v in w {
            *v = T::from_f64(rng.uniform(-limit, limit));
        }
    };
    let pointwise_normal = |w: &mut [T], rng: &mut SplitMix64| {
        for v in w {
            *v = T::from_f64(rng.normal() * 0.02);
        }
    };

    let mut rng = next_rng(&mut stream);
    he_uniform(
        &mut params.conv.weights,
        config.in_channels * config.conv_kernel,
        &mut rng,
    );

    for b in &mut params.blocks {
        let mut rng = next_rng(&mut stream);
        he_uniform(&mut b.depthwise.weights, config.convnext_kernel, &mut rng);
        b.norm = LayerNorm::identity(config.convnext_dim);
        let mut rng = next_rng(&mut stream);
        pointwise_normal(b.pw1.weights.data_mut(), &mut rng);
        let mut rng = next_rng(&mut stream);
        pointwise_normal(b.pw2.weights.data_mut(), &mut rng);
        for s in &mut b.layer_scale {
            *s = T::from_f64(config.layer_scale_init);
        }
    }

    let mut rng = next_rng(&mut stream);
    he_uniform(params.dense1.weights.data_mut(), config.flat_dim(), &mut rng);
    let mut rng = next_rng(&mut stream);
    he_uniform(params.dense2.weights.data_mut(), config.dense1_units, &mut rng);
    let mut rng = next_rng(&mut stream);
    he_uniform(params.output.weights.data_mut(), config.dense2_units, &mut rng);

    Ok(Model {
        config: config.clone(),
        scaler: ScalerParams::identity(config.seq_len),
        class_names: (0..config.num_classes).map(|c| format!("class_{c}")).collect(),
        params,
    })
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

/// Everything the backward pass needs about one sample's forward pass.
#[derive(Clone, Debug)]
pub struct SampleCache<T> {
    pub input: Mat<T>,
    pub conv_pre: Mat<T>,
    /// Stage outputs: `stages[0]` is the conv activation, `stages[i + 1]`
    /// the output of block `i`. The last stage, read row-major, is the
    /// flattened dense input.
    pub stages: Vec<Mat<T>>,
    pub block_caches: Vec<BlockCache<T>>,
    pub z1: Vec<T>,
    pub a1: Vec<T>,
    pub z2: Vec<T>,
    pub dropout_mask: Vec<T>,
    pub dropped: Vec<T>,
    pub probs: Vec<T>,
}

fn forward_one_training<T: Scalar>(
    model: &Model<T>,
    input: &Mat<T>,
    dropout_rng: &mut SplitMix64,
) -> SampleCache<T> {
    let conv_pre = conv1d_forward(input, &model.params.conv);
    let mut act = conv_pre.clone();
    relu(act.data_mut());

    let mut stages = Vec::with_capacity(model.params.blocks.len() + 1);
    let mut block_caches = Vec::with_capacity(model.params.blocks.len());
    stages.push(act);
    for b in &model.params.blocks {
        let (out, cache) = block_forward(stages.last().unwrap(), b);
        stages.push(out);
        block_caches.push(cache);
    }

    let flat = stages.last().unwrap().data();
    let z1 = dense_forward(flat, &model.params.dense1);
    let mut a1 = z1.clone();
    relu(&mut a1);
    let z2 = dense_forward(&a1, &model.params.dense2);
    let mut a2 = z2.clone();
    relu(&mut a2);
    let mut dropped = a2;
    let dropout_mask = dropout(&mut dropped, model.config.dropout_rate, true, dropout_rng);
    let mut probs = dense_forward(&dropped, &model.params.output);
    softmax_inplace(&mut probs);

    SampleCache {
        input: input.clone(),
        conv_pre,
        stages,
        block_caches,
        z1,
        a1,
        z2,
        dropout_mask,
        dropped,
        probs,
    }
}

/// Inference-mode forward for one standardized input tensor; returns the
/// class probability vector.
pub fn predict_proba<T: Scalar>(model: &Model<T>, input: &Mat<T>) -> Vec<T> {
    let mut act = conv1d_forward(input, &model.params.conv);
    relu(act.data_mut());
    let mut cur = act;
    for b in &model.params.blocks {
        cur = block_forward_infer(&cur, b);
    }
    let z1 = dense_forward(cur.data(), &model.params.dense1);
    let mut a1 = z1;
    relu(&mut a1);
    let z2 = dense_forward(&a1, &model.params.dense2);
    let mut a2 = z2;
    relu(&mut a2);
    // dropout is the identity at inference
    let mut probs = dense_forward(&a2, &model.params.output);
    softmax_inplace(&mut probs);
    probs
}

/// Training-mode batched forward pass.
///
/// Dropout masks are drawn per sample from substream
/// `first_sample_index + i` of `dropout_seed`, so results do not depend
/// on thread count or batch partitioning.
pub fn forward_training<T: Scalar>(
    model: &Model<T>,
    batch: &[Mat<T>],
    dropout_seed: u64,
    first_sample_index: u64,
) -> (Mat<T>, Vec<SampleCache<T>>) {
    let caches: Vec<SampleCache<T>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let mut rng = SplitMix64::with_stream(dropout_seed, first_sample_index + i as u64);
            forward_one_training(model, input, &mut rng)
        })
        .collect();
    let mut probs = Mat::zeros(batch.len(), model.config.num_classes);
    for (i, c) in caches.iter().enumerate() {
        probs.row_mut(i).copy_from_slice(&c.probs);
    }
    (probs, caches)
}

/// Inference-mode batched forward pass; probabilities only.
pub fn forward_inference<T: Scalar>(model: &Model<T>, batch: &[Mat<T>]) -> Mat<T> {
    let rows: Vec<Vec<T>> = batch
        .par_iter()
        .map(|input| predict_proba(model, input))
        .collect();
    let mut probs = Mat::zeros(batch.len(), model.config.num_classes);
    for (i, r) in rows.iter().enumerate() {
        probs.row_mut(i).copy_from_slice(r);
    }
    probs
}

fn backward_one<T: Scalar>(
    model: &Model<T>,
    cache: &SampleCache<T>,
    target: &[T],
    inv_batch: T,
    grad: &mut ParamSet<T>,
) {
    let kc = model.config.num_classes;
    // fused softmax + cross-entropy gradient: (p - y) / N
    let mut dz3 = vec![T::zero(); kc];
    for c in 0..kc {
        dz3[c] = (cache.probs[c] - target[c]) * inv_batch;
    }

    let mut d_dropped = vec![T::zero(); model.config.dense2_units];
    dense_backward(&cache.dropped, &model.params.output, &dz3, &mut grad.output, &mut d_dropped);

    dropout_backward(&cache.dropout_mask, &mut d_dropped);
    relu_backward(&cache.z2, &mut d_dropped);
    let dz2 = d_dropped;

    let mut da1 = vec![T::zero(); model.config.dense1_units];
    dense_backward(&cache.a1, &model.params.dense2, &dz2, &mut grad.dense2, &mut da1);
    relu_backward(&cache.z1, &mut da1);
    let dz1 = da1;

    let flat = cache.stages.last().unwrap();
    let mut d_flat = vec![T::zero(); model.config.flat_dim()];
    dense_backward(flat.data(), &model.params.dense1, &dz1, &mut grad.dense1, &mut d_flat);

    // reshape the flat gradient back to (seq_len, dim); same layout
    let mut d_stage = Mat::from_vec(model.config.seq_len, model.config.convnext_dim, d_flat);
    for (i, b) in model.params.blocks.iter().enumerate().rev() {
        d_stage = block_backward(
            &cache.stages[i],
            b,
            &cache.block_caches[i],
            &d_stage,
            &mut grad.blocks[i],
        );
    }

    // through the conv ReLU into the convolution itself
    relu_backward(cache.conv_pre.data(), d_stage.data_mut());
    let mut d_input = Mat::zeros(model.config.seq_len, model.config.in_channels);
    conv1d_backward(&cache.input, &model.params.conv, &d_stage, &mut grad.conv, &mut d_input);
}

/// Number of fixed accumulation chunks for a batch. A pure function of
/// the batch size so gradient reduction order never depends on thread
/// scheduling.
fn chunk_size(batch: usize) -> usize {
    batch.div_ceil(8).max(1)
}

/// Backward pass over a batch: mean cross-entropy loss and gradients for
/// every parameter. `onehot` rows must align with the caches from
/// [`forward_training`] on the same batch.
pub fn backward<T: Scalar>(
    model: &Model<T>,
    caches: &[SampleCache<T>],
    onehot: &Mat<T>,
) -> Result<(GradientSet<T>, f64)> {
    backward_with(model, caches, onehot, true)
}

/// [`backward`] with an explicit reduction mode. In deterministic mode
/// (the default) per-chunk gradients merge in fixed chunk order, bitwise
/// reproducible for any thread count; fast mode lets the thread pool
/// reduce in whatever order finishes first, which can reorder float
/// additions between runs.
pub fn backward_with<T: Scalar>(
    model: &Model<T>,
    caches: &[SampleCache<T>],
    onehot: &Mat<T>,
    deterministic: bool,
) -> Result<(GradientSet<T>, f64)> {
    if caches.len() != onehot.rows() || onehot.cols() != model.config.num_classes {
        return Err(Error::Shape(format!(
            "backward: {} caches vs {}x{} targets (num_classes {})",
            caches.len(),
            onehot.rows(),
            onehot.cols(),
            model.config.num_classes
        )));
    }
    let n = caches.len();
    let inv_batch = T::from_f64(1.0 / n as f64);

    let chunk = chunk_size(n);
    let chunk_grad = |(ci, chunk_caches): (usize, &[SampleCache<T>])| {
        let mut g = ParamSet::zeros(&model.config);
        for (j, cache) in chunk_caches.iter().enumerate() {
            let row = onehot.row(ci * chunk + j);
            backward_one(model, cache, row, inv_batch, &mut g);
        }
        g
    };
    let mut grad = GradientSet::zeros(&model.config);
    if deterministic {
        let chunk_grads: Vec<ParamSet<T>> =
            caches.par_chunks(chunk).enumerate().map(chunk_grad).collect();
        for g in &chunk_grads {
            grad.0.add_assign(g);
        }
    } else {
        let reduced = caches
            .par_chunks(chunk)
            .enumerate()
            .map(chunk_grad)
            .reduce_with(|mut a, b| {
                a.add_assign(&b);
                a
            });
        if let Some(g) = reduced {
            grad.0.add_assign(&g);
        }
    }

    // mean cross-entropy with the probability clamp, accumulated in f64
    let mut loss = 0.0f64;
    for (i, cache) in caches.iter().enumerate() {
        let row = onehot.row(i);
        for c in 0..model.config.num_classes {
            let y = row[c].as_f64();
            if y != 0.0 {
                let p = cache.probs[c].as_f64();
                // keep NaN poisonous: f64::max would silently drop it
                loss -= y * if p.is_nan() { f64::NAN } else { p.max(1e-12).ln() };
            }
        }
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok((grad, loss))
}

// ---------------------------------------------------------------------------
// Parameter accounting
// ---------------------------------------------------------------------------

/// Exact trainable-parameter count with a per-layer breakdown.
pub fn param_count(config: &ModelConfig) -> (u64, Vec<(String, u64)>) {
    let mut breakdown = Vec::new();
    let conv = (config.conv_filters * config.conv_kernel * config.in_channels
        + config.conv_filters) as u64;
    breakdown.push(("conv1d".to_string(), conv));
    let dim = config.convnext_dim as u64;
    let hidden = dim * config.convnext_expansion as u64;
    for i in 0..config.convnext_blocks {
        breakdown.push((
            format!("block{i}.depthwise"),
            dim * config.convnext_kernel as u64 + dim,
        ));
        breakdown.push((format!("block{i}.layernorm"), 2 * dim));
        breakdown.push((format!("block{i}.pointwise1"), dim * hidden + hidden));
        breakdown.push((format!("block{i}.pointwise2"), hidden * dim + dim));
        breakdown.push((format!("block{i}.layer_scale"), dim));
    }
    let flat = config.flat_dim() as u64;
    breakdown.push((
        "dense1".to_string(),
        config.dense1_units as u64 * flat + config.dense1_units as u64,
    ));
    breakdown.push((
        "dense2".to_string(),
        (config.dense2_units * config.dense1_units + config.dense2_units) as u64,
    ));
    breakdown.push((
        "output".to_string(),
        (config.num_classes * config.dense2_units + config.num_classes) as u64,
    ));
    let total = breakdown.iter().map(|(_, n)| n).sum();
    (total, breakdown)
}

/// Coarse closed-form parameter estimate computed directly from the
/// hyperparameters (feature count, kernel size, block width, dense
/// units). Reported for reference next to the exact count; the two are
/// not expected to agree.
pub fn hyperparam_estimate(config: &ModelConfig) -> u128 {
    let nf = config.seq_len as u128; // feature count
    let nt = config.seq_len as u128; // time steps (one feature per step)
    let filters = config.conv_filters as u128;
    let kernel = config.conv_kernel as u128;
    let units = config.convnext_dim as u128;
    let dense = config.dense1_units as u128;
    (filters * kernel + 1) * nf
        + nf * nf
        + nf * nt * (nt - 1) * units
        + nf * dense
        + dense
        + config.num_classes as u128
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            seq_len: 12,
            in_channels: 1,
            conv_filters: 4,
            conv_kernel: 5,
            convnext_blocks: 1,
            convnext_dim: 4,
            convnext_kernel: 7,
            convnext_expansion: 4,
            dense1_units: 8,
            dense2_units: 4,
            dropout_rate: 0.1,
            num_classes: 3,
            layer_scale_init: 1e-6,
        }
    }

    fn random_inputs(config: &ModelConfig, n: usize, seed: u64) -> Vec<Mat<f64>> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                let mut m = Mat::zeros(config.seq_len, config.in_channels);
                for v in m.data_mut() {
                    *v = rng.normal();
                }
                m
            })
            .collect()
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = tiny_config();
        let a: Model<f32> = init_model(&cfg, 7).unwrap();
        let b: Model<f32> = init_model(&cfg, 7).unwrap();
        assert_eq!(a.params, b.params);
        let c: Model<f32> = init_model(&cfg, 8).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_layer_scale_blocks_are_identity() {
        let mut cfg = tiny_config();
        cfg.layer_scale_init = 0.0;
        let model: Model<f64> = init_model(&cfg, 3).unwrap();
        let x = random_inputs(&cfg, 1, 5).remove(0);
        let mut act = conv1d_forward(&x, &model.params.conv);
        relu(act.data_mut());
        let mut cur = act.clone();
        for b in &model.params.blocks {
            cur = block_forward_infer(&cur, b);
        }
        assert_eq!(cur, act);
    }

    #[test]
    fn param_count_examples() {
        // bare Conv1D: 64*5*1 + 64 = 384
        let cfg = ModelConfig::default();
        let (_, breakdown) = param_count(&cfg);
        assert_eq!(breakdown[0], ("conv1d".to_string(), 384));
        // one block at dim 64 / kernel 7 / expansion 4:
        // 512 + 128 + 16640 + 16448 + 64 = 33792
        let block_total: u64 = breakdown[1..6].iter().map(|(_, n)| n).sum();
        assert_eq!(block_total, 33_792);
    }

    #[test]
    fn param_count_matches_allocated_tensors() {
        for cfg in [ModelConfig::default(), tiny_config()] {
            let model: Model<f32> = init_model(&cfg, 1).unwrap();
            let (total, breakdown) = param_count(&cfg);
            assert_eq!(total as usize, model.params.num_params());
            let sum: u64 = breakdown.iter().map(|(_, n)| n).sum();
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn forward_rows_are_distributions() {
        let cfg = tiny_config();
        let model: Model<f64> = init_model(&cfg, 11).unwrap();
        let inputs = random_inputs(&cfg, 4, 13);
        let (probs, _) = forward_training(&model, &inputs, 99, 0);
        for i in 0..4 {
            let row = probs.row(i);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn inference_deterministic_and_batch_neutral() {
        let cfg = tiny_config();
        let model: Model<f64> = init_model(&cfg, 21).unwrap();
        let inputs = random_inputs(&cfg, 3, 23);
        let a = forward_inference(&model, &inputs);
        let b = forward_inference(&model, &inputs);
        assert_eq!(a, b);
        // single sample vs batch-of-one
        let single = predict_proba(&model, &inputs[1]);
        let batched = forward_inference(&model, &inputs[1..2]);
        assert_eq!(single.as_slice(), batched.row(0));
    }

    #[test]
    fn uniform_predictions_loss_is_ln_k() {
        // force uniform outputs: zero all weights and biases
        let mut cfg = tiny_config();
        cfg.num_classes = 8;
        cfg.dropout_rate = 0.0;
        let mut model: Model<f64> = init_model(&cfg, 1).unwrap();
        model.params = ParamSet::zeros(&cfg);
        for b in &mut model.params.blocks {
            b.norm = LayerNorm::identity(cfg.convnext_dim);
        }
        let inputs = random_inputs(&cfg, 5, 2);
        let (_, caches) = forward_training(&model, &inputs, 1, 0);
        let mut onehot = Mat::zeros(5, 8);
        for i in 0..5 {
            onehot[(i, i % 8)] = 1.0;
        }
        let (_, loss) = backward(&model, &caches, &onehot).unwrap();
        assert!((loss - (8.0f64).ln()).abs() < 1e-9, "loss {loss}");
        assert!((loss - 2.079442).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_predictions_have_near_zero_loss_and_grad() {
        let cfg = tiny_config();
        let mut model: Model<f64> = init_model(&cfg, 1).unwrap();
        // zero everything, then bias the output layer hard toward class 0
        model.params = ParamSet::zeros(&cfg);
        for b in &mut model.params.blocks {
            b.norm = LayerNorm::identity(cfg.convnext_dim);
        }
        model.params.output.bias[0] = 50.0;
        let inputs = random_inputs(&cfg, 3, 9);
        let (probs, caches) = forward_training(&model, &inputs, 4, 0);
        assert!(probs[(0, 0)] > 0.999999);
        let mut onehot = Mat::zeros(3, 3);
        for i in 0..3 {
            onehot[(i, 0)] = 1.0;
        }
        let (grad, loss) = backward(&model, &caches, &onehot).unwrap();
        assert!(loss < 1e-9, "loss {loss}");
        let max_out_grad = grad
            .0
            .output
            .weights
            .data()
            .iter()
            .chain(&grad.0.output.bias)
            .fold(0.0f64, |m, &g| m.max(g.abs()));
        assert!(max_out_grad < 1e-9, "grad {max_out_grad}");
    }

    #[test]
    fn hyperparam_estimate_default() {
        let est = hyperparam_estimate(&ModelConfig::default());
        // (64*5 + 1)*115 + 115^2 + 115*115*114*64 + 115*128 + 128 + 8
        assert_eq!(est, 36_915 + 13_225 + 96_489_600 + 14_720 + 128 + 8);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ModelConfig::default();
        cfg.conv_kernel = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.convnext_dim = 32;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.num_classes = 0;
        assert!(cfg.validate().is_err());
    }
}
