//! Residual ConvNeXt-style block adapted to 1D sequences.
//!
//! `out = x + layer_scale ⊙ PW2(GELU(PW1(LayerNorm(DepthwiseConv(x)))))`
//!
//! The depthwise convolution uses same zero padding; layer normalization
//! runs over the channel axis at each position; the two pointwise layers
//! act per position (expand by `expansion`, then project back). The
//! per-channel `layer_scale` is initialized near zero so a freshly built
//! block starts as (almost) the identity map.

use crate::nn::layers::{
    dense_backward, dense_forward_into, depthwise_conv1d_backward, depthwise_conv1d_forward,
    gelu, gelu_grad, layernorm_backward, layernorm_forward, DenseLayer, DepthwiseConv1d,
    LayerNorm,
};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvNeXtBlock<T> {
    pub depthwise: DepthwiseConv1d<T>,
    pub norm: LayerNorm<T>,
    /// Pointwise expansion, `(dim * expansion, dim)`.
    pub pw1: DenseLayer<T>,
    /// Pointwise projection, `(dim, dim * expansion)`.
    pub pw2: DenseLayer<T>,
    /// Per-channel scale on the residual branch.
    pub layer_scale: Vec<T>,
}

impl<T: Scalar> ConvNeXtBlock<T> {
    pub fn zeros(dim: usize, kernel: usize, expansion: usize) -> Self {
        ConvNeXtBlock {
            depthwise: DepthwiseConv1d::zeros(dim, kernel),
            norm: LayerNorm::zeros(dim),
            pw1: DenseLayer::zeros(dim * expansion, dim),
            pw2: DenseLayer::zeros(dim, dim * expansion),
            layer_scale: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.layer_scale.len()
    }
}

/// Intermediates cached by the training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    pub depth_out: Mat<T>,
    pub ln_hat: Mat<T>,
    pub ln_inv_std: Vec<T>,
    pub ln_out: Mat<T>,
    pub pw1_out: Mat<T>,
    pub gelu_out: Mat<T>,
    pub pw2_out: Mat<T>,
}

/// Forward pass caching everything the backward pass needs.
pub fn block_forward<T: Scalar>(x: &Mat<T>, block: &ConvNeXtBlock<T>) -> (Mat<T>, BlockCache<T>) {
    let dim = block.dim();
    assert_eq!(x.cols(), dim, "block channel mismatch");
    let len = x.rows();
    let hidden = block.pw1.out_dim();

    let depth_out = depthwise_conv1d_forward(x, &block.depthwise);
    let mut ln_hat = Mat::zeros(len, dim);
    let mut ln_out = Mat::zeros(len, dim);
    let mut ln_inv_std = vec![T::zero(); len];
    let mut pw1_out = Mat::zeros(len, hidden);
    let mut gelu_out = Mat::zeros(len, hidden);
    let mut pw2_out = Mat::zeros(len, dim);
    let mut out = x.clone();

    for t in 0..len {
        ln_inv_std[t] =
            layernorm_forward(depth_out.row(t), &block.norm, ln_out.row_mut(t), ln_hat.row_mut(t));
        dense_forward_into(ln_out.row(t), &block.pw1, pw1_out.row_mut(t));
        for (g, &z) in gelu_out.row_mut(t).iter_mut().zip(pw1_out.row(t)) {
            *g = gelu(z);
        }
        dense_forward_into(gelu_out.row(t), &block.pw2, pw2_out.row_mut(t));
        let orow = out.row_mut(t);
        let prow = pw2_out.row(t);
        for c in 0..dim {
            orow[c] = orow[c] + block.layer_scale[c] * prow[c];
        }
    }

    (
        out,
        BlockCache {
            depth_out,
            ln_hat,
            ln_inv_std,
            ln_out,
            pw1_out,
            gelu_out,
            pw2_out,
        },
    )
}

/// Inference-only forward pass (no cache retained).
pub fn block_forward_infer<T: Scalar>(x: &Mat<T>, block: &ConvNeXtBlock<T>) -> Mat<T> {
    let dim = block.dim();
    assert_eq!(x.cols(), dim, "block channel mismatch");
    let len = x.rows();
    let hidden = block.pw1.out_dim();

    let depth_out = depthwise_conv1d_forward(x, &block.depthwise);
    let mut out = x.clone();
    let mut normed = vec![T::zero(); dim];
    let mut xhat = vec![T::zero(); dim];
    let mut expanded = vec![T::zero(); hidden];
    let mut projected = vec![T::zero(); dim];
    for t in 0..len {
        layernorm_forward(depth_out.row(t), &block.norm, &mut normed, &mut xhat);
        dense_forward_into(&normed, &block.pw1, &mut expanded);
        for v in expanded.iter_mut() {
            *v = gelu(*v);
        }
        dense_forward_into(&expanded, &block.pw2, &mut projected);
        let orow = out.row_mut(t);
        for c in 0..dim {
            orow[c] = orow[c] + block.layer_scale[c] * projected[c];
        }
    }
    out
}

/// Backward through the block. Accumulates parameter gradients into
/// `grad` and returns the gradient with respect to the block input.
pub fn block_backward<T: Scalar>(
    x: &Mat<T>,
    block: &ConvNeXtBlock<T>,
    cache: &BlockCache<T>,
    dout: &Mat<T>,
    grad: &mut ConvNeXtBlock<T>,
) -> Mat<T> {
    let dim = block.dim();
    let len = x.rows();
    let hidden = block.pw1.out_dim();

    // residual: identity branch passes dout straight through
    let mut dx = dout.clone();
    let mut d_depth = Mat::zeros(len, dim);

    let mut d_pw2 = vec![T::zero(); dim];
    let mut d_gelu = vec![T::zero(); hidden];
    let mut d_pw1 = vec![T::zero(); hidden];
    let mut d_ln = vec![T::zero(); dim];

    for t in 0..len {
        let dorow = dout.row(t);
        let p2row = cache.pw2_out.row(t);
        for c in 0..dim {
            grad.layer_scale[c] = grad.layer_scale[c] + dorow[c] * p2row[c];
            d_pw2[c] = dorow[c] * block.layer_scale[c];
        }

        d_gelu.iter_mut().for_each(|v| *v = T::zero());
        dense_backward(cache.gelu_out.row(t), &block.pw2, &d_pw2, &mut grad.pw2, &mut d_gelu);

        for i in 0..hidden {
            d_pw1[i] = d_gelu[i] * gelu_grad(cache.pw1_out[(t, i)]);
        }

        d_ln.iter_mut().for_each(|v| *v = T::zero());
        dense_backward(cache.ln_out.row(t), &block.pw1, &d_pw1, &mut grad.pw1, &mut d_ln);

        layernorm_backward(
            cache.ln_hat.row(t),
            cache.ln_inv_std[t],
            &block.norm,
            &d_ln,
            &mut grad.norm,
            d_depth.row_mut(t),
        );
    }

    depthwise_conv1d_backward(x, &block.depthwise, &d_depth, &mut grad.depthwise, &mut dx);
    dx
}

/// Forward pass without exposing the cache.
pub fn convnext_block_forward<T: Scalar>(x: &Mat<T>, block: &ConvNeXtBlock<T>) -> Mat<T> {
    block_forward_infer(x, block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_block(dim: usize, kernel: usize, expansion: usize, seed: u64) -> ConvNeXtBlock<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut b = ConvNeXtBlock::zeros(dim, kernel, expansion);
        for w in &mut b.depthwise.weights {
            *w = rng.uniform(-0.5, 0.5);
        }
        for w in &mut b.depthwise.bias {
            *w = rng.uniform(-0.1, 0.1);
        }
        b.norm = LayerNorm::identity(dim);
        for w in b.pw1.weights.data_mut() {
            *w = rng.normal() * 0.2;
        }
        for w in b.pw2.weights.data_mut() {
            *w = rng.normal() * 0.2;
        }
        for s in &mut b.layer_scale {
            *s = rng.uniform(0.1, 1.0);
        }
        b
    }

    fn random_input(len: usize, dim: usize, seed: u64) -> Mat<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut x = Mat::zeros(len, dim);
        for t in 0..len {
            for c in 0..dim {
                x[(t, c)] = rng.uniform(-2.0, 2.0);
            }
        }
        x
    }

    #[test]
    fn zero_layer_scale_is_identity() {
        let mut b = random_block(4, 7, 4, 3);
        b.layer_scale = vec![0.0; 4];
        let x = random_input(9, 4, 4);
        let y = convnext_block_forward(&x, &b);
        assert_eq!(x, y);
    }

    #[test]
    fn zero_input_zero_params_gives_zero() {
        let mut b = ConvNeXtBlock::<f64>::zeros(3, 7, 4);
        b.norm = LayerNorm::identity(3);
        b.layer_scale = vec![1.0; 3];
        let x = Mat::zeros(5, 3);
        let y = convnext_block_forward(&x, &b);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_composed_sub_operations() {
        // compose the five sub-operations step by step, independently of
        // block_forward's internal loop structure
        let b = random_block(4, 7, 4, 11);
        let x = random_input(5, 4, 12);

        let d = depthwise_conv1d_forward(&x, &b.depthwise);
        let mut expect = x.clone();
        for t in 0..5 {
            let normed = crate::nn::layers::layernorm(d.row(t), &b.norm.gamma, &b.norm.beta);
            let z1 = crate::nn::layers::dense_forward(&normed, &b.pw1);
            let g: Vec<f64> = z1.iter().map(|&v| gelu(v)).collect();
            let z2 = crate::nn::layers::dense_forward(&g, &b.pw2);
            for c in 0..4 {
                expect[(t, c)] = expect[(t, c)] + b.layer_scale[c] * z2[c];
            }
        }

        let got = convnext_block_forward(&x, &b);
        assert!(got.max_abs_diff(&expect) < 1e-12);

        // the caching forward agrees with the inference forward
        let (got2, _cache) = block_forward(&x, &b);
        assert!(got2.max_abs_diff(&got) < 1e-15);
    }
}
