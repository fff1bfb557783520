//! Layer primitives: forward passes and analytic gradients.
//!
//! Conventions used throughout:
//!
//! - Sequence tensors are `(len, channels)` row-major [`Mat`]s.
//! - Convolutions use "same" zero padding with the kernel centered, so
//!   output length equals input length; kernel sizes must be odd.
//! - `backward_*` functions accumulate (`+=`) into the gradient buffers,
//!   so one buffer can absorb a whole batch.

use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;
use crate::rng::SplitMix64;

/// Variance guard used by layer normalization.
pub const LAYERNORM_EPS: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Conv1D (cross-channel)
// ---------------------------------------------------------------------------

/// 1D convolution: `filters` output channels over `in_channels` inputs,
/// weights laid out `(filter, in_channel, tap)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dLayer<T> {
    pub filters: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn zeros(filters: usize, in_channels: usize, kernel: usize) -> Self {
        Conv1dLayer {
            filters,
            in_channels,
            kernel,
            weights: vec![T::zero(); filters * in_channels * kernel],
            bias: vec![T::zero(); filters],
        }
    }

    #[inline]
    pub fn w(&self, f: usize, c: usize, k: usize) -> T {
        self.weights[(f * self.in_channels + c) * self.kernel + k]
    }

    #[inline]
    fn w_idx(&self, f: usize, c: usize, k: usize) -> usize {
        (f * self.in_channels + c) * self.kernel + k
    }
}

/// Same-padded 1D convolution of `x` `(len, in_channels)` into
/// `(len, filters)`:
/// `y[t][f] = b[f] + sum_{c,k} w[f][c][k] * x[t + k - kernel/2][c]`,
/// reading zeros outside `[0, len)`.
pub fn conv1d_forward<T: Scalar>(x: &Mat<T>, layer: &Conv1dLayer<T>) -> Mat<T> {
    assert_eq!(x.cols(), layer.in_channels, "conv1d input channel mismatch");
    assert!(layer.kernel % 2 == 1, "conv1d kernel must be odd");
    let len = x.rows();
    let off = (layer.kernel / 2) as isize;
    let mut y = Mat::zeros(len, layer.filters);
    for t in 0..len {
        let out = y.row_mut(t);
        for f in 0..layer.filters {
            let mut acc = layer.bias[f];
            for k in 0..layer.kernel {
                let s = t as isize + k as isize - off;
                if s < 0 || s >= len as isize {
                    continue;
                }
                let xr = x.row(s as usize);
                for c in 0..layer.in_channels {
                    acc = acc + layer.w(f, c, k) * xr[c];
                }
            }
            out[f] = acc;
        }
    }
    y
}

/// Gradients of the same-padded convolution. Accumulates parameter
/// gradients into `grad` and input gradients into `dx`.
pub fn conv1d_backward<T: Scalar>(
    x: &Mat<T>,
    layer: &Conv1dLayer<T>,
    dy: &Mat<T>,
    grad: &mut Conv1dLayer<T>,
    dx: &mut Mat<T>,
) {
    let len = x.rows();
    let off = (layer.kernel / 2) as isize;
    for t in 0..len {
        let dyr = dy.row(t);
        for f in 0..layer.filters {
            let g = dyr[f];
            grad.bias[f] = grad.bias[f] + g;
            for k in 0..layer.kernel {
                let s = t as isize + k as isize - off;
                if s < 0 || s >= len as isize {
                    continue;
                }
                let s = s as usize;
                for c in 0..layer.in_channels {
                    let wi = layer.w_idx(f, c, k);
                    grad.weights[wi] = grad.weights[wi] + g * x[(s, c)];
                    dx[(s, c)] = dx[(s, c)] + g * layer.w(f, c, k);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Depthwise Conv1D (per-channel)
// ---------------------------------------------------------------------------

/// Depthwise 1D convolution: each channel is filtered independently,
/// weights laid out `(channel, tap)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthwiseConv1d<T> {
    pub channels: usize,
    pub kernel: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DepthwiseConv1d<T> {
    pub fn zeros(channels: usize, kernel: usize) -> Self {
        DepthwiseConv1d {
            channels,
            kernel,
            weights: vec![T::zero(); channels * kernel],
            bias: vec![T::zero(); channels],
        }
    }

    #[inline]
    pub fn w(&self, c: usize, k: usize) -> T {
        self.weights[c * self.kernel + k]
    }
}

pub fn depthwise_conv1d_forward<T: Scalar>(x: &Mat<T>, layer: &DepthwiseConv1d<T>) -> Mat<T> {
    assert_eq!(x.cols(), layer.channels, "depthwise channel mismatch");
    assert!(layer.kernel % 2 == 1, "depthwise kernel must be odd");
    let len = x.rows();
    let off = (layer.kernel / 2) as isize;
    let mut y = Mat::zeros(len, layer.channels);
    for t in 0..len {
        let out = y.row_mut(t);
        for k in 0..layer.kernel {
            let s = t as isize + k as isize - off;
            if s < 0 || s >= len as isize {
                continue;
            }
            let xr = x.row(s as usize);
            for c in 0..layer.channels {
                out[c] = out[c] + layer.w(c, k) * xr[c];
            }
        }
        for c in 0..layer.channels {
            out[c] = out[c] + layer.bias[c];
        }
    }
    y
}

pub fn depthwise_conv1d_backward<T: Scalar>(
    x: &Mat<T>,
    layer: &DepthwiseConv1d<T>,
    dy: &Mat<T>,
    grad: &mut DepthwiseConv1d<T>,
    dx: &mut Mat<T>,
) {
    let len = x.rows();
    let off = (layer.kernel / 2) as isize;
    for t in 0..len {
        let dyr = dy.row(t);
        for c in 0..layer.channels {
            grad.bias[c] = grad.bias[c] + dyr[c];
        }
        for k in 0..layer.kernel {
            let s = t as isize + k as isize - off;
            if s < 0 || s >= len as isize {
                continue;
            }
            let s = s as usize;
            for c in 0..layer.channels {
                let g = dyr[c];
                grad.weights[c * layer.kernel + k] =
                    grad.weights[c * layer.kernel + k] + g * x[(s, c)];
                dx[(s, c)] = dx[(s, c)] + g * layer.w(c, k);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected layer, weights `(out, in)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Mat<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            weights: Mat::zeros(out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// `z = W x + b` (no activation).
pub fn dense_forward<T: Scalar>(x: &[T], layer: &DenseLayer<T>) -> Vec<T> {
    let mut z = vec![T::zero(); layer.out_dim()];
    dense_forward_into(x, layer, &mut z);
    z
}

pub fn dense_forward_into<T: Scalar>(x: &[T], layer: &DenseLayer<T>, z: &mut [T]) {
    assert_eq!(x.len(), layer.in_dim(), "dense input length mismatch");
    assert_eq!(z.len(), layer.out_dim());
    for (o, zo) in z.iter_mut().enumerate() {
        let row = layer.weights.row(o);
        let mut acc = layer.bias[o];
        for (w, xv) in row.iter().zip(x) {
            acc = acc + *w * *xv;
        }
        *zo = acc;
    }
}

/// Gradients of `z = W x + b`: accumulates `dW += dz ⊗ x`, `db += dz`,
/// `dx += Wᵀ dz`.
pub fn dense_backward<T: Scalar>(
    x: &[T],
    layer: &DenseLayer<T>,
    dz: &[T],
    grad: &mut DenseLayer<T>,
    dx: &mut [T],
) {
    for (o, &g) in dz.iter().enumerate() {
        grad.bias[o] = grad.bias[o] + g;
        let grow = grad.weights.row_mut(o);
        for (gw, &xv) in grow.iter_mut().zip(x) {
            *gw = *gw + g * xv;
        }
        let wrow = layer.weights.row(o);
        for (dxi, &w) in dx.iter_mut().zip(wrow) {
            *dxi = *dxi + g * w;
        }
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Gradient pass-through of ReLU given the pre-activation `z`.
pub fn relu_backward<T: Scalar>(z: &[T], dy: &mut [T]) {
    for (d, &zv) in dy.iter_mut().zip(z) {
        if zv <= T::zero() {
            *d = T::zero();
        }
    }
}

/// Exact (erf-based) GELU: `x * Phi(x)` with `Phi` the standard normal CDF.
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    x * half * (T::one() + (x * inv_sqrt2).erf())
}

/// Derivative of exact GELU: `Phi(x) + x * phi(x)`.
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    let phi_cdf = half * (T::one() + (x * inv_sqrt2).erf());
    let pdf = T::from_f64((-0.5 * x.as_f64() * x.as_f64()).exp() / (2.0 * std::f64::consts::PI).sqrt());
    phi_cdf + x * pdf
}

// ---------------------------------------------------------------------------
// Layer normalization (over the channel axis, per position)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn zeros(dim: usize) -> Self {
        LayerNorm {
            gamma: vec![T::zero(); dim],
            beta: vec![T::zero(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        LayerNorm {
            gamma: vec![T::one(); dim],
            beta: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Normalize one channel vector:
/// `y = gamma * (x - mean) / sqrt(var + eps) + beta` with population
/// variance. Also writes the normalized values `xhat` and returns the
/// reciprocal of the guarded standard deviation for the backward pass.
pub fn layernorm_forward<T: Scalar>(
    x: &[T],
    ln: &LayerNorm<T>,
    y: &mut [T],
    xhat: &mut [T],
) -> T {
    let n = T::from_f64(x.len() as f64);
    let mut mean = T::zero();
    for &v in x {
        mean = mean + v;
    }
    mean = mean / n;
    let mut var = T::zero();
    for &v in x {
        let d = v - mean;
        var = var + d * d;
    }
    var = var / n;
    let inv_std = T::one() / (var + T::from_f64(LAYERNORM_EPS)).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv_std;
        y[i] = ln.gamma[i] * xhat[i] + ln.beta[i];
    }
    inv_std
}

/// Convenience wrapper returning the normalized vector.
pub fn layernorm<T: Scalar>(x: &[T], gamma: &[T], beta: &[T]) -> Vec<T> {
    let ln = LayerNorm {
        gamma: gamma.to_vec(),
        beta: beta.to_vec(),
    };
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    layernorm_forward(x, &ln, &mut y, &mut xhat);
    y
}

/// Backward through layer normalization for one position.
/// `dx[i] = inv_std * (dxhat[i] - mean(dxhat) - xhat[i] * mean(dxhat ⊙ xhat))`.
pub fn layernorm_backward<T: Scalar>(
    xhat: &[T],
    inv_std: T,
    ln: &LayerNorm<T>,
    dy: &[T],
    grad: &mut LayerNorm<T>,
    dx: &mut [T],
) {
    let n = T::from_f64(xhat.len() as f64);
    let mut sum_dxhat = T::zero();
    let mut sum_dxhat_xhat = T::zero();
    for i in 0..xhat.len() {
        grad.beta[i] = grad.beta[i] + dy[i];
        grad.gamma[i] = grad.gamma[i] + dy[i] * xhat[i];
        let dxhat = dy[i] * ln.gamma[i];
        sum_dxhat = sum_dxhat + dxhat;
        sum_dxhat_xhat = sum_dxhat_xhat + dxhat * xhat[i];
    }
    let mean_dxhat = sum_dxhat / n;
    let mean_dxhat_xhat = sum_dxhat_xhat / n;
    for i in 0..xhat.len() {
        let dxhat = dy[i] * ln.gamma[i];
        dx[i] = dx[i] + inv_std * (dxhat - mean_dxhat - xhat[i] * mean_dxhat_xhat);
    }
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

/// Numerically stable softmax (max-subtracted) over one logit vector.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let mut out = z.to_vec();
    softmax_inplace(&mut out);
    out
}

pub fn softmax_inplace<T: Scalar>(z: &mut [T]) {
    let mut max = z[0];
    for &v in z.iter().skip(1) {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in z.iter_mut() {
        *v = *v / sum;
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout. In training mode each element is kept with
/// probability `1 - p` and scaled by `1/(1 - p)`; the returned mask holds
/// those scale factors (0 for dropped elements) for the backward pass.
/// In inference mode this is the identity and the mask is all ones.
pub fn dropout<T: Scalar>(
    x: &mut [T],
    p: f64,
    training: bool,
    rng: &mut SplitMix64,
) -> Vec<T> {
    assert!((0.0..1.0).contains(&p), "dropout rate must be in [0, 1)");
    if !training || p == 0.0 {
        return vec![T::one(); x.len()];
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - p));
    let mut mask = vec![T::zero(); x.len()];
    for (xi, mi) in x.iter_mut().zip(&mut mask) {
        if rng.next_f64() < p {
            *xi = T::zero();
        } else {
            *mi = keep_scale;
            *xi = *xi * keep_scale;
        }
    }
    mask
}

/// Backward through dropout: multiply by the stored (already scaled) mask.
pub fn dropout_backward<T: Scalar>(mask: &[T], dy: &mut [T]) {
    for (d, &m) in dy.iter_mut().zip(mask) {
        *d = *d * m;
    }
}

// ---------------------------------------------------------------------------
// Flatten
// ---------------------------------------------------------------------------

/// Row-major flatten of `(len, dim)` into `len * dim`:
/// `out[t*dim + c] = x[t][c]`. Because `Mat` is row-major this is a
/// layout identity; the copy exists only to hand out an owned vector.
pub fn flatten<T: Scalar>(x: &Mat<T>) -> Vec<T> {
    x.data().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_with(kernel: Vec<f64>, bias: f64) -> Conv1dLayer<f64> {
        let k = kernel.len();
        Conv1dLayer {
            filters: 1,
            in_channels: 1,
            kernel: k,
            weights: kernel,
            bias: vec![bias],
        }
    }

    #[test]
    fn conv1d_hand_example() {
        // x = [1,2,3,4], kernel [1,0,-1], bias 0, same padding -> [-2,-2,-2,3]
        let x = Mat::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let y = conv1d_forward(&x, &conv_with(vec![1.0, 0.0, -1.0], 0.0));
        assert_eq!(y.data(), &[-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn conv1d_identity_kernel() {
        let x = Mat::from_vec(5, 1, vec![0.5, -1.0, 2.0, 0.0, 3.0]);
        let y = conv1d_forward(&x, &conv_with(vec![0.0, 1.0, 0.0], 0.0));
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv1d_zero_input_broadcasts_bias() {
        let x = Mat::<f64>::zeros(6, 1);
        let y = conv1d_forward(&x, &conv_with(vec![0.3, -0.4, 0.9], 1.25));
        assert!(y.data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn relu_examples() {
        let mut v = vec![-1.0, 0.0, 2.0];
        relu(&mut v);
        assert_eq!(v, vec![0.0, 0.0, 2.0]);
        let mut w = vec![0.5, 3.0];
        relu(&mut w);
        assert_eq!(w, vec![0.5, 3.0]);
        // idempotent
        let mut u = vec![-2.0, 4.0];
        relu(&mut u);
        let once = u.clone();
        relu(&mut u);
        assert_eq!(u, once);
    }

    #[test]
    fn layernorm_examples() {
        // constant vector -> zeros
        let y = layernorm(&[3.0f64, 3.0, 3.0], &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert!(y.iter().all(|&v| v.abs() < 1e-12));
        // gamma = 0 -> beta
        let y = layernorm(&[1.0f64, 9.0], &[0.0, 0.0], &[0.7, -0.2]);
        assert_eq!(y, vec![0.7, -0.2]);
        // [1, 3] -> approx [-1, 1] shrunk slightly by eps
        let y = layernorm(&[1.0f64, 3.0], &[1.0, 1.0], &[0.0, 0.0]);
        assert!((y[0] + 0.9999995).abs() < 1e-7, "{}", y[0]);
        assert!((y[1] - 0.9999995).abs() < 1e-7, "{}", y[1]);
    }

    #[test]
    fn gelu_examples() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(10.0f64) - 10.0).abs() < 1e-6);
        assert!((gelu(1.0f64) - 0.841345).abs() < 1e-6);
    }

    #[test]
    fn dense_examples() {
        // identity
        let ident = DenseLayer {
            weights: Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
            bias: vec![0.0, 0.0],
        };
        assert_eq!(dense_forward(&[3.0, -1.0], &ident), vec![3.0, -1.0]);
        // zero weights -> bias
        let b = DenseLayer {
            weights: Mat::zeros(2, 3),
            bias: vec![4.0, -2.0],
        };
        assert_eq!(dense_forward(&[1.0, 1.0, 1.0], &b), vec![4.0, -2.0]);
        // W=[[1,2],[3,4]], b=[1,1], x=[1,1] -> [4,8]
        let l = DenseLayer {
            weights: Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]),
            bias: vec![1.0, 1.0],
        };
        assert_eq!(dense_forward(&[1.0, 1.0], &l), vec![4.0, 8.0]);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        for &v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        // [ln 1, ln 2, ln 3] -> [1/6, 1/3, 1/2]
        let p = softmax(&[1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()]);
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12);
        // shift invariance
        let a = softmax(&[0.3f64, -1.2, 5.0]);
        let b = softmax(&[0.3f64 + 17.5, -1.2 + 17.5, 5.0 + 17.5]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let sum: f64 = a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = SplitMix64::new(1);
        let mut x = vec![1.0f64; 8];
        let mask = dropout(&mut x, 0.5, false, &mut rng);
        assert_eq!(x, vec![1.0; 8]);
        assert_eq!(mask, vec![1.0; 8]);

        let mut y = vec![1.0f64; 8];
        let mask = dropout(&mut y, 0.0, true, &mut rng);
        assert_eq!(y, vec![1.0; 8]);
        assert_eq!(mask, vec![1.0; 8]);
    }

    #[test]
    fn dropout_expectation() {
        // mean of dropout(1) over 1e5 elements stays within 3 standard
        // errors of 1; kept values are 1/(1-p), so var = p/(1-p)
        let mut rng = SplitMix64::new(2024);
        let n = 100_000;
        let p = 0.1;
        let mut x = vec![1.0f64; n];
        dropout(&mut x, p, true, &mut rng);
        let mean: f64 = x.iter().sum::<f64>() / n as f64;
        let se = (p / (1.0 - p) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, 3se {}", 3.0 * se);
    }

    #[test]
    fn flatten_layout() {
        let x = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten(&x), vec![1.0, 2.0, 3.0, 4.0]);
        let z = Mat::<f64>::zeros(3, 4);
        assert!(flatten(&z).iter().all(|&v| v == 0.0));
        assert_eq!(flatten(&z).len(), 12);
    }
}
