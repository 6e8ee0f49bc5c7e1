//! Forward and backward kernels for the layers the tagger uses.
//!
//! Shapes are asserted at the boundary; a mismatch is a programming error
//! and panics. Backward functions accumulate weight gradients into the
//! caller-provided buffers and return the gradient w.r.t. the input.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Same-length 1-D convolution with zero padding.
///
/// `input` is `[T, Din]`, `weights` is `[k, Din, Dout]`, `bias` is `[Dout]`.
/// Output position `t` reads input rows `t + j - floor((k-1)/2)` for
/// `j in 0..k`; rows outside the sequence contribute zero.
pub fn conv1d<F: Scalar>(input: &Tensor<F>, weights: &Tensor<F>, bias: &Tensor<F>) -> Tensor<F> {
    let (t_len, d_in) = conv_dims(input, weights, bias);
    let k = weights.shape()[0];
    let d_out = weights.shape()[2];
    let offset = (k - 1) / 2;

    let mut out = Tensor::zeros(&[t_len, d_out]);
    let w = weights.data();
    for t in 0..t_len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(bias.data());
        for j in 0..k {
            let s = t + j;
            if s < offset || s - offset >= t_len {
                continue;
            }
            let x_row = input.row(s - offset);
            for (d, &xv) in x_row.iter().enumerate() {
                let w_row = &w[(j * d_in + d) * d_out..(j * d_in + d + 1) * d_out];
                for (o, &wv) in w_row.iter().enumerate() {
                    out_row[o] += xv * wv;
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv1d`]. Accumulates into `grad_weights` and
/// `grad_bias`, returns the gradient w.r.t. the input.
pub fn conv1d_backward<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    grad_out: &Tensor<F>,
    grad_weights: &mut Tensor<F>,
    grad_bias: &mut Tensor<F>,
) -> Tensor<F> {
    let (t_len, d_in) = conv_dims(input, weights, grad_bias);
    let k = weights.shape()[0];
    let d_out = weights.shape()[2];
    let offset = (k - 1) / 2;
    assert_eq!(grad_out.shape(), &[t_len, d_out], "grad_out shape mismatch");
    assert_eq!(grad_weights.shape(), weights.shape());

    let mut grad_in = Tensor::zeros(&[t_len, d_in]);
    let w = weights.data();
    let dw = grad_weights.data_mut();
    let db = grad_bias.data_mut();
    for t in 0..t_len {
        let dy = grad_out.row(t);
        for (o, &g) in dy.iter().enumerate() {
            db[o] += g;
        }
        for j in 0..k {
            let s = t + j;
            if s < offset || s - offset >= t_len {
                continue;
            }
            let s = s - offset;
            let x_row = input.row(s);
            let dx_row = grad_in.row_mut(s);
            for d in 0..d_in {
                let base = (j * d_in + d) * d_out;
                let w_row = &w[base..base + d_out];
                let dw_row = &mut dw[base..base + d_out];
                let xv = x_row[d];
                let mut acc = F::ZERO;
                for o in 0..d_out {
                    dw_row[o] += xv * dy[o];
                    acc += w_row[o] * dy[o];
                }
                dx_row[d] += acc;
            }
        }
    }
    grad_in
}

fn conv_dims<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> (usize, usize) {
    assert_eq!(
        weights.shape().len(),
        3,
        "conv weights must be [k, Din, Dout]"
    );
    assert_eq!(input.shape().len(), 2, "conv input must be [T, Din]");
    let (t_len, d_in) = (input.shape()[0], input.shape()[1]);
    assert!(t_len >= 1);
    assert_eq!(
        weights.shape()[1],
        d_in,
        "conv input/weight channel mismatch"
    );
    assert_eq!(
        bias.shape(),
        &[weights.shape()[2]],
        "conv bias shape mismatch"
    );
    (t_len, d_in)
}

/// Per-channel max over the time axis of a `[T, D]` tensor.
///
/// Returns the maxima and, for backward routing, the smallest `t` attaining
/// each maximum.
pub fn max_over_time<F: Scalar>(input: &Tensor<F>) -> (Vec<F>, Vec<usize>) {
    assert_eq!(input.shape().len(), 2);
    let (t_len, d) = (input.shape()[0], input.shape()[1]);
    assert!(t_len >= 1);
    let mut values = input.row(0).to_vec();
    let mut argmax = vec![0usize; d];
    for t in 1..t_len {
        let row = input.row(t);
        for (c, &v) in row.iter().enumerate() {
            if v > values[c] {
                values[c] = v;
                argmax[c] = t;
            }
        }
    }
    (values, argmax)
}

/// Routes each channel's output gradient to the recorded argmax position.
pub fn max_over_time_backward<F: Scalar>(
    grad_out: &[F],
    argmax: &[usize],
    t_len: usize,
) -> Tensor<F> {
    assert_eq!(grad_out.len(), argmax.len());
    let d = grad_out.len();
    let mut grad_in = Tensor::zeros(&[t_len, d]);
    for (c, (&g, &t)) in grad_out.iter().zip(argmax.iter()).enumerate() {
        grad_in.row_mut(t)[c] += g;
    }
    grad_in
}

/// `y = x W + b` for a single input vector. `w` is `[Din, Dout]`.
pub fn affine<F: Scalar>(input: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>) -> Tensor<F> {
    let (d_in, d_out) = affine_dims(input, w, b);
    let mut out = b.data().to_vec();
    let wd = w.data();
    for (d, &xv) in input.data().iter().enumerate() {
        let w_row = &wd[d * d_out..(d + 1) * d_out];
        for (o, &wv) in w_row.iter().enumerate() {
            out[o] += xv * wv;
        }
    }
    let _ = d_in;
    Tensor::scalar_vec(out)
}

/// Backward pass of [`affine`].
pub fn affine_backward<F: Scalar>(
    input: &Tensor<F>,
    w: &Tensor<F>,
    grad_out: &Tensor<F>,
    grad_w: &mut Tensor<F>,
    grad_b: &mut Tensor<F>,
) -> Tensor<F> {
    let (d_in, d_out) = affine_dims(input, w, grad_b);
    assert_eq!(grad_out.len(), d_out);
    let dy = grad_out.data();
    for (o, &g) in dy.iter().enumerate() {
        grad_b.data_mut()[o] += g;
    }
    let mut grad_in = vec![F::ZERO; d_in];
    let wd = w.data();
    let dwd = grad_w.data_mut();
    for (d, &xv) in input.data().iter().enumerate() {
        let w_row = &wd[d * d_out..(d + 1) * d_out];
        let dw_row = &mut dwd[d * d_out..(d + 1) * d_out];
        let mut acc = F::ZERO;
        for o in 0..d_out {
            dw_row[o] += xv * dy[o];
            acc += w_row[o] * dy[o];
        }
        grad_in[d] = acc;
    }
    Tensor::scalar_vec(grad_in)
}

fn affine_dims<F: Scalar>(input: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>) -> (usize, usize) {
    assert_eq!(w.shape().len(), 2, "affine weights must be [Din, Dout]");
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    assert_eq!(input.len(), d_in, "affine input dimension mismatch");
    assert_eq!(b.len(), d_out, "affine bias dimension mismatch");
    (d_in, d_out)
}

/// Elementwise `max(x, 0)`.
pub fn relu<F: Scalar>(input: &Tensor<F>) -> Tensor<F> {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(F::ZERO);
    }
    out
}

/// Backward pass of [`relu`] given the pre-activation input.
pub fn relu_backward<F: Scalar>(pre: &Tensor<F>, grad_out: &Tensor<F>) -> Tensor<F> {
    assert_eq!(pre.shape(), grad_out.shape());
    let mut grad_in = grad_out.clone();
    for (g, &x) in grad_in.data_mut().iter_mut().zip(pre.data().iter()) {
        if x <= F::ZERO {
            *g = F::ZERO;
        }
    }
    grad_in
}

/// Inverted dropout: zero with probability `p` and scale survivors by
/// `1/(1-p)` during training; identity at inference.
///
/// The returned mask (survivor scale or zero per element) drives backward.
pub fn dropout<F: Scalar, R: Rng>(
    input: &Tensor<F>,
    p: f64,
    training: bool,
    rng: &mut R,
) -> (Tensor<F>, Option<Vec<F>>) {
    assert!(
        (0.0..1.0).contains(&p),
        "dropout probability must be in [0, 1)"
    );
    if !training || p == 0.0 {
        return (input.clone(), None);
    }
    let scale = F::from_f64(1.0 / (1.0 - p));
    let mask: Vec<F> = input
        .data()
        .iter()
        .map(|_| {
            if rng.random::<f64>() < p {
                F::ZERO
            } else {
                scale
            }
        })
        .collect();
    let mut out = input.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(mask.iter()) {
        *v *= m;
    }
    (out, Some(mask))
}

pub fn dropout_backward<F: Scalar>(grad_out: &Tensor<F>, mask: Option<&[F]>) -> Tensor<F> {
    match mask {
        None => grad_out.clone(),
        Some(mask) => {
            let mut grad_in = grad_out.clone();
            for (g, &m) in grad_in.data_mut().iter_mut().zip(mask.iter()) {
                *g *= m;
            }
            grad_in
        }
    }
}

/// Adds i.i.d. `N(0, sigma^2)` noise during training; identity at inference.
/// Additive noise, so its backward is the identity.
pub fn gaussian_noise<F: Scalar, R: Rng>(
    input: &Tensor<F>,
    sigma: f64,
    training: bool,
    rng: &mut R,
) -> Tensor<F> {
    assert!(sigma >= 0.0);
    if !training || sigma == 0.0 {
        return input.clone();
    }
    let normal = Normal::new(0.0f64, sigma).expect("valid sigma");
    let mut out = input.clone();
    for v in out.data_mut() {
        *v += F::from_f64(normal.sample(rng));
    }
    out
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().fold(F::ZERO, |a, &b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy against a single gold class.
///
/// Returns the loss `-log softmax(logits)[gold]` and the gradient
/// `softmax(logits) - onehot(gold)`.
pub fn softmax_xent<F: Scalar>(logits: &[F], gold: usize) -> (F, Vec<F>) {
    assert!(
        gold < logits.len(),
        "gold index {} out of range {}",
        gold,
        logits.len()
    );
    let max = logits.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
    let mut sum = F::ZERO;
    for &v in logits {
        sum += (v - max).exp();
    }
    let log_sum = sum.ln();
    let loss = log_sum - (logits[gold] - max);
    let mut dlogits: Vec<F> = logits.iter().map(|&v| (v - max).exp() / sum).collect();
    dlogits[gold] -= F::ONE;
    (loss, dlogits)
}
