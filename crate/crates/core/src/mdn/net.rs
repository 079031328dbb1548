//! Dense-layer kernels for the MDN trunk and heads.
//!
//! All buffers are flat row-major `f64` slices with explicit dimensions.
//! Loops run in a fixed order with fixed-width accumulators, so results
//! are bit-identical across runs.

/// Dot product with eight independent accumulator lanes; the fixed lane
/// structure keeps the reduction order stable while letting the compiler
/// vectorize.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let mut chunks_a = a.chunks_exact(8);
    let mut chunks_b = b.chunks_exact(8);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        for l in 0..8 {
            lanes[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y;
    }
    let s01 = lanes[0] + lanes[1];
    let s23 = lanes[2] + lanes[3];
    let s45 = lanes[4] + lanes[5];
    let s67 = lanes[6] + lanes[7];
    ((s01 + s23) + (s45 + s67)) + tail
}

/// `out += scale · x`.
#[inline]
pub(crate) fn axpy(out: &mut [f64], scale: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += scale * v;
    }
}

/// Affine layer forward: `out[r,o] = bias[o] + Σ_i input[r,i]·weight[o,i]`
/// for `rows` rows. `weight` is `out_dim × in_dim` row-major.
pub(crate) fn linear_forward(
    input: &[f64],
    rows: usize,
    in_dim: usize,
    weight: &[f64],
    bias: &[f64],
    out_dim: usize,
    out: &mut [f64],
) {
    debug_assert!(input.len() >= rows * in_dim);
    debug_assert_eq!(weight.len(), out_dim * in_dim);
    debug_assert_eq!(bias.len(), out_dim);
    debug_assert!(out.len() >= rows * out_dim);
    for r in 0..rows {
        let x_row = &input[r * in_dim..(r + 1) * in_dim];
        let out_row = &mut out[r * out_dim..(r + 1) * out_dim];
        for (o, out_v) in out_row.iter_mut().enumerate() {
            *out_v = bias[o] + dot(x_row, &weight[o * in_dim..(o + 1) * in_dim]);
        }
    }
}

/// Affine layer backward. Accumulates into `d_weight`/`d_bias` and, when
/// given, into `d_input` (which the caller zeroes beforehand).
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    input: &[f64],
    rows: usize,
    in_dim: usize,
    weight: &[f64],
    out_dim: usize,
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    debug_assert!(input.len() >= rows * in_dim);
    debug_assert_eq!(weight.len(), out_dim * in_dim);
    debug_assert_eq!(d_weight.len(), out_dim * in_dim);
    debug_assert_eq!(d_bias.len(), out_dim);
    for r in 0..rows {
        let x_row = &input[r * in_dim..(r + 1) * in_dim];
        let dy_row = &d_out[r * out_dim..(r + 1) * out_dim];
        for (o, &g) in dy_row.iter().enumerate() {
            axpy(&mut d_weight[o * in_dim..(o + 1) * in_dim], g, x_row);
            d_bias[o] += g;
        }
        if let Some(dx) = d_input.as_deref_mut() {
            let dx_row = &mut dx[r * in_dim..(r + 1) * in_dim];
            for (o, &g) in dy_row.iter().enumerate() {
                axpy(dx_row, g, &weight[o * in_dim..(o + 1) * in_dim]);
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// SiLU forward over `n` values: `h = z·σ(z)`; the sigmoid is stored for
/// the backward pass.
pub(crate) fn silu_forward(z: &[f64], n: usize, h: &mut [f64], sig: &mut [f64]) {
    for i in 0..n {
        let s = sigmoid(z[i]);
        sig[i] = s;
        h[i] = z[i] * s;
    }
}

/// SiLU derivative from stored pre-activation and sigmoid:
/// `σ(z)·(1 + z·(1 − σ(z)))`.
#[inline]
pub(crate) fn silu_grad(z: f64, sig: f64) -> f64 {
    sig * (1.0 + z * (1.0 - sig))
}

/// Numerically stable `log(1 + eˣ)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        libm::exp(x)
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Stable log-sum-exp; returns negative infinity for an empty or all
/// negative-infinite input.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}
