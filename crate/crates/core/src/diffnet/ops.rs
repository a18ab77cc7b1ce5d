//! Dense numeric kernels shared by the forward and backward passes.
//!
//! Everything works on flat row-major slices. Summation order is fixed by the
//! code below, so results are bit-reproducible for a given build.

/// Four-lane dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yy, xx) in y.iter_mut().zip(x) {
        *yy += alpha * xx;
    }
}

/// Valid cross-correlation accumulated into `out`:
/// `out[t] += sum_j kernel[j] * input[t + j]` for `t < out.len()`.
///
/// Requires `input.len() >= out.len() + kernel.len() - 1`.
pub fn correlate_acc(input: &[f64], kernel: &[f64], out: &mut [f64]) {
    let n = out.len();
    let klen = kernel.len();
    debug_assert!(input.len() + 1 >= n + klen);
    let mut j = 0;
    while j + 4 <= klen {
        let (k0, k1, k2, k3) = (kernel[j], kernel[j + 1], kernel[j + 2], kernel[j + 3]);
        let x0 = &input[j..j + n];
        let x1 = &input[j + 1..j + 1 + n];
        let x2 = &input[j + 2..j + 2 + n];
        let x3 = &input[j + 3..j + 3 + n];
        for t in 0..n {
            out[t] = out[t] + k0 * x0[t] + k1 * x1[t] + k2 * x2[t] + k3 * x3[t];
        }
        j += 4;
    }
    while j < klen {
        axpy(kernel[j], &input[j..j + n], out);
        j += 1;
    }
}

/// Gradient of [`correlate_acc`] with respect to its input, accumulated into
/// `grad_input`: `grad_input[t + j] += kernel[j] * grad_out[t]`.
///
/// `scratch` is reused to hold the zero-padded upstream gradient.
pub fn correlate_backward_input(
    grad_out: &[f64],
    kernel: &[f64],
    grad_input: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let klen = kernel.len();
    let n = grad_out.len();
    debug_assert_eq!(grad_input.len(), n + klen - 1);
    scratch.clear();
    scratch.resize(n + 2 * (klen - 1), 0.0);
    scratch[klen - 1..klen - 1 + n].copy_from_slice(grad_out);
    let reversed: Vec<f64> = kernel.iter().rev().copied().collect();
    correlate_acc(scratch, &reversed, grad_input);
}

/// Gradient of [`correlate_acc`] with respect to the kernel, accumulated into
/// `grad_kernel`: `grad_kernel[j] += sum_t grad_out[t] * input[t + j]`.
pub fn correlate_backward_kernel(input: &[f64], grad_out: &[f64], grad_kernel: &mut [f64]) {
    let n = grad_out.len();
    for (j, gk) in grad_kernel.iter_mut().enumerate() {
        *gk += dot(grad_out, &input[j..j + n]);
    }
}

/// Non-overlapping max pool. Writes the winning index of each window (first
/// maximum on ties) into `argmax`; a trailing partial window is dropped.
pub fn max_pool(input: &[f64], factor: usize, out: &mut [f64], argmax: &mut [usize]) {
    for (w, (o, a)) in out.iter_mut().zip(argmax.iter_mut()).enumerate() {
        let base = w * factor;
        let mut best = base;
        for i in base + 1..base + factor {
            if input[i] > input[best] {
                best = i;
            }
        }
        *o = input[best];
        *a = best;
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
