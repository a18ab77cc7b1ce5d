use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{self, dot, leaky_relu, leaky_relu_grad};
use super::sinc::{self, Band, BandJacobian};
use super::tensor::Tensor;
use crate::error::{config_err, invalid, Result};
use crate::rng;

/// Architecture hyperparameters. Everything else about the network follows
/// from these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub input_window_len: usize,
    pub sample_rate: u32,
    pub n_filters: usize,
    pub sinc_kernel_len: usize,
    pub sinc_pool: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    pub conv_pool: usize,
    pub hidden_dim: usize,
    pub dvector_dim: usize,
    pub num_classes: usize,
    pub leaky_slope: f64,
    pub layer_norm_eps: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_window_len: 3200,
            sample_rate: 16000,
            n_filters: 32,
            sinc_kernel_len: 129,
            sinc_pool: 4,
            conv_channels: 32,
            conv_kernel: 5,
            conv_pool: 4,
            hidden_dim: 256,
            dvector_dim: 128,
            num_classes: 20,
            leaky_slope: 0.2,
            layer_norm_eps: 1e-5,
        }
    }
}

/// Layer sizes derived from an [`ArchConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub sinc_out: usize,
    pub pool1: usize,
    pub conv_out: usize,
    pub pool2: usize,
    pub flat: usize,
}

impl ArchConfig {
    pub fn dims(&self) -> Result<Dims> {
        let positive = [
            ("input_window_len", self.input_window_len),
            ("sample_rate", self.sample_rate as usize),
            ("n_filters", self.n_filters),
            ("sinc_kernel_len", self.sinc_kernel_len),
            ("sinc_pool", self.sinc_pool),
            ("conv_channels", self.conv_channels),
            ("conv_kernel", self.conv_kernel),
            ("conv_pool", self.conv_pool),
            ("hidden_dim", self.hidden_dim),
            ("dvector_dim", self.dvector_dim),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_err!("architecture field {name} must be positive"));
            }
        }
        if self.sinc_kernel_len % 2 == 0 {
            return Err(config_err!(
                "sinc_kernel_len must be odd, got {}",
                self.sinc_kernel_len
            ));
        }
        if !(self.layer_norm_eps > 0.0) || !self.leaky_slope.is_finite() {
            return Err(config_err!("layer_norm_eps must be > 0 and leaky_slope finite"));
        }
        if (self.sample_rate as f64) / 2.0 <= 2.0 * sinc::NYQUIST_MARGIN_HZ + sinc::MIN_LOW_HZ {
            return Err(config_err!("sample_rate {} too low", self.sample_rate));
        }
        let sinc_out = self
            .input_window_len
            .checked_sub(self.sinc_kernel_len - 1)
            .filter(|&n| n > 0)
            .ok_or_else(|| config_err!("input window shorter than sinc kernel"))?;
        let pool1 = sinc_out / self.sinc_pool;
        let conv_out = pool1
            .checked_sub(self.conv_kernel - 1)
            .filter(|&n| n > 0)
            .ok_or_else(|| config_err!("feature map shorter than conv kernel"))?;
        let pool2 = conv_out / self.conv_pool;
        if pool1 == 0 || pool2 == 0 {
            return Err(config_err!("pooling leaves an empty feature map"));
        }
        Ok(Dims {
            sinc_out,
            pool1,
            conv_out,
            pool2,
            flat: self.conv_channels * pool2,
        })
    }
}

/// All learnable tensors. Also used as the container for parameter
/// gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Raw low-cutoff parameter per sinc filter.
    pub sinc_low: Tensor,
    /// Raw band-width parameter per sinc filter.
    pub sinc_band: Tensor,
    pub ln_gain: Tensor,
    pub ln_bias: Tensor,
    /// `[conv_channels, n_filters, conv_kernel]`
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    /// `[hidden_dim, flat]`
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    /// `[dvector_dim, hidden_dim]`
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
    /// `[num_classes, dvector_dim]`
    pub head_w: Tensor,
    pub head_b: Tensor,
}

pub const PARAM_NAMES: [&str; 12] = [
    "sinc_low", "sinc_band", "ln_gain", "ln_bias", "conv_w", "conv_b", "dense1_w", "dense1_b",
    "dense2_w", "dense2_b", "head_w", "head_b",
];

impl Params {
    pub fn zeros(arch: &ArchConfig, dims: &Dims) -> Self {
        let (f, c, k) = (arch.n_filters, arch.conv_channels, arch.conv_kernel);
        let (h, d, m) = (arch.hidden_dim, arch.dvector_dim, arch.num_classes);
        Self {
            sinc_low: Tensor::zeros(&[f]),
            sinc_band: Tensor::zeros(&[f]),
            ln_gain: Tensor::zeros(&[f]),
            ln_bias: Tensor::zeros(&[f]),
            conv_w: Tensor::zeros(&[c, f, k]),
            conv_b: Tensor::zeros(&[c]),
            dense1_w: Tensor::zeros(&[h, dims.flat]),
            dense1_b: Tensor::zeros(&[h]),
            dense2_w: Tensor::zeros(&[d, h]),
            dense2_b: Tensor::zeros(&[d]),
            head_w: Tensor::zeros(&[m, d]),
            head_b: Tensor::zeros(&[m]),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 12] {
        [
            &self.sinc_low,
            &self.sinc_band,
            &self.ln_gain,
            &self.ln_bias,
            &self.conv_w,
            &self.conv_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
            &self.head_w,
            &self.head_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.sinc_low,
            &mut self.sinc_band,
            &mut self.ln_gain,
            &mut self.ln_bias,
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_NAMES.into_iter().zip(self.tensors())
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &Params) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            ops::axpy(factor, o.data(), t.data_mut());
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn bit_eq(&self, other: &Params) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .all(|(a, b)| a.bit_eq(b))
    }
}

/// Fixed-length mono waveform window, the model's input unit.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioChunk {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioChunk {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("chunk sample {i} is not finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Speaker embedding: the output of the MLP and the input of the head.
#[derive(Clone, Debug, PartialEq)]
pub struct DVector {
    pub values: Vec<f64>,
}

impl DVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("d-vector contains non-finite values"));
        }
        Ok(Self { values })
    }

    pub fn distance(&self, other: &DVector) -> f64 {
        euclidean(&self.values, &other.values)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The three-part speaker recognizer: a sinc front end plus convolution
/// (submodel 1), an MLP producing d-vectors (submodel 2) and a softmax
/// classification head (submodel 3).
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerModel {
    arch: ArchConfig,
    dims: Dims,
    pub params: Params,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    input: Vec<f64>,
    kernels: Vec<f64>,
    bands: Vec<(Band, BandJacobian)>,
    pool1_idx: Vec<usize>,
    ln_xhat: Vec<f64>,
    ln_inv_std: Vec<f64>,
    ln_out: Vec<f64>,
    act1: Vec<f64>,
    pool2_idx: Vec<usize>,
    pool2_out: Vec<f64>,
    flat: Vec<f64>,
    h1_pre: Vec<f64>,
    h1: Vec<f64>,
    d_pre: Vec<f64>,
    dvector: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl Trace {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn dvector(&self) -> &[f64] {
        &self.dvector
    }
}

impl SpeakerModel {
    /// Randomly initialized model: mel-spaced sinc bands, He-scaled weights,
    /// zero biases, unit layer-norm gains.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        let dims = arch.dims()?;
        let mut params = Params::zeros(&arch, &dims);
        let sr = arch.sample_rate as f64;
        for (i, band) in sinc::mel_bands(arch.n_filters, sr).into_iter().enumerate() {
            let (a, b) = sinc::raw_from_band(band, sr);
            params.sinc_low.data_mut()[i] = a;
            params.sinc_band.data_mut()[i] = b;
        }
        params.ln_gain.data_mut().fill(1.0);
        let mut r = rng::rng(seed);
        let mut fill = |t: &mut Tensor, fan_in: usize, gain: f64| {
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("valid std");
            for v in t.data_mut() {
                *v = normal.sample(&mut r);
            }
        };
        fill(&mut params.conv_w, arch.n_filters * arch.conv_kernel, 2.0);
        fill(&mut params.dense1_w, dims.flat, 2.0);
        fill(&mut params.dense2_w, arch.hidden_dim, 2.0);
        fill(&mut params.head_w, arch.dvector_dim, 1.0);
        Ok(Self { arch, dims, params })
    }

    /// Rebuilds a model from explicit parameters, checking every shape.
    pub fn from_params(arch: ArchConfig, params: Params) -> Result<Self> {
        let dims = arch.dims()?;
        let reference = Params::zeros(&arch, &dims);
        for ((name, t), r) in params.named().zip(reference.tensors()) {
            if t.shape() != r.shape() {
                return Err(invalid!(
                    "parameter {name} has shape {:?}, architecture needs {:?}",
                    t.shape(),
                    r.shape()
                ));
            }
        }
        Ok(Self { arch, dims, params })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn input_window_len(&self) -> usize {
        self.arch.input_window_len
    }

    pub fn dvector_dim(&self) -> usize {
        self.arch.dvector_dim
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn sample_rate(&self) -> u32 {
        self.arch.sample_rate
    }

    /// Current cutoff band of every sinc filter.
    pub fn bands(&self) -> Vec<Band> {
        self.bands_with_jacobian().into_iter().map(|(b, _)| b).collect()
    }

    fn bands_with_jacobian(&self) -> Vec<(Band, BandJacobian)> {
        let sr = self.arch.sample_rate as f64;
        self.params
            .sinc_low
            .data()
            .iter()
            .zip(self.params.sinc_band.data())
            .map(|(&a, &b)| sinc::band_from_raw(a, b, sr))
            .collect()
    }

    /// Flattened `[n_filters, sinc_kernel_len]` front-end kernels.
    pub fn sinc_kernels(&self) -> Vec<f64> {
        let sr = self.arch.sample_rate as f64;
        self.bands()
            .into_iter()
            .flat_map(|b| sinc::band_pass_kernel(b, sr, self.arch.sinc_kernel_len))
            .collect()
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_window_len {
            return Err(invalid!(
                "input has {} samples, model window is {}",
                x.len(),
                self.arch.input_window_len
            ));
        }
        Ok(())
    }

    pub(crate) fn check_class(&self, target: usize) -> Result<()> {
        if target >= self.arch.num_classes {
            return Err(invalid!(
                "class index {target} out of range for {} classes",
                self.arch.num_classes
            ));
        }
        Ok(())
    }

    fn check_dvector(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.arch.dvector_dim {
            return Err(invalid!(
                "d-vector has {} entries, model expects {}",
                d.len(),
                self.arch.dvector_dim
            ));
        }
        Ok(())
    }

    /// Class probabilities for one chunk.
    pub fn forward_full(&self, chunk: &AudioChunk) -> Result<Vec<f64>> {
        let d = self.forward_dvector(chunk)?;
        self.forward_head(&d)
    }

    /// Output of the first two submodels.
    pub fn forward_dvector(&self, chunk: &AudioChunk) -> Result<DVector> {
        self.check_input(chunk.samples())?;
        Ok(DVector {
            values: self.embed(chunk.samples()),
        })
    }

    /// Classification head: one dense layer and a softmax.
    pub fn forward_head(&self, d: &DVector) -> Result<Vec<f64>> {
        self.check_dvector(&d.values)?;
        Ok(ops::softmax(&self.head_logits(&d.values)))
    }

    /// Probabilities for a raw sample slice (same path as [`Self::forward_full`]).
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(ops::softmax(&self.head_logits(&self.embed(x))))
    }

    /// Head probabilities for a raw d-vector slice.
    pub fn head_probabilities(&self, d: &[f64]) -> Result<Vec<f64>> {
        self.check_dvector(d)?;
        Ok(ops::softmax(&self.head_logits(d)))
    }

    pub fn embedding(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.embed(x))
    }

    /// Predicted class of one window (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(ops::argmax(&self.probabilities(x)?))
    }

    fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.trace_front(x).dvector
    }

    fn head_logits(&self, d: &[f64]) -> Vec<f64> {
        let dd = self.arch.dvector_dim;
        let w = self.params.head_w.data();
        self.params
            .head_b
            .data()
            .iter()
            .enumerate()
            .map(|(o, b)| b + dot(&w[o * dd..(o + 1) * dd], d))
            .collect()
    }

    /// Full forward pass keeping every intermediate needed by
    /// [`Self::backward`].
    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut t = self.trace_front(x);
        t.logits = self.head_logits(&t.dvector);
        t.probs = ops::softmax(&t.logits);
        Ok(t)
    }

    fn trace_front(&self, x: &[f64]) -> Trace {
        let a = &self.arch;
        let dims = self.dims;
        let (nf, klen) = (a.n_filters, a.sinc_kernel_len);
        let slope = a.leaky_slope;
        let bands = self.bands_with_jacobian();
        let sr = a.sample_rate as f64;
        let kernels: Vec<f64> = bands
            .iter()
            .flat_map(|(b, _)| sinc::band_pass_kernel(*b, sr, klen))
            .collect();

        // Sinc convolution, max pool and per-channel layer norm.
        let mut conv = vec![0.0; dims.sinc_out];
        let mut pool1_idx = vec![0usize; nf * dims.pool1];
        let mut pooled = vec![0.0; nf * dims.pool1];
        let mut ln_xhat = vec![0.0; nf * dims.pool1];
        let mut ln_out = vec![0.0; nf * dims.pool1];
        let mut act1 = vec![0.0; nf * dims.pool1];
        let mut ln_inv_std = vec![0.0; nf];
        let gain = self.params.ln_gain.data();
        let bias = self.params.ln_bias.data();
        let p1 = dims.pool1;
        for f in 0..nf {
            conv.fill(0.0);
            ops::correlate_acc(x, &kernels[f * klen..(f + 1) * klen], &mut conv);
            let range = f * p1..(f + 1) * p1;
            ops::max_pool(
                &conv,
                a.sinc_pool,
                &mut pooled[range.clone()],
                &mut pool1_idx[range.clone()],
            );
            let row = &pooled[range.clone()];
            let mean = row.iter().sum::<f64>() / p1 as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p1 as f64;
            let inv = 1.0 / (var + a.layer_norm_eps).sqrt();
            ln_inv_std[f] = inv;
            for i in range {
                let xh = (pooled[i] - mean) * inv;
                ln_xhat[i] = xh;
                let y = gain[f] * xh + bias[f];
                ln_out[i] = y;
                act1[i] = leaky_relu(y, slope);
            }
        }

        // Standard convolution, max pool, activation.
        let (nc, ck) = (a.conv_channels, a.conv_kernel);
        let p2 = dims.pool2;
        let w = self.params.conv_w.data();
        let cb = self.params.conv_b.data();
        let mut conv2 = vec![0.0; dims.conv_out];
        let mut pool2_idx = vec![0usize; nc * p2];
        let mut pool2_out = vec![0.0; nc * p2];
        for c in 0..nc {
            conv2.fill(cb[c]);
            for f in 0..nf {
                let kern = &w[(c * nf + f) * ck..(c * nf + f + 1) * ck];
                ops::correlate_acc(&act1[f * p1..(f + 1) * p1], kern, &mut conv2);
            }
            ops::max_pool(
                &conv2,
                a.conv_pool,
                &mut pool2_out[c * p2..(c + 1) * p2],
                &mut pool2_idx[c * p2..(c + 1) * p2],
            );
        }
        let flat: Vec<f64> = pool2_out.iter().map(|&v| leaky_relu(v, slope)).collect();

        let h1_pre = dense(&self.params.dense1_w, &self.params.dense1_b, &flat);
        let h1: Vec<f64> = h1_pre.iter().map(|&v| leaky_relu(v, slope)).collect();
        let d_pre = dense(&self.params.dense2_w, &self.params.dense2_b, &h1);
        let dvector: Vec<f64> = d_pre.iter().map(|&v| leaky_relu(v, slope)).collect();

        Trace {
            input: x.to_vec(),
            kernels,
            bands,
            pool1_idx,
            ln_xhat,
            ln_inv_std,
            ln_out,
            act1,
            pool2_idx,
            pool2_out,
            flat,
            h1_pre,
            h1,
            d_pre,
            dvector,
            logits: Vec::new(),
            probs: Vec::new(),
        }
    }

    /// Reverse pass from an upstream gradient on the logits.
    ///
    /// Accumulates parameter gradients into `param_grads` when given and
    /// returns the gradient with respect to the input samples when
    /// `want_input` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_logits: &[f64],
        mut param_grads: Option<&mut Params>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let a = &self.arch;
        let dims = self.dims;
        let slope = a.leaky_slope;
        let p = &self.params;

        // Head.
        let grad_d = dense_backward(
            &p.head_w,
            &trace.dvector,
            grad_logits,
            param_grads.as_deref_mut().map(|g| (&mut g.head_w, &mut g.head_b)),
        );
        let grad_d_pre: Vec<f64> = grad_d
            .iter()
            .zip(&trace.d_pre)
            .map(|(g, &z)| g * leaky_relu_grad(z, slope))
            .collect();
        let grad_h1 = dense_backward(
            &p.dense2_w,
            &trace.h1,
            &grad_d_pre,
            param_grads.as_deref_mut().map(|g| (&mut g.dense2_w, &mut g.dense2_b)),
        );
        let grad_h1_pre: Vec<f64> = grad_h1
            .iter()
            .zip(&trace.h1_pre)
            .map(|(g, &z)| g * leaky_relu_grad(z, slope))
            .collect();
        let grad_flat = dense_backward(
            &p.dense1_w,
            &trace.flat,
            &grad_h1_pre,
            param_grads.as_deref_mut().map(|g| (&mut g.dense1_w, &mut g.dense1_b)),
        );

        // Pooled conv output -> conv2 pre-pool positions. Only the argmax of
        // each window carries gradient, so the convolution backward visits
        // those positions only.
        let (nf, nc, ck) = (a.n_filters, a.conv_channels, a.conv_kernel);
        let (p1, p2) = (dims.pool1, dims.pool2);
        let w = p.conv_w.data();
        let mut grad_act1 = vec![0.0; nf * p1];
        let mut grad_conv_w = param_grads.as_ref().map(|_| vec![0.0; w.len()]);
        let mut grad_conv_b = param_grads.as_ref().map(|_| vec![0.0; nc]);
        for c in 0..nc {
            for i in 0..p2 {
                let idx = c * p2 + i;
                let g = grad_flat[idx] * leaky_relu_grad(trace.pool2_out[idx], slope);
                if g == 0.0 {
                    continue;
                }
                let t = trace.pool2_idx[idx];
                if let Some(gb) = grad_conv_b.as_mut() {
                    gb[c] += g;
                }
                for f in 0..nf {
                    let wo = (c * nf + f) * ck;
                    let ao = f * p1 + t;
                    ops::axpy(g, &w[wo..wo + ck], &mut grad_act1[ao..ao + ck]);
                    if let Some(gw) = grad_conv_w.as_mut() {
                        ops::axpy(g, &trace.act1[ao..ao + ck], &mut gw[wo..wo + ck]);
                    }
                }
            }
        }

        // Activation and layer norm.
        let gain = p.ln_gain.data();
        let mut grad_pool1 = vec![0.0; nf * p1];
        let mut grad_gain = vec![0.0; nf];
        let mut grad_bias = vec![0.0; nf];
        for f in 0..nf {
            let r = f * p1..(f + 1) * p1;
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for i in r.clone() {
                let gy = grad_act1[i] * leaky_relu_grad(trace.ln_out[i], slope);
                grad_gain[f] += gy * trace.ln_xhat[i];
                grad_bias[f] += gy;
                let gxh = gy * gain[f];
                grad_pool1[i] = gxh;
                sum_g += gxh;
                sum_gx += gxh * trace.ln_xhat[i];
            }
            let n = p1 as f64;
            let inv = trace.ln_inv_std[f];
            for i in r {
                grad_pool1[i] = inv / n * (n * grad_pool1[i] - sum_g - trace.ln_xhat[i] * sum_gx);
            }
        }

        // Sinc layer. Again only pooled argmax positions are non-zero.
        let klen = a.sinc_kernel_len;
        let mut grad_input = want_input.then(|| vec![0.0; a.input_window_len]);
        let mut grad_kernels = param_grads.as_ref().map(|_| vec![0.0; nf * klen]);
        for f in 0..nf {
            let kern = &trace.kernels[f * klen..(f + 1) * klen];
            for i in 0..p1 {
                let g = grad_pool1[f * p1 + i];
                if g == 0.0 {
                    continue;
                }
                let t = trace.pool1_idx[f * p1 + i];
                if let Some(gx) = grad_input.as_mut() {
                    ops::axpy(g, kern, &mut gx[t..t + klen]);
                }
                if let Some(gk) = grad_kernels.as_mut() {
                    ops::axpy(g, &trace.input[t..t + klen], &mut gk[f * klen..(f + 1) * klen]);
                }
            }
        }

        if let Some(grads) = param_grads {
            let sr = a.sample_rate as f64;
            let gk = grad_kernels.expect("allocated with param grads");
            for (f, (band, jac)) in trace.bands.iter().enumerate() {
                let (d_low, d_high) = sinc::band_pass_kernel_partials(*band, sr, klen);
                let row = &gk[f * klen..(f + 1) * klen];
                let g_low = dot(row, &d_low);
                let g_high = dot(row, &d_high);
                grads.sinc_low.data_mut()[f] += g_low * jac.dlow_da + g_high * jac.dhigh_da;
                grads.sinc_band.data_mut()[f] += g_high * jac.dhigh_db;
            }
            ops::axpy(1.0, &grad_gain, grads.ln_gain.data_mut());
            ops::axpy(1.0, &grad_bias, grads.ln_bias.data_mut());
            ops::axpy(1.0, &grad_conv_w.expect("allocated"), grads.conv_w.data_mut());
            ops::axpy(1.0, &grad_conv_b.expect("allocated"), grads.conv_b.data_mut());
        }
        grad_input
    }

    /// Gradient of `1 - p_target` with respect to the input chunk.
    pub fn grad_input_full(&self, chunk: &AudioChunk, target: usize) -> Result<Vec<f64>> {
        self.check_class(target)?;
        let trace = self.trace(chunk.samples())?;
        let gl = target_cost_grad_logits(trace.probs(), target);
        Ok(self.backward(&trace, &gl, None, true).expect("input gradient requested"))
    }

    /// Gradient of `1 - p_target` with respect to the d-vector.
    pub fn grad_input_head(&self, d: &DVector, target: usize) -> Result<Vec<f64>> {
        self.check_class(target)?;
        let probs = self.forward_head(d)?;
        let gl = target_cost_grad_logits(&probs, target);
        Ok(self.head_input_grad(&gl))
    }

    /// `W_head^T * grad_logits`
    pub(crate) fn head_input_grad(&self, grad_logits: &[f64]) -> Vec<f64> {
        let dd = self.arch.dvector_dim;
        let w = self.params.head_w.data();
        let mut g = vec![0.0; dd];
        for (o, &gl) in grad_logits.iter().enumerate() {
            ops::axpy(gl, &w[o * dd..(o + 1) * dd], &mut g);
        }
        g
    }

    /// Mean cross-entropy over a labelled batch and its gradient with respect
    /// to every parameter.
    pub fn grad_params(&self, batch: &[(&[f64], usize)]) -> Result<(f64, Params)> {
        if batch.is_empty() {
            return Err(invalid!("empty batch"));
        }
        let mut grads = Params::zeros(&self.arch, &self.dims);
        let mut loss = 0.0;
        for &(x, label) in batch {
            self.check_class(label)?;
            let trace = self.trace(x)?;
            let (l, gl) = cross_entropy_grad(trace.probs(), label);
            loss += l;
            self.backward(&trace, &gl, Some(&mut grads), false);
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        Ok((loss / n, grads))
    }

    /// Mean cross-entropy over a batch without gradients.
    pub fn batch_loss(&self, batch: &[(&[f64], usize)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(invalid!("empty batch"));
        }
        let mut loss = 0.0;
        for &(x, label) in batch {
            self.check_class(label)?;
            let p = self.probabilities(x)?;
            loss += cross_entropy_grad(&p, label).0;
        }
        Ok(loss / batch.len() as f64)
    }
}

fn dense(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let wd = w.data();
    b.data()
        .iter()
        .enumerate()
        .map(|(o, bias)| bias + dot(&wd[o * n_in..(o + 1) * n_in], x))
        .collect()
}

fn dense_backward(
    w: &Tensor,
    x: &[f64],
    grad_out: &[f64],
    grads: Option<(&mut Tensor, &mut Tensor)>,
) -> Vec<f64> {
    let n_in = x.len();
    let wd = w.data();
    let mut grad_in = vec![0.0; n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        if g != 0.0 {
            ops::axpy(g, &wd[o * n_in..(o + 1) * n_in], &mut grad_in);
        }
    }
    if let Some((gw, gb)) = grads {
        let gwd = gw.data_mut();
        for (o, &g) in grad_out.iter().enumerate() {
            if g != 0.0 {
                ops::axpy(g, x, &mut gwd[o * n_in..(o + 1) * n_in]);
            }
        }
        ops::axpy(1.0, grad_out, gb.data_mut());
    }
    grad_in
}

/// Gradient of `c = 1 - p_t` with respect to the logits:
/// `dc/dz_j = -p_t * (delta_tj - p_j)`.
pub fn target_cost_grad_logits(probs: &[f64], target: usize) -> Vec<f64> {
    let pt = probs[target];
    probs
        .iter()
        .enumerate()
        .map(|(j, &pj)| {
            let delta = if j == target { 1.0 } else { 0.0 };
            -pt * (delta - pj)
        })
        .collect()
}

/// Cross-entropy loss `-ln p_label` and its logit gradient `p - e_label`.
pub fn cross_entropy_grad(probs: &[f64], label: usize) -> (f64, Vec<f64>) {
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    (loss, g)
}
