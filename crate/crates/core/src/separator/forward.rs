//! Encoder, TCN mask estimator and decoder on `[channels x frames]` arrays.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::config::{MaskActivation, NormKind, SeparatorConfig};
use super::weights::WeightStore;

const NORM_EPS: f64 = 1e-8;

/// How the matrix products inside a forward pass are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Sequential,
    /// Output channels are split across the rayon pool.
    Parallel,
}

fn matmul(w: ArrayView2<f32>, x: ArrayView2<f32>, mode: ExecMode) -> Array2<f32> {
    match mode {
        ExecMode::Sequential => w.dot(&x),
        ExecMode::Parallel => {
            let rows = w.nrows();
            let chunk = rows.div_ceil(rayon::current_num_threads().max(1)).max(1);
            let parts: Vec<Array2<f32>> = (0..rows)
                .step_by(chunk)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|r0| w.slice(s![r0..(r0 + chunk).min(rows), ..]).dot(&x))
                .collect();
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            concatenate(Axis(0), &views).expect("row blocks share a width")
        }
    }
}

/// Pointwise (1x1) convolution: `W x + b`.
fn pointwise(store: &WeightStore, prefix: &str, x: ArrayView2<f32>, mode: ExecMode) -> Array2<f32> {
    let w = store.get(&format!("{prefix}.weight")).expect("validated").matrix();
    let b = &store.get(&format!("{prefix}.bias")).expect("validated").data;
    let mut y = matmul(w, x, mode);
    for (mut row, &bias) in y.axis_iter_mut(Axis(0)).zip(b) {
        row.mapv_inplace(|v| v + bias);
    }
    y
}

fn prelu(x: &mut Array2<f32>, alpha: f32) {
    x.mapv_inplace(|v| if v >= 0.0 { v } else { alpha * v });
}

fn normalize(x: &mut Array2<f32>, gamma: &[f32], beta: &[f32], kind: NormKind) {
    let (c, k) = x.dim();
    // Per-frame mean and inverse std.
    let mut stats = vec![(0.0f64, 0.0f64); k];
    let frame_sums: Vec<(f64, f64)> = x
        .axis_iter(Axis(1))
        .map(|col| col.iter().fold((0.0, 0.0), |(s, q), &v| (s + v as f64, q + (v as f64).powi(2))))
        .collect();
    let finish = |sum: f64, sq: f64, n: f64| {
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        (mean, 1.0 / (var + NORM_EPS).sqrt())
    };
    match kind {
        NormKind::Global => {
            let (sum, sq) = frame_sums.iter().fold((0.0, 0.0), |(a, b), &(s, q)| (a + s, b + q));
            stats.fill(finish(sum, sq, (c * k) as f64));
        }
        NormKind::Cumulative => {
            let (mut sum, mut sq) = (0.0, 0.0);
            for (t, &(s, q)) in frame_sums.iter().enumerate() {
                sum += s;
                sq += q;
                stats[t] = finish(sum, sq, (c * (t + 1)) as f64);
            }
        }
        NormKind::Channel => {
            for (t, &(s, q)) in frame_sums.iter().enumerate() {
                stats[t] = finish(s, q, c as f64);
            }
        }
    }
    for (ch, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        let (g, b) = (gamma[ch] as f64, beta[ch] as f64);
        for (v, &(mean, inv)) in row.iter_mut().zip(&stats) {
            *v = (g * (*v as f64 - mean) * inv + b) as f32;
        }
    }
}

fn norm_layer(store: &WeightStore, prefix: &str, x: &mut Array2<f32>, kind: NormKind) {
    let gamma = &store.get(&format!("{prefix}.gamma")).expect("validated").data;
    let beta = &store.get(&format!("{prefix}.beta")).expect("validated").data;
    normalize(x, gamma, beta, kind);
}

/// Per-channel dilated convolution with symmetric zero padding.
fn depthwise(store: &WeightStore, prefix: &str, x: &Array2<f32>, dilation: usize) -> Array2<f32> {
    let w = store.get(&format!("{prefix}.weight")).expect("validated").matrix();
    let b = &store.get(&format!("{prefix}.bias")).expect("validated").data;
    let (_, k) = x.dim();
    let p = w.ncols();
    let half = (p - 1) / 2;
    let mut y = Array2::<f32>::zeros(x.dim());
    for (ch, mut out) in y.axis_iter_mut(Axis(0)).enumerate() {
        let out = out.as_slice_mut().expect("standard layout");
        let row = x.row(ch);
        let row = row.as_slice().expect("standard layout");
        out.fill(b[ch]);
        for tap in 0..p {
            let wv = w[[ch, tap]];
            let shift = tap as isize - half as isize;
            let offset = shift * dilation as isize;
            let lo = (-offset).max(0) as usize;
            let hi = ((k as isize - offset).min(k as isize)).max(0) as usize;
            for t in lo..hi.max(lo) {
                out[t] += wv * row[(t as isize + offset) as usize];
            }
        }
    }
    y
}

fn scalar(store: &WeightStore, name: &str) -> f32 {
    store.get(name).expect("validated").data[0]
}

/// Rectified encoder output `[N x K]`; `x` must already be padded.
pub(crate) fn encode(cfg: &SeparatorConfig, store: &WeightStore, x: &[f32], mode: ExecMode) -> Array2<f32> {
    let (l, stride) = (cfg.kernel_len, cfg.stride());
    let k = (x.len() - l) / stride + 1;
    let cols = Array2::from_shape_fn((l, k), |(i, f)| x[f * stride + i]);
    let w = store.get("encoder.weight").expect("validated").matrix();
    let mut e = matmul(w, cols.view(), mode);
    e.mapv_inplace(|v| v.max(0.0));
    e
}

/// Mask logits before the activation, `[N x K]`.
pub(crate) fn mask_logits(
    cfg: &SeparatorConfig,
    store: &WeightStore,
    frames: ArrayView2<f32>,
    mode: ExecMode,
) -> Array2<f32> {
    let kind = cfg.norm_kind;
    let mut x = frames.to_owned();
    norm_layer(store, "tcn.input_norm", &mut x, kind);
    let mut x = pointwise(store, "tcn.bottleneck", x.view(), mode);
    let mut skips = Array2::<f32>::zeros(x.dim());
    for i in 0..cfg.repeats * cfg.blocks_per_repeat {
        let pre = format!("tcn.blocks.{i}");
        let dilation = 1usize << (i % cfg.blocks_per_repeat);
        let mut y = pointwise(store, &format!("{pre}.in_conv"), x.view(), mode);
        prelu(&mut y, scalar(store, &format!("{pre}.prelu1")));
        norm_layer(store, &format!("{pre}.norm1"), &mut y, kind);
        let mut y = depthwise(store, &format!("{pre}.depthwise"), &y, dilation);
        prelu(&mut y, scalar(store, &format!("{pre}.prelu2")));
        norm_layer(store, &format!("{pre}.norm2"), &mut y, kind);
        x += &pointwise(store, &format!("{pre}.res_conv"), y.view(), mode);
        skips += &pointwise(store, &format!("{pre}.skip_conv"), y.view(), mode);
    }
    prelu(&mut skips, scalar(store, "tcn.output_prelu"));
    pointwise(store, "tcn.mask_conv", skips.view(), mode)
}

pub(crate) fn activate(logits: &mut Array2<f32>, activation: MaskActivation) {
    match activation {
        MaskActivation::Sigmoid => logits.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        MaskActivation::Relu => logits.mapv_inplace(|v| v.max(0.0)),
    }
}

/// Transposed convolution with overlap-add, truncated to `len` samples.
pub(crate) fn decode(
    cfg: &SeparatorConfig,
    store: &WeightStore,
    masked: ArrayView2<f32>,
    len: usize,
    mode: ExecMode,
) -> Vec<f32> {
    let (l, stride) = (cfg.kernel_len, cfg.stride());
    let w = store.get("decoder.weight").expect("validated").matrix();
    let frames = matmul(w.t(), masked, mode);
    let k = masked.ncols();
    let mut out = vec![0.0f32; (k - 1) * stride + l];
    for (f, col) in frames.axis_iter(Axis(1)).enumerate() {
        for (o, &v) in out[f * stride..f * stride + l].iter_mut().zip(col) {
            *o += v;
        }
    }
    out.resize(len, 0.0);
    out
}
