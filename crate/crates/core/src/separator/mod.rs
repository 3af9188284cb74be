//! Single-source time-domain enhancement network (learned encoder, dilated
//! TCN mask estimator, learned decoder), forward pass only.

mod config;
mod forward;
mod weights;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::dsp::{self, DspError};

pub use self::config::{MaskActivation, NormKind, SeparatorConfig};
pub use self::forward::ExecMode;
pub use self::weights::{
    decode_container, encode_container, load_weights, random_weights, read_container, save_weights, Tensor,
    WeightStore,
};

/// Overlap used by [`SeparatorModel::enhance_any_rate`].
pub const DEFAULT_OVERLAP_S: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SeparatorError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("ShapeMismatch: {what} expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{0}` has non-finite values")]
    NonFinite(String),
    #[error("RateMismatch: model runs at {expected} Hz, clip is {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("InvalidChunking: need segment_s > 2 * overlap_s >= 0, got {segment_s} / {overlap_s}")]
    InvalidChunking { segment_s: f64, overlap_s: f64 },
    #[error("BadMagic: not a CTN1 weight container")]
    BadMagic,
    #[error("ChecksumMismatch: payload checksum does not match")]
    ChecksumMismatch,
    #[error("TruncatedFile: {0}")]
    TruncatedFile(String),
    #[error("UnsupportedDtype: {0}")]
    UnsupportedDtype(String),
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("container has no config; supply one explicitly")]
    MissingConfig,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Result of [`SeparatorModel::enhance_any_rate`].
#[derive(Debug, Clone)]
pub struct EnhanceOutcome {
    pub clip: AudioClip,
    /// Whether the input had to be resampled to the model rate and back.
    pub resampled: bool,
    pub model_rate: u32,
}

/// Validated config and weights. Immutable and `Sync`; share it across threads freely.
#[derive(Debug, Clone)]
pub struct SeparatorModel {
    config: SeparatorConfig,
    weights: WeightStore,
    exec: ExecMode,
}

impl SeparatorModel {
    pub fn new(config: SeparatorConfig, weights: WeightStore) -> Result<Self, SeparatorError> {
        config.validate()?;
        weights.validate(&config)?;
        Ok(Self {
            config,
            weights,
            exec: ExecMode::Sequential,
        })
    }

    pub fn init_random(config: SeparatorConfig, seed: u64) -> Result<Self, SeparatorError> {
        config.validate()?;
        let weights = random_weights(&config, seed);
        Self::new(config, weights)
    }

    /// Loads a container that carries its own config.
    pub fn load(path: &Path) -> Result<Self, SeparatorError> {
        let (config, weights) = read_container(path)?;
        Self::new(config.ok_or(SeparatorError::MissingConfig)?, weights)
    }

    pub fn save(&self, path: &Path) -> Result<(), SeparatorError> {
        save_weights(path, &self.weights, Some(&self.config))
    }

    pub fn config(&self) -> &SeparatorConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn exec_mode(&self) -> ExecMode {
        self.exec
    }

    pub fn with_exec_mode(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<(), SeparatorError> {
        if clip.sample_rate() != self.config.sample_rate {
            return Err(SeparatorError::RateMismatch {
                expected: self.config.sample_rate,
                found: clip.sample_rate(),
            });
        }
        Ok(())
    }

    fn padded(&self, clip: &AudioClip) -> Vec<f32> {
        let mut x = clip.samples().to_vec();
        x.resize(self.config.padded_len(clip.len()), 0.0);
        x
    }

    fn check_frames(&self, frames: &ArrayView2<f32>) -> Result<(), SeparatorError> {
        let n = self.config.encoder_filters;
        if frames.ncols() != n || frames.nrows() == 0 {
            return Err(SeparatorError::ShapeMismatch {
                what: "frames".into(),
                expected: vec![frames.nrows().max(1), n],
                found: frames.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Rectified encoder frames, `[K x N]`.
    pub fn encode(&self, clip: &AudioClip) -> Result<Array2<f32>, SeparatorError> {
        self.check_rate(clip)?;
        let e = forward::encode(&self.config, &self.weights, &self.padded(clip), self.exec);
        Ok(e.reversed_axes())
    }

    /// TCN output before the mask activation, `[K x N]`.
    pub fn mask_logits(&self, frames: ArrayView2<f32>) -> Result<Array2<f32>, SeparatorError> {
        self.check_frames(&frames)?;
        Ok(forward::mask_logits(&self.config, &self.weights, frames.t(), self.exec).reversed_axes())
    }

    /// Mask for `frames` (`[K x N]`), same shape.
    pub fn estimate_mask(&self, frames: ArrayView2<f32>) -> Result<Array2<f32>, SeparatorError> {
        let mut m = self.mask_logits(frames)?;
        forward::activate(&mut m, self.config.mask_activation);
        Ok(m)
    }

    /// Overlap-add synthesis of masked `[K x N]` frames, cut or zero-extended to `original_len`.
    pub fn decode(&self, masked: ArrayView2<f32>, original_len: usize) -> Result<AudioClip, SeparatorError> {
        self.check_frames(&masked)?;
        let y = forward::decode(&self.config, &self.weights, masked.t(), original_len, self.exec);
        Ok(AudioClip::new(y, self.config.sample_rate)?)
    }

    /// `decode(encode(x) * mask(encode(x)))`, same length as the input.
    pub fn enhance(&self, clip: &AudioClip) -> Result<AudioClip, SeparatorError> {
        self.check_rate(clip)?;
        let y = self.enhance_samples(&self.padded(clip), clip.len());
        Ok(AudioClip::new(y, self.config.sample_rate)?)
    }

    fn enhance_samples(&self, padded: &[f32], len: usize) -> Vec<f32> {
        let (cfg, w, mode) = (&self.config, &self.weights, self.exec);
        let e = forward::encode(cfg, w, padded, mode);
        let mut mask = forward::mask_logits(cfg, w, e.view(), mode);
        forward::activate(&mut mask, cfg.mask_activation);
        mask *= &e;
        forward::decode(cfg, w, mask.view(), len, mode)
    }

    /// Enhances consecutive `segment_s` chunks that overlap by `overlap_s`,
    /// blending each overlap with complementary linear ramps.
    pub fn enhance_chunked(
        &self,
        clip: &AudioClip,
        segment_s: f64,
        overlap_s: f64,
    ) -> Result<AudioClip, SeparatorError> {
        let bad = SeparatorError::InvalidChunking { segment_s, overlap_s };
        if !(segment_s.is_finite() && overlap_s.is_finite() && overlap_s >= 0.0 && segment_s > 2.0 * overlap_s) {
            return Err(bad);
        }
        self.check_rate(clip)?;
        let rate = clip.sample_rate() as f64;
        let seg = (segment_s * rate).round() as usize;
        let ov = (overlap_s * rate).round() as usize;
        if seg == 0 || seg <= 2 * ov {
            return Err(bad);
        }
        if clip.len() <= seg {
            return self.enhance(clip);
        }
        let x = clip.samples();
        let hop = seg - ov;
        let mut starts = vec![0usize];
        while starts.last().unwrap() + seg < x.len() {
            starts.push(starts.last().unwrap() + hop);
        }
        let mut out = vec![0.0f32; x.len()];
        for (i, &start) in starts.iter().enumerate() {
            let end = (start + seg).min(x.len());
            let mut chunk = x[start..end].to_vec();
            let len = chunk.len();
            chunk.resize(self.config.padded_len(len), 0.0);
            let y = self.enhance_samples(&chunk, len);
            let first = i == 0;
            let last = i + 1 == starts.len();
            for (j, v) in y.iter().enumerate() {
                let mut w = 1.0f32;
                if !first && j < ov {
                    w *= (j as f32 + 0.5) / ov as f32;
                }
                let tail = seg - ov;
                if !last && j >= tail {
                    w *= 1.0 - ((j - tail) as f32 + 0.5) / ov as f32;
                }
                out[start + j] += w * v;
            }
        }
        Ok(AudioClip::new(out, clip.sample_rate())?)
    }

    /// Brings `clip` to the model rate if needed, enhances it in chunks of the
    /// configured segment length and returns it at the original rate and length.
    pub fn enhance_any_rate(&self, clip: &AudioClip) -> Result<EnhanceOutcome, SeparatorError> {
        self.enhance_any_rate_with(clip, self.config.segment_s, DEFAULT_OVERLAP_S)
    }

    /// [`Self::enhance_any_rate`] with explicit chunking.
    pub fn enhance_any_rate_with(
        &self,
        clip: &AudioClip,
        segment_s: f64,
        overlap_s: f64,
    ) -> Result<EnhanceOutcome, SeparatorError> {
        let model_rate = self.config.sample_rate;
        if clip.sample_rate() == model_rate {
            return Ok(EnhanceOutcome {
                clip: self.enhance_chunked(clip, segment_s, overlap_s)?,
                resampled: false,
                model_rate,
            });
        }
        let inner = dsp::resample(clip, model_rate)?;
        let enhanced = self.enhance_chunked(&inner, segment_s, overlap_s)?;
        let back = dsp::resample(&enhanced, clip.sample_rate())?;
        let mut samples = back.into_samples();
        samples.resize(clip.len(), 0.0);
        Ok(EnhanceOutcome {
            clip: AudioClip::new(samples, clip.sample_rate())?,
            resampled: true,
            model_rate,
        })
    }
}

/// Weights that pass the input through almost unchanged: the encoder splits
/// each kernel position into positive and negative parts, the mask saturates
/// at one, and the decoder overlap-adds the halves back. The first and last
/// half-kernel of a clip come out at half amplitude.
pub fn identity_weights(config: &SeparatorConfig) -> Result<WeightStore, SeparatorError> {
    config.validate()?;
    let (n, l) = (config.encoder_filters, config.kernel_len);
    if n < 2 * l {
        return Err(SeparatorError::InvalidConfig(format!(
            "identity weights need encoder_filters >= 2 * kernel_len ({n} < {})",
            2 * l
        )));
    }
    let mut store = random_weights(config, 0);
    let names: Vec<String> = store.names().map(str::to_owned).collect();
    for name in names {
        let t = store.get_mut(&name).expect("listed");
        let keep = name.ends_with(".gamma") || name.contains("prelu");
        if !keep {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let bias = match config.mask_activation {
        MaskActivation::Sigmoid => 30.0,
        MaskActivation::Relu => 1.0,
    };
    store.get_mut("tcn.mask_conv.bias").expect("present").data.fill(bias);
    for j in 0..l {
        let enc = store.get_mut("encoder.weight").expect("present");
        enc.data[2 * j * l + j] = 1.0;
        enc.data[(2 * j + 1) * l + j] = -1.0;
        let dec = store.get_mut("decoder.weight").expect("present");
        dec.data[2 * j * l + j] = 0.5;
        dec.data[(2 * j + 1) * l + j] = -0.5;
    }
    Ok(store)
}
