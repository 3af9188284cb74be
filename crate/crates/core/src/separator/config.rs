use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SeparatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Statistics over every channel and frame of the utterance.
    Global,
    /// Statistics over every channel and all frames up to the current one.
    Cumulative,
    /// Statistics over the channels of each frame independently.
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskActivation {
    Sigmoid,
    Relu,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Global => "global",
            NormKind::Cumulative => "cumulative",
            NormKind::Channel => "channel",
        })
    }
}

impl FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(NormKind::Global),
            "cumulative" => Ok(NormKind::Cumulative),
            "channel" => Ok(NormKind::Channel),
            other => Err(format!("unknown norm kind `{other}`")),
        }
    }
}

/// Architecture hyperparameters of the encoder / TCN / decoder stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorConfig {
    pub num_sources: usize,
    pub sample_rate: u32,
    /// Encoder filters (N).
    pub encoder_filters: usize,
    /// Encoder kernel length in samples (L); the stride is L/2.
    pub kernel_len: usize,
    /// Bottleneck channels (B).
    pub bottleneck: usize,
    /// Channels inside each convolutional block (H).
    pub conv_channels: usize,
    /// Depthwise kernel size (P).
    pub kernel_size: usize,
    /// Blocks per repeat (X); dilations run 1, 2, ..., 2^(X-1).
    pub blocks_per_repeat: usize,
    /// Repeats (R).
    pub repeats: usize,
    pub norm_kind: NormKind,
    pub mask_activation: MaskActivation,
    /// Default chunk length for chunked inference.
    pub segment_s: f64,
}

impl SeparatorConfig {
    /// Default widths with a 2 ms encoder kernel at `sample_rate`
    /// (16 taps at 8 kHz, 32 at 16 kHz, 96 at 48 kHz).
    pub fn preset(sample_rate: u32) -> Self {
        let l = ((sample_rate as f64 * 0.002 / 2.0).round() as usize * 2).max(2);
        Self {
            num_sources: 1,
            sample_rate,
            encoder_filters: 512,
            kernel_len: l,
            bottleneck: 128,
            conv_channels: 512,
            kernel_size: 3,
            blocks_per_repeat: 8,
            repeats: 3,
            norm_kind: NormKind::Global,
            mask_activation: MaskActivation::Sigmoid,
            segment_s: 3.0,
        }
    }

    pub fn stride(&self) -> usize {
        self.kernel_len / 2
    }

    pub fn validate(&self) -> Result<(), SeparatorError> {
        let fail = |msg: String| Err(SeparatorError::InvalidConfig(msg));
        if self.num_sources != 1 {
            return fail(format!("num_sources must be 1, got {}", self.num_sources));
        }
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        if self.kernel_len < 2 || self.kernel_len % 2 != 0 {
            return fail(format!("kernel_len must be even and >= 2, got {}", self.kernel_len));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return fail(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        if self.blocks_per_repeat == 0 || self.repeats == 0 {
            return fail("blocks_per_repeat and repeats must be >= 1".into());
        }
        if self.blocks_per_repeat > 24 {
            return fail(format!("blocks_per_repeat {} is unreasonably deep", self.blocks_per_repeat));
        }
        if self.encoder_filters == 0 || self.bottleneck == 0 || self.conv_channels == 0 {
            return fail("channel counts must be positive".into());
        }
        if !(self.segment_s.is_finite() && self.segment_s > 0.0) {
            return fail(format!("segment_s must be positive, got {}", self.segment_s));
        }
        Ok(())
    }

    /// One-sided TCN receptive field in encoder frames.
    pub fn receptive_field_frames(&self) -> usize {
        self.repeats * (self.kernel_size - 1) / 2 * ((1usize << self.blocks_per_repeat) - 1)
    }

    /// Encoder frame count for a `len`-sample input after padding.
    pub fn num_frames(&self, len: usize) -> usize {
        (self.padded_len(len) - self.kernel_len) / self.stride() + 1
    }

    /// Input length after right zero-padding so that `(T - L)` is a multiple of `L/2`.
    pub fn padded_len(&self, len: usize) -> usize {
        let (l, s) = (self.kernel_len, self.stride());
        if len <= l {
            l
        } else {
            l + (len - l).div_ceil(s) * s
        }
    }
}
