//! Spectral analysis, resampling and feature extraction.
//!
//! Everything here is a pure function of its inputs. Spectra and feature
//! matrices are computed in `f64`.

mod features;
mod fft;
mod resample;
mod spectrum;
mod window;

use thiserror::Error;

pub use features::{mfcc, third_octave_bands, third_octave_center, FeatureMatrix, MfccConfig};
pub use fft::{fft_forward, fft_inverse};
pub use resample::{downsample, resample, upsample_poly, DownsampleFilter};
pub use spectrum::{
    magnitude_spectrum, stft, stft_with_fft_size, Peak, Spectrogram, Spectrum,
};
pub use window::{hamming_window, Window};

pub(crate) use spectrum::framed_power as spectrum_power;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid window length {0} (need at least 2)")]
    InvalidLength(usize),
    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("FFT size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("target rate {to_hz} Hz is not above source rate {from_hz} Hz")]
    NotUpsampling { from_hz: u32, to_hz: u32 },
    #[error("target rate {to_hz} Hz is not below source rate {from_hz} Hz")]
    NotDownsampling { from_hz: u32, to_hz: u32 },
    #[error("band {band} upper edge {edge_hz:.1} Hz exceeds Nyquist {nyquist_hz:.1} Hz")]
    BandAboveNyquist {
        band: usize,
        edge_hz: f64,
        nyquist_hz: f64,
    },
    #[error("invalid hop size {0}")]
    InvalidHop(usize),
}
