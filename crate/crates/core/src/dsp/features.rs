use std::f64::consts::PI;

use ndarray::{Array2, Axis};

use super::spectrum::{frame_count, framed_power};
use super::{DspError, Spectrogram, Window};
use crate::audio::AudioClip;

/// Per-frame feature vectors (`[num_frames, num_features]`).
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub frame_rate_hz: f64,
}

impl FeatureMatrix {
    pub fn num_frames(&self) -> usize {
        self.rows.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.rows.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub num_coeffs: usize,
    pub win_s: f64,
    pub hop_s: f64,
    pub num_filters: usize,
    pub log_floor: f64,
    /// Subtract the per-utterance mean of every coefficient.
    pub mean_subtraction: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            num_coeffs: 13,
            win_s: 0.032,
            hop_s: 0.016,
            num_filters: 26,
            log_floor: 1e-10,
            mean_subtraction: true,
        }
    }
}

impl MfccConfig {
    pub fn frame_len(&self, rate: u32) -> usize {
        (self.win_s * rate as f64).round() as usize
    }

    pub fn hop_len(&self, rate: u32) -> usize {
        ((self.hop_s * rate as f64).round() as usize).max(1)
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters spanning 0 Hz to Nyquist, evaluated at bin frequencies.
fn mel_filterbank(num_filters: usize, fft_size: usize, rate: u32) -> Array2<f64> {
    let bins = fft_size / 2 + 1;
    let nyquist = rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bin_hz = rate as f64 / fft_size as f64;
    Array2::from_shape_fn((num_filters, bins), |(m, k)| {
        let f = k as f64 * bin_hz;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        if f <= lo || f >= hi {
            0.0
        } else if f <= mid {
            (f - lo) / (mid - lo)
        } else {
            (hi - f) / (hi - mid)
        }
    })
}

/// Orthonormal DCT-II matrix, `[num_coeffs, n]`.
fn dct_matrix(num_coeffs: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((num_coeffs, n), |(k, i)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    })
}

/// Mel-frequency cepstral coefficients.
///
/// Hann-windowed power spectrum, mel filterbank, natural log with a floor,
/// orthonormal DCT-II, then optional cepstral mean subtraction.
pub fn mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureMatrix, DspError> {
    let rate = clip.sample_rate();
    let win = config.frame_len(rate);
    let hop = config.hop_len(rate);
    if win < 2 {
        return Err(DspError::InvalidLength(win));
    }
    if clip.len() < win {
        return Err(DspError::TooShort {
            len: clip.len(),
            needed: win,
        });
    }
    let fft_size = win.next_power_of_two();
    let window = Window::Hann.coefficients(win)?;
    let power = framed_power(&clip.to_f64(), win, hop, fft_size, &window);
    debug_assert_eq!(power.nrows(), frame_count(clip.len(), win, hop));

    let bank = mel_filterbank(config.num_filters, fft_size, rate);
    let mut mel = power.dot(&bank.t());
    mel.mapv_inplace(|e| e.max(config.log_floor).ln());
    let dct = dct_matrix(config.num_coeffs.min(config.num_filters), config.num_filters);
    let mut rows = mel.dot(&dct.t());
    if config.mean_subtraction {
        let mean = rows.mean_axis(Axis(0)).expect("at least one frame");
        rows -= &mean;
    }
    Ok(FeatureMatrix {
        rows,
        frame_rate_hz: rate as f64 / hop as f64,
    })
}

/// Centre frequency of one-third-octave band `k`.
pub fn third_octave_center(first_center_hz: f64, band: usize) -> f64 {
    first_center_hz * 2f64.powf(band as f64 / 3.0)
}

/// Groups spectrogram bins into one-third-octave bands.
///
/// Band `k` covers `[c / 2^(1/6), c * 2^(1/6))` with `c = first_center_hz * 2^(k/3)`;
/// its value is the root of the summed squared bin magnitudes.
pub fn third_octave_bands(
    spectrogram: &Spectrogram,
    num_bands: usize,
    first_center_hz: f64,
) -> Result<FeatureMatrix, DspError> {
    let nyquist = spectrogram.nyquist_hz();
    let edge = 2f64.powf(1.0 / 6.0);
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(num_bands);
    for band in 0..num_bands {
        let c = third_octave_center(first_center_hz, band);
        let (lo, hi) = (c / edge, c * edge);
        if hi > nyquist {
            return Err(DspError::BandAboveNyquist {
                band,
                edge_hz: hi,
                nyquist_hz: nyquist,
            });
        }
        members.push(
            (0..spectrogram.num_bins())
                .filter(|&k| {
                    let f = k as f64 * spectrogram.bin_hz;
                    f >= lo && f < hi
                })
                .collect(),
        );
    }
    let frames = &spectrogram.frames;
    let rows = Array2::from_shape_fn((frames.nrows(), num_bands), |(t, b)| {
        members[b]
            .iter()
            .map(|&k| frames[[t, k]].powi(2))
            .sum::<f64>()
            .sqrt()
    });
    Ok(FeatureMatrix {
        rows,
        frame_rate_hz: 1.0 / spectrogram.hop_s,
    })
}
