use ndarray::Array2;
use serde::Serialize;

use super::fft::MagnitudeFft;
use super::{DspError, Window};
use crate::audio::AudioClip;

/// One-sided magnitude spectrum.
///
/// Magnitudes are scaled so that, for a single rect-windowed frame, the sum of
/// squared magnitudes equals `fft_size` times the frame's mean square (interior
/// bins carry the energy of their negative-frequency twin).
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
    pub fft_size: usize,
    pub window: Window,
    /// Number of averaged segments.
    pub segments: usize,
}

/// A refined spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub frequency_hz: f64,
    pub magnitude: f64,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.frequency(self.magnitudes.len() - 1)
    }

    /// Strongest bin whose centre lies in `[lo_hz, hi_hz]`, without refinement.
    pub fn max_bin_in(&self, lo_hz: f64, hi_hz: f64) -> Option<usize> {
        let lo = (lo_hz / self.bin_hz).ceil().max(0.0) as usize;
        let hi = ((hi_hz / self.bin_hz).floor() as usize).min(self.magnitudes.len() - 1);
        if lo > hi {
            return None;
        }
        let mut best = lo;
        for k in lo..=hi {
            if self.magnitudes[k] > self.magnitudes[best] {
                best = k;
            }
        }
        Some(best)
    }

    /// Strongest peak in `[lo_hz, hi_hz]`, refined by a parabola through the
    /// log magnitudes of the peak bin and its two neighbours.
    pub fn peak_in(&self, lo_hz: f64, hi_hz: f64) -> Option<Peak> {
        self.max_bin_in(lo_hz, hi_hz).map(|k| self.refine(k))
    }

    pub fn refine(&self, k: usize) -> Peak {
        let m = &self.magnitudes;
        let plain = Peak {
            bin: k,
            frequency_hz: self.frequency(k),
            magnitude: m[k],
        };
        if k == 0 || k + 1 >= m.len() || m[k - 1] <= 0.0 || m[k] <= 0.0 || m[k + 1] <= 0.0 {
            return plain;
        }
        let (a, b, c) = (m[k - 1].ln(), m[k].ln(), m[k + 1].ln());
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return plain;
        }
        let p = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        Peak {
            bin: k,
            frequency_hz: (k as f64 + p) * self.bin_hz,
            magnitude: (b - 0.25 * (a - c) * p).exp(),
        }
    }

    /// Root of the summed squared magnitudes over `k - half_width ..= k + half_width`,
    /// less a background level taken from the bins just outside that band.
    ///
    /// Independent of where the tone sits between bins as long as the window's
    /// main lobe fits inside the band. The background is the mean power of
    /// `half_width + 1 ..= 2 * half_width + 2` bins either side, which cancels a
    /// linearly sloping leakage floor.
    pub fn band_magnitude(&self, k: usize, half_width: usize) -> f64 {
        let m = &self.magnitudes;
        let last = m.len() - 1;
        let lo = k.saturating_sub(half_width);
        let hi = (k + half_width).min(last);
        let band: f64 = m[lo..=hi].iter().map(|v| v * v).sum();
        let (near, far) = (half_width + 1, 2 * half_width + 2);
        let mut flank = Vec::new();
        for d in near..=far {
            if d <= k {
                flank.push(m[k - d] * m[k - d]);
            }
            if k + d <= last {
                flank.push(m[k + d] * m[k + d]);
            }
        }
        let background = if flank.is_empty() {
            0.0
        } else {
            flank.iter().sum::<f64>() / flank.len() as f64
        };
        (band - (hi - lo + 1) as f64 * background).max(0.0).sqrt()
    }

    /// Magnitudes in dB with a floor of -240 dB.
    pub fn magnitudes_db(&self) -> Vec<f64> {
        self.magnitudes
            .iter()
            .map(|&m| 20.0 * m.max(1e-12).log10())
            .collect()
    }
}

/// Welch-averaged one-sided magnitude spectrum over 50%-overlapped segments.
pub fn magnitude_spectrum(
    clip: &AudioClip,
    fft_size: usize,
    window: Window,
) -> Result<Spectrum, DspError> {
    if !fft_size.is_power_of_two() || fft_size < 2 {
        return Err(DspError::NotPowerOfTwo(fft_size));
    }
    if clip.len() < fft_size {
        return Err(DspError::TooShort {
            len: clip.len(),
            needed: fft_size,
        });
    }
    let x = clip.to_f64();
    let w = window.coefficients(fft_size)?;
    let hop = fft_size / 2;
    let segments = (x.len() - fft_size) / hop + 1;
    let bins = fft_size / 2 + 1;
    let mut fft = MagnitudeFft::new(fft_size);
    let mut acc = vec![0.0; bins];
    let mut power = vec![0.0; bins];
    for s in 0..segments {
        fft.power(&x[s * hop..s * hop + fft_size], &w, &mut power);
        for (a, p) in acc.iter_mut().zip(&power) {
            *a += p;
        }
    }
    let n = fft_size as f64;
    let magnitudes = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let fold = if k == 0 || k == bins - 1 { 1.0 } else { 2.0 };
            (fold * p / (segments as f64 * n)).sqrt()
        })
        .collect();
    Ok(Spectrum {
        magnitudes,
        bin_hz: clip.sample_rate() as f64 / n,
        fft_size,
        window,
        segments,
    })
}

/// Short-time magnitude spectrogram (`|X_k|`, unscaled).
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// `[num_frames, fft_size / 2 + 1]`
    pub frames: Array2<f64>,
    pub hop_s: f64,
    pub bin_hz: f64,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn nyquist_hz(&self) -> f64 {
        (self.num_bins() - 1) as f64 * self.bin_hz
    }
}

/// Frame count of a sliding window: `floor((len - win) / hop) + 1`.
pub(crate) fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if len < win {
        0
    } else {
        (len - win) / hop + 1
    }
}

/// Per-frame `|X_k|^2` of windowed frames, zero-padded to `fft_size`.
pub(crate) fn framed_power(
    x: &[f64],
    win: usize,
    hop: usize,
    fft_size: usize,
    window: &[f64],
) -> Array2<f64> {
    let frames = frame_count(x.len(), win, hop);
    let bins = fft_size / 2 + 1;
    let mut out = Array2::zeros((frames, bins));
    let mut fft = MagnitudeFft::new(fft_size);
    for (f, mut row) in out.rows_mut().into_iter().enumerate() {
        let slice = row.as_slice_mut().expect("standard layout");
        fft.power(&x[f * hop..f * hop + win], window, slice);
    }
    out
}

/// STFT with the FFT size set to the next power of two at or above `win`.
pub fn stft(
    clip: &AudioClip,
    win: usize,
    hop: usize,
    window: Window,
) -> Result<Spectrogram, DspError> {
    stft_with_fft_size(clip, win, hop, win.next_power_of_two(), window)
}

pub fn stft_with_fft_size(
    clip: &AudioClip,
    win: usize,
    hop: usize,
    fft_size: usize,
    window: Window,
) -> Result<Spectrogram, DspError> {
    if hop == 0 {
        return Err(DspError::InvalidHop(hop));
    }
    if !fft_size.is_power_of_two() || fft_size < win {
        return Err(DspError::NotPowerOfTwo(fft_size));
    }
    if clip.len() < win {
        return Err(DspError::TooShort {
            len: clip.len(),
            needed: win,
        });
    }
    let w = window.coefficients(win)?;
    let mut frames = framed_power(&clip.to_f64(), win, hop, fft_size, &w);
    frames.mapv_inplace(f64::sqrt);
    let rate = clip.sample_rate() as f64;
    Ok(Spectrogram {
        frames,
        hop_s: hop as f64 / rate,
        bin_hz: rate / fft_size as f64,
    })
}
