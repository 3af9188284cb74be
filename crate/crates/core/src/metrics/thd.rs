use serde::Serialize;

use super::MetricError;
use crate::audio::AudioClip;
use crate::dsp::{magnitude_spectrum, Spectrum, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct ThdConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub max_harmonics: usize,
    /// Analysis FFT size; defaults to 8192, or the largest power of two that fits the clip.
    pub fft_size: Option<usize>,
    /// Required fundamental height over the median spectral magnitude.
    pub min_prominence_db: f64,
}

impl Default for ThdConfig {
    fn default() -> Self {
        Self {
            f0_min_hz: 50.0,
            f0_max_hz: 1000.0,
            max_harmonics: 10,
            fft_size: None,
            min_prominence_db: 10.0,
        }
    }
}

const DEFAULT_FFT: usize = 8192;
const MIN_FFT: usize = 256;
// Hamming main lobe spans two bins either side of the tone; one more covers the
// worst-case half-bin offset.
const LOBE_BINS: usize = 3;

/// One harmonic of the detected fundamental (index 1 is the fundamental itself).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Harmonic {
    pub index: usize,
    pub frequency_hz: f64,
    pub magnitude: f64,
    /// Level relative to the fundamental.
    pub magnitude_db: f64,
}

fn analysis_spectrum(clip: &AudioClip, config: &ThdConfig) -> Result<Spectrum, MetricError> {
    let fft_size = match config.fft_size {
        Some(n) => n,
        None => {
            if clip.len() < MIN_FFT {
                return Err(MetricError::TooShort {
                    metric: "thd",
                    seconds: clip.duration_seconds(),
                    needed: MIN_FFT as f64 / clip.sample_rate() as f64,
                });
            }
            let fit = 1usize << (usize::BITS - 1 - clip.len().leading_zeros());
            fit.min(DEFAULT_FFT)
        }
    };
    if clip.len() < fft_size {
        return Err(MetricError::TooShort {
            metric: "thd",
            seconds: clip.duration_seconds(),
            needed: fft_size as f64 / clip.sample_rate() as f64,
        });
    }
    Ok(magnitude_spectrum(clip, fft_size, Window::Hamming)?)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fundamental and harmonic levels from a Hamming-windowed averaged spectrum.
///
/// The fundamental is the strongest peak in the search range, its frequency
/// refined by parabolic interpolation. Harmonic `k` is the strongest bin within
/// one bin of `k * f0`, up to `max_harmonics` or Nyquist. Amplitudes are the
/// main-lobe power sums around each peak bin, so scalloping cancels out of the
/// ratios.
pub fn harmonics(clip: &AudioClip, config: &ThdConfig) -> Result<Vec<Harmonic>, MetricError> {
    let spec = analysis_spectrum(clip, config)?;
    let nyquist = spec.nyquist_hz();
    let fundamental = spec
        .peak_in(config.f0_min_hz, config.f0_max_hz.min(nyquist))
        .ok_or(MetricError::NoFundamental { metric: "thd" })?;
    let floor = median(&spec.magnitudes);
    let needed = floor * 10f64.powf(config.min_prominence_db / 20.0);
    if fundamental.magnitude <= needed || fundamental.magnitude == 0.0 {
        return Err(MetricError::NoFundamental { metric: "thd" });
    }
    let f0 = fundamental.frequency_hz;
    let a1 = spec.band_magnitude(fundamental.bin, LOBE_BINS);
    let mut out = vec![Harmonic {
        index: 1,
        frequency_hz: f0,
        magnitude: a1,
        magnitude_db: 0.0,
    }];
    for k in 2..=config.max_harmonics {
        let centre = k as f64 * f0;
        if centre > nyquist {
            break;
        }
        let Some(bin) = spec.max_bin_in(centre - spec.bin_hz, centre + spec.bin_hz) else {
            break;
        };
        let magnitude = spec.band_magnitude(bin, LOBE_BINS);
        out.push(Harmonic {
            index: k,
            frequency_hz: spec.refine(bin).frequency_hz,
            magnitude,
            magnitude_db: 20.0 * (magnitude.max(1e-300) / a1).log10(),
        });
    }
    Ok(out)
}

/// Total harmonic distortion in percent: `100 * sqrt(sum_k A_k^2) / A_1`, k >= 2.
pub fn thd(clip: &AudioClip, config: &ThdConfig) -> Result<f64, MetricError> {
    let h = harmonics(clip, config)?;
    let a1 = h[0].magnitude;
    let sum_sq: f64 = h[1..].iter().map(|x| x.magnitude * x.magnitude).sum();
    Ok(100.0 * sum_sq.sqrt() / a1)
}

/// `computed - reference`, exactly as the normalization formula reads.
pub fn thd_norm(thd_computed: f64, thd_reference: f64) -> f64 {
    thd_computed - thd_reference
}
