//! Short-time objective intelligibility.
//!
//! Follows the published STOI definition: 10 kHz analysis rate, 256-sample
//! (25.6 ms) frames with hop 128 zero-padded to a 512-point FFT, silent-frame
//! removal at 40 dB dynamic range, 15 one-third-octave bands from 150 Hz,
//! 30-frame segments and an SDR clipping bound of -15 dB.

use ndarray::{s, Array2};

use super::MetricError;
use crate::audio::AudioClip;
use crate::dsp::{self, Spectrogram};

pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;
const MIN_SECONDS: f64 = 0.5;

/// Hann window without its zero end points (`hanning(n + 2)[1..n + 1]`).
fn stoi_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Drops frames more than `DYN_RANGE_DB` below the loudest reference frame and
/// overlap-adds the survivors of both signals.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    let w = stoi_window(FRAME);
    let starts: Vec<usize> = (0..=x.len().saturating_sub(FRAME)).step_by(HOP).collect();
    let energy = |start: usize| -> f64 {
        x[start..start + FRAME]
            .iter()
            .zip(&w)
            .map(|(v, w)| (v * w).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let norms: Vec<f64> = starts.iter().map(|&s| energy(s)).collect();
    let loudest = norms.iter().cloned().fold(0.0, f64::max);
    if loudest == 0.0 {
        return Err(MetricError::AllFramesSilent { metric: "stoi" });
    }
    let db: Vec<f64> = norms.iter().map(|n| 20.0 * (n + EPS).log10()).collect();
    let max_db = 20.0 * (loudest + EPS).log10();
    let kept: Vec<usize> = starts
        .iter()
        .zip(&db)
        .filter(|(_, &e)| max_db - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    let out_len = (kept.len() - 1) * HOP + FRAME;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (i, &start) in kept.iter().enumerate() {
        let o = i * HOP;
        for k in 0..FRAME {
            xs[o + k] += w[k] * x[start + k];
            ys[o + k] += w[k] * y[start + k];
        }
    }
    Ok((xs, ys))
}

fn band_envelopes(x: &[f64]) -> Result<Array2<f64>, MetricError> {
    let w = stoi_window(FRAME);
    let mut frames = dsp::spectrum_power(x, FRAME, HOP, NFFT, &w);
    frames.mapv_inplace(f64::sqrt);
    let spec = Spectrogram {
        frames,
        hop_s: HOP as f64 / STOI_RATE as f64,
        bin_hz: STOI_RATE as f64 / NFFT as f64,
    };
    Ok(dsp::third_octave_bands(&spec, NUM_BANDS, MIN_FREQ)?.rows)
}

fn to_stoi_rate(clip: &AudioClip) -> Result<Vec<f64>, MetricError> {
    Ok(dsp::resample(clip, STOI_RATE)?.to_f64())
}

/// STOI score of `estimate` against the clean `reference`, clipped to [0, 1].
pub fn stoi(estimate: &AudioClip, reference: &AudioClip) -> Result<f64, MetricError> {
    if estimate.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            metric: "stoi",
            left: estimate.len(),
            right: reference.len(),
        });
    }
    if estimate.sample_rate() != reference.sample_rate() {
        return Err(MetricError::RateMismatch {
            metric: "stoi",
            left: estimate.sample_rate(),
            right: reference.sample_rate(),
        });
    }
    if reference.duration_seconds() < MIN_SECONDS {
        return Err(MetricError::TooShort {
            metric: "stoi",
            seconds: reference.duration_seconds(),
            needed: MIN_SECONDS,
        });
    }
    let x = to_stoi_rate(reference)?;
    let y = to_stoi_rate(estimate)?;
    let n = x.len().min(y.len());
    let (xs, ys) = remove_silent_frames(&x[..n], &y[..n])?;
    let x_tob = band_envelopes(&xs)?;
    let y_tob = band_envelopes(&ys)?;
    let frames = x_tob.nrows();
    if frames < SEGMENT {
        return Err(MetricError::TooShort {
            metric: "stoi",
            seconds: xs.len() as f64 / STOI_RATE as f64,
            needed: (SEGMENT * HOP + FRAME) as f64 / STOI_RATE as f64,
        });
    }

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT..=frames {
        let xseg = x_tob.slice(s![end - SEGMENT..end, ..]);
        let yseg = y_tob.slice(s![end - SEGMENT..end, ..]);
        for band in 0..NUM_BANDS {
            let xb = xseg.column(band);
            let yb = yseg.column(band);
            let xnorm = xb.dot(&xb).sqrt();
            let ynorm = yb.dot(&yb).sqrt();
            let alpha = xnorm / (ynorm + EPS);
            let yp: Vec<f64> = yb
                .iter()
                .zip(xb.iter())
                .map(|(&yv, &xv)| (yv * alpha).min(xv * (1.0 + clip)))
                .collect();
            let xv: Vec<f64> = xb.iter().copied().collect();
            total += correlation(&xv, &yp);
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}

/// Pearson correlation with the same `EPS` guards as the reference algorithm.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let na = da.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
    let nb = db.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
    da.iter().zip(&db).map(|(x, y)| (x / na) * (y / nb)).sum()
}
