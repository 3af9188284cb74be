//! Forward-pass latency measurement and the per-frame processing-time model.

use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::audio::AudioClip;
use crate::separator::{ExecMode, SeparatorError, SeparatorModel};
use crate::synth;

/// Latency above which audio visibly leads video, in ms.
pub const REALTIME_THRESHOLD_MS: f64 = 185.19;
/// Forward time of one frame assumed by the processing-time model, in ms.
pub const PER_FRAME_MS: f64 = 0.4;
/// Samples per frame assumed by the processing-time model.
pub const FRAME_SAMPLES: usize = 256;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("InvalidArgs: {0}")]
    InvalidArgs(String),
    #[error(transparent)]
    Separator(#[from] SeparatorError),
}

/// Anything that maps a clip at its own rate to an enhanced clip.
pub trait Enhancer: Sync {
    fn sample_rate(&self) -> u32;
    fn enhance(&self, clip: &AudioClip) -> Result<AudioClip, SeparatorError>;
}

impl Enhancer for SeparatorModel {
    fn sample_rate(&self) -> u32 {
        self.config().sample_rate
    }
    fn enhance(&self, clip: &AudioClip) -> Result<AudioClip, SeparatorError> {
        SeparatorModel::enhance(self, clip)
    }
}

/// Returns its input after sleeping for a fixed time; used to check the harness itself.
#[derive(Debug, Clone)]
pub struct MockEnhancer {
    pub sample_rate: u32,
    pub delay: Duration,
}

impl Enhancer for MockEnhancer {
    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
    fn enhance(&self, clip: &AudioClip) -> Result<AudioClip, SeparatorError> {
        std::thread::sleep(self.delay);
        Ok(clip.clone())
    }
}

/// `(audio_ms_per_frame, processing_ms_per_second)` for `n_frame` samples per
/// frame at `rate` Hz: `1000 N / n` and `(n / N) * per_frame_ms`.
pub fn theoretical_frame_time(n_frame: usize, rate: u32, per_frame_ms: f64) -> Result<(f64, f64), BenchError> {
    if n_frame == 0 || rate == 0 {
        return Err(BenchError::InvalidArgs(format!(
            "frame samples and rate must be >= 1 (got {n_frame}, {rate})"
        )));
    }
    if !(per_frame_ms.is_finite() && per_frame_ms >= 0.0) {
        return Err(BenchError::InvalidArgs(format!("per_frame_ms {per_frame_ms}")));
    }
    let (n, r) = (n_frame as f64, rate as f64);
    Ok((1000.0 * n / r, (r / n) * per_frame_ms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Timing {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self {
            min: v[0],
            median,
            mean: v.iter().sum::<f64>() / n as f64,
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub repeats: usize,
    pub measured_ms: Timing,
    /// Every timed run, in order.
    pub samples_ms: Vec<f64>,
    /// Median latency divided by the clip duration.
    pub median_ms_per_second: f64,
    pub theoretical_ms_per_second: f64,
    pub realtime_ok: bool,
    pub frame_samples: usize,
    pub per_frame_ms: f64,
    /// RMS of the enhanced clip, identical across runs of the same model and seed.
    pub output_rms: f64,
}

impl BenchReport {
    pub fn from_samples(
        sample_rate: u32,
        clip_seconds: f64,
        samples_ms: Vec<f64>,
        output_rms: f64,
    ) -> Result<Self, BenchError> {
        let measured_ms = Timing::from_samples(&samples_ms)
            .ok_or_else(|| BenchError::InvalidArgs("at least one timed run is required".into()))?;
        let (_, theoretical) = theoretical_frame_time(FRAME_SAMPLES, sample_rate, PER_FRAME_MS)?;
        let median_ms_per_second = measured_ms.median / clip_seconds;
        Ok(Self {
            sample_rate,
            clip_seconds,
            repeats: samples_ms.len(),
            measured_ms,
            samples_ms,
            median_ms_per_second,
            theoretical_ms_per_second: theoretical,
            realtime_ok: median_ms_per_second <= REALTIME_THRESHOLD_MS,
            frame_samples: FRAME_SAMPLES,
            per_frame_ms: PER_FRAME_MS,
            output_rms,
        })
    }
}

/// True when the median latency per second of audio is at most `threshold_ms`.
pub fn realtime_check(report: &BenchReport, threshold_ms: f64) -> bool {
    report.median_ms_per_second <= threshold_ms
}

/// Deterministic benchmark input.
pub fn bench_clip(sample_rate: u32, clip_seconds: f64, seed: u64) -> AudioClip {
    synth::speech_like(sample_rate, clip_seconds, seed)
}

fn time_once<E: Enhancer + ?Sized>(model: &E, clip: &AudioClip) -> Result<(f64, AudioClip), BenchError> {
    let start = Instant::now();
    let out = model.enhance(black_box(clip))?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((ms, black_box(out)))
}

fn check_args(clip_seconds: f64, repeats: usize) -> Result<(), BenchError> {
    if repeats == 0 {
        return Err(BenchError::InvalidArgs("repeats must be >= 1".into()));
    }
    if !(clip_seconds.is_finite() && clip_seconds > 0.0) {
        return Err(BenchError::InvalidArgs(format!("clip_seconds {clip_seconds}")));
    }
    Ok(())
}

/// Times `repeats` calls of `enhance` on one synthesized clip after one untimed warm-up.
pub fn measure<E: Enhancer + ?Sized>(
    model: &E,
    clip_seconds: f64,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    check_args(clip_seconds, repeats)?;
    let rate = model.sample_rate();
    let clip = bench_clip(rate, clip_seconds, seed);
    let (_, out) = time_once(model, &clip)?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        samples.push(time_once(model, &clip)?.0);
    }
    BenchReport::from_samples(rate, clip_seconds, samples, out.rms())
}

/// [`measure`] on a separator forced into sequential execution.
pub fn measure_forward(
    model: &SeparatorModel,
    clip_seconds: f64,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    if model.exec_mode() == ExecMode::Sequential {
        measure(model, clip_seconds, repeats, seed)
    } else {
        let seq = model.clone().with_exec_mode(ExecMode::Sequential);
        measure(&seq, clip_seconds, repeats, seed)
    }
}

/// Measures every `(model, clip length)` pair, cycling through all pairs once
/// per repeat so slow drifts in machine load hit every cell alike.
pub fn measure_interleaved(
    models: &[&dyn Enhancer],
    clip_lengths: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchReport>, BenchError> {
    for &secs in clip_lengths {
        check_args(secs, repeats)?;
    }
    let mut cells = Vec::new();
    for &m in models {
        for &secs in clip_lengths {
            let clip = bench_clip(m.sample_rate(), secs, seed);
            let (_, out) = time_once(m, &clip)?;
            cells.push((m, secs, clip, out.rms(), Vec::with_capacity(repeats)));
        }
    }
    for _ in 0..repeats {
        for (m, _, clip, _, samples) in cells.iter_mut() {
            samples.push(time_once(*m, clip)?.0);
        }
    }
    cells
        .into_iter()
        .map(|(m, secs, _, rms, samples)| BenchReport::from_samples(m.sample_rate(), secs, samples, rms))
        .collect()
}

/// Median latency in ms: one row per clip length (longest first), one column
/// per rate, and a final row with the processing-time model per second of audio.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut rates: Vec<u32> = reports.iter().map(|r| r.sample_rate).collect();
    rates.sort_unstable();
    rates.dedup();
    let mut lengths: Vec<f64> = reports.iter().map(|r| r.clip_seconds).collect();
    lengths.sort_by(|a, b| b.total_cmp(a));
    lengths.dedup();
    let mut out = format!("{:<10}", "clip");
    for r in &rates {
        out.push_str(&format!("{:>12}", format!("{} kHz", *r as f64 / 1000.0)));
    }
    out.push('\n');
    for secs in lengths {
        out.push_str(&format!("{:<10}", format!("{secs} s")));
        for &rate in &rates {
            let cell = reports
                .iter()
                .find(|r| r.sample_rate == rate && r.clip_seconds == secs)
                .map(|r| format!("{:.1} ms", r.measured_ms.median))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("{cell:>12}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<10}", "model/s"));
    for &rate in &rates {
        let cell = reports
            .iter()
            .find(|r| r.sample_rate == rate)
            .map(|r| format!("{:.1} ms", r.theoretical_ms_per_second))
            .unwrap_or_default();
        out.push_str(&format!("{cell:>12}"));
    }
    out.push('\n');
    out
}

pub fn to_json(reports: &[BenchReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}
