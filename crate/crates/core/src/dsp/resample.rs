use std::f64::consts::PI;

use super::DspError;
use crate::audio::AudioClip;

fn output_len(len: usize, source: u32, target: u32) -> usize {
    ((len as f64) * target as f64 / source as f64).round() as usize
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// 4-point Catmull-Rom upsampler. Edge samples are replicated beyond the clip.
pub fn upsample_poly(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, DspError> {
    let source = clip.sample_rate();
    if target_rate <= source {
        return Err(DspError::NotUpsampling {
            from_hz: source,
            to_hz: target_rate,
        });
    }
    let x = clip.samples();
    let n = x.len();
    let out_len = output_len(n, source, target_rate);
    if n == 0 {
        return Ok(AudioClip::new(Vec::new(), target_rate).expect("valid rate"));
    }
    let at = |i: isize| -> f64 { x[i.clamp(0, n as isize - 1) as usize] as f64 };
    let (src, tgt) = (source as u64, target_rate as u64);
    let out: Vec<f32> = (0..out_len as u64)
        .map(|i| {
            let num = i * src;
            let base = (num / tgt) as isize;
            let t = (num % tgt) as f64 / tgt as f64;
            let (p0, p1, p2, p3) = (at(base - 1), at(base), at(base + 1), at(base + 2));
            let y = 0.5
                * (2.0 * p1
                    + (p2 - p0) * t
                    + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
                    + (3.0 * (p1 - p2) + p3 - p0) * t * t * t);
            y as f32
        })
        .collect();
    Ok(AudioClip::new(out, target_rate).expect("finite interpolation"))
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc anti-alias filter for a rational rate change.
///
/// The -6 dB cutoff sits at 0.9 x the target Nyquist frequency and the
/// transition band spans 0.8 to 1.0 x target Nyquist, so the stopband begins
/// at the target Nyquist frequency.
#[derive(Debug, Clone)]
pub struct DownsampleFilter {
    source: u32,
    target: u32,
    up: u64,
    down: u64,
    /// Half-width of the kernel in input samples.
    half_width: usize,
    /// `phases[p][j]`: tap for input offset `j - half_width + 1` from the base sample.
    phases: Vec<Vec<f64>>,
}

impl DownsampleFilter {
    pub const STOPBAND_DB: f64 = 80.0;
    pub const CUTOFF_FRACTION: f64 = 0.9;
    pub const TRANSITION_FRACTION: f64 = 0.2;

    pub fn new(source: u32, target: u32) -> Result<Self, DspError> {
        if target >= source {
            return Err(DspError::NotDownsampling {
                from_hz: source,
                to_hz: target,
            });
        }
        let g = gcd(source as u64, target as u64);
        let (up, down) = (target as u64 / g, source as u64 / g);

        let nyquist = target as f64 / 2.0;
        let cutoff = Self::CUTOFF_FRACTION * nyquist / source as f64;
        let transition = Self::TRANSITION_FRACTION * nyquist / source as f64;
        let atten = Self::STOPBAND_DB;
        let beta = 0.1102 * (atten - 8.7);
        // Kaiser order estimate: (A - 8) / (2.285 * Δω).
        let order = ((atten - 8.0) / (2.285 * 2.0 * PI * transition)).ceil();
        let half_width = (order / 2.0).ceil() as usize + 1;
        let i0_beta = bessel_i0(beta);
        let kernel = |tau: f64| -> f64 {
            let r = tau / half_width as f64;
            if r.abs() >= 1.0 {
                return 0.0;
            }
            let arg = 2.0 * cutoff * tau;
            let sinc = if arg.abs() < 1e-12 {
                1.0
            } else {
                (PI * arg).sin() / (PI * arg)
            };
            2.0 * cutoff * sinc * bessel_i0(beta * (1.0 - r * r).sqrt()) / i0_beta
        };

        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..2 * half_width)
                    .map(|j| {
                        let offset = j as f64 - half_width as f64 + 1.0;
                        kernel(frac - offset)
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Ok(Self {
            source,
            target,
            up,
            down,
            half_width,
            phases,
        })
    }

    pub fn taps(&self) -> usize {
        2 * self.half_width
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        let n = x.len() as isize;
        let out_len = output_len(x.len(), self.source, self.target);
        (0..out_len as u64)
            .map(|i| {
                let num = i * self.down;
                let base = (num / self.up) as isize;
                let taps = &self.phases[(num % self.up) as usize];
                let start = base - self.half_width as isize + 1;
                let mut acc = 0.0f64;
                for (j, &h) in taps.iter().enumerate() {
                    let idx = start + j as isize;
                    if (0..n).contains(&idx) {
                        acc += h * x[idx as usize] as f64;
                    }
                }
                acc as f32
            })
            .collect()
    }
}

/// Anti-aliased rational-rate downsampler.
pub fn downsample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, DspError> {
    let filter = DownsampleFilter::new(clip.sample_rate(), target_rate)?;
    Ok(AudioClip::new(filter.apply(clip.samples()), target_rate).expect("finite filter output"))
}

/// Resamples in whichever direction is needed; returns the input unchanged when rates match.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, DspError> {
    use std::cmp::Ordering;
    match target_rate.cmp(&clip.sample_rate()) {
        Ordering::Equal => Ok(clip.clone()),
        Ordering::Greater => upsample_poly(clip, target_rate),
        Ordering::Less => downsample(clip, target_rate),
    }
}
