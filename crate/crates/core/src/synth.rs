//! Deterministic synthetic signals for tests, benchmarks and demos.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::AudioClip;

pub fn sine(freq_hz: f64, amplitude: f64, sample_rate: u32, len: usize) -> AudioClip {
    harmonic_tone(freq_hz, &[amplitude], sample_rate, len)
}

/// `amplitudes[k]` is the amplitude of harmonic `k + 1`.
pub fn harmonic_tone(f0_hz: f64, amplitudes: &[f64], sample_rate: u32, len: usize) -> AudioClip {
    let samples: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            amplitudes
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * PI * f0_hz * (k + 1) as f64 * t).sin())
                .sum()
        })
        .collect();
    AudioClip::from_f64(&samples, sample_rate).expect("finite tone")
}

/// Gaussian white noise with the given RMS.
pub fn white_noise(len: usize, rms: f64, sample_rate: u32, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            rms * z
        })
        .collect();
    AudioClip::from_f64(&samples, sample_rate).expect("finite noise")
}

/// Voiced, syllable-shaped harmonic signal with a drifting pitch and pauses.
///
/// Each syllable is 150-300 ms of a harmonic complex (f0 100-220 Hz) shaped by
/// two resonances, with a raised-cosine envelope, separated by 40-120 ms gaps.
/// The result is normalized to a peak of 0.5.
pub fn speech_like(sample_rate: u32, seconds: f64, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (seconds * sample_rate as f64).round() as usize;
    let rate = sample_rate as f64;
    let mut out = vec![0.0f64; len];
    let nyquist = rate / 2.0;
    let mut pos = (rng.gen_range(0.02..0.06) * rate) as usize;
    while pos < len {
        let dur = (rng.gen_range(0.15..0.30) * rate) as usize;
        let f0_start: f64 = rng.gen_range(100.0..220.0);
        let f0_end = f0_start * rng.gen_range(0.85..1.15);
        let formants = [rng.gen_range(400.0..900.0), rng.gen_range(1000.0..2500.0)];
        let mut phase = 0.0f64;
        for i in 0..dur.min(len - pos) {
            let u = i as f64 / dur as f64;
            let f0 = f0_start + (f0_end - f0_start) * u;
            phase += 2.0 * PI * f0 / rate;
            let env = 0.5 - 0.5 * (2.0 * PI * u).cos();
            let mut v = 0.0;
            let mut k = 1.0;
            while k * f0 < nyquist.min(4000.0) {
                let f = k * f0;
                let gain: f64 = formants
                    .iter()
                    .map(|&fc| 1.0 / (1.0 + ((f - fc) / 150.0).powi(2)))
                    .sum::<f64>()
                    + 0.05;
                v += gain / k.sqrt() * (k * phase).sin();
                k += 1.0;
            }
            out[pos + i] += env * v;
        }
        pos += dur + (rng.gen_range(0.04..0.12) * rate) as usize;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    AudioClip::from_f64(&out, sample_rate).expect("finite signal")
}

/// `clean + noise` with the noise scaled to the requested full-clip SNR.
pub fn add_noise_at_snr(clean: &AudioClip, snr_db: f64, seed: u64) -> AudioClip {
    let noise = white_noise(clean.len(), 1.0, clean.sample_rate(), seed);
    let gain = clean.rms() / noise.rms() * 10f64.powf(-snr_db / 20.0);
    let mixed: Vec<f64> = clean
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(&c, &n)| c as f64 + gain * n as f64)
        .collect();
    AudioClip::from_f64(&mixed, clean.sample_rate()).expect("finite mixture")
}

/// Prepends `delay` zeros and drops the same number of trailing samples.
pub fn delayed(clip: &AudioClip, delay: usize) -> AudioClip {
    let mut s = vec![0.0f32; delay.min(clip.len())];
    s.extend_from_slice(&clip.samples()[..clip.len() - s.len()]);
    AudioClip::new(s, clip.sample_rate()).expect("finite")
}

/// Steady 140 Hz harmonic vowel spanning the band up to 0.45 of the sample
/// rate, with 20 ms ramps and `pad_s` of silence on both sides.
pub fn sustained_vowel(sample_rate: u32, seconds: f64, pad_s: f64) -> AudioClip {
    let rate = sample_rate as f64;
    let n = (seconds * rate).round() as usize;
    let pad = (pad_s * rate).round() as usize;
    let f0 = 140.0;
    let mut out = vec![0.0f64; n + 2 * pad];
    for i in 0..n {
        let t = i as f64 / rate;
        let ramp = (t / 0.02).min(1.0).min((seconds - t) / 0.02).max(0.0);
        let mut v = 0.0;
        let mut k = 1.0;
        while k * f0 < 0.45 * rate {
            v += (2.0 * PI * k * f0 * t).sin() / k.sqrt();
            k += 1.0;
        }
        out[pad + i] = 0.05 * ramp * v;
    }
    AudioClip::from_f64(&out, sample_rate).expect("finite signal")
}
