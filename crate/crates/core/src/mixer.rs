//! Noisy-speech mixture synthesis at controlled SNR and split manifests.
//!
//! SNR is defined on full-clip RMS. When a mixture would exceed a 0.99 peak,
//! mixture and clean reference are scaled together so the SNR is unchanged.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError, WavEncoding};
use crate::dsp::{self, DspError};

pub const PEAK_LIMIT: f64 = 0.99;
pub const LOOP_CROSSFADE_S: f64 = 0.010;
pub const MANIFEST_HEADER: &str = "mixture_path,clean_path,noise_path,snr_db,split,applied_gain,rescale";

#[derive(Debug, Error)]
pub enum MixerError {
    #[error("EmptyCorpus: no .wav files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("SilentInput: {0} has zero RMS")]
    SilentInput(String),
    #[error("rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Audio { path: String, source: AudioError },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Eval, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        })
    }
}

/// `g` such that `speech + g * noise` has the requested full-clip SNR.
pub fn noise_gain_for_snr(speech: &AudioClip, noise: &AudioClip, snr_db: f64) -> Result<f64, MixerError> {
    if speech.sample_rate() != noise.sample_rate() {
        return Err(MixerError::RateMismatch(speech.sample_rate(), noise.sample_rate()));
    }
    let (rs, rn) = (speech.rms(), noise.rms());
    if rs == 0.0 {
        return Err(MixerError::SilentInput("speech".into()));
    }
    if rn == 0.0 {
        return Err(MixerError::SilentInput("noise".into()));
    }
    Ok(rs / rn * 10f64.powf(-snr_db / 20.0))
}

/// `len` samples of `noise` starting at `offset`, looping with a short linear
/// cross-fade when the noise runs out.
pub fn fit_noise(noise: &AudioClip, len: usize, offset: usize) -> AudioClip {
    let n = noise.samples();
    let offset = offset % n.len();
    let mut out: Vec<f32> = n[offset..n.len().min(offset + len)].to_vec();
    let xf = ((LOOP_CROSSFADE_S * noise.sample_rate() as f64).round() as usize)
        .min(n.len() / 2)
        .min(out.len());
    while out.len() < len {
        let base = out.len() - xf;
        for j in 0..xf {
            let w = (j as f32 + 0.5) / xf as f32;
            out[base + j] = (1.0 - w) * out[base + j] + w * n[j];
        }
        out.extend_from_slice(&n[xf..]);
    }
    out.truncate(len);
    AudioClip::new(out, noise.sample_rate()).expect("finite noise")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: AudioClip,
    /// Clean speech, scaled by `rescale` like the mixture.
    pub clean: AudioClip,
    /// Gain on the (fitted) noise before any rescale.
    pub applied_gain: f64,
    /// Joint scale applied to keep the mixture peak at or below 0.99.
    pub rescale: f64,
}

/// Mixes `speech` with noise fitted to its length at `snr_db`.
pub fn mix(speech: &AudioClip, noise: &AudioClip, snr_db: f64) -> Result<Mixture, MixerError> {
    mix_at(speech, noise, snr_db, 0)
}

fn mix_at(speech: &AudioClip, noise: &AudioClip, snr_db: f64, offset: usize) -> Result<Mixture, MixerError> {
    if speech.sample_rate() != noise.sample_rate() {
        return Err(MixerError::RateMismatch(speech.sample_rate(), noise.sample_rate()));
    }
    if noise.rms() == 0.0 {
        return Err(MixerError::SilentInput("noise".into()));
    }
    let fitted = fit_noise(noise, speech.len(), offset);
    let g = noise_gain_for_snr(speech, &fitted, snr_db)?;
    let mut m: Vec<f64> = speech
        .samples()
        .iter()
        .zip(fitted.samples())
        .map(|(&s, &n)| s as f64 + g * n as f64)
        .collect();
    let mut clean = speech.to_f64();
    let peak = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rescale = if peak > PEAK_LIMIT { PEAK_LIMIT / peak } else { 1.0 };
    if rescale != 1.0 {
        m.iter_mut().for_each(|v| *v *= rescale);
        clean.iter_mut().for_each(|v| *v *= rescale);
    }
    let rate = speech.sample_rate();
    Ok(Mixture {
        mixture: AudioClip::from_f64(&m, rate).expect("finite"),
        clean: AudioClip::from_f64(&clean, rate).expect("finite"),
        applied_gain: g,
        rescale,
    })
}

/// SNR of `mixture - clean` against `clean`, in dB.
pub fn measured_snr_db(clean: &AudioClip, mixture: &AudioClip) -> f64 {
    let (mut s, mut e) = (0.0f64, 0.0f64);
    for (&c, &m) in clean.samples().iter().zip(mixture.samples()) {
        s += (c as f64).powi(2);
        e += (m as f64 - c as f64).powi(2);
    }
    10.0 * (s / e).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub speech_dir: PathBuf,
    pub noise_dir: PathBuf,
    pub output_dir: PathBuf,
    pub sample_rate: u32,
    pub snr_range_db: (f64, f64),
    pub seed: u64,
    /// Train / eval / test fractions.
    pub split: [f64; 3],
    /// Stop adding speech files once this much audio is planned.
    pub target_hours: Option<f64>,
}

impl MixtureSpec {
    pub fn new(speech_dir: impl Into<PathBuf>, noise_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            speech_dir: speech_dir.into(),
            noise_dir: noise_dir.into(),
            output_dir: output_dir.into(),
            sample_rate: 16000,
            snr_range_db: (-3.0, 12.0),
            seed: 0,
            split: [0.8, 0.1, 0.1],
            target_hours: None,
        }
    }

    pub fn validate(&self) -> Result<(), MixerError> {
        let (lo, hi) = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(MixerError::InvalidSpec(format!("snr range [{lo}, {hi}]")));
        }
        if self.split.iter().any(|f| !(f.is_finite() && *f >= 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MixerError::InvalidSpec(format!("split fractions {:?} must sum to 1", self.split)));
        }
        if self.sample_rate == 0 {
            return Err(MixerError::InvalidSpec("sample_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// Relative to the output directory.
    pub mixture_path: String,
    /// Relative to the output directory.
    pub clean_path: String,
    pub noise_path: String,
    pub snr_db: f64,
    pub split: Split,
    pub applied_gain: f64,
    pub rescale: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixtureManifest {
    pub rows: Vec<ManifestRow>,
}

impl MixtureManifest {
    pub fn to_csv_string(&self) -> Result<String, MixerError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(MANIFEST_HEADER.split(','))?;
        }
        let bytes = w.into_inner().map_err(|e| MixerError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MixerError> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, MixerError> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<Result<Vec<ManifestRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn count(&self, split: Split) -> usize {
        self.rows.iter().filter(|r| r.split == split).count()
    }
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, MixerError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(MixerError::EmptyCorpus(dir.to_path_buf()));
    }
    Ok(files)
}

fn read_at(path: &Path, rate: u32) -> Result<AudioClip, MixerError> {
    let clip = audio::read_wav(path).map_err(|source| MixerError::Audio {
        path: path.display().to_string(),
        source,
    })?;
    Ok(dsp::resample(&clip, rate)?)
}

fn write_f32(clip: &AudioClip, path: &Path) -> Result<(), MixerError> {
    audio::write_wav(clip, path, WavEncoding::Float32).map_err(|source| MixerError::Audio {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Train / eval / test counts for `n` rows: eval and test are rounded, train takes the rest.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let eval = ((n as f64 * fractions[1]).round() as usize).min(n);
    let test = ((n as f64 * fractions[2]).round() as usize).min(n - eval);
    [n - eval - test, eval, test]
}

struct Plan {
    speech: PathBuf,
    noise: PathBuf,
    /// Fraction of the usable noise range to skip; 0 on a noise file's first use.
    offset_frac: f64,
    snr_db: f64,
    split: Split,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Builds every mixture described by `spec`, writes float32 WAVs under
/// `output_dir/<split>/{mixture,clean}/` plus `output_dir/manifest.csv`.
///
/// Everything random is drawn up front from the seed, so the manifest is a
/// pure function of the spec even though files are mixed in parallel.
pub fn generate_dataset(spec: &MixtureSpec) -> Result<MixtureManifest, MixerError> {
    spec.validate()?;
    let mut speech = wav_files(&spec.speech_dir)?;
    let noise = wav_files(&spec.noise_dir)?;
    if let Some(hours) = spec.target_hours {
        let budget = hours * 3600.0;
        let mut total = 0.0;
        let mut keep = 0;
        for p in &speech {
            if total >= budget {
                break;
            }
            total += audio::wav_duration_seconds(p).map_err(|source| MixerError::Audio {
                path: p.display().to_string(),
                source,
            })?;
            keep += 1;
        }
        speech.truncate(keep.max(1));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_order: Vec<usize> = Vec::new();
    let mut pass = 0usize;
    let mut assignments = Vec::with_capacity(speech.len());
    for i in 0..speech.len() {
        if i % noise.len() == 0 {
            noise_order = (0..noise.len()).collect();
            noise_order.shuffle(&mut rng);
            pass = i / noise.len();
        }
        let offset_frac = if pass == 0 { 0.0 } else { rng.gen::<f64>() };
        let (lo, hi) = spec.snr_range_db;
        let snr_db = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        assignments.push((noise_order[i % noise.len()], offset_frac, snr_db));
    }
    let counts = split_counts(speech.len(), spec.split);
    let mut order: Vec<usize> = (0..speech.len()).collect();
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Train; speech.len()];
    for (rank, &row) in order.iter().enumerate() {
        splits[row] = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Eval
        } else {
            Split::Test
        };
    }
    let plans: Vec<Plan> = speech
        .iter()
        .zip(assignments)
        .zip(splits)
        .map(|((s, (ni, offset_frac, snr_db)), split)| Plan {
            speech: s.clone(),
            noise: noise[ni].clone(),
            offset_frac,
            snr_db,
            split,
        })
        .collect();

    for split in Split::ALL {
        for kind in ["mixture", "clean"] {
            std::fs::create_dir_all(spec.output_dir.join(split.to_string()).join(kind))?;
        }
    }
    let rows = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| -> Result<ManifestRow, MixerError> {
            let s = read_at(&plan.speech, spec.sample_rate)?;
            if s.rms() == 0.0 {
                return Err(MixerError::SilentInput(plan.speech.display().to_string()));
            }
            let n = read_at(&plan.noise, spec.sample_rate)?;
            if n.rms() == 0.0 {
                return Err(MixerError::SilentInput(plan.noise.display().to_string()));
            }
            let span = if n.len() > s.len() { n.len() - s.len() + 1 } else { n.len() };
            let offset = (plan.offset_frac * span as f64) as usize;
            let m = mix_at(&s, &n, plan.snr_db, offset)?;
            let name = format!("{i:05}_{}_{}.wav", stem(&plan.speech), stem(&plan.noise));
            let mixture_rel = format!("{}/mixture/{name}", plan.split);
            let clean_rel = format!("{}/clean/{name}", plan.split);
            write_f32(&m.mixture, &spec.output_dir.join(&mixture_rel))?;
            write_f32(&m.clean, &spec.output_dir.join(&clean_rel))?;
            Ok(ManifestRow {
                mixture_path: mixture_rel,
                clean_path: clean_rel,
                noise_path: plan.noise.display().to_string(),
                snr_db: plan.snr_db,
                split: plan.split,
                applied_gain: m.applied_gain,
                rescale: m.rescale,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = MixtureManifest { rows };
    manifest.write_csv(&spec.output_dir.join("manifest.csv"))?;
    Ok(manifest)
}
