//! WAV input/output and the mono [`AudioClip`] every other module works on.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono floating-point audio at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting a zero rate and NaN/Inf samples.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        if let Some(idx) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(idx));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a clip from `f64` samples (narrowed to `f32`).
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(samples.iter().map(|&s| s as f32).collect(), sample_rate)
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    pub fn rms(&self) -> f64 {
        rms(&self.to_f64())
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Sample encoding used when writing a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Averages interleaved frames down to one channel.
pub fn downmix(interleaved: &[f32], channels: usize) -> Vec<f32> {
    match channels {
        0 | 1 => interleaved.to_vec(),
        n => interleaved
            .chunks_exact(n)
            .map(|frame| frame.iter().sum::<f32>() / n as f32)
            .collect(),
    }
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::FormatError(msg) => AudioError::MalformedHeader(msg.to_string()),
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("compressed or unknown format tag".into())
        }
        other => AudioError::UnsupportedEncoding(other.to_string()),
    }
}

/// Reads a 16-bit PCM or 32-bit float WAV file and returns it as a mono clip.
///
/// Integer samples are scaled by 1/32768 so that -32768 maps to exactly -1.0.
/// Stereo input is averaged to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{channels} channels (only mono and stereo are supported)"
        )));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (format, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "{bits}-bit {format:?}"
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    AudioClip::new(downmix(&interleaved, channels), spec.sample_rate)
}

/// Duration from the header alone, without decoding samples.
pub fn wav_duration_seconds(path: impl AsRef<Path>) -> Result<f64, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    let rate = reader.spec().sample_rate;
    if rate == 0 {
        return Err(AudioError::InvalidSampleRate(rate));
    }
    Ok(reader.duration() as f64 / rate as f64)
}

/// Quantizes a sample to 16-bit PCM, returning the stored value and whether it was clipped.
pub fn quantize_pcm16(sample: f32) -> (i16, bool) {
    let scaled = (sample as f64 * 32768.0).round();
    let clipped = scaled.clamp(i16::MIN as f64, i16::MAX as f64);
    (clipped as i16, sample.abs() > 1.0)
}

/// Writes a mono WAV file. Returns the number of samples that fell outside
/// [-1, 1] and were hard-clipped (always 0 for float32).
pub fn write_wav(
    clip: &AudioClip,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<usize, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(map_hound)?;
    let mut clipped = 0usize;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in clip.samples() {
                let (v, was_clipped) = quantize_pcm16(s);
                clipped += was_clipped as usize;
                writer.write_sample(v).map_err(map_hound)?;
            }
        }
        WavEncoding::Float32 => {
            for &s in clip.samples() {
                writer.write_sample(s).map_err(map_hound)?;
            }
        }
    }
    writer.finalize().map_err(map_hound)?;
    if clipped > 0 {
        log::warn!(
            "{} samples outside [-1, 1] were clipped writing {}",
            clipped,
            path.as_ref().display()
        );
    }
    Ok(clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw_i16(path: &Path, channels: u16, rate: u32, data: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &d in data {
            w.write_sample(d).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn zero_file_reads_as_zero_clip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_raw_i16(&p, 1, 8000, &vec![0; 8000]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.sample_rate(), 8000);
        assert_eq!(clip.len(), 8000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
        assert_eq!(clip.duration_seconds(), 1.0);
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_raw_i16(&p, 1, 8000, &[-32768, 16384]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.5]);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let data: Vec<i16> = (0..200).flat_map(|_| [16384i16, -16384]).collect();
        write_raw_i16(&p, 2, 16000, &data);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 200);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let samples: Vec<f32> = (0..4800)
            .map(|i| (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 48000.0).sin() * 0.8)
            .collect();
        let clip = AudioClip::new(samples, 48000).unwrap();
        assert_eq!(write_wav(&clip, &p, WavEncoding::Float32).unwrap(), 0);
        assert_eq!(read_wav(&p).unwrap(), clip);
    }

    #[test]
    fn pcm16_write_scaling_and_clipping() {
        assert_eq!(quantize_pcm16(0.5), (16384, false));
        assert_eq!(quantize_pcm16(1.5), (32767, true));
        assert_eq!(quantize_pcm16(-1.0), (-32768, false));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let clip = AudioClip::new(vec![0.5, 1.5, -2.0], 8000).unwrap();
        assert_eq!(write_wav(&clip, &p, WavEncoding::Pcm16).unwrap(), 2);
        let stored: Vec<i16> = hound::WavReader::open(&p)
            .unwrap()
            .into_samples::<i16>()
            .map(Result::unwrap)
            .collect();
        assert_eq!(stored, vec![16384, 32767, -32768]);
    }

    #[test]
    fn malformed_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"this is not a riff file at all, nope").unwrap();
        assert!(matches!(
            read_wav(&junk),
            Err(AudioError::MalformedHeader(_))
        ));

        let empty = dir.path().join("empty.wav");
        write_raw_i16(&empty, 1, 8000, &[]);
        assert!(matches!(read_wav(&empty), Err(AudioError::EmptyAudio)));

        let clip = AudioClip::new(vec![], 8000).unwrap();
        assert!(matches!(
            write_wav(&clip, dir.path().join("x.wav"), WavEncoding::Pcm16),
            Err(AudioError::EmptyAudio)
        ));
    }

    #[test]
    fn unsupported_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1000i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_wav(&p),
            Err(AudioError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn clip_invariants() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(matches!(
            AudioClip::new(vec![0.0, f32::NAN], 8000),
            Err(AudioError::NonFinite(1))
        ));
    }

    proptest! {
        #[test]
        fn pcm16_round_trip_within_quantization(samples in prop::collection::vec(-1.0f32..=1.0, 1..256)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.wav");
            let clip = AudioClip::new(samples, 16000).unwrap();
            write_wav(&clip, &p, WavEncoding::Pcm16).unwrap();
            let back = read_wav(&p).unwrap();
            for (a, b) in clip.samples().iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-7);
            }
        }

        #[test]
        fn downmix_is_linear(
            a in prop::collection::vec(-1.0f32..1.0, 64),
            b in prop::collection::vec(-1.0f32..1.0, 64),
        ) {
            let sum: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = downmix(&sum, 2);
            let rhs: Vec<f32> = downmix(&a, 2).iter().zip(downmix(&b, 2)).map(|(x, y)| x + y).collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() < 1e-6);
            }
        }
    }
}
