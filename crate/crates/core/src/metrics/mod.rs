//! Objective quality metrics: SI-SDR, STOI, THD and WARP-Q, plus the two
//! normalizations computed against a clean 48 kHz reference.
//!
//! THD normalization uses `computed - reference`. Read literally, the
//! accompanying description ("distortion before processing minus distortion
//! after processing") has the opposite sign; the formula wins here and callers
//! that want the other convention can negate it.

mod si_sdr;
mod stoi;
mod thd;
mod warpq;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use self::si_sdr::{si_sdr, si_sdr_slices};
pub use self::stoi::{stoi, STOI_RATE};
pub use self::thd::{harmonics, thd, thd_norm, Harmonic, ThdConfig};
pub use self::warpq::{subsequence_dtw, warpq, warpq_norm, WarpqConfig};

use crate::audio::AudioClip;
use crate::dsp::{self, DspError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("LengthMismatch: {metric} ({left} vs {right} samples)")]
    LengthMismatch {
        metric: &'static str,
        left: usize,
        right: usize,
    },
    #[error("RateMismatch: {metric} ({left} Hz vs {right} Hz)")]
    RateMismatch {
        metric: &'static str,
        left: u32,
        right: u32,
    },
    #[error("ZeroReference: {metric}")]
    ZeroReference { metric: &'static str },
    #[error("AllFramesSilent: {metric}")]
    AllFramesSilent { metric: &'static str },
    #[error("TooShort: {metric} ({seconds:.3} s, need {needed:.3} s)")]
    TooShort {
        metric: &'static str,
        seconds: f64,
        needed: f64,
    },
    #[error("NoFundamental: {metric}")]
    NoFundamental { metric: &'static str },
    #[error("signal processing error: {0}")]
    Dsp(#[from] DspError),
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

/// Per-pair evaluation result. `thd_norm` and `warpq_norm` are present only
/// when a clean 48 kHz reference was supplied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    /// `+inf` (serialized as the string `"inf"`) when the estimate is an exact scaled copy.
    #[serde(serialize_with = "serialize_db")]
    pub si_sdr_db: f64,
    pub stoi: f64,
    pub thd_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thd_norm: Option<f64>,
    pub warpq_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warpq_norm: Option<f64>,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 6] = [
        "si_sdr_db",
        "stoi",
        "thd_percent",
        "thd_norm",
        "warpq_distance",
        "warpq_norm",
    ];

    /// Values in [`Self::CSV_HEADER`] order; absent fields are empty strings.
    pub fn csv_record(&self) -> [String; 6] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.si_sdr_db.to_string(),
            self.stoi.to_string(),
            self.thd_percent.to_string(),
            opt(self.thd_norm),
            self.warpq_distance.to_string(),
            opt(self.warpq_norm),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).expect("in-memory write");
        w.write_record(self.csv_record()).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Number of metric fields that carry a value.
    pub fn populated_fields(&self) -> usize {
        4 + self.thd_norm.is_some() as usize + self.warpq_norm.is_some() as usize
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub thd: ThdConfig,
    pub warpq: WarpqConfig,
}

/// Runs every metric on an aligned `(reference, degraded)` pair.
///
/// With `ref48k`, the degraded clip is brought to that rate (Catmull-Rom when
/// upsampling) and compared with it: `thd_norm = thd(degraded) - thd(ref48k)`
/// and `warpq_norm` uses `warpq(ref48k, degraded)` against the reference's
/// self-distance.
pub fn evaluate_pair(
    reference: &AudioClip,
    degraded: &AudioClip,
    ref48k: Option<&AudioClip>,
    config: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    let si_sdr_db = si_sdr(degraded, reference)?;
    let stoi = stoi(degraded, reference)?;
    let thd_percent = thd(degraded, &config.thd)?;
    let warpq_distance = warpq(reference, degraded, &config.warpq)?;

    let (thd_norm, warpq_norm) = match ref48k {
        None => (None, None),
        Some(clean) => {
            let lifted = dsp::resample(degraded, clean.sample_rate())?;
            let thd_computed = thd(&lifted, &config.thd)?;
            let thd_reference = thd(clean, &config.thd)?;
            let warpq_computed = warpq(clean, &lifted, &config.warpq)?;
            let warpq_reference = warpq(clean, clean, &config.warpq)?;
            (
                Some(thd::thd_norm(thd_computed, thd_reference)),
                Some(warpq::warpq_norm(warpq_computed, warpq_reference)),
            )
        }
    };
    Ok(MetricReport {
        si_sdr_db,
        stoi,
        thd_percent,
        thd_norm,
        warpq_distance,
        warpq_norm,
    })
}
