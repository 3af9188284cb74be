use super::MetricError;
use crate::audio::AudioClip;

const EPS: f64 = 1e-12;

/// Scale-invariant SDR in dB over raw slices.
///
/// Returns `f64::INFINITY` when the residual is exactly zero.
pub fn si_sdr_slices(estimate: &[f64], reference: &[f64], zero_mean: bool) -> Result<f64, MetricError> {
    if estimate.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            metric: "si_sdr",
            left: estimate.len(),
            right: reference.len(),
        });
    }
    let centred = |x: &[f64]| -> Vec<f64> {
        if zero_mean && !x.is_empty() {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| v - m).collect()
        } else {
            x.to_vec()
        }
    };
    let est = centred(estimate);
    let reference = centred(reference);
    let ref_energy: f64 = reference.iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(MetricError::ZeroReference { metric: "si_sdr" });
    }
    let alpha = est.iter().zip(&reference).map(|(e, r)| e * r).sum::<f64>() / ref_energy;
    let (mut target_energy, mut error_energy) = (0.0, 0.0);
    for (e, r) in est.iter().zip(&reference) {
        let t = alpha * r;
        target_energy += t * t;
        error_energy += (e - t) * (e - t);
    }
    if error_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target_energy / (error_energy + EPS)).log10())
}

/// Scale-invariant SDR of `estimate` against `reference`; both are mean-removed first.
pub fn si_sdr(estimate: &AudioClip, reference: &AudioClip) -> Result<f64, MetricError> {
    if estimate.sample_rate() != reference.sample_rate() {
        return Err(MetricError::RateMismatch {
            metric: "si_sdr",
            left: estimate.sample_rate(),
            right: reference.sample_rate(),
        });
    }
    si_sdr_slices(&estimate.to_f64(), &reference.to_f64(), true)
}
