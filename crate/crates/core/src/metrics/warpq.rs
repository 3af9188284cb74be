use ndarray::{ArrayView2, Axis};

use super::MetricError;
use crate::audio::AudioClip;
use crate::dsp::{mfcc, MfccConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct WarpqConfig {
    pub patch_s: f64,
    pub features: MfccConfig,
}

impl Default for WarpqConfig {
    fn default() -> Self {
        Self {
            patch_s: 0.5,
            features: MfccConfig::default(),
        }
    }
}

/// Best subsequence alignment of `patch` anywhere inside `reference`.
///
/// Local cost is the Euclidean frame distance, steps are (1,0), (0,1) and
/// (1,1), and the path may start and end at any reference frame. Returns the
/// optimal accumulated cost divided by the length of that path.
pub fn subsequence_dtw(patch: ArrayView2<f64>, reference: ArrayView2<f64>) -> f64 {
    let (p, r) = (patch.nrows(), reference.nrows());
    assert!(p > 0 && r > 0);
    let dist = |i: usize, j: usize| -> f64 {
        patch
            .row(i)
            .iter()
            .zip(reference.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut prev_cost: Vec<f64> = (0..r).map(|j| dist(0, j)).collect();
    let mut prev_len: Vec<usize> = vec![1; r];
    let mut cost = vec![0.0; r];
    let mut len = vec![0usize; r];
    for i in 1..p {
        for j in 0..r {
            let c = dist(i, j);
            let best = if j == 0 {
                (prev_cost[0], prev_len[0])
            } else {
                // Diagonal wins ties.
                let mut best = (prev_cost[j - 1], prev_len[j - 1]);
                for cand in [(prev_cost[j], prev_len[j]), (cost[j - 1], len[j - 1])] {
                    if cand.0 < best.0 {
                        best = cand;
                    }
                }
                best
            };
            cost[j] = c + best.0;
            len[j] = best.1 + 1;
        }
        std::mem::swap(&mut prev_cost, &mut cost);
        std::mem::swap(&mut prev_len, &mut len);
    }
    let (mut best, mut best_len) = (f64::INFINITY, 1usize);
    for j in 0..r {
        if prev_cost[j] < best {
            best = prev_cost[j];
            best_len = prev_len[j];
        }
    }
    best / best_len as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median per-patch subsequence-DTW distance between MFCC sequences.
///
/// The degraded features are cut into consecutive non-overlapping patches of
/// `patch_s`; a trailing partial patch is dropped.
pub fn warpq(
    reference: &AudioClip,
    degraded: &AudioClip,
    config: &WarpqConfig,
) -> Result<f64, MetricError> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(MetricError::RateMismatch {
            metric: "warpq",
            left: reference.sample_rate(),
            right: degraded.sample_rate(),
        });
    }
    let needed = 2.0 * config.patch_s;
    for clip in [reference, degraded] {
        if clip.duration_seconds() < needed {
            return Err(MetricError::TooShort {
                metric: "warpq",
                seconds: clip.duration_seconds(),
                needed,
            });
        }
    }
    let ref_feat = mfcc(reference, &config.features)?;
    let deg_feat = mfcc(degraded, &config.features)?;
    let patch_frames = ((config.patch_s * deg_feat.frame_rate_hz).round() as usize).max(1);
    let costs: Vec<f64> = deg_feat
        .rows
        .axis_chunks_iter(Axis(0), patch_frames)
        .filter(|chunk| chunk.nrows() == patch_frames)
        .map(|chunk| subsequence_dtw(chunk, ref_feat.rows.view()))
        .collect();
    if costs.is_empty() {
        return Err(MetricError::TooShort {
            metric: "warpq",
            seconds: degraded.duration_seconds(),
            needed,
        });
    }
    Ok(median(costs))
}

/// `1 / (|computed - reference| + 1)`.
pub fn warpq_norm(warpq_computed: f64, warpq_reference: f64) -> f64 {
    1.0 / ((warpq_computed - warpq_reference).abs() + 1.0)
}
