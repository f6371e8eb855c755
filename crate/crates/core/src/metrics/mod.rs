//! Answer scoring: numeric, angular, mask-track and judge-based metrics,
//! the evaluation frame-sampling policy, and report aggregation.

mod boundary;
mod score;

pub use boundary::{boundary_map, frame_boundary_f, squared_distance_transform, tolerance_px, BOUNDARY_TOLERANCE};
pub use score::*;

use serde::{Deserialize, Serialize};

use crate::fusion::{MaskError, Rle};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("ground truth {0} is not positive")]
    NonPositiveGroundTruth(f64),
    #[error("mask size mismatch in frame {frame}")]
    SizeMismatch { frame: usize },
    #[error("no frame has a non-empty ground-truth mask")]
    NoForegroundFrames,
    #[error("no frames to score")]
    NoFrames,
    #[error("target frame {frame} outside a {total}-frame video")]
    TargetOutOfRange { frame: u64, total: u64 },
    #[error("invalid frame rate {0}")]
    InvalidFps(f64),
    #[error("mask: {0}")]
    Mask(#[from] MaskError),
}

/// Confidence thresholds of the mean relative accuracy.
pub const MRA_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// Fraction of thresholds θ with relative error strictly below 1 - θ.
pub fn mra(pred: f64, gt: f64) -> Result<f64, MetricError> {
    if !(gt > 0.0) {
        return Err(MetricError::NonPositiveGroundTruth(gt));
    }
    let rel = (pred - gt).abs() / gt;
    let passed = MRA_THRESHOLDS.iter().filter(|&&t| rel < 1.0 - t).count();
    Ok(passed as f64 / MRA_THRESHOLDS.len() as f64)
}

/// Smallest angle between two headings, in [0, 180].
pub fn angular_distance(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Rotational accuracy, linear in the wrapped angular error up to 90°.
pub fn roa(pred_deg: f64, gt_deg: f64) -> f64 {
    1.0 - (angular_distance(pred_deg, gt_deg) / 90.0).min(1.0)
}

fn check_sizes(frames: &[(Rle, Rle)]) -> Result<(), MetricError> {
    if frames.is_empty() {
        return Err(MetricError::NoFrames);
    }
    let size = frames[0].1.size();
    for (i, (p, g)) in frames.iter().enumerate() {
        if p.size() != size || g.size() != size {
            return Err(MetricError::SizeMismatch { frame: i });
        }
    }
    Ok(())
}

/// Video-level IoU: total intersection over total union across all frames of
/// `(prediction, ground truth)` pairs. A video with no foreground anywhere
/// scores 1.
pub fn global_j(frames: &[(Rle, Rle)]) -> Result<f64, MetricError> {
    check_sizes(frames)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (p, g) in frames {
        inter += p.intersection_area(g)?;
        union += p.union_area(g)?;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean contour F-measure over frames whose ground truth is non-empty.
pub fn boundary_f(frames: &[(Rle, Rle)]) -> Result<f64, MetricError> {
    check_sizes(frames)?;
    let scores: Vec<f64> = frames.iter().filter(|(_, g)| !g.is_empty()).map(|(p, g)| frame_boundary_f(p, g)).collect();
    if scores.is_empty() {
        return Err(MetricError::NoForegroundFrames);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JfScore {
    pub j: f64,
    pub f: f64,
    pub mean: f64,
}

pub fn jf_mean(frames: &[(Rle, Rle)]) -> Result<JfScore, MetricError> {
    let j = global_j(frames)?;
    let f = boundary_f(frames)?;
    Ok(JfScore { j, f, mean: (j + f) / 2.0 })
}

pub const MAX_EVAL_FRAMES: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSample {
    /// Ascending frame indices.
    pub frames: Vec<u64>,
    /// More than the cap of target frames were supplied and were thinned.
    pub targets_truncated: bool,
}

/// `k` evenly spread picks from `items` (bin centres).
fn uniform_pick<T: Copy>(items: &[T], k: usize) -> Vec<T> {
    let m = items.len();
    (0..k.min(m)).map(|i| items[((2 * i + 1) * m) / (2 * k)]).collect()
}

/// Evaluation frames: a 1 fps grid plus every target frame, capped at 30.
/// Over the cap, targets are kept and the rest is filled uniformly from the
/// non-target grid frames; more than 30 targets are thinned uniformly.
pub fn sample_frames(video_frames: u64, fps: f64, targets: &[u64]) -> Result<FrameSample, MetricError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(MetricError::InvalidFps(fps));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= video_frames) {
        return Err(MetricError::TargetOutOfRange { frame: bad, total: video_frames });
    }
    let mut grid: Vec<u64> = Vec::new();
    for k in 0u64.. {
        let f = (k as f64 * fps).floor() as u64;
        if f >= video_frames {
            break;
        }
        if grid.last() != Some(&f) {
            grid.push(f);
        }
    }
    let mut tset: Vec<u64> = targets.to_vec();
    tset.sort_unstable();
    tset.dedup();

    let mut pool: Vec<u64> = grid.iter().chain(&tset).copied().collect();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() <= MAX_EVAL_FRAMES {
        return Ok(FrameSample {
            frames: pool,
            targets_truncated: false,
        });
    }
    if tset.len() > MAX_EVAL_FRAMES {
        return Ok(FrameSample {
            frames: uniform_pick(&tset, MAX_EVAL_FRAMES),
            targets_truncated: true,
        });
    }
    let others: Vec<u64> = grid.iter().copied().filter(|f| tset.binary_search(f).is_err()).collect();
    let mut frames = tset;
    frames.extend(uniform_pick(&others, MAX_EVAL_FRAMES - frames.len()));
    frames.sort_unstable();
    Ok(FrameSample {
        frames,
        targets_truncated: false,
    })
}

#[cfg(test)]
mod tests;
