use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::fusion::{InstanceId, Rle, Track};

pub const CUE_FRAMES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Crop around the instance box.
    Crop,
    /// Full frame with the box outlined and the background dimmed.
    Highlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueWeights {
    pub area: f64,
    pub center: f64,
}

impl Default for CueWeights {
    fn default() -> Self {
        Self { area: 1.0, center: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueFrame {
    pub frame: u64,
    pub mode: RenderMode,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueFrameSet {
    pub instance_id: InstanceId,
    pub frames: Vec<CueFrame>,
}

impl CueFrameSet {
    pub fn frame_indices(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.frame).collect()
    }
}

/// Area fraction minus the weighted normalised distance between the mask
/// centroid and the image center. Empty masks never win.
pub fn cue_score(mask: &Rle, weights: &CueWeights) -> f64 {
    let Some((r, c)) = mask.centroid() else {
        return f64::NEG_INFINITY;
    };
    let (h, w) = (f64::from(mask.height()), f64::from(mask.width()));
    let area_fraction = mask.area() as f64 / (h * w);
    let (cr, cc) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);
    let half_diag = (h * h + w * w).sqrt() / 2.0;
    let dist = ((r - cr).powi(2) + (c - cc).powi(2)).sqrt() / half_diag;
    weights.area * area_fraction - weights.center * dist
}

/// One frame per chronological octile of the track's recorded frames, the
/// best-scoring frame within each (earliest on ties). The first four are
/// rendered as crops, the rest highlighted.
pub fn select_cue_frames(track: &Track, weights: &CueWeights) -> Result<CueFrameSet, ForgeError> {
    let frames: Vec<(u64, &Rle)> = track.frames.iter().map(|(&f, tf)| (f, &tf.mask)).collect();
    let n = frames.len();
    if n < CUE_FRAMES {
        return Err(ForgeError::TooShortTrack {
            instance_id: track.instance_id,
            frames: n,
        });
    }
    let mut out = Vec::with_capacity(CUE_FRAMES);
    for g in 0..CUE_FRAMES {
        let group = &frames[g * n / CUE_FRAMES..(g + 1) * n / CUE_FRAMES];
        let mut best = (group[0].0, cue_score(group[0].1, weights));
        for &(f, m) in &group[1..] {
            let s = cue_score(m, weights);
            if s > best.1 {
                best = (f, s);
            }
        }
        out.push(CueFrame {
            frame: best.0,
            mode: if g < CUE_FRAMES / 2 { RenderMode::Crop } else { RenderMode::Highlight },
            score: best.1,
        });
    }
    Ok(CueFrameSet {
        instance_id: track.instance_id,
        frames: out,
    })
}
