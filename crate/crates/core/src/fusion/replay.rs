use std::collections::BTreeMap;

use super::{mask_iou, DetectionBatch, FusionError, Proposal, Rle, Tracker};

/// One physical object's ground-truth masks, keyed by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayObject {
    pub category: String,
    pub masks: BTreeMap<u64, Rle>,
}

impl ReplayObject {
    pub fn new(category: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            masks: BTreeMap::new(),
        }
    }

    /// Same mask on every frame of `[start, end)`.
    pub fn visible(mut self, start: u64, end: u64, mask: &Rle) -> Self {
        for f in start..end {
            self.masks.insert(f, mask.clone());
        }
        self
    }
}

/// Tracker over recorded masks: a query mask is associated with the recorded
/// object it overlaps most at the source frame, and that object's mask at the
/// destination frame is returned. Used to replay upstream tracker output and
/// as the scripted backend for tests.
#[derive(Debug, Clone, Default)]
pub struct ReplayTracker {
    pub objects: Vec<ReplayObject>,
    /// Frame at which `propagate` reports a backend failure.
    pub fail_at: Option<u64>,
    pub calls: usize,
}

impl ReplayTracker {
    pub fn new(objects: Vec<ReplayObject>) -> Self {
        Self {
            objects,
            fail_at: None,
            calls: 0,
        }
    }

    /// Proposals for every object visible on each key frame.
    pub fn detections(&self, key_frames: impl IntoIterator<Item = u64>) -> Vec<DetectionBatch> {
        key_frames
            .into_iter()
            .map(|k| DetectionBatch {
                key_frame_index: k,
                proposals: self
                    .objects
                    .iter()
                    .filter_map(|o| {
                        o.masks.get(&k).filter(|m| !m.is_empty()).map(|m| Proposal {
                            category: o.category.clone(),
                            mask: m.clone(),
                        })
                    })
                    .collect(),
            })
            .filter(|b| !b.proposals.is_empty())
            .collect()
    }
}

impl Tracker for ReplayTracker {
    fn propagate(&mut self, mask: &Rle, from: u64, to: u64) -> Result<Option<Rle>, FusionError> {
        self.calls += 1;
        if self.fail_at == Some(to) {
            return Err(FusionError::TrackerFailure {
                frame: to,
                message: "scripted failure".into(),
            });
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            let Some(m) = o.masks.get(&from) else { continue };
            let iou = mask_iou(mask, m)?;
            if iou > 0.0 && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, i));
            }
        }
        Ok(best.and_then(|(_, i)| self.objects[i].masks.get(&to).filter(|m| !m.is_empty()).cloned()))
    }
}
