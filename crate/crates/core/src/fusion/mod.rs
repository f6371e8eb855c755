//! Instance identity bookkeeping across key-frame detections and
//! between-key-frame tracking.
//!
//! Detection and tracking backends are external; they enter through the
//! [`Tracker`] trait and [`DetectionBatch`] values. [`ReplayTracker`] replays
//! recorded per-frame masks and doubles as the scripted backend in tests.

mod replay;
mod rle;

pub use replay::{ReplayObject, ReplayTracker};
pub use rle::{mask_iou, MaskError, Rle};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub type InstanceId = u32;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FusionError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("tracker failure at frame {frame}: {message}")]
    TrackerFailure { frame: u64, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("track {0} violates track invariants: {1}")]
    InvalidTrack(InstanceId, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskOrigin {
    Detected,
    ReverseExtended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub mask: Rle,
    pub origin: MaskOrigin,
}

/// Masks of one instance over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub instance_id: InstanceId,
    pub category: String,
    pub frames: BTreeMap<u64, TrackFrame>,
    /// `ReverseExtended` once backward extension has been applied.
    pub origin: MaskOrigin,
}

impl Track {
    pub fn new(instance_id: InstanceId, category: impl Into<String>) -> Self {
        Self {
            instance_id,
            category: category.into(),
            frames: BTreeMap::new(),
            origin: MaskOrigin::Detected,
        }
    }

    pub fn insert(&mut self, frame: u64, mask: Rle, origin: MaskOrigin) {
        self.frames.insert(frame, TrackFrame { mask, origin });
    }

    pub fn first_frame(&self) -> Option<u64> {
        self.frames.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.frames.keys().next_back().copied()
    }

    pub fn mask_at(&self, frame: u64) -> Option<&Rle> {
        self.frames.get(&frame).map(|f| &f.mask)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sum of mask areas over all frames (pixel-frames).
    pub fn cumulative_area(&self) -> u64 {
        self.frames.values().map(|f| f.mask.area()).sum()
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let mut size = None;
        for f in self.frames.values() {
            let s = f.mask.size();
            if *size.get_or_insert(s) != s {
                return Err(FusionError::InvalidTrack(self.instance_id, "mixed mask sizes".into()));
            }
        }
        Ok(())
    }
}

/// All instance masks present in one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskFrame {
    pub frame_index: u64,
    pub masks: BTreeMap<InstanceId, Rle>,
}

/// Regroups tracks into per-frame mask sets, ascending by frame.
pub fn frames_of(tracks: &[Track]) -> Vec<MaskFrame> {
    let mut by_frame: BTreeMap<u64, MaskFrame> = BTreeMap::new();
    for t in tracks {
        for (&f, tf) in &t.frames {
            by_frame
                .entry(f)
                .or_insert_with(|| MaskFrame {
                    frame_index: f,
                    ..Default::default()
                })
                .masks
                .insert(t.instance_id, tf.mask.clone());
        }
    }
    by_frame.into_values().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub category: String,
    pub mask: Rle,
}

/// Fresh detections at one key frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionBatch {
    pub key_frame_index: u64,
    pub proposals: Vec<Proposal>,
}

/// Propagates a mask between adjacent frames.
pub trait Tracker {
    /// Returns the mask at `to` (adjacent to `from`, either direction), or
    /// `Ok(None)` when the target is lost.
    fn propagate(&mut self, mask: &Rle, from: u64, to: u64) -> Result<Option<Rle>, FusionError>;
}

#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: InstanceId,
}

impl IdAllocator {
    pub fn starting_at(next: InstanceId) -> Self {
        Self { next }
    }

    pub fn fresh(&mut self) -> InstanceId {
        let id = self.next;
        self.next += 1;
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub proposal: usize,
    pub instance_id: InstanceId,
    /// `Some(iou)` when an existing id was retained.
    pub matched_iou: Option<f64>,
}

/// Reconciles key-frame proposals with tracks that carry a mask at that key
/// frame. Pairs are matched greedily by descending IoU within a category; a
/// match needs IoU strictly above `threshold` and each track absorbs at most
/// one proposal. Unmatched proposals receive fresh ids in proposal order.
pub fn merge_at_keyframe(
    active_tracks: &[Track],
    batch: &DetectionBatch,
    threshold: f64,
    ids: &mut IdAllocator,
) -> Result<Vec<Assignment>, FusionError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FusionError::InvalidParameter(format!("merge threshold {threshold} not in (0, 1]")));
    }
    let key = batch.key_frame_index;
    let mut pairs = Vec::new();
    for (pi, p) in batch.proposals.iter().enumerate() {
        for (ti, t) in active_tracks.iter().enumerate() {
            if t.category != p.category {
                continue;
            }
            let Some(tm) = t.mask_at(key) else { continue };
            let iou = mask_iou(&p.mask, tm)?;
            if iou > threshold {
                pairs.push((iou, pi, ti));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(active_tracks[a.2].instance_id.cmp(&active_tracks[b.2].instance_id))
    });

    let mut proposal_match: Vec<Option<(InstanceId, f64)>> = vec![None; batch.proposals.len()];
    let mut used_tracks = BTreeSet::new();
    for (iou, pi, ti) in pairs {
        if proposal_match[pi].is_some() || used_tracks.contains(&ti) {
            continue;
        }
        used_tracks.insert(ti);
        proposal_match[pi] = Some((active_tracks[ti].instance_id, iou));
    }

    Ok(proposal_match
        .into_iter()
        .enumerate()
        .map(|(pi, m)| match m {
            Some((id, iou)) => Assignment {
                proposal: pi,
                instance_id: id,
                matched_iou: Some(iou),
            },
            None => Assignment {
                proposal: pi,
                instance_id: ids.fresh(),
                matched_iou: None,
            },
        })
        .collect())
}

/// Number of frames covered by a reverse window of `window_seconds`.
pub fn window_frames(window_seconds: f64, fps: f64) -> u64 {
    (window_seconds * fps).round().max(0.0) as u64
}

/// Tracks a newly detected instance backward from its first frame over
/// `min(window·fps, first_frame)` frames, stopping early on loss. Existing
/// frames are never overwritten and nothing is written below frame 0. A
/// tracker failure discards the partial extension.
pub fn reverse_extend(
    track: &Track,
    tracker: &mut dyn Tracker,
    window_seconds: f64,
    fps: f64,
) -> Result<Track, FusionError> {
    if track.origin != MaskOrigin::Detected {
        return Err(FusionError::InvalidParameter(format!(
            "track {} was already reverse-extended",
            track.instance_id
        )));
    }
    if !(window_seconds > 0.0) || !(fps > 0.0) {
        return Err(FusionError::InvalidParameter(format!(
            "window {window_seconds} s at {fps} fps"
        )));
    }
    let mut out = track.clone();
    out.origin = MaskOrigin::ReverseExtended;
    let Some(first) = track.first_frame() else {
        return Ok(out);
    };
    let span = window_frames(window_seconds, fps).min(first);
    let mut mask = track.mask_at(first).expect("first frame present").clone();
    let mut frame = first;
    for _ in 0..span {
        let to = frame - 1;
        if out.frames.contains_key(&to) {
            break;
        }
        match tracker.propagate(&mask, frame, to)? {
            Some(m) => {
                out.insert(to, m.clone(), MaskOrigin::ReverseExtended);
                mask = m;
                frame = to;
            }
            None => break,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifecycleConfig {
    pub fps: f64,
    /// Video length; forward tracking continues to `total_frames - 1` after
    /// the last key frame.
    pub total_frames: u64,
    pub merge_threshold: f64,
    pub reverse_window_seconds: f64,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            total_frames: 0,
            merge_threshold: 0.5,
            reverse_window_seconds: 4.0,
        }
    }
}

/// Runs the full fusion state machine over one video: forward tracking
/// between key frames, identity merging at each key frame, then reverse
/// extension of every newly introduced instance. Output is ascending by id.
pub fn assemble_lifecycles(
    batches: &[DetectionBatch],
    tracker: &mut dyn Tracker,
    config: &LifecycleConfig,
) -> Result<Vec<Track>, FusionError> {
    if !(config.fps > 0.0) {
        return Err(FusionError::InvalidParameter(format!("fps {}", config.fps)));
    }
    for w in batches.windows(2) {
        if w[1].key_frame_index <= w[0].key_frame_index {
            return Err(FusionError::InvalidParameter("detection batches not sorted by key frame".into()));
        }
    }

    let mut ids = IdAllocator::default();
    let mut alive: Vec<Track> = Vec::new();
    let mut finished: Vec<Track> = Vec::new();

    for batch in batches {
        advance(&mut alive, &mut finished, tracker, batch.key_frame_index)?;
        let assignments = merge_at_keyframe(&alive, batch, config.merge_threshold, &mut ids)?;
        for a in assignments {
            let p = &batch.proposals[a.proposal];
            if a.matched_iou.is_some() {
                let t = alive
                    .iter_mut()
                    .find(|t| t.instance_id == a.instance_id)
                    .expect("matched track is alive");
                t.insert(batch.key_frame_index, p.mask.clone(), MaskOrigin::Detected);
            } else {
                let mut t = Track::new(a.instance_id, p.category.clone());
                t.insert(batch.key_frame_index, p.mask.clone(), MaskOrigin::Detected);
                alive.push(t);
            }
        }
    }
    if config.total_frames > 0 {
        advance(&mut alive, &mut finished, tracker, config.total_frames - 1)?;
    }
    finished.append(&mut alive);

    let mut out = Vec::with_capacity(finished.len());
    for t in finished {
        let t = reverse_extend(&t, tracker, config.reverse_window_seconds, config.fps)?;
        t.validate()?;
        out.push(t);
    }
    out.sort_by_key(|t| t.instance_id);
    Ok(out)
}

/// Forward-tracks every alive track up to `target`; lost tracks retire.
fn advance(
    alive: &mut Vec<Track>,
    finished: &mut Vec<Track>,
    tracker: &mut dyn Tracker,
    target: u64,
) -> Result<(), FusionError> {
    let mut still = Vec::with_capacity(alive.len());
    for mut t in alive.drain(..) {
        let mut frame = t.last_frame().expect("alive tracks are non-empty");
        let mut lost = false;
        while frame < target {
            let mask = t.mask_at(frame).expect("last frame present").clone();
            match tracker.propagate(&mask, frame, frame + 1)? {
                Some(m) => {
                    frame += 1;
                    t.insert(frame, m, MaskOrigin::Detected);
                }
                None => {
                    lost = true;
                    break;
                }
            }
        }
        if lost {
            finished.push(t);
        } else {
            still.push(t);
        }
    }
    *alive = still;
    Ok(())
}

/// Splits a video into half-open chunks of `chunk_seconds·fps` frames.
pub fn segment_video(total_frames: u64, fps: f64, chunk_seconds: f64) -> Vec<(u64, u64)> {
    let chunk = ((chunk_seconds * fps).round() as u64).max(1);
    (0..total_frames)
        .step_by(chunk as usize)
        .map(|s| (s, (s + chunk).min(total_frames)))
        .collect()
}

/// Default chunk length for long recordings.
pub const DEFAULT_CHUNK_SECONDS: f64 = 40.0;

/// Keeps at most `cap` tracks per category, preferring the largest cumulative
/// mask area and then the lower id. Output is ascending by id.
pub fn cap_per_category(tracks: &[Track], cap: usize) -> Vec<Track> {
    let mut by_cat: BTreeMap<&str, Vec<&Track>> = BTreeMap::new();
    for t in tracks {
        by_cat.entry(t.category.as_str()).or_default().push(t);
    }
    let mut keep: Vec<Track> = Vec::new();
    for (_, mut ts) in by_cat {
        ts.sort_by(|a, b| {
            b.cumulative_area()
                .cmp(&a.cumulative_area())
                .then(a.instance_id.cmp(&b.instance_id))
        });
        keep.extend(ts.into_iter().take(cap.max(1)).cloned());
    }
    keep.sort_by_key(|t| t.instance_id);
    keep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(r0: u32, c0: u32, r1: u32, c1: u32) -> Rle {
        Rle::rect(10, 10, r0, c0, r1, c1)
    }

    fn track_with(id: InstanceId, cat: &str, frame: u64, mask: Rle) -> Track {
        let mut t = Track::new(id, cat);
        t.insert(frame, mask, MaskOrigin::Detected);
        t
    }

    fn batch(frame: u64, props: Vec<(&str, Rle)>) -> DetectionBatch {
        DetectionBatch {
            key_frame_index: frame,
            proposals: props
                .into_iter()
                .map(|(c, m)| Proposal {
                    category: c.into(),
                    mask: m,
                })
                .collect(),
        }
    }

    #[test]
    fn iou_above_half_keeps_id() {
        // 10x10 block vs 10x6 block sharing 6 columns → 0.6.
        let old = rect(0, 0, 10, 10);
        let new = rect(0, 0, 10, 6);
        assert!((mask_iou(&old, &new).unwrap() - 0.6).abs() < 1e-12);
        let tracks = vec![track_with(7, "chair", 30, old)];
        let mut ids = IdAllocator::starting_at(100);
        let a = merge_at_keyframe(&tracks, &batch(30, vec![("chair", new)]), 0.5, &mut ids).unwrap();
        assert_eq!(a[0].instance_id, 7);
    }

    #[test]
    fn iou_exactly_half_gets_fresh_id() {
        let old = rect(0, 0, 10, 10);
        let new = rect(0, 0, 10, 5);
        assert_eq!(mask_iou(&old, &new).unwrap(), 0.5);
        let tracks = vec![track_with(7, "chair", 30, old)];
        let mut ids = IdAllocator::starting_at(100);
        let a = merge_at_keyframe(&tracks, &batch(30, vec![("chair", new)]), 0.5, &mut ids).unwrap();
        assert_eq!(a[0].instance_id, 100);
        assert_eq!(a[0].matched_iou, None);
    }

    #[test]
    fn greedy_one_to_one() {
        let old = rect(0, 0, 10, 10);
        let p_07 = rect(0, 0, 10, 7);
        let p_09 = rect(0, 0, 10, 9);
        let tracks = vec![track_with(3, "cup", 0, old)];
        let mut ids = IdAllocator::starting_at(10);
        let a = merge_at_keyframe(&tracks, &batch(0, vec![("cup", p_07), ("cup", p_09)]), 0.5, &mut ids).unwrap();
        assert_eq!(a[1].instance_id, 3);
        assert_eq!(a[0].instance_id, 10);
    }

    #[test]
    fn no_cross_category_merge() {
        let m = rect(0, 0, 5, 5);
        let tracks = vec![track_with(1, "cup", 0, m.clone())];
        let mut ids = IdAllocator::starting_at(5);
        let a = merge_at_keyframe(&tracks, &batch(0, vec![("bowl", m)]), 0.5, &mut ids).unwrap();
        assert_eq!(a[0].instance_id, 5);
    }

    #[test]
    fn tracks_without_key_frame_mask_are_not_candidates() {
        let m = rect(0, 0, 5, 5);
        let tracks = vec![track_with(1, "cup", 3, m.clone())];
        let mut ids = IdAllocator::starting_at(5);
        let a = merge_at_keyframe(&tracks, &batch(4, vec![("cup", m)]), 0.5, &mut ids).unwrap();
        assert_eq!(a[0].instance_id, 5);
    }

    #[test]
    fn segment_video_chunks() {
        assert_eq!(segment_video(3000, 30.0, 40.0), vec![(0, 1200), (1200, 2400), (2400, 3000)]);
        assert_eq!(segment_video(100, 30.0, 40.0), vec![(0, 100)]);
        assert!(segment_video(0, 30.0, 40.0).is_empty());
    }

    fn area_track(id: InstanceId, cat: &str, area_rows: u32) -> Track {
        // 10 columns wide, `area_rows` rows tall in a 100x10 frame.
        track_with(id, cat, 0, Rle::rect(100, 10, 0, 0, area_rows, 10))
    }

    #[test]
    fn cap_keeps_largest_area() {
        let ts = vec![area_track(1, "chair", 50), area_track(2, "chair", 30), area_track(3, "chair", 10), area_track(4, "table", 5)];
        let kept: Vec<InstanceId> = cap_per_category(&ts, 2).iter().map(|t| t.instance_id).collect();
        assert_eq!(kept, vec![1, 2, 4]);
    }

    #[test]
    fn cap_ties_by_lower_id() {
        let ts = vec![area_track(9, "cup", 20), area_track(4, "cup", 20), area_track(6, "cup", 20)];
        let kept: Vec<InstanceId> = cap_per_category(&ts, 2).iter().map(|t| t.instance_id).collect();
        assert_eq!(kept, vec![4, 6]);
    }
}
