//! Geometric quantities computed from a gravity-aligned scene (ground at
//! z = 0, +Z up) and the camera trajectory.
//!
//! Lengths are meters. Directions are clockwise degrees in `[0, 360)` viewed
//! from above, measured from the camera heading projected onto the ground.

mod instance;
mod scene;

pub use instance::{InstanceGeometry, InstancePolicy};
pub use scene::{compute_scene_facts, policy_digest, FactRecord, Scene};

use serde::{Deserialize, Serialize};

use crate::fusion::InstanceId;
use crate::geom::{Pose, Vec3};

/// Minimum ground-projected offset for a bearing to be defined, meters.
pub const MIN_BEARING_OFFSET: f64 = 1e-6;
/// Key values closer than this are treated as ties by [`rank_extreme`].
pub const RANK_TIE_EPS: f64 = 1e-6;
/// Lowest plausible `aabb.min.z` in an aligned scene, meters.
pub const ALIGNED_FLOOR_GUARD: f64 = -0.5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FactError {
    #[error("trajectory has no poses")]
    EmptyTrajectory,
    #[error("instance {0} has no ground-projected offset from the camera")]
    DegenerateBearing(InstanceId),
    #[error("instance {id} has min z {min_z:.3} m; scene does not look gravity-aligned")]
    NotAligned { id: InstanceId, min_z: f64 },
    #[error("instance {id} has {count} points, need {required}")]
    TooFewPoints { id: InstanceId, count: usize, required: usize },
    #[error("ranking is ambiguous: values within {RANK_TIE_EPS}")]
    Ambiguous,
    #[error("ranking needs at least 2 instances, got {0}")]
    TooFewCandidates(usize),
    #[error("instance {0} has no points")]
    EmptyInstance(InstanceId),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    TrajectoryLength,
    EgoDistance,
    EgoDirectionCw,
    PostTurnRelation,
    CenterDistance,
    ElevationDiff,
    HeightExtent,
    SizeDims,
    RankExtreme,
    VerticalRelation,
    EgoRelativePosition,
}

impl FactKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FactKind::TrajectoryLength => "trajectory_length",
            FactKind::EgoDistance => "ego_distance",
            FactKind::EgoDirectionCw => "ego_direction_cw",
            FactKind::PostTurnRelation => "post_turn_relation",
            FactKind::CenterDistance => "center_distance",
            FactKind::ElevationDiff => "elevation_diff",
            FactKind::HeightExtent => "height_extent",
            FactKind::SizeDims => "size_dims",
            FactKind::RankExtreme => "rank_extreme",
            FactKind::VerticalRelation => "vertical_relation",
            FactKind::EgoRelativePosition => "ego_relative_position",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m")]
    Meters,
    #[serde(rename = "deg")]
    Degrees,
}

impl Unit {
    pub fn symbol(&self) -> &'static str {
        match self {
            Unit::Meters => "m",
            Unit::Degrees => "deg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Front,
    Right,
    Back,
    Left,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Front, Sector::Right, Sector::Back, Sector::Left];

    pub fn label(&self) -> &'static str {
        match self {
            Sector::Front => "front",
            Sector::Right => "right",
            Sector::Back => "back",
            Sector::Left => "left",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalRelation {
    Above,
    Below,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Dims {
    pub fn longest(&self) -> f64 {
        self.width.max(self.depth).max(self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactValue {
    Scalar(f64),
    Dims(Dims),
    Label(String),
    Instance(InstanceId),
}

/// One computed geometric quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFact {
    pub id: String,
    pub kind: FactKind,
    pub operands: Vec<InstanceId>,
    pub anchor_frame: Option<u64>,
    pub value: FactValue,
    pub unit: Option<Unit>,
    /// Extra interpretation details, e.g. `key=height_extent mode=max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SpatialFact {
    pub fn new(kind: FactKind, operands: Vec<InstanceId>, anchor_frame: Option<u64>, value: FactValue, unit: Option<Unit>) -> Self {
        let ops: Vec<String> = operands.iter().map(|o| o.to_string()).collect();
        let anchor = anchor_frame.map(|f| format!("@{f}")).unwrap_or_default();
        Self {
            id: format!("{}:{}{}", kind.as_str(), ops.join(","), anchor),
            kind,
            operands,
            anchor_frame,
            value,
            unit,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        let d = detail.into();
        self.id = format!("{}[{}]", self.id, d);
        self.detail = Some(d);
        self
    }

    pub fn scalar(&self) -> Option<f64> {
        match self.value {
            FactValue::Scalar(v) => Some(v),
            _ => None,
        }
    }
}

/// Thresholds for the qualitative fact variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualitativePolicy {
    /// Inclusive lower edges of the front, right, back and left sectors.
    pub sector_starts_deg: [f64; 4],
    pub vertical_margin: f64,
    pub footprint_expansion: f64,
}

impl Default for QualitativePolicy {
    fn default() -> Self {
        Self {
            sector_starts_deg: [315.0, 45.0, 135.0, 225.0],
            vertical_margin: 0.05,
            footprint_expansion: 0.10,
        }
    }
}

impl QualitativePolicy {
    /// Sectors must be listed clockwise and together cover the full circle.
    pub fn validate(&self) -> Result<(), FactError> {
        let s = self.sector_starts_deg;
        let mut total = 0.0;
        for i in 0..4 {
            if !(0.0..360.0).contains(&s[i]) {
                return Err(FactError::InvalidPolicy(format!("sector start {} outside [0,360)", s[i])));
            }
            let w = (s[(i + 1) % 4] - s[i]).rem_euclid(360.0);
            if w <= 0.0 {
                return Err(FactError::InvalidPolicy("empty sector".into()));
            }
            total += w;
        }
        if (total - 360.0).abs() > 1e-9 {
            return Err(FactError::InvalidPolicy("sectors do not partition the circle".into()));
        }
        Ok(())
    }

    pub fn sector(&self, bearing_deg: f64) -> Sector {
        let b = bearing_deg.rem_euclid(360.0);
        let s = self.sector_starts_deg;
        for i in 0..4 {
            let width = (s[(i + 1) % 4] - s[i]).rem_euclid(360.0);
            if (b - s[i]).rem_euclid(360.0) < width {
                return Sector::ALL[i];
            }
        }
        Sector::Front
    }
}

pub fn trajectory_length(poses: &[Pose]) -> Result<f64, FactError> {
    if poses.is_empty() {
        return Err(FactError::EmptyTrajectory);
    }
    Ok(poses
        .windows(2)
        .map(|w| (w[1].translation - w[0].translation).norm())
        .sum())
}

pub fn ego_distance(pose: &Pose, inst: &InstanceGeometry) -> f64 {
    (inst.centroid - pose.translation).norm()
}

/// The nearer of two instances; `Ambiguous` on a tie.
pub fn closer_of(pose: &Pose, a: &InstanceGeometry, b: &InstanceGeometry) -> Result<InstanceId, FactError> {
    rank_extreme(&[a, b], RankKey::EgoDistance(pose), RankMode::Min)
}

fn wrap_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

fn ground_projected(v: Vec3) -> Option<(f64, f64)> {
    let (x, y) = (v.x, v.y);
    (x.hypot(y) > MIN_BEARING_OFFSET).then_some((x, y))
}

/// Clockwise angle from the camera heading to the instance centroid.
pub fn ego_direction_cw(pose: &Pose, inst: &InstanceGeometry) -> Result<f64, FactError> {
    let heading = ground_projected(pose.forward()).ok_or(FactError::DegenerateBearing(inst.instance_id))?;
    let bearing = ground_projected(inst.centroid - pose.translation).ok_or(FactError::DegenerateBearing(inst.instance_id))?;
    let h = heading.1.atan2(heading.0);
    let b = bearing.1.atan2(bearing.0);
    Ok(wrap_deg((h - b).to_degrees()))
}

pub fn ego_relative_position(pose: &Pose, inst: &InstanceGeometry, policy: &QualitativePolicy) -> Result<Sector, FactError> {
    Ok(policy.sector(ego_direction_cw(pose, inst)?))
}

/// Sector of the instance after the camera turns by `turn_cw_deg` (a left
/// turn of 90° is `-90`).
pub fn post_turn_relation(
    pose: &Pose,
    inst: &InstanceGeometry,
    turn_cw_deg: f64,
    policy: &QualitativePolicy,
) -> Result<Sector, FactError> {
    Ok(policy.sector(post_turn_bearing(pose, inst, turn_cw_deg)?))
}

pub fn post_turn_bearing(pose: &Pose, inst: &InstanceGeometry, turn_cw_deg: f64) -> Result<f64, FactError> {
    Ok(wrap_deg(ego_direction_cw(pose, inst)? - turn_cw_deg))
}

pub fn center_distance(a: &InstanceGeometry, b: &InstanceGeometry) -> f64 {
    (a.centroid - b.centroid).norm()
}

/// Signed difference of bottom elevations, `a` minus `b`.
pub fn elevation_diff(a: &InstanceGeometry, b: &InstanceGeometry) -> Result<f64, FactError> {
    for g in [a, b] {
        if g.aabb_min.z < ALIGNED_FLOOR_GUARD {
            return Err(FactError::NotAligned {
                id: g.instance_id,
                min_z: g.aabb_min.z,
            });
        }
    }
    Ok(a.aabb_min.z - b.aabb_min.z)
}

pub fn height_extent(inst: &InstanceGeometry) -> f64 {
    inst.aabb_max.z - inst.aabb_min.z
}

/// Trimmed extents: height along z, width/depth the larger/smaller of x and y.
pub fn size_dims(inst: &InstanceGeometry, min_points: usize) -> Result<Dims, FactError> {
    if inst.point_count < min_points {
        return Err(FactError::TooFewPoints {
            id: inst.instance_id,
            count: inst.point_count,
            required: min_points,
        });
    }
    let e = inst.aabb_max - inst.aabb_min;
    Ok(Dims {
        width: e.x.max(e.y),
        depth: e.x.min(e.y),
        height: e.z,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum RankKey<'a> {
    EgoDistance(&'a Pose),
    HeightExtent,
}

impl RankKey<'_> {
    pub fn value(&self, inst: &InstanceGeometry) -> f64 {
        match self {
            RankKey::EgoDistance(p) => ego_distance(p, inst),
            RankKey::HeightExtent => height_extent(inst),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RankKey::EgoDistance(_) => "ego_distance",
            RankKey::HeightExtent => "height_extent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    Min,
    Max,
}

/// Id of the instance with the smallest or largest key. Any pair of key
/// values within [`RANK_TIE_EPS`] makes the ranking ambiguous.
pub fn rank_extreme(insts: &[&InstanceGeometry], key: RankKey<'_>, mode: RankMode) -> Result<InstanceId, FactError> {
    if insts.len() < 2 {
        return Err(FactError::TooFewCandidates(insts.len()));
    }
    let mut vals: Vec<(f64, InstanceId)> = insts.iter().map(|g| (key.value(g), g.instance_id)).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    if vals.windows(2).any(|w| (w[1].0 - w[0].0).abs() <= RANK_TIE_EPS) {
        return Err(FactError::Ambiguous);
    }
    Ok(match mode {
        RankMode::Min => vals[0].1,
        RankMode::Max => vals[vals.len() - 1].1,
    })
}

/// `a` is above `b` when its bottom clears `b`'s top (less the margin) and its
/// horizontal centroid falls inside `b`'s expanded footprint.
pub fn vertical_relation(a: &InstanceGeometry, b: &InstanceGeometry, policy: &QualitativePolicy) -> VerticalRelation {
    if stacked_over(a, b, policy) {
        VerticalRelation::Above
    } else if stacked_over(b, a, policy) {
        VerticalRelation::Below
    } else {
        VerticalRelation::Neither
    }
}

fn stacked_over(top: &InstanceGeometry, base: &InstanceGeometry, policy: &QualitativePolicy) -> bool {
    let e = policy.footprint_expansion;
    let c = top.centroid;
    top.aabb_min.z >= base.aabb_max.z - policy.vertical_margin
        && c.x >= base.aabb_min.x - e
        && c.x <= base.aabb_max.x + e
        && c.y >= base.aabb_min.y - e
        && c.y <= base.aabb_max.y + e
}

#[cfg(test)]
mod tests;
