use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::*;
use crate::geom::PointCloud;

/// A gravity-aligned scene: instance geometry plus the aligned trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub poses: Vec<Pose>,
    /// Ascending by id.
    pub instances: Vec<InstanceGeometry>,
    pub categories: BTreeMap<InstanceId, String>,
}

impl Scene {
    /// Groups labeled points into instances; unlabeled points are ignored.
    pub fn from_cloud(
        id: impl Into<String>,
        cloud: &PointCloud,
        poses: Vec<Pose>,
        categories: BTreeMap<InstanceId, String>,
        policy: &InstancePolicy,
    ) -> Result<Self, FactError> {
        let instances = cloud
            .instances()
            .into_iter()
            .map(|(iid, pts)| InstanceGeometry::from_points(iid, &pts, policy))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            id: id.into(),
            poses,
            instances,
            categories,
        })
    }

    /// The pose egocentric questions are asked from: the last trajectory sample.
    pub fn anchor(&self) -> Option<&Pose> {
        self.poses.last()
    }

    pub fn instance(&self, id: InstanceId) -> Option<&InstanceGeometry> {
        self.instances.iter().find(|g| g.instance_id == id)
    }
}

/// Short stable digest of the policies a fact was computed under.
pub fn policy_digest(qualitative: &QualitativePolicy, instance: &InstancePolicy) -> String {
    let json = serde_json::json!({ "qualitative": qualitative, "instance": instance });
    let digest = Sha256::digest(json.to_string().as_bytes());
    hex::encode(&digest[..8])
}

/// Facts JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactRecord {
    pub scene_id: String,
    pub kind: FactKind,
    pub operands: Vec<InstanceId>,
    pub anchor_frame: Option<u64>,
    pub value: FactValue,
    pub unit: Option<Unit>,
    pub policy_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl FactRecord {
    pub fn from_fact(scene_id: &str, fact: &SpatialFact, digest: &str) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            kind: fact.kind,
            operands: fact.operands.clone(),
            anchor_frame: fact.anchor_frame,
            value: fact.value.clone(),
            unit: fact.unit,
            policy_digest: digest.to_string(),
            detail: fact.detail.clone(),
        }
    }
}

/// Every per-instance and per-pair fact of a scene, plus scene-wide
/// extremes. Facts whose preconditions fail for a given operand set are
/// skipped.
pub fn compute_scene_facts(scene: &Scene, qual: &QualitativePolicy, inst_policy: &InstancePolicy) -> Vec<SpatialFact> {
    let mut out = Vec::new();
    if let Ok(len) = trajectory_length(&scene.poses) {
        out.push(SpatialFact::new(FactKind::TrajectoryLength, vec![], None, FactValue::Scalar(len), Some(Unit::Meters)));
    }
    let anchor = scene.anchor();
    let anchor_frame = anchor.map(|p| p.frame_index);

    for g in &scene.instances {
        let id = g.instance_id;
        if let Some(pose) = anchor {
            out.push(SpatialFact::new(
                FactKind::EgoDistance,
                vec![id],
                anchor_frame,
                FactValue::Scalar(ego_distance(pose, g)),
                Some(Unit::Meters),
            ));
            if let Ok(cw) = ego_direction_cw(pose, g) {
                out.push(SpatialFact::new(FactKind::EgoDirectionCw, vec![id], anchor_frame, FactValue::Scalar(cw), Some(Unit::Degrees)));
                out.push(SpatialFact::new(
                    FactKind::EgoRelativePosition,
                    vec![id],
                    anchor_frame,
                    FactValue::Label(qual.sector(cw).label().into()),
                    None,
                ));
                for turn in [-90.0, 90.0] {
                    if let Ok(s) = post_turn_relation(pose, g, turn, qual) {
                        out.push(
                            SpatialFact::new(FactKind::PostTurnRelation, vec![id], anchor_frame, FactValue::Label(s.label().into()), None)
                                .with_detail(format!("turn_cw={turn}")),
                        );
                    }
                }
            }
        }
        out.push(SpatialFact::new(FactKind::HeightExtent, vec![id], None, FactValue::Scalar(height_extent(g)), Some(Unit::Meters)));
        if let Ok(d) = size_dims(g, inst_policy.min_size_points) {
            out.push(SpatialFact::new(FactKind::SizeDims, vec![id], None, FactValue::Dims(d), Some(Unit::Meters)));
        }
    }

    for (i, a) in scene.instances.iter().enumerate() {
        for b in &scene.instances[i + 1..] {
            let ops = vec![a.instance_id, b.instance_id];
            out.push(SpatialFact::new(FactKind::CenterDistance, ops.clone(), None, FactValue::Scalar(center_distance(a, b)), Some(Unit::Meters)));
            if let Ok(d) = elevation_diff(a, b) {
                out.push(SpatialFact::new(FactKind::ElevationDiff, ops.clone(), None, FactValue::Scalar(d), Some(Unit::Meters)));
            }
            let rel = match vertical_relation(a, b, qual) {
                VerticalRelation::Above => "above",
                VerticalRelation::Below => "below",
                VerticalRelation::Neither => "neither",
            };
            out.push(SpatialFact::new(FactKind::VerticalRelation, ops, None, FactValue::Label(rel.into()), None));
        }
    }

    let all: Vec<&InstanceGeometry> = scene.instances.iter().collect();
    let ops: Vec<InstanceId> = all.iter().map(|g| g.instance_id).collect();
    if let Some(pose) = anchor {
        if let Ok(id) = rank_extreme(&all, RankKey::EgoDistance(pose), RankMode::Min) {
            out.push(
                SpatialFact::new(FactKind::RankExtreme, ops.clone(), anchor_frame, FactValue::Instance(id), None)
                    .with_detail("key=ego_distance mode=min"),
            );
        }
    }
    if let Ok(id) = rank_extreme(&all, RankKey::HeightExtent, RankMode::Max) {
        out.push(SpatialFact::new(FactKind::RankExtreme, ops, None, FactValue::Instance(id), None).with_detail("key=height_extent mode=max"));
    }
    out
}
