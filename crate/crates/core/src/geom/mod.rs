//! Point-cloud and camera geometry: plane fitting, ground detection, gravity
//! alignment and pixel lifting.
//!
//! Camera convention: right-handed, +Z forward, image +u to the right and +v
//! downward. A [`Pose`] maps camera coordinates into world coordinates.

mod camera;
mod ground;
mod ransac;

pub use camera::{lift_mask, project_pixel, project_to_pixel, DepthMap, LiftResult};
pub use ground::{detect_ground, gravity_align, Alignment, GroundDetection, MAX_PLANE_ROUNDS};
pub use ransac::{fit_plane_ransac, PlaneFit};

use nalgebra::{Matrix4, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),
    #[error("no plane reached {required} inliers (best hypothesis had {best})")]
    NoPlane { best: usize, required: usize },
    #[error("no ground plane found in {rounds} detection rounds")]
    NoGround { rounds: usize },
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Camera-to-world pose of one trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
    pub timestamp: f64,
    pub frame_index: u64,
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3, timestamp: f64, frame_index: u64) -> Self {
        Self {
            rotation,
            translation,
            timestamp,
            frame_index,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros(), 0.0, 0)
    }

    /// Builds a pose from raw quaternion components, rejecting non-unit input.
    pub fn from_components(
        frame_index: u64,
        timestamp: f64,
        t: [f64; 3],
        q_xyzw: [f64; 4],
    ) -> Result<Self, GeomError> {
        let [x, y, z, w] = q_xyzw;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(GeomError::Invalid(format!(
                "frame {frame_index}: quaternion norm {norm} is not 1"
            )));
        }
        if t.iter().any(|v| !v.is_finite()) || !timestamp.is_finite() {
            return Err(GeomError::Invalid(format!("frame {frame_index}: non-finite pose")));
        }
        Ok(Self::new(
            UnitQuaternion::new_normalize(q),
            Vec3::new(t[0], t[1], t[2]),
            timestamp,
            frame_index,
        ))
    }

    pub fn camera_to_world(&self, p_cam: &Vec3) -> Vec3 {
        self.rotation * p_cam + self.translation
    }

    pub fn world_to_camera(&self, p_world: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p_world - self.translation)
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }

    /// Camera +Y (image down) in world coordinates.
    pub fn y_axis(&self) -> Vec3 {
        self.rotation * Vec3::y()
    }

    pub fn position(&self) -> Vec3 {
        self.translation
    }

    /// Level camera in a z-up world at `position`, looking along the ground
    /// direction `yaw_deg` (counter-clockwise from +X), image down = -Z.
    pub fn upright(position: Vec3, yaw_deg: f64, timestamp: f64, frame_index: u64) -> Self {
        let yaw = yaw_deg.to_radians();
        let z = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        let y = Vec3::new(0.0, 0.0, -1.0);
        let x = y.cross(&z);
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        let rot = nalgebra::Rotation3::from_matrix_unchecked(m);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), position, timestamp, frame_index)
    }
}

/// Checks the trajectory invariant: timestamps strictly increasing.
pub fn validate_trajectory(poses: &[Pose]) -> Result<(), GeomError> {
    for w in poses.windows(2) {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(GeomError::Invalid(format!(
                "timestamps not strictly increasing at frame {} ({} -> {})",
                w[1].frame_index, w[0].timestamp, w[1].timestamp
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), GeomError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < f64::from(self.width)
            && self.cy >= 0.0
            && self.cy < f64::from(self.height);
        if ok {
            Ok(())
        } else {
            Err(GeomError::Invalid(format!("invalid intrinsics {self:?}")))
        }
    }
}

/// 3D points with optional per-point instance labels (negative = unlabeled)
/// and colors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub labels: Option<Vec<i32>>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            labels: None,
            colors: None,
        }
    }

    pub fn with_labels(points: Vec<Vec3>, labels: Vec<i32>) -> Result<Self, GeomError> {
        let cloud = Self {
            points,
            labels: Some(labels),
            colors: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let n = self.points.len();
        if let Some(l) = &self.labels {
            if l.len() != n {
                return Err(GeomError::DimensionMismatch(format!(
                    "{} labels for {n} points",
                    l.len()
                )));
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(GeomError::DimensionMismatch(format!(
                    "{} colors for {n} points",
                    c.len()
                )));
            }
        }
        if self.points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(GeomError::Invalid("non-finite point coordinate".into()));
        }
        Ok(())
    }

    /// Applies a rigid transform to every point; labels and colors carry over.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            labels: self.labels.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Points grouped by non-negative label, ascending by label.
    pub fn instances(&self) -> std::collections::BTreeMap<u32, Vec<Vec3>> {
        let mut out = std::collections::BTreeMap::new();
        if let Some(labels) = &self.labels {
            for (p, &l) in self.points.iter().zip(labels) {
                if l >= 0 {
                    out.entry(l as u32).or_insert_with(Vec::new).push(*p);
                }
            }
        }
        out
    }
}

/// Plane `{p : normal·p + offset = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: UnitVec3,
    pub offset: f64,
    pub inlier_count: usize,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
            inlier_count: self.inlier_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations_per_plane: usize,
    /// Maximum point-to-plane distance for an inlier, meters.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    /// Minimum inliers as a fraction of the points still under consideration;
    /// the effective floor is the larger of this and `min_inliers`.
    pub min_inlier_fraction: f64,
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations_per_plane: 512,
            inlier_threshold: 0.02,
            min_inliers: 500,
            min_inlier_fraction: 0.01,
            rng_seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), GeomError> {
        if self.iterations_per_plane < 1 {
            return Err(GeomError::Invalid("iterations_per_plane must be >= 1".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(GeomError::Invalid("inlier_threshold must be > 0".into()));
        }
        Ok(())
    }

    pub fn required_inliers(&self, n_points: usize) -> usize {
        let frac = (self.min_inlier_fraction * n_points as f64).ceil() as usize;
        self.min_inliers.max(frac)
    }
}

/// `p ↦ rotation·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_pose(&self, pose: &Pose) -> Pose {
        Pose {
            rotation: UnitQuaternion::from_rotation_matrix(&self.rotation) * pose.rotation,
            translation: self.apply(&pose.translation),
            timestamp: pose.timestamp,
            frame_index: pose.frame_index,
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// 4x4 homogeneous matrix, row-major.
    pub fn to_row_major(&self) -> [[f64; 4]; 4] {
        let m = self.matrix();
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        out
    }

    pub fn rotation_angle_deg(&self) -> f64 {
        self.rotation.angle().to_degrees()
    }
}
