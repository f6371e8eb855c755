use nalgebra::{Rotation3, Unit};

use super::ransac::fit_points;
use super::{GeomError, Plane, PointCloud, Pose, RansacParams, RigidTransform, Vec3};
use crate::rng::SeedStream;

/// Number of sequential plane extractions performed when searching for ground.
pub const MAX_PLANE_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundDetection {
    pub plane: Plane,
    /// Inlier indices of the selected plane, in the original cloud.
    pub inliers: Vec<usize>,
    /// Every plane extracted, in discovery order.
    pub candidates: Vec<Plane>,
    /// Index of the selected plane within `candidates`.
    pub selected: usize,
    /// Angle between the selected normal and the camera Y axis, sign-invariant.
    pub deviation_deg: f64,
}

/// Extracts up to ten planes, removing each plane's inliers before the next
/// search, and returns the one whose normal is closest (up to sign) to the
/// initial camera Y axis.
pub fn detect_ground(
    cloud: &PointCloud,
    initial_pose: &Pose,
    params: &RansacParams,
) -> Result<GroundDetection, GeomError> {
    params.validate()?;
    let seeds = SeedStream::new(params.rng_seed);
    let cam_y = Unit::new_normalize(initial_pose.y_axis());

    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut candidates = Vec::new();
    let mut inlier_sets = Vec::new();

    for round in 0..MAX_PLANE_ROUNDS {
        if remaining.len() < 3 {
            break;
        }
        let subset: Vec<Vec3> = remaining.iter().map(|&i| cloud.points[i]).collect();
        let fit = match fit_points(&subset, params, seeds.child_index(round as u64)) {
            Ok(fit) => fit,
            Err(GeomError::NoPlane { .. }) => break,
            Err(GeomError::DegenerateCloud(_)) if round > 0 => break,
            Err(e) => return Err(e),
        };
        let original: Vec<usize> = fit.inliers.iter().map(|&k| remaining[k]).collect();
        let mut is_inlier = vec![false; subset.len()];
        for &k in &fit.inliers {
            is_inlier[k] = true;
        }
        remaining = remaining
            .iter()
            .zip(&is_inlier)
            .filter(|(_, &drop)| !drop)
            .map(|(&i, _)| i)
            .collect();
        log::debug!(
            "plane round {round}: normal {:?} offset {:.4} inliers {}",
            fit.plane.normal.as_ref(),
            fit.plane.offset,
            fit.plane.inlier_count
        );
        candidates.push(fit.plane);
        inlier_sets.push(original);
    }

    let mut selected: Option<(usize, f64)> = None;
    for (i, plane) in candidates.iter().enumerate() {
        let cos = plane.normal.dot(&cam_y).abs();
        if selected.is_none_or(|(_, best)| cos > best) {
            selected = Some((i, cos));
        }
    }
    let Some((selected, cos)) = selected else {
        return Err(GeomError::NoGround {
            rounds: MAX_PLANE_ROUNDS,
        });
    };
    Ok(GroundDetection {
        plane: candidates[selected],
        inliers: inlier_sets.swap_remove(selected),
        candidates,
        selected,
        deviation_deg: cos.min(1.0).acos().to_degrees(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub cloud: PointCloud,
    pub poses: Vec<Pose>,
    pub transform: RigidTransform,
    /// Ground plane oriented toward the cameras, in input coordinates.
    pub oriented_ground: Plane,
    /// Angle between the oriented ground normal and +Z before alignment.
    pub tilt_deg: f64,
}

/// Rotates the ground normal onto +Z with the minimal rotation and shifts the
/// ground to z = 0. The normal is first oriented so the mean camera position
/// lies on its positive side.
pub fn gravity_align(cloud: &PointCloud, poses: &[Pose], ground: &Plane) -> Result<Alignment, GeomError> {
    let n_norm = ground.normal.norm();
    if (n_norm - 1.0).abs() > 1e-9 {
        return Err(GeomError::Invalid(format!("ground normal norm {n_norm}")));
    }
    let mut plane = *ground;
    if !poses.is_empty() {
        let mean = poses.iter().map(|p| p.translation).sum::<Vec3>() / poses.len() as f64;
        if plane.signed_distance(&mean) < 0.0 {
            plane = plane.flipped();
        }
    }
    let rotation = min_rotation_to_z(&plane.normal);
    let transform = RigidTransform {
        rotation,
        translation: Vec3::new(0.0, 0.0, plane.offset),
    };
    let tilt_deg = plane.normal.z.clamp(-1.0, 1.0).acos().to_degrees();
    Ok(Alignment {
        cloud: cloud.transformed(&transform),
        poses: poses.iter().map(|p| transform.apply_pose(p)).collect(),
        transform,
        oriented_ground: plane,
        tilt_deg,
    })
}

/// Smallest rotation taking `n` onto +Z (axis n×z); a half turn about X when
/// `n` points straight down.
fn min_rotation_to_z(n: &Unit<Vec3>) -> Rotation3<f64> {
    let z = Vec3::z();
    let axis = n.cross(&z);
    let s = axis.norm();
    let c = n.dot(&z);
    if s < 1e-15 {
        return if c > 0.0 {
            Rotation3::identity()
        } else {
            Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
        };
    }
    Rotation3::from_axis_angle(&Unit::new_unchecked(axis / s), s.atan2(c))
}
