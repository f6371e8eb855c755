use serde::{Deserialize, Serialize};

use super::FactError;
use crate::fusion::InstanceId;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstancePolicy {
    /// Per-axis percentile bounds of the trimmed box.
    pub trim_low_pct: f64,
    pub trim_high_pct: f64,
    /// Instances sparser than this are excluded from size facts.
    pub min_size_points: usize,
}

impl Default for InstancePolicy {
    fn default() -> Self {
        Self {
            trim_low_pct: 2.0,
            trim_high_pct: 98.0,
            min_size_points: 20,
        }
    }
}

/// Per-instance summary in the aligned frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGeometry {
    pub instance_id: InstanceId,
    pub point_count: usize,
    /// Mean of the points inside the trimmed box.
    pub centroid: Vec3,
    pub aabb_min: Vec3,
    pub aabb_max: Vec3,
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = pct / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl InstanceGeometry {
    pub fn from_points(instance_id: InstanceId, points: &[Vec3], policy: &InstancePolicy) -> Result<Self, FactError> {
        if points.is_empty() {
            return Err(FactError::EmptyInstance(instance_id));
        }
        let mut lo = Vec3::zeros();
        let mut hi = Vec3::zeros();
        let mut axis: Vec<f64> = Vec::with_capacity(points.len());
        for k in 0..3 {
            axis.clear();
            axis.extend(points.iter().map(|p| p[k]));
            axis.sort_by(f64::total_cmp);
            lo[k] = percentile(&axis, policy.trim_low_pct);
            hi[k] = percentile(&axis, policy.trim_high_pct);
        }
        let inside: Vec<&Vec3> = points
            .iter()
            .filter(|p| (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k]))
            .collect();
        let centroid = if inside.is_empty() {
            let mean = points.iter().sum::<Vec3>() / points.len() as f64;
            Vec3::new(
                mean.x.clamp(lo.x, hi.x),
                mean.y.clamp(lo.y, hi.y),
                mean.z.clamp(lo.z, hi.z),
            )
        } else {
            inside.iter().copied().sum::<Vec3>() / inside.len() as f64
        };
        Ok(Self {
            instance_id,
            point_count: points.len(),
            centroid,
            aabb_min: lo,
            aabb_max: hi,
        })
    }

    /// Geometry with a given box and centroid, bypassing trimming.
    pub fn from_box(instance_id: InstanceId, aabb_min: Vec3, aabb_max: Vec3, point_count: usize) -> Self {
        Self {
            instance_id,
            point_count,
            centroid: (aabb_min + aabb_max) / 2.0,
            aabb_min,
            aabb_max,
        }
    }

    pub fn extents(&self) -> Vec3 {
        self.aabb_max - self.aabb_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_rule() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 25.0), 2.0);
        assert!((percentile(&v, 10.0) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn speckle_is_trimmed() {
        let mut pts: Vec<Vec3> = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    pts.push(Vec3::new(i as f64 / 9.0, j as f64 / 9.0, k as f64 / 9.0));
                }
            }
        }
        pts.push(Vec3::new(40.0, 0.5, 0.5));
        let g = InstanceGeometry::from_points(1, &pts, &InstancePolicy::default()).unwrap();
        assert!(g.aabb_max.x <= 1.0 + 1e-12);
        let c = g.centroid;
        for k in 0..3 {
            assert!(c[k] >= g.aabb_min[k] - 1e-6 && c[k] <= g.aabb_max[k] + 1e-6);
        }
    }

    #[test]
    fn empty_instance_rejected() {
        assert!(matches!(
            InstanceGeometry::from_points(3, &[], &InstancePolicy::default()),
            Err(FactError::EmptyInstance(3))
        ));
    }
}
