use nalgebra::{Matrix3, Unit};

use super::{GeomError, Plane, PointCloud, RansacParams, Vec3};
use crate::rng::SeedStream;

/// Refinement passes applied to the best hypothesis.
const REFINE_PASSES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Indices into the input cloud, ascending.
    pub inliers: Vec<usize>,
}

/// Fits a single plane by RANSAC over point-to-plane distance.
///
/// The best 3-point hypothesis is refined by least squares over its inliers;
/// a refinement is kept only when it does not lose inliers, so the returned
/// plane still attains the best count seen among hypotheses.
pub fn fit_plane_ransac(cloud: &PointCloud, params: &RansacParams) -> Result<PlaneFit, GeomError> {
    params.validate()?;
    fit_points(&cloud.points, params, SeedStream::new(params.rng_seed))
}

pub(super) fn fit_points(
    points: &[Vec3],
    params: &RansacParams,
    seeds: SeedStream,
) -> Result<PlaneFit, GeomError> {
    check_non_degenerate(points)?;
    let n = points.len();
    let required = params.required_inliers(n);
    let threshold = params.inlier_threshold;
    let mut rng = seeds.rng();

    let mut best: Option<(Unit<Vec3>, f64, usize)> = None;
    for _ in 0..params.iterations_per_plane {
        let idx = rand::seq::index::sample(&mut rng, n, 3);
        let (a, b, c) = (points[idx.index(0)], points[idx.index(1)], points[idx.index(2)]);
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        let scale = (b - a).norm() * (c - a).norm();
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) || norm == 0.0 {
            continue;
        }
        let normal = Unit::new_unchecked(cross / norm);
        let offset = -normal.dot(&a);
        let count = count_inliers(points, &normal, offset, threshold);
        if best.is_none_or(|(_, _, c)| count > c) {
            best = Some((normal, offset, count));
        }
    }

    let Some((mut normal, mut offset, mut count)) = best else {
        return Err(GeomError::NoPlane { best: 0, required });
    };

    for _ in 0..REFINE_PASSES {
        let inliers = collect_inliers(points, &normal, offset, threshold);
        let Some((rn, ro)) = least_squares_plane(points, &inliers) else {
            break;
        };
        let rc = count_inliers(points, &rn, ro, threshold);
        if rc < count {
            break;
        }
        let converged = (rn.dot(&normal)).abs() > 1.0 - 1e-15 && (ro - offset).abs() < 1e-15;
        normal = rn;
        offset = ro;
        count = rc;
        if converged {
            break;
        }
    }

    if count < required {
        return Err(GeomError::NoPlane { best: count, required });
    }

    let (normal, offset) = canonical_sign(normal, offset);
    let inliers = collect_inliers(points, &normal, offset, threshold);
    Ok(PlaneFit {
        plane: Plane {
            normal,
            offset,
            inlier_count: inliers.len(),
        },
        inliers,
    })
}

fn count_inliers(points: &[Vec3], normal: &Unit<Vec3>, offset: f64, threshold: f64) -> usize {
    points
        .iter()
        .filter(|p| (normal.dot(p) + offset).abs() <= threshold)
        .count()
}

fn collect_inliers(points: &[Vec3], normal: &Unit<Vec3>, offset: f64, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| (normal.dot(p) + offset).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Total-least-squares plane: smallest eigenvector of the inlier covariance.
fn least_squares_plane(points: &[Vec3], idx: &[usize]) -> Option<(Unit<Vec3>, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let centroid = idx.iter().map(|&i| points[i]).sum::<Vec3>() / idx.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let v: Vec3 = eig.eigenvectors.column(imin).into_owned();
    let norm = v.norm();
    if !norm.is_finite() || norm < 1e-12 {
        return None;
    }
    let normal = Unit::new_normalize(v);
    Some((normal, -normal.dot(&centroid)))
}

/// Orients the normal so its first non-negligible component, scanning z, y, x,
/// is positive.
fn canonical_sign(normal: Unit<Vec3>, offset: f64) -> (Unit<Vec3>, f64) {
    for k in [2usize, 1, 0] {
        if normal[k].abs() > 1e-12 {
            return if normal[k] < 0.0 {
                (-normal, -offset)
            } else {
                (normal, offset)
            };
        }
    }
    (normal, offset)
}

/// Fewer than three points, or every point on a single line.
fn check_non_degenerate(points: &[Vec3]) -> Result<(), GeomError> {
    if points.len() < 3 {
        return Err(GeomError::DegenerateCloud(format!(
            "{} points, need at least 3",
            points.len()
        )));
    }
    let p0 = points[0];
    let (far, far_d) = points
        .iter()
        .map(|p| (*p, (p - p0).norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    if far_d <= 1e-12 {
        return Err(GeomError::DegenerateCloud("all points coincide".into()));
    }
    let dir = (far - p0) / far_d;
    let off_line = points
        .iter()
        .map(|p| {
            let d = p - p0;
            (d - dir * d.dot(&dir)).norm()
        })
        .fold(0.0f64, f64::max);
    if off_line <= 1e-9 * far_d.max(1.0) {
        return Err(GeomError::DegenerateCloud("all points collinear".into()));
    }
    Ok(())
}
