use super::{GeomError, Intrinsics, PointCloud, Pose, Vec3};
use crate::fusion::Rle;

/// Per-pixel depth in meters, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, GeomError> {
        if values.len() != width as usize * height as usize {
            return Err(GeomError::DimensionMismatch(format!(
                "{} depth values for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: u32, height: u32, depth: f64) -> Self {
        Self {
            width,
            height,
            values: vec![depth; width as usize * height as usize],
        }
    }

    pub fn at(&self, row: u32, col: u32) -> f64 {
        self.values[row as usize * self.width as usize + col as usize]
    }
}

/// Back-projects pixel `(u, v)` at `depth` along the camera +Z axis and maps it
/// into world coordinates.
pub fn project_pixel(intr: &Intrinsics, pose: &Pose, pixel: (f64, f64), depth: f64) -> Result<Vec3, GeomError> {
    let (u, v) = pixel;
    if !(u >= 0.0 && u < f64::from(intr.width) && v >= 0.0 && v < f64::from(intr.height)) {
        return Err(GeomError::OutOfBounds {
            u,
            v,
            width: intr.width,
            height: intr.height,
        });
    }
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeomError::NonPositiveDepth(depth));
    }
    let cam = Vec3::new((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth);
    Ok(pose.camera_to_world(&cam))
}

/// Forward projection: world point to `(u, v, depth)`; `None` behind the camera.
pub fn project_to_pixel(intr: &Intrinsics, pose: &Pose, world: &Vec3) -> Option<(f64, f64, f64)> {
    let cam = pose.world_to_camera(world);
    if cam.z <= 0.0 {
        return None;
    }
    Some((intr.fx * cam.x / cam.z + intr.cx, intr.fy * cam.y / cam.z + intr.cy, cam.z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftResult {
    pub cloud: PointCloud,
    /// Masked pixels dropped for non-finite or non-positive depth.
    pub skipped: usize,
}

/// Lifts every masked pixel with valid depth into a world point. Pixel
/// `(row, col)` is projected at integer coordinates `u = col`, `v = row`.
pub fn lift_mask(intr: &Intrinsics, pose: &Pose, mask: &Rle, depth: &DepthMap) -> Result<LiftResult, GeomError> {
    let (mh, mw) = mask.size();
    if (mh, mw) != (depth.height, depth.width) || (mh, mw) != (intr.height, intr.width) {
        return Err(GeomError::DimensionMismatch(format!(
            "mask {mh}x{mw}, depth {}x{}, intrinsics {}x{}",
            depth.height, depth.width, intr.height, intr.width
        )));
    }
    let mut points = Vec::new();
    let mut skipped = 0;
    for (row, col) in mask.foreground_pixels() {
        let d = depth.at(row, col);
        if !d.is_finite() || d <= 0.0 {
            skipped += 1;
            continue;
        }
        points.push(project_pixel(intr, pose, (f64::from(col), f64::from(row)), d)?);
    }
    Ok(LiftResult {
        cloud: PointCloud::new(points),
        skipped,
    })
}
