//! Seeded synthetic rooms and scenes with known geometry.

use std::collections::BTreeMap;

use nalgebra::{Rotation3, Unit};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::fusion::{InstanceId, MaskOrigin, Rle, Track};
use crate::geom::{project_to_pixel, Intrinsics, PointCloud, Pose, RigidTransform, Vec3};
use crate::rng::{Rng, SeedStream};

#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// Floor extent along x and y, meters.
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
    /// 1 to 4 walls, placed at x = 0, x = width, y = 0, y = depth in order.
    pub walls: usize,
    pub floor_points: usize,
    pub wall_points: usize,
    pub noise_sigma: f64,
    /// Share of the final cloud that is uniform clutter.
    pub outlier_fraction: f64,
    pub tilt_deg: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            width: 5.0,
            depth: 4.0,
            wall_height: 2.6,
            walls: 3,
            floor_points: 4000,
            wall_points: 2000,
            noise_sigma: 0.005,
            outlier_fraction: 0.3,
            tilt_deg: 15.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRoom {
    /// Cloud in the tilted capture frame.
    pub cloud: PointCloud,
    /// Camera poses in the tilted capture frame.
    pub poses: Vec<Pose>,
    /// Maps the gravity-aligned room frame into the capture frame.
    pub tilt: RigidTransform,
    pub floor_indices: Vec<usize>,
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random rigid transform tilting +Z by exactly `tilt_deg` about a random
/// horizontal axis, plus a random offset.
pub fn random_tilt(rng: &mut Rng, tilt_deg: f64) -> RigidTransform {
    let a = uniform(rng, 0.0, std::f64::consts::TAU);
    let axis = Unit::new_normalize(Vec3::new(a.cos(), a.sin(), 0.0));
    let spin = Rotation3::from_axis_angle(&Vec3::z_axis(), uniform(rng, -3.0, 3.0));
    RigidTransform {
        rotation: Rotation3::from_axis_angle(&axis, tilt_deg.to_radians()) * spin,
        translation: Vec3::new(uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)),
    }
}

/// Camera walking a small loop at eye height around the room center,
/// looking outward, one pose per second, in the aligned room frame.
pub fn walk(width: f64, depth: f64, n: usize, fps: f64) -> Vec<Pose> {
    (0..n)
        .map(|i| {
            let t = i as f64 / n.max(1) as f64 * std::f64::consts::TAU;
            let p = Vec3::new(width / 2.0 + 0.12 * width * t.cos(), depth / 2.0 + 0.12 * depth * t.sin(), 1.3);
            let yaw = t.to_degrees();
            Pose::upright(p, yaw, i as f64, (i as f64 * fps).round() as u64)
        })
        .collect()
}

pub fn synthetic_room(spec: &RoomSpec, seed: u64) -> SyntheticRoom {
    let mut rng = SeedStream::new(seed).child("room").rng();
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let jitter = |rng: &mut Rng| noise.sample(rng);
    let (w, d, h) = (spec.width, spec.depth, spec.wall_height);

    let mut points = Vec::new();
    for _ in 0..spec.floor_points {
        points.push(Vec3::new(uniform(&mut rng, 0.0, w), uniform(&mut rng, 0.0, d), jitter(&mut rng)));
    }
    let floor_indices: Vec<usize> = (0..points.len()).collect();
    for k in 0..spec.walls.min(4) {
        for _ in 0..spec.wall_points {
            let z = uniform(&mut rng, 0.0, h);
            let off = jitter(&mut rng);
            points.push(match k {
                0 => Vec3::new(off, uniform(&mut rng, 0.0, d), z),
                1 => Vec3::new(w + off, uniform(&mut rng, 0.0, d), z),
                2 => Vec3::new(uniform(&mut rng, 0.0, w), off, z),
                _ => Vec3::new(uniform(&mut rng, 0.0, w), d + off, z),
            });
        }
    }
    let f = spec.outlier_fraction.clamp(0.0, 0.95);
    let outliers = (points.len() as f64 * f / (1.0 - f)).round() as usize;
    for _ in 0..outliers {
        points.push(Vec3::new(uniform(&mut rng, -0.5, w + 0.5), uniform(&mut rng, -0.5, d + 0.5), uniform(&mut rng, 0.05, h)));
    }

    let tilt = random_tilt(&mut rng, spec.tilt_deg);
    let poses = walk(w, d, 12, 30.0).iter().map(|p| tilt.apply_pose(p)).collect();
    SyntheticRoom {
        cloud: PointCloud::new(points.iter().map(|p| tilt.apply(p)).collect()),
        poses,
        tilt,
        floor_indices,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub instance_id: InstanceId,
    pub category: String,
    pub referring: String,
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub id: String,
    /// Gravity-aligned cloud: unlabeled floor plus labeled object surfaces.
    pub cloud: PointCloud,
    pub poses: Vec<Pose>,
    pub objects: Vec<SceneObject>,
    pub intrinsics: Intrinsics,
    /// Box-shaped masks of every object in every frame where it projects.
    pub tracks: Vec<Track>,
}

impl SyntheticScene {
    pub fn refs(&self) -> BTreeMap<InstanceId, String> {
        self.objects.iter().map(|o| (o.instance_id, o.referring.clone())).collect()
    }

    pub fn categories(&self) -> BTreeMap<InstanceId, String> {
        self.objects.iter().map(|o| (o.instance_id, o.category.clone())).collect()
    }
}

const OBJECT_KINDS: [(&str, &str, [f64; 3]); 10] = [
    ("table", "the wooden table", [1.2, 0.8, 0.75]),
    ("chair", "the blue chair", [0.5, 0.5, 0.9]),
    ("sofa", "the grey sofa", [1.9, 0.9, 0.85]),
    ("cabinet", "the tall cabinet", [0.8, 0.45, 1.9]),
    ("lamp", "the floor lamp", [0.35, 0.35, 1.6]),
    ("plant", "the potted plant", [0.4, 0.4, 1.1]),
    ("box", "the cardboard box", [0.55, 0.45, 0.4]),
    ("bucket", "the red bucket", [0.3, 0.3, 0.35]),
    ("television", "the television", [1.1, 0.2, 0.7]),
    ("basket", "the laundry basket", [0.5, 0.4, 0.5]),
];

fn surface_points(rng: &mut Rng, min: Vec3, max: Vec3, n: usize) -> Vec<Vec3> {
    let e = max - min;
    let areas = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
    let total: f64 = areas.iter().sum();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = uniform(rng, 0.0, total);
        let mut face = 0;
        while face < 5 && pick > areas[face] {
            pick -= areas[face];
            face += 1;
        }
        let (u, v) = (uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0));
        let p = match face {
            0 => Vec3::new(0.0, u * e.y, v * e.z),
            1 => Vec3::new(e.x, u * e.y, v * e.z),
            2 => Vec3::new(u * e.x, 0.0, v * e.z),
            3 => Vec3::new(u * e.x, e.y, v * e.z),
            4 => Vec3::new(u * e.x, v * e.y, 0.0),
            _ => Vec3::new(u * e.x, v * e.y, e.z),
        };
        out.push(min + p);
    }
    out
}

/// A furnished room: up to ten objects on the floor of a `w × d` room,
/// one small item resting on the table, and a looping camera walk.
pub fn synthetic_scene(id: &str, n_objects: usize, seed: u64) -> SyntheticScene {
    let stream = SeedStream::new(seed).child(id);
    let mut rng = stream.child("layout").rng();
    let (w, d) = (8.0, 7.0);
    let mut objects: Vec<SceneObject> = Vec::new();
    let n = n_objects.min(OBJECT_KINDS.len());
    for (k, (cat, name, size)) in OBJECT_KINDS.iter().take(n).enumerate() {
        // Objects sit at distinct spots on a coarse ring around the room.
        let a = k as f64 / n as f64 * std::f64::consts::TAU + uniform(&mut rng, -0.2, 0.2);
        let r = uniform(&mut rng, 2.2, 3.0);
        let scale = uniform(&mut rng, 0.85, 1.15);
        let (sx, sy, sz) = (size[0] * scale, size[1] * scale, size[2] * uniform(&mut rng, 0.8, 1.25));
        let c = Vec3::new(w / 2.0 + r * a.cos(), d / 2.0 + r * 0.8 * a.sin(), 0.0);
        objects.push(SceneObject {
            instance_id: k as InstanceId + 1,
            category: cat.to_string(),
            referring: name.to_string(),
            min: Vec3::new(c.x - sx / 2.0, c.y - sy / 2.0, 0.0),
            max: Vec3::new(c.x + sx / 2.0, c.y + sy / 2.0, sz),
        });
    }
    if let Some(table) = objects.first().cloned() {
        let c = (table.min + table.max) / 2.0;
        objects.push(SceneObject {
            instance_id: objects.len() as InstanceId + 1,
            category: "cup".into(),
            referring: "the white cup".into(),
            min: Vec3::new(c.x - 0.05, c.y - 0.05, table.max.z + 0.001),
            max: Vec3::new(c.x + 0.05, c.y + 0.05, table.max.z + 0.121),
        });
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..3000 {
        points.push(Vec3::new(uniform(&mut rng, 0.0, w), uniform(&mut rng, 0.0, d), 0.0));
        labels.push(-1);
    }
    for o in &objects {
        let pts = surface_points(&mut rng, o.min, o.max, 600);
        labels.extend(std::iter::repeat_n(o.instance_id as i32, pts.len()));
        points.extend(pts);
    }

    let poses = walk(w, d, 90, 30.0);
    let intrinsics = Intrinsics {
        fx: 60.0,
        fy: 60.0,
        cx: 79.5,
        cy: 59.5,
        width: 160,
        height: 120,
    };
    let tracks = objects.iter().map(|o| box_track(o, &poses, &intrinsics)).collect();
    SyntheticScene {
        id: id.to_string(),
        cloud: PointCloud {
            points,
            labels: Some(labels),
            colors: None,
        },
        poses,
        objects,
        intrinsics,
        tracks,
    }
}

/// Screen-space bounding rectangle of the projected box corners, per frame.
fn box_track(o: &SceneObject, poses: &[Pose], intr: &Intrinsics) -> Track {
    let mut track = Track::new(o.instance_id, o.category.clone());
    for pose in poses {
        let mut px = Vec::new();
        for i in 0..8 {
            let corner = Vec3::new(
                if i & 1 == 0 { o.min.x } else { o.max.x },
                if i & 2 == 0 { o.min.y } else { o.max.y },
                if i & 4 == 0 { o.min.z } else { o.max.z },
            );
            match project_to_pixel(intr, pose, &corner) {
                Some((u, v, _)) => px.push((u, v)),
                None => {
                    px.clear();
                    break;
                }
            }
        }
        if px.is_empty() {
            continue;
        }
        let clamp = |x: f64, hi: u32| x.clamp(0.0, f64::from(hi)) as u32;
        let c0 = clamp(px.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor(), intr.width);
        let c1 = clamp(px.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0, intr.width);
        let r0 = clamp(px.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor(), intr.height);
        let r1 = clamp(px.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0, intr.height);
        if c1 > c0 && r1 > r0 {
            track.insert(pose.frame_index, Rle::rect(intr.height, intr.width, r0, c0, r1, c1), MaskOrigin::Detected);
        }
    }
    track
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{detect_ground, gravity_align, RansacParams};

    #[test]
    fn room_is_seeded() {
        let a = synthetic_room(&RoomSpec::default(), 3);
        let b = synthetic_room(&RoomSpec::default(), 3);
        assert_eq!(a.cloud, b.cloud);
        let total = a.cloud.len() as f64;
        assert!((total - 10_000.0 / 0.7).abs() < 2.0);
        let angle = a.tilt.rotation.transform_vector(&Vec3::z()).angle(&Vec3::z()).to_degrees();
        assert!((angle - 15.0).abs() < 1e-9);
    }

    #[test]
    fn room_floor_recovered() {
        let room = synthetic_room(&RoomSpec::default(), 9);
        let g = detect_ground(&room.cloud, &room.poses[0], &RansacParams::default()).unwrap();
        let al = gravity_align(&room.cloud, &room.poses, &g.plane).unwrap();
        assert!((al.tilt_deg - 15.0).abs() < 1.0, "{}", al.tilt_deg);
    }

    #[test]
    fn scene_layout() {
        let s = synthetic_scene("demo", 10, 1);
        assert_eq!(s.objects.len(), 11);
        assert_eq!(s.tracks.len(), 11);
        assert!(s.tracks.iter().all(|t| t.len() >= 8), "{:?}", s.tracks.iter().map(|t| t.len()).collect::<Vec<_>>());
        let refs: std::collections::BTreeSet<_> = s.objects.iter().map(|o| &o.referring).collect();
        assert_eq!(refs.len(), s.objects.len());
        for (i, a) in s.objects.iter().enumerate() {
            for b in &s.objects[i + 1..] {
                if b.category == "cup" || a.category == "cup" {
                    continue;
                }
                let overlap = a.min.x < b.max.x && b.min.x < a.max.x && a.min.y < b.max.y && b.min.y < a.max.y;
                assert!(!overlap, "{} overlaps {}", a.category, b.category);
            }
        }
    }
}
