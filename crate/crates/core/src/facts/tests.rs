use super::*;
use nalgebra::UnitQuaternion;
use proptest::prelude::*;

fn upright(pos: Vec3, yaw_deg: f64) -> Pose {
    Pose::upright(pos, yaw_deg, 0.0, 0)
}

fn boxed(id: InstanceId, min: [f64; 3], max: [f64; 3]) -> InstanceGeometry {
    InstanceGeometry::from_box(id, Vec3::from(min), Vec3::from(max), 100)
}

fn at(id: InstanceId, c: [f64; 3]) -> InstanceGeometry {
    boxed(id, [c[0] - 0.1, c[1] - 0.1, c[2] - 0.1], [c[0] + 0.1, c[1] + 0.1, c[2] + 0.1])
}

fn pose_at(p: [f64; 3]) -> Pose {
    Pose::new(UnitQuaternion::identity(), Vec3::from(p), 0.0, 0)
}

#[test]
fn trajectory_lengths() {
    let l = trajectory_length(&[pose_at([0.0, 0.0, 0.0]), pose_at([1.0, 0.0, 0.0]), pose_at([1.0, 1.0, 0.0])]).unwrap();
    assert!((l - 2.0).abs() < 1e-15);
    assert_eq!(trajectory_length(&[pose_at([3.0, 1.0, 0.0])]).unwrap(), 0.0);
    let square: Vec<Pose> = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]
        .iter()
        .map(|p| pose_at([p[0], p[1], 1.5]))
        .collect();
    assert!((trajectory_length(&square).unwrap() - 4.0).abs() < 1e-15);
    assert_eq!(trajectory_length(&[]), Err(FactError::EmptyTrajectory));
}

#[test]
fn ego_distances() {
    let cam = pose_at([0.0, 0.0, 0.0]);
    assert!((ego_distance(&cam, &at(1, [3.0, 4.0, 0.0])) - 5.0).abs() < 1e-12);
    assert_eq!(ego_distance(&cam, &at(1, [0.0, 0.0, 0.0])), 0.0);
    let near = at(1, [1.0, 0.0, 0.0]);
    let far = at(2, [0.0, 2.0, 0.0]);
    assert_eq!(closer_of(&cam, &near, &far).unwrap(), 1);
}

#[test]
fn clockwise_direction_conventions() {
    let cam = upright(Vec3::new(0.0, 0.0, 1.5), 90.0); // heading +Y
    let ahead = at(1, [0.0, 3.0, 0.5]);
    let right = at(2, [2.0, 0.0, 0.5]);
    let left = at(3, [-2.0, 0.0, 0.5]);
    assert!(ego_direction_cw(&cam, &ahead).unwrap().abs() < 1e-9);
    assert!((ego_direction_cw(&cam, &right).unwrap() - 90.0).abs() < 1e-9);
    assert!((ego_direction_cw(&cam, &left).unwrap() - 270.0).abs() < 1e-9);
    let overhead = at(4, [0.0, 0.0, 0.2]);
    assert_eq!(ego_direction_cw(&cam, &overhead), Err(FactError::DegenerateBearing(4)));
}

#[test]
fn turn_composition() {
    let p = QualitativePolicy::default();
    let cam = upright(Vec3::new(0.0, 0.0, 1.5), 0.0); // heading +X; right is -Y
    let ahead = at(1, [3.0, 0.0, 0.5]);
    let right = at(2, [0.0, -3.0, 0.5]);
    assert_eq!(post_turn_relation(&cam, &ahead, -90.0, &p).unwrap(), Sector::Right);
    assert_eq!(post_turn_relation(&cam, &right, 90.0, &p).unwrap(), Sector::Front);
    for g in [&ahead, &right] {
        assert_eq!(post_turn_relation(&cam, g, 0.0, &p).unwrap(), ego_relative_position(&cam, g, &p).unwrap());
    }
}

#[test]
fn sector_table() {
    let p = QualitativePolicy::default();
    assert_eq!(p.sector(0.0), Sector::Front);
    assert_eq!(p.sector(100.0), Sector::Right);
    assert_eq!(p.sector(315.0), Sector::Front);
    assert_eq!(p.sector(314.999), Sector::Left);
    assert_eq!(p.sector(45.0), Sector::Right);
    assert_eq!(p.sector(135.0), Sector::Back);
    assert_eq!(p.sector(225.0), Sector::Left);
    p.validate().unwrap();
    let bad = QualitativePolicy {
        sector_starts_deg: [0.0, 45.0, 30.0, 225.0],
        ..p
    };
    assert!(bad.validate().is_err());
}

#[test]
fn center_distances() {
    assert_eq!(center_distance(&at(1, [1.0, 1.0, 1.0]), &at(2, [1.0, 1.0, 1.0])), 0.0);
    assert!((center_distance(&at(1, [0.0, 0.0, 0.0]), &at(2, [0.0, 0.0, 2.0])) - 2.0).abs() < 1e-12);
}

#[test]
fn elevations() {
    let floor_a = boxed(1, [0.0, 0.0, 0.0], [1.0, 1.0, 0.5]);
    let floor_b = boxed(2, [2.0, 0.0, 0.0], [3.0, 1.0, 0.8]);
    let shelf = boxed(3, [0.0, 0.0, 1.2], [0.2, 0.2, 1.4]);
    assert_eq!(elevation_diff(&floor_a, &floor_b).unwrap(), 0.0);
    assert!((elevation_diff(&shelf, &floor_a).unwrap() - 1.2).abs() < 1e-12);
    assert_eq!(elevation_diff(&shelf, &floor_a).unwrap(), -elevation_diff(&floor_a, &shelf).unwrap());
    let sunk = boxed(4, [0.0, 0.0, -0.9], [1.0, 1.0, 0.0]);
    assert!(matches!(elevation_diff(&sunk, &floor_a), Err(FactError::NotAligned { id: 4, .. })));
}

fn lattice(origin: Vec3, extent: Vec3, n: [usize; 3]) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let f = |a: usize, m: usize| if m == 1 { 0.0 } else { a as f64 / (m - 1) as f64 };
                pts.push(origin + Vec3::new(extent.x * f(i, n[0]), extent.y * f(j, n[1]), extent.z * f(k, n[2])));
            }
        }
    }
    pts
}

#[test]
fn lattice_sizes() {
    let pol = InstancePolicy::default();
    let cube = InstanceGeometry::from_points(1, &lattice(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), [11, 11, 11]), &pol).unwrap();
    let d = size_dims(&cube, 20).unwrap();
    for v in [d.width, d.depth, d.height] {
        assert!((v - 1.0).abs() <= 0.04, "{v}");
    }
    let rug = InstanceGeometry::from_points(2, &lattice(Vec3::zeros(), Vec3::new(2.0, 1.0, 0.01), [21, 11, 2]), &pol).unwrap();
    let d = size_dims(&rug, 20).unwrap();
    assert!((d.height - 0.01).abs() < 1e-9);
    assert!((d.width - 2.0).abs() < 1e-9 && (d.depth - 1.0).abs() < 1e-9);
    let sparse = InstanceGeometry::from_points(3, &lattice(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), [5, 1, 1]), &pol).unwrap();
    assert!(matches!(size_dims(&sparse, 20), Err(FactError::TooFewPoints { count: 5, .. })));
}

#[test]
fn ranking() {
    let a = boxed(1, [0.0; 3], [0.3, 0.3, 0.5]);
    let b = boxed(2, [1.0, 0.0, 0.0], [1.3, 0.3, 1.0]);
    let c = boxed(3, [2.0, 0.0, 0.0], [2.3, 0.3, 2.0]);
    assert_eq!(rank_extreme(&[&a, &b, &c], RankKey::HeightExtent, RankMode::Max).unwrap(), 3);
    let cam = pose_at([0.0, 0.0, 0.0]);
    let p = at(4, [1.0, 0.0, 0.0]);
    let q = at(5, [0.0, 1.0, 0.0]);
    assert_eq!(rank_extreme(&[&p, &q], RankKey::EgoDistance(&cam), RankMode::Min), Err(FactError::Ambiguous));
    assert_eq!(rank_extreme(&[&p], RankKey::HeightExtent, RankMode::Max), Err(FactError::TooFewCandidates(1)));
}

#[test]
fn lamp_over_table() {
    let pol = QualitativePolicy::default();
    let table = boxed(1, [0.0, 0.0, 0.0], [1.2, 0.8, 0.9]);
    let lamp = boxed(2, [0.5, 0.3, 1.0], [0.7, 0.5, 1.4]);
    assert_eq!(vertical_relation(&lamp, &table, &pol), VerticalRelation::Above);
    assert_eq!(vertical_relation(&table, &lamp, &pol), VerticalRelation::Below);
    let chair = boxed(3, [2.0, 0.0, 0.0], [2.5, 0.5, 0.9]);
    assert_eq!(vertical_relation(&chair, &table, &pol), VerticalRelation::Neither);
}

fn random_inst(id: InstanceId, r: &[f64]) -> InstanceGeometry {
    let min = Vec3::new(r[0] * 8.0 - 4.0, r[1] * 8.0 - 4.0, r[2] * 2.0);
    let ext = Vec3::new(0.05 + r[3], 0.05 + r[4], 0.05 + r[5] * 2.0);
    InstanceGeometry::from_box(id, min, min + ext, 100)
}

proptest! {
    #[test]
    fn turning_camera_shifts_bearing(yaw in 0.0f64..360.0, theta in 0.0f64..360.0, x in -4.0f64..4.0, y in -4.0f64..4.0) {
        prop_assume!(x.hypot(y) > 0.1);
        let inst = at(1, [x, y, 0.5]);
        let cam = upright(Vec3::new(0.0, 0.0, 1.5), yaw);
        // A clockwise turn by theta decreases the counter-clockwise yaw.
        let turned = upright(Vec3::new(0.0, 0.0, 1.5), yaw - theta);
        let before = ego_direction_cw(&cam, &inst).unwrap();
        let after = ego_direction_cw(&turned, &inst).unwrap();
        let diff = (before - after - theta).rem_euclid(360.0);
        prop_assert!(diff < 1e-6 || diff > 360.0 - 1e-6, "diff {diff}");
        prop_assert!((0.0..360.0).contains(&before));
    }

    #[test]
    fn elevation_antisymmetric(r in proptest::collection::vec(0.0f64..1.0, 12)) {
        let a = random_inst(1, &r[..6]);
        let b = random_inst(2, &r[6..]);
        prop_assert_eq!(elevation_diff(&a, &b).unwrap(), -elevation_diff(&b, &a).unwrap());
        let pol = QualitativePolicy::default();
        let ab = vertical_relation(&a, &b, &pol);
        let ba = vertical_relation(&b, &a, &pol);
        match ab {
            VerticalRelation::Above => prop_assert_ne!(ba, VerticalRelation::Above),
            VerticalRelation::Below => prop_assert_ne!(ba, VerticalRelation::Below),
            VerticalRelation::Neither => prop_assert_eq!(ba, VerticalRelation::Neither),
        }
    }
}
