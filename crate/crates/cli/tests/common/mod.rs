#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use egoqa_core::geom::RigidTransform;
use egoqa_core::io::{self, records_from_tracks, write_jsonl, write_ply, write_trajectory, PlyEncoding};
use egoqa_core::rng::SeedStream;
use egoqa_core::synth::{random_tilt, synthetic_scene, SyntheticScene};

pub fn egoqa(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_egoqa")).args(args).output().unwrap()
}

pub fn run_cmd(cmd: &str, config: &Path) -> Output {
    egoqa(&[cmd, "--config", config.to_str().unwrap()])
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Writes one synthetic scene under `dir/<id>/`, tilted by `tilt_deg`; a
/// zero tilt leaves the scene in its aligned frame.
pub fn write_scene(dir: &Path, id: &str, seed: u64, tilt_deg: f64) -> SyntheticScene {
    let scene = synthetic_scene(id, 10, seed);
    let tilt = if tilt_deg == 0.0 {
        RigidTransform::identity()
    } else {
        random_tilt(&mut SeedStream::new(seed).child("tilt").rng(), tilt_deg)
    };
    let sdir = dir.join(id);
    std::fs::create_dir_all(&sdir).unwrap();
    let cloud = scene.cloud.transformed(&tilt);
    let poses: Vec<_> = scene.poses.iter().map(|p| tilt.apply_pose(p)).collect();
    write_ply(io::create(&sdir.join("cloud.ply")).unwrap(), &cloud, PlyEncoding::BinaryLittleEndian).unwrap();
    write_trajectory(io::create(&sdir.join("trajectory.csv")).unwrap(), &poses).unwrap();
    let records = records_from_tracks(id, &scene.tracks);
    write_jsonl(io::create(&sdir.join("masks.jsonl")).unwrap(), &records).unwrap();
    let refs: std::collections::BTreeMap<String, String> = scene.refs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    std::fs::write(sdir.join("refs.json"), serde_json::to_string_pretty(&refs).unwrap()).unwrap();
    scene
}

pub fn scene_block(id: &str) -> String {
    format!(
        "[[scenes]]\nid = \"{id}\"\ncloud = \"{id}/cloud.ply\"\ntrajectory = \"{id}/trajectory.csv\"\nmasks = \"{id}/masks.jsonl\"\ntracker_masks = \"{id}/masks.jsonl\"\nrefs = \"{id}/refs.json\"\n"
    )
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("egoqa.toml");
    std::fs::write(&p, body).unwrap();
    p
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
