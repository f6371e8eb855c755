//! File formats: PLY clouds, trajectory and intrinsics CSV, JSONL records.

mod ply;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use ply::{read_ply, write_ply, PlyEncoding};

use crate::fusion::{InstanceId, MaskError, MaskOrigin, Rle, Track};
use crate::geom::{GeomError, Intrinsics, Pose};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("json: {0}")]
    JsonWrite(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("line {line}: {source}")]
    Mask { line: usize, source: MaskError },
}

pub fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// One JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<(), IoError> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    frame: u64,
    timestamp_s: f64,
    tx: f64,
    ty: f64,
    tz: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    qw: f64,
}

/// Camera-to-world poses from `frame,timestamp_s,tx,ty,tz,qx,qy,qz,qw`.
pub fn read_trajectory(reader: impl Read) -> Result<Vec<Pose>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut poses = Vec::new();
    for row in rdr.deserialize::<TrajectoryRow>() {
        let r = row?;
        poses.push(Pose::from_components(r.frame, r.timestamp_s, [r.tx, r.ty, r.tz], [r.qx, r.qy, r.qz, r.qw])?);
    }
    crate::geom::validate_trajectory(&poses)?;
    Ok(poses)
}

pub fn write_trajectory(writer: impl Write, poses: &[Pose]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in poses {
        let q = p.rotation.quaternion();
        let t = p.translation;
        w.serialize(TrajectoryRow {
            frame: p.frame_index,
            timestamp_s: p.timestamp,
            tx: t.x,
            ty: t.y,
            tz: t.z,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            qw: q.w,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar CSV with header `fx,fy,cx,cy,width,height` and one row.
pub fn read_intrinsics(reader: impl Read) -> Result<Intrinsics, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = rdr.deserialize::<Intrinsics>();
    let intr = rows.next().ok_or_else(|| IoError::Format("intrinsics file has no data row".into()))??;
    if rows.next().is_some() {
        return Err(IoError::Format("intrinsics file has more than one data row".into()));
    }
    intr.validate()?;
    Ok(intr)
}

/// Mask JSONL record: one instance in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub video_id: String,
    pub frame_index: u64,
    pub instance_id: InstanceId,
    pub category: String,
    pub size: [u32; 2],
    pub counts: String,
}

impl MaskRecord {
    pub fn new(video_id: &str, frame_index: u64, instance_id: InstanceId, category: &str, mask: &Rle) -> Self {
        Self {
            video_id: video_id.to_string(),
            frame_index,
            instance_id,
            category: category.to_string(),
            size: [mask.height(), mask.width()],
            counts: mask.counts_string(),
        }
    }

    pub fn mask(&self) -> Result<Rle, MaskError> {
        Rle::parse(self.size[0], self.size[1], &self.counts)
    }
}

/// Groups mask records into per-instance tracks, ascending by id. The
/// category of an instance is taken from its first record.
pub fn tracks_from_records(records: &[MaskRecord]) -> Result<Vec<Track>, IoError> {
    let mut tracks: BTreeMap<InstanceId, Track> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let mask = r.mask().map_err(|source| IoError::Mask { line: i + 1, source })?;
        tracks
            .entry(r.instance_id)
            .or_insert_with(|| Track::new(r.instance_id, r.category.clone()))
            .insert(r.frame_index, mask, MaskOrigin::Detected);
    }
    Ok(tracks.into_values().collect())
}

pub fn records_from_tracks(video_id: &str, tracks: &[Track]) -> Vec<MaskRecord> {
    let mut out: Vec<MaskRecord> = tracks
        .iter()
        .flat_map(|t| t.frames.iter().map(move |(&f, tf)| MaskRecord::new(video_id, f, t.instance_id, &t.category, &tf.mask)))
        .collect();
    out.sort_by_key(|r| (r.frame_index, r.instance_id));
    out
}
