use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use egoqa_core::balance::{estimate_targets, stratified_sample, DeficitReport, FrequencyTable, Taxonomy};
use egoqa_core::facts::{compute_scene_facts, policy_digest, FactRecord, Scene};
use egoqa_core::forge::{counting_downsample, forge_scene, ForgeInputs, ForgePolicy, TemplateRegistry};
use egoqa_core::fusion::{assemble_lifecycles, cap_per_category, segment_video, InstanceId, LifecycleConfig, ReplayObject, ReplayTracker};
use egoqa_core::geom::{detect_ground, gravity_align, PointCloud, Pose};
use egoqa_core::io::{self, read_jsonl, records_from_tracks, write_jsonl, MaskRecord, PlyEncoding};
use egoqa_core::metrics::{aggregate, score_item, ItemScore, Judge, Prediction, ScoreError, ScoreReport};
use egoqa_core::qa::{Ability, QaItem};
use egoqa_core::rng::SeedStream;
use egoqa_gateway::{GatewayConfig, HttpTransport, LlmJudge, MockTransport, RetryPolicy, ThreadSleeper, Transport};

use crate::config::{PipelineConfig, SceneConfig};
use crate::{CliError, Command, JsonlMaskSource};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub live_llm: bool,
    /// Scene workers; 0 uses every logical core.
    pub jobs: usize,
}

fn data(stage: &str, scene: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("scene {scene}: {stage}: {e}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = io::create(path).map_err(|e| CliError::Data(e.to_string()))?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let w = io::create(path).map_err(|e| CliError::Data(e.to_string()))?;
    write_jsonl(w, records).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    io::open(path)
        .and_then(read_jsonl)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn relative(cfg: &PipelineConfig, p: &Path) -> String {
    p.strip_prefix(&cfg.out_dir).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    scenes: Vec<&'a str>,
    outputs: Vec<String>,
}

/// Runs one subcommand; returns a short summary for stdout.
pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<String, CliError> {
    let mut cfg = PipelineConfig::load(config_path, command)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    let (outputs, summary) = pool.install(|| match command {
        Command::Align => per_scene(&cfg, align_scene),
        Command::Fuse => per_scene(&cfg, fuse_scene),
        Command::Facts => per_scene(&cfg, facts_scene),
        Command::Forge => forge(&cfg),
        Command::Balance => balance(&cfg),
        Command::Score => score(&cfg, opts),
    })?;
    let manifest = Manifest {
        command: command.name(),
        seed: cfg.seed,
        scenes: cfg.scenes.iter().map(|s| s.id.as_str()).collect(),
        outputs: outputs.iter().map(|p| relative(&cfg, p)).collect(),
    };
    write_json(&cfg.out_dir.join(format!("manifest_{}.json", command.name())), &manifest)?;
    Ok(summary)
}

type StageOutput = (Vec<PathBuf>, String);

/// Runs `f` on every scene in parallel; outputs and the first error follow
/// scene-id order.
fn per_scene(cfg: &PipelineConfig, f: fn(&PipelineConfig, &SceneConfig) -> Result<StageOutput, CliError>) -> Result<StageOutput, CliError> {
    let results: Vec<_> = cfg.scenes.par_iter().map(|s| f(cfg, s)).collect();
    let mut outputs = Vec::new();
    let mut lines = Vec::new();
    for r in results {
        let (o, line) = r?;
        outputs.extend(o);
        lines.push(line);
    }
    Ok((outputs, lines.join("\n")))
}

fn read_cloud(path: &Path, scene: &str, stage: &str) -> Result<PointCloud, CliError> {
    io::open(path).and_then(io::read_ply).map_err(|e| data(stage, scene, e))
}

fn read_poses(path: &Path, scene: &str, stage: &str) -> Result<Vec<Pose>, CliError> {
    let poses = io::open(path).and_then(io::read_trajectory).map_err(|e| data(stage, scene, e))?;
    if poses.is_empty() {
        return Err(data(stage, scene, "trajectory is empty"));
    }
    Ok(poses)
}

#[derive(Serialize)]
struct PlaneReport {
    normal: [f64; 3],
    offset: f64,
    inlier_count: usize,
}

#[derive(Serialize)]
struct AlignReport<'a> {
    scene_id: &'a str,
    seed: u64,
    ransac_seed: u64,
    ground_plane: PlaneReport,
    planes_extracted: usize,
    camera_deviation_deg: f64,
    angle_corrected_deg: f64,
    /// Row-major 4x4, input frame to aligned frame.
    transform: [[f64; 4]; 4],
}

fn align_scene(cfg: &PipelineConfig, s: &SceneConfig) -> Result<StageOutput, CliError> {
    let cloud = read_cloud(&s.cloud, &s.id, "align")?;
    let poses = read_poses(&s.trajectory, &s.id, "align")?;
    let mut params = cfg.ransac;
    params.rng_seed = SeedStream::new(cfg.seed).child("ransac").child(&s.id).seed();
    let det = detect_ground(&cloud, &poses[0], &params).map_err(|e| data("align", &s.id, e))?;
    let al = gravity_align(&cloud, &poses, &det.plane).map_err(|e| data("align", &s.id, e))?;
    let n = al.oriented_ground.normal;
    let report = AlignReport {
        scene_id: &s.id,
        seed: cfg.seed,
        ransac_seed: params.rng_seed,
        ground_plane: PlaneReport {
            normal: [n.x, n.y, n.z],
            offset: al.oriented_ground.offset,
            inlier_count: al.oriented_ground.inlier_count,
        },
        planes_extracted: det.candidates.len(),
        camera_deviation_deg: det.deviation_deg,
        angle_corrected_deg: al.tilt_deg,
        transform: al.transform.to_row_major(),
    };
    let ply = cfg.aligned_cloud(&s.id);
    let traj = cfg.aligned_trajectory(&s.id);
    let rep = cfg.scene_dir(&s.id).join("align_report.json");
    let mut w = io::create(&ply).map_err(|e| data("align", &s.id, e))?;
    io::write_ply(&mut w, &al.cloud, PlyEncoding::BinaryLittleEndian).map_err(|e| data("align", &s.id, e))?;
    w.flush().map_err(|e| data("align", &s.id, e))?;
    let w = io::create(&traj).map_err(|e| data("align", &s.id, e))?;
    io::write_trajectory(w, &al.poses).map_err(|e| data("align", &s.id, e))?;
    write_json(&rep, &report)?;
    let line = format!("{}: corrected {:.3} deg, ground inliers {}", s.id, al.tilt_deg, al.oriented_ground.inlier_count);
    Ok((vec![ply, traj, rep], line))
}

#[derive(Serialize)]
struct FuseReport<'a> {
    scene_id: &'a str,
    key_frames: Vec<u64>,
    tracks_fused: usize,
    tracks_kept: usize,
}

fn fuse_scene(cfg: &PipelineConfig, s: &SceneConfig) -> Result<StageOutput, CliError> {
    let raw: Vec<MaskRecord> = read_records(s.tracker_masks.as_ref().expect("checked at load"))?;
    if raw.is_empty() {
        return Err(data("fuse", &s.id, "tracker masks file has no records"));
    }
    let mut objects: BTreeMap<InstanceId, ReplayObject> = BTreeMap::new();
    let mut total_frames = 0;
    for r in &raw {
        let mask = r.mask().map_err(|e| data("fuse", &s.id, e))?;
        let o = objects.entry(r.instance_id).or_insert_with(|| ReplayObject::new(r.category.clone()));
        o.masks.insert(r.frame_index, mask);
        total_frames = total_frames.max(r.frame_index + 1);
    }
    let fps = s.fps.unwrap_or(cfg.fusion.fps);
    let keys: Vec<u64> = segment_video(total_frames, fps, cfg.fusion.chunk_seconds).into_iter().map(|(a, _)| a).collect();
    let mut tracker = ReplayTracker::new(objects.into_values().collect());
    let batches = tracker.detections(keys.iter().copied());
    let lc = LifecycleConfig {
        fps,
        total_frames,
        merge_threshold: cfg.fusion.merge_threshold,
        reverse_window_seconds: cfg.fusion.reverse_window_seconds,
    };
    let tracks = assemble_lifecycles(&batches, &mut tracker, &lc).map_err(|e| data("fuse", &s.id, e))?;
    let kept = cap_per_category(&tracks, cfg.fusion.category_cap);
    let masks = cfg.scene_dir(&s.id).join("masks.jsonl");
    let rep = cfg.scene_dir(&s.id).join("fuse_report.json");
    write_records(&masks, &records_from_tracks(&s.id, &kept))?;
    write_json(
        &rep,
        &FuseReport {
            scene_id: &s.id,
            key_frames: keys,
            tracks_fused: tracks.len(),
            tracks_kept: kept.len(),
        },
    )?;
    Ok((vec![masks, rep], format!("{}: {} tracks, {} kept", s.id, tracks.len(), kept.len())))
}

/// Aligned scene restricted to instances that have a fused mask track.
fn load_scene(cfg: &PipelineConfig, s: &SceneConfig, stage: &str) -> Result<Scene, CliError> {
    let cloud = read_cloud(&cfg.aligned_cloud(&s.id), &s.id, stage)?;
    let poses = read_poses(&cfg.aligned_trajectory(&s.id), &s.id, stage)?;
    let records: Vec<MaskRecord> = read_records(&cfg.masks_path(s))?;
    let mut categories = BTreeMap::new();
    for r in &records {
        categories.entry(r.instance_id).or_insert_with(|| r.category.clone());
    }
    let mut scene = Scene::from_cloud(s.id.clone(), &cloud, poses, categories, &cfg.instance).map_err(|e| data(stage, &s.id, e))?;
    scene.instances.retain(|g| scene.categories.contains_key(&g.instance_id));
    if scene.instances.is_empty() {
        return Err(data(stage, &s.id, "no labeled instance has a mask track"));
    }
    Ok(scene)
}

fn facts_scene(cfg: &PipelineConfig, s: &SceneConfig) -> Result<StageOutput, CliError> {
    let scene = load_scene(cfg, s, "facts")?;
    let digest = policy_digest(&cfg.qualitative, &cfg.instance);
    let facts = compute_scene_facts(&scene, &cfg.qualitative, &cfg.instance);
    let records: Vec<FactRecord> = facts.iter().map(|f| FactRecord::from_fact(&s.id, f, &digest)).collect();
    let path = cfg.scene_dir(&s.id).join("facts.jsonl");
    write_records(&path, &records)?;
    Ok((vec![path], format!("{}: {} facts", s.id, records.len())))
}

fn load_refs(s: &SceneConfig, scene: &Scene) -> Result<BTreeMap<InstanceId, String>, CliError> {
    let mut refs: BTreeMap<InstanceId, String> = match &s.refs {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| data("forge", &s.id, format!("{}: {e}", p.display())))?;
            let raw: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| data("forge", &s.id, format!("{}: {e}", p.display())))?;
            raw.into_iter()
                .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| data("forge", &s.id, format!("bad instance id {k:?} in refs"))))
                .collect::<Result<_, _>>()?
        }
        None => BTreeMap::new(),
    };
    for (id, cat) in &scene.categories {
        refs.entry(*id).or_insert_with(|| format!("the {cat}"));
    }
    Ok(refs)
}

fn registry(cfg: &PipelineConfig) -> Result<TemplateRegistry, CliError> {
    match &cfg.templates {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            TemplateRegistry::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
        None => Ok(TemplateRegistry::builtin()),
    }
}

fn forge(cfg: &PipelineConfig) -> Result<StageOutput, CliError> {
    let registry = registry(cfg)?;
    let policy = ForgePolicy {
        quota_per_ability: cfg.forge.quota_per_ability,
        relative_margin: cfg.forge.relative_margin,
        seed: cfg.seed,
    };
    let per: Vec<Result<Vec<QaItem>, CliError>> = cfg
        .scenes
        .par_iter()
        .map(|s| {
            let scene = load_scene(cfg, s, "forge")?;
            let refs = load_refs(s, &scene)?;
            let inputs = ForgeInputs {
                scene: &scene,
                refs: &refs,
                qualitative: &cfg.qualitative,
                instance: &cfg.instance,
            };
            Ok(forge_scene(&inputs, &registry, &policy))
        })
        .collect();
    let mut items = Vec::new();
    for r in per {
        items.extend(r?);
    }
    if cfg.forge.counting_downsample {
        items = counting_downsample(items, cfg.seed);
    }
    if items.is_empty() {
        return Err(CliError::Data("forge: zero QA items produced (every candidate was filtered)".into()));
    }
    let path = cfg.qa_path();
    write_records(&path, &items)?;
    let mut counts: BTreeMap<Ability, usize> = BTreeMap::new();
    for it in &items {
        *counts.entry(it.ability).or_default() += 1;
    }
    let mut table = format!("{:<24} {:>6}\n", "ability", "items");
    for (a, n) in &counts {
        table.push_str(&format!("{:<24} {:>6}\n", a.as_str(), n));
    }
    table.push_str(&format!("{:<24} {:>6}", "total", items.len()));
    Ok((vec![path], table))
}

#[derive(Serialize)]
struct BalanceReport {
    seed: u64,
    target: usize,
    pool_size: usize,
    #[serde(flatten)]
    deficits: DeficitReport,
}

fn balance(cfg: &PipelineConfig) -> Result<StageOutput, CliError> {
    let b = cfg.balance.as_ref().expect("checked at load");
    let taxonomy = match &b.taxonomy {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Taxonomy::parse(&text).map_err(|e| CliError::Data(format!("balance: {}: {e}", p.display())))?
        }
        None => Taxonomy::builtin(),
    };
    let freq = io::open(&b.frequency)
        .map_err(|e| CliError::Data(e.to_string()))
        .and_then(|r| FrequencyTable::from_csv(r).map_err(|e| CliError::Data(format!("balance: {}: {e}", b.frequency.display()))))?;
    let pool: Vec<QaItem> = read_records(&b.pool.clone().unwrap_or_else(|| cfg.qa_path()))?;
    let targets = estimate_targets(&freq, b.target);
    let outcome = stratified_sample(&pool, &targets, cfg.seed, Some(&taxonomy));
    let out = cfg.out_dir.join("balanced.jsonl");
    let rep = cfg.out_dir.join("deficit_report.json");
    write_records(&out, &outcome.items)?;
    let summary = format!(
        "balanced {} of {} pool items (target {}, {} classes short)",
        outcome.items.len(),
        pool.len(),
        b.target,
        outcome.report.deficits.len()
    );
    write_json(
        &rep,
        &BalanceReport {
            seed: cfg.seed,
            target: b.target,
            pool_size: pool.len(),
            deficits: outcome.report,
        },
    )?;
    Ok((vec![out, rep], summary))
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    seed: u64,
    #[serde(flatten)]
    report: &'a ScoreReport,
}

fn score(cfg: &PipelineConfig, opts: &RunOptions) -> Result<StageOutput, CliError> {
    let sc = cfg.score.as_ref().expect("checked at load");
    let items: Vec<QaItem> = read_records(&sc.qa.clone().unwrap_or_else(|| cfg.qa_path()))?;
    let preds: Vec<Prediction> = read_records(&sc.predictions)?;
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in &preds {
        if by_id.insert(p.qa_id.as_str(), p).is_some() {
            return Err(CliError::Data(format!("score: duplicate prediction for {}", p.qa_id)));
        }
    }
    let transport: Option<Box<dyn Transport>> = if opts.live_llm {
        let mut gc = GatewayConfig::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
        gc.image_root = cfg.base_dir.clone();
        Some(Box::new(HttpTransport::new(gc)))
    } else if let Some(f) = &sc.judge_fixtures {
        Some(Box::new(MockTransport::from_file(f).map_err(|e| CliError::Usage(e.to_string()))?))
    } else {
        None
    };
    let sleeper = ThreadSleeper;
    let judge = transport.as_deref().map(|t| LlmJudge {
        transport: t,
        model: sc.judge_model.clone(),
        policy: RetryPolicy::default(),
        sleeper: &sleeper,
    });
    let masks = JsonlMaskSource::new(cfg.base_dir.clone());
    let judge_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sc.max_in_flight.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let scores: Vec<ItemScore> = judge_pool.install(|| {
        items
            .par_iter()
            .map(|item| {
                let result = match by_id.get(item.id.as_str()) {
                    Some(p) => score_item(item, p, judge.as_ref().map(|j| j as &dyn Judge), &masks),
                    None => Err(ScoreError::MissingPrediction { qa_id: item.id.clone() }),
                };
                ItemScore::from_result(item, result)
            })
            .collect()
    });
    let report = aggregate(scores);
    let path = cfg.out_dir.join("score_report.json");
    write_json(&path, &ScoreOutput { seed: cfg.seed, report: &report })?;
    if report.unscored > 0 {
        return Err(CliError::Transport(format!(
            "score: {} of {} items unscored (report written to {})",
            report.unscored,
            report.items.len(),
            path.display()
        )));
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    let summary = format!(
        "overall {} over {} items (item-weighted {})",
        fmt(report.overall),
        report.items.len(),
        fmt(report.overall_item_weighted)
    );
    Ok((vec![path], summary))
}
