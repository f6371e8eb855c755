use std::path::{Path, PathBuf};

use serde::Deserialize;

use egoqa_core::facts::{InstancePolicy, QualitativePolicy};
use egoqa_core::geom::RansacParams;

use crate::{CliError, Command};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Template registry; the built-in one when absent.
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub ransac: RansacParams,
    #[serde(default)]
    pub qualitative: QualitativePolicy,
    #[serde(default)]
    pub instance: InstancePolicy,
    #[serde(default)]
    pub fusion: FusionSettings,
    #[serde(default)]
    pub forge: ForgeSettings,
    pub balance: Option<BalanceSettings>,
    pub score: Option<ScoreSettings>,
    #[serde(default)]
    pub scenes: Vec<SceneConfig>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub id: String,
    pub cloud: PathBuf,
    pub trajectory: PathBuf,
    pub intrinsics: Option<PathBuf>,
    /// Fused masks; defaults to the `fuse` output.
    pub masks: Option<PathBuf>,
    /// Raw tracker output consumed by `fuse`.
    pub tracker_masks: Option<PathBuf>,
    /// JSON object mapping instance id to referring expression.
    pub refs: Option<PathBuf>,
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    pub fps: f64,
    pub merge_threshold: f64,
    pub reverse_window_seconds: f64,
    pub chunk_seconds: f64,
    pub category_cap: usize,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            fps: 30.0,
            merge_threshold: 0.5,
            reverse_window_seconds: 4.0,
            chunk_seconds: egoqa_core::fusion::DEFAULT_CHUNK_SECONDS,
            category_cap: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeSettings {
    pub quota_per_ability: usize,
    pub relative_margin: f64,
    pub counting_downsample: bool,
}

impl Default for ForgeSettings {
    fn default() -> Self {
        let p = egoqa_core::forge::ForgePolicy::default();
        Self {
            quota_per_ability: p.quota_per_ability,
            relative_margin: p.relative_margin,
            counting_downsample: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceSettings {
    /// QA pool; defaults to the `forge` output.
    pub pool: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub frequency: PathBuf,
    #[serde(default = "default_target")]
    pub target: usize,
}

fn default_target() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSettings {
    /// Ground-truth QA file; defaults to the `forge` output.
    pub qa: Option<PathBuf>,
    pub predictions: PathBuf,
    /// Recorded judge replies for offline runs.
    pub judge_fixtures: Option<PathBuf>,
    #[serde(default = "default_judge_model")]
    pub judge_model: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_judge_model() -> String {
    "judge".into()
}

fn default_in_flight() -> usize {
    4
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.resolve_paths();
        let mut seen = std::collections::BTreeSet::new();
        for s in &cfg.scenes {
            if !seen.insert(s.id.as_str()) {
                return Err(usage(format!("duplicate scene id {}", s.id)));
            }
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(usage(format!("invalid scene id {:?}", s.id)));
            }
        }
        cfg.scenes.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(cfg)
    }

    /// Reads the config and checks that the inputs `command` needs exist.
    pub fn load(path: &Path, command: Command) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::parse(&text, &base)?;
        cfg.check_inputs(command)?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self) {
        let base = self.base_dir.clone();
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = &mut self.templates {
            fix(p);
        }
        for s in &mut self.scenes {
            fix(&mut s.cloud);
            fix(&mut s.trajectory);
            for p in [&mut s.intrinsics, &mut s.masks, &mut s.tracker_masks, &mut s.refs].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(b) = &mut self.balance {
            fix(&mut b.frequency);
            for p in [&mut b.pool, &mut b.taxonomy].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(s) = &mut self.score {
            fix(&mut s.predictions);
            for p in [&mut s.qa, &mut s.judge_fixtures].into_iter().flatten() {
                fix(p);
            }
        }
    }

    pub fn scene_dir(&self, id: &str) -> PathBuf {
        self.out_dir.join(id)
    }

    pub fn aligned_cloud(&self, id: &str) -> PathBuf {
        self.scene_dir(id).join("aligned.ply")
    }

    pub fn aligned_trajectory(&self, id: &str) -> PathBuf {
        self.scene_dir(id).join("trajectory.csv")
    }

    pub fn qa_path(&self) -> PathBuf {
        self.out_dir.join("qa.jsonl")
    }

    /// Fused masks of a scene: the configured file or the `fuse` output.
    pub fn masks_path(&self, scene: &SceneConfig) -> PathBuf {
        scene.masks.clone().unwrap_or_else(|| self.scene_dir(&scene.id).join("masks.jsonl"))
    }

    pub fn check_inputs(&self, command: Command) -> Result<(), CliError> {
        if let Some(t) = &self.templates {
            require(t, "template registry")?;
        }
        let needs_scenes = matches!(command, Command::Align | Command::Fuse | Command::Facts | Command::Forge);
        if needs_scenes && self.scenes.is_empty() {
            return Err(usage("config lists no [[scenes]]"));
        }
        for s in &self.scenes {
            if let Some(p) = &s.intrinsics {
                require(p, "intrinsics")?;
            }
            match command {
                Command::Align => {
                    require(&s.cloud, "point cloud")?;
                    require(&s.trajectory, "trajectory")?;
                }
                Command::Fuse => {
                    let p = s.tracker_masks.as_ref().ok_or_else(|| usage(format!("scene {}: no tracker_masks", s.id)))?;
                    require(p, "tracker masks")?;
                }
                Command::Facts | Command::Forge => {
                    let hint = |what: &str| format!("{what} (run `egoqa align` first)");
                    require(&self.aligned_cloud(&s.id), &hint("aligned cloud"))?;
                    require(&self.aligned_trajectory(&s.id), &hint("aligned trajectory"))?;
                    require(&self.masks_path(s), "fused masks")?;
                    if let Some(p) = &s.refs {
                        require(p, "referring expressions")?;
                    }
                }
                Command::Balance | Command::Score => {}
            }
        }
        match command {
            Command::Balance => {
                let b = self.balance.as_ref().ok_or_else(|| usage("config has no [balance] table"))?;
                require(&b.frequency, "frequency table")?;
                if let Some(t) = &b.taxonomy {
                    require(t, "taxonomy")?;
                }
                require(&b.pool.clone().unwrap_or_else(|| self.qa_path()), "QA pool")?;
            }
            Command::Score => {
                let s = self.score.as_ref().ok_or_else(|| usage("config has no [score] table"))?;
                require(&s.predictions, "predictions")?;
                require(&s.qa.clone().unwrap_or_else(|| self.qa_path()), "QA file")?;
                if let Some(f) = &s.judge_fixtures {
                    require(f, "judge fixtures")?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}
