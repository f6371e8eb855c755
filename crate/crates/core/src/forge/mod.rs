//! Template QA generation, cue-frame selection and per-video filtering.

mod cue;
mod templates;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use cue::{cue_score, select_cue_frames, CueFrame, CueFrameSet, CueWeights, RenderMode, CUE_FRAMES};
pub use templates::{Generator, Template, TemplateRegistry, DEFAULT_TEMPLATES, SLOT_NAMES};

use crate::facts::{
    center_distance, ego_direction_cw, ego_distance, elevation_diff, height_extent, post_turn_relation, rank_extreme, size_dims,
    trajectory_length, vertical_relation, FactKind, FactValue, InstanceGeometry, InstancePolicy, QualitativePolicy, RankKey, RankMode,
    Scene, SpatialFact, Unit, VerticalRelation,
};
use crate::fusion::InstanceId;
use crate::qa::{Ability, Answer, Provenance, QaItem, Variant};
use crate::rng::SeedStream;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ForgeError {
    #[error("template {id}: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("template registry: {0}")]
    Registry(String),
    #[error("template {template} needs {needed} operands, facts supply {got}")]
    MissingSlot { template: String, needed: usize, got: usize },
    #[error("no referring expression for instance {0}")]
    MissingReferringExpression(InstanceId),
    #[error("phrasing {index} out of range for template {template}")]
    PhrasingOutOfRange { template: String, index: usize },
    #[error("template {template} cannot answer from a {kind} fact")]
    FactMismatch { template: String, kind: &'static str },
    #[error("instance {instance_id} spans {frames} frames, need {}", CUE_FRAMES)]
    TooShortTrack { instance_id: InstanceId, frames: usize },
}

/// Per-item identity supplied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemContext {
    pub id: String,
    pub video_id: String,
    pub rng_seed: u64,
}

pub fn round_meters(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn round_degrees(v: f64) -> f64 {
    v.round().rem_euclid(360.0)
}

fn meters(v: f64) -> Answer {
    Answer::Numeric {
        value: round_meters(v),
        unit: Unit::Meters,
    }
}

fn lookup<'a>(refs: &'a BTreeMap<InstanceId, String>, id: InstanceId) -> Result<&'a str, ForgeError> {
    refs.get(&id).map(String::as_str).ok_or(ForgeError::MissingReferringExpression(id))
}

/// Builds one QA item from the template's phrasing and the primary fact
/// (the first of `facts`). Answers are canonicalised: meters to two
/// decimals, degrees to an integer in [0, 360), labels verbatim.
pub fn instantiate(
    template: &Template,
    phrasing_index: usize,
    facts: &[SpatialFact],
    refs: &BTreeMap<InstanceId, String>,
    ctx: &ItemContext,
) -> Result<QaItem, ForgeError> {
    let fact = facts.first().ok_or(ForgeError::MissingSlot {
        template: template.id.clone(),
        needed: template.slots.max(1),
        got: 0,
    })?;
    if fact.operands.len() < template.slots {
        return Err(ForgeError::MissingSlot {
            template: template.id.clone(),
            needed: template.slots,
            got: fact.operands.len(),
        });
    }
    let operands: Vec<InstanceId> = fact.operands[..template.slots].to_vec();
    let names = operands.iter().map(|&id| lookup(refs, id)).collect::<Result<Vec<_>, _>>()?;
    let question = template.render(phrasing_index, &names).ok_or(ForgeError::PhrasingOutOfRange {
        template: template.id.clone(),
        index: phrasing_index,
    })?;

    let mismatch = |kind: &'static str| ForgeError::FactMismatch {
        template: template.id.clone(),
        kind,
    };
    let answer = match (&fact.value, template.generator) {
        (FactValue::Scalar(v), Generator::EgoDirectionCw) => Answer::Numeric {
            value: round_degrees(*v),
            unit: Unit::Degrees,
        },
        (FactValue::Scalar(v), Generator::ElevationDiff) => meters(v.abs()),
        (FactValue::Scalar(v), _) if fact.unit == Some(Unit::Meters) => meters(*v),
        (FactValue::Scalar(_), _) => return Err(mismatch("unitless scalar")),
        (FactValue::Dims(d), Generator::LongestDimension) => meters(d.longest()),
        (FactValue::Dims(_), _) => return Err(mismatch("dims")),
        (FactValue::Label(l), Generator::AbovePredicate) => Answer::Label(if l == "above" { "yes" } else { "no" }.into()),
        (FactValue::Label(l), _) => Answer::Label(l.clone()),
        (FactValue::Instance(id), _) => Answer::Label(lookup(refs, *id)?.to_string()),
    };

    Ok(QaItem {
        id: ctx.id.clone(),
        video_id: ctx.video_id.clone(),
        question,
        answer,
        answer_kind: template.answer_kind,
        ability: template.ability,
        operands,
        masks_ref: None,
        provenance: Provenance {
            template_id: template.id.clone(),
            phrasing_index,
            fact_ids: facts.iter().map(|f| f.id.clone()).collect(),
            rng_seed: ctx.rng_seed,
            variant: template.variant,
            note: fact.detail.clone(),
        },
        category: None,
    })
}

/// Replaces `<Object N>` tags with the referring expression of instance N.
pub fn resolve_object_tags(text: &str, refs: &BTreeMap<InstanceId, String>) -> Result<String, ForgeError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("<Object ") {
        out.push_str(&rest[..i]);
        let tail = &rest[i + "<Object ".len()..];
        let parsed = tail.find('>').and_then(|end| tail[..end].parse::<InstanceId>().ok().map(|id| (id, end)));
        match parsed {
            Some((id, end)) => {
                out.push_str(lookup(refs, id)?);
                rest = &tail[end + 1..];
            }
            None => {
                out.push_str("<Object ");
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgePolicy {
    /// Items per (ability, variant) per video.
    pub quota_per_ability: usize,
    /// Comparative questions need the winner to beat the runner-up by more
    /// than this fraction of the larger value.
    pub relative_margin: f64,
    pub seed: u64,
}

impl Default for ForgePolicy {
    fn default() -> Self {
        Self {
            quota_per_ability: 3,
            relative_margin: 0.10,
            seed: 0,
        }
    }
}

pub struct ForgeInputs<'a> {
    pub scene: &'a Scene,
    pub refs: &'a BTreeMap<InstanceId, String>,
    pub qualitative: &'a QualitativePolicy,
    pub instance: &'a InstancePolicy,
}

/// Relative gap between the best and second-best key values.
pub fn winning_margin(values: &[f64], mode: RankMode) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (w, r) = match mode {
        RankMode::Min => (v[0], v[1]),
        RankMode::Max => (v[v.len() - 1], v[v.len() - 2]),
    };
    let scale = w.abs().max(r.abs());
    if scale == 0.0 {
        0.0
    } else {
        (w - r).abs() / scale
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All admissible fact sets for one template, in enumeration order.
fn candidates(t: &Template, inputs: &ForgeInputs<'_>, policy: &ForgePolicy) -> Vec<Vec<SpatialFact>> {
    let scene = inputs.scene;
    let insts: Vec<&InstanceGeometry> = scene.instances.iter().filter(|g| inputs.refs.contains_key(&g.instance_id)).collect();
    let pose = scene.anchor();
    let anchor = pose.map(|p| p.frame_index);
    let m = |kind: FactKind, ops: Vec<InstanceId>, a: Option<u64>, v: f64| SpatialFact::new(kind, ops, a, FactValue::Scalar(v), Some(Unit::Meters));
    let positive = |v: f64| round_meters(v) > 0.0;
    let mut out = Vec::new();

    let tuples: Vec<Vec<&InstanceGeometry>> = combinations(insts.len(), t.slots)
        .into_iter()
        .map(|ix| ix.into_iter().map(|i| insts[i]).collect::<Vec<_>>())
        .filter(|tuple| {
            let names: BTreeSet<&str> = tuple.iter().map(|g| inputs.refs[&g.instance_id].as_str()).collect();
            names.len() == tuple.len()
        })
        .collect();

    for tuple in tuples {
        let ops: Vec<InstanceId> = tuple.iter().map(|g| g.instance_id).collect();
        let fact = match t.generator {
            Generator::TrajectoryLength => trajectory_length(&scene.poses).ok().filter(|&v| positive(v)).map(|v| m(FactKind::TrajectoryLength, vec![], None, v)),
            Generator::EgoDistance => pose.map(|p| ego_distance(p, tuple[0])).filter(|&v| positive(v)).map(|v| m(FactKind::EgoDistance, ops, anchor, v)),
            Generator::EgoDirectionCw => pose
                .and_then(|p| ego_direction_cw(p, tuple[0]).ok())
                .map(|v| SpatialFact::new(FactKind::EgoDirectionCw, ops, anchor, FactValue::Scalar(v), Some(Unit::Degrees))),
            Generator::EgoSector => pose.and_then(|p| post_turn_relation(p, tuple[0], 0.0, inputs.qualitative).ok()).map(|s| {
                SpatialFact::new(FactKind::EgoRelativePosition, ops, anchor, FactValue::Label(s.label().into()), None)
            }),
            Generator::PostTurnLeft | Generator::PostTurnRight => {
                let turn = if t.generator == Generator::PostTurnLeft { -90.0 } else { 90.0 };
                pose.and_then(|p| post_turn_relation(p, tuple[0], turn, inputs.qualitative).ok()).map(|s| {
                    SpatialFact::new(FactKind::PostTurnRelation, ops, anchor, FactValue::Label(s.label().into()), None)
                        .with_detail(format!("turn_cw={turn}"))
                })
            }
            Generator::HeightExtent => Some(height_extent(tuple[0])).filter(|&v| positive(v)).map(|v| m(FactKind::HeightExtent, ops, None, v)),
            Generator::LongestDimension => size_dims(tuple[0], inputs.instance.min_size_points)
                .ok()
                .filter(|d| positive(d.longest()))
                .map(|d| SpatialFact::new(FactKind::SizeDims, ops, None, FactValue::Dims(d), Some(Unit::Meters)).with_detail("longest")),
            Generator::CenterDistance => {
                Some(center_distance(tuple[0], tuple[1])).filter(|&v| positive(v)).map(|v| m(FactKind::CenterDistance, ops, None, v))
            }
            Generator::ElevationDiff => elevation_diff(tuple[0], tuple[1]).ok().filter(|v| positive(v.abs())).map(|v| {
                // The higher object fills [A].
                let (hi, lo) = if v > 0.0 { (ops[0], ops[1]) } else { (ops[1], ops[0]) };
                m(FactKind::ElevationDiff, vec![hi, lo], None, v.abs())
            }),
            Generator::AbovePredicate => {
                let (a, b) = (tuple[0], tuple[1]);
                // Only clearly stacked pairs are asked; [A] is the upper object
                // for even ids and the lower one otherwise so both answers occur.
                match vertical_relation(a, b, inputs.qualitative) {
                    VerticalRelation::Neither => None,
                    rel => {
                        let (upper, lower) = if rel == VerticalRelation::Above { (a, b) } else { (b, a) };
                        let (first, second) = if (upper.instance_id + lower.instance_id) % 2 == 0 { (upper, lower) } else { (lower, upper) };
                        let label = if first.instance_id == upper.instance_id { "above" } else { "below" };
                        Some(SpatialFact::new(
                            FactKind::VerticalRelation,
                            vec![first.instance_id, second.instance_id],
                            None,
                            FactValue::Label(label.into()),
                            None,
                        ))
                    }
                }
            }
            Generator::CloserOfTwo | Generator::ClosestOfThree | Generator::TallestOfThree => {
                let (key, mode) = match (t.generator, pose) {
                    (Generator::TallestOfThree, _) => (RankKey::HeightExtent, RankMode::Max),
                    (_, Some(p)) => (RankKey::EgoDistance(p), RankMode::Min),
                    (_, None) => continue,
                };
                let values: Vec<f64> = tuple.iter().map(|g| key.value(g)).collect();
                if winning_margin(&values, mode) <= policy.relative_margin {
                    continue;
                }
                let mode_name = if mode == RankMode::Min { "min" } else { "max" };
                let a = if matches!(key, RankKey::EgoDistance(_)) { anchor } else { None };
                rank_extreme(&tuple, key, mode).ok().map(|id| {
                    SpatialFact::new(FactKind::RankExtreme, ops, a, FactValue::Instance(id), None).with_detail(format!("key={} mode={mode_name}", key.name()))
                })
            }
        };
        if let Some(f) = fact {
            out.push(vec![f]);
        }
    }
    out
}

fn group_key(t: &Template) -> (Ability, Variant) {
    (t.ability, t.variant)
}

/// All template QA for one scene. Candidates are pooled per
/// (ability, variant), shuffled with a seed derived from the policy seed and
/// the scene id, and cut to the quota.
pub fn forge_scene(inputs: &ForgeInputs<'_>, registry: &TemplateRegistry, policy: &ForgePolicy) -> Vec<QaItem> {
    let scene_stream = SeedStream::new(policy.seed).child(&inputs.scene.id);
    let mut order: Vec<(Ability, Variant)> = Vec::new();
    let mut pools: BTreeMap<(Ability, Variant), Vec<(usize, usize, Vec<SpatialFact>)>> = BTreeMap::new();
    for (ti, t) in registry.templates.iter().enumerate() {
        let key = group_key(t);
        if !order.contains(&key) {
            order.push(key);
        }
        let pool = pools.entry(key).or_default();
        for (ci, facts) in candidates(t, inputs, policy).into_iter().enumerate() {
            pool.push((ti, ci, facts));
        }
    }

    let mut items = Vec::new();
    for key in order {
        let mut pool = pools.remove(&key).unwrap_or_default();
        let stream = scene_stream.child(&format!("{}/{:?}", key.0.as_str(), key.1));
        let mut rng = stream.rng();
        pool.shuffle(&mut rng);
        pool.truncate(policy.quota_per_ability);
        let picks: Vec<_> = pool
            .into_iter()
            .map(|(ti, ci, facts)| {
                let phrasing = rng.random_range(0..registry.templates[ti].phrasings.len());
                (ti, ci, phrasing, facts)
            })
            .collect::<Vec<_>>();
        let mut picks = picks;
        picks.sort_by_key(|p| (p.0, p.1));
        for (ti, _, phrasing, facts) in picks {
            let ctx = ItemContext {
                id: format!("{}:{:04}", inputs.scene.id, items.len()),
                video_id: inputs.scene.id.clone(),
                rng_seed: stream.seed(),
            };
            match instantiate(&registry.templates[ti], phrasing, &facts, inputs.refs, &ctx) {
                Ok(mut item) => {
                    item.category = item.operands.first().and_then(|id| inputs.scene.categories.get(id)).cloned();
                    items.push(item);
                }
                Err(e) => log::warn!("skipping candidate for {}: {e}", registry.templates[ti].id),
            }
        }
    }
    items
}

fn is_small_count(item: &QaItem) -> bool {
    item.ability == Ability::Counting && matches!(item.answer.numeric(), Some(v) if v == 1.0 || v == 2.0)
}

/// Halves counting items whose answer is 1 or 2: the group is shuffled with
/// the seed and every other item dropped, so ceil(n/2) survive. Other items
/// and the original order are untouched.
pub fn counting_downsample(items: Vec<QaItem>, seed: u64) -> Vec<QaItem> {
    let mut small: Vec<usize> = items.iter().enumerate().filter(|(_, it)| is_small_count(it)).map(|(i, _)| i).collect();
    small.shuffle(&mut SeedStream::new(seed).child("counting_downsample").rng());
    let dropped: BTreeSet<usize> = small.into_iter().skip(1).step_by(2).collect();
    items.into_iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, it)| it).collect()
}
