use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{jf_mean, mra, roa, MetricError};
use crate::fusion::Rle;
use crate::qa::{Ability, AnswerKind, CognitionCategory, QaItem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Numeric { value: f64 },
    Text { text: String },
    Masks { masks_ref: String },
}

impl Payload {
    fn name(&self) -> &'static str {
        match self {
            Payload::Numeric { .. } => "numeric",
            Payload::Text { .. } => "text",
            Payload::Masks { .. } => "masks",
        }
    }
}

/// Predictions JSONL record: `{"qa_id": .., "kind": .., "value"|"text"|"masks_ref": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: String,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMode {
    /// Closed answers: 0 or 1.
    Binary,
    /// Open answers: 0, 0.2, …, 1.
    Graded,
}

impl JudgeMode {
    pub fn grid(&self) -> &'static [f64] {
        match self {
            JudgeMode::Binary => &[0.0, 1.0],
            JudgeMode::Graded => &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    pub fn on_grid(&self, v: f64) -> bool {
        self.grid().iter().any(|g| (g - v).abs() < 1e-9)
    }

    /// Nearest grid value; the lower one on an exact midpoint.
    pub fn snap(&self, v: f64) -> f64 {
        let mut best = self.grid()[0];
        for &g in self.grid() {
            if (g - v).abs() < (best - v).abs() - 1e-12 {
                best = g;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub qa_id: String,
    pub question: String,
    pub reference: String,
    pub prediction: String,
    pub mode: JudgeMode,
    /// 0 for the first ask, 1 for the re-ask after an off-grid score.
    pub attempt: u32,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
    #[error("judge reply not understood: {0}")]
    Malformed(String),
}

/// Scores a free-text answer against the reference.
pub trait Judge: Send + Sync {
    fn judge(&self, request: &JudgeRequest) -> Result<f64, JudgeError>;
}

/// Resolves `masks_ref` strings to per-frame masks.
pub trait MaskSource: Send + Sync {
    fn load(&self, masks_ref: &str) -> Result<BTreeMap<u64, Rle>, String>;
}

/// In-memory mask store keyed by reference.
#[derive(Debug, Clone, Default)]
pub struct MaskTable(pub BTreeMap<String, BTreeMap<u64, Rle>>);

impl MaskSource for MaskTable {
    fn load(&self, masks_ref: &str) -> Result<BTreeMap<u64, Rle>, String> {
        self.0.get(masks_ref).cloned().ok_or_else(|| format!("unknown masks_ref {masks_ref:?}"))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("item {qa_id} expects a {expected:?} answer, prediction is {got}")]
    KindMismatch { qa_id: String, expected: AnswerKind, got: &'static str },
    #[error("item {qa_id}: {source}")]
    Metric { qa_id: String, source: MetricError },
    #[error("item {qa_id}: {reason}")]
    JudgeUnavailable { qa_id: String, reason: String },
    #[error("item {qa_id}: {reason}")]
    Masks { qa_id: String, reason: String },
    #[error("item {qa_id}: ground truth has no numeric value")]
    BadGroundTruth { qa_id: String },
    #[error("item {qa_id}: no prediction")]
    MissingPrediction { qa_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreDetail {
    pub re_asked: bool,
    pub snapped: bool,
    /// Segmentation only: both tracks were empty in every frame.
    pub all_empty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
}

fn judged(item: &QaItem, text: &str, mode: JudgeMode, judge: &dyn Judge) -> Result<(f64, ScoreDetail), ScoreError> {
    let mut req = JudgeRequest {
        qa_id: item.id.clone(),
        question: item.question.clone(),
        reference: item.answer.text(),
        prediction: text.to_string(),
        mode,
        attempt: 0,
    };
    let unavailable = |e: JudgeError| ScoreError::JudgeUnavailable {
        qa_id: item.id.clone(),
        reason: e.to_string(),
    };
    let mut detail = ScoreDetail::default();
    let first = match judge.judge(&req) {
        Ok(v) if mode.on_grid(v) => return Ok((mode.snap(v), detail)),
        Ok(v) => Ok(v),
        Err(JudgeError::Malformed(m)) => Err(JudgeError::Malformed(m)),
        Err(e) => return Err(unavailable(e)),
    };
    detail.re_asked = true;
    req.attempt = 1;
    let v = match (judge.judge(&req), first) {
        (Ok(v), _) => v,
        (Err(JudgeError::Malformed(_)), Ok(v)) => v,
        (Err(e), _) => return Err(unavailable(e)),
    };
    if !v.is_finite() {
        return Err(unavailable(JudgeError::Malformed(format!("score {v}"))));
    }
    detail.snapped = !mode.on_grid(v);
    Ok((mode.snap(v.clamp(0.0, 1.0)), detail))
}

fn mask_pairs(item: &QaItem, pred_ref: &str, masks: &dyn MaskSource) -> Result<Vec<(Rle, Rle)>, ScoreError> {
    let err = |reason: String| ScoreError::Masks {
        qa_id: item.id.clone(),
        reason,
    };
    let gt_ref = item.masks_ref.as_deref().ok_or_else(|| err("item has no masks_ref".into()))?;
    let gt = masks.load(gt_ref).map_err(err)?;
    let pred = masks.load(pred_ref).map_err(err)?;
    let (h, w) = gt.values().chain(pred.values()).next().map(Rle::size).ok_or_else(|| err("no masks in either track".into()))?;
    let frames: BTreeSet<u64> = gt.keys().chain(pred.keys()).copied().collect();
    let empty = Rle::empty(h, w);
    Ok(frames
        .into_iter()
        .map(|f| (pred.get(&f).cloned().unwrap_or_else(|| empty.clone()), gt.get(&f).cloned().unwrap_or_else(|| empty.clone())))
        .collect())
}

/// Dispatches on the item's answer kind: relative accuracy for scale
/// answers, rotational accuracy for angles, J&F for mask tracks and the
/// judge for text.
pub fn score_item(item: &QaItem, pred: &Prediction, judge: Option<&dyn Judge>, masks: &dyn MaskSource) -> Result<(f64, ScoreDetail), ScoreError> {
    let mismatch = || ScoreError::KindMismatch {
        qa_id: item.id.clone(),
        expected: item.answer_kind,
        got: pred.payload.name(),
    };
    let metric = |source| ScoreError::Metric {
        qa_id: item.id.clone(),
        source,
    };
    let gt_value = || item.answer.numeric().ok_or(ScoreError::BadGroundTruth { qa_id: item.id.clone() });
    let no_judge = || ScoreError::JudgeUnavailable {
        qa_id: item.id.clone(),
        reason: "no judge configured".into(),
    };
    match (item.answer_kind, &pred.payload) {
        (AnswerKind::NumericScale, Payload::Numeric { value }) => Ok((mra(*value, gt_value()?).map_err(metric)?, ScoreDetail::default())),
        (AnswerKind::NumericAngle, Payload::Numeric { value }) => Ok((roa(*value, gt_value()?), ScoreDetail::default())),
        (AnswerKind::Segmentation, Payload::Masks { masks_ref }) => {
            let frames = mask_pairs(item, masks_ref, masks)?;
            let all_empty = frames.iter().all(|(p, g)| p.is_empty() && g.is_empty());
            let jf = jf_mean(&frames).map_err(metric)?;
            Ok((
                jf.mean,
                ScoreDetail {
                    all_empty,
                    j: Some(jf.j),
                    f: Some(jf.f),
                    ..Default::default()
                },
            ))
        }
        (AnswerKind::ClosedText, Payload::Text { text }) => judged(item, text, JudgeMode::Binary, judge.ok_or_else(no_judge)?),
        (AnswerKind::OpenText, Payload::Text { text }) => judged(item, text, JudgeMode::Graded, judge.ok_or_else(no_judge)?),
        _ => Err(mismatch()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub qa_id: String,
    pub ability: Ability,
    pub answer_kind: AnswerKind,
    /// `None` when the item could not be scored.
    pub score: Option<f64>,
    #[serde(default)]
    pub detail: ScoreDetail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ItemScore {
    pub fn from_result(item: &QaItem, result: Result<(f64, ScoreDetail), ScoreError>) -> Self {
        let (score, detail, error) = match result {
            Ok((s, d)) => (Some(s), d, None),
            Err(e) => (None, ScoreDetail::default(), Some(e.to_string())),
        };
        Self {
            qa_id: item.id.clone(),
            ability: item.ability,
            answer_kind: item.answer_kind,
            score,
            detail,
            error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCell {
    pub mean: Option<f64>,
    pub count: usize,
}

fn mean(values: &[f64]) -> MeanCell {
    MeanCell {
        mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
        count: values.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub items: Vec<ItemScore>,
    pub per_ability: BTreeMap<Ability, MeanCell>,
    /// Means of the ability means under each results-table column group.
    pub per_group: BTreeMap<String, MeanCell>,
    pub object_cognition: MeanCell,
    pub spatial_cognition: MeanCell,
    /// Mean of the two category means.
    pub overall: Option<f64>,
    /// Mean over all scored items.
    pub overall_item_weighted: Option<f64>,
    pub empty_abilities: Vec<Ability>,
    pub unscored: usize,
}

/// Per-ability means, then group and category means of ability means, then
/// the overall mean of the category means. Unscored items and empty
/// abilities drop out of every mean.
pub fn aggregate(items: Vec<ItemScore>) -> ScoreReport {
    let mut by_ability: BTreeMap<Ability, Vec<f64>> = BTreeMap::new();
    for it in &items {
        if let Some(s) = it.score {
            by_ability.entry(it.ability).or_default().push(s);
        }
    }
    let per_ability: BTreeMap<Ability, MeanCell> = Ability::ALL.iter().map(|a| (*a, mean(by_ability.get(a).map(Vec::as_slice).unwrap_or(&[])))).collect();
    let empty_abilities = per_ability.iter().filter(|(_, c)| c.count == 0).map(|(a, _)| *a).collect();

    let of_means = |pred: &dyn Fn(&Ability) -> bool| {
        let v: Vec<f64> = per_ability.iter().filter(|(a, _)| pred(a)).filter_map(|(_, c)| c.mean).collect();
        mean(&v)
    };
    let mut groups: Vec<&'static str> = Ability::ALL.iter().map(|a| a.group()).collect();
    groups.dedup();
    let per_group = groups.into_iter().map(|g| (g.to_string(), of_means(&|a: &Ability| a.group() == g))).collect();
    let object_cognition = of_means(&|a: &Ability| a.category() == CognitionCategory::Object);
    let spatial_cognition = of_means(&|a: &Ability| a.category() == CognitionCategory::Spatial);
    let cats: Vec<f64> = [object_cognition.mean, spatial_cognition.mean].into_iter().flatten().collect();
    let all: Vec<f64> = items.iter().filter_map(|i| i.score).collect();
    ScoreReport {
        per_ability,
        per_group,
        object_cognition,
        spatial_cognition,
        overall: mean(&cats).mean,
        overall_item_weighted: mean(&all).mean,
        empty_abilities,
        unscored: items.iter().filter(|i| i.score.is_none()).count(),
        items,
    }
}
