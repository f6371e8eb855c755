//! QA item schema shared by the forge, the balancer and the scorer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::facts::Unit;
use crate::fusion::InstanceId;

/// The 22 benchmark abilities: 12 object-cognition, 10 spatial-cognition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ability {
    // Object properties.
    Category,
    Color,
    Material,
    Shape,
    State,
    Position,
    Function,
    SurfaceDetail,
    Size,
    Counting,
    // Referring segmentation.
    DirectReferring,
    SituationalReferring,
    // Ego-centric.
    TrajectoryReview,
    EgocentricDirection,
    EgocentricDistance,
    MovementImagery,
    SpatialImagery,
    // World-centric.
    ObjectSize,
    ObjectHeight,
    ObjectDistance,
    AbsolutePosition,
    RelativePosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CognitionCategory {
    Object,
    Spatial,
}

impl Ability {
    pub const ALL: [Ability; 22] = [
        Ability::Category,
        Ability::Color,
        Ability::Material,
        Ability::Shape,
        Ability::State,
        Ability::Position,
        Ability::Function,
        Ability::SurfaceDetail,
        Ability::Size,
        Ability::Counting,
        Ability::DirectReferring,
        Ability::SituationalReferring,
        Ability::TrajectoryReview,
        Ability::EgocentricDirection,
        Ability::EgocentricDistance,
        Ability::MovementImagery,
        Ability::SpatialImagery,
        Ability::ObjectSize,
        Ability::ObjectHeight,
        Ability::ObjectDistance,
        Ability::AbsolutePosition,
        Ability::RelativePosition,
    ];

    pub fn category(&self) -> CognitionCategory {
        if (*self as usize) < Ability::TrajectoryReview as usize {
            CognitionCategory::Object
        } else {
            CognitionCategory::Spatial
        }
    }

    /// Column group of the results table this ability reports under.
    pub fn group(&self) -> &'static str {
        use Ability::*;
        match self {
            Category | Color | Material | Shape | State | Position | Function | SurfaceDetail | Size | Counting => "object_properties",
            DirectReferring => "direct_referring",
            SituationalReferring => "situational_referring",
            TrajectoryReview => "ego_history",
            EgocentricDirection | EgocentricDistance => "ego_present",
            MovementImagery | SpatialImagery => "ego_future",
            ObjectSize | ObjectHeight => "world_size",
            ObjectDistance => "world_distance",
            AbsolutePosition | RelativePosition => "world_position",
        }
    }

    pub fn as_str(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

impl FromStr for Ability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown ability {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    NumericScale,
    NumericAngle,
    ClosedText,
    OpenText,
    Segmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Quantitative,
    Qualitative,
}

/// Canonical ground-truth answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Numeric { value: f64, unit: Unit },
    Count(u32),
    Label(String),
    Text(String),
    /// Ground truth lives in the item's `masks_ref`.
    Masks,
}

impl Answer {
    pub fn numeric(&self) -> Option<f64> {
        match self {
            Answer::Numeric { value, .. } => Some(*value),
            Answer::Count(n) => Some(f64::from(*n)),
            Answer::Label(s) | Answer::Text(s) => s.trim().parse().ok(),
            Answer::Masks => None,
        }
    }

    pub fn text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Numeric { value, unit: Unit::Meters } => write!(f, "{value:.2} m"),
            Answer::Numeric { value, unit: Unit::Degrees } => write!(f, "{value:.0} degrees"),
            Answer::Count(n) => write!(f, "{n}"),
            Answer::Label(s) | Answer::Text(s) => f.write_str(s),
            Answer::Masks => f.write_str("<masks>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub template_id: String,
    pub phrasing_index: usize,
    pub fact_ids: Vec<String>,
    pub rng_seed: u64,
    pub variant: Variant,
    /// Interpretation notes, e.g. which height notion a comparison used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub video_id: String,
    pub question: String,
    pub answer: Answer,
    pub answer_kind: AnswerKind,
    pub ability: Ability,
    pub operands: Vec<InstanceId>,
    #[serde(default)]
    pub masks_ref: Option<String>,
    pub provenance: Provenance,
    /// Fine object class of the primary operand, used for balancing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Leftover template placeholders: `[A]`/`[B]`/`[C]` slots or `<Object N>` tags.
pub fn has_unresolved_placeholder(text: &str) -> bool {
    if ["[A]", "[B]", "[C]", "<Object X>"].iter().any(|p| text.contains(p)) {
        return true;
    }
    let mut rest = text;
    while let Some(i) = rest.find("<Object ") {
        let tail = &rest[i + "<Object ".len()..];
        if let Some(end) = tail.find('>') {
            if end > 0 && tail[..end].chars().all(|c| c.is_ascii_alphanumeric()) {
                return true;
            }
        }
        rest = &rest[i + 1..];
    }
    false
}
