use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::qa::{Ability, AnswerKind, Variant};

pub const SLOT_NAMES: [&str; 3] = ["[A]", "[B]", "[C]"];

/// Built-in registry shipped with the crate.
pub const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.toml");

/// Which fact computation answers a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    TrajectoryLength,
    EgoDistance,
    EgoDirectionCw,
    EgoSector,
    PostTurnLeft,
    PostTurnRight,
    CloserOfTwo,
    ClosestOfThree,
    TallestOfThree,
    CenterDistance,
    ElevationDiff,
    AbovePredicate,
    HeightExtent,
    LongestDimension,
}

impl Generator {
    pub fn slots(&self) -> usize {
        use Generator::*;
        match self {
            TrajectoryLength => 0,
            EgoDistance | EgoDirectionCw | EgoSector | PostTurnLeft | PostTurnRight | HeightExtent | LongestDimension => 1,
            CloserOfTwo | CenterDistance | ElevationDiff | AbovePredicate => 2,
            ClosestOfThree | TallestOfThree => 3,
        }
    }

    pub fn is_comparative(&self) -> bool {
        matches!(self, Generator::CloserOfTwo | Generator::ClosestOfThree | Generator::TallestOfThree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub ability: Ability,
    pub answer_kind: AnswerKind,
    pub variant: Variant,
    pub generator: Generator,
    pub slots: usize,
    pub phrasings: Vec<String>,
}

impl Template {
    pub fn validate(&self) -> Result<(), ForgeError> {
        let bad = |reason: String| ForgeError::InvalidTemplate { id: self.id.clone(), reason };
        if self.phrasings.len() < 3 {
            return Err(bad(format!("{} phrasings, need at least 3", self.phrasings.len())));
        }
        if self.slots != self.generator.slots() {
            return Err(bad(format!("generator {:?} fills {} slots, template declares {}", self.generator, self.generator.slots(), self.slots)));
        }
        for (i, p) in self.phrasings.iter().enumerate() {
            for (k, slot) in SLOT_NAMES.iter().enumerate() {
                let present = p.contains(slot);
                if present != (k < self.slots) {
                    return Err(bad(format!("phrasing {i} {} {slot}", if present { "has unexpected" } else { "lacks" })));
                }
            }
        }
        Ok(())
    }

    /// Fills slots with referring strings, in operand order.
    pub fn render(&self, phrasing_index: usize, refs: &[&str]) -> Option<String> {
        let mut q = self.phrasings.get(phrasing_index)?.clone();
        for (slot, r) in SLOT_NAMES.iter().zip(refs) {
            q = q.replace(slot, r);
        }
        Some(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    #[serde(rename = "template")]
    pub templates: Vec<Template>,
}

impl TemplateRegistry {
    pub fn parse(text: &str) -> Result<Self, ForgeError> {
        let reg: TemplateRegistry = toml::from_str(text).map_err(|e| ForgeError::Registry(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &reg.templates {
            t.validate()?;
            if !seen.insert(t.id.as_str()) {
                return Err(ForgeError::Registry(format!("duplicate template id {:?}", t.id)));
            }
        }
        Ok(reg)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("built-in template registry is valid")
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}
