use serde::{Deserialize, Serialize};

use egoqa_core::forge::{CueFrameSet, RenderMode};
use egoqa_core::metrics::JudgeMode;

use crate::request::{ChatRequest, Message, Part, Role};
use crate::GatewayError;

const OBJECT_LIST_SYSTEM: &str = include_str!("../prompts/object_list_system.txt");
const CROP_IMAGE: &str = include_str!("../prompts/crop_image.txt");
const BBOX_IMAGE: &str = include_str!("../prompts/bbox_image.txt");
const CAPTION_TASK: &str = include_str!("../prompts/caption_task.txt");
const COMPREHENSION_TASK: &str = include_str!("../prompts/comprehension_task.txt");
const REFERRING_SYSTEM: &str = include_str!("../prompts/referring_system.txt");
const JUDGE_BINARY: &str = include_str!("../prompts/judge_binary.txt");
const JUDGE_OPEN: &str = include_str!("../prompts/judge_open.txt");
const JUDGE_REASK: &str = include_str!("../prompts/judge_reask.txt");

/// Frames per object-list request; a 16-frame sample is split in two groups.
pub const OBJECT_LIST_FRAMES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ObjectList,
    Caption,
    ComprehensionQa,
    ReferringExpr,
    JudgeBinary,
    JudgeOpen,
}

impl PromptKind {
    pub fn for_judge(mode: JudgeMode) -> Self {
        match mode {
            JudgeMode::Binary => PromptKind::JudgeBinary,
            JudgeMode::Graded => PromptKind::JudgeOpen,
        }
    }
}

/// Inputs for every prompt kind; each kind reads only the fields it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptInputs {
    pub model: String,
    /// Sampled frames for object-list extraction.
    pub frames: Vec<String>,
    pub crops: Vec<String>,
    pub highlights: Vec<String>,
    /// (question, answer) pairs about one object.
    pub qa_pairs: Vec<(String, String)>,
    pub question: Option<String>,
    pub reference: Option<String>,
    pub prediction: Option<String>,
    /// Non-zero for the re-ask after an off-grid judge reply.
    pub attempt: u32,
}

/// Splits an evenly sampled frame list into odd-numbered (1st, 3rd, ...) and
/// even-numbered frames.
pub fn split_frame_groups<T: Clone>(frames: &[T]) -> (Vec<T>, Vec<T>) {
    let odd = frames.iter().step_by(2).cloned().collect();
    let even = frames.iter().skip(1).step_by(2).cloned().collect();
    (odd, even)
}

/// Crop and highlight image paths for a cue-frame set; `path` names the
/// rendered image of one frame in one mode.
pub fn caption_inputs(set: &CueFrameSet, path: impl Fn(u64, RenderMode) -> String) -> (Vec<String>, Vec<String>) {
    let pick = |mode| set.frames.iter().filter(|f| f.mode == mode).map(|f| path(f.frame, mode)).collect();
    (pick(RenderMode::Crop), pick(RenderMode::Highlight))
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in pairs {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

pub fn build_prompt(kind: PromptKind, inputs: &PromptInputs) -> Result<ChatRequest, GatewayError> {
    let missing = |what: &str| GatewayError::MissingInput { kind, what: what.to_string() };
    let exactly = |v: &[String], n: usize, what: &str| {
        if v.len() == n {
            Ok(())
        } else {
            Err(missing(&format!("{n} {what}, got {}", v.len())))
        }
    };
    if inputs.model.is_empty() {
        return Err(missing("model name"));
    }
    let user = |content: Vec<Part>| Message { role: Role::User, content };
    let system = |text: &str| Message {
        role: Role::System,
        content: vec![Part::text(text)],
    };
    let (messages, max_tokens) = match kind {
        PromptKind::ObjectList => {
            exactly(&inputs.frames, OBJECT_LIST_FRAMES, "frames")?;
            (vec![system(OBJECT_LIST_SYSTEM), user(inputs.frames.iter().map(Part::image).collect())], 512)
        }
        PromptKind::Caption | PromptKind::ComprehensionQa => {
            exactly(&inputs.crops, 4, "crop images")?;
            exactly(&inputs.highlights, 4, "highlight images")?;
            let task = if kind == PromptKind::Caption { CAPTION_TASK } else { COMPREHENSION_TASK };
            let mut parts = vec![Part::text(CROP_IMAGE)];
            parts.extend(inputs.crops.iter().map(Part::image));
            parts.push(Part::text(BBOX_IMAGE));
            parts.extend(inputs.highlights.iter().map(Part::image));
            parts.push(Part::text(task));
            (vec![user(parts)], 1024)
        }
        PromptKind::ReferringExpr => {
            if inputs.qa_pairs.is_empty() {
                return Err(missing("qa pairs"));
            }
            let body: Vec<String> = inputs.qa_pairs.iter().map(|(q, a)| format!("Question: {q}\nAnswer: {a}")).collect();
            (vec![system(REFERRING_SYSTEM), user(vec![Part::text(body.join("\n\n"))])], 256)
        }
        PromptKind::JudgeBinary | PromptKind::JudgeOpen => {
            let q = inputs.question.as_deref().ok_or_else(|| missing("question"))?;
            let r = inputs.reference.as_deref().ok_or_else(|| missing("reference answer"))?;
            let p = inputs.prediction.as_deref().ok_or_else(|| missing("model answer"))?;
            let (template, grid) = if kind == PromptKind::JudgeBinary {
                (JUDGE_BINARY, "0, 1")
            } else {
                (JUDGE_OPEN, "0, 0.2, 0.4, 0.6, 0.8, 1")
            };
            let mut parts = vec![Part::text(fill(template, &[("question", q), ("reference", r), ("prediction", p)]))];
            if inputs.attempt > 0 {
                parts.push(Part::text(fill(JUDGE_REASK, &[("grid", grid)])));
            }
            (vec![user(parts)], 8)
        }
    };
    Ok(ChatRequest {
        model: inputs.model.clone(),
        messages,
        temperature: 0.0,
        max_tokens,
    })
}
