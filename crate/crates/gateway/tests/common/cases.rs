// Fixed prompt inputs shared by the golden tests and the acceptance suite.
#![allow(dead_code)]
use egoqa_gateway::{PromptInputs, PromptKind};

pub const MODEL: &str = "test-model";

fn paths(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i:02}.jpg")).collect()
}

pub fn golden_cases() -> Vec<(&'static str, PromptKind, PromptInputs)> {
    let base = PromptInputs {
        model: MODEL.to_string(),
        ..PromptInputs::default()
    };
    let frames = paths("frames/scene0001", 16);
    let (odd, _) = egoqa_gateway::split_frame_groups(&frames);
    let cue = PromptInputs {
        crops: paths("cues/obj07_crop", 4),
        highlights: paths("cues/obj07_box", 4),
        ..base.clone()
    };
    let judge = PromptInputs {
        question: Some("What is the person holding the mug likely to do next?".into()),
        reference: Some("Pour coffee into the mug.".into()),
        prediction: Some("Fill the mug with coffee.".into()),
        ..base.clone()
    };
    vec![
        ("object_list", PromptKind::ObjectList, PromptInputs { frames: odd, ..base.clone() }),
        ("caption", PromptKind::Caption, cue.clone()),
        ("comprehension_qa", PromptKind::ComprehensionQa, cue),
        (
            "referring_expr",
            PromptKind::ReferringExpr,
            PromptInputs {
                qa_pairs: vec![
                    ("What color is the <object>?".into(), "It is red.".into()),
                    ("What is the <object> used for?".into(), "Drinking hot beverages.".into()),
                ],
                ..base.clone()
            },
        ),
        (
            "judge_binary",
            PromptKind::JudgeBinary,
            PromptInputs {
                question: Some("Is the sofa to the left of the lamp?".into()),
                reference: Some("Yes".into()),
                prediction: Some("yes, it is".into()),
                ..base.clone()
            },
        ),
        ("judge_open", PromptKind::JudgeOpen, judge.clone()),
        ("judge_open_reask", PromptKind::JudgeOpen, PromptInputs { attempt: 1, ..judge }),
    ]
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}
