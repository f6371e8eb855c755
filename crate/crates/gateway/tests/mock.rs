mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;

use common::cases::MODEL;
use egoqa_core::metrics::{score_item, JudgeMode, JudgeRequest, MaskTable, Payload, Prediction};
use egoqa_core::qa::{Ability, Answer, AnswerKind, Provenance, QaItem, Variant};
use egoqa_gateway::{
    build_prompt, chat, merge_group_lists, parse_object_list, request_digest, split_frame_groups, ChatRequest, Fixture,
    LlmJudge, MockTransport, NoSleep, PromptInputs, PromptKind, RetryPolicy,
};

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/responses.jsonl")
}

fn judge_request(mode: JudgeMode, prediction: &str, attempt: u32) -> JudgeRequest {
    JudgeRequest {
        qa_id: "s:0001".into(),
        question: "What might the person do with the mug?".into(),
        reference: "Pour coffee into it.".into(),
        prediction: prediction.into(),
        mode,
        attempt,
    }
}

fn object_list_requests() -> (ChatRequest, ChatRequest) {
    let frames: Vec<String> = (0..16).map(|i| format!("frames/s_{i:02}.jpg")).collect();
    let (odd, even) = split_frame_groups(&frames);
    let build = |frames| {
        build_prompt(
            PromptKind::ObjectList,
            &PromptInputs {
                model: MODEL.into(),
                frames,
                ..PromptInputs::default()
            },
        )
        .unwrap()
    };
    (build(odd), build(even))
}

fn judge<'a>(t: &'a MockTransport) -> LlmJudge<'a> {
    LlmJudge {
        transport: t,
        model: MODEL.into(),
        policy: RetryPolicy::default(),
        sleeper: &NoSleep,
    }
}

/// Recorded exchanges; rebuilt under EGOQA_UPDATE_GOLDEN.
fn recorded() -> Vec<(ChatRequest, &'static str)> {
    let (odd, even) = object_list_requests();
    let t = MockTransport::default();
    let j = judge(&t);
    vec![
        (odd, "Chair; chair cushion; Table; wall"),
        (even, "table; lamp; cup; cup holder; floor."),
        (j.request(&judge_request(JudgeMode::Graded, "Fill it with coffee.", 0)).unwrap(), "0.6"),
        (j.request(&judge_request(JudgeMode::Graded, "Drink from it.", 0)).unwrap(), "0.7"),
        (j.request(&judge_request(JudgeMode::Graded, "Drink from it.", 1)).unwrap(), "0.8"),
        (j.request(&judge_request(JudgeMode::Binary, "Pour coffee.", 0)).unwrap(), "1"),
    ]
}

fn load() -> MockTransport {
    if std::env::var_os("EGOQA_UPDATE_GOLDEN").is_some() {
        let lines: Vec<String> = recorded()
            .into_iter()
            .map(|(req, text)| {
                serde_json::to_string(&Fixture {
                    request_digest: request_digest(&req),
                    response_text: text.into(),
                })
                .unwrap()
            })
            .collect();
        std::fs::write(fixture_path(), lines.join("\n") + "\n").unwrap();
    }
    MockTransport::from_file(&fixture_path()).unwrap()
}

#[test]
fn fixture_file_covers_recorded_requests() {
    let t = load();
    assert_eq!(t.len(), recorded().len());
    for (req, text) in recorded() {
        assert_eq!(chat(&t, &req, &RetryPolicy::default(), &NoSleep).unwrap().text, text);
    }
}

#[test]
fn object_list_from_two_groups() {
    let t = load();
    let (odd, even) = object_list_requests();
    let reply = |r| chat(&t, &r, &RetryPolicy::default(), &NoSleep).unwrap().text;
    let a = parse_object_list(&reply(odd));
    let b = parse_object_list(&reply(even));
    assert_eq!(a, ["chair", "table"]);
    assert_eq!(merge_group_lists(&a, &b), ["chair", "table", "lamp", "cup"]);
}

fn open_item() -> QaItem {
    QaItem {
        id: "s:0001".into(),
        video_id: "s".into(),
        question: "What might the person do with the mug?".into(),
        answer: Answer::Text("Pour coffee into it.".into()),
        answer_kind: AnswerKind::OpenText,
        ability: Ability::Function,
        operands: vec![3],
        masks_ref: None,
        provenance: Provenance {
            template_id: "manual".into(),
            phrasing_index: 0,
            fact_ids: vec![],
            rng_seed: 0,
            variant: Variant::Qualitative,
            note: None,
        },
        category: Some("mug".into()),
    }
}

fn text_pred(text: &str) -> Prediction {
    Prediction {
        qa_id: "s:0001".into(),
        payload: Payload::Text { text: text.into() },
    }
}

#[test]
fn open_text_scored_through_mock_judge() {
    let t = load();
    let j = judge(&t);
    let masks = MaskTable(BTreeMap::new());
    let (s, d) = score_item(&open_item(), &text_pred("Fill it with coffee."), Some(&j), &masks).unwrap();
    assert!((s - 0.6).abs() < 1e-12);
    assert!(!d.re_asked);
    let (s, d) = score_item(&open_item(), &text_pred("Drink from it."), Some(&j), &masks).unwrap();
    assert!((s - 0.8).abs() < 1e-12);
    assert!(d.re_asked);
    let err = score_item(&open_item(), &text_pred("unrecorded"), Some(&j), &masks).unwrap_err();
    assert!(err.to_string().contains("judge"), "{err}");
}
