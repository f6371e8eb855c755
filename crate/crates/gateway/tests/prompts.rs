use egoqa_core::forge::{CueFrame, CueFrameSet, RenderMode};
use egoqa_gateway::{build_prompt, caption_inputs, split_frame_groups, GatewayError, Part, PromptInputs, PromptKind, Role};

fn base() -> PromptInputs {
    PromptInputs {
        model: "m".into(),
        ..PromptInputs::default()
    }
}

fn cue_set() -> CueFrameSet {
    CueFrameSet {
        instance_id: 7,
        frames: (0..8u64)
            .map(|i| CueFrame {
                frame: i * 10,
                mode: if i < 4 { RenderMode::Crop } else { RenderMode::Highlight },
                score: 0.5,
            })
            .collect(),
    }
}

#[test]
fn caption_has_eleven_parts_in_order() {
    let (crops, highlights) = caption_inputs(&cue_set(), |f, m| format!("{m:?}_{f}.jpg"));
    assert_eq!(crops, ["Crop_0.jpg", "Crop_10.jpg", "Crop_20.jpg", "Crop_30.jpg"]);
    assert_eq!(highlights[0], "Highlight_40.jpg");
    for kind in [PromptKind::Caption, PromptKind::ComprehensionQa] {
        let req = build_prompt(kind, &PromptInputs { crops: crops.clone(), highlights: highlights.clone(), ..base() }).unwrap();
        assert_eq!(req.messages.len(), 1);
        let parts = &req.messages[0].content;
        assert_eq!(parts.len(), 11);
        let shape: String = parts.iter().map(|p| if matches!(p, Part::Text { .. }) { 'T' } else { 'I' }).collect();
        assert_eq!(shape, "TIIIITIIIIT");
        let images: Vec<&str> = req.image_refs().collect();
        assert_eq!(images[..4], crops.iter().map(String::as_str).collect::<Vec<_>>()[..]);
        assert_eq!(images[4..], highlights.iter().map(String::as_str).collect::<Vec<_>>()[..]);
    }
}

#[test]
fn object_list_needs_eight_frames() {
    let frames: Vec<String> = (0..16).map(|i| format!("f{i}.jpg")).collect();
    let (odd, even) = split_frame_groups(&frames);
    assert_eq!(odd[1], "f2.jpg");
    assert_eq!(even[0], "f1.jpg");
    let req = build_prompt(PromptKind::ObjectList, &PromptInputs { frames: odd.clone(), ..base() }).unwrap();
    assert_eq!(req.messages[0].role, Role::System);
    assert_eq!(req.image_refs().count(), 8);
    let err = build_prompt(PromptKind::ObjectList, &PromptInputs { frames: odd[..7].to_vec(), ..base() }).unwrap_err();
    assert!(matches!(err, GatewayError::MissingInput { kind: PromptKind::ObjectList, .. }));
}

#[test]
fn caption_missing_images_rejected() {
    let err = build_prompt(PromptKind::Caption, &PromptInputs { crops: vec!["a.jpg".into(); 4], ..base() }).unwrap_err();
    assert!(matches!(err, GatewayError::MissingInput { .. }));
}

#[test]
fn judge_is_single_text_message() {
    let inputs = PromptInputs {
        question: Some("q?".into()),
        reference: Some("ref".into()),
        prediction: Some("pred".into()),
        ..base()
    };
    let req = build_prompt(PromptKind::JudgeOpen, &inputs).unwrap();
    assert_eq!(req.messages.len(), 1);
    assert_eq!(req.part_count(), 1);
    let Part::Text { text } = &req.messages[0].content[0] else { panic!() };
    assert!(text.contains("Question: q?") && text.contains("Reference answer: ref") && text.contains("Model answer: pred"));
    assert!(!text.contains('{'));
    let reask = build_prompt(PromptKind::JudgeBinary, &PromptInputs { attempt: 1, ..inputs.clone() }).unwrap();
    assert_eq!(reask.part_count(), 2);
    let missing = build_prompt(PromptKind::JudgeBinary, &PromptInputs { prediction: None, ..inputs }).unwrap_err();
    assert!(matches!(missing, GatewayError::MissingInput { .. }));
}

#[test]
fn referring_requires_pairs() {
    assert!(build_prompt(PromptKind::ReferringExpr, &base()).is_err());
    assert!(build_prompt(PromptKind::ObjectList, &PromptInputs { model: String::new(), ..base() }).is_err());
}

#[test]
fn validate_checks_images_exist() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<String> = (0..8).map(|i| format!("f{i}.jpg")).collect();
    let req = build_prompt(PromptKind::ObjectList, &PromptInputs { frames: frames.clone(), ..base() }).unwrap();
    assert!(req.validate(dir.path()).is_err());
    for f in &frames {
        std::fs::write(dir.path().join(f), b"x").unwrap();
    }
    assert!(req.validate(dir.path()).is_ok());
}
