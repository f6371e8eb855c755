use super::*;
use crate::fusion::mask_iou;
use crate::qa::{Ability, Answer, AnswerKind, Provenance, QaItem, Variant};
use crate::facts::Unit;
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::Mutex;

#[test]
fn mra_examples() {
    assert_eq!(mra(1.0, 1.0).unwrap(), 1.0);
    assert_eq!(mra(1.2, 1.0).unwrap(), 0.6);
    assert_eq!(mra(2.0, 1.0).unwrap(), 0.0);
    assert_eq!(mra(0.0, 1.0).unwrap(), 0.0);
    assert_eq!(mra(1.0, 0.0), Err(MetricError::NonPositiveGroundTruth(0.0)));
    assert!(mra(1.0, -2.0).is_err());
}

fn oracle_mra(pred: f64, gt: f64) -> f64 {
    let mut hits = 0;
    for k in 0..10 {
        let theta = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95][k];
        if (pred - gt).abs() / gt < 1.0 - theta {
            hits += 1;
        }
    }
    hits as f64 / 10.0
}

#[test]
fn mra_matches_enumeration() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let gt: f64 = rng.random_range(0.01..20.0);
        let pred: f64 = rng.random_range(0.0..40.0);
        assert_eq!(mra(pred, gt).unwrap(), oracle_mra(pred, gt));
    }
}

#[test]
fn roa_examples() {
    assert_eq!(roa(42.0, 42.0), 1.0);
    assert!((roa(350.0, 10.0) - (1.0 - 20.0 / 90.0)).abs() < 1e-12);
    assert_eq!(roa(0.0, 90.0), 0.0);
    assert_eq!(roa(0.0, 180.0), 0.0);
    assert!((roa(-10.0, 20.0) - roa(350.0, 20.0)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn roa_properties(a in -720.0f64..720.0, b in -720.0f64..720.0, k in -3i32..3) {
        let r = roa(a, b);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((r - roa(b, a)).abs() < 1e-9);
        prop_assert!((r - roa(a + 360.0 * f64::from(k), b)).abs() < 1e-9);
    }

    #[test]
    fn global_j_monotone_in_false_positives(seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (12, 10);
        let frames: Vec<(Rle, Rle)> = (0..3).map(|_| {
            let g = Rle::from_fn(h, w, |_, _| rng.random_bool(0.3));
            let p = Rle::from_fn(h, w, |_, _| rng.random_bool(0.3));
            (p, g)
        }).collect();
        let base = global_j(&frames).unwrap();
        // Add a pixel that is background in the ground truth.
        let mut more = frames.clone();
        let gt_px = more[1].1.decode();
        if let Some(idx) = gt_px.iter().position(|&b| !b) {
            let mut px = more[1].0.decode();
            px[idx] = true;
            more[1].0 = Rle::encode(h, w, &px).unwrap();
            prop_assert!(global_j(&more).unwrap() <= base + 1e-12);
        }
        let single = &frames[..1];
        let iou = mask_iou(&single[0].0, &single[0].1).unwrap();
        let gj = global_j(single).unwrap();
        if single[0].0.union_area(&single[0].1).unwrap() > 0 {
            prop_assert!((gj - iou).abs() < 1e-12);
        }
    }
}

#[test]
fn global_j_examples() {
    let (h, w) = (20, 20);
    let g1 = Rle::rect(h, w, 0, 0, 10, 10);
    let s2 = Rle::rect(h, w, 0, 0, 5, 10);
    let frames = vec![(g1.clone(), g1.clone()), (s2, Rle::empty(h, w))];
    assert!((global_j(&frames).unwrap() - 100.0 / 150.0).abs() < 1e-12);
    assert_eq!(global_j(&[(g1.clone(), g1.clone())]).unwrap(), 1.0);
    assert_eq!(global_j(&[(Rle::empty(h, w), g1.clone())]).unwrap(), 0.0);
    assert_eq!(global_j(&[(Rle::empty(h, w), Rle::empty(h, w))]).unwrap(), 1.0);
    assert!(matches!(global_j(&[(Rle::empty(3, 3), g1)]), Err(MetricError::SizeMismatch { frame: 0 })));
    assert_eq!(global_j(&[]), Err(MetricError::NoFrames));
}

#[test]
fn boundary_f_examples() {
    let g = Rle::rect(1000, 1000, 300, 300, 700, 700);
    assert_eq!(boundary_f(&[(g.clone(), g.clone())]).unwrap(), 1.0);
    let shifted = Rle::rect(1000, 1000, 301, 300, 701, 700);
    assert_eq!(boundary_f(&[(shifted, g.clone())]).unwrap(), 1.0);
    let far = Rle::rect(1000, 1000, 0, 0, 100, 100);
    assert_eq!(boundary_f(&[(far, g.clone())]).unwrap(), 0.0);
    // Empty-gt frames do not count.
    let frames = vec![(g.clone(), g.clone()), (g.clone(), Rle::empty(1000, 1000))];
    assert_eq!(boundary_f(&frames).unwrap(), 1.0);
    assert_eq!(boundary_f(&[(g, Rle::empty(1000, 1000))]), Err(MetricError::NoForegroundFrames));
}

#[test]
fn jf_examples() {
    let g = Rle::rect(40, 40, 10, 10, 30, 30);
    let s = jf_mean(&[(g.clone(), g.clone())]).unwrap();
    assert_eq!((s.j, s.f, s.mean), (1.0, 1.0, 1.0));
    let far = Rle::rect(40, 40, 0, 0, 3, 3);
    let z = jf_mean(&[(far, Rle::rect(40, 40, 30, 30, 40, 40))]).unwrap();
    assert_eq!(z.mean, 0.0);
    assert!(((0.6667 + 0.9) / 2.0 - 0.78335f64).abs() < 1e-9);
}

#[test]
fn frame_sampling() {
    // 45 s at 30 fps with ten target frames off the grid.
    let targets: Vec<u64> = (0..10).map(|i| 15 + 120 * i).collect();
    let s = sample_frames(45 * 30, 30.0, &targets).unwrap();
    assert_eq!(s.frames.len(), 30);
    assert!(!s.targets_truncated);
    assert!(targets.iter().all(|t| s.frames.contains(t)));
    assert!(s.frames.windows(2).all(|w| w[0] < w[1]));

    let short = sample_frames(20 * 30, 30.0, &[]).unwrap();
    assert_eq!(short.frames, (0..20).map(|k| k * 30).collect::<Vec<u64>>());

    let many: Vec<u64> = (0..35).map(|i| i * 7 + 1).collect();
    let thin = sample_frames(60 * 30, 30.0, &many).unwrap();
    assert_eq!(thin.frames.len(), 30);
    assert!(thin.targets_truncated);
    assert!(thin.frames.iter().all(|f| many.contains(f)));

    assert!(matches!(sample_frames(10, 30.0, &[10]), Err(MetricError::TargetOutOfRange { .. })));
    assert!(sample_frames(10, 0.0, &[]).is_err());
}

fn item(kind: AnswerKind, answer: Answer, ability: Ability) -> QaItem {
    QaItem {
        id: "q1".into(),
        video_id: "v".into(),
        question: "Q?".into(),
        answer,
        answer_kind: kind,
        ability,
        operands: vec![],
        masks_ref: None,
        provenance: Provenance {
            template_id: "t".into(),
            phrasing_index: 0,
            fact_ids: vec![],
            rng_seed: 0,
            variant: Variant::Quantitative,
            note: None,
        },
        category: None,
    }
}

struct FixedJudge(Mutex<Vec<Result<f64, JudgeError>>>);

impl Judge for FixedJudge {
    fn judge(&self, _: &JudgeRequest) -> Result<f64, JudgeError> {
        self.0.lock().unwrap().remove(0)
    }
}

fn pred(p: Payload) -> Prediction {
    Prediction { qa_id: "q1".into(), payload: p }
}

#[test]
fn dispatch() {
    let masks = MaskTable::default();
    let scale = item(AnswerKind::NumericScale, Answer::Numeric { value: 1.5, unit: Unit::Meters }, Ability::ObjectSize);
    assert_eq!(score_item(&scale, &pred(Payload::Numeric { value: 1.5 }), None, &masks).unwrap().0, 1.0);
    let angle = item(AnswerKind::NumericAngle, Answer::Numeric { value: 10.0, unit: Unit::Degrees }, Ability::MovementImagery);
    let (s, _) = score_item(&angle, &pred(Payload::Numeric { value: 350.0 }), None, &masks).unwrap();
    assert!((s - 0.7778).abs() < 1e-4);
    assert!(matches!(score_item(&angle, &pred(Payload::Text { text: "x".into() }), None, &masks), Err(ScoreError::KindMismatch { .. })));

    let open = item(AnswerKind::OpenText, Answer::Text("a red mug".into()), Ability::Color);
    let j = FixedJudge(Mutex::new(vec![Ok(0.6)]));
    assert_eq!(score_item(&open, &pred(Payload::Text { text: "red".into() }), Some(&j), &masks).unwrap().0, 0.6);
    assert!(matches!(
        score_item(&open, &pred(Payload::Text { text: "red".into() }), None, &masks),
        Err(ScoreError::JudgeUnavailable { .. })
    ));
}

#[test]
fn judge_reask_then_snap() {
    let masks = MaskTable::default();
    let open = item(AnswerKind::OpenText, Answer::Text("a red mug".into()), Ability::Color);
    let p = pred(Payload::Text { text: "red".into() });
    let j = FixedJudge(Mutex::new(vec![Ok(0.55), Ok(0.8)]));
    let (s, d) = score_item(&open, &p, Some(&j), &masks).unwrap();
    assert_eq!((s, d.re_asked, d.snapped), (0.8, true, false));
    let j = FixedJudge(Mutex::new(vec![Ok(0.55), Ok(0.67)]));
    let (s, d) = score_item(&open, &p, Some(&j), &masks).unwrap();
    assert_eq!((s, d.snapped), (0.6, true));
    let j = FixedJudge(Mutex::new(vec![Err(JudgeError::Malformed("?".into())), Err(JudgeError::Malformed("?".into()))]));
    assert!(matches!(score_item(&open, &p, Some(&j), &masks), Err(ScoreError::JudgeUnavailable { .. })));
    let closed = item(AnswerKind::ClosedText, Answer::Label("left".into()), Ability::EgocentricDirection);
    let j = FixedJudge(Mutex::new(vec![Ok(0.7), Ok(0.7)]));
    assert_eq!(score_item(&closed, &p, Some(&j), &masks).unwrap().0, 1.0);
    assert_eq!(JudgeMode::Graded.snap(0.5), 0.4);
}

#[test]
fn segmentation_dispatch() {
    let g = Rle::rect(20, 20, 5, 5, 15, 15);
    let mut store = MaskTable::default();
    store.0.insert("gt".into(), BTreeMap::from([(0, g.clone()), (1, g.clone())]));
    store.0.insert("pred".into(), BTreeMap::from([(0, g.clone()), (2, Rle::rect(20, 20, 0, 0, 5, 5))]));
    let mut seg = item(AnswerKind::Segmentation, Answer::Masks, Ability::DirectReferring);
    seg.masks_ref = Some("gt".into());
    let (s, d) = score_item(&seg, &pred(Payload::Masks { masks_ref: "pred".into() }), None, &store).unwrap();
    let j = 100.0 / 225.0;
    assert!((d.j.unwrap() - j).abs() < 1e-12);
    assert!((d.f.unwrap() - 0.5).abs() < 1e-12);
    assert!((s - (j + 0.5) / 2.0).abs() < 1e-12);
}

fn scored(ability: Ability, s: Option<f64>) -> ItemScore {
    ItemScore {
        qa_id: "x".into(),
        ability,
        answer_kind: AnswerKind::NumericScale,
        score: s,
        detail: ScoreDetail::default(),
        error: None,
    }
}

#[test]
fn aggregation() {
    let r = aggregate(vec![scored(Ability::ObjectSize, Some(0.4)), scored(Ability::ObjectHeight, Some(0.8)), scored(Ability::ObjectHeight, Some(0.8))]);
    assert!((r.spatial_cognition.mean.unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(r.object_cognition.mean, None);
    assert!((r.overall.unwrap() - 0.6).abs() < 1e-12);
    assert!((r.overall_item_weighted.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(r.empty_abilities.len(), 20);
    assert!((r.per_group["world_size"].mean.unwrap() - 0.6).abs() < 1e-12);

    let ones = aggregate(Ability::ALL.iter().map(|a| scored(*a, Some(1.0))).chain([scored(Ability::Color, None)]).collect());
    assert_eq!(ones.overall, Some(1.0));
    assert_eq!(ones.object_cognition.mean, Some(1.0));
    assert_eq!(ones.unscored, 1);
    assert!(ones.empty_abilities.is_empty());
}

#[test]
fn prediction_jsonl_shape() {
    let p: Prediction = serde_json::from_str(r#"{"qa_id":"a","kind":"numeric","value":1.5}"#).unwrap();
    assert_eq!(p.payload, Payload::Numeric { value: 1.5 });
    let t: Prediction = serde_json::from_str(r#"{"qa_id":"a","kind":"text","text":"left"}"#).unwrap();
    assert_eq!(t.payload, Payload::Text { text: "left".into() });
    let m = serde_json::to_string(&pred(Payload::Masks { masks_ref: "m/1".into() })).unwrap();
    assert_eq!(m, r#"{"qa_id":"q1","kind":"masks","masks_ref":"m/1"}"#);
}
