mod common;

use proptest::prelude::*;
use spatial_vqa::baseline::predict_all;
use spatial_vqa::dataset::{
    index_scenes, load_predictions, load_records, load_scenes, sample_indices, save_predictions, save_records,
    save_scenes, Prediction, QARecord, QuestionCategory, Region, Scene,
};
use spatial_vqa::geometry::BoundingBox;
use spatial_vqa::metrics::evaluate;
use spatial_vqa::normalize::{canonicalize, extract_normalized, Direction, NormalizedAnswer, Unit};
use spatial_vqa::prompt::{append_normalized_suffix, enrich_records, PromptOptions};
use spatial_vqa::synth::{generate_dataset, GenConfig};

fn oracle_predictions(seed: u64, n: usize) -> (Vec<QARecord>, Vec<Prediction>) {
    let data = generate_dataset(
        &GenConfig {
            seed,
            ..GenConfig::default()
        },
        50,
        n,
    )
    .unwrap();
    let scenes = index_scenes(data.scenes).unwrap();
    let predictions = predict_all(&data.questions, &scenes).unwrap();
    (data.records, predictions)
}

#[test]
fn baseline_is_perfect_on_generated_data() {
    let (records, predictions) = oracle_predictions(11, 1000);
    let report = evaluate(&records, &predictions).unwrap();
    assert_eq!(report.s1, Some(100.0));
    assert_eq!(report.n_total, 1000);
    for c in QuestionCategory::ALL {
        assert_eq!(report.success_rate(c), Some(100.0), "{c}");
    }
}

#[test]
fn ten_percent_corruption_costs_ten_points() {
    let (records, mut predictions) = oracle_predictions(12, 1000);
    for p in predictions.iter_mut().step_by(10) {
        *p = Prediction::new(p.record_id.clone(), "no comment");
    }
    let report = evaluate(&records, &predictions).unwrap();
    assert_eq!(report.s1, Some(90.0));
    assert_eq!(report.n_flagged, 100);
}

#[test]
fn enrichment_changes_prompts_not_scores() {
    let data = generate_dataset(
        &GenConfig {
            seed: 3,
            ..GenConfig::default()
        },
        10,
        200,
    )
    .unwrap();
    let scenes = index_scenes(data.scenes.clone()).unwrap();
    let on = enrich_records(&data.records, &scenes, PromptOptions::default()).unwrap();
    let off = enrich_records(
        &data.records,
        &scenes,
        PromptOptions {
            enabled: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(off, data.records);
    assert!(on
        .iter()
        .zip(&off)
        .all(|(a, b)| a.question != b.question && a.enriched && !b.enriched));
    let predictions = predict_all(&data.questions, &scenes).unwrap();
    assert_eq!(
        evaluate(&on, &predictions).unwrap(),
        evaluate(&off, &predictions).unwrap()
    );
}

fn arb_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9 ,.!?'\"-]{0,40}",
        Just("caf\u{e9} \u{201C}quoted\u{201D} \u{2014} \u{1F4E6}".to_string()),
        Just("line\nbreak\ttab \\ backslash".to_string()),
    ]
}

fn arb_category() -> impl Strategy<Value = QuestionCategory> {
    prop::sample::select(QuestionCategory::ALL.to_vec())
}

fn arb_record() -> impl Strategy<Value = QARecord> {
    (
        "[a-z0-9_]{1,12}",
        "[a-z0-9_]{1,12}",
        arb_category(),
        arb_text(),
        0usize..4,
        arb_text(),
        prop::option::of("[a-z0-9. ]{1,10}"),
        any::<bool>(),
    )
        .prop_map(
            |(record_id, scene_id, category, text, masks, answer_freeform, answer_normalized, enriched)| {
                QARecord {
                    record_id,
                    scene_id,
                    category,
                    // Enriched questions keep their region order but no placeholders.
                    question: format!("{text}{}", " <mask>".repeat(if enriched { 0 } else { masks })),
                    region_order: (0..masks).collect(),
                    answer_freeform,
                    answer_normalized,
                    enriched,
                }
            },
        )
}

fn arb_coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0..2000.0f64,
        (0u32..20000).prop_map(|v| v as f64 / 10.0),
        Just(0.0),
        Just(1e-300)
    ]
}

fn arb_scene() -> impl Strategy<Value = Scene> {
    (
        "[a-z0-9_]{1,12}",
        prop::option::of(arb_text()),
        prop::collection::vec((arb_coord(), arb_coord(), arb_coord(), arb_coord(), "[a-z]{1,8}"), 0..6),
    )
        .prop_map(|(scene_id, rgb_path, boxes)| Scene {
            scene_id,
            rgb_path,
            depth_path: None,
            regions: boxes
                .into_iter()
                .enumerate()
                .map(|(index, (a, b, c, d, category))| Region {
                    index,
                    category,
                    bbox: BoundingBox::new(a.min(c), b.min(d), a.max(c), b.max(d)).unwrap(),
                })
                .collect(),
        })
}

fn arb_label() -> impl Strategy<Value = NormalizedAnswer> {
    prop_oneof![
        Just(NormalizedAnswer::direction(Direction::Left)),
        Just(NormalizedAnswer::direction(Direction::Right)),
        (0usize..500).prop_map(NormalizedAnswer::choice),
        (
            0.0..1e6f64,
            prop::option::of(prop_oneof![Just(Unit::Meters), Just(Unit::Pixels)])
        )
            .prop_map(|(v, u)| NormalizedAnswer::numeric(v, u)),
        (0u32..1000).prop_map(|v| NormalizedAnswer::numeric(v as f64, None)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn records_survive_save_and_load(records in prop::collection::vec(arb_record(), 0..5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        save_records(&records, &path).unwrap();
        prop_assert_eq!(load_records(&path).unwrap(), records);
    }

    #[test]
    fn scenes_survive_save_and_load(scenes in prop::collection::vec(arb_scene(), 0..4)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenes.jsonl");
        save_scenes(&scenes, &path).unwrap();
        prop_assert_eq!(load_scenes(&path).unwrap(), scenes);
    }

    #[test]
    fn predictions_survive_save_and_load(
        rows in prop::collection::vec(("[a-z0-9]{1,8}", arb_text(), prop::option::of(arb_label())), 0..5)
    ) {
        let predictions: Vec<Prediction> = rows
            .into_iter()
            .map(|(id, raw, normalized)| Prediction { record_id: id, raw_output: raw, normalized })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.jsonl");
        save_predictions(&predictions, &path).unwrap();
        prop_assert_eq!(load_predictions(&path).unwrap(), predictions);
    }

    #[test]
    fn suffixed_label_is_what_gets_extracted(body in arb_text(), label in arb_label()) {
        let text = append_normalized_suffix(&body, &label.label()).unwrap();
        prop_assert_eq!(extract_normalized(&text), canonicalize(&label.label()));
        prop_assert_eq!(canonicalize(&label.label()), label);
    }

    #[test]
    fn sampling_is_deterministic(n in 0usize..2000, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let k = (n as f64 * frac) as usize;
        let a = sample_indices(n, k, seed).unwrap();
        prop_assert_eq!(&a, &sample_indices(n, k, seed).unwrap());
        prop_assert_eq!(a.len(), k);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
        prop_assert!(a.iter().all(|&i| i < n));
    }
}
