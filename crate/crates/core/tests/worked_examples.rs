mod common;

use common::*;
use spatial_vqa::baseline::{self, AnchorSelector, Side, StructuredQuestion};
use spatial_vqa::dataset::QuestionCategory;
use spatial_vqa::normalize::{answers_equivalent, canonicalize, extract_normalized, Direction, NormalizedAnswer};
use spatial_vqa::prompt::{enrich_prompt, strip_enrichment, PromptOptions};

#[test]
fn pallet_pair_enrichment_is_byte_exact() {
    let r = record(
        "p1",
        "pair",
        QuestionCategory::LeftRight,
        PALLET_PAIR_QUESTION,
        vec![0, 1],
    );
    let opts = PromptOptions {
        precision: Some(1),
        enabled: true,
    };
    let p = enrich_prompt(&r, &pallet_pair_scene(), opts).unwrap();
    assert_eq!(p.text, PALLET_PAIR_ENRICHED);
    assert_eq!(strip_enrichment(&p).unwrap(), PALLET_PAIR_QUESTION);
}

#[test]
fn viewing_angle_enrichment_keeps_full_precision() {
    let r = record(
        "a1",
        "angle",
        QuestionCategory::LeftRight,
        VIEWING_ANGLE_QUESTION,
        vec![0, 1],
    );
    let p = enrich_prompt(&r, &viewing_angle_scene(), PromptOptions::default()).unwrap();
    assert!(p
        .text
        .contains("Region 0 within bounding box (314.31111111111113, 158.8, 368.0, 199.4)"));
    assert_eq!(strip_enrichment(&p).unwrap(), VIEWING_ANGLE_QUESTION);
}

#[test]
fn worked_outputs_normalize() {
    assert_eq!(
        extract_normalized(PALLET_PAIR_OUTPUT),
        NormalizedAnswer::direction(Direction::Right)
    );
    assert_eq!(
        extract_normalized(WAREHOUSE_COUNT_OUTPUT),
        NormalizedAnswer::numeric(3.0, None)
    );
    assert_eq!(
        extract_normalized(VIEWING_ANGLE_ANSWER),
        NormalizedAnswer::direction(Direction::Left)
    );
}

#[test]
fn four_forms_are_equivalent() {
    let forms = ["Four", "4", "4.0"].map(canonicalize);
    for a in &forms {
        assert_eq!(a.value, Some(4.0));
        for b in &forms {
            assert!(answers_equivalent(a, b), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn warehouse_count_chain() {
    let scene = warehouse_scene();
    let shelves: Vec<usize> = scene.regions_of("shelf").collect();
    assert_eq!(shelves, vec![13, 14]);
    assert_eq!(baseline::select_extreme(&scene, &shelves, Side::Rightmost).unwrap(), 14);
    assert_eq!(baseline::nearest_region(&scene, 14, &[0, 1, 2]).unwrap(), 0);

    let q = StructuredQuestion::count_near(shelves.clone(), AnchorSelector::Rightmost, "buffer", "pallet");
    let chain = baseline::resolve_count_chain(&scene, &q).unwrap();
    assert_eq!((chain.anchor, chain.container), (14, 0));
    assert_eq!(chain.members, vec![5, 9, 12]);
    assert_eq!(
        baseline::answer(&q, &scene).unwrap(),
        NormalizedAnswer::numeric(3.0, None)
    );

    let mcq = StructuredQuestion::choose(shelves, AnchorSelector::Rightmost);
    assert_eq!(baseline::answer(&mcq, &scene).unwrap(), NormalizedAnswer::choice(14));
}

#[test]
fn warehouse_distances_to_right_shelf() {
    let scene = warehouse_scene();
    let d = |a: usize| scene.regions[a].bbox.center_distance(&scene.regions[14].bbox);
    assert!((d(0) - 127.4066).abs() < 1e-4);
    assert!(d(0) < d(1) && d(0) < d(2));
}

#[test]
fn warehouse_region1_membership() {
    // Pallet 6 (center 258.1, 86.9) falls inside buffer 1 alongside 3, 7 and 11.
    let scene = warehouse_scene();
    assert_eq!(baseline::members_of(&scene, 1, "pallet").unwrap(), vec![3, 6, 7, 11]);
}

#[test]
fn viewing_angle_left() {
    let scene = viewing_angle_scene();
    let q = StructuredQuestion::left_right(0, 1);
    assert_eq!(
        baseline::answer(&q, &scene).unwrap(),
        NormalizedAnswer::direction(Direction::Left)
    );
}
