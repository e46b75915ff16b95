//! Rule-based answers computed straight from region boxes.
//!
//! Left/right compares center x in image coordinates (smaller x is further
//! left). Nearest uses center-to-center distance, and "in" means the member's
//! center lies inside the container box. Every tie goes to the lowest region
//! index.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_jsonl, write_jsonl, DatasetError, Prediction, QuestionCategory, Scene};
use crate::normalize::{Direction, NormalizedAnswer, Unit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("region {region} does not exist in scene `{scene_id}`")]
    UnknownRegion { region: usize, scene_id: String },
    #[error("no candidate regions to choose from")]
    EmptyCandidates,
    #[error("malformed {category} question: {reason}")]
    Malformed { category: QuestionCategory, reason: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("record `{record_id}`: scene `{scene_id}` not found")]
    MissingScene { record_id: String, scene_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftRight {
    Left,
    Right,
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Leftmost,
    Rightmost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSelector {
    Leftmost,
    Rightmost,
    NearestTo(usize),
}

/// Machine-readable form of a templated question.
///
/// * `left_right`: `subject_regions = [a, b]`, asks where `a` is relative to `b`.
/// * `distance`: `subject_regions = [a, b]`; `metric = true` demands meters
///   and is rejected.
/// * `count`: either `subject_regions = [container]`, or the compound form
///   that picks an anchor among `candidate_regions` with `anchor_selector`,
///   takes the nearest region of `container_category` to it, and counts
///   `member_category` regions inside that container.
/// * `mcq`: picks one of `candidate_regions` with `anchor_selector`
///   (`leftmost`, `rightmost`, or the candidate nearest to a region).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredQuestion {
    pub category: QuestionCategory,
    #[serde(default)]
    pub subject_regions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_regions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_selector: Option<AnchorSelector>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub metric: bool,
}

impl StructuredQuestion {
    fn empty(category: QuestionCategory) -> Self {
        Self {
            category,
            subject_regions: Vec::new(),
            candidate_regions: None,
            container_category: None,
            member_category: None,
            anchor_selector: None,
            metric: false,
        }
    }

    pub fn left_right(a: usize, b: usize) -> Self {
        Self {
            subject_regions: vec![a, b],
            ..Self::empty(QuestionCategory::LeftRight)
        }
    }

    pub fn distance(a: usize, b: usize) -> Self {
        Self {
            subject_regions: vec![a, b],
            ..Self::empty(QuestionCategory::Distance)
        }
    }

    pub fn count_in(container: usize, member_category: &str) -> Self {
        Self {
            subject_regions: vec![container],
            member_category: Some(member_category.into()),
            ..Self::empty(QuestionCategory::Count)
        }
    }

    pub fn count_near(
        anchors: Vec<usize>,
        selector: AnchorSelector,
        container_category: &str,
        member_category: &str,
    ) -> Self {
        Self {
            candidate_regions: Some(anchors),
            anchor_selector: Some(selector),
            container_category: Some(container_category.into()),
            member_category: Some(member_category.into()),
            ..Self::empty(QuestionCategory::Count)
        }
    }

    pub fn choose(candidates: Vec<usize>, selector: AnchorSelector) -> Self {
        Self {
            candidate_regions: Some(candidates),
            anchor_selector: Some(selector),
            ..Self::empty(QuestionCategory::Mcq)
        }
    }

    fn malformed(&self, reason: impl Into<String>) -> BaselineError {
        BaselineError::Malformed {
            category: self.category,
            reason: reason.into(),
        }
    }
}

/// A structured question as stored on disk, one per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub record_id: String,
    pub scene_id: String,
    #[serde(flatten)]
    pub question: StructuredQuestion,
}

fn bbox_of(scene: &Scene, region: usize) -> Result<&crate::geometry::BoundingBox, BaselineError> {
    scene
        .region(region)
        .map(|r| &r.bbox)
        .ok_or_else(|| BaselineError::UnknownRegion {
            region,
            scene_id: scene.scene_id.clone(),
        })
}

pub fn answer_left_right(scene: &Scene, a: usize, b: usize) -> Result<LeftRight, BaselineError> {
    let ax = bbox_of(scene, a)?.center().x;
    let bx = bbox_of(scene, b)?.center().x;
    Ok(if ax < bx {
        LeftRight::Left
    } else if ax > bx {
        LeftRight::Right
    } else {
        LeftRight::Ambiguous
    })
}

/// Candidate minimizing `key`, ties broken by the lowest region index.
fn argmin_by_key(
    scene: &Scene,
    candidates: &[usize],
    key: impl Fn(&crate::geometry::BoundingBox) -> f64,
) -> Result<usize, BaselineError> {
    let mut best: Option<(f64, usize)> = None;
    for &c in candidates {
        let k = key(bbox_of(scene, c)?);
        best = match best {
            Some((bk, bi)) if bk < k || (bk == k && bi < c) => Some((bk, bi)),
            _ => Some((k, c)),
        };
    }
    best.map(|(_, i)| i).ok_or(BaselineError::EmptyCandidates)
}

pub fn select_extreme(scene: &Scene, candidates: &[usize], side: Side) -> Result<usize, BaselineError> {
    match side {
        Side::Leftmost => argmin_by_key(scene, candidates, |b| b.center().x),
        Side::Rightmost => argmin_by_key(scene, candidates, |b| -b.center().x),
    }
}

pub fn nearest_region(scene: &Scene, anchor: usize, candidates: &[usize]) -> Result<usize, BaselineError> {
    let anchor_box = *bbox_of(scene, anchor)?;
    argmin_by_key(scene, candidates, |b| anchor_box.center_distance(b))
}

/// Regions of `member_category` whose centers lie inside `container`, in
/// index order.
pub fn members_of(scene: &Scene, container: usize, member_category: &str) -> Result<Vec<usize>, BaselineError> {
    let container_box = *bbox_of(scene, container)?;
    Ok(scene
        .regions
        .iter()
        .filter(|r| r.category == member_category && r.index != container)
        .filter(|r| container_box.contains_center(&r.bbox))
        .map(|r| r.index)
        .collect())
}

pub fn count_members(scene: &Scene, container: usize, member_category: &str) -> Result<usize, BaselineError> {
    Ok(members_of(scene, container, member_category)?.len())
}

/// Intermediate picks of a compound counting question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountChain {
    pub anchor: usize,
    pub container: usize,
    pub members: Vec<usize>,
}

fn resolve_anchor(scene: &Scene, question: &StructuredQuestion, candidates: &[usize]) -> Result<usize, BaselineError> {
    match question.anchor_selector {
        Some(AnchorSelector::Leftmost) => select_extreme(scene, candidates, Side::Leftmost),
        Some(AnchorSelector::Rightmost) => select_extreme(scene, candidates, Side::Rightmost),
        Some(AnchorSelector::NearestTo(r)) => nearest_region(scene, r, candidates),
        None => Err(question.malformed("anchor_selector is required")),
    }
}

/// Resolves anchor, then nearest container, then members.
pub fn resolve_count_chain(scene: &Scene, question: &StructuredQuestion) -> Result<CountChain, BaselineError> {
    let member_category = question
        .member_category
        .as_deref()
        .ok_or_else(|| question.malformed("member_category is required"))?;
    let container_category = question
        .container_category
        .as_deref()
        .ok_or_else(|| question.malformed("container_category is required for the compound form"))?;
    let anchors = question
        .candidate_regions
        .as_deref()
        .ok_or_else(|| question.malformed("candidate_regions is required for the compound form"))?;
    let anchor = match question.anchor_selector {
        Some(AnchorSelector::NearestTo(r)) => {
            bbox_of(scene, r)?;
            r
        }
        _ => resolve_anchor(scene, question, anchors)?,
    };
    let containers: Vec<usize> = scene.regions_of(container_category).collect();
    let container = nearest_region(scene, anchor, &containers)?;
    let members = members_of(scene, container, member_category)?;
    Ok(CountChain {
        anchor,
        container,
        members,
    })
}

pub fn answer(question: &StructuredQuestion, scene: &Scene) -> Result<NormalizedAnswer, BaselineError> {
    match question.category {
        QuestionCategory::LeftRight => {
            let [a, b] = question.subject_regions[..] else {
                return Err(question.malformed("left_right needs exactly 2 subject_regions"));
            };
            Ok(match answer_left_right(scene, a, b)? {
                LeftRight::Left => NormalizedAnswer::direction(Direction::Left),
                LeftRight::Right => NormalizedAnswer::direction(Direction::Right),
                LeftRight::Ambiguous => NormalizedAnswer::raw("ambiguous"),
            })
        }
        QuestionCategory::Distance => {
            let [a, b] = question.subject_regions[..] else {
                return Err(question.malformed("distance needs exactly 2 subject_regions"));
            };
            if question.metric {
                return Err(BaselineError::Unsupported(
                    "metric distances need depth; the baseline only measures pixels".into(),
                ));
            }
            let d = bbox_of(scene, a)?.center_distance(bbox_of(scene, b)?);
            Ok(NormalizedAnswer::numeric(d, Some(Unit::Pixels)))
        }
        QuestionCategory::Count => {
            let n = match question.subject_regions[..] {
                [container] => {
                    let member_category = question
                        .member_category
                        .as_deref()
                        .ok_or_else(|| question.malformed("member_category is required"))?;
                    count_members(scene, container, member_category)?
                }
                [] => resolve_count_chain(scene, question)?.members.len(),
                _ => return Err(question.malformed("count takes at most 1 subject region")),
            };
            Ok(NormalizedAnswer::numeric(n as f64, None))
        }
        QuestionCategory::Mcq => {
            let candidates = question
                .candidate_regions
                .as_deref()
                .ok_or_else(|| question.malformed("candidate_regions is required"))?;
            let pick = resolve_anchor(scene, question, candidates)?;
            Ok(NormalizedAnswer::choice(pick))
        }
    }
}

/// Answers every question in parallel and renders each answer as a
/// prediction line. Output order follows input order.
pub fn predict_all(
    questions: &[QuestionRecord],
    scenes: &HashMap<String, Scene>,
) -> Result<Vec<Prediction>, BaselineError> {
    let results: Vec<Result<Prediction, BaselineError>> = questions
        .par_iter()
        .map(|q| {
            let scene = scenes.get(&q.scene_id).ok_or_else(|| BaselineError::MissingScene {
                record_id: q.record_id.clone(),
                scene_id: q.scene_id.clone(),
            })?;
            let a = answer(&q.question, scene)?;
            Ok(Prediction::new(q.record_id.clone(), a.label()))
        })
        .collect();
    results.into_iter().collect()
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionRecord>, DatasetError> {
    read_jsonl(path, |q: &QuestionRecord| {
        if q.record_id.is_empty() {
            Err(("record_id".into(), "must not be empty".into()))
        } else {
            Ok(())
        }
    })
}

pub fn save_questions(questions: &[QuestionRecord], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(questions, path)
}
