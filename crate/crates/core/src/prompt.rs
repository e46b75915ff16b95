//! Bounding-box grounded prompts and answer suffixes.
//!
//! Each `<mask>` in a question is replaced, left to right, by
//! `Region {r} within bounding box ({x1}, {y1}, {x2}, {y2})` where `r` is the
//! next entry of the record's `region_order`, and the whole prompt gets the
//! [`PREAMBLE`]. Training answers get the normalized-answer sentence
//! appended with [`append_normalized_suffix`].

use std::collections::HashMap;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use thiserror::Error;

use crate::dataset::{QARecord, Scene, MASK_TOKEN};
use crate::geometry::BoundingBox;

pub const PREAMBLE: &str = "Given all bounding box sizes are in the form x1y1x2y2, ";

pub const SUFFIX_LEAD: &str = "In short, the normalized answer is";

static SEGMENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Region (\d+) within bounding box \(([^()]*)\)").unwrap());

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("record `{record_id}`: question has {placeholders} <mask> placeholder(s) but region_order has {regions}")]
    PlaceholderMismatch {
        record_id: String,
        placeholders: usize,
        regions: usize,
    },
    #[error("record `{record_id}`: region {region} does not exist in scene `{scene_id}`")]
    UnknownRegion {
        record_id: String,
        region: usize,
        scene_id: String,
    },
    #[error("record `{record_id}`: scene `{scene_id}` not found")]
    MissingScene { record_id: String, scene_id: String },
    #[error("record `{record_id}` is already enriched")]
    AlreadyEnriched { record_id: String },
    #[error("normalized-answer label must not be empty")]
    EmptyLabel,
    #[error("text does not match the enriched-prompt grammar: {0}")]
    Grammar(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptOptions {
    /// Fixed decimal places for coordinates; `None` prints each stored value
    /// in its shortest round-tripping form.
    pub precision: Option<usize>,
    /// `false` is the ablation setting: questions pass through untouched.
    pub enabled: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            precision: None,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichedPrompt {
    pub text: String,
    pub regions_used: Vec<usize>,
}

/// Formats one coordinate.
///
/// Without a precision, the shortest decimal that reads back as the same
/// `f64` is used and integral values keep a trailing `.0` (`368.0`). With a
/// precision, the exact binary value is rounded to that many decimals, ties
/// going to the even digit.
pub fn format_coordinate(value: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{value:.p$}"),
        None => {
            let s = format!("{value}");
            if s.contains(['.', 'e', 'E']) || !value.is_finite() {
                s
            } else {
                s + ".0"
            }
        }
    }
}

pub fn region_segment(index: usize, bbox: &BoundingBox, precision: Option<usize>) -> String {
    let [x1, y1, x2, y2] = bbox.coords().map(|c| format_coordinate(c, precision));
    format!("Region {index} within bounding box ({x1}, {y1}, {x2}, {y2})")
}

pub fn enrich_prompt(record: &QARecord, scene: &Scene, options: PromptOptions) -> Result<EnrichedPrompt, PromptError> {
    if record.enriched {
        return Err(PromptError::AlreadyEnriched {
            record_id: record.record_id.clone(),
        });
    }
    let placeholders = record.placeholder_count();
    if placeholders != record.region_order.len() {
        return Err(PromptError::PlaceholderMismatch {
            record_id: record.record_id.clone(),
            placeholders,
            regions: record.region_order.len(),
        });
    }
    let mut boxes = Vec::with_capacity(record.region_order.len());
    for &index in &record.region_order {
        let region = scene.region(index).ok_or_else(|| PromptError::UnknownRegion {
            record_id: record.record_id.clone(),
            region: index,
            scene_id: scene.scene_id.clone(),
        })?;
        boxes.push((index, region.bbox));
    }

    if !options.enabled || boxes.is_empty() {
        return Ok(EnrichedPrompt {
            text: record.question.clone(),
            regions_used: Vec::new(),
        });
    }

    let mut text = String::with_capacity(PREAMBLE.len() + record.question.len() + 64 * boxes.len());
    text.push_str(PREAMBLE);
    let mut pieces = record.question.split(MASK_TOKEN);
    text.push_str(pieces.next().unwrap_or_default());
    for ((index, bbox), piece) in boxes.iter().zip(pieces) {
        text.push_str(&region_segment(*index, bbox, options.precision));
        text.push_str(piece);
    }
    Ok(EnrichedPrompt {
        text,
        regions_used: record.region_order.clone(),
    })
}

/// Inverse of [`enrich_prompt`]: drops the preamble and turns every region
/// segment back into `<mask>`.
pub fn strip_enrichment(enriched: &EnrichedPrompt) -> Result<String, PromptError> {
    if enriched.regions_used.is_empty() {
        return Ok(enriched.text.clone());
    }
    let body = enriched
        .text
        .strip_prefix(PREAMBLE)
        .ok_or_else(|| PromptError::Grammar("missing coordinate-format preamble".into()))?;

    let mut out = String::with_capacity(body.len());
    let mut last = 0;
    let mut found = 0;
    for caps in SEGMENT_RE.captures_iter(body) {
        let whole = caps.get(0).expect("group 0 always matches");
        let index: usize = caps[1]
            .parse()
            .map_err(|_| PromptError::Grammar(format!("bad region index `{}`", &caps[1])))?;
        let expected = enriched.regions_used.get(found).copied();
        if expected != Some(index) {
            return Err(PromptError::Grammar(format!(
                "segment {found} names region {index}, expected {expected:?}"
            )));
        }
        let coords: Vec<&str> = caps[2].split(", ").collect();
        if coords.len() != 4 || coords.iter().any(|c| c.parse::<f64>().is_err()) {
            return Err(PromptError::Grammar(format!(
                "region {index} has malformed coordinates `{}`",
                &caps[2]
            )));
        }
        out.push_str(&body[last..whole.start()]);
        out.push_str(MASK_TOKEN);
        last = whole.end();
        found += 1;
    }
    if found != enriched.regions_used.len() {
        return Err(PromptError::Grammar(format!(
            "found {found} region segment(s), expected {}",
            enriched.regions_used.len()
        )));
    }
    out.push_str(&body[last..]);
    Ok(out)
}

/// Appends `In short, the normalized answer is {label}.` to a free-form
/// answer, separated by one space. Does not check for an existing suffix.
pub fn append_normalized_suffix(answer_freeform: &str, label: &str) -> Result<String, PromptError> {
    if label.trim().is_empty() {
        return Err(PromptError::EmptyLabel);
    }
    let body = answer_freeform.trim_end();
    if body.is_empty() {
        Ok(format!("{SUFFIX_LEAD} {label}."))
    } else {
        Ok(format!("{body} {SUFFIX_LEAD} {label}."))
    }
}

/// Record with its question replaced by the enriched prompt. With enrichment
/// disabled the record comes back unchanged.
pub fn enrich_record(record: &QARecord, scene: &Scene, options: PromptOptions) -> Result<QARecord, PromptError> {
    let prompt = enrich_prompt(record, scene, options)?;
    let mut out = record.clone();
    if options.enabled {
        out.question = prompt.text;
        out.enriched = true;
    }
    Ok(out)
}

/// Enriches records in parallel on the current rayon pool. Output order
/// matches input order; on failure the error for the earliest bad record is
/// returned.
pub fn enrich_records(
    records: &[QARecord],
    scenes: &HashMap<String, Scene>,
    options: PromptOptions,
) -> Result<Vec<QARecord>, PromptError> {
    let results: Vec<Result<QARecord, PromptError>> = records
        .par_iter()
        .map(|record| {
            let scene = scenes.get(&record.scene_id).ok_or_else(|| PromptError::MissingScene {
                record_id: record.record_id.clone(),
                scene_id: record.scene_id.clone(),
            })?;
            enrich_record(record, scene, options)
        })
        .collect();
    results.into_iter().collect()
}

/// Appends the normalized-answer suffix to every record that carries a
/// normalized label. Records without one are left as they are.
pub fn suffix_answers(records: &mut [QARecord]) -> Result<(), PromptError> {
    for record in records.iter_mut() {
        if let Some(label) = &record.answer_normalized {
            record.answer_freeform = append_normalized_suffix(&record.answer_freeform, label)?;
        }
    }
    Ok(())
}
