//! Records, scenes and predictions, stored as JSON Lines.
//!
//! Every file holds one JSON object per line with fields in a fixed order:
//!
//! * records: `record_id, scene_id, category, question, region_order,
//!   answer_freeform, answer_normalized` (plus `enriched: true` on prompts
//!   already rewritten by the prompt builder)
//! * scenes: `scene_id, rgb_path, depth_path, regions` where each region is
//!   `{index, category, bbox: [x1, y1, x2, y2]}`
//! * predictions: `record_id, raw_output` (plus an optional `normalized`)
//!
//! Blank lines are ignored. Any other malformed line is reported with its
//! 1-based line number and the offending field.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::normalize::NormalizedAnswer;
use crate::rng::SplitMix64;

/// The placeholder a question uses for each region it mentions.
pub const MASK_TOKEN: &str = "<mask>";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: field `{field}`: {reason}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        field: String,
        reason: String,
    },
    #[error("cannot sample {k} records from a population of {population}")]
    SampleTooLarge { k: usize, population: usize },
    #[error("scene `{scene_id}` appears more than once")]
    DuplicateScene { scene_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionCategory {
    Distance,
    Count,
    LeftRight,
    Mcq,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 4] = [
        QuestionCategory::Distance,
        QuestionCategory::Count,
        QuestionCategory::LeftRight,
        QuestionCategory::Mcq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionCategory::Distance => "distance",
            QuestionCategory::Count => "count",
            QuestionCategory::LeftRight => "left_right",
            QuestionCategory::Mcq => "mcq",
        }
    }

    /// Distance and count answers are numbers scored with a relative tolerance.
    pub fn is_quantitative(self) -> bool {
        matches!(self, QuestionCategory::Distance | QuestionCategory::Count)
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub index: usize,
    pub category: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    #[serde(default)]
    pub rgb_path: Option<String>,
    /// Carried through untouched; depth maps are never decoded here.
    #[serde(default)]
    pub depth_path: Option<String>,
    pub regions: Vec<Region>,
}

impl Scene {
    pub fn region(&self, index: usize) -> Option<&Region> {
        self.regions.get(index)
    }

    /// Indices of every region tagged with `category`, in scene order.
    pub fn regions_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.regions
            .iter()
            .filter(move |r| r.category == category)
            .map(|r| r.index)
    }

    /// Checks region numbering and category tags. Returns the offending
    /// field path and reason.
    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.scene_id.is_empty() {
            return Err(("scene_id".into(), "must not be empty".into()));
        }
        for (pos, region) in self.regions.iter().enumerate() {
            if region.index != pos {
                return Err((
                    format!("regions[{pos}].index"),
                    format!("expected {pos}, found {}", region.index),
                ));
            }
            if region.category.is_empty() {
                return Err((format!("regions[{pos}].category"), "must not be empty".into()));
            }
            if region.category != region.category.to_lowercase() {
                return Err((
                    format!("regions[{pos}].category"),
                    format!("`{}` is not lowercase", region.category),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QARecord {
    pub record_id: String,
    pub scene_id: String,
    pub category: QuestionCategory,
    pub question: String,
    pub region_order: Vec<usize>,
    pub answer_freeform: String,
    pub answer_normalized: Option<String>,
    /// Set once `<mask>` tokens have been replaced by region descriptions.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub enriched: bool,
}

impl QARecord {
    pub fn placeholder_count(&self) -> usize {
        count_placeholders(&self.question)
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.record_id.is_empty() {
            return Err(("record_id".into(), "must not be empty".into()));
        }
        let masks = self.placeholder_count();
        if self.enriched {
            if masks != 0 {
                return Err((
                    "question".into(),
                    format!(
                        "enriched record `{}` still contains {masks} {MASK_TOKEN} token(s)",
                        self.record_id
                    ),
                ));
            }
        } else if masks != self.region_order.len() {
            return Err((
                "region_order".into(),
                format!(
                    "record `{}` has {masks} {MASK_TOKEN} placeholder(s) but {} region(s) in region_order",
                    self.record_id,
                    self.region_order.len()
                ),
            ));
        }
        Ok(())
    }

    /// Checks that every region this record refers to exists in `scene`.
    pub fn validate_against(&self, scene: &Scene) -> Result<(), String> {
        if scene.scene_id != self.scene_id {
            return Err(format!(
                "record `{}` belongs to scene `{}`, not `{}`",
                self.record_id, self.scene_id, scene.scene_id
            ));
        }
        for &index in &self.region_order {
            if scene.region(index).is_none() {
                return Err(format!(
                    "record `{}` refers to region {index}, but scene `{}` has {} region(s)",
                    self.record_id,
                    scene.scene_id,
                    scene.regions.len()
                ));
            }
        }
        Ok(())
    }
}

pub fn count_placeholders(text: &str) -> usize {
    text.matches(MASK_TOKEN).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub record_id: String,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<NormalizedAnswer>,
}

impl Prediction {
    pub fn new(record_id: impl Into<String>, raw_output: impl Into<String>) -> Self {
        Self {
            record_id: record_id.into(),
            raw_output: raw_output.into(),
            normalized: None,
        }
    }
}

/// Reads a JSON Lines file, deserializing each non-blank line into `T` and
/// running `check` over it.
pub fn read_jsonl<T, F>(path: &Path, mut check: F) -> Result<Vec<T>, DatasetError>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<(), (String, String)>,
{
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema_err = |field: String, reason: String| DatasetError::Schema {
            path: path.to_path_buf(),
            line: lineno,
            field,
            reason,
        };
        let mut de = serde_json::Deserializer::from_str(&line);
        let item: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." { "<line>".to_string() } else { field };
            schema_err(field, e.into_inner().to_string())
        })?;
        de.end().map_err(|e| schema_err("<line>".into(), e.to_string()))?;
        check(&item).map_err(|(field, reason)| schema_err(field, reason))?;
        items.push(item);
    }
    Ok(items)
}

/// Writes one compact JSON object per line. An empty slice produces an
/// empty file.
pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| io_err(e.into()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn load_records(path: &Path) -> Result<Vec<QARecord>, DatasetError> {
    read_jsonl(path, QARecord::validate)
}

pub fn save_records(records: &[QARecord], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(records, path)
}

pub fn load_scenes(path: &Path) -> Result<Vec<Scene>, DatasetError> {
    read_jsonl(path, Scene::validate)
}

pub fn save_scenes(scenes: &[Scene], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(scenes, path)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, DatasetError> {
    read_jsonl(path, |p: &Prediction| {
        if p.record_id.is_empty() {
            Err(("record_id".into(), "must not be empty".into()))
        } else {
            Ok(())
        }
    })
}

pub fn save_predictions(predictions: &[Prediction], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(predictions, path)
}

/// Scenes keyed by id.
pub fn index_scenes(scenes: Vec<Scene>) -> Result<HashMap<String, Scene>, DatasetError> {
    let mut map = HashMap::with_capacity(scenes.len());
    for scene in scenes {
        if map.contains_key(&scene.scene_id) {
            return Err(DatasetError::DuplicateScene {
                scene_id: scene.scene_id,
            });
        }
        map.insert(scene.scene_id.clone(), scene);
    }
    Ok(map)
}

/// Indices of a uniformly random `k`-subset of `0..n`, in draw order.
///
/// Runs the first `k` steps of a forward Fisher-Yates shuffle over
/// `[0, 1, .., n-1]`: for `i` in `0..k`, draw `j = i + below(n - i)` from
/// [`SplitMix64::new(seed)`](SplitMix64) and swap positions `i` and `j`.
/// The first `k` positions are the sample.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if k > n {
        return Err(DatasetError::SampleTooLarge { k, population: n });
    }
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        order.swap(i, j);
    }
    order.truncate(k);
    Ok(order)
}

pub fn sample_records(records: &[QARecord], k: usize, seed: u64) -> Result<Vec<QARecord>, DatasetError> {
    Ok(sample_indices(records.len(), k, seed)?
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}
