//! Synthetic warehouse scenes with templated questions.
//!
//! Layout: shelves sit in a band along the top edge, buffers in a
//! non-overlapping row below them, and each buffer holds its pallets fully
//! inside its box. Regions are listed buffers first, then pallets, then
//! shelves. Coordinates are rounded to 0.1 px. Scenes where two regions share
//! a center x, or where a nearest-buffer query is tied, are redrawn, so every
//! question has exactly one answer.
//!
//! Labels come from [`crate::baseline`], which makes the baseline a perfect
//! oracle for generated data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{self, AnchorSelector, BaselineError, QuestionRecord, Side, StructuredQuestion};
use crate::dataset::{QARecord, QuestionCategory, Region, Scene, MASK_TOKEN};
use crate::geometry::BoundingBox;
use crate::normalize::NormalizedAnswer;
use crate::prompt::{append_normalized_suffix, PromptError};
use crate::rng::SplitMix64;

const STREAM_SCENE: u64 = 1;
const STREAM_QA: u64 = 2;
const MAX_LAYOUT_ATTEMPTS: usize = 64;
const MIN_SLOT_WIDTH: f64 = 8.0;
const MIN_IMAGE_HEIGHT: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("infeasible layout: {0}")]
    Infeasible(String),
    #[error("scene `{scene_id}` cannot host a {category} question: {reason}")]
    MissingObjects {
        scene_id: String,
        category: QuestionCategory,
        reason: String,
    },
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub image_width: f64,
    pub image_height: f64,
    pub n_shelves: usize,
    pub n_buffers: usize,
    /// Inclusive range of pallets placed in each buffer.
    pub pallets_per_buffer: (usize, usize),
    /// Proportions for distance, count, left_right and mcq, in that order.
    pub question_mix: [f64; 4],
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image_width: 640.0,
            image_height: 360.0,
            n_shelves: 2,
            n_buffers: 3,
            pallets_per_buffer: (1, 4),
            question_mix: [0.25; 4],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        if !(self.image_width.is_finite() && self.image_width > 0.0) {
            return bad(format!("image_width must be positive, got {}", self.image_width));
        }
        if !(self.image_height.is_finite() && self.image_height > 0.0) {
            return bad(format!("image_height must be positive, got {}", self.image_height));
        }
        if self.n_shelves == 0 || self.n_buffers == 0 {
            return bad("n_shelves and n_buffers must be positive".into());
        }
        let (lo, hi) = self.pallets_per_buffer;
        if lo > hi {
            return bad(format!("pallets_per_buffer range {lo}..={hi} is empty"));
        }
        if self.question_mix.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("question_mix proportions must be non-negative".into());
        }
        let total: f64 = self.question_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("question_mix must sum to 1, got {total}"));
        }
        Ok(())
    }

    fn draw_category(&self, rng: &mut SplitMix64) -> QuestionCategory {
        let u = rng.unit();
        let mut acc = 0.0;
        let mut last_nonzero = QuestionCategory::Distance;
        for (category, p) in QuestionCategory::ALL.iter().zip(self.question_mix) {
            if p > 0.0 {
                last_nonzero = *category;
                acc += p;
                if u < acc {
                    return *category;
                }
            }
        }
        last_nonzero
    }
}

pub fn scene_id(scene_index: u64) -> String {
    format!("scene_{scene_index:06}")
}

fn round_tenth(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn make_box(x1: f64, y1: f64, w: f64, h: f64) -> BoundingBox {
    let (x1, y1) = (round_tenth(x1), round_tenth(y1));
    let (x2, y2) = (round_tenth(x1 + w).max(x1), round_tenth(y1 + h).max(y1));
    BoundingBox::new(x1.max(0.0), y1.max(0.0), x2, y2).expect("layout boxes are ordered and non-negative")
}

fn layout(config: &GenConfig, rng: &mut SplitMix64) -> Vec<Region> {
    let (w, h) = (config.image_width, config.image_height);
    let mut regions = Vec::new();
    let mut push = |category: &str, bbox: BoundingBox| {
        let index = regions.len();
        regions.push(Region {
            index,
            category: category.to_string(),
            bbox,
        });
    };

    let (band_top, band_h) = (0.3 * h, 0.65 * h);
    let slot = w / config.n_buffers as f64;
    let mut buffers = Vec::with_capacity(config.n_buffers);
    for i in 0..config.n_buffers {
        let bw = slot * rng.range(0.55, 0.9);
        let bh = band_h * rng.range(0.5, 1.0);
        let x1 = i as f64 * slot + rng.range(0.0, slot - bw);
        let y1 = band_top + rng.range(0.0, band_h - bh);
        buffers.push(make_box(x1, y1, bw, bh));
    }
    for b in &buffers {
        push("buffer", *b);
    }

    let (lo, hi) = config.pallets_per_buffer;
    for b in &buffers {
        let k = rng.between(lo as u64, hi as u64);
        for _ in 0..k {
            let pw = b.width() * rng.range(0.15, 0.35);
            let ph = b.height() * rng.range(0.15, 0.35);
            let x1 = b.x1() + rng.range(0.0, b.width() - pw);
            let y1 = b.y1() + rng.range(0.0, b.height() - ph);
            push("pallet", make_box(x1, y1, pw, ph));
        }
    }

    let shelf_band = 0.25 * h;
    let slot = w / config.n_shelves as f64;
    for i in 0..config.n_shelves {
        let sw = slot * rng.range(0.5, 0.9);
        let sh = shelf_band * rng.range(0.5, 1.0);
        let x1 = i as f64 * slot + rng.range(0.0, slot - sw);
        let y1 = rng.range(0.0, shelf_band - sh);
        push("shelf", make_box(x1, y1, sw, sh));
    }
    regions
}

/// Every pallet center sits in exactly one buffer, no two centers share an
/// x coordinate, and no anchor has two equidistant buffers.
fn layout_is_unambiguous(regions: &[Region]) -> bool {
    let of = |cat: &'static str| regions.iter().filter(move |r| r.category == cat);
    for p in of("pallet") {
        if of("buffer").filter(|b| b.bbox.contains_center(&p.bbox)).count() != 1 {
            return false;
        }
    }
    let mut xs: Vec<f64> = regions.iter().map(|r| r.bbox.center().x).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    for anchor in regions {
        let mut d: Vec<f64> = of("buffer").map(|b| anchor.bbox.center_distance(&b.bbox)).collect();
        d.sort_by(f64::total_cmp);
        if d.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
    }
    true
}

/// Deterministic in `(config.seed, scene_index)`.
pub fn generate_scene(config: &GenConfig, scene_index: u64) -> Result<Scene, SynthError> {
    config.validate()?;
    let slot = config.image_width / config.n_shelves.max(config.n_buffers) as f64;
    if slot < MIN_SLOT_WIDTH {
        return Err(SynthError::Infeasible(format!(
            "{} px wide image leaves {slot:.2} px per region slot (need {MIN_SLOT_WIDTH})",
            config.image_width
        )));
    }
    if config.image_height < MIN_IMAGE_HEIGHT {
        return Err(SynthError::Infeasible(format!(
            "image height {} px is below {MIN_IMAGE_HEIGHT}",
            config.image_height
        )));
    }
    let mut rng = SplitMix64::derive(config.seed, STREAM_SCENE, scene_index);
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let regions = layout(config, &mut rng);
        if layout_is_unambiguous(&regions) {
            return Ok(Scene {
                scene_id: scene_id(scene_index),
                rgb_path: None,
                depth_path: None,
                regions,
            });
        }
    }
    Err(SynthError::Infeasible(format!(
        "no unambiguous layout after {MAX_LAYOUT_ATTEMPTS} attempts"
    )))
}

/// A generated question in both its text and structured forms.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedQuestion {
    pub record: QARecord,
    pub question: QuestionRecord,
}

fn number_word(n: usize) -> String {
    const WORDS: [&str; 21] = [
        "zero",
        "one",
        "two",
        "three",
        "four",
        "five",
        "six",
        "seven",
        "eight",
        "nine",
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
        "twenty",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

fn masks(n: usize) -> String {
    vec![MASK_TOKEN; n].join(" ")
}

fn refs(regions: &[usize]) -> String {
    regions
        .iter()
        .map(|r| format!("[Region {r}]"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn pick_two(rng: &mut SplitMix64, pool: &[usize]) -> (usize, usize) {
    let i = rng.below(pool.len() as u64) as usize;
    let mut j = rng.below(pool.len() as u64 - 1) as usize;
    if j >= i {
        j += 1;
    }
    (pool[i], pool[j])
}

fn side_word(side: Side) -> &'static str {
    match side {
        Side::Leftmost => "left",
        Side::Rightmost => "right",
    }
}

struct Draft {
    question: String,
    region_order: Vec<usize>,
    structured: StructuredQuestion,
    freeform: String,
}

fn draft_question(scene: &Scene, category: QuestionCategory, rng: &mut SplitMix64) -> Result<Draft, SynthError> {
    let missing = |reason: &str| SynthError::MissingObjects {
        scene_id: scene.scene_id.clone(),
        category,
        reason: reason.to_string(),
    };
    let pallets: Vec<usize> = scene.regions_of("pallet").collect();
    let buffers: Vec<usize> = scene.regions_of("buffer").collect();
    let shelves: Vec<usize> = scene.regions_of("shelf").collect();
    let category_of = |i: usize| scene.regions[i].category.as_str();

    Ok(match category {
        QuestionCategory::LeftRight => {
            if pallets.len() < 2 {
                return Err(missing("needs at least 2 pallets"));
            }
            let (a, b) = pick_two(rng, &pallets);
            let structured = StructuredQuestion::left_right(a, b);
            let dir = baseline::answer(&structured, scene)?.text;
            if rng.below(2) == 0 {
                Draft {
                    question: format!("Is the pallet {MASK_TOKEN} to the left or right of the pallet {MASK_TOKEN}?"),
                    region_order: vec![a, b],
                    structured,
                    freeform: format!("The pallet [Region {a}] is situated on the {dir} of the pallet [Region {b}]."),
                }
            } else {
                Draft {
                    question: format!(
                        "Can you determine if the pallet {MASK_TOKEN} is to the right of the pallet {MASK_TOKEN} based on the current viewing angle?"
                    ),
                    region_order: vec![a, b],
                    structured,
                    freeform: format!(
                        "From the image's perspective, the pallet [Region {a}] is on the {dir} of the pallet [Region {b}]."
                    ),
                }
            }
        }
        QuestionCategory::Distance => {
            let all: Vec<usize> = (0..scene.regions.len()).collect();
            if all.len() < 2 {
                return Err(missing("needs at least 2 regions"));
            }
            let (a, b) = pick_two(rng, &all);
            let structured = StructuredQuestion::distance(a, b);
            let d = baseline::answer(&structured, scene)?;
            let (ca, cb) = (category_of(a), category_of(b));
            Draft {
                question: format!("What is the distance between the {ca} {MASK_TOKEN} and the {cb} {MASK_TOKEN}?"),
                region_order: vec![a, b],
                structured,
                freeform: format!("The {ca} [Region {a}] is {} from the {cb} [Region {b}].", d.label()),
            }
        }
        QuestionCategory::Count => {
            if buffers.is_empty() {
                return Err(missing("needs at least 1 buffer"));
            }
            if shelves.is_empty() || rng.below(2) == 0 {
                let container = buffers[rng.below(buffers.len() as u64) as usize];
                let structured = StructuredQuestion::count_in(container, "pallet");
                let members = baseline::members_of(scene, container, "pallet")?;
                let freeform = if members.is_empty() {
                    format!("There are no pallets in the buffer region [Region {container}].")
                } else {
                    format!(
                        "I see pallets {} in the buffer region [Region {container}]. Hence, there are exactly {} pallets.",
                        refs(&members),
                        number_word(members.len())
                    )
                };
                Draft {
                    question: format!("How many pallets are in the buffer region {MASK_TOKEN}?"),
                    region_order: vec![container],
                    structured,
                    freeform,
                }
            } else {
                let side = if rng.below(2) == 0 {
                    Side::Leftmost
                } else {
                    Side::Rightmost
                };
                let selector = match side {
                    Side::Leftmost => AnchorSelector::Leftmost,
                    Side::Rightmost => AnchorSelector::Rightmost,
                };
                let structured = StructuredQuestion::count_near(shelves.clone(), selector, "buffer", "pallet");
                let chain = baseline::resolve_count_chain(scene, &structured)?;
                let word = side_word(side);
                let (s, c) = (chain.anchor, chain.container);
                let mut freeform = format!(
                    "The shelf [Region {s}] is the shelf on the {word}. The buffer region [Region {c}] is the closest to the shelf [Region {s}]. "
                );
                if chain.members.is_empty() {
                    freeform.push_str(&format!("There are no pallets in buffer area [Region {c}]."));
                } else {
                    freeform.push_str(&format!(
                        "I see pallets {} in the buffer region [Region {c}]. Hence, in buffer area [Region {c}], there are exactly {} pallets.",
                        refs(&chain.members),
                        number_word(chain.members.len())
                    ));
                }
                let mut region_order = buffers.clone();
                region_order.extend(&pallets);
                region_order.extend(&shelves);
                Draft {
                    question: format!(
                        "Using the buffer masks {} and pallet masks {}, how many pallets are situated in the buffer region closest to the shelf on the {word} among {}?",
                        masks(buffers.len()),
                        masks(pallets.len()),
                        masks(shelves.len())
                    ),
                    region_order,
                    structured,
                    freeform,
                }
            }
        }
        QuestionCategory::Mcq => {
            let nearest_form = !shelves.is_empty() && buffers.len() >= 2 && rng.below(2) == 0;
            if nearest_form {
                let shelf = shelves[rng.below(shelves.len() as u64) as usize];
                let structured = StructuredQuestion::choose(buffers.clone(), AnchorSelector::NearestTo(shelf));
                let pick = baseline::answer(&structured, scene)?
                    .choice_region()
                    .expect("mcq answers are choices");
                let mut region_order = buffers.clone();
                region_order.push(shelf);
                Draft {
                    question: format!(
                        "Which buffer region among {} is the closest to the shelf {MASK_TOKEN}?",
                        masks(buffers.len())
                    ),
                    region_order,
                    structured,
                    freeform: format!(
                        "The buffer region [Region {pick}] is the closest to the shelf [Region {shelf}]."
                    ),
                }
            } else {
                let (noun, pool) = if shelves.len() >= 2 {
                    ("shelf", &shelves)
                } else if buffers.len() >= 2 {
                    ("buffer region", &buffers)
                } else if pallets.len() >= 2 {
                    ("pallet", &pallets)
                } else {
                    return Err(missing("needs 2 regions of one category"));
                };
                let side = if rng.below(2) == 0 {
                    Side::Leftmost
                } else {
                    Side::Rightmost
                };
                let selector = match side {
                    Side::Leftmost => AnchorSelector::Leftmost,
                    Side::Rightmost => AnchorSelector::Rightmost,
                };
                let structured = StructuredQuestion::choose(pool.clone(), selector);
                let pick = baseline::answer(&structured, scene)?
                    .choice_region()
                    .expect("mcq answers are choices");
                let word = side_word(side);
                Draft {
                    question: format!("Which {noun} is on the {word} among {}?", masks(pool.len())),
                    region_order: pool.clone(),
                    structured,
                    freeform: format!("The {noun} [Region {pick}] is the {noun} on the {word}."),
                }
            }
        }
    })
}

/// One question of `category` about `scene`, labelled by the baseline and
/// with the normalized-answer suffix appended to its free-form answer.
pub fn generate_question(
    scene: &Scene,
    category: QuestionCategory,
    record_id: &str,
    rng: &mut SplitMix64,
) -> Result<GeneratedQuestion, SynthError> {
    let draft = draft_question(scene, category, rng)?;
    let label: NormalizedAnswer = baseline::answer(&draft.structured, scene)?;
    let label = label.label();
    let record = QARecord {
        record_id: record_id.to_string(),
        scene_id: scene.scene_id.clone(),
        category,
        question: draft.question,
        region_order: draft.region_order,
        answer_freeform: append_normalized_suffix(&draft.freeform, &label)?,
        answer_normalized: Some(label),
        enriched: false,
    };
    Ok(GeneratedQuestion {
        record,
        question: QuestionRecord {
            record_id: record_id.to_string(),
            scene_id: scene.scene_id.clone(),
            question: draft.structured,
        },
    })
}

/// `count` questions about one scene, categories drawn from the config's mix.
pub fn generate_qa(
    scene: &Scene,
    config: &GenConfig,
    rng: &mut SplitMix64,
    count: usize,
) -> Result<Vec<GeneratedQuestion>, SynthError> {
    config.validate()?;
    (0..count)
        .map(|i| {
            let category = config.draw_category(rng);
            generate_question(scene, category, &format!("{}_q{i:04}", scene.scene_id), rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub scenes: Vec<Scene>,
    pub records: Vec<QARecord>,
    pub questions: Vec<QuestionRecord>,
}

pub fn record_id(question_index: u64) -> String {
    format!("q{question_index:07}")
}

/// `n_scenes` scenes and `n_questions` questions; question `q` is about
/// scene `q % n_scenes` and draws from its own generator stream, so the
/// result does not depend on how the work is split across threads.
pub fn generate_dataset(config: &GenConfig, n_scenes: usize, n_questions: usize) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    if n_scenes == 0 && n_questions > 0 {
        return Err(SynthError::InvalidConfig("questions need at least one scene".into()));
    }
    let scenes: Vec<Scene> = (0..n_scenes as u64)
        .into_par_iter()
        .map(|i| generate_scene(config, i))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_, _>>()?;
    let generated: Vec<GeneratedQuestion> = (0..n_questions as u64)
        .into_par_iter()
        .map(|q| {
            let scene = &scenes[(q % n_scenes as u64) as usize];
            let mut rng = SplitMix64::derive(config.seed, STREAM_QA, q);
            let category = config.draw_category(&mut rng);
            generate_question(scene, category, &record_id(q), &mut rng)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_, _>>()?;
    let (records, questions) = generated.into_iter().map(|g| (g.record, g.question)).unzip();
    Ok(SynthDataset {
        scenes,
        records,
        questions,
    })
}
