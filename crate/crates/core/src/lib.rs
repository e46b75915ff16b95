//! Region-aware spatial question answering over warehouse scenes.
//!
//! The crate covers the whole offline pipeline: box geometry, the JSONL
//! record formats, prompt enrichment with region boxes, answer normalization,
//! the success-rate metrics, a rule-based geometric baseline, and a
//! synthetic scene generator whose labels come from that baseline.

pub mod baseline;
pub mod dataset;
pub mod geometry;
pub mod metrics;
pub mod normalize;
pub mod prompt;
pub mod rng;
pub mod synth;

pub use baseline::{AnchorSelector, BaselineError, QuestionRecord, StructuredQuestion};
pub use dataset::{DatasetError, Prediction, QARecord, QuestionCategory, Region, Scene, MASK_TOKEN};
pub use geometry::{BoundingBox, GeometryError, Point2D};
pub use metrics::{evaluate, EvalReport, MetricsError};
pub use normalize::{extract_normalized, AnswerKind, NormalizedAnswer, Unit};
pub use prompt::{enrich_prompt, EnrichedPrompt, PromptError, PromptOptions};
pub use synth::{GenConfig, SynthDataset, SynthError};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}
