//! Scoring: Acc@10, relative error, RMSE, weighted success rates and the
//! summary report (Cnt, RMSE, Dist, D-RMSE, LR, MCQ, Quant, Qual, S1).
//!
//! Distance and count answers succeed when the relative error is at most
//! 10%; left/right and multiple-choice answers need an exact canonical
//! match. Quant, Qual and S1 are success rates over the union of their
//! categories, so larger categories weigh more.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Prediction, QARecord, QuestionCategory};
use crate::normalize::{
    answers_equivalent, canonicalize, extract_normalized, units_compatible, AnswerKind, NormalizedAnswer,
};

/// Relative tolerance for distance and count answers.
pub const ACC_TOLERANCE: f64 = 0.10;

/// A zero ground truth is matched only by a prediction this close to zero.
pub const ZERO_GT_EPSILON: f64 = 1e-9;

/// Slack, in units of `|gt|`, that absorbs rounding in `|pred - gt|` and in
/// the product `0.10 * |gt|`, so a prediction at exactly 90% or 110% of the
/// ground truth is not lost to the last bit.
const ROUNDING_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("record `{0}` has more than one prediction")]
    DuplicatePrediction(String),
    #[error("prediction for unknown record `{0}`")]
    UnknownRecord(String),
    #[error("record `{0}` appears more than once")]
    DuplicateRecord(String),
    #[error("RMSE of an empty list is undefined")]
    EmptyInput,
    #[error("RMSE input contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessRule {
    ExactMatch,
    RelativeTolerance(f64),
}

impl SuccessRule {
    pub fn for_category(category: QuestionCategory) -> Self {
        if category.is_quantitative() {
            SuccessRule::RelativeTolerance(ACC_TOLERANCE)
        } else {
            SuccessRule::ExactMatch
        }
    }
}

fn within_tolerance(pred: f64, gt: f64, tolerance: f64) -> bool {
    if !pred.is_finite() || !gt.is_finite() {
        return false;
    }
    if gt == 0.0 {
        return pred.abs() <= ZERO_GT_EPSILON;
    }
    (pred - gt).abs() <= (tolerance + ROUNDING_SLACK) * gt.abs()
}

/// `|pred - gt| / |gt| <= 0.10`; a zero ground truth needs `|pred| <= 1e-9`.
/// Non-finite predictions fail.
pub fn acc_at_10(pred: f64, gt: f64) -> bool {
    within_tolerance(pred, gt, ACC_TOLERANCE)
}

/// `|pred - gt| / |gt| * 100`, or `None` when the ground truth is zero.
pub fn relative_error(pred: f64, gt: f64) -> Option<f64> {
    (gt != 0.0).then(|| (pred - gt).abs() / gt.abs() * 100.0)
}

pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if pairs.iter().any(|(p, g)| !p.is_finite() || !g.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let sum: f64 = pairs.iter().map(|(p, g)| (p - g) * (p - g)).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Percentage of successes over exactly the supplied results; `None` for an
/// empty list.
pub fn wasr(results: &[(QuestionCategory, bool)]) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let hits = results.iter().filter(|(_, ok)| *ok).count();
    Some(100.0 * hits as f64 / results.len() as f64)
}

/// [`wasr`] restricted to the given categories.
pub fn wasr_over(results: &[(QuestionCategory, bool)], categories: &[QuestionCategory]) -> Option<f64> {
    let subset: Vec<_> = results
        .iter()
        .copied()
        .filter(|(c, _)| categories.contains(c))
        .collect();
    wasr(&subset)
}

/// Ground-truth answer of a record: its normalized label when present,
/// otherwise whatever can be extracted from the free-form answer.
pub fn ground_truth(record: &QARecord) -> NormalizedAnswer {
    match &record.answer_normalized {
        Some(label) => canonicalize(label),
        None => extract_normalized(&record.answer_freeform),
    }
}

/// Score of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordOutcome {
    pub category: QuestionCategory,
    pub success: bool,
    pub missing: bool,
    pub flagged: bool,
    /// `(pred, gt)` when both sides are comparable numbers.
    pub numeric_pair: Option<(f64, f64)>,
}

pub fn score_record(record: &QARecord, prediction: Option<&Prediction>) -> RecordOutcome {
    let category = record.category;
    let Some(prediction) = prediction else {
        return RecordOutcome {
            category,
            success: false,
            missing: true,
            flagged: false,
            numeric_pair: None,
        };
    };
    let gt = ground_truth(record);
    let pred = prediction
        .normalized
        .clone()
        .unwrap_or_else(|| extract_normalized(&prediction.raw_output));

    let numeric_pair = match (pred.kind, gt.kind, pred.value, gt.value) {
        (AnswerKind::Numeric, AnswerKind::Numeric, Some(p), Some(g)) if units_compatible(pred.unit, gt.unit) => {
            Some((p, g))
        }
        _ => None,
    };
    let success = match SuccessRule::for_category(category) {
        SuccessRule::RelativeTolerance(tol) => numeric_pair.is_some_and(|(p, g)| within_tolerance(p, g, tol)),
        SuccessRule::ExactMatch => answers_equivalent(&pred, &gt),
    };
    RecordOutcome {
        category,
        success,
        missing: false,
        flagged: pred.is_flagged(),
        numeric_pair: if category.is_quantitative() { numeric_pair } else { None },
    }
}

/// Per-record outcomes tagged with their position in the record list.
///
/// Tallies over any partition of the records merge into the same report:
/// every sum is taken in record order when the report is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalTally {
    outcomes: Vec<(usize, RecordOutcome)>,
}

impl EvalTally {
    pub fn push(&mut self, position: usize, outcome: RecordOutcome) {
        self.outcomes.push((position, outcome));
    }

    pub fn merge(mut self, other: EvalTally) -> EvalTally {
        self.outcomes.extend(other.outcomes);
        self
    }

    pub fn into_report(mut self) -> EvalReport {
        self.outcomes.sort_by_key(|(pos, _)| *pos);
        let mut categories: BTreeMap<QuestionCategory, CategoryStats> = QuestionCategory::ALL
            .iter()
            .map(|&c| (c, CategoryStats::default()))
            .collect();
        let mut sq_sums: HashMap<QuestionCategory, f64> = HashMap::new();
        let mut rel_sums: HashMap<QuestionCategory, f64> = HashMap::new();
        let (mut n_missing, mut n_flagged) = (0, 0);

        for (_, o) in &self.outcomes {
            let stats = categories.get_mut(&o.category).expect("all categories present");
            stats.n += 1;
            stats.successes += usize::from(o.success);
            n_missing += usize::from(o.missing);
            n_flagged += usize::from(o.flagged);
            if !o.category.is_quantitative() {
                continue;
            }
            match o.numeric_pair {
                Some((p, g)) => {
                    stats.rmse_pairs += 1;
                    *sq_sums.entry(o.category).or_default() += (p - g) * (p - g);
                    match relative_error(p, g) {
                        Some(r) => {
                            stats.relative_error_pairs += 1;
                            *rel_sums.entry(o.category).or_default() += r;
                        }
                        None => stats.relative_error_undefined += 1,
                    }
                }
                None => stats.rmse_excluded += 1,
            }
        }

        for (category, stats) in categories.iter_mut() {
            stats.success_rate = percentage(stats.successes, stats.n);
            if stats.rmse_pairs > 0 {
                stats.rmse = Some((sq_sums[category] / stats.rmse_pairs as f64).sqrt());
            }
            if stats.relative_error_pairs > 0 {
                stats.mean_relative_error = Some(rel_sums[category] / stats.relative_error_pairs as f64);
            }
        }

        let union = |cats: &[QuestionCategory]| {
            let (hits, n) = cats.iter().fold((0, 0), |(h, n), c| {
                let s = &categories[c];
                (h + s.successes, n + s.n)
            });
            percentage(hits, n)
        };
        use QuestionCategory::*;
        EvalReport {
            count_rmse: categories[&Count].rmse,
            distance_rmse: categories[&Distance].rmse,
            quant: union(&[Count, Distance]),
            qual: union(&[LeftRight, Mcq]),
            s1: union(&QuestionCategory::ALL),
            n_total: self.outcomes.len(),
            n_missing,
            n_flagged,
            categories,
        }
    }
}

fn percentage(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| 100.0 * hits as f64 / n as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub n: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub rmse: Option<f64>,
    pub rmse_pairs: usize,
    /// Missing, flagged or non-numeric predictions left out of the RMSE.
    pub rmse_excluded: usize,
    pub mean_relative_error: Option<f64>,
    pub relative_error_pairs: usize,
    pub relative_error_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: BTreeMap<QuestionCategory, CategoryStats>,
    pub count_rmse: Option<f64>,
    pub distance_rmse: Option<f64>,
    pub quant: Option<f64>,
    pub qual: Option<f64>,
    pub s1: Option<f64>,
    pub n_total: usize,
    pub n_missing: usize,
    pub n_flagged: usize,
}

impl EvalReport {
    pub fn success_rate(&self, category: QuestionCategory) -> Option<f64> {
        self.categories.get(&category).and_then(|s| s.success_rate)
    }

    pub fn n(&self, category: QuestionCategory) -> usize {
        self.categories.get(&category).map_or(0, |s| s.n)
    }

    /// Fixed-width table in the column order Cnt, RMSE, Dist, D-RMSE, LR,
    /// MCQ, Quant, Qual, S1. Undefined values print as `-`.
    pub fn to_table(&self) -> String {
        use QuestionCategory::*;
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let columns = [
            ("Cnt", self.success_rate(Count)),
            ("RMSE", self.count_rmse),
            ("Dist", self.success_rate(Distance)),
            ("D-RMSE", self.distance_rmse),
            ("LR", self.success_rate(LeftRight)),
            ("MCQ", self.success_rate(Mcq)),
            ("Quant", self.quant),
            ("Qual", self.qual),
            ("S1", self.s1),
        ];
        let mut header = String::new();
        let mut values = String::new();
        for (i, (name, v)) in columns.iter().enumerate() {
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(header, "{sep}{name:>8}");
            let _ = write!(values, "{sep}{:>8}", cell(*v));
        }
        format!(
            "{header}\n{values}\nquestions: {} (count {}, distance {}, left_right {}, mcq {}); missing: {}; flagged: {}\n",
            self.n_total,
            self.n(Count),
            self.n(Distance),
            self.n(LeftRight),
            self.n(Mcq),
            self.n_missing,
            self.n_flagged
        )
    }
}

/// Indexes predictions by record id, rejecting duplicates and predictions
/// for records that do not exist.
pub fn index_predictions<'a>(
    records: &[QARecord],
    predictions: &'a [Prediction],
) -> Result<HashMap<&'a str, &'a Prediction>, MetricsError> {
    let mut known = std::collections::HashSet::with_capacity(records.len());
    for r in records {
        if !known.insert(r.record_id.as_str()) {
            return Err(MetricsError::DuplicateRecord(r.record_id.clone()));
        }
    }
    let mut by_id = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains(p.record_id.as_str()) {
            return Err(MetricsError::UnknownRecord(p.record_id.clone()));
        }
        if by_id.insert(p.record_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.record_id.clone()));
        }
    }
    Ok(by_id)
}

/// Tally over a contiguous slice of records starting at `offset`.
pub fn tally(records: &[QARecord], offset: usize, predictions: &HashMap<&str, &Prediction>) -> EvalTally {
    let mut t = EvalTally::default();
    for (i, r) in records.iter().enumerate() {
        t.push(
            offset + i,
            score_record(r, predictions.get(r.record_id.as_str()).copied()),
        );
    }
    t
}

/// Scores every record (in parallel on the current rayon pool) and builds
/// the report. Records without a prediction count as failures.
pub fn evaluate(records: &[QARecord], predictions: &[Prediction]) -> Result<EvalReport, MetricsError> {
    let by_id = index_predictions(records, predictions)?;
    let outcomes: Vec<RecordOutcome> = records
        .par_iter()
        .map(|r| score_record(r, by_id.get(r.record_id.as_str()).copied()))
        .collect();
    let mut t = EvalTally::default();
    for (i, o) in outcomes.into_iter().enumerate() {
        t.push(i, o);
    }
    Ok(t.into_report())
}
