//! Answer extraction and canonicalization.
//!
//! [`Normalizer::extract`] turns free-form model output into a short
//! canonical answer in three steps:
//!
//! 1. If the output contains the marker `In short, the normalized answer is`
//!    (comma optional, any case), everything after its last occurrence is
//!    cleaned and canonicalized. Nothing earlier in the text is consulted.
//! 2. Otherwise the output is scanned for spatial cues (`left`, `right`, or a
//!    number with an optional length unit) and the last cue wins. Region
//!    references such as `[Region 3]` are skipped so their indices never
//!    pass for counts. A bare short answer (`Four`, `Region 14`, `4.0`) is
//!    taken as-is.
//! 3. Anything else is returned as [`AnswerKind::Flagged`] for manual review.
//!
//! [`canonicalize`] maps equivalent surface forms onto one value: `Four`,
//! `4` and `4.0` all compare equal.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const MARKER: &str = "In short, the normalized answer is";

static MARKER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)in\s+short\s*,?\s+the\s+normalized\s+answer\s+is").unwrap());

static CHOICE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^region\s*#?\s*(\d+)$").unwrap());

static NUMERIC_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(-?(?:\d+(?:\.\d*)?|\.\d+))\s*(m|meters?|metres?|px|pixels?)?$").unwrap());

static WORD_NUMERIC_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([a-z][a-z -]*?)(?:\s+(m|meters?|metres?|px|pixels?))?$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Direction,
    Numeric,
    Choice,
    Raw,
    Flagged,
}

impl AnswerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerKind::Direction => "direction",
            AnswerKind::Numeric => "numeric",
            AnswerKind::Choice => "choice",
            AnswerKind::Raw => "raw",
            AnswerKind::Flagged => "flagged",
        }
    }
}

impl fmt::Display for AnswerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

/// Unit attached to a numeric answer. Pixel distances come only from the
/// geometric baseline and never match metric ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Meters,
    Pixels,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Meters => "meters",
            Unit::Pixels => "pixels",
        }
    }

    fn parse(token: &str) -> Option<Unit> {
        match token {
            "m" | "meter" | "meters" | "metre" | "metres" => Some(Unit::Meters),
            "px" | "pixel" | "pixels" => Some(Unit::Pixels),
            _ => None,
        }
    }
}

/// Whether two optional units may be compared. A missing unit is read as the
/// dataset's implicit metric unit, so it pairs with meters but not pixels.
pub fn units_compatible(a: Option<Unit>, b: Option<Unit>) -> bool {
    match (a, b) {
        (Some(Unit::Pixels), Some(Unit::Pixels)) => true,
        (Some(Unit::Pixels), _) | (_, Some(Unit::Pixels)) => false,
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAnswer {
    pub kind: AnswerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Unit>,
    pub text: String,
}

impl NormalizedAnswer {
    pub fn direction(direction: Direction) -> Self {
        Self {
            kind: AnswerKind::Direction,
            direction: Some(direction),
            value: None,
            unit: None,
            text: direction.as_str().to_string(),
        }
    }

    /// Panics if `value` is not finite.
    pub fn numeric(value: f64, unit: Option<Unit>) -> Self {
        assert!(value.is_finite(), "numeric answers must be finite");
        Self {
            kind: AnswerKind::Numeric,
            direction: None,
            value: Some(value + 0.0),
            unit,
            text: format_number(value),
        }
    }

    pub fn choice(region: usize) -> Self {
        Self {
            kind: AnswerKind::Choice,
            direction: None,
            value: None,
            unit: None,
            text: format!("region {region}"),
        }
    }

    pub fn raw(text: impl Into<String>) -> Self {
        Self {
            kind: AnswerKind::Raw,
            direction: None,
            value: None,
            unit: None,
            text: text.into(),
        }
    }

    pub fn flagged(text: impl Into<String>) -> Self {
        Self {
            kind: AnswerKind::Flagged,
            direction: None,
            value: None,
            unit: None,
            text: text.into(),
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.kind == AnswerKind::Flagged
    }

    /// Region index of a choice answer.
    pub fn choice_region(&self) -> Option<usize> {
        if self.kind != AnswerKind::Choice {
            return None;
        }
        self.text.strip_prefix("region ")?.parse().ok()
    }

    /// Short answer string that re-normalizes to this value: the canonical
    /// text, followed by the unit for numeric answers that carry one.
    pub fn label(&self) -> String {
        match (self.kind, self.unit) {
            (AnswerKind::Numeric, Some(unit)) => format!("{} {}", self.text, unit.as_str()),
            _ => self.text.clone(),
        }
    }
}

impl fmt::Display for NormalizedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Shortest round-tripping decimal form, with integral values printed
/// without a fractional part (`4.0` -> `4`).
pub fn format_number(value: f64) -> String {
    // `+ 0.0` folds negative zero into zero.
    format!("{}", value + 0.0)
}

fn is_strip_char(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '.' | ','
                | ';'
                | ':'
                | '!'
                | '?'
                | '"'
                | '\''
                | '`'
                | '*'
                | '('
                | ')'
                | '['
                | ']'
                | '{'
                | '}'
                | '<'
                | '>'
                | '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{201E}'
                | '\u{00AB}'
                | '\u{00BB}'
        )
}

/// Lowercase, collapse internal whitespace and trim surrounding punctuation
/// and quote marks.
pub fn clean(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(is_strip_char).to_string()
}

fn small_number(word: &str) -> Option<u32> {
    const WORDS: [&str; 20] = [
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
    ];
    WORDS.iter().position(|w| *w == word).map(|i| i as u32)
}

fn tens_number(word: &str) -> Option<u32> {
    const TENS: [&str; 8] = [
        "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    TENS.iter().position(|w| *w == word).map(|i| (i as u32 + 2) * 10)
}

/// English number words from zero to one hundred, including hyphenated or
/// spaced compounds (`twenty-one`, `twenty one`).
pub fn parse_number_words(text: &str) -> Option<u32> {
    let tokens: Vec<&str> = text
        .split(|c: char| c == '-' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    match tokens.as_slice() {
        [one] => small_number(one)
            .or_else(|| tens_number(one))
            .or_else(|| (*one == "hundred").then_some(100)),
        [tens, unit] => {
            if matches!(*tens, "one" | "a") && *unit == "hundred" {
                return Some(100);
            }
            let t = tens_number(tens)?;
            let u = small_number(unit).filter(|u| (1..=9).contains(u))?;
            Some(t + u)
        }
        _ => None,
    }
}

/// Canonical form of an already marker-stripped short answer.
pub fn canonicalize(text: &str) -> NormalizedAnswer {
    let cleaned = clean(text);
    match cleaned.as_str() {
        "left" => return NormalizedAnswer::direction(Direction::Left),
        "right" => return NormalizedAnswer::direction(Direction::Right),
        _ => {}
    }
    if let Some(caps) = CHOICE_RE.captures(&cleaned) {
        if let Ok(region) = caps[1].parse::<usize>() {
            return NormalizedAnswer::choice(region);
        }
    }
    if let Some(caps) = NUMERIC_RE.captures(&cleaned) {
        if let Ok(value) = caps[1].parse::<f64>() {
            if value.is_finite() {
                let unit = caps.get(2).and_then(|m| Unit::parse(m.as_str()));
                return NormalizedAnswer::numeric(value, unit);
            }
        }
    }
    if let Some(caps) = WORD_NUMERIC_RE.captures(&cleaned) {
        if let Some(value) = parse_number_words(&caps[1]) {
            let unit = caps.get(2).and_then(|m| Unit::parse(m.as_str()));
            return NormalizedAnswer::numeric(f64::from(value), unit);
        }
    }
    NormalizedAnswer::raw(cleaned)
}

/// Equivalence used for scoring: same kind and same canonical value.
/// Numbers compare by parsed value (with compatible units); flagged answers
/// never match anything, themselves included.
pub fn answers_equivalent(a: &NormalizedAnswer, b: &NormalizedAnswer) -> bool {
    if a.is_flagged() || b.is_flagged() || a.kind != b.kind {
        return false;
    }
    match a.kind {
        AnswerKind::Numeric => a.value == b.value && units_compatible(a.unit, b.unit),
        AnswerKind::Direction => a.direction == b.direction,
        _ => a.text == b.text,
    }
}

/// Answer extractor. The default cue set is `left`, `right` and numbers with
/// an optional length unit; extra relation words can be added with
/// [`Normalizer::with_relation_cues`] and come back as raw answers.
#[derive(Debug, Clone)]
pub struct Normalizer {
    cue_re: Regex,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::with_relation_cues(&[])
    }
}

impl Normalizer {
    pub fn with_relation_cues(extra: &[&str]) -> Self {
        let mut relations = vec!["left".to_string(), "right".to_string()];
        relations.extend(extra.iter().map(|w| regex::escape(&w.to_lowercase())));
        // Region references come first in the alternation so their digits are
        // consumed before the number arm can see them.
        let pattern = format!(
            r"(?P<region>\bregion\s*#?\s*\d+)|\b(?P<rel>{})\b|(?P<num>\b(?:\d+(?:\.\d+)?|\.\d+)(?:\s*(?:m|meters?|metres?|px|pixels?)\b)?)",
            relations.join("|")
        );
        Self {
            cue_re: Regex::new(&pattern).expect("cue pattern is valid"),
        }
    }

    pub fn extract(&self, raw: &str) -> NormalizedAnswer {
        if let Some(tail) = after_last_marker(raw) {
            let answer = canonicalize(tail);
            if answer.kind == AnswerKind::Raw && answer.text.is_empty() {
                return NormalizedAnswer::flagged(raw.trim().to_lowercase());
            }
            return answer;
        }

        let whole = canonicalize(raw);
        if !matches!(whole.kind, AnswerKind::Raw | AnswerKind::Flagged) {
            return whole;
        }

        let lowered = raw.to_lowercase();
        let last_cue = self
            .cue_re
            .captures_iter(&lowered)
            .filter(|caps| caps.name("region").is_none())
            .last();
        match last_cue {
            Some(caps) => {
                let cue = caps.get(0).map_or("", |m| m.as_str());
                canonicalize(cue)
            }
            None => NormalizedAnswer::flagged(raw.trim().to_lowercase()),
        }
    }
}

fn after_last_marker(raw: &str) -> Option<&str> {
    MARKER_RE.find_iter(raw).last().map(|m| &raw[m.end()..])
}

/// Extract with the default cue set.
pub fn extract_normalized(raw: &str) -> NormalizedAnswer {
    static DEFAULT: LazyLock<Normalizer> = LazyLock::new(Normalizer::default);
    DEFAULT.extract(raw)
}
