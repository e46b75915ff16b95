use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use spatial_vqa::baseline::{load_questions, predict_all, save_questions};
use spatial_vqa::dataset::{
    index_scenes, load_predictions, load_records, load_scenes, sample_records, save_predictions, save_records,
    save_scenes, write_jsonl, DatasetError, Prediction,
};
use spatial_vqa::normalize::extract_normalized;
use spatial_vqa::prompt::{enrich_records, suffix_answers, PromptOptions};
use spatial_vqa::synth::{generate_dataset, GenConfig, SynthError};
use spatial_vqa::{metrics, Error};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] Error),
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Library(Error::Synth(SynthError::InvalidConfig(_)))
            | CliError::Library(Error::Dataset(DatasetError::SampleTooLarge { .. })) => 1,
            CliError::Library(_) | CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

macro_rules! library_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Library(e.into())
            }
        }
    )*};
}

library_error!(
    DatasetError,
    spatial_vqa::PromptError,
    spatial_vqa::BaselineError,
    spatial_vqa::MetricsError,
    SynthError
);

/// Refuses to write over any input file.
fn guard_output(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    let Ok(out_real) = out.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().is_ok_and(|p| p == out_real) {
            return Err(CliError::Usage(format!(
                "output {} would overwrite an input file",
                out.display()
            )));
        }
    }
    Ok(())
}

pub fn enrich(
    records: &Path,
    scenes: &Path,
    out: &Path,
    precision: Option<usize>,
    enabled: bool,
    append_suffix: bool,
) -> Result<(), CliError> {
    guard_output(out, &[records, scenes])?;
    let input = load_records(records)?;
    let scenes = index_scenes(load_scenes(scenes)?)?;
    let mut enriched = enrich_records(&input, &scenes, PromptOptions { precision, enabled })?;
    if append_suffix {
        suffix_answers(&mut enriched)?;
    }
    save_records(&enriched, out)?;
    eprintln!(
        "{} {} record(s) -> {}",
        if enabled { "enriched" } else { "copied" },
        enriched.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct NormalizedRow<'a> {
    record_id: &'a str,
    normalized_kind: &'static str,
    normalized_text: String,
}

pub fn normalize(predictions: &Path, out: &Path, flagged_out: Option<&Path>) -> Result<(), CliError> {
    guard_output(out, &[predictions])?;
    if let Some(f) = flagged_out {
        guard_output(f, &[predictions])?;
    }
    let input = load_predictions(predictions)?;
    let answers: Vec<_> = input
        .par_iter()
        .map(|p| {
            p.normalized
                .clone()
                .unwrap_or_else(|| extract_normalized(&p.raw_output))
        })
        .collect();
    let rows: Vec<NormalizedRow> = input
        .iter()
        .zip(&answers)
        .map(|(p, a)| NormalizedRow {
            record_id: &p.record_id,
            normalized_kind: a.kind.as_str(),
            normalized_text: a.label(),
        })
        .collect();
    write_jsonl(&rows, out)?;
    let flagged: Vec<&Prediction> = input
        .iter()
        .zip(&answers)
        .filter(|(_, a)| a.is_flagged())
        .map(|(p, _)| p)
        .collect();
    if let Some(path) = flagged_out {
        write_jsonl(&flagged, path)?;
    }
    eprintln!("normalized {} prediction(s), {} flagged", rows.len(), flagged.len());
    Ok(())
}

pub fn evaluate(records: &Path, predictions: &Path, report: &Path, structured: bool) -> Result<(), CliError> {
    guard_output(report, &[records, predictions])?;
    let records = load_records(records)?;
    let predictions = load_predictions(predictions)?;
    let result = metrics::evaluate(&records, &predictions)?;
    let table = result.to_table();
    let body = if structured {
        let mut json =
            serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(format!("report encoding: {e}")))?;
        json.push('\n');
        json
    } else {
        table.clone()
    };
    fs::write(report, body).map_err(|e| CliError::Io(format!("{}: {e}", report.display())))?;
    eprint!("{table}");
    Ok(())
}

pub fn baseline(questions: &Path, scenes: &Path, out: &Path) -> Result<(), CliError> {
    guard_output(out, &[questions, scenes])?;
    let questions = load_questions(questions)?;
    let scenes = index_scenes(load_scenes(scenes)?)?;
    let predictions = predict_all(&questions, &scenes)?;
    save_predictions(&predictions, out)?;
    eprintln!("answered {} question(s) -> {}", predictions.len(), out.display());
    Ok(())
}

fn parse_mix(mix: &str) -> Result<[f64; 4], CliError> {
    let bad = || CliError::Usage(format!("--mix expects four comma-separated proportions, got `{mix}`"));
    let parts: Vec<f64> = mix
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    parts.try_into().map_err(|_| bad())
}

fn parse_pallets(value: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--pallets expects `N` or `MIN-MAX`, got `{value}`"));
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match value.split_once('-') {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => parse(value).map(|n| (n, n)),
    }
}

pub fn gen_config(seed: u64, mix: &str, shelves: usize, buffers: usize, pallets: &str) -> Result<GenConfig, CliError> {
    let config = GenConfig {
        seed,
        n_shelves: shelves,
        n_buffers: buffers,
        pallets_per_buffer: parse_pallets(pallets)?,
        question_mix: parse_mix(mix)?,
        ..GenConfig::default()
    };
    config.validate()?;
    Ok(config)
}

pub fn generate(config: &GenConfig, n_scenes: usize, n_questions: usize, out_dir: &Path) -> Result<(), CliError> {
    let data = generate_dataset(config, n_scenes, n_questions)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    save_scenes(&data.scenes, &out_dir.join("scenes.jsonl"))?;
    save_records(&data.records, &out_dir.join("records.jsonl"))?;
    save_questions(&data.questions, &out_dir.join("questions.jsonl"))?;
    eprintln!(
        "generated {} scene(s) and {} question(s) in {}",
        data.scenes.len(),
        data.records.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn sample(records: &Path, k: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    guard_output(out, &[records])?;
    let input = load_records(records)?;
    let picked = sample_records(&input, k, seed)?;
    save_records(&picked, out)?;
    eprintln!(
        "sampled {} of {} record(s) -> {}",
        picked.len(),
        input.len(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_parsing() {
        assert_eq!(parse_mix("0.1, 0.2,0.3,0.4").unwrap(), [0.1, 0.2, 0.3, 0.4]);
        assert!(parse_mix("0.5,0.5").is_err());
        assert!(parse_mix("a,b,c,d").is_err());
    }

    #[test]
    fn pallet_ranges() {
        assert_eq!(parse_pallets("3").unwrap(), (3, 3));
        assert_eq!(parse_pallets("1-4").unwrap(), (1, 4));
        assert!(parse_pallets("x").is_err());
    }

    #[test]
    fn invalid_mix_is_a_usage_error() {
        let err = gen_config(0, "0.5,0.5,0.5,0.5", 2, 3, "1-4").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
