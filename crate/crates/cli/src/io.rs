//! Dataset file formats.
//!
//! CSV: header row required, columns `y` (0/1), `score` (decimal in [0, 1])
//! and optional feature columns `f0..f{d-1}` (prefix configurable). JSONL:
//! one object per line with keys `y`, `score` and an optional `features`
//! array. Scores are written with the shortest representation that parses
//! back to the same bits, so a save/load round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use regretcal_core::binning::CalibrationCurve;
use regretcal_core::dataset::{ScoredDataset, ScoredSample};
use serde::Deserialize;
use thiserror::Error;

use crate::error::AppError;

#[derive(Debug, Error, PartialEq)]
pub enum LoadError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("row {0}: malformed row")]
    MalformedRow(u64),
    #[error("row {row}: score {score} is outside [0, 1]")]
    ScoreOutOfRange { row: u64, score: f64 },
    #[error("row {row}: label '{value}' is not 0 or 1")]
    LabelNotBinary { row: u64, value: String },
    #[error("row {0}: feature count differs from the header")]
    InconsistentFeatureDim(u64),
    #[error("unsupported file extension; expected .csv or .jsonl")]
    UnsupportedExtension,
}

impl From<LoadError> for AppError {
    fn from(e: LoadError) -> Self {
        AppError::data(e.to_string())
    }
}

/// Load a dataset by extension (`.csv` or `.jsonl`).
pub fn load_dataset(path: &Path, feature_prefix: &str) -> Result<ScoredDataset, AppError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_csv(path, feature_prefix),
        Some("jsonl") | Some("ndjson") => load_jsonl(path),
        _ => Err(LoadError::UnsupportedExtension.into()),
    }
}

fn parse_label(raw: &str, row: u64) -> Result<bool, LoadError> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(LoadError::LabelNotBinary {
            row,
            value: other.to_string(),
        }),
    }
}

pub fn load_csv(path: &Path, feature_prefix: &str) -> Result<ScoredDataset, AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();

    let find = |name: &str| headers.iter().position(|h| h == name);
    let y_col = find("y").ok_or_else(|| LoadError::MissingColumn("y".into()))?;
    let score_col = find("score").ok_or_else(|| LoadError::MissingColumn("score".into()))?;

    // Feature columns: prefix followed by an integer index, used in index
    // order. The dimension is however many matched.
    let mut feature_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            let rest = h.strip_prefix(feature_prefix)?;
            let idx: usize = rest.parse().ok()?;
            Some((idx, col))
        })
        .collect();
    feature_cols.sort_unstable();

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i as u64 + 1;
        let get = |col: usize| record.get(col).ok_or(LoadError::MalformedRow(row));
        let label = parse_label(get(y_col)?, row)?;
        let score: f64 = get(score_col)?
            .trim()
            .parse()
            .map_err(|_| LoadError::MalformedRow(row))?;
        if !(0.0..=1.0).contains(&score) || !score.is_finite() {
            return Err(LoadError::ScoreOutOfRange { row, score }.into());
        }
        let mut features = Vec::with_capacity(feature_cols.len());
        for &(_, col) in &feature_cols {
            let raw = record
                .get(col)
                .ok_or(LoadError::InconsistentFeatureDim(row))?;
            let value: f64 = raw
                .trim()
                .parse()
                .map_err(|_| LoadError::MalformedRow(row))?;
            features.push(value);
        }
        samples.push(ScoredSample::with_features(score, label, features));
    }
    Ok(ScoredDataset::new(samples)?)
}

#[derive(Deserialize)]
struct JsonlRow {
    y: f64,
    score: f64,
    #[serde(default)]
    features: Option<Vec<f64>>,
}

pub fn load_jsonl(path: &Path) -> Result<ScoredDataset, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let row_number = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: JsonlRow =
            serde_json::from_str(raw).map_err(|_| LoadError::MalformedRow(row_number))?;
        let label = if row.y == 0.0 {
            false
        } else if row.y == 1.0 {
            true
        } else {
            return Err(LoadError::LabelNotBinary {
                row: row_number,
                value: row.y.to_string(),
            }
            .into());
        };
        if !(0.0..=1.0).contains(&row.score) || !row.score.is_finite() {
            return Err(LoadError::ScoreOutOfRange {
                row: row_number,
                score: row.score,
            }
            .into());
        }
        samples.push(ScoredSample::with_features(
            row.score,
            label,
            row.features.unwrap_or_default(),
        ));
    }
    Ok(ScoredDataset::new(samples)?)
}

/// `{}` formatting of an f64 is the shortest string that parses back to the
/// same value, which is what keeps round trips exact.
fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn save_csv(ds: &ScoredDataset, path: &Path, feature_prefix: &str) -> Result<(), AppError> {
    let mut out = String::new();
    out.push_str("y,score");
    for d in 0..ds.feature_dim() {
        let _ = write!(out, ",{feature_prefix}{d}");
    }
    out.push('\n');
    for s in ds.samples() {
        let _ = write!(out, "{},{}", u8::from(s.label), fmt_f64(s.score));
        for x in &s.features {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_jsonl(ds: &ScoredDataset, path: &Path) -> Result<(), AppError> {
    let mut out = String::new();
    for s in ds.samples() {
        let features = if s.features.is_empty() {
            String::new()
        } else {
            let inner: Vec<String> = s.features.iter().map(|x| fmt_f64(*x)).collect();
            format!(",\"features\":[{}]", inner.join(","))
        };
        let _ = writeln!(
            out,
            "{{\"y\":{},\"score\":{}{features}}}",
            u8::from(s.label),
            fmt_f64(s.score)
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-bin calibration table: `bin,lo,hi,mass,mean_score,mean_label`.
pub fn write_bins_csv(curve: &CalibrationCurve, path: &Path) -> Result<(), AppError> {
    let mut out = String::from("bin,lo,hi,mass,mean_score,mean_label\n");
    for (i, bin) in curve.bins().iter().enumerate() {
        let mean_score = bin.mean_score.map(fmt_f64).unwrap_or_default();
        let mean_label = bin.mean_label().map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{i},{},{},{},{mean_score},{mean_label}",
            fmt_f64(bin.lo),
            fmt_f64(bin.hi),
            bin.mass
        );
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, ext: &str) -> tempfile::TempPath {
        let mut file = tempfile::Builder::new()
            .suffix(&format!(".{ext}"))
            .tempfile()
            .unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file.into_temp_path()
    }

    #[test]
    fn minimal_csv_loads() {
        let path = write_temp("y,score\n1,0.8\n0,0.2\n", "csv");
        let ds = load_dataset(&path, "f").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_dim(), 0);
        assert_eq!(ds.scores(), vec![0.8, 0.2]);
    }

    #[test]
    fn feature_columns_matched_by_prefix() {
        let path = write_temp(
            "y,score,f0,f1\n1,0.8,0.1,0.2\n0,0.2,0.3,0.4\n1,0.5,0.5,0.6\n",
            "csv",
        );
        let ds = load_dataset(&path, "f").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.samples()[0].features, vec![0.1, 0.2]);
    }

    #[test]
    fn score_out_of_range_reports_line() {
        let path = write_temp("y,score\n1,0.8\n0,1.3\n", "csv");
        let err = load_dataset(&path, "f").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn non_binary_label_reports_line() {
        let path = write_temp("y,score\n2,0.8\n", "csv");
        let err = load_dataset(&path, "f").unwrap_err();
        assert!(err.to_string().contains("not 0 or 1"), "{err}");
    }

    #[test]
    fn missing_score_column_is_named() {
        let path = write_temp("y,prob\n1,0.8\n", "csv");
        let err = load_dataset(&path, "f").unwrap_err();
        assert!(err.to_string().contains("'score'"), "{err}");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let samples = vec![
            ScoredSample::with_features(0.1234567890123456789, true, vec![1.5, -2.25]),
            ScoredSample::with_features(1.0 / 3.0, false, vec![0.0, 1e-17]),
            ScoredSample::with_features(f64::MIN_POSITIVE, true, vec![3.0, 4.0]),
        ];
        let ds = ScoredDataset::new(samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        save_csv(&ds, &path, "f").unwrap();
        let reloaded = load_dataset(&path, "f").unwrap();
        for (a, b) in ds.samples().iter().zip(reloaded.samples()) {
            assert_eq!(a.score.to_bits(), b.score.to_bits());
            assert_eq!(a.label, b.label);
            assert_eq!(a.features, b.features);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let samples = vec![
            ScoredSample::with_features(0.25, true, vec![7.0]),
            ScoredSample::with_features(0.75, false, vec![-1.0]),
        ];
        let ds = ScoredDataset::new(samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        save_jsonl(&ds, &path).unwrap();
        let reloaded = load_dataset(&path, "f").unwrap();
        assert_eq!(ds, reloaded);
    }

    #[test]
    fn jsonl_rejects_fractional_label() {
        let path = write_temp("{\"y\":0.5,\"score\":0.5}\n", "jsonl");
        let err = load_dataset(&path, "f").unwrap_err();
        assert!(err.to_string().contains("not 0 or 1"));
    }
}
