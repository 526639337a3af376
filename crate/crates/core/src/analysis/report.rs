//! Report emission: CSV/JSON aggregate tables and plot-ready scatter
//! data. All floats are written with 6 significant digits so repeated
//! runs produce byte-identical artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AggregateRow, Dimension};
use crate::error::{Error, Result};
use crate::fsutil;

/// Round to 6 significant digits (exact for zero and non-finite input).
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().expect("scientific notation round-trip")
}

/// Shortest decimal form of the 6-significant-digit rounding.
pub fn fmt_sig(v: f64) -> String {
    format!("{}", round_sig(v))
}

const CSV_HEADER: [&str; 7] =
    ["group_dimension", "group_value", "mean", "std_error", "ci_low", "ci_high", "n"];

pub fn write_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("aggregate rows".into()));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        writer
            .write_record([
                row.dimension.as_str(),
                &row.value,
                &fmt_sig(row.mean),
                &fmt_sig(row.std_error),
                &fmt_sig(row.ci95_low),
                &fmt_sig(row.ci95_high),
                &row.n_cells.to_string(),
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv write: {e}"))
}

pub fn read_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let parse_err = |message: String| Error::Parse {
        context: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?;
        if headers != CSV_HEADER.as_slice() {
            return Err(parse_err(format!("unexpected header {headers:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| parse_err(format!("row {i}: missing column {idx}")))
        };
        let float = |idx: usize| -> Result<f64> {
            field(idx)?
                .parse()
                .map_err(|e| parse_err(format!("row {i}: bad float in column {idx}: {e}")))
        };
        let raw_dimension = field(0)?;
        let dimension = Dimension::parse(raw_dimension)
            .ok_or_else(|| parse_err(format!("row {i}: unknown dimension {raw_dimension}")))?;
        rows.push(AggregateRow {
            dimension,
            value: field(1)?.to_string(),
            mean: float(2)?,
            std_error: float(3)?,
            ci95_low: float(4)?,
            ci95_high: float(5)?,
            n_cells: field(6)?
                .parse()
                .map_err(|e| parse_err(format!("row {i}: bad count: {e}")))?,
        });
    }
    Ok(rows)
}

/// JSON mirror of the CSV table, with the same 6-digit rounding.
pub fn write_json(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("aggregate rows".into()));
    }
    let rounded: Vec<AggregateRow> = rows
        .iter()
        .map(|r| AggregateRow {
            dimension: r.dimension,
            value: r.value.clone(),
            mean: round_sig(r.mean),
            std_error: round_sig(r.std_error),
            ci95_low: round_sig(r.ci95_low),
            ci95_high: round_sig(r.ci95_high),
            n_cells: r.n_cells,
        })
        .collect();
    let bytes = serde_json::to_vec_pretty(&rounded)
        .map_err(|e| Error::Internal(format!("serialize rows: {e}")))?;
    fsutil::write_atomic(path, &bytes)
}

/// One scatter point behind a persona-vs-score plot, keyed by topic
/// category for the series split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgPoint {
    pub persona: String,
    pub topic_category: String,
    pub score: f64,
}

pub fn write_svg_data(path: &Path, points: &[SvgPoint]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput("scatter points".into()));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["persona", "topic_category", "score"]).map_err(csv_err)?;
    for p in points {
        writer
            .write_record([p.persona.as_str(), &p.topic_category, &fmt_sig(p.score)])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}
