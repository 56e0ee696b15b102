use std::path::Path;

use crate::measures::ScoreVector;
use crate::{Error, Result};

pub const SCORES_HEADER: [&str; 7] = ["id", "fill", "compression", "fft", "vae", "combined", "combined_eq"];

/// One row of the scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub scores: ScoreVector,
    pub combined: Option<f64>,
    pub combined_eq: Option<f64>,
}

impl ScoreRow {
    pub fn new(scores: ScoreVector) -> Self {
        ScoreRow {
            scores,
            combined: None,
            combined_eq: None,
        }
    }
}

fn fixed(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Header plus one row per shape, 6-decimal fixed point, absent values empty.
pub fn scores_csv_bytes(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SCORES_HEADER)?;
    for r in rows {
        let s = &r.scores;
        w.write_record([
            s.id.clone(),
            fixed(Some(s.fill)),
            fixed(Some(s.compression)),
            fixed(Some(s.fft)),
            fixed(s.vae),
            fixed(r.combined),
            fixed(r.combined_eq),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Contract(format!("csv buffer: {e}")))
}

pub fn write_scores_csv(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scores_csv_bytes(rows)?).map_err(|e| Error::io(path, e))
}

pub fn parse_scores_csv(data: &[u8]) -> Result<Vec<ScoreRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != SCORES_HEADER {
        return Err(Error::Parameter(format!(
            "scores CSV header is {header:?}, expected {}",
            SCORES_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<Option<f64>> {
            let f = rec.get(i).unwrap_or("").trim();
            if f.is_empty() {
                return Ok(None);
            }
            f.parse().map(Some).map_err(|_| {
                Error::Parameter(format!("row {}: column `{}` is not a number: `{f}`", line + 2, SCORES_HEADER[i]))
            })
        };
        let required = |i: usize| -> Result<f64> {
            field(i)?.ok_or_else(|| Error::Parameter(format!("row {}: column `{}` is empty", line + 2, SCORES_HEADER[i])))
        };
        rows.push(ScoreRow {
            scores: ScoreVector {
                id: rec.get(0).unwrap_or("").to_owned(),
                fill: required(1)?,
                compression: required(2)?,
                fft: required(3)?,
                vae: field(4)?,
            },
            combined: field(5)?,
            combined_eq: field(6)?,
        });
    }
    Ok(rows)
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    parse_scores_csv(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
