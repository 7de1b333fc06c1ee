//! File formats.
//!
//! Prediction sets are read and written as CSV or JSONL:
//!
//! ```text
//! membership,label,p_0,p_1,p_2
//! m,2,0.1,0.2,0.7
//! ```
//!
//! ```text
//! {"membership":"n","label":0,"probs":[1.0,0.0]}
//! ```
//!
//! `membership` is one of `m`, `n`, `u`. A CSV may carry a leading `id`
//! column; JSONL records may carry an `id` key. Floats are written in
//! shortest round-trip form, so save-then-load is bit-exact.
//!
//! Threshold tables, conditional models, risk-score tables and reports are
//! JSON documents mirroring their Rust types. Risk-score tables are also
//! written as CSV with columns `id,label,<metric>,risk_score`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{AuditError, Result};
use crate::metrics::{Membership, MetricKind, PredictionRecord, PredictionSet};
use crate::riskscore::{RiskScoreRow, RiskScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl` / `.ndjson` are JSONL; everything else is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(AuditError::InvalidConfig(format!(
                "unknown format '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Class count to cross-check against the file.
    pub expected_k: Option<usize>,
    pub prob_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            expected_k: None,
            prob_tolerance: crate::metrics::DEFAULT_PROB_TOLERANCE,
        }
    }
}

/// Loads and validates a prediction set; the format follows the file extension
/// unless given.
pub fn load_predictions(
    path: &Path,
    format: Option<Format>,
    options: &LoadOptions,
) -> Result<PredictionSet> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    let file = File::open(path)?;
    let set = read_predictions(BufReader::new(file), format, options)?;
    let counts = set.class_counts();
    log::info!(
        "loaded {} rows from {} ({} members, {} non-members, {} classes observed of {})",
        set.len(),
        path.display(),
        set.count_membership(Membership::Member),
        set.count_membership(Membership::NonMember),
        counts.len(),
        set.num_classes()
    );
    log::debug!("class histogram: {counts:?}");
    Ok(set)
}

pub fn read_predictions<R: Read>(
    reader: R,
    format: Format,
    options: &LoadOptions,
) -> Result<PredictionSet> {
    let (k, records) = match format {
        Format::Csv => read_csv(reader, options)?,
        Format::Jsonl => read_jsonl(BufReader::new(reader), options)?,
    };
    if let Some(expected) = options.expected_k {
        if expected != k {
            return Err(AuditError::ClassCountMismatch { expected, found: k });
        }
    }
    PredictionSet::with_tolerance(k, records, options.prob_tolerance)
}

fn validate_at(record: &PredictionRecord, k: usize, line: u64, tolerance: f64) -> Result<()> {
    let describe = |reason: String| AuditError::InvariantViolation {
        row: line as usize,
        reason: match &record.id {
            Some(id) => format!("(id {id}) {reason}"),
            None => reason,
        },
    };
    if record.probs.len() != k {
        return Err(describe(format!(
            "{} probabilities, expected {k}",
            record.probs.len()
        )));
    }
    record.validate(tolerance).map_err(describe)
}

fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<(usize, Vec<PredictionRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_id = header.first().map(String::as_str) == Some("id");
    let offset = usize::from(has_id);
    let prefix_ok = header.get(offset).map(String::as_str) == Some("membership")
        && header.get(offset + 1).map(String::as_str) == Some("label");
    let k = header.len().saturating_sub(offset + 2);
    let probs_ok = header
        .iter()
        .skip(offset + 2)
        .enumerate()
        .all(|(i, h)| *h == format!("p_{i}"));
    if !prefix_ok || !probs_ok || k < 2 {
        return Err(AuditError::Parse {
            line: 1,
            message: format!(
                "expected header [id,]membership,label,p_0,...,p_{{k-1}} with k >= 2, got '{}'",
                header.join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| AuditError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| AuditError::Parse { line, message };
        if row.len() != header.len() {
            return Err(parse_err(format!(
                "{} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let id = has_id.then(|| row[0].to_string());
        let membership = Membership::from_code(&row[offset])
            .ok_or_else(|| parse_err(format!("membership '{}' is not m/n/u", &row[offset])))?;
        let label: usize = row[offset + 1]
            .parse()
            .map_err(|_| parse_err(format!("label '{}' is not a class index", &row[offset + 1])))?;
        let probs = (offset + 2..row.len())
            .map(|i| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("'{}' is not a number", &row[i])))
            })
            .collect::<Result<Vec<f64>>>()?;
        let record = PredictionRecord {
            id,
            membership,
            label,
            probs,
        };
        validate_at(&record, k, line, options.prob_tolerance)?;
        records.push(record);
    }
    Ok((k, records))
}

fn read_jsonl<R: BufRead>(
    reader: R,
    options: &LoadOptions,
) -> Result<(usize, Vec<PredictionRecord>)> {
    let mut k = options.expected_k;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| AuditError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let k = *k.get_or_insert(record.probs.len());
        validate_at(&record, k, line_no, options.prob_tolerance)?;
        records.push(record);
    }
    let k = k.ok_or(AuditError::EmptySet)?;
    Ok((k, records))
}

pub fn write_predictions<W: Write>(set: &PredictionSet, writer: W, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let has_id = set.iter().any(|r| r.id.is_some());
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(writer);
            let mut header: Vec<String> = Vec::new();
            if has_id {
                header.push("id".into());
            }
            header.push("membership".into());
            header.push("label".into());
            header.extend((0..set.num_classes()).map(|i| format!("p_{i}")));
            w.write_record(&header)?;
            for r in set {
                let mut fields: Vec<String> = Vec::with_capacity(header.len());
                if has_id {
                    fields.push(r.id.clone().unwrap_or_default());
                }
                fields.push(r.membership.code().to_string());
                fields.push(r.label.to_string());
                fields.extend(r.probs.iter().map(|p| p.to_string()));
                w.write_record(&fields)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut w = BufWriter::new(writer);
            for r in set {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn save_predictions(set: &PredictionSet, path: &Path, format: Option<Format>) -> Result<()> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    write_predictions(set, File::create(path)?, format)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_scores_csv<W: Write>(table: &RiskScoreTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["id", "label", table.metric.short_name(), "risk_score"])?;
    for row in &table.rows {
        w.write_record([
            row.id.clone(),
            row.label.to_string(),
            row.value.to_string(),
            row.risk_score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn scores_csv_string(table: &RiskScoreTable) -> Result<String> {
    let mut buf = Vec::new();
    write_scores_csv(table, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Reads a risk-score CSV. The prior is not stored in the CSV and must be supplied.
pub fn read_scores_csv<R: Read>(reader: R, p_train: f64) -> Result<RiskScoreTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() != 4 || header[0] != "id" || header[1] != "label" || header[3] != "risk_score" {
        return Err(AuditError::Parse {
            line: 1,
            message: format!(
                "expected header id,label,<metric>,risk_score, got '{}'",
                header.join(",")
            ),
        });
    }
    let metric: MetricKind = header[2].parse().map_err(|_| AuditError::Parse {
        line: 1,
        message: format!("unknown metric column '{}'", header[2]),
    })?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| AuditError::Parse {
                line,
                message: format!("'{}' is not a number", &row[i]),
            })
        };
        let risk_score = num(3)?;
        if !(0.0..=1.0).contains(&risk_score) {
            return Err(AuditError::InvariantViolation {
                row: line as usize,
                reason: format!("risk score {risk_score} outside [0, 1]"),
            });
        }
        rows.push(RiskScoreRow {
            id: row[0].to_string(),
            label: row[1].parse().map_err(|_| AuditError::Parse {
                line,
                message: format!("label '{}' is not a class index", &row[1]),
            })?,
            value: num(2)?,
            risk_score,
        });
    }
    Ok(RiskScoreTable {
        metric,
        p_train,
        rows,
    })
}

/// Membership tags of a set, in record order.
pub fn membership_tags(set: &PredictionSet) -> Vec<Membership> {
    set.iter().map(|r| r.membership).collect()
}

/// Class histogram as `class:count` pairs, for diagnostics.
pub fn describe_classes(counts: &BTreeMap<usize, usize>) -> String {
    counts
        .iter()
        .map(|(c, n)| format!("{c}:{n}"))
        .collect::<Vec<_>>()
        .join(" ")
}
