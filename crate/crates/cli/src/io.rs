//! File formats shared by the subcommands: JSONL instances and corpora,
//! CSV trend series, pretty JSON artifacts.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trendcause_core::binning::parse_date;
use trendcause_core::topics::RawDocument;
use trendcause_core::{InstanceRecord, TrendKind, TrendSeries};

use crate::error::{CliError, CliResult};

/// Instance line as stored on disk; dates may be `YYYY`, `YYYY-MM` or full.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceLine {
    pub id: String,
    pub date: String,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentLine {
    pub doc_id: String,
    pub date: String,
    pub tokens: Vec<String>,
}

fn open(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| CliError::input(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::input(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::input(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> CliResult<()> {
    let mut w = BufWriter::new(create(path)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::output(path, e))?;
        writeln!(w, "{line}").map_err(|e| CliError::output(path, e))?;
    }
    w.flush().map_err(|e| CliError::output(path, e))
}

pub fn read_instances(path: &Path) -> CliResult<Vec<InstanceRecord>> {
    read_jsonl::<InstanceLine>(path)?
        .into_iter()
        .enumerate()
        .map(|(n, l)| {
            let date = parse_date(&l.date)
                .map_err(|e| CliError::input(path, format!("record {}: {e}", n + 1)))?;
            Ok(InstanceRecord {
                id: l.id,
                date,
                features: l.features,
                activations: l.activations,
            })
        })
        .collect()
}

pub fn instance_lines(instances: &[InstanceRecord]) -> Vec<InstanceLine> {
    instances
        .iter()
        .map(|r| InstanceLine {
            id: r.id.clone(),
            date: r.date.to_string(),
            features: r.features.clone(),
            activations: r.activations.clone(),
        })
        .collect()
}

pub fn read_corpus(path: &Path) -> CliResult<Vec<RawDocument>> {
    read_jsonl::<DocumentLine>(path)?
        .into_iter()
        .enumerate()
        .map(|(n, l)| {
            let date = parse_date(&l.date)
                .map_err(|e| CliError::input(path, format!("record {}: {e}", n + 1)))?;
            Ok(RawDocument {
                doc_id: l.doc_id,
                date,
                tokens: l.tokens,
            })
        })
        .collect()
}

pub fn document_lines(docs: &[RawDocument]) -> Vec<DocumentLine> {
    docs.iter()
        .map(|d| DocumentLine {
            doc_id: d.doc_id.clone(),
            date: d.date.to_string(),
            tokens: d.tokens.clone(),
        })
        .collect()
}

/// Reads `id,bin_0,...,bin_{T-1}` rows.
pub fn read_series_csv(path: &Path, kind: TrendKind) -> CliResult<Vec<TrendSeries>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| CliError::input(path, e))?.clone();
    let expected = headers.iter().skip(1).enumerate().all(|(i, h)| h == format!("bin_{i}"));
    if headers.get(0) != Some("id") || headers.len() < 2 || !expected {
        return Err(CliError::input(path, "header must be id,bin_0,...,bin_{T-1}"));
    }
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::input(path, format!("row {}: {e}", n + 1)))?;
        let series = TrendSeries::new(&rec[0], kind, values)
            .map_err(|e| CliError::input(path, format!("row {}: {e}", n + 1)))?;
        out.push(series);
    }
    if out.is_empty() {
        return Err(CliError::input(path, "no series"));
    }
    Ok(out)
}

pub fn write_series_csv(path: &Path, series: &[TrendSeries]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let bins = series.first().map_or(0, TrendSeries::len);
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..bins).map(|t| format!("bin_{t}")))
        .collect();
    w.write_record(&header).map_err(|e| CliError::output(path, e))?;
    for s in series {
        let row: Vec<String> = std::iter::once(s.id.clone())
            .chain(s.values.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(|e| CliError::output(path, e))?;
    }
    w.flush().map_err(|e| CliError::output(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::output(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::output(path, e))
}

fn create(path: &Path) -> CliResult<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    }
    fs::File::create(path).map_err(|e| CliError::output(path, e))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
