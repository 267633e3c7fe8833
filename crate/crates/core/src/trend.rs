//! Popularity trend series for styles and topics.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::binning::DateBinning;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendKind {
    Style,
    Topic,
}

/// One evenly binned popularity series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub id: String,
    pub kind: TrendKind,
    pub values: Vec<f64>,
}

impl TrendSeries {
    pub fn new(id: impl Into<String>, kind: TrendKind, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "series '{id}' holds {v}; trend values must be finite and nonnegative"
            )));
        }
        Ok(Self { id, kind, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A family of trend series over one binning, with a flag for every bin
/// that received no observations (all series are zero there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSet {
    pub series: Vec<TrendSeries>,
    pub empty_bins: Vec<bool>,
}

impl TrendSet {
    /// Copy of the series with flagged bins filled by linear interpolation
    /// between the nearest observed neighbours (edges repeat the nearest value).
    pub fn interpolated(&self) -> Vec<TrendSeries> {
        self.series
            .iter()
            .map(|s| TrendSeries {
                id: s.id.clone(),
                kind: s.kind,
                values: interpolate_flagged(&s.values, &self.empty_bins),
            })
            .collect()
    }
}

pub fn interpolate_flagged(values: &[f64], flagged: &[bool]) -> Vec<f64> {
    let known: Vec<usize> = (0..values.len()).filter(|&t| !flagged[t]).collect();
    if known.is_empty() {
        return values.to_vec();
    }
    (0..values.len())
        .map(|t| {
            if !flagged[t] {
                return values[t];
            }
            let after = known.partition_point(|&k| k < t);
            match (after.checked_sub(1).map(|i| known[i]), known.get(after)) {
                (Some(a), Some(&b)) => {
                    let w = (t - a) as f64 / (b - a) as f64;
                    values[a] * (1.0 - w) + values[b] * w
                }
                (Some(a), None) => values[a],
                (None, Some(&b)) => values[b],
                (None, None) => unreachable!(),
            }
        })
        .collect()
}

/// One clothing instance as ingested from upstream feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub date: NaiveDate,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleAssignment {
    pub instance_id: String,
    pub style_id: String,
}

/// Fraction of each bin's assigned instances that belong to each style.
///
/// Series come out sorted by style id. Instances without an assignment do
/// not count toward any bin.
pub fn style_trends(
    assignments: &[StyleAssignment],
    instances: &[InstanceRecord],
    binning: &DateBinning,
) -> Result<TrendSet> {
    let dates: HashMap<&str, NaiveDate> =
        instances.iter().map(|r| (r.id.as_str(), r.date)).collect();
    let mut seen: HashMap<&str, &str> = HashMap::new();
    let mut counts: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    let mut totals = vec![0u64; binning.bin_count];
    for a in assignments {
        let date = dates
            .get(a.instance_id.as_str())
            .ok_or_else(|| Error::UnknownId(a.instance_id.clone()))?;
        if let Some(prev) = seen.insert(&a.instance_id, &a.style_id) {
            if prev != a.style_id {
                return Err(Error::InvalidParameter(format!(
                    "instance '{}' assigned to both '{prev}' and '{}'",
                    a.instance_id, a.style_id
                )));
            }
            continue;
        }
        let t = binning.bin_of(*date)?;
        counts
            .entry(&a.style_id)
            .or_insert_with(|| vec![0; binning.bin_count])[t] += 1;
        totals[t] += 1;
    }
    let series = counts
        .into_iter()
        .map(|(id, c)| TrendSeries {
            id: id.to_string(),
            kind: TrendKind::Style,
            values: c
                .iter()
                .zip(&totals)
                .map(|(&n, &tot)| if tot == 0 { 0.0 } else { n as f64 / tot as f64 })
                .collect(),
        })
        .collect();
    Ok(TrendSet {
        series,
        empty_bins: totals.iter().map(|&n| n == 0).collect(),
    })
}

/// Normalized topic mass per bin from per-document topic distributions.
/// Series ids are `topic_{l}`.
pub fn topic_trends(
    doc_topics: &[Vec<f64>],
    doc_dates: &[NaiveDate],
    binning: &DateBinning,
) -> Result<TrendSet> {
    if doc_topics.len() != doc_dates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} topic rows vs {} dates",
            doc_topics.len(),
            doc_dates.len()
        )));
    }
    let k = doc_topics.first().map_or(0, Vec::len);
    let mut mass = vec![vec![0.0; binning.bin_count]; k];
    let mut docs_in_bin = vec![0usize; binning.bin_count];
    for (j, (theta, date)) in doc_topics.iter().zip(doc_dates).enumerate() {
        if theta.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "document {j} has {} topics, expected {k}",
                theta.len()
            )));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || theta.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "document {j} topic distribution is not a probability vector (sum {sum})"
            )));
        }
        let t = binning.bin_of(*date)?;
        docs_in_bin[t] += 1;
        for (l, &p) in theta.iter().enumerate() {
            mass[l][t] += p;
        }
    }
    let bin_totals: Vec<f64> = (0..binning.bin_count)
        .map(|t| mass.iter().map(|row| row[t]).sum())
        .collect();
    let series = mass
        .into_iter()
        .enumerate()
        .map(|(l, row)| TrendSeries {
            id: format!("topic_{l}"),
            kind: TrendKind::Topic,
            values: row
                .iter()
                .zip(&bin_totals)
                .map(|(&m, &tot)| if tot > 0.0 { m / tot } else { 0.0 })
                .collect(),
        })
        .collect();
    Ok(TrendSet {
        series,
        empty_bins: docs_in_bin.iter().map(|&n| n == 0).collect(),
    })
}
