//! Timelines of iconic styles per era, linked to their influencing topics
//! and to the documents that best represent those topics at the time.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::binning::DateBinning;
use crate::error::{Error, Result};
use crate::topics::{top_words, TopicModel};
use crate::trend::TrendSeries;

/// Share of a style's total popularity that falls in each bin.
pub fn lift_index(style: &TrendSeries) -> Result<Vec<f64>> {
    let total: f64 = style.values.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::StyleNeverObserved(style.id.clone()));
    }
    Ok(style.values.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconicStyle {
    pub style_id: String,
    pub lift: f64,
}

/// Top `k` styles by lift at `bin`, ties by style id. Styles never observed
/// or too short to cover `bin` are skipped.
pub fn iconic_styles(styles: &[TrendSeries], bin: usize, k: usize) -> Vec<IconicStyle> {
    let mut ranked: Vec<IconicStyle> = styles
        .iter()
        .filter(|s| bin < s.len())
        .filter_map(|s| {
            lift_index(s).ok().map(|l| IconicStyle {
                style_id: s.id.clone(),
                lift: l[bin],
            })
        })
        .collect();
    ranked.sort_by(|a, b| b.lift.total_cmp(&a.lift).then_with(|| a.style_id.cmp(&b.style_id)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedEvent {
    pub doc_id: String,
    pub date: NaiveDate,
    pub score: f64,
}

/// The `n` documents dated in `bin` with the highest probability of
/// `topic`, descending. An empty bin gives an empty list and a warning.
pub fn trace_events(
    topic: usize,
    bin: usize,
    model: &TopicModel,
    binning: &DateBinning,
    n: usize,
) -> Result<(Vec<TracedEvent>, Option<String>)> {
    if topic >= model.k {
        return Err(Error::InvalidParameter(format!("topic {topic} outside 0..{}", model.k)));
    }
    let mut hits: Vec<TracedEvent> = model
        .doc_dates
        .iter()
        .enumerate()
        .filter(|(_, d)| binning.bin_of(**d).ok() == Some(bin))
        .map(|(j, d)| TracedEvent {
            doc_id: model.doc_ids[j].clone(),
            date: *d,
            score: model.theta[j][topic],
        })
        .collect();
    if hits.is_empty() {
        return Ok((Vec::new(), Some(format!("no documents in bin {bin}"))));
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    hits.truncate(n);
    Ok((hits, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTopic {
    pub topic_id: String,
    pub top_words: Vec<String>,
    pub events: Vec<TracedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconicEntry {
    pub style_id: String,
    pub lift: f64,
    pub topics: Vec<CausalTopic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub bin: usize,
    pub start: NaiveDate,
    pub iconic: Vec<IconicEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    /// Iconic styles per bin.
    pub k: usize,
    pub words_per_topic: usize,
    pub events_per_topic: usize,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        Self {
            k: 3,
            words_per_topic: 5,
            events_per_topic: 3,
        }
    }
}

/// Parses a `topic_{l}` series id.
pub fn topic_index(topic_id: &str) -> Option<usize> {
    topic_id.strip_prefix("topic_")?.parse().ok()
}

/// One entry per bin. Problems within a bin are recorded on that entry
/// and never abort the rest of the timeline.
pub fn build_timeline(
    styles: &[TrendSeries],
    influence: &BTreeMap<String, Vec<String>>,
    model: &TopicModel,
    binning: &DateBinning,
    cfg: &TimelineConfig,
) -> Vec<TimelineEntry> {
    (0..binning.bin_count)
        .map(|bin| {
            let mut warnings = Vec::new();
            let iconic = iconic_styles(styles, bin, cfg.k)
                .into_iter()
                .map(|ic| {
                    let topics = influence
                        .get(&ic.style_id)
                        .map(Vec::as_slice)
                        .unwrap_or_default()
                        .iter()
                        .filter_map(|tid| {
                            let resolved = topic_index(tid)
                                .ok_or_else(|| format!("unrecognized topic id '{tid}'"))
                                .and_then(|l| {
                                    let words = top_words(model, l, cfg.words_per_topic)
                                        .map_err(|e| e.to_string())?;
                                    let (events, warn) =
                                        trace_events(l, bin, model, binning, cfg.events_per_topic)
                                            .map_err(|e| e.to_string())?;
                                    Ok((words, events, warn))
                                });
                            match resolved {
                                Ok((words, events, warn)) => {
                                    if let Some(w) = warn {
                                        if !warnings.contains(&w) {
                                            warnings.push(w);
                                        }
                                    }
                                    Some(CausalTopic {
                                        topic_id: tid.clone(),
                                        top_words: words.into_iter().map(|w| w.0).collect(),
                                        events,
                                    })
                                }
                                Err(e) => {
                                    warnings.push(e);
                                    None
                                }
                            }
                        })
                        .collect();
                    IconicEntry {
                        style_id: ic.style_id,
                        lift: ic.lift,
                        topics,
                    }
                })
                .collect();
            TimelineEntry {
                bin,
                start: binning.bin_start(bin),
                iconic,
                warnings,
            }
        })
        .collect()
}
