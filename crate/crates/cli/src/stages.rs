//! Stage computations shared by the individual subcommands and the
//! end-to-end pipeline. Each stage turns loaded inputs into serializable
//! results; writing them to disk is left to the caller.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use trendcause_core::forecast::{evaluate, forecast_view, ForecastMethod, Metric, SeriesView};
use trendcause_core::influence::{screen_all_pairs, Screen};
use trendcause_core::style::{discover_styles, Discovery, StyleCluster};
use trendcause_core::timeline::{build_timeline, TimelineEntry};
use trendcause_core::timestamp::{
    eval_timestamp, holdout_split, text_feature, train_mapper, CrossModalMapper, DbEntry,
    DistanceNorm, Query, RetrievalMode, TimestampDatabase, TimestampEval,
};
use trendcause_core::topics::{build_corpus, lda_fit, RawDocument, TopicModel};
use trendcause_core::trend::{style_trends, topic_trends};
use trendcause_core::{BinWidth, DateBinning, InstanceRecord, StyleAssignment, TrendSeries, TrendSet};

use crate::chart::{line_chart, Line};
use crate::config::{
    BinningSection, ClusterSection, ForecastSection, GrangerSection, MethodChoice, TimelineSection,
    TimestampSection, TopicsSection,
};
use crate::error::{CliError, CliResult};

pub fn cluster(instances: &[InstanceRecord], sec: &ClusterSection) -> CliResult<Discovery> {
    let cfg = sec.discovery()?;
    let d = discover_styles(instances, &cfg).map_err(CliError::stage("cluster"))?;
    for w in &d.warnings {
        warn!("cluster: {w}");
    }
    info!(
        "cluster: {} candidates, {} retained styles",
        d.candidates.len(),
        d.styles.len()
    );
    Ok(d)
}

/// Run diagnostics written next to the retained clusters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub candidates: Vec<StyleCluster>,
    pub warnings: Vec<String>,
}

impl From<&Discovery> for ClusterDiagnostics {
    fn from(d: &Discovery) -> Self {
        Self {
            converged: d.converged,
            iterations: d.iterations,
            candidates: d.candidates.clone(),
            warnings: d.warnings.clone(),
        }
    }
}

pub fn topics(docs: &[RawDocument], sec: &TopicsSection) -> CliResult<TopicModel> {
    let corpus = build_corpus(docs, &sec.filter()).map_err(CliError::stage("topics"))?;
    info!(
        "topics: {} documents, {} word types, {} tokens",
        corpus.documents.len(),
        corpus.vocabulary.len(),
        corpus.token_count()
    );
    lda_fit(&corpus, &sec.lda()).map_err(CliError::stage("topics"))
}

/// Binning that covers every date. Without an explicit origin the earliest
/// date is used, moved to the first of its month (or year) for calendar widths.
pub fn resolve_binning(sec: &BinningSection, dates: &[NaiveDate]) -> CliResult<DateBinning> {
    let width = sec.width()?;
    let first = *dates
        .iter()
        .min()
        .ok_or_else(|| CliError::Config("no dated records to bin".into()))?;
    let origin = match sec.origin()? {
        Some(o) => o,
        None => match width {
            BinWidth::Days(_) => first,
            BinWidth::Months(_) => first.with_day(1).expect("day 1 exists"),
            BinWidth::Years(_) => NaiveDate::from_ymd_opt(first.year(), 1, 1).expect("Jan 1 exists"),
        },
    };
    DateBinning::covering(origin, width, dates).map_err(CliError::stage("binning"))
}

/// Binning and empty-bin flags written alongside the trend CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendMeta {
    pub binning: DateBinning,
    pub bin_starts: Vec<NaiveDate>,
    pub style_empty_bins: Vec<bool>,
    pub topic_empty_bins: Vec<bool>,
}

pub struct Trends {
    pub styles: Vec<TrendSeries>,
    pub topics: Vec<TrendSeries>,
    pub meta: TrendMeta,
}

pub fn assignments(clusters: &[StyleCluster]) -> Vec<StyleAssignment> {
    clusters
        .iter()
        .flat_map(|c| {
            c.members.iter().map(move |m| StyleAssignment {
                instance_id: m.clone(),
                style_id: c.style_id.clone(),
            })
        })
        .collect()
}

pub fn trends(
    clusters: &[StyleCluster],
    instances: &[InstanceRecord],
    model: &TopicModel,
    binning: &DateBinning,
    interpolate: bool,
) -> CliResult<Trends> {
    let stage = CliError::stage;
    let s = style_trends(&assignments(clusters), instances, binning).map_err(stage("trends"))?;
    let t = topic_trends(&model.theta, &model.doc_dates, binning).map_err(stage("trends"))?;
    if s.series.is_empty() {
        return Err(CliError::Stage {
            stage: "trends".into(),
            source: trendcause_core::Error::Empty("no styles to trend".into()),
        });
    }
    let pick = |set: &TrendSet| if interpolate { set.interpolated() } else { set.series.clone() };
    let empty = s.empty_bins.iter().filter(|&&e| e).count();
    if empty > 0 {
        warn!("trends: {empty} bins without instances");
    }
    Ok(Trends {
        styles: pick(&s),
        topics: pick(&t),
        meta: TrendMeta {
            binning: *binning,
            bin_starts: (0..binning.bin_count).map(|k| binning.bin_start(k)).collect(),
            style_empty_bins: s.empty_bins,
            topic_empty_bins: t.empty_bins,
        },
    })
}

/// Screens every style against every topic, ignoring the last
/// `holdout_tail` bins.
pub fn granger(styles: &[TrendSeries], topics: &[TrendSeries], sec: &GrangerSection) -> CliResult<Screen> {
    let cut = |set: &[TrendSeries]| -> Vec<TrendSeries> {
        set.iter()
            .map(|s| TrendSeries {
                id: s.id.clone(),
                kind: s.kind,
                values: s.values[..s.len().saturating_sub(sec.holdout_tail)].to_vec(),
            })
            .collect()
    };
    let screen = screen_all_pairs(&cut(styles), &cut(topics), &sec.config(), sec.correction()?)
        .map_err(CliError::stage("granger"))?;
    for e in &screen.errors {
        warn!("granger: {} <- {}: {}", e.style_id, e.topic_id, e.message);
    }
    let links: usize = screen.influence.values().map(Vec::len).sum();
    info!("granger: {} tests, {links} significant links", screen.results.len());
    Ok(screen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topics: Vec<String>,
    pub predictions: Vec<f64>,
    pub step_errors: Vec<f64>,
    pub error: f64,
    /// Cultural forecaster fell back to plain AR (no influencing topics).
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleForecast {
    pub style_id: String,
    pub train: Vec<f64>,
    pub truth: Vec<f64>,
    pub outcomes: Vec<MethodOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<MethodFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub horizon: usize,
    pub metric: Metric,
    /// Mean error per method over the styles it succeeded on.
    pub mean_error: BTreeMap<String, f64>,
    pub styles: Vec<StyleForecast>,
}

/// Holds out the last `horizon` bins of every style and forecasts them
/// with each configured method.
pub fn forecast(
    styles: &[TrendSeries],
    topics: &[TrendSeries],
    influence: &BTreeMap<String, Vec<String>>,
    sec: &ForecastSection,
) -> CliResult<ForecastSummary> {
    let methods = sec.methods()?;
    let metric = sec.metric()?;
    let exo_mode = sec.exo_mode()?;
    let h = sec.horizon;
    let topic_by_id: BTreeMap<&str, &TrendSeries> = topics.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut out = Vec::with_capacity(styles.len());
    for s in styles {
        if s.len() <= h {
            return Err(CliError::Stage {
                stage: "forecast".into(),
                source: trendcause_core::Error::InsufficientLength(format!(
                    "style '{}' has {} bins, horizon {h}",
                    s.id,
                    s.len()
                )),
            });
        }
        let train_len = s.len() - h;
        let mut sf = StyleForecast {
            style_id: s.id.clone(),
            train: s.values[..train_len].to_vec(),
            truth: s.values[train_len..].to_vec(),
            outcomes: Vec::new(),
            failures: Vec::new(),
        };
        for choice in &methods {
            let (method, exo): (ForecastMethod, Vec<&TrendSeries>) = match choice {
                MethodChoice::Fixed(m) => (m.clone(), Vec::new()),
                MethodChoice::Cultural { q1, q2 } => {
                    let ids = influence.get(&s.id).cloned().unwrap_or_default();
                    let mut exo = Vec::new();
                    for id in &ids {
                        match topic_by_id.get(id.as_str()) {
                            Some(t) => exo.push(*t),
                            None => {
                                return Err(CliError::Stage {
                                    stage: "forecast".into(),
                                    source: trendcause_core::Error::UnknownId(id.clone()),
                                })
                            }
                        }
                    }
                    let method = ForecastMethod::Cultural {
                        q1: *q1,
                        q2: *q2,
                        topics: ids,
                    };
                    (method, exo)
                }
            };
            let views: Vec<&dyn SeriesView> = exo.iter().map(|t| &t.values as &dyn SeriesView).collect();
            let result = forecast_view(&method, &s.values, train_len, &views, h, exo_mode)
                .and_then(|f| {
                    evaluate(&s.id, method.name(), &f.clipped, &sf.truth, metric).map(|r| (f, r))
                });
            match result {
                Ok((f, r)) => sf.outcomes.push(MethodOutcome {
                    method: method.name().into(),
                    topics: match &method {
                        ForecastMethod::Cultural { topics, .. } => topics.clone(),
                        _ => Vec::new(),
                    },
                    predictions: f.clipped,
                    step_errors: r.step_errors,
                    error: r.error,
                    fallback: f.fallback,
                }),
                Err(e) => {
                    warn!("forecast: {} with {}: {e}", s.id, method.name());
                    sf.failures.push(MethodFailure {
                        method: method.name().into(),
                        message: e.to_string(),
                    });
                }
            }
        }
        out.push(sf);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for o in out.iter().flat_map(|s| &s.outcomes) {
        let e = sums.entry(o.method.clone()).or_default();
        e.0 += o.error;
        e.1 += 1;
    }
    Ok(ForecastSummary {
        horizon: h,
        metric,
        mean_error: sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        styles: out,
    })
}

/// One chart per style: the training prefix, the held-out truth and each
/// method's forecast. Returns (file name, svg) pairs.
pub fn forecast_charts(summary: &ForecastSummary, bin_labels: &[String]) -> CliResult<Vec<(String, String)>> {
    summary
        .styles
        .iter()
        .map(|sf| {
            let t = sf.train.len();
            let mut lines = vec![
                Line::new("train", 0, sf.train.clone()),
                Line::new("truth", t, sf.truth.clone()),
            ];
            lines.extend(sf.outcomes.iter().map(|o| Line::new(o.method.clone(), t, o.predictions.clone())));
            let svg = line_chart(&format!("{} forecast", sf.style_id), &lines, bin_labels, "popularity")?;
            Ok((format!("forecast_{}.svg", sanitize(&sf.style_id)), svg))
        })
        .collect()
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn timeline(
    styles: &[TrendSeries],
    influence: &BTreeMap<String, Vec<String>>,
    model: &TopicModel,
    binning: &DateBinning,
    sec: &TimelineSection,
) -> CliResult<Vec<TimelineEntry>> {
    if styles.iter().any(|s| s.len() != binning.bin_count) {
        return Err(CliError::Stage {
            stage: "timeline".into(),
            source: trendcause_core::Error::DimensionMismatch(format!(
                "style series do not have {} bins",
                binning.bin_count
            )),
        });
    }
    let entries = build_timeline(styles, influence, model, binning, &sec.config());
    for e in &entries {
        for w in &e.warnings {
            log::debug!("timeline bin {}: {w}", e.bin);
        }
    }
    Ok(entries)
}

/// A trained mapper together with everything needed to rebuild the
/// retrieval database it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampArtifact {
    pub label_binning: DateBinning,
    pub labels: Vec<String>,
    /// Mean topic distribution per label; `None` when no document carries it.
    pub text_features: Vec<Option<Vec<f64>>>,
    pub holdout: f64,
    pub split_seed: u64,
    pub mapper: CrossModalMapper,
}

/// Instances that carry a usable label, split into database and queries.
pub struct TimestampData {
    pub database: TimestampDatabase,
    pub queries: Vec<Query>,
    pub train_inputs: Vec<Vec<f64>>,
    pub train_targets: Vec<Vec<f64>>,
}

pub fn label_features(model: &TopicModel, binning: &DateBinning) -> CliResult<Vec<Option<Vec<f64>>>> {
    let doc_labels = model
        .doc_dates
        .iter()
        .map(|d| binning.bin_of(*d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::stage("timestamp"))?;
    (0..binning.bin_count)
        .map(|l| match text_feature(l, &model.theta, &doc_labels) {
            Ok(f) => Ok(Some(f)),
            Err(trendcause_core::Error::NoDocuments(_)) => Ok(None),
            Err(e) => Err(CliError::stage("timestamp")(e)),
        })
        .collect()
}

pub fn timestamp_data(
    instances: &[InstanceRecord],
    binning: &DateBinning,
    text: &[Option<Vec<f64>>],
    holdout: f64,
    seed: u64,
) -> CliResult<TimestampData> {
    let stage = CliError::stage("timestamp");
    let mut usable = Vec::new();
    let mut dropped = 0usize;
    for r in instances {
        let label = binning.bin_of(r.date).map_err(CliError::stage("timestamp"))?;
        match &text[label] {
            Some(_) => usable.push((r, label)),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!("timestamp: {dropped} instances dated in labels without documents were skipped");
    }
    let (db_idx, query_idx) = holdout_split(usable.len(), holdout, seed);
    let entries: Vec<DbEntry> = db_idx
        .iter()
        .map(|&i| {
            let (r, l) = usable[i];
            DbEntry {
                id: r.id.clone(),
                label: l,
                visual: r.features.clone(),
                cultural: text[l].clone().unwrap_or_default(),
            }
        })
        .collect();
    let train_inputs = entries.iter().map(|e| e.visual.clone()).collect();
    let train_targets = entries.iter().map(|e| e.cultural.clone()).collect();
    let labels = (0..binning.bin_count).map(|k| binning.bin_start(k).to_string()).collect();
    let database = TimestampDatabase::new(entries, labels).map_err(stage)?;
    let queries = query_idx
        .iter()
        .map(|&i| {
            let (r, l) = usable[i];
            Query {
                id: r.id.clone(),
                visual: r.features.clone(),
                label: l,
            }
        })
        .collect();
    Ok(TimestampData {
        database,
        queries,
        train_inputs,
        train_targets,
    })
}

pub fn timestamp_train(
    instances: &[InstanceRecord],
    model: &TopicModel,
    binning: &DateBinning,
    sec: &TimestampSection,
) -> CliResult<TimestampArtifact> {
    sec.validate()?;
    let text = label_features(model, binning)?;
    let data = timestamp_data(instances, binning, &text, sec.holdout, sec.seed)?;
    let mapper = train_mapper(&data.train_inputs, &data.train_targets, sec.mapper())
        .map_err(CliError::stage("timestamp"))?;
    info!(
        "timestamp: mapper trained on {} instances, final loss {:.6}",
        data.train_inputs.len(),
        mapper.final_loss
    );
    Ok(TimestampArtifact {
        label_binning: *binning,
        labels: data.database.labels().to_vec(),
        text_features: text,
        holdout: sec.holdout,
        split_seed: sec.seed,
        mapper,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampReport {
    pub mode: RetrievalMode,
    pub norm: DistanceNorm,
    #[serde(flatten)]
    pub eval: TimestampEval,
    pub labels: usize,
    pub database: usize,
}

pub fn timestamp_eval(
    instances: &[InstanceRecord],
    artifact: &TimestampArtifact,
    mode: RetrievalMode,
    norm: DistanceNorm,
) -> CliResult<TimestampReport> {
    let data = timestamp_data(
        instances,
        &artifact.label_binning,
        &artifact.text_features,
        artifact.holdout,
        artifact.split_seed,
    )?;
    let eval = eval_timestamp(&data.database, &data.queries, Some(&artifact.mapper), mode, norm)
        .map_err(CliError::stage("timestamp"))?;
    Ok(TimestampReport {
        mode,
        norm,
        eval,
        labels: artifact.labels.len(),
        database: data.database.entries().len(),
    })
}
