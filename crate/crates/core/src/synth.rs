//! Synthetic scenarios with planted ground truth: topic trends from
//! seasonal AR processes, style trends driven by lagged topics (or by
//! independent noise), plus instances and documents sampled from them.

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::binning::{BinWidth, DateBinning};
use crate::error::{Error, Result};
use crate::timestamp::{DbEntry, Query, TimestampDatabase};
use crate::topics::RawDocument;
use crate::trend::{InstanceRecord, TrendKind, TrendSeries};

const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicProcess {
    pub count: usize,
    /// AR coefficients of the stochastic component.
    pub ar: Vec<f64>,
    pub period: usize,
    pub amplitude: f64,
    pub level: f64,
    pub noise_sigma: f64,
}

impl Default for TopicProcess {
    fn default() -> Self {
        Self {
            count: 10,
            ar: vec![0.5],
            period: 52,
            amplitude: 0.1,
            level: 1.0,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleProcess {
    /// Styles driven by one lagged topic each, assigned round-robin.
    pub causal: usize,
    /// Styles following independent AR processes.
    pub null: usize,
    pub lag_min: usize,
    pub lag_max: usize,
    pub gain: f64,
    pub noise_sigma: f64,
    pub null_ar: Vec<f64>,
    pub null_level: f64,
    pub null_noise_sigma: f64,
}

impl Default for StyleProcess {
    fn default() -> Self {
        Self {
            causal: 25,
            null: 25,
            lag_min: 1,
            lag_max: 3,
            gain: 1.0,
            noise_sigma: 0.005,
            null_ar: vec![0.5],
            null_level: 0.3,
            null_noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceProcess {
    pub per_bin: usize,
    pub feature_dim: usize,
    /// Standard deviation of style blob centres.
    pub separation: f64,
    /// Standard deviation of instances around their blob centre.
    pub spread: f64,
    pub label_set_size: usize,
}

impl Default for InstanceProcess {
    fn default() -> Self {
        Self {
            per_bin: 20,
            feature_dim: 8,
            separation: 10.0,
            spread: 0.5,
            label_set_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusProcess {
    pub docs_per_bin: usize,
    pub doc_len: usize,
    pub words_per_topic: usize,
}

impl Default for CorpusProcess {
    fn default() -> Self {
        Self {
            docs_per_bin: 20,
            doc_len: 30,
            words_per_topic: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub bins: usize,
    pub origin: NaiveDate,
    pub width: BinWidth,
    pub topics: TopicProcess,
    pub styles: StyleProcess,
    pub instances: InstanceProcess,
    pub corpus: CorpusProcess,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            bins: 100,
            origin: NaiveDate::from_ymd_opt(2013, 7, 1).expect("valid date"),
            width: BinWidth::Days(7),
            topics: TopicProcess::default(),
            styles: StyleProcess::default(),
            instances: InstanceProcess::default(),
            corpus: CorpusProcess::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let s = &self.styles;
        if self.bins == 0 || self.topics.count == 0 || s.causal + s.null == 0 {
            return bad("bins, topics and styles must be >= 1");
        }
        if s.lag_min == 0 || s.lag_max < s.lag_min {
            return bad("lags must satisfy 1 <= lag_min <= lag_max");
        }
        if self.topics.noise_sigma < 0.0 || s.noise_sigma < 0.0 || s.null_noise_sigma < 0.0 {
            return bad("noise sigmas must be >= 0");
        }
        if self.topics.period == 0 {
            return bad("seasonal period must be >= 1");
        }
        let (i, c) = (&self.instances, &self.corpus);
        if i.per_bin == 0 || i.feature_dim == 0 || i.label_set_size == 0 {
            return bad("instance counts must be >= 1");
        }
        if c.docs_per_bin == 0 || c.doc_len == 0 || c.words_per_topic == 0 {
            return bad("corpus counts must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalLink {
    pub style_id: String,
    pub topic_id: String,
    pub lag: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub links: Vec<CausalLink>,
    pub null_styles: Vec<String>,
    /// (instance id, style id)
    pub instance_styles: Vec<(String, String)>,
    /// (document id, topic id)
    pub document_topics: Vec<(String, String)>,
}

/// Trend series of a scenario, without sampled instances or documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrends {
    pub styles: Vec<TrendSeries>,
    pub topics: Vec<TrendSeries>,
    /// Style values before per-bin renormalization.
    pub style_raw: Vec<Vec<f64>>,
    pub links: Vec<CausalLink>,
    pub null_styles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub binning: DateBinning,
    pub trends: SynthTrends,
    pub instances: Vec<InstanceRecord>,
    pub documents: Vec<RawDocument>,
    pub truth: GroundTruth,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated")
}

/// Positive AR(p) path with a seasonal mean, truncated at zero.
fn ar_path(
    rng: &mut ChaCha8Rng,
    len: usize,
    ar: &[f64],
    sigma: f64,
    mean: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let noise = normal(sigma);
    let burn = 50;
    let mut u = vec![0.0; burn + len];
    for t in 0..u.len() {
        let lagged: f64 = ar
            .iter()
            .enumerate()
            .filter(|(m, _)| t > *m)
            .map(|(m, a)| a * u[t - 1 - m])
            .sum();
        u[t] = lagged + noise.sample(rng);
    }
    u[burn..]
        .iter()
        .enumerate()
        .map(|(t, v)| (mean(t) + v).max(0.0))
        .collect()
}

/// Column-normalizes `rows` so every bin sums to 1. Bins with zero total are
/// redrawn through `redraw` up to a bounded number of times.
fn renormalize(rows: &mut [Vec<f64>], mut redraw: impl FnMut(usize, &mut [Vec<f64>])) -> Result<()> {
    let len = rows.first().map_or(0, Vec::len);
    for t in 0..len {
        let mut tries = 0;
        let mut total: f64 = rows.iter().map(|r| r[t]).sum();
        while total <= 0.0 {
            if tries == MAX_RETRIES {
                return Err(Error::Generation(format!("bin {t} stays empty after {MAX_RETRIES} redraws")));
            }
            redraw(t, rows);
            total = rows.iter().map(|r| r[t]).sum();
            tries += 1;
        }
        rows.iter_mut().for_each(|r| r[t] /= total);
    }
    Ok(())
}

/// Builds topic and style trend series with planted causal links.
pub fn generate_trends(cfg: &SynthConfig) -> Result<SynthTrends> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tp = &cfg.topics;
    let sp = &cfg.styles;
    let lead = sp.lag_max;
    let span = cfg.bins + lead;

    let phases: Vec<f64> = (0..tp.count).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let seasonal = |l: usize, t: usize| {
        tp.level + tp.amplitude * (std::f64::consts::TAU * t as f64 / tp.period as f64 + phases[l]).sin()
    };
    let mut topics: Vec<Vec<f64>> = (0..tp.count)
        .map(|l| ar_path(&mut rng, span, &tp.ar, tp.noise_sigma, |t| seasonal(l, t)))
        .collect();
    let topic_noise = normal(tp.noise_sigma.max(1e-3));
    let mut redraw_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    renormalize(&mut topics, |t, rows| {
        for (l, r) in rows.iter_mut().enumerate() {
            r[t] = (seasonal(l, t) + topic_noise.sample(&mut redraw_rng)).max(0.0);
        }
    })?;

    let mut links = Vec::new();
    let mut raw: Vec<Vec<f64>> = Vec::new();
    let causal_noise = normal(sp.noise_sigma);
    for i in 0..sp.causal {
        let l = i % tp.count;
        let lag = rng.random_range(sp.lag_min..=sp.lag_max);
        let series: Vec<f64> = (0..cfg.bins)
            .map(|t| (sp.gain * topics[l][lead + t - lag] + causal_noise.sample(&mut rng)).max(0.0))
            .collect();
        raw.push(series);
        links.push(CausalLink {
            style_id: format!("style_{i}"),
            topic_id: format!("topic_{l}"),
            lag,
            gain: sp.gain,
        });
    }
    let mut null_styles = Vec::new();
    for j in 0..sp.null {
        raw.push(ar_path(&mut rng, cfg.bins, &sp.null_ar, sp.null_noise_sigma, |_| sp.null_level));
        null_styles.push(format!("style_{}", sp.causal + j));
    }
    let style_raw = raw.clone();
    let null_level = sp.null_level.max(1e-3);
    renormalize(&mut raw, |t, rows| {
        for r in rows.iter_mut() {
            r[t] = (null_level + causal_noise.sample(&mut redraw_rng)).max(0.0);
        }
    })?;

    let topics = topics
        .into_iter()
        .enumerate()
        .map(|(l, v)| TrendSeries {
            id: format!("topic_{l}"),
            kind: TrendKind::Topic,
            values: v[lead..].to_vec(),
        })
        .collect();
    let styles = raw
        .into_iter()
        .enumerate()
        .map(|(i, v)| TrendSeries {
            id: format!("style_{i}"),
            kind: TrendKind::Style,
            values: v,
        })
        .collect();
    Ok(SynthTrends {
        styles,
        topics,
        style_raw,
        links,
        null_styles,
    })
}

fn day_in_bin(rng: &mut ChaCha8Rng, binning: &DateBinning, t: usize) -> NaiveDate {
    let start = binning.bin_start(t);
    let days = (binning.bin_start(t + 1) - start).num_days().max(1) as u64;
    start + Days::new(rng.random_range(0..days))
}

/// Full scenario: trends plus instances sampled from per-style feature
/// blobs and single-topic documents sampled from planted vocabularies.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    let trends = generate_trends(cfg)?;
    let binning = DateBinning::new(cfg.origin, cfg.width, cfg.bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
    let ip = &cfg.instances;
    let centre = normal(ip.separation);
    let spread = normal(ip.spread);
    let n_styles = trends.styles.len();
    let centres: Vec<Vec<f64>> = (0..n_styles)
        .map(|_| (0..ip.feature_dim).map(|_| centre.sample(&mut rng)).collect())
        .collect();
    // each style favours a couple of attribute labels
    let profiles: Vec<Vec<f64>> = (0..n_styles)
        .map(|i| {
            let mut p = vec![0.05; ip.label_set_size];
            p[i % ip.label_set_size] += 1.0;
            p[(i * 7 + 3) % ip.label_set_size] += 0.5;
            p
        })
        .collect();

    let mut instances = Vec::new();
    let mut instance_styles = Vec::new();
    for t in 0..cfg.bins {
        let weights: Vec<f64> = trends.styles.iter().map(|s| s.values[t]).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Generation(e.to_string()))?;
        for _ in 0..ip.per_bin {
            let s = pick.sample(&mut rng);
            let id = format!("inst_{}", instances.len());
            let features = centres[s].iter().map(|c| c + spread.sample(&mut rng)).collect();
            let activations = profiles[s]
                .iter()
                .map(|p| p * rng.random_range(0.8..1.2))
                .collect();
            instance_styles.push((id.clone(), trends.styles[s].id.clone()));
            instances.push(InstanceRecord {
                id,
                date: day_in_bin(&mut rng, &binning, t),
                features,
                activations: Some(activations),
            });
        }
    }

    let cp = &cfg.corpus;
    let mut documents = Vec::new();
    let mut document_topics = Vec::new();
    for t in 0..cfg.bins {
        let weights: Vec<f64> = trends.topics.iter().map(|s| s.values[t]).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Generation(e.to_string()))?;
        for _ in 0..cp.docs_per_bin {
            let l = pick.sample(&mut rng);
            let id = format!("doc_{}", documents.len());
            let tokens = (0..cp.doc_len)
                .map(|_| format!("t{l}w{}", rng.random_range(0..cp.words_per_topic)))
                .collect();
            document_topics.push((id.clone(), trends.topics[l].id.clone()));
            documents.push(RawDocument {
                doc_id: id,
                date: day_in_bin(&mut rng, &binning, t),
                tokens,
            });
        }
    }

    let truth = GroundTruth {
        links: trends.links.clone(),
        null_styles: trends.null_styles.clone(),
        instance_styles,
        document_topics,
    };
    Ok(SynthData {
        binning,
        trends,
        instances,
        documents,
        truth,
    })
}

/// Timestamping benchmark: visual features drift slowly with the date
/// label under heavy nuisance noise, while each label's cultural feature
/// is a distinct topic mixture that moves steadily with the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampBenchConfig {
    pub seed: u64,
    pub labels: usize,
    pub per_label: usize,
    pub topics: usize,
    pub signal_dims: usize,
    pub noise_dims: usize,
    /// Per-label step of the drifting signal dimensions.
    pub drift: f64,
    pub signal_sigma: f64,
    pub noise_sigma: f64,
    pub holdout: f64,
}

impl Default for TimestampBenchConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            labels: 20,
            per_label: 500,
            topics: 10,
            signal_dims: 2,
            noise_dims: 14,
            drift: 0.25,
            signal_sigma: 0.5,
            noise_sigma: 1.0,
            holdout: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestampBench {
    pub labels: Vec<String>,
    pub label_features: Vec<Vec<f64>>,
    pub database: Vec<DbEntry>,
    pub queries: Vec<Query>,
}

impl TimestampBench {
    pub fn database(&self) -> Result<TimestampDatabase> {
        TimestampDatabase::new(self.database.clone(), self.labels.clone())
    }

    /// (visual, cultural) pairs of the database entries, for mapper training.
    pub fn training_pairs(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.database
            .iter()
            .map(|e| (e.visual.clone(), e.cultural.clone()))
            .unzip()
    }
}

pub fn timestamp_benchmark(cfg: &TimestampBenchConfig) -> Result<TimestampBench> {
    if cfg.labels == 0 || cfg.per_label == 0 || cfg.topics < 2 {
        return Err(Error::InvalidParameter("benchmark needs >= 1 label and sample, >= 2 topics".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // topic mass shifts linearly from the first half of the topics to the
    // second as the label advances
    let half = cfg.topics.div_ceil(2);
    let label_features: Vec<Vec<f64>> = (0..cfg.labels)
        .map(|l| {
            let s = l as f64 / (cfg.labels.max(2) - 1) as f64;
            (0..cfg.topics)
                .map(|k| if k < half { (1.0 - s) / half as f64 } else { s / (cfg.topics - half) as f64 })
                .collect()
        })
        .collect();
    let offset = |l: usize| l as f64 - (cfg.labels as f64 - 1.0) / 2.0;
    let sig = normal(cfg.signal_sigma);
    let nuis = normal(cfg.noise_sigma);
    let mut all: Vec<(usize, Vec<f64>)> = Vec::with_capacity(cfg.labels * cfg.per_label);
    for l in 0..cfg.labels {
        for _ in 0..cfg.per_label {
            let mut v: Vec<f64> = (0..cfg.signal_dims)
                .map(|d| offset(l) * cfg.drift * if d % 2 == 0 { 1.0 } else { -0.5 } + sig.sample(&mut rng))
                .collect();
            v.extend((0..cfg.noise_dims).map(|_| nuis.sample(&mut rng)));
            all.push((l, v));
        }
    }
    let (train, test) = crate::timestamp::holdout_split(all.len(), cfg.holdout, cfg.seed ^ 0xD47E);
    let database = train
        .iter()
        .map(|&i| DbEntry {
            id: format!("img_{i:06}"),
            label: all[i].0,
            visual: all[i].1.clone(),
            cultural: label_features[all[i].0].clone(),
        })
        .collect();
    let queries = test
        .iter()
        .map(|&i| Query {
            id: format!("img_{i:06}"),
            visual: all[i].1.clone(),
            label: all[i].0,
        })
        .collect();
    Ok(TimestampBench {
        labels: (0..cfg.labels).map(|l| format!("label_{l}")).collect(),
        label_features,
        database,
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            bins: 30,
            topics: TopicProcess { count: 3, ..TopicProcess::default() },
            styles: StyleProcess { causal: 3, null: 2, ..StyleProcess::default() },
            instances: InstanceProcess { per_bin: 5, ..InstanceProcess::default() },
            corpus: CorpusProcess { docs_per_bin: 4, doc_len: 16, words_per_topic: 10 },
            ..SynthConfig::default()
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn noiseless_link_is_a_pure_shift() {
        let mut cfg = small();
        cfg.styles = StyleProcess {
            causal: 1,
            null: 1,
            lag_min: 1,
            lag_max: 1,
            gain: 1.0,
            noise_sigma: 0.0,
            ..StyleProcess::default()
        };
        let tr = generate_trends(&cfg).unwrap();
        let topic = &tr.topics[0].values;
        let raw = &tr.style_raw[0];
        for t in 1..cfg.bins {
            assert_eq!(raw[t], topic[t - 1]);
        }
        // renormalized value is the raw value over the bin total
        for t in 0..cfg.bins {
            let total = tr.style_raw[0][t] + tr.style_raw[1][t];
            assert!((tr.styles[0].values[t] - raw[t] / total).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_and_unique_ids() {
        let data = generate(&small()).unwrap();
        for family in [&data.trends.styles, &data.trends.topics] {
            for t in 0..30 {
                let s: f64 = family.iter().map(|x| x.values[t]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let mut ids: Vec<&str> = data.instances.iter().map(|i| i.id.as_str()).collect();
        ids.extend(data.documents.iter().map(|d| d.doc_id.as_str()));
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
        for inst in &data.instances {
            assert!(data.binning.bin_of(inst.date).is_ok());
        }
    }

    #[test]
    fn same_seed_same_output() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let mut other = small();
        other.seed = 8;
        assert_ne!(generate(&small()).unwrap().trends, generate(&other).unwrap().trends);
    }

    #[test]
    fn adjacency_references_existing_series() {
        let data = generate(&small()).unwrap();
        for link in &data.truth.links {
            assert!(data.trends.styles.iter().any(|s| s.id == link.style_id));
            assert!(data.trends.topics.iter().any(|s| s.id == link.topic_id));
            assert!((1..=3).contains(&link.lag));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = small();
        cfg.styles.lag_min = 0;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn benchmark_shapes() {
        let cfg = TimestampBenchConfig { per_label: 10, labels: 5, ..TimestampBenchConfig::default() };
        let b = timestamp_benchmark(&cfg).unwrap();
        assert_eq!(b.database.len() + b.queries.len(), 50);
        assert_eq!(b.queries.len(), 10);
        for f in &b.label_features {
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
