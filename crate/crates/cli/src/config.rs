//! TOML run configuration. Every section has defaults, so a config only
//! needs the input paths; command-line flags override individual fields.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use trendcause_core::binning::parse_date;
use trendcause_core::forecast::{ExoMode, ForecastMethod, Metric};
use trendcause_core::influence::{Correction, GrangerConfig};
use trendcause_core::style::{ApConfig, DiscoveryConfig, EntropyFilter, Preference};
use trendcause_core::timeline::TimelineConfig;
use trendcause_core::timestamp::{DistanceNorm, MapperConfig};
use trendcause_core::topics::{CorpusFilter, LdaConfig};
use trendcause_core::BinWidth;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSection,
    pub output: OutputSection,
    pub binning: BinningSection,
    pub cluster: ClusterSection,
    pub topics: TopicsSection,
    pub trends: TrendsSection,
    pub granger: GrangerSection,
    pub forecast: ForecastSection,
    pub timeline: TimelineSection,
    pub timestamp: TimestampSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub instances: PathBuf,
    pub corpus: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "trendcause-out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningSection {
    /// First day of bin 0; defaults to the earliest input date, moved to
    /// the first of its month for month and year widths.
    pub origin: Option<String>,
    /// `7d`, `4m`, `1y`, ...
    pub width: String,
}

impl Default for BinningSection {
    fn default() -> Self {
        Self {
            origin: None,
            width: "1y".into(),
        }
    }
}

impl BinningSection {
    pub fn width(&self) -> CliResult<BinWidth> {
        BinWidth::parse(&self.width).map_err(|e| CliError::Config(format!("binning.width: {e}")))
    }

    pub fn origin(&self) -> CliResult<Option<NaiveDate>> {
        self.origin
            .as_deref()
            .map(|s| parse_date(s).map_err(|e| CliError::Config(format!("binning.origin: {e}"))))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_window: usize,
    /// Self-similarity; `None` uses the median similarity.
    pub preference: Option<f64>,
    /// `drop-high` or `keep-low`.
    pub filter: String,
    /// Standard deviations from the mean entropy.
    pub filter_k: f64,
    pub top_labels: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let d = DiscoveryConfig::default();
        Self {
            damping: d.ap.damping,
            max_iter: d.ap.max_iter,
            convergence_window: d.ap.convergence_window,
            preference: None,
            filter: "drop-high".into(),
            filter_k: 2.0,
            top_labels: d.top_labels,
        }
    }
}

impl ClusterSection {
    pub fn discovery(&self) -> CliResult<DiscoveryConfig> {
        let filter = match self.filter.as_str() {
            "drop-high" => EntropyFilter::DropHigh { k: self.filter_k },
            "keep-low" => EntropyFilter::KeepLow { k: self.filter_k },
            other => {
                return Err(CliError::Config(format!(
                    "cluster.filter '{other}' (expected drop-high or keep-low)"
                )))
            }
        };
        if !(0.5..1.0).contains(&self.damping) {
            return Err(CliError::Config(format!("cluster.damping {} outside [0.5, 1)", self.damping)));
        }
        Ok(DiscoveryConfig {
            ap: ApConfig {
                damping: self.damping,
                max_iter: self.max_iter,
                convergence_window: self.convergence_window,
            },
            preference: self.preference.map_or(Preference::Median, Preference::Value),
            filter,
            top_labels: self.top_labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub k: usize,
    pub iterations: usize,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub min_doc_len: usize,
    pub min_token_freq: usize,
    pub stopwords: Vec<String>,
}

impl Default for TopicsSection {
    fn default() -> Self {
        let lda = LdaConfig::new(400, 1000, 7);
        let f = CorpusFilter::default();
        Self {
            k: lda.k,
            iterations: lda.iterations,
            seed: lda.seed,
            alpha: None,
            beta: lda.beta,
            min_doc_len: f.min_doc_len,
            min_token_freq: f.min_token_freq,
            stopwords: Vec::new(),
        }
    }
}

impl TopicsSection {
    pub fn lda(&self) -> LdaConfig {
        LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed: self.seed,
        }
    }

    pub fn filter(&self) -> CorpusFilter {
        CorpusFilter {
            min_doc_len: self.min_doc_len,
            min_token_freq: self.min_token_freq,
            stopwords: self.stopwords.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendsSection {
    /// Fill bins without observations by linear interpolation.
    pub interpolate: bool,
}

impl Default for TrendsSection {
    fn default() -> Self {
        Self { interpolate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrangerSection {
    pub q1: usize,
    pub q2: usize,
    pub alpha: f64,
    pub intercept: bool,
    /// `none` or `bh` (Benjamini-Hochberg).
    pub correction: String,
    /// Bins at the end of each series left out of the screen; the pipeline
    /// sets this to the forecast horizon so forecasts are scored on bins
    /// the influence screen never saw.
    pub holdout_tail: usize,
}

impl Default for GrangerSection {
    fn default() -> Self {
        let g = GrangerConfig::default();
        Self {
            q1: g.q1,
            q2: g.q2,
            alpha: g.alpha,
            intercept: g.intercept,
            correction: "none".into(),
            holdout_tail: 0,
        }
    }
}

impl GrangerSection {
    pub fn config(&self) -> GrangerConfig {
        GrangerConfig {
            q1: self.q1,
            q2: self.q2,
            alpha: self.alpha,
            intercept: self.intercept,
        }
    }

    pub fn correction(&self) -> CliResult<Correction> {
        match self.correction.to_ascii_lowercase().as_str() {
            "none" => Ok(Correction::None),
            "bh" | "benjamini-hochberg" => Ok(Correction::BenjaminiHochberg),
            other => Err(CliError::Config(format!("granger.correction '{other}' (expected none or bh)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Any of `last`, `linear`, `mean`, `exp`, `ar`, `cultural`.
    pub methods: Vec<String>,
    pub horizon: usize,
    /// `mse` or `mae`.
    pub metric: String,
    pub q1: usize,
    pub q2: usize,
    pub exp_alpha: f64,
    /// `observed` or `forecast`.
    pub exo_mode: String,
    pub svg: bool,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            methods: ["last", "linear", "mean", "exp", "ar", "cultural"].map(String::from).to_vec(),
            horizon: 26,
            metric: "mse".into(),
            q1: 2,
            q2: 2,
            exp_alpha: 0.5,
            exo_mode: "observed".into(),
            svg: true,
        }
    }
}

/// A forecaster named in the config; cultural ones receive their topics
/// per style from the influence screen.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodChoice {
    Fixed(ForecastMethod),
    Cultural { q1: usize, q2: usize },
}

impl MethodChoice {
    pub fn name(&self) -> &'static str {
        match self {
            MethodChoice::Fixed(m) => m.name(),
            MethodChoice::Cultural { .. } => "cultural",
        }
    }
}

impl ForecastSection {
    pub fn methods(&self) -> CliResult<Vec<MethodChoice>> {
        if self.methods.is_empty() {
            return Err(CliError::Config("forecast.methods is empty".into()));
        }
        self.methods
            .iter()
            .map(|m| {
                Ok(match m.to_ascii_lowercase().as_str() {
                    "last" => MethodChoice::Fixed(ForecastMethod::Last),
                    "linear" => MethodChoice::Fixed(ForecastMethod::Linear),
                    "mean" => MethodChoice::Fixed(ForecastMethod::Mean),
                    "exp" => MethodChoice::Fixed(ForecastMethod::Exp { alpha: self.exp_alpha }),
                    "ar" => MethodChoice::Fixed(ForecastMethod::Ar { q1: self.q1 }),
                    "cultural" => MethodChoice::Cultural {
                        q1: self.q1,
                        q2: self.q2,
                    },
                    other => return Err(CliError::Config(format!("unknown forecast method '{other}'"))),
                })
            })
            .collect()
    }

    pub fn metric(&self) -> CliResult<Metric> {
        self.metric
            .parse()
            .map_err(|e| CliError::Config(format!("forecast.metric: {e}")))
    }

    pub fn exo_mode(&self) -> CliResult<ExoMode> {
        match self.exo_mode.to_ascii_lowercase().as_str() {
            "observed" => Ok(ExoMode::Observed),
            "forecast" => Ok(ExoMode::Forecast),
            other => Err(CliError::Config(format!(
                "forecast.exo_mode '{other}' (expected observed or forecast)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineSection {
    pub k: usize,
    pub words_per_topic: usize,
    pub events_per_topic: usize,
    pub svg: bool,
}

impl Default for TimelineSection {
    fn default() -> Self {
        let t = TimelineConfig::default();
        Self {
            k: t.k,
            words_per_topic: t.words_per_topic,
            events_per_topic: t.events_per_topic,
            svg: true,
        }
    }
}

impl TimelineSection {
    pub fn config(&self) -> TimelineConfig {
        TimelineConfig {
            k: self.k,
            words_per_topic: self.words_per_topic,
            events_per_topic: self.events_per_topic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimestampSection {
    /// Width of a date label; defaults to the trend bin width.
    pub label_width: Option<String>,
    pub hidden: [usize; 2],
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Fraction of instances held out as queries.
    pub holdout: f64,
    /// `median` or `raw` distance normalization.
    pub norm: String,
}

impl Default for TimestampSection {
    fn default() -> Self {
        let m = MapperConfig::new(7);
        Self {
            label_width: None,
            hidden: m.hidden,
            lr: m.learning_rate,
            epochs: m.epochs,
            batch: m.batch_size,
            seed: m.seed,
            holdout: 0.2,
            norm: "median".into(),
        }
    }
}

impl TimestampSection {
    pub fn mapper(&self) -> MapperConfig {
        MapperConfig {
            hidden: self.hidden,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
        }
    }

    pub fn norm(&self) -> CliResult<DistanceNorm> {
        match self.norm.to_ascii_lowercase().as_str() {
            "median" => Ok(DistanceNorm::Median),
            "raw" => Ok(DistanceNorm::Raw),
            other => Err(CliError::Config(format!("timestamp.norm '{other}' (expected median or raw)"))),
        }
    }

    pub fn label_width(&self, fallback: BinWidth) -> CliResult<BinWidth> {
        match &self.label_width {
            None => Ok(fallback),
            Some(w) => BinWidth::parse(w).map_err(|e| CliError::Config(format!("timestamp.label_width: {e}"))),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(CliError::Config(format!("timestamp.holdout {} outside [0, 1)", self.holdout)));
        }
        Ok(())
    }
}

impl PipelineConfig {
    /// Reads a config file; relative input and output paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input.instances, &mut cfg.input.corpus, &mut cfg.output.dir] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks every parameter that can be checked without reading data.
    pub fn validate(&self) -> CliResult<()> {
        self.binning.width()?;
        self.binning.origin()?;
        self.cluster.discovery()?;
        self.granger.correction()?;
        self.granger
            .config()
            .validate()
            .map_err(|e| CliError::Config(format!("granger: {e}")))?;
        self.forecast.methods()?;
        self.forecast.metric()?;
        self.forecast.exo_mode()?;
        if self.forecast.horizon == 0 {
            return Err(CliError::Config("forecast.horizon must be >= 1".into()));
        }
        if self.topics.k == 0 || self.topics.iterations == 0 {
            return Err(CliError::Config("topics.k and topics.iterations must be >= 1".into()));
        }
        self.timestamp.validate()?;
        self.timestamp.norm()?;
        let bw = self.binning.width()?;
        self.timestamp.label_width(bw)?;
        Ok(())
    }

    /// Canonical text used for the manifest's config hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: PipelineConfig = toml::from_str("[input]\ninstances = \"a.jsonl\"\ncorpus = \"b.jsonl\"\n").unwrap();
        assert_eq!(cfg.forecast.horizon, 26);
        assert_eq!(cfg.granger.q1, 2);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(toml::from_str::<PipelineConfig>("[granger]\nqq = 3\n").is_err());
        let mut cfg = PipelineConfig::default();
        cfg.forecast.methods = vec!["prophet".into()];
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 3);
        let mut cfg = PipelineConfig::default();
        cfg.binning.width = "3w".into();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn canonical_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.binning.origin = Some("2013-07-01".into());
        let back: PipelineConfig = toml::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
    }
}
