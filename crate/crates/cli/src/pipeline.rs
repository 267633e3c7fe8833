//! End-to-end run: cluster, topics, trends, granger, forecast, timeline,
//! timestamp. A manifest is rewritten after every stage so an interrupted
//! or failed run still documents what it produced.

use std::path::{Path, PathBuf};

use log::{error, info};
use serde::{Deserialize, Serialize};
use trendcause_core::timestamp::RetrievalMode;

use crate::chart::timeline_strip;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::stages;

pub const STAGES: [&str; 7] = ["cluster", "topics", "trends", "granger", "forecast", "timeline", "timestamp"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Completed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub artifacts: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub topics: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn completed(&self) -> usize {
        self.stages.iter().filter(|s| s.status == StageStatus::Completed).count()
    }
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
    current: Vec<Artifact>,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn record(&mut self, rel: &str) -> CliResult<()> {
        let sha256 = io::sha256_file(&self.path(rel))?;
        self.current.push(Artifact {
            path: rel.to_string(),
            sha256,
        });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        io::write_json(&self.path(rel), value)?;
        self.record(rel)
    }

    fn text(&mut self, rel: &str, text: &str) -> CliResult<()> {
        io::write_text(&self.path(rel), text)?;
        self.record(rel)
    }

    fn finish(&mut self, name: &str, outcome: &CliResult<()>) -> CliResult<()> {
        let artifacts = std::mem::take(&mut self.current);
        let (status, err) = match outcome {
            Ok(()) => (StageStatus::Completed, None),
            Err(e) => (StageStatus::Failed, Some(e.to_string())),
        };
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status,
            artifacts,
            error: err,
        });
        self.write_manifest()
    }

    fn write_manifest(&self) -> CliResult<()> {
        io::write_json(&self.dir.join("manifest.json"), &self.manifest)
    }
}

/// Runs every stage in order, stopping at the first failure. The returned
/// manifest is also written to `<output.dir>/manifest.json`; on failure the
/// error of the failing stage is returned after the manifest is written.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<Manifest> {
    cfg.validate()?;
    for p in [&cfg.input.instances, &cfg.input.corpus] {
        if p.as_os_str().is_empty() {
            return Err(CliError::Config("input.instances and input.corpus are required".into()));
        }
        if !p.is_file() {
            return Err(CliError::input(p, "file not found"));
        }
    }
    let instances = io::read_instances(&cfg.input.instances)?;
    let docs = io::read_corpus(&cfg.input.corpus)?;

    let mut run = Run {
        dir: cfg.output.dir.clone(),
        manifest: Manifest {
            tool: "trendcause".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: io::sha256_bytes(cfg.canonical().as_bytes()),
            seeds: Seeds {
                topics: cfg.topics.seed,
                timestamp: cfg.timestamp.seed,
            },
            stages: Vec::new(),
        },
        current: Vec::new(),
    };
    std::fs::create_dir_all(&run.dir).map_err(|e| CliError::output(&run.dir, e))?;

    let mut state = State::default();
    let mut failure = None;
    for name in STAGES {
        if failure.is_some() {
            run.manifest.stages.push(StageRecord {
                name: name.into(),
                status: StageStatus::Skipped,
                artifacts: Vec::new(),
                error: None,
            });
            continue;
        }
        info!("stage {name}");
        let outcome = run_stage(name, cfg, &instances, &docs, &mut state, &mut run);
        run.finish(name, &outcome)?;
        if let Err(e) = outcome {
            error!("stage {name} failed: {e}");
            failure = Some(e);
        }
    }
    run.write_manifest()?;
    match failure {
        Some(e) => Err(e),
        None => Ok(run.manifest),
    }
}

#[derive(Default)]
struct State {
    discovery: Option<trendcause_core::style::Discovery>,
    model: Option<trendcause_core::topics::TopicModel>,
    trends: Option<stages::Trends>,
    screen: Option<trendcause_core::influence::Screen>,
}

fn run_stage(
    name: &str,
    cfg: &PipelineConfig,
    instances: &[trendcause_core::InstanceRecord],
    docs: &[trendcause_core::topics::RawDocument],
    st: &mut State,
    run: &mut Run,
) -> CliResult<()> {
    match name {
        "cluster" => {
            let d = stages::cluster(instances, &cfg.cluster)?;
            run.json("clusters.json", &d.styles)?;
            run.json("cluster_diagnostics.json", &stages::ClusterDiagnostics::from(&d))?;
            st.discovery = Some(d);
        }
        "topics" => {
            let m = stages::topics(docs, &cfg.topics)?;
            run.json("model.json", &m)?;
            st.model = Some(m);
        }
        "trends" => {
            let (d, m) = (st.discovery.as_ref().expect("cluster ran"), st.model.as_ref().expect("topics ran"));
            let dates: Vec<_> = instances.iter().map(|r| r.date).chain(m.doc_dates.iter().copied()).collect();
            let binning = stages::resolve_binning(&cfg.binning, &dates)?;
            let t = stages::trends(&d.styles, instances, m, &binning, cfg.trends.interpolate)?;
            io::write_series_csv(&run.path("styles.csv"), &t.styles)?;
            run.record("styles.csv")?;
            io::write_series_csv(&run.path("topics.csv"), &t.topics)?;
            run.record("topics.csv")?;
            run.json("binning.json", &t.meta)?;
            st.trends = Some(t);
        }
        "granger" => {
            let t = st.trends.as_ref().expect("trends ran");
            let mut sec = cfg.granger.clone();
            sec.holdout_tail = sec.holdout_tail.max(cfg.forecast.horizon);
            let s = stages::granger(&t.styles, &t.topics, &sec)?;
            run.json("granger.json", &s)?;
            st.screen = Some(s);
        }
        "forecast" => {
            let (t, s) = (st.trends.as_ref().expect("trends ran"), st.screen.as_ref().expect("granger ran"));
            let summary = stages::forecast(&t.styles, &t.topics, &s.influence, &cfg.forecast)?;
            run.json("forecast.json", &summary)?;
            if cfg.forecast.svg {
                let labels: Vec<String> = t.meta.bin_starts.iter().map(|d| d.to_string()).collect();
                for (file, svg) in stages::forecast_charts(&summary, &labels)? {
                    run.text(&format!("charts/{file}"), &svg)?;
                }
            }
        }
        "timeline" => {
            let (t, s) = (st.trends.as_ref().expect("trends ran"), st.screen.as_ref().expect("granger ran"));
            let m = st.model.as_ref().expect("topics ran");
            let entries = stages::timeline(&t.styles, &s.influence, m, &t.meta.binning, &cfg.timeline)?;
            run.json("timeline.json", &entries)?;
            if cfg.timeline.svg {
                run.text("timeline.svg", &timeline_strip("Iconic styles by era", &entries)?)?;
            }
        }
        "timestamp" => {
            let m = st.model.as_ref().expect("topics ran");
            let t = st.trends.as_ref().expect("trends ran");
            let width = cfg.timestamp.label_width(t.meta.binning.width)?;
            let mut bsec = cfg.binning.clone();
            bsec.width = width.to_string();
            let dates: Vec<_> = instances.iter().map(|r| r.date).chain(m.doc_dates.iter().copied()).collect();
            let labels = stages::resolve_binning(&bsec, &dates)?;
            let artifact = stages::timestamp_train(instances, m, &labels, &cfg.timestamp)?;
            run.json("mapper.json", &artifact)?;
            let norm = cfg.timestamp.norm()?;
            let reports = [RetrievalMode::VisualOnly, RetrievalMode::VisualPlusCultural]
                .into_iter()
                .map(|mode| stages::timestamp_eval(instances, &artifact, mode, norm))
                .collect::<CliResult<Vec<_>>>()?;
            run.json("timestamp_eval.json", &reports)?;
        }
        other => unreachable!("unknown stage {other}"),
    }
    Ok(())
}

/// Reads a manifest written by [`run_pipeline`].
pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    io::read_json(&dir.join("manifest.json"))
}
