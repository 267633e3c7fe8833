use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use trendcause_cli::config::PipelineConfig;
use trendcause_cli::error::{CliError, CliResult};
use trendcause_cli::pipeline::run_pipeline;
use trendcause_cli::{chart, io, stages};
use trendcause_core::influence::Screen;
use trendcause_core::synth::{generate, SynthConfig};
use trendcause_core::timestamp::RetrievalMode;
use trendcause_core::topics::TopicModel;
use trendcause_core::{DateBinning, TrendKind, TrendSeries};

#[derive(Parser)]
#[command(name = "trendcause", version, about = "Influence discovery between text topics and visual style trends")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "TRENDCAUSE_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "TRENDCAUSE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover styles by affinity propagation and entropy screening.
    Cluster(ClusterArgs),
    /// Fit an LDA topic model to a dated corpus.
    Topics(TopicsArgs),
    /// Bin clusters and topics into trend series.
    Trends(TrendsArgs),
    /// Granger-screen every topic against every style.
    Granger(GrangerArgs),
    /// Forecast held-out style trends and score them.
    Forecast(ForecastArgs),
    /// Iconic styles per era with their influencing topics.
    Timeline(TimelineArgs),
    /// Train or evaluate the photo timestamping retrieval.
    #[command(subcommand)]
    Timestamp(TimestampCommand),
    /// Generate a synthetic scenario with planted influences.
    Synth(SynthArgs),
    /// Run every stage end to end from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    preference: Option<f64>,
    /// drop-high or keep-low
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    filter_k: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, env = "TRENDCAUSE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    min_doc_len: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BinningArgs {
    /// Bin width such as 7d, 4m or 1y.
    #[arg(long)]
    width: Option<String>,
    /// First day of bin 0.
    #[arg(long)]
    origin: Option<String>,
}

#[derive(Args)]
struct TrendsArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    binning: BinningArgs,
    /// Keep empty bins at zero instead of interpolating.
    #[arg(long)]
    no_interpolate: bool,
    /// Directory receiving styles.csv, topics.csv and binning.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GrangerArgs {
    #[arg(long)]
    styles: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    q1: Option<usize>,
    #[arg(long)]
    q2: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    intercept: bool,
    /// none or bh
    #[arg(long)]
    correction: Option<String>,
    #[arg(long)]
    holdout_tail: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    styles: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    /// Output of `granger`; required by the cultural method.
    #[arg(long)]
    influences: Option<PathBuf>,
    /// Repeatable or comma-separated: last, linear, mean, exp, ar, cultural.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    q1: Option<usize>,
    #[arg(long)]
    q2: Option<usize>,
    #[arg(long)]
    exp_alpha: Option<f64>,
    /// observed or forecast
    #[arg(long)]
    exo_mode: Option<String>,
    /// binning.json from `trends`, used to label chart axes with dates.
    #[arg(long)]
    binning: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Directory receiving one SVG chart per style.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct TimelineArgs {
    #[arg(long)]
    styles: PathBuf,
    #[arg(long)]
    influences: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// binning.json from `trends`; otherwise built from --width/--origin.
    #[arg(long)]
    binning: Option<PathBuf>,
    #[command(flatten)]
    binning_args: BinningArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TimestampCommand {
    Train(TimestampTrainArgs),
    Eval(TimestampEvalArgs),
}

#[derive(Args)]
struct TimestampTrainArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Date label width, e.g. 1y.
    #[command(flatten)]
    binning: BinningArgs,
    /// Two hidden layer widths, e.g. 256,128.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, env = "TRENDCAUSE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TimestampEvalArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Output of `timestamp train`.
    #[arg(long)]
    mapper: PathBuf,
    /// visual or cultural
    #[arg(long, default_value = "cultural")]
    mode: String,
    /// median or raw
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON scenario; omitted fields take their defaults. The global
    /// `--config` is read as the scenario when this is absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, env = "TRENDCAUSE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, env = "TRENDCAUSE_SEED")]
    seed: Option<u64>,
}

fn base_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_styles(path: &Path) -> CliResult<Vec<TrendSeries>> {
    io::read_series_csv(path, TrendKind::Style)
}

fn bin_labels(binning: &DateBinning) -> Vec<String> {
    (0..binning.bin_count).map(|k| binning.bin_start(k).to_string()).collect()
}

fn apply_binning(cfg: &mut PipelineConfig, args: &BinningArgs) {
    set(&mut cfg.binning.width, args.width.clone());
    if args.origin.is_some() {
        cfg.binning.origin = args.origin.clone();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Cluster(a) => {
            let mut cfg = base_config(config_path)?;
            let c = &mut cfg.cluster;
            set(&mut c.damping, a.damping);
            set(&mut c.max_iter, a.max_iter);
            set(&mut c.filter, a.filter);
            set(&mut c.filter_k, a.filter_k);
            if a.preference.is_some() {
                c.preference = a.preference;
            }
            c.discovery()?;
            let instances = io::read_instances(&a.instances)?;
            let d = stages::cluster(&instances, c)?;
            io::write_json(&a.out, &d.styles)?;
        }
        Command::Topics(a) => {
            let mut cfg = base_config(config_path)?;
            let t = &mut cfg.topics;
            set(&mut t.k, a.k);
            set(&mut t.iterations, a.iters);
            set(&mut t.seed, a.seed);
            set(&mut t.beta, a.beta);
            set(&mut t.min_doc_len, a.min_doc_len);
            if a.alpha.is_some() {
                t.alpha = a.alpha;
            }
            let docs = io::read_corpus(&a.corpus)?;
            let model = stages::topics(&docs, t)?;
            io::write_json(&a.out, &model)?;
        }
        Command::Trends(a) => {
            let mut cfg = base_config(config_path)?;
            apply_binning(&mut cfg, &a.binning);
            if a.no_interpolate {
                cfg.trends.interpolate = false;
            }
            cfg.binning.width()?;
            let instances = io::read_instances(&a.instances)?;
            let clusters: Vec<trendcause_core::style::StyleCluster> = io::read_json(&a.clusters)?;
            let model: TopicModel = io::read_json(&a.model)?;
            let dates: Vec<_> = instances.iter().map(|r| r.date).chain(model.doc_dates.iter().copied()).collect();
            let binning = stages::resolve_binning(&cfg.binning, &dates)?;
            let t = stages::trends(&clusters, &instances, &model, &binning, cfg.trends.interpolate)?;
            io::write_series_csv(&a.out.join("styles.csv"), &t.styles)?;
            io::write_series_csv(&a.out.join("topics.csv"), &t.topics)?;
            io::write_json(&a.out.join("binning.json"), &t.meta)?;
        }
        Command::Granger(a) => {
            let mut cfg = base_config(config_path)?;
            let g = &mut cfg.granger;
            set(&mut g.q1, a.q1);
            set(&mut g.q2, a.q2);
            set(&mut g.alpha, a.alpha);
            set(&mut g.correction, a.correction);
            set(&mut g.holdout_tail, a.holdout_tail);
            g.intercept |= a.intercept;
            g.correction()?;
            g.config().validate().map_err(|e| CliError::Config(e.to_string()))?;
            let styles = read_styles(&a.styles)?;
            let topics = io::read_series_csv(&a.topics, TrendKind::Topic)?;
            let screen = stages::granger(&styles, &topics, g)?;
            io::write_json(&a.out, &screen)?;
        }
        Command::Forecast(a) => {
            let mut cfg = base_config(config_path)?;
            let f = &mut cfg.forecast;
            if !a.methods.is_empty() {
                f.methods = a.methods;
            }
            set(&mut f.horizon, a.horizon);
            set(&mut f.metric, a.metric);
            set(&mut f.q1, a.q1);
            set(&mut f.q2, a.q2);
            set(&mut f.exp_alpha, a.exp_alpha);
            set(&mut f.exo_mode, a.exo_mode);
            f.methods()?;
            f.metric()?;
            f.exo_mode()?;
            if f.horizon == 0 {
                return Err(CliError::Config("--horizon must be >= 1".into()));
            }
            let styles = read_styles(&a.styles)?;
            let topics = io::read_series_csv(&a.topics, TrendKind::Topic)?;
            let influence = match &a.influences {
                Some(p) => io::read_json::<Screen>(p)?.influence,
                None if f.methods.iter().any(|m| m.eq_ignore_ascii_case("cultural")) => {
                    return Err(CliError::Config("the cultural method needs --influences".into()))
                }
                None => Default::default(),
            };
            let summary = stages::forecast(&styles, &topics, &influence, f)?;
            io::write_json(&a.out, &summary)?;
            if let Some(dir) = &a.svg {
                let labels = match &a.binning {
                    Some(p) => io::read_json::<stages::TrendMeta>(p)?
                        .bin_starts
                        .iter()
                        .map(|d| d.to_string())
                        .collect(),
                    None => Vec::new(),
                };
                for (file, svg) in stages::forecast_charts(&summary, &labels)? {
                    io::write_text(&dir.join(file), &svg)?;
                }
            }
        }
        Command::Timeline(a) => {
            let mut cfg = base_config(config_path)?;
            apply_binning(&mut cfg, &a.binning_args);
            set(&mut cfg.timeline.k, a.k);
            let styles = read_styles(&a.styles)?;
            let influence = io::read_json::<Screen>(&a.influences)?.influence;
            let model: TopicModel = io::read_json(&a.model)?;
            let binning = match &a.binning {
                Some(p) => io::read_json::<stages::TrendMeta>(p)?.binning,
                None => {
                    let origin = cfg.binning.origin()?.ok_or_else(|| {
                        CliError::Config("timeline needs --binning or --origin".into())
                    })?;
                    DateBinning::new(origin, cfg.binning.width()?, styles[0].len())
                        .map_err(|e| CliError::Config(e.to_string()))?
                }
            };
            let entries = stages::timeline(&styles, &influence, &model, &binning, &cfg.timeline)?;
            io::write_json(&a.out, &entries)?;
            if let Some(svg) = &a.svg {
                io::write_text(svg, &chart::timeline_strip("Iconic styles by era", &entries)?)?;
            }
            info!("timeline: {} bins, labels {}", entries.len(), bin_labels(&binning).len());
        }
        Command::Timestamp(TimestampCommand::Train(a)) => {
            let mut cfg = base_config(config_path)?;
            apply_binning(&mut cfg, &a.binning);
            let t = &mut cfg.timestamp;
            if let Some(h) = a.hidden {
                let [h1, h2] = h[..] else {
                    return Err(CliError::Config("--hidden takes two widths, e.g. 256,128".into()));
                };
                t.hidden = [h1, h2];
            }
            set(&mut t.lr, a.lr);
            set(&mut t.epochs, a.epochs);
            set(&mut t.batch, a.batch);
            set(&mut t.seed, a.seed);
            set(&mut t.holdout, a.holdout);
            t.validate()?;
            let width = cfg.timestamp.label_width(cfg.binning.width()?)?;
            cfg.binning.width = width.to_string();
            let instances = io::read_instances(&a.instances)?;
            let model: TopicModel = io::read_json(&a.model)?;
            let dates: Vec<_> = instances.iter().map(|r| r.date).chain(model.doc_dates.iter().copied()).collect();
            let labels = stages::resolve_binning(&cfg.binning, &dates)?;
            let artifact = stages::timestamp_train(&instances, &model, &labels, &cfg.timestamp)?;
            io::write_json(&a.out, &artifact)?;
        }
        Command::Timestamp(TimestampCommand::Eval(a)) => {
            let mut cfg = base_config(config_path)?;
            set(&mut cfg.timestamp.norm, a.norm);
            let norm = cfg.timestamp.norm()?;
            let mode = match a.mode.as_str() {
                "visual" | "visual_only" => RetrievalMode::VisualOnly,
                "cultural" | "visual_plus_cultural" => RetrievalMode::VisualPlusCultural,
                other => return Err(CliError::Config(format!("--mode '{other}' (expected visual or cultural)"))),
            };
            let instances = io::read_instances(&a.instances)?;
            let artifact: stages::TimestampArtifact = io::read_json(&a.mapper)?;
            let report = stages::timestamp_eval(&instances, &artifact, mode, norm)?;
            println!("accuracy {:.4} over {} queries", report.eval.accuracy, report.eval.queries);
            io::write_json(&a.out, &report)?;
        }
        Command::Synth(a) => {
            let mut sc: SynthConfig = match a.scenario.as_deref().or(config_path) {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| CliError::input(p, e))?;
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                }
                None => SynthConfig::default(),
            };
            set(&mut sc.seed, a.seed);
            sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let data = generate(&sc).map_err(CliError::stage("synth"))?;
            let out = &a.out;
            io::write_jsonl(&out.join("instances.jsonl"), &io::instance_lines(&data.instances))?;
            io::write_jsonl(&out.join("corpus.jsonl"), &io::document_lines(&data.documents))?;
            io::write_series_csv(&out.join("styles.csv"), &data.trends.styles)?;
            io::write_series_csv(&out.join("topics.csv"), &data.trends.topics)?;
            io::write_json(&out.join("ground_truth.json"), &data.truth)?;
            io::write_json(&out.join("scenario.json"), &sc)?;
            io::write_text(&out.join("pipeline.toml"), &synth_pipeline_toml(&sc))?;
            info!(
                "synth: {} instances, {} documents written to {}",
                data.instances.len(),
                data.documents.len(),
                out.display()
            );
        }
        Command::Pipeline(a) => {
            let path = config_path.ok_or_else(|| CliError::Config("pipeline needs --config".into()))?;
            let mut cfg = PipelineConfig::load(path)?;
            set(&mut cfg.output.dir, a.out);
            if let Some(s) = a.seed {
                cfg.topics.seed = s;
                cfg.timestamp.seed = s;
            }
            let manifest = run_pipeline(&cfg)?;
            println!(
                "{} of {} stages completed; manifest at {}",
                manifest.completed(),
                manifest.stages.len(),
                cfg.output.dir.join("manifest.json").display()
            );
        }
    }
    Ok(())
}

/// Config that runs the pipeline on a synthetic scenario written next to it.
fn synth_pipeline_toml(sc: &SynthConfig) -> String {
    let mut cfg = PipelineConfig::default();
    cfg.input.instances = "instances.jsonl".into();
    cfg.input.corpus = "corpus.jsonl".into();
    cfg.output.dir = "run".into();
    cfg.binning.origin = Some(sc.origin.to_string());
    cfg.binning.width = sc.width.to_string();
    cfg.topics.k = sc.topics.count;
    cfg.topics.iterations = 200;
    cfg.topics.seed = sc.seed;
    cfg.topics.min_doc_len = 1;
    cfg.granger.intercept = true;
    cfg.granger.correction = "bh".into();
    cfg.forecast.horizon = 10;
    cfg.forecast.methods = vec!["ar".into(), "cultural".into()];
    cfg.timestamp.hidden = [64, 32];
    cfg.timestamp.epochs = 30;
    cfg.timestamp.seed = sc.seed;
    cfg.canonical()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRENDCAUSE_LOG", "info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
