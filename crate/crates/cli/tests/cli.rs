mod common;

use std::fs;
use std::path::Path;

use common::{ok, pipeline_toml, synth_into, trendcause};
use trendcause_cli::chart::{line_chart, Line};
use trendcause_cli::pipeline::{Manifest, StageStatus};

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn parse_svg(text: &str) -> roxmltree::Document<'_> {
    let doc = roxmltree::Document::parse(text).expect("well-formed XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.tag_name().namespace(), Some("http://www.w3.org/2000/svg"));
    assert_eq!(root.attribute("version"), Some("1.1"));
    doc
}

fn count(doc: &roxmltree::Document, tag: &str) -> usize {
    doc.descendants().filter(|n| n.has_tag_name(tag)).count()
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.jsonl");
    let out = trendcause(&["cluster", "--instances", p(&missing), "--out", p(&dir.path().join("c.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.jsonl"));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[input]\ninstances = \"gone.jsonl\"\ncorpus = \"gone2.jsonl\"\n").unwrap();
    let out = trendcause(&["pipeline", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gone.jsonl"));
}

#[test]
fn malformed_records_are_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("inst.jsonl");
    fs::write(&f, "{\"id\":\"a\",\"date\":\"1999-13\",\"features\":[1.0]}\n").unwrap();
    let out = trendcause(&["cluster", "--instances", p(&f), "--out", p(&dir.path().join("c.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1999-13"));
}

#[test]
fn bad_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[granger]\nalpha = \"high\"\n").unwrap();
    assert_eq!(trendcause(&["pipeline", "--config", p(&cfg)]).status.code(), Some(3));
    fs::write(&cfg, "[forecast]\nmethods = [\"oracle\"]\n").unwrap();
    assert_eq!(trendcause(&["pipeline", "--config", p(&cfg)]).status.code(), Some(3));

    synth_into(dir.path());
    let out = trendcause(&[
        "granger",
        "--styles",
        p(&dir.path().join("styles.csv")),
        "--topics",
        p(&dir.path().join("topics.csv")),
        "--alpha",
        "1.5",
        "--out",
        p(&dir.path().join("g.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_writes_every_format() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    for f in ["instances.jsonl", "corpus.jsonl", "styles.csv", "topics.csv", "ground_truth.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let styles = fs::read_to_string(dir.path().join("styles.csv")).unwrap();
    let header = styles.lines().next().unwrap();
    assert!(header.starts_with("id,bin_0,bin_1,"));
    assert!(header.ends_with(",bin_59"));
    assert_eq!(styles.lines().count(), 1 + 8);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["links"].as_array().unwrap().len(), 4);
}

#[test]
fn subcommands_chain_on_a_synthetic_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_into(d);
    ok(&trendcause(&["cluster", "--instances", p(&d.join("instances.jsonl")), "--out", p(&d.join("clusters.json"))]));
    let clusters: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("clusters.json")).unwrap()).unwrap();
    let first = &clusters.as_array().unwrap()[0];
    for key in ["style_id", "exemplar", "members", "entropy", "top_labels"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    ok(&trendcause(&[
        "topics", "--corpus", p(&d.join("corpus.jsonl")), "--k", "4", "--iters", "40", "--seed", "7",
        "--min-doc-len", "1", "--out", p(&d.join("model.json")),
    ]));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["K"], 4);
    let trends = d.join("trends");
    ok(&trendcause(&[
        "trends", "--instances", p(&d.join("instances.jsonl")), "--clusters", p(&d.join("clusters.json")),
        "--model", p(&d.join("model.json")), "--width", "7d", "--origin", "2013-07-01", "--out", p(&trends),
    ]));
    ok(&trendcause(&[
        "granger", "--styles", p(&trends.join("styles.csv")), "--topics", p(&trends.join("topics.csv")),
        "--q1", "2", "--q2", "2", "--alpha", "0.05", "--intercept", "--correction", "bh",
        "--out", p(&d.join("granger.json")),
    ]));
    let svg_dir = d.join("charts");
    ok(&trendcause(&[
        "forecast", "--styles", p(&trends.join("styles.csv")), "--topics", p(&trends.join("topics.csv")),
        "--influences", p(&d.join("granger.json")), "--method", "ar,cultural", "--horizon", "8",
        "--metric", "mae", "--binning", p(&trends.join("binning.json")), "--out", p(&d.join("forecast.json")),
        "--svg", p(&svg_dir),
    ]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("forecast.json")).unwrap()).unwrap();
    assert_eq!(report["metric"], "mae");
    let charts: Vec<_> = fs::read_dir(&svg_dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(charts.len(), report["styles"].as_array().unwrap().len());
    for c in &charts {
        let text = fs::read_to_string(c).unwrap();
        let doc = parse_svg(&text);
        // train, truth, ar, cultural
        assert_eq!(count(&doc, "path"), 4);
        let legend = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("legend"))
            .expect("legend group");
        let entries: Vec<&str> = legend.children().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
        assert_eq!(entries, vec!["train", "truth", "ar", "cultural"]);
        assert!(text.contains("2013-07-01"), "x axis labelled with bin dates");
    }
    ok(&trendcause(&[
        "timeline", "--styles", p(&trends.join("styles.csv")), "--influences", p(&d.join("granger.json")),
        "--model", p(&d.join("model.json")), "--binning", p(&trends.join("binning.json")), "--k", "2",
        "--out", p(&d.join("timeline.json")), "--svg", p(&d.join("timeline.svg")),
    ]));
    let tl: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("timeline.json")).unwrap()).unwrap();
    assert_eq!(tl.as_array().unwrap().len(), 60);
    parse_svg(&fs::read_to_string(d.join("timeline.svg")).unwrap());
    ok(&trendcause(&[
        "timestamp", "train", "--instances", p(&d.join("instances.jsonl")), "--model", p(&d.join("model.json")),
        "--width", "4m", "--origin", "2013-07-01", "--hidden", "16,8", "--epochs", "3", "--seed", "7",
        "--out", p(&d.join("mapper.json")),
    ]));
    for mode in ["visual", "cultural"] {
        let out = d.join(format!("eval_{mode}.json"));
        ok(&trendcause(&[
            "timestamp", "eval", "--instances", p(&d.join("instances.jsonl")), "--mapper", p(&d.join("mapper.json")),
            "--mode", mode, "--out", p(&out),
        ]));
        let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        let acc = r["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn pipeline_completes_all_stages_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, pipeline_toml("run")).unwrap();
    let read = || -> Manifest {
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap()
    };
    ok(&trendcause(&["pipeline", "--config", p(&cfg)]));
    let first = read();
    assert_eq!(first.stages.len(), 7);
    assert!(first.stages.iter().all(|s| s.status == StageStatus::Completed));
    for s in &first.stages {
        for a in &s.artifacts {
            assert!(dir.path().join("run").join(&a.path).is_file(), "{}", a.path);
        }
    }
    ok(&trendcause(&["--threads", "1", "pipeline", "--config", p(&cfg)]));
    assert_eq!(read(), first);
}

#[test]
fn failed_stage_is_recorded_and_earlier_artifacts_kept() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    // a horizon longer than the series makes the forecast stage fail
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, pipeline_toml("run").replace("horizon = 8", "horizon = 80")).unwrap();
    let out = trendcause(&["pipeline", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let m: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    let status: Vec<(&str, &StageStatus)> = m.stages.iter().map(|s| (s.name.as_str(), &s.status)).collect();
    assert_eq!(status[..3].iter().filter(|(_, s)| **s == StageStatus::Completed).count(), 3);
    let granger = m.stages.iter().find(|s| s.name == "granger").unwrap();
    let forecast = m.stages.iter().find(|s| s.name == "forecast").unwrap();
    assert_eq!(forecast.status, StageStatus::Failed);
    assert!(forecast.error.is_some());
    assert!(m.stages.iter().skip_while(|s| s.name != "forecast").skip(1).all(|s| s.status == StageStatus::Skipped));
    let _ = granger;
    for f in ["clusters.json", "model.json", "styles.csv", "topics.csv"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
}

#[test]
fn constant_series_draws_a_horizontal_line() {
    let svg = line_chart("flat", &[Line::new("c", 0, vec![0.25; 12])], &[], "share").unwrap();
    let doc = parse_svg(&svg);
    let path = doc.descendants().find(|n| n.has_tag_name("path")).unwrap();
    let d = path.attribute("d").unwrap();
    let ys: Vec<f64> = d
        .split(|c: char| c == 'M' || c == 'L' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|pt| pt.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ys.len(), 12);
    assert!(ys.iter().all(|&y| y == ys[0]));
}

#[test]
fn chart_rejects_zero_length_series() {
    assert!(line_chart("x", &[Line::new("empty", 0, Vec::new())], &[], "").is_err());
    assert!(line_chart("x", &[], &[], "").is_err());
}
