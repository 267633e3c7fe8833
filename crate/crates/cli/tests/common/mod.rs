//! Helpers for driving the `trendcause` binary in tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const SCENARIO: &str = r#"{
  "seed": 11,
  "bins": 60,
  "topics": { "count": 4 },
  "styles": { "causal": 4, "null": 4 },
  "instances": { "per_bin": 8 },
  "corpus": { "docs_per_bin": 8, "doc_len": 20, "words_per_topic": 25 }
}"#;

pub fn pipeline_toml(out: &str) -> String {
    format!(
        r#"[input]
instances = "instances.jsonl"
corpus = "corpus.jsonl"

[output]
dir = "{out}"

[binning]
origin = "2013-07-01"
width = "7d"

[topics]
k = 4
iterations = 60
seed = 3
min_doc_len = 1

[granger]
intercept = true
correction = "bh"

[forecast]
methods = ["ar", "cultural"]
horizon = 8

[timestamp]
label_width = "4m"
hidden = [16, 8]
epochs = 5
seed = 3
"#
    )
}

pub fn trendcause(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trendcause"))
        .args(args)
        .env("TRENDCAUSE_LOG", "warn")
        .env_remove("TRENDCAUSE_CONFIG")
        .env_remove("TRENDCAUSE_SEED")
        .env_remove("TRENDCAUSE_THREADS")
        .output()
        .expect("binary runs")
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes the small scenario into `dir` via `trendcause synth`.
pub fn synth_into(dir: &Path) {
    let scenario = dir.join("scenario_in.json");
    std::fs::write(&scenario, SCENARIO).unwrap();
    ok(&trendcause(&[
        "synth",
        "--config",
        scenario.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]));
}
