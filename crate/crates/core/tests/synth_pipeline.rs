use std::collections::HashMap;

use trendcause_core::influence::{screen_all_pairs, Correction, GrangerConfig};
use trendcause_core::style::{discover_styles, DiscoveryConfig};
use trendcause_core::synth::{generate, CorpusProcess, InstanceProcess, StyleProcess, SynthConfig, TopicProcess};
use trendcause_core::timeline::{build_timeline, lift_index, TimelineConfig};
use trendcause_core::topics::{build_corpus, lda_fit, CorpusFilter, LdaConfig};

fn scenario() -> SynthConfig {
    SynthConfig {
        seed: 21,
        bins: 60,
        topics: TopicProcess { count: 4, ..TopicProcess::default() },
        styles: StyleProcess { causal: 4, null: 4, ..StyleProcess::default() },
        instances: InstanceProcess { per_bin: 6, ..InstanceProcess::default() },
        corpus: CorpusProcess { docs_per_bin: 8, doc_len: 20, words_per_topic: 25 },
        ..SynthConfig::default()
    }
}

#[test]
fn clustering_recovers_instance_styles() {
    let data = generate(&scenario()).unwrap();
    let truth: HashMap<&str, &str> =
        data.truth.instance_styles.iter().map(|(i, s)| (i.as_str(), s.as_str())).collect();
    let found = discover_styles(&data.instances, &DiscoveryConfig::default()).unwrap();
    let (mut agree, mut total) = (0, 0);
    for style in &found.styles {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for m in &style.members {
            *counts.entry(truth[m.as_str()]).or_default() += 1;
        }
        agree += counts.values().max().unwrap();
        total += style.members.len();
    }
    assert!(agree as f64 / total as f64 >= 0.95, "purity {agree}/{total}");
}

#[test]
fn topics_recover_document_sources() {
    let data = generate(&scenario()).unwrap();
    let corpus = build_corpus(&data.documents, &CorpusFilter::default()).unwrap();
    let model = lda_fit(&corpus, &LdaConfig::new(4, 200, 5)).unwrap();
    let truth: HashMap<&str, usize> = data
        .truth
        .document_topics
        .iter()
        .map(|(d, t)| (d.as_str(), t.trim_start_matches("topic_").parse().unwrap()))
        .collect();
    // majority source per inferred topic
    let mut table = vec![vec![0usize; 4]; 4];
    for (doc, row) in model.doc_ids.iter().zip(&model.theta) {
        let k = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        table[k][truth[doc.as_str()]] += 1;
    }
    let agree: usize = table.iter().map(|r| r.iter().max().unwrap()).sum();
    assert!(agree as f64 / model.doc_ids.len() as f64 >= 0.9);
}

#[test]
fn planted_topic_shows_up_at_the_style_peak() {
    let cfg = scenario();
    let data = generate(&cfg).unwrap();
    let corpus = build_corpus(&data.documents, &CorpusFilter::default()).unwrap();
    let model = lda_fit(&corpus, &LdaConfig::new(4, 50, 5)).unwrap();
    let styles = &data.trends.styles;
    let granger = GrangerConfig { intercept: true, ..GrangerConfig::default() };
    let screen = screen_all_pairs(styles, &data.trends.topics, &granger, Correction::BenjaminiHochberg).unwrap();
    let timeline = build_timeline(
        styles,
        &screen.influence,
        &model,
        &data.binning,
        &TimelineConfig { k: styles.len(), ..TimelineConfig::default() },
    );
    assert_eq!(timeline.len(), cfg.bins);
    let mut checked = 0;
    for link in &data.truth.links {
        if !screen.influences_of(&link.style_id).contains(&link.topic_id) {
            continue;
        }
        let series = styles.iter().find(|s| s.id == link.style_id).unwrap();
        let lift = lift_index(series).unwrap();
        let peak = (0..lift.len()).max_by(|&a, &b| lift[a].total_cmp(&lift[b])).unwrap();
        let entry = timeline[peak].iconic.iter().find(|e| e.style_id == link.style_id).unwrap();
        assert!(entry.topics.iter().any(|t| t.topic_id == link.topic_id));
        checked += 1;
    }
    assert!(checked >= 3);
}
