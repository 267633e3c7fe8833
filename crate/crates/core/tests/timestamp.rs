mod support;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendcause_core::synth::{timestamp_benchmark, TimestampBenchConfig};
use trendcause_core::timestamp::{
    eval_timestamp, nearest, retrieval_distances, text_feature, train_mapper, CrossModalMapper, DistanceNorm,
    MapperConfig, Query, RetrievalMode, TimestampDatabase,
};

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    (xs, ys)
}

fn gradient_error(mapper: &CrossModalMapper, xs: &[Vec<f64>], ys: &[Vec<f64>], indices: &[usize]) -> f64 {
    let (_, grad) = mapper.loss_and_gradient(xs, ys);
    let params = mapper.parameters();
    let mut probe = mapper.clone();
    let mut loss = |p: &[f64]| {
        probe.set_parameters(p);
        probe.loss(xs, ys)
    };
    support::grad_check::max_relative_error(&mut loss, &params, &grad, indices, 1e-7)
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xs, ys) = random_batch(&mut rng, 5, 6, 4);
        let cfg = MapperConfig { hidden: [12, 8], ..MapperConfig::new(seed) };
        let mapper = CrossModalMapper::init(6, 4, cfg);
        let all: Vec<usize> = (0..mapper.param_count()).collect();
        let err = gradient_error(&mapper, &xs, &ys, &all);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn default_width_gradient_spot_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (xs, ys) = random_batch(&mut rng, 5, 16, 10);
    let mapper = CrossModalMapper::init(16, 10, MapperConfig::new(42));
    let mut idx: Vec<usize> = (0..mapper.param_count()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(400);
    assert!(gradient_error(&mapper, &xs, &ys, &idx) < 1e-4);
}

#[test]
fn realizable_linear_target_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.5 * x[0] - 0.2 * x[1] + 0.3, 0.1 * x[2] + 0.4 * x[0]]).collect();
    let cfg = MapperConfig { hidden: [16, 16], epochs: 500, ..MapperConfig::new(3) };
    let mapper = train_mapper(&xs, &ys, cfg).unwrap();
    assert!(mapper.final_loss < 1e-3, "{}", mapper.final_loss);
    assert_eq!(mapper.final_loss, mapper.loss(&xs, &ys));
}

#[test]
fn text_feature_is_the_brute_force_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|_| {
            let r: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..100).map(|_| rng.random_range(0..3)).collect();
    for label in 0..3 {
        let got = text_feature(label, &rows, &labels).unwrap();
        let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &l)| l == label).map(|(r, _)| r).collect();
        for k in 0..5 {
            let mut total = 0.0;
            for m in &members {
                total += m[k];
            }
            assert!((got[k] - total / members.len() as f64).abs() < 1e-12);
        }
    }
    assert!(text_feature(9, &rows, &labels).is_err());
}

fn small_bench(seed: u64) -> trendcause_core::synth::TimestampBench {
    timestamp_benchmark(&TimestampBenchConfig { seed, per_label: 60, ..TimestampBenchConfig::default() }).unwrap()
}

#[test]
fn duplicated_queries_are_retrieved_exactly() {
    let bench = small_bench(1);
    let db = bench.database().unwrap();
    let queries: Vec<Query> = bench
        .database
        .iter()
        .map(|e| Query { id: e.id.clone(), visual: e.visual.clone(), label: e.label })
        .collect();
    let eval = eval_timestamp(&db, &queries, None, RetrievalMode::VisualOnly, DistanceNorm::Median).unwrap();
    assert_eq!(eval.accuracy, 1.0);
}

#[test]
fn visual_only_ignores_the_mapper() {
    let bench = small_bench(2);
    let db = bench.database().unwrap();
    let (xs, ys) = bench.training_pairs();
    let mapper = train_mapper(&xs, &ys, MapperConfig { hidden: [8, 8], epochs: 2, ..MapperConfig::new(2) }).unwrap();
    let q = &bench.queries[0].visual;
    let without = retrieval_distances(q, None, &db, RetrievalMode::VisualOnly, DistanceNorm::Median).unwrap();
    let with = retrieval_distances(q, Some(&mapper), &db, RetrievalMode::VisualOnly, DistanceNorm::Median).unwrap();
    assert_eq!(without, with);
}

#[test]
fn nearest_is_unchanged_by_a_common_offset() {
    let bench = small_bench(3);
    let db = bench.database().unwrap();
    for q in bench.queries.iter().take(20) {
        let d = retrieval_distances(&q.visual, None, &db, RetrievalMode::VisualOnly, DistanceNorm::Raw).unwrap();
        let shifted: Vec<f64> = d.iter().map(|v| v + 3.5).collect();
        assert_eq!(nearest(&db, &d), nearest(&db, &shifted));
    }
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let bench = small_bench(4);
    let mut entries = bench.database.clone();
    let mut labels: Vec<usize> = entries.iter().map(|e| e.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    for (e, l) in entries.iter_mut().zip(labels) {
        e.label = l;
    }
    let db = TimestampDatabase::new(entries, bench.labels.clone()).unwrap();
    let eval = eval_timestamp(&db, &bench.queries, None, RetrievalMode::VisualOnly, DistanceNorm::Median).unwrap();
    assert!((eval.accuracy - 0.05).abs() <= 0.03, "{}", eval.accuracy);
    assert!(eval.prior_accuracy <= 0.1);
}
