//! Photo timestamping by nearest-neighbour retrieval, optionally enriched
//! with cultural features inferred from the visual features by a learned
//! three-layer perceptron.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean topic distribution of the documents carrying `label`.
pub fn text_feature(label: usize, doc_topics: &[Vec<f64>], doc_labels: &[usize]) -> Result<Vec<f64>> {
    if doc_topics.len() != doc_labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} topic rows vs {} labels",
            doc_topics.len(),
            doc_labels.len()
        )));
    }
    let k = doc_topics.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; k];
    let mut n = 0usize;
    for (theta, _) in doc_topics.iter().zip(doc_labels).filter(|(_, &l)| l == label) {
        for (s, v) in sum.iter_mut().zip(theta) {
            *s += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoDocuments(label));
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapperConfig {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl MapperConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            hidden: [256, 128],
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 64,
            seed,
        }
    }
}

/// Dense layer, weights row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn he(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("valid std");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Visual-to-cultural feature mapping: two rectified hidden layers and a
/// linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModalMapper {
    pub layers: Vec<Layer>,
    pub config: MapperConfig,
    /// Mean squared error over the training set after the last epoch.
    pub final_loss: f64,
}

struct Activations {
    // pre-activations and outputs per layer; outputs[0] is the input
    outputs: Vec<Vec<f64>>,
}

impl CrossModalMapper {
    pub fn init(input_dim: usize, output_dim: usize, config: MapperConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = [input_dim, config.hidden[0], config.hidden[1], output_dim];
        let layers = dims.windows(2).map(|w| Layer::he(w[0], w[1], &mut rng)).collect();
        Self {
            layers,
            config,
            final_loss: f64::NAN,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("three layers").outputs
    }

    fn run(&self, x: &[f64]) -> Activations {
        let mut outputs = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(outputs.last().expect("input"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            outputs.push(out);
        }
        Activations { outputs }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.run(x).outputs.pop().expect("output layer")
    }

    /// Hidden-layer outputs for `x` (after rectification).
    pub fn hidden(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut outs = self.run(x).outputs;
        outs.pop();
        outs.remove(0);
        outs
    }

    /// Mean over samples and output units of the squared error.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        let k = self.output_dim() as f64;
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| self.forward(x).iter().zip(y).map(|(o, t)| (o - t).powi(2)).sum::<f64>())
            .sum();
        total / (xs.len() as f64 * k)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
    }

    /// Loss and its gradient (flattened like [`Self::parameters`]) by
    /// backpropagation over the batch.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let k = self.output_dim();
        let scale = 1.0 / (xs.len() * k) as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let acts = self.run(x);
            let out = acts.outputs.last().expect("output");
            let mut delta: Vec<f64> = out
                .iter()
                .zip(y)
                .map(|(o, t)| {
                    loss += (o - t).powi(2);
                    2.0 * (o - t) * scale
                })
                .collect();
            for (li, layer) in self.layers.iter().enumerate().rev() {
                let input = &acts.outputs[li];
                let (gw, gb) = &mut grads[li];
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if li == 0 {
                    break;
                }
                // back through the weights and the rectifier of the layer below
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss * scale, flat)
    }
}

/// Fits the mapper by mini-batch gradient descent with Adam steps.
pub fn train_mapper(inputs: &[Vec<f64>], targets: &[Vec<f64>], config: MapperConfig) -> Result<CrossModalMapper> {
    if inputs.is_empty() {
        return Err(Error::Empty("no training pairs".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let (d_in, d_out) = (inputs[0].len(), targets[0].len());
    if inputs.iter().any(|x| x.len() != d_in) || targets.iter().any(|y| y.len() != d_out) {
        return Err(Error::DimensionMismatch("inconsistent feature dimensions".into()));
    }
    if config.batch_size == 0 || config.hidden.contains(&0) {
        return Err(Error::InvalidParameter("batch size and widths must be positive".into()));
    }
    let mut mapper = CrossModalMapper::init(d_in, d_out, config);
    let mut params = mapper.parameters();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let by: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let (loss, grad) = mapper.loss_and_gradient(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                params[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            mapper.set_parameters(&params);
        }
        let epoch_loss = epoch_loss / inputs.len() as f64;
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: epoch_loss });
        }
    }
    mapper.final_loss = mapper.loss(inputs, targets);
    Ok(mapper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbEntry {
    pub id: String,
    pub label: usize,
    pub visual: Vec<f64>,
    /// Text feature of the entry's date label.
    pub cultural: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampDatabase {
    entries: Vec<DbEntry>,
    labels: Vec<String>,
}

impl TimestampDatabase {
    pub fn new(entries: Vec<DbEntry>, labels: Vec<String>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::Empty("timestamp database".into()));
        };
        let (dv, dc) = (first.visual.len(), first.cultural.len());
        for e in &entries {
            if e.visual.len() != dv || e.cultural.len() != dc {
                return Err(Error::DimensionMismatch(format!("entry '{}' dimensions", e.id)));
            }
            if e.label >= labels.len() {
                return Err(Error::InvalidParameter(format!(
                    "entry '{}' label {} outside the {} labels",
                    e.id,
                    e.label,
                    labels.len()
                )));
            }
            let s: f64 = e.cultural.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "entry '{}' cultural feature sums to {s}",
                    e.id
                )));
            }
        }
        Ok(Self { entries, labels })
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Most frequent label (lowest index on ties).
    pub fn prior_label(&self) -> usize {
        let mut counts = vec![0usize; self.labels.len()];
        for e in &self.entries {
            counts[e.label] += 1;
        }
        (0..counts.len()).fold(0, |b, l| if counts[l] > counts[b] { l } else { b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    VisualOnly,
    VisualPlusCultural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceNorm {
    /// Each modality's distances divided by their median over the database.
    #[default]
    Median,
    Raw,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn normalize_by_median(d: &mut [f64]) {
    let mut sorted = d.to_vec();
    let mid = sorted.len() / 2;
    let (_, m, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    let scale = if *m > 0.0 { *m } else { d.iter().cloned().fold(0.0, f64::max) };
    if scale > 0.0 {
        d.iter_mut().for_each(|v| *v /= scale);
    }
}

/// Distances from `query` to every entry under `mode`.
pub fn retrieval_distances(
    query: &[f64],
    mapper: Option<&CrossModalMapper>,
    db: &TimestampDatabase,
    mode: RetrievalMode,
    norm: DistanceNorm,
) -> Result<Vec<f64>> {
    let dv = db.entries[0].visual.len();
    if query.len() != dv {
        return Err(Error::DimensionMismatch(format!(
            "query has {} features, database {dv}",
            query.len()
        )));
    }
    let mut visual: Vec<f64> = db.entries.iter().map(|e| euclidean(query, &e.visual)).collect();
    if mode == RetrievalMode::VisualOnly {
        return Ok(visual);
    }
    let mapper = mapper.ok_or_else(|| {
        Error::InvalidParameter("cultural retrieval needs a trained mapper".into())
    })?;
    if mapper.input_dim() != dv || mapper.output_dim() != db.entries[0].cultural.len() {
        return Err(Error::DimensionMismatch("mapper does not fit the database".into()));
    }
    let inferred = mapper.forward(query);
    let mut textual: Vec<f64> = db.entries.iter().map(|e| euclidean(&inferred, &e.cultural)).collect();
    if norm == DistanceNorm::Median {
        normalize_by_median(&mut visual);
        normalize_by_median(&mut textual);
    }
    Ok(visual.iter().zip(&textual).map(|(v, t)| 0.5 * (v + t)).collect())
}

/// Index of the smallest distance, ties broken by entry id.
pub fn nearest(db: &TimestampDatabase, distances: &[f64]) -> usize {
    (1..distances.len()).fold(0, |best, i| {
        match distances[i].total_cmp(&distances[best]) {
            std::cmp::Ordering::Less => i,
            std::cmp::Ordering::Equal if db.entries[i].id < db.entries[best].id => i,
            _ => best,
        }
    })
}

/// Date label of the query's nearest database entry.
pub fn predict_date(
    query: &[f64],
    mapper: Option<&CrossModalMapper>,
    db: &TimestampDatabase,
    mode: RetrievalMode,
    norm: DistanceNorm,
) -> Result<usize> {
    let d = retrieval_distances(query, mapper, db, mode, norm)?;
    Ok(db.entries[nearest(db, &d)].label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub visual: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestampEval {
    pub accuracy: f64,
    /// Accuracy of always answering the database's most frequent label.
    pub prior_accuracy: f64,
    pub queries: usize,
}

pub fn eval_timestamp(
    db: &TimestampDatabase,
    queries: &[Query],
    mapper: Option<&CrossModalMapper>,
    mode: RetrievalMode,
    norm: DistanceNorm,
) -> Result<TimestampEval> {
    if queries.is_empty() {
        return Err(Error::Empty("no queries".into()));
    }
    let correct = queries
        .par_iter()
        .map(|q| predict_date(&q.visual, mapper, db, mode, norm).map(|l| usize::from(l == q.label)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let prior = db.prior_label();
    let prior_hits = queries.iter().filter(|q| q.label == prior).count();
    let n = queries.len() as f64;
    Ok(TimestampEval {
        accuracy: correct as f64 / n,
        prior_accuracy: prior_hits as f64 / n,
        queries: queries.len(),
    })
}

/// Seeded split of `0..n` into (database, held-out) index sets.
pub fn holdout_split(n: usize, holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * holdout).round() as usize;
    let test = idx.split_off(n - n_test.min(n));
    let mut train = idx;
    train.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    (train, test)
}
