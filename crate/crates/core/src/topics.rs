//! Latent Dirichlet allocation over a dated, pre-tokenized corpus, fit by
//! collapsed Gibbs sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ln_gamma;

/// A tokenized document as it arrives from upstream text processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub date: NaiveDate,
    pub tokens: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Token id to word; ids follow lexicographic word order.
    pub vocabulary: Vec<String>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFilter {
    pub min_doc_len: usize,
    pub min_token_freq: usize,
    pub stopwords: BTreeSet<String>,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        Self {
            min_doc_len: 15,
            min_token_freq: 1,
            stopwords: BTreeSet::new(),
        }
    }
}

/// Drops stopwords and rare tokens, then documents left shorter than
/// `min_doc_len`. Token frequency counts occurrences over the whole input.
pub fn build_corpus(raw: &[RawDocument], filter: &CorpusFilter) -> Result<Corpus> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for d in raw {
        for t in &d.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let keep = |t: &str| !filter.stopwords.contains(t) && freq[t] >= filter.min_token_freq;
    let kept: Vec<(&RawDocument, Vec<&str>)> = raw
        .iter()
        .map(|d| (d, d.tokens.iter().map(String::as_str).filter(|t| keep(t)).collect::<Vec<_>>()))
        .filter(|(_, toks)| toks.len() >= filter.min_doc_len && !toks.is_empty())
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let words: BTreeSet<&str> = kept.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let ids: BTreeMap<&str, u32> = words.iter().enumerate().map(|(i, w)| (*w, i as u32)).collect();
    let documents = kept
        .into_iter()
        .map(|(d, toks)| Document {
            doc_id: d.doc_id.clone(),
            date: d.date,
            tokens: toks.iter().map(|t| ids[t]).collect(),
        })
        .collect();
    Ok(Corpus {
        documents,
        vocabulary: words.into_iter().map(str::to_string).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(k: usize, iterations: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: None,
            beta: 0.01,
            iterations,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// `k x V` topic-word distributions.
    pub phi: Vec<Vec<f64>>,
    /// `D x k` document-topic distributions, aligned with the corpus documents.
    pub theta: Vec<Vec<f64>>,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    pub doc_dates: Vec<NaiveDate>,
}

/// Per-sweep diagnostics of a Gibbs run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// `log p(w | z)` after every sweep.
    pub log_likelihood: Vec<f64>,
    /// Every sweep left each document's topic counts summing to its length.
    pub counts_consistent: bool,
}

struct Counts {
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
}

impl Counts {
    fn log_likelihood(&self, beta: f64) -> f64 {
        let v = self.topic_word.first().map_or(0, Vec::len) as f64;
        let per_topic = ln_gamma(v * beta) - v * ln_gamma(beta);
        self.topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &tot)| {
                per_topic + row.iter().map(|&c| ln_gamma(c as f64 + beta)).sum::<f64>()
                    - ln_gamma(tot as f64 + v * beta)
            })
            .sum()
    }
}

pub fn lda_fit(corpus: &Corpus, cfg: &LdaConfig) -> Result<TopicModel> {
    lda_fit_traced(corpus, cfg).map(|(m, _)| m)
}

/// Collapsed Gibbs sampling: each token's topic is resampled from
/// `p(z = k) ∝ (n_dk + α)(n_kw + β) / (n_k + Vβ)` with its own assignment
/// removed. θ and φ are read from the final sweep's counts.
pub fn lda_fit_traced(corpus: &Corpus, cfg: &LdaConfig) -> Result<(TopicModel, FitTrace)> {
    let k = cfg.k;
    if k == 0 || cfg.iterations == 0 {
        return Err(Error::InvalidParameter("k and iterations must be >= 1".into()));
    }
    let alpha = cfg.alpha();
    if alpha.is_nan() || alpha <= 0.0 || cfg.beta.is_nan() || cfg.beta <= 0.0 {
        return Err(Error::InvalidParameter("Dirichlet priors must be positive".into()));
    }
    let total_tokens = corpus.token_count();
    if k > total_tokens {
        return Err(Error::InvalidParameter(format!(
            "{k} topics for only {total_tokens} tokens"
        )));
    }
    let v = corpus.vocabulary.len();
    if let Some(bad) = corpus
        .documents
        .iter()
        .flat_map(|d| d.tokens.iter())
        .find(|&&w| w as usize >= v)
    {
        return Err(Error::InvalidParameter(format!("token id {bad} outside vocabulary of {v}")));
    }
    let beta = cfg.beta;
    let vbeta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut counts = Counts {
        doc_topic: vec![vec![0; k]; corpus.documents.len()],
        topic_word: vec![vec![0; v]; k],
        topic_total: vec![0; k],
    };
    let mut z: Vec<Vec<usize>> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.tokens
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    counts.doc_topic[d][t] += 1;
                    counts.topic_word[t][w as usize] += 1;
                    counts.topic_total[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; k];
    let mut trace = FitTrace {
        log_likelihood: Vec::with_capacity(cfg.iterations),
        counts_consistent: true,
    };
    for _ in 0..cfg.iterations {
        for (d, doc) in corpus.documents.iter().enumerate() {
            for (pos, &w) in doc.tokens.iter().enumerate() {
                let w = w as usize;
                let old = z[d][pos];
                counts.doc_topic[d][old] -= 1;
                counts.topic_word[old][w] -= 1;
                counts.topic_total[old] -= 1;

                let mut acc = 0.0;
                for (t, wt) in weights.iter_mut().enumerate() {
                    acc += (counts.doc_topic[d][t] as f64 + alpha)
                        * (counts.topic_word[t][w] as f64 + beta)
                        / (counts.topic_total[t] as f64 + vbeta);
                    *wt = acc;
                }
                let u = rng.random::<f64>() * acc;
                let new = weights.partition_point(|&c| c <= u).min(k - 1);

                z[d][pos] = new;
                counts.doc_topic[d][new] += 1;
                counts.topic_word[new][w] += 1;
                counts.topic_total[new] += 1;
            }
        }
        trace.log_likelihood.push(counts.log_likelihood(beta));
        trace.counts_consistent &= counts
            .doc_topic
            .iter()
            .zip(&corpus.documents)
            .all(|(row, doc)| row.iter().sum::<u32>() as usize == doc.tokens.len());
    }

    let theta = counts
        .doc_topic
        .iter()
        .map(|row| normalize(row.iter().map(|&c| c as f64 + alpha)))
        .collect();
    let phi = counts
        .topic_word
        .iter()
        .map(|row| normalize(row.iter().map(|&c| c as f64 + beta)))
        .collect();
    Ok((
        TopicModel {
            k,
            alpha,
            beta,
            seed: cfg.seed,
            phi,
            theta,
            vocabulary: corpus.vocabulary.clone(),
            doc_ids: corpus.documents.iter().map(|d| d.doc_id.clone()).collect(),
            doc_dates: corpus.documents.iter().map(|d| d.date).collect(),
        },
        trace,
    ))
}

fn normalize(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = values.collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// The `n` most probable words of `topic`, ties by token id.
pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
    let row = model.phi.get(topic).ok_or_else(|| {
        Error::InvalidParameter(format!("topic {topic} outside 0..{}", model.k))
    })?;
    let mut ids: Vec<usize> = (0..row.len()).collect();
    ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    Ok(ids
        .into_iter()
        .take(n)
        .map(|w| (model.vocabulary[w].clone(), row[w]))
        .collect())
}
