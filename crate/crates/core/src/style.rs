//! Style discovery: exemplar clustering of feature vectors by affinity
//! propagation, then entropy-based screening of the resulting clusters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trend::{InstanceRecord, StyleAssignment};

/// Dense `n x n` similarity matrix, row-major. The diagonal holds the
/// preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

impl SimilarityMatrix {
    /// Negative squared Euclidean distances between feature rows.
    pub fn from_features(features: &[Vec<f64>], preference: Preference) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::Empty("no instances to cluster".into()));
        }
        let d = features[0].len();
        if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| f.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "instance {i} has {} features, expected {d}",
                f.len()
            )));
        }
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (k, s) in row.iter_mut().enumerate() {
                if i != k {
                    *s = -features[i]
                        .iter()
                        .zip(&features[k])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
        });
        let mut m = Self { n, data };
        m.set_preference(preference)?;
        Ok(m)
    }

    /// Wraps a precomputed row-major matrix as is.
    pub fn from_raw(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("similarities must be finite".into()));
        }
        Ok(Self { n, data })
    }

    pub fn set_preference(&mut self, preference: Preference) -> Result<()> {
        let p = match preference {
            Preference::Value(v) => v,
            Preference::Median => self.median_off_diagonal(),
        };
        if !p.is_finite() {
            return Err(Error::InvalidParameter(format!("preference {p}")));
        }
        for i in 0..self.n {
            self.data[i * self.n + i] = p;
        }
        Ok(())
    }

    fn median_off_diagonal(&self) -> f64 {
        let mut off: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| self.get(i, k))
            .collect();
        if off.is_empty() {
            return 0.0;
        }
        off.sort_by(f64::total_cmp);
        let m = off.len() / 2;
        if off.len() % 2 == 1 {
            off[m]
        } else {
            0.5 * (off[m - 1] + off[m])
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub damping: f64,
    pub max_iter: usize,
    /// Iterations with an unchanged exemplar set before declaring convergence.
    pub convergence_window: usize,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iter: 1000,
            convergence_window: 50,
        }
    }
}

/// Exemplar clustering of point indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Exemplar indices, ascending.
    pub exemplars: Vec<usize>,
    /// Exemplar index chosen by every point.
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl ApResult {
    /// Member indices per exemplar, in exemplar order.
    pub fn clusters(&self) -> Vec<(usize, Vec<usize>)> {
        self.exemplars
            .iter()
            .map(|&e| (e, (0..self.labels.len()).filter(|&i| self.labels[i] == e).collect()))
            .collect()
    }
}

/// Affinity propagation with damped responsibility/availability updates.
///
/// Each iteration computes
/// `r(i,k) = s(i,k) - max_{k'≠k} (a(i,k') + s(i,k'))`, then
/// `a(i,k) = min(0, r(k,k) + Σ_{i'∉{i,k}} max(0, r(i',k)))` for `i ≠ k` and
/// `a(k,k) = Σ_{i'≠k} max(0, r(i',k))`, each blended as
/// `damping * old + (1 - damping) * new`. Points with `r(k,k) + a(k,k) > 0`
/// are exemplars. If none emerge, the point with the largest
/// `r(k,k) + a(k,k)` becomes the single exemplar.
pub fn affinity_propagation(sim: &SimilarityMatrix, cfg: &ApConfig) -> Result<ApResult> {
    if !(0.5..1.0).contains(&cfg.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping {} outside [0.5, 1)",
            cfg.damping
        )));
    }
    if cfg.max_iter == 0 || cfg.convergence_window == 0 {
        return Err(Error::InvalidParameter(
            "max_iter and convergence_window must be positive".into(),
        ));
    }
    let n = sim.n;
    if n == 1 {
        return Ok(ApResult {
            exemplars: vec![0],
            labels: vec![0],
            iterations: 0,
            converged: true,
        });
    }
    let lam = cfg.damping;
    let s = &sim.data;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let mut a_t = vec![0.0; n * n];
    let mut r_t = vec![0.0; n * n];
    let mut prev: Vec<usize> = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        // responsibilities, row by row
        r.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let srow = &s[i * n..(i + 1) * n];
            let arow = &a[i * n..(i + 1) * n];
            let (mut best, mut second, mut best_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = arow[k] + srow[k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                row[k] = lam * row[k] + (1.0 - lam) * (srow[k] - competitor);
            }
        });
        transpose(&r, &mut r_t, n);
        // availabilities, column by column (rows of the transposes)
        a_t.par_chunks_mut(n).enumerate().for_each(|(k, col)| {
            let rcol = &r_t[k * n..(k + 1) * n];
            let positive: f64 = (0..n).filter(|&i| i != k).map(|i| rcol[i].max(0.0)).sum();
            for i in 0..n {
                let fresh = if i == k {
                    positive
                } else {
                    (rcol[k] + positive - rcol[i].max(0.0)).min(0.0)
                };
                col[i] = lam * col[i] + (1.0 - lam) * fresh;
            }
        });
        transpose(&a_t, &mut a, n);

        let ex: Vec<usize> = (0..n).filter(|&k| r[k * n + k] + a[k * n + k] > 0.0).collect();
        if ex == prev {
            stable += 1;
        } else {
            stable = 1;
            prev = ex;
        }
        if stable >= cfg.convergence_window && !prev.is_empty() {
            converged = true;
            break;
        }
    }

    let mut exemplars = prev;
    if exemplars.is_empty() {
        let score = |k: usize| r[k * n + k] + a[k * n + k];
        let best = (0..n).fold(0, |b, k| if score(k) > score(b) { k } else { b });
        exemplars.push(best);
    }
    let labels = assign_to_exemplars(sim, &exemplars);
    Ok(ApResult {
        exemplars,
        labels,
        iterations,
        converged,
    })
}

fn transpose(src: &[f64], dst: &mut [f64], n: usize) {
    for i in 0..n {
        for k in 0..n {
            dst[k * n + i] = src[i * n + k];
        }
    }
}

/// Each exemplar labels itself; other points join their most similar
/// exemplar (lowest index on ties).
pub fn assign_to_exemplars(sim: &SimilarityMatrix, exemplars: &[usize]) -> Vec<usize> {
    (0..sim.n)
        .map(|i| {
            if exemplars.contains(&i) {
                return i;
            }
            let mut best = exemplars[0];
            for &e in &exemplars[1..] {
                if sim.get(i, e) > sim.get(i, best) {
                    best = e;
                }
            }
            best
        })
        .collect()
}

/// Shannon entropy (bits) of the members' summed activations, normalized
/// to a distribution over `label_set_size` labels.
pub fn cluster_entropy(activations: &[&[f64]], label_set_size: usize) -> Result<f64> {
    let h = aggregate_activations(activations, label_set_size)?;
    Ok(h.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Summed activations normalized to sum 1.
pub fn aggregate_activations(activations: &[&[f64]], label_set_size: usize) -> Result<Vec<f64>> {
    let mut h = vec![0.0; label_set_size];
    for a in activations {
        if a.len() != label_set_size {
            return Err(Error::DimensionMismatch(format!(
                "activation vector of length {}, label set has {label_set_size}",
                a.len()
            )));
        }
        for (acc, &v) in h.iter_mut().zip(a.iter()) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("activation {v} is not a nonnegative number")));
            }
            *acc += v;
        }
    }
    let total: f64 = h.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoSignal);
    }
    h.iter_mut().for_each(|v| *v /= total);
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleCluster {
    pub style_id: String,
    pub exemplar: String,
    pub members: Vec<String>,
    pub entropy: f64,
    /// Label indices by descending aggregated activation.
    pub top_labels: Vec<usize>,
}

/// Which side of the entropy population to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum EntropyFilter {
    /// Keep `E <= mean + k * sd`, dropping high-entropy outliers.
    DropHigh { k: f64 },
    /// Keep only `E <= mean - k * sd`, the most coherent clusters.
    KeepLow { k: f64 },
}

impl Default for EntropyFilter {
    fn default() -> Self {
        EntropyFilter::DropHigh { k: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub retained: Vec<StyleCluster>,
    pub threshold: Option<f64>,
    pub warning: Option<String>,
}

/// Entropy screen over a population of clusters, using the population
/// mean and standard deviation of their entropies.
pub fn filter_clusters(clusters: Vec<StyleCluster>, rule: EntropyFilter) -> FilterOutcome {
    if clusters.len() < 2 {
        return FilterOutcome {
            retained: clusters,
            threshold: None,
            warning: Some("fewer than 2 clusters; entropy filter skipped".into()),
        };
    }
    let n = clusters.len() as f64;
    let mean = clusters.iter().map(|c| c.entropy).sum::<f64>() / n;
    let sd = (clusters.iter().map(|c| (c.entropy - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = match rule {
        EntropyFilter::DropHigh { k } => mean + k * sd,
        EntropyFilter::KeepLow { k } => mean - k * sd,
    };
    let retained = clusters
        .into_iter()
        .filter(|c| c.entropy <= threshold)
        .collect();
    FilterOutcome {
        retained,
        threshold: Some(threshold),
        warning: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub ap: ApConfig,
    pub preference: Preference,
    pub filter: EntropyFilter,
    pub top_labels: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            ap: ApConfig::default(),
            preference: Preference::Median,
            filter: EntropyFilter::default(),
            top_labels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    /// Clusters that passed the entropy screen.
    pub styles: Vec<StyleCluster>,
    /// Every cluster before screening.
    pub candidates: Vec<StyleCluster>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl Discovery {
    pub fn assignments(&self) -> Vec<StyleAssignment> {
        self.styles
            .iter()
            .flat_map(|c| {
                c.members.iter().map(move |m| StyleAssignment {
                    instance_id: m.clone(),
                    style_id: c.style_id.clone(),
                })
            })
            .collect()
    }
}

/// Clusters instances into candidate styles and keeps the coherent ones.
/// Instances without activations give clusters entropy 0.
pub fn discover_styles(instances: &[InstanceRecord], cfg: &DiscoveryConfig) -> Result<Discovery> {
    let features: Vec<Vec<f64>> = instances.iter().map(|r| r.features.clone()).collect();
    let sim = SimilarityMatrix::from_features(&features, cfg.preference)?;
    let ap = affinity_propagation(&sim, &cfg.ap)?;
    let label_dim = instances.iter().find_map(|r| r.activations.as_ref().map(Vec::len));
    let mut warnings = Vec::new();
    if !ap.converged {
        warnings.push(format!(
            "affinity propagation did not converge in {} iterations",
            ap.iterations
        ));
    }
    let mut candidates = Vec::new();
    for (idx, (exemplar, members)) in ap.clusters().into_iter().enumerate() {
        let acts: Vec<&[f64]> = members
            .iter()
            .filter_map(|&m| instances[m].activations.as_deref())
            .collect();
        let (entropy, top_labels) = match label_dim {
            Some(dim) if !acts.is_empty() => {
                let h = aggregate_activations(&acts, dim)?;
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
                order.truncate(cfg.top_labels);
                (cluster_entropy(&acts, dim)?, order)
            }
            _ => (0.0, Vec::new()),
        };
        candidates.push(StyleCluster {
            style_id: format!("style_{idx}"),
            exemplar: instances[exemplar].id.clone(),
            members: members.iter().map(|&m| instances[m].id.clone()).collect(),
            entropy,
            top_labels,
        });
    }
    let outcome = filter_clusters(candidates.clone(), cfg.filter);
    warnings.extend(outcome.warning);
    Ok(Discovery {
        styles: outcome.retained,
        candidates,
        converged: ap.converged,
        iterations: ap.iterations,
        warnings,
    })
}
