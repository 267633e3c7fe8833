//! Granger-causality screening of topic trends against style trends.
//!
//! For a style series `x` and a candidate cause `y`, the restricted model
//! regresses `x_t` on `x_{t-1..t-q1}`; the unrestricted model adds
//! `y_{t-1..t-q2}`. Both are fit on the same targets `t = max(q1, q2)..T-1`
//! and compared with the nested-model F statistic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::ols_fit;
use crate::stats::{f_critical, f_sf};
use crate::trend::TrendSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerConfig {
    /// Lag window on the target (style) series.
    pub q1: usize,
    /// Lag window on the candidate cause (topic) series.
    pub q2: usize,
    /// Significance level of each test.
    pub alpha: f64,
    /// Adds a constant regressor to both models. Off by default.
    #[serde(default)]
    pub intercept: bool,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        Self {
            q1: 2,
            q2: 2,
            alpha: 0.05,
            intercept: false,
        }
    }
}

impl GrangerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q1 == 0 || self.q2 == 0 {
            return Err(Error::InvalidParameter("lag windows q1, q2 must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "significance level {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Number of aligned regression targets for a series of length `t`.
    pub fn effective_len(&self, t: usize) -> usize {
        t.saturating_sub(self.q1.max(self.q2))
    }

    /// Numerator and denominator degrees of freedom for a series of length `t`.
    pub fn degrees_of_freedom(&self, t: usize) -> (usize, usize) {
        let used = self.q1 + self.q2 + usize::from(self.intercept);
        (self.q2, self.effective_len(t).saturating_sub(used))
    }

    /// Shortest series length with enough residual degrees of freedom.
    pub fn min_len(&self) -> usize {
        self.q1.max(self.q2) + self.q1 + self.q2 + 2 + usize::from(self.intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub style_id: String,
    pub topic_id: String,
    pub f_value: f64,
    pub f_critical: f64,
    pub p_value: f64,
    pub df1: usize,
    pub df2: usize,
    pub significant: bool,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    /// Coefficients on `x_{t-1..t-q1}` in the unrestricted model.
    pub alpha: Vec<f64>,
    /// Coefficients on `y_{t-1..t-q2}` in the unrestricted model.
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    /// Set when either regression needed the pseudo-inverse path.
    #[serde(default)]
    pub degenerate: bool,
    /// Decision after multiple-testing correction, when one was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_significant: Option<bool>,
}

fn lagged_rows(x: &[f64], y: Option<(&[f64], usize)>, q1: usize, start: usize, intercept: bool) -> Vec<Vec<f64>> {
    (start..x.len())
        .map(|t| {
            let mut row: Vec<f64> = (1..=q1).map(|m| x[t - m]).collect();
            if let Some((y, q2)) = y {
                row.extend((1..=q2).map(|m| y[t - m]));
            }
            if intercept {
                row.push(1.0);
            }
            row
        })
        .collect()
}

/// Tests whether `y` Granger-causes `x` on raw value slices.
pub fn granger_values(x: &[f64], y: &[f64], cfg: &GrangerConfig) -> Result<GrangerFit> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < cfg.min_len() {
        return Err(Error::InsufficientLength(format!(
            "length {} but q1={}, q2={} need at least {}",
            x.len(),
            cfg.q1,
            cfg.q2,
            cfg.min_len()
        )));
    }
    let start = cfg.q1.max(cfg.q2);
    let target = &x[start..];
    let restricted = ols_fit(&lagged_rows(x, None, cfg.q1, start, cfg.intercept), target)?;
    let unrestricted = ols_fit(
        &lagged_rows(x, Some((y, cfg.q2)), cfg.q1, start, cfg.intercept),
        target,
    )?;
    let (df1, df2) = cfg.degrees_of_freedom(x.len());
    let scale: f64 = target.iter().map(|v| v * v).sum();
    let (rss_r, rss_u) = (restricted.rss, unrestricted.rss);
    let f_value = if rss_r <= 1e-12 * scale || rss_r <= rss_u {
        // x's own history already explains it (e.g. a constant series)
        0.0
    } else if rss_u <= 0.0 {
        f64::MAX
    } else {
        (((rss_r - rss_u) / df1 as f64) / (rss_u / df2 as f64)).min(f64::MAX)
    };
    let f_crit = f_critical(df1, df2, cfg.alpha)?;
    let coef = &unrestricted.coefficients;
    Ok(GrangerFit {
        f_value,
        f_critical: f_crit,
        p_value: f_sf(f_value, df1 as f64, df2 as f64),
        df1,
        df2,
        significant: f_value > f_crit,
        rss_restricted: rss_r,
        rss_unrestricted: rss_u,
        alpha: coef[..cfg.q1].to_vec(),
        beta: coef[cfg.q1..cfg.q1 + cfg.q2].to_vec(),
        intercept: cfg.intercept.then(|| coef[cfg.q1 + cfg.q2]),
        degenerate: restricted.rank_deficient || unrestricted.rank_deficient,
    })
}

/// Test statistics of one pair, without the series ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GrangerFit {
    pub f_value: f64,
    pub f_critical: f64,
    pub p_value: f64,
    pub df1: usize,
    pub df2: usize,
    pub significant: bool,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub intercept: Option<f64>,
    pub degenerate: bool,
}

/// Tests whether topic trend `y` Granger-causes style trend `x`.
pub fn granger_test(x: &TrendSeries, y: &TrendSeries, cfg: &GrangerConfig) -> Result<GrangerResult> {
    let fit = granger_values(&x.values, &y.values, cfg)?;
    Ok(GrangerResult {
        style_id: x.id.clone(),
        topic_id: y.id.clone(),
        f_value: fit.f_value,
        f_critical: fit.f_critical,
        p_value: fit.p_value,
        df1: fit.df1,
        df2: fit.df2,
        significant: fit.significant,
        rss_restricted: fit.rss_restricted,
        rss_unrestricted: fit.rss_unrestricted,
        alpha: fit.alpha,
        beta: fit.beta,
        intercept: fit.intercept,
        degenerate: fit.degenerate,
        corrected_significant: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    #[default]
    None,
    /// Step-up false discovery rate control at level `alpha`.
    BenjaminiHochberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub style_id: String,
    pub topic_id: String,
    pub message: String,
}

/// Outcome of screening every (style, topic) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub config: GrangerConfig,
    pub correction: Correction,
    /// Style-major, in input order.
    pub results: Vec<GrangerResult>,
    pub errors: Vec<PairError>,
    /// Style id to its significant topics, by descending F then topic id.
    pub influence: BTreeMap<String, Vec<String>>,
}

impl Screen {
    pub fn influences_of(&self, style_id: &str) -> &[String] {
        self.influence.get(style_id).map_or(&[], Vec::as_slice)
    }
}

/// Granger-tests every topic against every style.
pub fn screen_all_pairs(
    styles: &[TrendSeries],
    topics: &[TrendSeries],
    cfg: &GrangerConfig,
    correction: Correction,
) -> Result<Screen> {
    cfg.validate()?;
    if let Some(len) = styles.first().map(TrendSeries::len) {
        if let Some(bad) = styles.iter().chain(topics).find(|s| s.len() != len) {
            return Err(Error::DimensionMismatch(format!(
                "series '{}' has length {}, expected {len}",
                bad.id,
                bad.len()
            )));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..styles.len())
        .flat_map(|i| (0..topics.len()).map(move |l| (i, l)))
        .collect();
    let outcomes: Vec<Result<GrangerResult>> = pairs
        .par_iter()
        .map(|&(i, l)| granger_test(&styles[i], &topics[l], cfg))
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::new();
    for (&(i, l), out) in pairs.iter().zip(outcomes) {
        match out {
            Ok(r) => results.push(r),
            Err(e) => errors.push(PairError {
                style_id: styles[i].id.clone(),
                topic_id: topics[l].id.clone(),
                message: e.to_string(),
            }),
        }
    }
    if correction == Correction::BenjaminiHochberg {
        let keep = benjamini_hochberg(&results.iter().map(|r| r.p_value).collect::<Vec<_>>(), cfg.alpha);
        for (r, k) in results.iter_mut().zip(keep) {
            r.corrected_significant = Some(k);
        }
    }

    let mut influence: BTreeMap<String, Vec<(f64, String)>> =
        styles.iter().map(|s| (s.id.clone(), Vec::new())).collect();
    for r in &results {
        if r.corrected_significant.unwrap_or(r.significant) {
            influence
                .get_mut(&r.style_id)
                .expect("style id present")
                .push((r.f_value, r.topic_id.clone()));
        }
    }
    let influence = influence
        .into_iter()
        .map(|(s, mut v)| {
            v.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            (s, v.into_iter().map(|(_, t)| t).collect())
        })
        .collect();
    Ok(Screen {
        config: *cfg,
        correction,
        results,
        errors,
        influence,
    })
}

/// Step-up procedure: rejects the `k` smallest p-values where `k` is the
/// largest rank with `p_(k) <= k * level / m`.
pub fn benjamini_hochberg(p_values: &[f64], level: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|(rank, &idx)| p_values[idx] <= (rank + 1) as f64 * level / m as f64)
        .map_or(0, |(rank, _)| rank + 1);
    let mut keep = vec![false; m];
    for &idx in &order[..cutoff] {
        keep[idx] = true;
    }
    keep
}
