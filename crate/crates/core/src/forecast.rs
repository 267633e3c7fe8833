//! Trend forecasters and long-horizon evaluation.
//!
//! Lag convention: a one-step prediction of `x_{t+1}` reads
//! `x_t, .., x_{t-q1+1}` and, for the cultural model, `y_t, .., y_{t-q2+1}`.
//! Multi-step rollouts feed predictions back as inputs; held-out targets are
//! never read.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::ols_fit;

/// Read access to a series by index. Forecasters only read the training
/// prefix of the target and the exogenous values up to the step being
/// predicted, which tests audit through a logging implementation.
pub trait SeriesView {
    fn len(&self) -> usize;
    fn at(&self, t: usize) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SeriesView for &[f64] {
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }
    fn at(&self, t: usize) -> f64 {
        self[t]
    }
}

impl SeriesView for Vec<f64> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn at(&self, t: usize) -> f64 {
        self[t]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForecastMethod {
    Last,
    Linear,
    Mean,
    Exp { alpha: f64 },
    Ar { q1: usize },
    /// Ensemble of ARX models, one per influencing topic.
    Cultural { q1: usize, q2: usize, topics: Vec<String> },
}

impl ForecastMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ForecastMethod::Last => "last",
            ForecastMethod::Linear => "linear",
            ForecastMethod::Mean => "mean",
            ForecastMethod::Exp { .. } => "exp",
            ForecastMethod::Ar { .. } => "ar",
            ForecastMethod::Cultural { .. } => "cultural",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ForecastMethod::Exp { alpha } if !(0.0..=1.0).contains(&alpha) => Err(
                Error::InvalidParameter(format!("smoothing factor {alpha} outside [0, 1]")),
            ),
            ForecastMethod::Ar { q1 } | ForecastMethod::Cultural { q1, .. } if q1 == 0 => {
                Err(Error::InvalidParameter("q1 must be >= 1".into()))
            }
            ForecastMethod::Cultural { q2: 0, .. } => {
                Err(Error::InvalidParameter("q2 must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn min_train(&self) -> usize {
        match *self {
            ForecastMethod::Linear => 2,
            ForecastMethod::Ar { q1 } => q1 + 1,
            ForecastMethod::Cultural { q1, q2, .. } => q1.max(q2) + 1,
            _ => 1,
        }
    }
}

/// How exogenous series are obtained over the forecast horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExoMode {
    /// Observed values are used through the horizon.
    #[default]
    Observed,
    /// Each exogenous series is rolled forward with its own AR(q2) model
    /// fit on its training prefix.
    Forecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub raw: Vec<f64>,
    /// `raw` clipped to [0, 1]; evaluation uses these.
    pub clipped: Vec<f64>,
    /// Cultural with no influencing topics ran as plain AR.
    pub fallback: bool,
}

impl Forecast {
    fn new(raw: Vec<f64>, fallback: bool) -> Self {
        let clipped = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self { raw, clipped, fallback }
    }
}

/// Forecasts `horizon` steps past `train`.
///
/// `exogenous` holds one series per topic of a [`ForecastMethod::Cultural`]
/// method, aligned with `train` and covering at least `train.len() + horizon`
/// bins in [`ExoMode::Observed`].
pub fn forecast(
    method: &ForecastMethod,
    train: &[f64],
    exogenous: &[&[f64]],
    horizon: usize,
) -> Result<Forecast> {
    let exo: Vec<&dyn SeriesView> = exogenous.iter().map(|s| s as &dyn SeriesView).collect();
    forecast_view(method, &train, train.len(), &exo, horizon, ExoMode::Observed)
}

/// Like [`forecast`], reading the target through `history` of which only the
/// first `train_len` values are used.
pub fn forecast_view(
    method: &ForecastMethod,
    history: &dyn SeriesView,
    train_len: usize,
    exogenous: &[&dyn SeriesView],
    horizon: usize,
    exo_mode: ExoMode,
) -> Result<Forecast> {
    method.validate()?;
    if train_len > history.len() {
        return Err(Error::DimensionMismatch(format!(
            "train length {train_len} exceeds history of {}",
            history.len()
        )));
    }
    if train_len < method.min_train() {
        return Err(Error::InsufficientLength(format!(
            "{} needs at least {} training points, got {train_len}",
            method.name(),
            method.min_train()
        )));
    }
    let train: Vec<f64> = (0..train_len).map(|t| history.at(t)).collect();
    let last = train[train_len - 1];
    let raw = match method {
        ForecastMethod::Last => vec![last; horizon],
        ForecastMethod::Mean => {
            let mean = train.iter().sum::<f64>() / train_len as f64;
            vec![mean; horizon]
        }
        ForecastMethod::Linear => {
            let slope = (last - train[0]) / (train_len - 1) as f64;
            // x̂_{t+1} = slope * t + x_1 with 1-based t >= T
            (0..horizon)
                .map(|h| slope * (train_len + h) as f64 + train[0])
                .collect()
        }
        ForecastMethod::Exp { alpha } => {
            let mut level = last;
            let mut prev_obs = last;
            (0..horizon)
                .map(|_| {
                    level = alpha * prev_obs + (1.0 - alpha) * level;
                    prev_obs = level;
                    level
                })
                .collect()
        }
        ForecastMethod::Ar { q1 } => {
            let coef = fit_ar(&train, *q1)?;
            rollout(&train, horizon, |x, _| dot_lags(&coef, x))
        }
        ForecastMethod::Cultural { q1, q2, topics } => {
            if exogenous.len() != topics.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} exogenous series for {} influencing topics",
                    exogenous.len(),
                    topics.len()
                )));
            }
            if topics.is_empty() {
                let coef = fit_ar(&train, *q1)?;
                let raw = rollout(&train, horizon, |x, _| dot_lags(&coef, x));
                return Ok(Forecast::new(raw, true));
            }
            let exo = exogenous_paths(exogenous, train_len, horizon, *q2, exo_mode)?;
            let models = exo
                .iter()
                .map(|y| fit_arx(&train, y, *q1, *q2))
                .collect::<Result<Vec<_>>>()?;
            let n = models.len() as f64;
            rollout(&train, horizon, |x, t| {
                models
                    .iter()
                    .zip(&exo)
                    .map(|((ax, by), y)| dot_lags(ax, x) + dot_lags(by, &y[..=t]))
                    .sum::<f64>()
                    / n
            })
        }
    };
    Ok(Forecast::new(raw, false))
}

/// `Σ_m coef[m] * series[len-1-m]`.
fn dot_lags(coef: &[f64], series: &[f64]) -> f64 {
    let n = series.len();
    coef.iter().enumerate().map(|(m, c)| c * series[n - 1 - m]).sum()
}

/// Runs `step(history, t)` `horizon` times, where `t` is the index of the
/// latest known value and `step` predicts index `t + 1`.
fn rollout(train: &[f64], horizon: usize, step: impl Fn(&[f64], usize) -> f64) -> Vec<f64> {
    let mut hist = train.to_vec();
    for _ in 0..horizon {
        let t = hist.len() - 1;
        let next = step(&hist, t);
        hist.push(next);
    }
    hist.split_off(train.len())
}

/// Least-squares AR weights `a_m` for `x_{t+1} ≈ Σ_{m<q} a_m x_{t-m}`.
pub fn fit_ar(train: &[f64], q: usize) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (q - 1..train.len() - 1)
        .map(|t| (0..q).map(|m| train[t - m]).collect())
        .collect();
    let target: Vec<f64> = (q..train.len()).map(|t| train[t]).collect();
    Ok(ols_fit(&rows, &target)?.coefficients)
}

/// Least-squares ARX weights for `x_{t+1} ≈ Σ a_m x_{t-m} + Σ b_m y_{t-m}`.
pub fn fit_arx(train: &[f64], exo: &[f64], q1: usize, q2: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let start = q1.max(q2) - 1;
    let rows: Vec<Vec<f64>> = (start..train.len() - 1)
        .map(|t| {
            (0..q1)
                .map(|m| train[t - m])
                .chain((0..q2).map(|m| exo[t - m]))
                .collect()
        })
        .collect();
    let target: Vec<f64> = (start + 1..train.len()).map(|t| train[t]).collect();
    let mut c = ols_fit(&rows, &target)?.coefficients;
    let b = c.split_off(q1);
    Ok((c, b))
}

/// Exogenous values needed for a rollout: indices `0..train_len + horizon - 1`.
fn exogenous_paths(
    exogenous: &[&dyn SeriesView],
    train_len: usize,
    horizon: usize,
    q2: usize,
    mode: ExoMode,
) -> Result<Vec<Vec<f64>>> {
    let needed = train_len + horizon.saturating_sub(1);
    exogenous
        .iter()
        .map(|y| match mode {
            ExoMode::Observed => {
                if y.len() < needed {
                    return Err(Error::InsufficientLength(format!(
                        "exogenous series covers {} bins, rollout needs {needed}",
                        y.len()
                    )));
                }
                Ok((0..needed).map(|t| y.at(t)).collect())
            }
            ExoMode::Forecast => {
                if y.len() < train_len {
                    return Err(Error::InsufficientLength(format!(
                        "exogenous series covers {} bins, training needs {train_len}",
                        y.len()
                    )));
                }
                let known: Vec<f64> = (0..train_len).map(|t| y.at(t)).collect();
                let q = q2.min(train_len - 1).max(1);
                let coef = fit_ar(&known, q)?;
                let mut path = known.clone();
                path.extend(rollout(&known, needed - train_len, |x, _| dot_lags(&coef, x)));
                Ok(path)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Mse,
    Mae,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Metric::Mse),
            "mae" => Ok(Metric::Mae),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub style_id: String,
    pub method: String,
    pub predictions: Vec<f64>,
    pub step_errors: Vec<f64>,
    pub error: f64,
    pub metric: Metric,
}

/// Scores predictions against held-out truth, one error per step.
pub fn evaluate(
    style_id: &str,
    method: &str,
    predictions: &[f64],
    truth: &[f64],
    metric: Metric,
) -> Result<ForecastReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} truth values",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let step_errors: Vec<f64> = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| match metric {
            Metric::Mse => (p - t).powi(2),
            Metric::Mae => (p - t).abs(),
        })
        .collect();
    let error = step_errors.iter().sum::<f64>() / step_errors.len() as f64;
    Ok(ForecastReport {
        style_id: style_id.to_string(),
        method: method.to_string(),
        predictions: predictions.to_vec(),
        step_errors,
        error,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_last() {
        let f = forecast(&ForecastMethod::Mean, &[1.0, 2.0, 3.0], &[], 2).unwrap();
        assert_eq!(f.raw, vec![2.0, 2.0]);
        let f = forecast(&ForecastMethod::Last, &[0.1, 0.4], &[], 3).unwrap();
        assert_eq!(f.raw, vec![0.4; 3]);
    }

    #[test]
    fn linear_extends_endpoint_slope() {
        let f = forecast(&ForecastMethod::Linear, &[1.0, 2.0, 3.0], &[], 2).unwrap();
        assert_eq!(f.raw, vec![4.0, 5.0]);
        assert_eq!(f.clipped, vec![1.0, 1.0]);
    }

    #[test]
    fn exp_seeded_at_last_value() {
        for alpha in [0.0, 0.2, 0.3, 0.7, 1.0] {
            let f = forecast(&ForecastMethod::Exp { alpha }, &[0.5; 6], &[], 4).unwrap();
            assert_eq!(f.raw, vec![0.5; 4]);
            let f = forecast(&ForecastMethod::Exp { alpha }, &[0.1, 0.9, 0.3], &[], 3).unwrap();
            assert_eq!(f.raw, vec![0.3; 3]);
        }
        assert!(forecast(&ForecastMethod::Exp { alpha: 1.5 }, &[0.1], &[], 1).is_err());
    }

    #[test]
    fn ar_recovers_noiseless_recurrence() {
        let mut x = vec![1.0, 0.8];
        for t in 2..40 {
            x.push(0.5 * x[t - 1] + 0.3 * x[t - 2]);
        }
        let coef = fit_ar(&x[..30], 2).unwrap();
        assert!((coef[0] - 0.5).abs() < 1e-6 && (coef[1] - 0.3).abs() < 1e-6);
        let f = forecast(&ForecastMethod::Ar { q1: 2 }, &x[..30], &[], 10).unwrap();
        for (p, t) in f.raw.iter().zip(&x[30..]) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn cultural_without_topics_falls_back_to_ar() {
        let x: Vec<f64> = (0..20).map(|t| 0.3 + 0.1 * (t as f64).sin()).collect();
        let method = ForecastMethod::Cultural { q1: 2, q2: 2, topics: vec![] };
        let f = forecast(&method, &x, &[], 5).unwrap();
        let ar = forecast(&ForecastMethod::Ar { q1: 2 }, &x, &[], 5).unwrap();
        assert!(f.fallback);
        assert_eq!(f.raw, ar.raw);
    }

    #[test]
    fn cultural_follows_exogenous_driver() {
        // x_{t+1} = 0.8 y_t exactly; the ARX fit should reproduce it.
        let y: Vec<f64> = (0..40).map(|t| 0.5 + 0.3 * (t as f64 * 0.7).sin()).collect();
        let mut x = vec![0.4];
        x.extend(y[..39].iter().map(|v| 0.8 * v));
        let method = ForecastMethod::Cultural { q1: 1, q2: 1, topics: vec!["t".into()] };
        let f = forecast(&method, &x[..30], &[&y], 10).unwrap();
        for (p, t) in f.raw.iter().zip(&x[30..]) {
            assert!((p - t).abs() < 1e-9, "{p} vs {t}");
        }
    }

    #[test]
    fn short_exogenous_is_rejected() {
        let method = ForecastMethod::Cultural { q1: 1, q2: 1, topics: vec!["t".into()] };
        let x = vec![0.1, 0.2, 0.3, 0.4];
        let y = vec![0.1, 0.2, 0.3, 0.4];
        assert!(forecast(&method, &x, &[&y], 3).is_err());
        assert!(forecast(&method, &x, &[&y], 1).is_ok());
    }

    #[test]
    fn evaluate_by_hand() {
        let r = evaluate("s", "m", &[1.0, 1.0], &[0.0, 2.0], Metric::Mse).unwrap();
        assert_eq!(r.error, 1.0);
        let r = evaluate("s", "m", &[1.0, 1.0], &[0.0, 2.0], Metric::Mae).unwrap();
        assert_eq!(r.error, 1.0);
        let r = evaluate("s", "m", &[0.3, 0.1], &[0.3, 0.1], Metric::Mse).unwrap();
        assert_eq!(r.error, 0.0);
        assert!(evaluate("s", "m", &[1.0], &[1.0, 2.0], Metric::Mae).is_err());
    }
}
