//! Model-fidelity checks: one-sample Kolmogorov-Smirnov test against a
//! fitted cdf, autocorrelation curves and their comparison, and per-state
//! summary statistics.

use serde::Serialize;

use crate::clustering::StateVisit;
use crate::error::{Error, Result};
use crate::markov::SyntheticTrace;

/// Minimum sample size accepted by the KS test.
pub const KS_MIN_N: usize = 8;

/// Asymptotic critical coefficients c(alpha) with critical = c / sqrt(n).
const KS_COEFFICIENTS: [(f64, f64); 2] = [(0.01, 1.628), (0.05, 1.358)];

/// Outcome of a one-sample KS test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// sup_x |F_emp(x) - F_model(x)|, in [0, 1].
    pub statistic: f64,
    pub n: usize,
    pub alpha: f64,
    /// c(alpha) / sqrt(n).
    pub critical: f64,
    pub passed: bool,
}

/// One-sample Kolmogorov-Smirnov test of `data` against a continuous
/// `model_cdf`.
///
/// The statistic evaluates both one-sided gaps at every data point; the
/// critical value is the asymptotic c(alpha)/sqrt(n) with c(0.01) = 1.628
/// and c(0.05) = 1.358. The test passes when statistic < critical.
/// For distributions with atoms use [`ks_against_density`], which scores
/// the step cdf correctly.
pub fn ks_test(data: &[f64], model_cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<KsResult> {
    if data.len() < KS_MIN_N {
        return Err(Error::SampleTooSmall {
            n: data.len(),
            min: KS_MIN_N,
        });
    }
    let c = KS_COEFFICIENTS
        .iter()
        .find(|(a, _)| *a == alpha)
        .map(|(_, c)| *c)
        .ok_or(Error::AlphaNotTabulated(alpha))?;

    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = n as f64;
    let mut statistic = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = model_cdf(x);
        statistic = statistic.max(f - i as f64 / nf);
        statistic = statistic.max((i as f64 + 1.0) / nf - f);
    }
    let critical = c / nf.sqrt();
    Ok(KsResult {
        statistic,
        n,
        alpha,
        critical,
        passed: statistic < critical,
    })
}

/// KS test of `data` against a fitted [`Density`], scoring discontinuous
/// cdfs correctly: the sup-distance candidates are evaluated with the cdf's
/// left limits at the data points and on both sides of every model atom.
/// For a continuous density this coincides with [`ks_test`].
pub fn ks_against_density(
    data: &[f64],
    density: &crate::density::Density,
    alpha: f64,
) -> Result<KsResult> {
    if data.len() < KS_MIN_N {
        return Err(Error::SampleTooSmall {
            n: data.len(),
            min: KS_MIN_N,
        });
    }
    let c = KS_COEFFICIENTS
        .iter()
        .find(|(a, _)| *a == alpha)
        .map(|(_, c)| *c)
        .ok_or(Error::AlphaNotTabulated(alpha))?;

    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = n as f64;
    let mut statistic = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        statistic = statistic.max((i as f64 + 1.0) / nf - density.cdf(x));
        statistic = statistic.max(density.cdf_left(x) - i as f64 / nf);
    }
    for atom in density.atoms() {
        let below = sorted.partition_point(|&x| x < atom) as f64 / nf;
        let at_or_below = sorted.partition_point(|&x| x <= atom) as f64 / nf;
        statistic = statistic.max((density.cdf_left(atom) - below).abs());
        statistic = statistic.max((density.cdf(atom) - at_or_below).abs());
    }
    let critical = c / nf.sqrt();
    Ok(KsResult {
        statistic,
        n,
        alpha,
        critical,
        passed: statistic < critical,
    })
}

/// An autocorrelation curve over hourly lags 0..=max_lag.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfCurve {
    pub lags_h: Vec<usize>,
    pub values: Vec<f64>,
    pub series_label: String,
}

/// Biased-normalization autocorrelation with a single global mean:
/// r(l) = sum_t (x_t - m)(x_{t+l} - m) / sum_t (x_t - m)^2.
pub fn acf(series: &[f64], max_lag: usize, label: &str) -> Result<AcfCurve> {
    if series.len() <= max_lag + 1 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: max_lag + 1,
        });
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut values = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let num: f64 = (0..n - lag)
            .map(|t| (series[t] - mean) * (series[t + lag] - mean))
            .sum();
        lags.push(lag);
        values.push(num / denom);
    }
    Ok(AcfCurve {
        lags_h: lags,
        values,
        series_label: label.to_string(),
    })
}

/// Per-lag differences between an empirical and a synthetic ACF curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfComparison {
    pub lags_h: Vec<usize>,
    pub empirical: Vec<f64>,
    pub synthetic: Vec<f64>,
    pub differences: Vec<f64>,
    pub max_abs_deviation: f64,
}

/// Compares two ACF curves on the same lag grid.
pub fn compare_acf(empirical: &AcfCurve, synthetic: &AcfCurve) -> Result<AcfComparison> {
    if empirical.lags_h != synthetic.lags_h {
        return Err(Error::MismatchedLagGrids);
    }
    let differences: Vec<f64> = empirical
        .values
        .iter()
        .zip(&synthetic.values)
        .map(|(e, s)| e - s)
        .collect();
    let max_abs_deviation = differences.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    Ok(AcfComparison {
        lags_h: empirical.lags_h.clone(),
        empirical: empirical.values.clone(),
        synthetic: synthetic.values.clone(),
        differences,
        max_abs_deviation,
    })
}

/// Summary row in the style of the panel-size and location tables:
/// mean/max current and mean/min/max sojourn duration for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub state: usize,
    pub month: u32,
    pub mean_current_a: f64,
    pub max_current_a: f64,
    pub mean_duration_h: f64,
    pub min_duration_h: f64,
    pub max_duration_h: f64,
    pub n_samples: usize,
    pub n_visits: usize,
}

/// Per-state statistics from clustered visits. Current statistics use all
/// samples; duration statistics use only non-truncated visits (falling
/// back to all visits when every sojourn was cut by a data edge).
pub fn summary_from_visits(visits: &[StateVisit], month: u32) -> Vec<SummaryStats> {
    let mut states: Vec<usize> = visits.iter().map(|v| v.state).collect();
    states.sort_unstable();
    states.dedup();

    states
        .into_iter()
        .map(|state| {
            let mine: Vec<&StateVisit> = visits.iter().filter(|v| v.state == state).collect();
            let samples: Vec<f64> = mine
                .iter()
                .flat_map(|v| v.samples.iter().copied())
                .collect();
            let full: Vec<f64> = mine
                .iter()
                .filter(|v| !v.truncated)
                .map(|v| v.duration_h)
                .collect();
            let durations = if full.is_empty() {
                mine.iter().map(|v| v.duration_h).collect()
            } else {
                full
            };
            SummaryStats {
                state,
                month,
                mean_current_a: mean(&samples),
                max_current_a: samples.iter().fold(0.0f64, |a, &b| a.max(b)),
                mean_duration_h: mean(&durations),
                min_duration_h: durations.iter().copied().fold(f64::INFINITY, f64::min),
                max_duration_h: durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_samples: samples.len(),
                n_visits: mine.len(),
            }
        })
        .collect()
}

/// Per-state statistics from a synthetic trace, using the generator's
/// sojourn log for durations and the grid values for currents.
pub fn summary_from_trace(trace: &SyntheticTrace, month: u32) -> Vec<SummaryStats> {
    let mut states: Vec<usize> = trace.state_log.clone();
    states.sort_unstable();
    states.dedup();

    states
        .into_iter()
        .map(|state| {
            let samples: Vec<f64> = trace
                .values
                .iter()
                .zip(&trace.state_log)
                .filter(|(_, s)| **s == state)
                .map(|(v, _)| *v)
                .collect();
            let durations: Vec<f64> = trace
                .sojourns
                .iter()
                .filter(|s| s.state == state)
                .map(|s| s.duration_h)
                .collect();
            SummaryStats {
                state,
                month,
                mean_current_a: mean(&samples),
                max_current_a: samples.iter().fold(0.0f64, |a, &b| a.max(b)),
                mean_duration_h: mean(&durations),
                min_duration_h: durations.iter().copied().fold(f64::INFINITY, f64::min),
                max_duration_h: durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_samples: samples.len(),
                n_visits: durations.len(),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
