//! Chain and sample summaries: autocorrelation, mean squared jump distance,
//! acceptance rate, empirical-CDF distance and standardized moments.

use std::io::Write;

use crate::error::{Error, Result};
use crate::samplers::StepOutcome;

/// Recorded draws of a chain with per-step acceptance information.
#[derive(Debug, Clone, Default)]
pub struct ChainTrace {
    pub draws: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    pub log_alphas: Vec<f64>,
}

impl ChainTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            draws: Vec::with_capacity(n),
            accepted: Vec::with_capacity(n),
            log_alphas: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, draw: Vec<f64>, accepted: bool, log_alpha: f64) {
        self.draws.push(draw);
        self.accepted.push(accepted);
        self.log_alphas.push(log_alpha);
    }

    pub fn record(&mut self, outcome: &StepOutcome) {
        self.push(outcome.state.z.clone(), outcome.accepted, outcome.log_alpha);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[i]).collect()
    }

    /// Equal lengths, and every rejected step repeats the previous draw.
    pub fn check_invariants(&self) -> Result<()> {
        if self.accepted.len() != self.draws.len() || self.log_alphas.len() != self.draws.len() {
            return Err(Error::Format("trace fields have different lengths".into()));
        }
        for k in 1..self.draws.len() {
            if !self.accepted[k] && self.draws[k] != self.draws[k - 1] {
                return Err(Error::Format(format!(
                    "step {k} rejected but the draw changed"
                )));
            }
        }
        Ok(())
    }
}

/// Biased (divide-by-N) sample autocorrelation of a scalar series for lags
/// `0..=max_lag`.
pub fn autocorrelation_series(x: &[f64], max_lag: usize) -> Vec<f64> {
    assert!(x.len() > max_lag, "series length must exceed max_lag");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n;
    if c0 == 0.0 {
        // constant series: define lag 0 as 1 and the rest as 0
        return (0..=max_lag)
            .map(|k| if k == 0 { 1.0 } else { 0.0 })
            .collect();
    }
    (0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let ck = c[..c.len() - k]
                .iter()
                .zip(&c[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n;
            (ck / c0).clamp(-1.0, 1.0)
        })
        .collect()
}

pub fn autocorrelation(trace: &ChainTrace, coordinate: usize, max_lag: usize) -> Vec<f64> {
    autocorrelation_series(&trace.coordinate(coordinate), max_lag)
}

/// Autocorrelation averaged over all coordinates.
pub fn mean_autocorrelation(trace: &ChainTrace, max_lag: usize) -> Vec<f64> {
    let dim = trace.draws.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; max_lag + 1];
    for i in 0..dim {
        for (a, v) in acc.iter_mut().zip(autocorrelation(trace, i, max_lag)) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / dim as f64).collect()
}

/// Mean of `|x_{k+1} - x_k|^2`.
pub fn msejd(trace: &ChainTrace) -> f64 {
    assert!(trace.len() >= 2, "need at least two draws");
    let total: f64 = trace
        .draws
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
        })
        .sum();
    total / (trace.len() - 1) as f64
}

pub fn acceptance_rate(trace: &ChainTrace) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    trace.accepted.iter().filter(|a| **a).count() as f64 / trace.len() as f64
}

/// Kolmogorov-Smirnov distance `sup |F_n - F|` between a sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample mean, standard deviation (n - 1), and the moment estimators
/// `g1 = m3 / m2^1.5`, `g2 = m4 / m2^2 - 3`.
pub fn standardized_moments(x: &[f64]) -> MomentSummary {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let std_dev = if x.len() > 1 {
        (m2 * n / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    MomentSummary {
        mean,
        std_dev,
        skewness,
        excess_kurtosis,
    }
}

/// Counts of standardized values `(x - mean) / sd` in unit-width bins over
/// `[-half_width, half_width]`; values outside go to the end bins.
pub fn standardized_histogram(x: &[f64], half_width: usize) -> Vec<(f64, usize)> {
    let m = standardized_moments(x);
    let bins = 2 * half_width;
    let mut counts = vec![0usize; bins];
    for v in x {
        let t = if m.std_dev > 0.0 {
            (v - m.mean) / m.std_dev
        } else {
            0.0
        };
        let idx = ((t + half_width as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 - half_width as f64, c))
        .collect()
}

/// 17 significant digits, so files are stable and round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `lag,acf` rows.
pub fn write_acf_csv<W: Write>(mut out: W, acf: &[f64]) -> Result<()> {
    writeln!(out, "lag,acf")?;
    for (k, v) in acf.iter().enumerate() {
        writeln!(out, "{k},{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// `sampler,metric,value` rows.
pub fn write_summary_csv<W: Write>(mut out: W, rows: &[(String, String, f64)]) -> Result<()> {
    writeln!(out, "sampler,metric,value")?;
    for (sampler, metric, v) in rows {
        writeln!(out, "{sampler},{metric},{}", fmt_f64(*v))?;
    }
    Ok(())
}
