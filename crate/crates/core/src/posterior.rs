//! Point estimates and credible intervals from retained draws.
//!
//! Quantiles use the nearest-rank rule `x_(⌈q·n⌉)`, so interval endpoints
//! are always order statistics of the draws.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::ChainTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    /// Most frequent value; ties go to the smallest.
    pub map: f64,
    /// Minimiser of squared relative error loss, `Σ N⁻¹ / Σ N⁻²`.
    pub sre: f64,
    pub level: f64,
    pub ci: (f64, f64),
    pub n_draws: usize,
    /// Frequency of each sampled value.
    pub histogram: BTreeMap<u64, u64>,
}

/// Summary of a real-valued parameter such as φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub level: f64,
    pub ci: (f64, f64),
    pub n_draws: usize,
}

fn check_level(level: f64) -> Result<()> {
    if (0.0..1.0).contains(&level) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "credible level must lie in [0, 1), got {level}"
        )))
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!(
            "a posterior summary needs at least 2 draws, got {n}"
        )));
    }
    Ok(())
}

/// 1-based nearest rank of quantile `q` among `n` sorted values.
///
/// A relative slack of 1e-12 keeps products such as `0.95·100` from
/// rounding up a rank.
pub fn nearest_rank(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    ((x - 1e-12 * x.max(1.0)).ceil() as usize).clamp(1, n)
}

fn quantile_sorted<T: Copy>(sorted: &[T], q: f64) -> T {
    sorted[nearest_rank(q, sorted.len()) - 1]
}

fn interval_probs(level: f64) -> (f64, f64) {
    ((1.0 - level) / 2.0, (1.0 + level) / 2.0)
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let ss = values.map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (nf - 1.0)).sqrt())
}

/// Summarises integer population-size draws.
pub fn summarize(draws: &[u64], level: f64) -> Result<PosteriorSummary> {
    check_level(level)?;
    check_len(draws.len())?;
    if draws.contains(&0) {
        return Err(Error::Domain(
            "population size draws must be positive".into(),
        ));
    }
    let mut histogram = BTreeMap::new();
    for &n in draws {
        *histogram.entry(n).or_insert(0u64) += 1;
    }
    summarize_histogram(&histogram, level)
}

/// Summarises draws already tallied into a histogram.
pub fn summarize_histogram(histogram: &BTreeMap<u64, u64>, level: f64) -> Result<PosteriorSummary> {
    check_level(level)?;
    let n_draws: u64 = histogram.values().sum();
    check_len(n_draws as usize)?;
    let nf = n_draws as f64;
    let (mut s1, mut inv1, mut inv2) = (0.0, 0.0, 0.0);
    for (&v, &c) in histogram {
        let (v, c) = (v as f64, c as f64);
        s1 += c * v;
        inv1 += c / v;
        inv2 += c / (v * v);
    }
    let mean = s1 / nf;
    let ss: f64 = histogram
        .iter()
        .map(|(&v, &c)| c as f64 * (v as f64 - mean).powi(2))
        .sum();
    let mut map = 0u64;
    let mut best = 0u64;
    for (&v, &c) in histogram {
        if c > best {
            best = c;
            map = v;
        }
    }
    let (lo_q, hi_q) = interval_probs(level);
    let at = |q: f64| histogram_rank(histogram, nearest_rank(q, n_draws as usize) as u64) as f64;
    Ok(PosteriorSummary {
        mean,
        sd: (ss / (nf - 1.0)).sqrt(),
        median: at(0.5),
        map: map as f64,
        sre: inv1 / inv2,
        level,
        ci: (at(lo_q), at(hi_q)),
        n_draws: n_draws as usize,
        histogram: histogram.clone(),
    })
}

fn histogram_rank(histogram: &BTreeMap<u64, u64>, rank: u64) -> u64 {
    let mut seen = 0;
    for (&v, &c) in histogram {
        seen += c;
        if seen >= rank {
            return v;
        }
    }
    *histogram
        .keys()
        .next_back()
        .expect("histogram is non-empty")
}

/// Summarises real-valued draws.
pub fn summarize_real(draws: &[f64], level: f64) -> Result<RealSummary> {
    check_level(level)?;
    check_len(draws.len())?;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(sorted.iter().copied(), sorted.len());
    let (lo_q, hi_q) = interval_probs(level);
    Ok(RealSummary {
        mean,
        sd,
        median: quantile_sorted(&sorted, 0.5),
        level,
        ci: (
            quantile_sorted(&sorted, lo_q),
            quantile_sorted(&sorted, hi_q),
        ),
        n_draws: sorted.len(),
    })
}

fn check_burn_in(traces: &[ChainTrace]) -> Result<()> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("no chains to summarise".into()))?;
    if traces.iter().any(|t| t.burn_in != first.burn_in) {
        return Err(Error::Config(
            "chains were run with different burn-in lengths".into(),
        ));
    }
    Ok(())
}

/// Pools post-burn-in `N` draws across chains and summarises them.
pub fn pooled_summary(traces: &[ChainTrace], level: f64) -> Result<PosteriorSummary> {
    check_burn_in(traces)?;
    let draws: Vec<u64> = traces
        .iter()
        .flat_map(|t| t.retained_n().iter().copied())
        .collect();
    summarize(&draws, level)
}

/// Pools post-burn-in φ draws across chains and summarises them.
pub fn pooled_phi_summary(traces: &[ChainTrace], level: f64) -> Result<RealSummary> {
    check_burn_in(traces)?;
    let draws: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.retained_phi().iter().copied())
        .collect();
    summarize_real(&draws, level)
}
