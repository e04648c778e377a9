//! Multiple-sequence convergence diagnostic `R̂^{1/2}` and burn-in scans.
//!
//! With `m` chains of `n` retained draws, chain means `x̄_j`, grand mean `x̄`
//! and within-chain variances `s_j²`:
//!
//! ```text
//! W = mean_j s_j²
//! B = n/(m−1) · Σ_j (x̄_j − x̄)²
//! V̂ = (n−1)/n · W + (m+1)/(m·n) · B
//! R̂^{1/2} = sqrt(V̂ / W)
//! ```
//!
//! The retained draws for burn-in `k` are iterations `k+1 ..= 2k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{ChainTrace, Param};

pub const DEFAULT_THRESHOLD: f64 = 1.1;

/// `R̂^{1/2}` over already-extracted retained draws, one slice per chain.
pub fn psrf_from_draws(chains: &[&[f64]]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "the scale-reduction statistic needs at least 2 chains, got {m}"
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config(
            "chains must retain equal numbers of draws".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "each chain needs at least 2 retained draws, got {n}"
        )));
    }
    let nf = n as f64;
    let mf = m as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / mf;
    if !(w > 0.0) {
        return Err(Error::DegenerateDiagnostic(
            "within-chain variance is zero; every chain is constant".into(),
        ));
    }
    let grand = means.iter().sum::<f64>() / mf;
    let b = nf / (mf - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let v_hat = (nf - 1.0) / nf * w + (mf + 1.0) / (mf * nf) * b;
    Ok((v_hat / w).sqrt())
}

/// `R̂^{1/2}` of `param` using iterations `k+1 ..= 2k` of every chain.
pub fn psrf(traces: &[ChainTrace], param: Param, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("burn-in k must be at least 1".into()));
    }
    let shortest = traces.iter().map(ChainTrace::len).min().unwrap_or(0);
    if 2 * k > shortest {
        return Err(Error::Config(format!(
            "burn-in k = {k} needs chains of at least {} iterations, the shortest has {shortest}",
            2 * k
        )));
    }
    let values: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.values(param)[k..2 * k].to_vec())
        .collect();
    let slices: Vec<&[f64]> = values.iter().map(Vec::as_slice).collect();
    psrf_from_draws(&slices)
}

/// A burn-in scan of `R̂^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsrfReport {
    pub parameter: String,
    /// `(k, R̂^{1/2})` for each grid value.
    pub curve: Vec<(usize, f64)>,
    pub threshold: f64,
    /// Smallest grid `k` whose value is below the threshold.
    pub recommended_k: Option<usize>,
}

impl PsrfReport {
    /// Value at the largest scanned `k`.
    pub fn last(&self) -> Option<f64> {
        self.curve.last().map(|&(_, v)| v)
    }
}

/// Evaluates [`psrf`] at each `k` of the grid.
pub fn burnin_scan(
    traces: &[ChainTrace],
    param: Param,
    k_grid: &[usize],
    threshold: f64,
) -> Result<PsrfReport> {
    if k_grid.is_empty() {
        return Err(Error::Config("the burn-in grid is empty".into()));
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let curve = grid
        .iter()
        .map(|&k| psrf(traces, param, k).map(|v| (k, v)))
        .collect::<Result<Vec<_>>>()?;
    let recommended_k = curve.iter().find(|&&(_, v)| v < threshold).map(|&(k, _)| k);
    Ok(PsrfReport {
        parameter: param.name().to_string(),
        curve,
        threshold,
        recommended_k,
    })
}

/// `steps` evenly spaced burn-in values up to half the shortest chain.
pub fn default_k_grid(traces: &[ChainTrace], steps: usize) -> Vec<usize> {
    let half = traces.iter().map(ChainTrace::len).min().unwrap_or(0) / 2;
    let steps = steps.max(1);
    let step = (half / steps).max(1);
    (1..=steps)
        .map(|i| i * step)
        .filter(|&k| k >= 1 && k <= half)
        .collect()
}
