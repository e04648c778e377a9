//! Gibbs samplers for model M_tb: AB-Flat (flat prior on φ over a
//! directional interval) and AB-Con (conjugate GB-I prior on φ).
//!
//! Both engines run each chain on its own [`RngStream`] `(seed, chain)`,
//! so traces are reproducible and chains can run in parallel.

mod ab_con;
mod ab_flat;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DrsData;
use crate::distributions::{sample_negative_binomial, sample_poisson, RngStream};
use crate::error::{Error, Result};
use crate::estimators::{estimate_mb, estimate_nour};

pub use ab_con::{ab_con_hyperparameters, run_ab_con};
pub use ab_flat::run_ab_flat;

/// Infeasible draws tolerated per iteration before a chain is abandoned.
pub const MAX_REDRAWS: usize = 100;

/// Directional knowledge about the behavioural effect φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKnowledge {
    /// Recapture-prone population, φ > 1.
    GreaterThanOne,
    /// Recapture-averse population, φ < 1.
    LessThanOne,
    None,
}

impl FromStr for PhiKnowledge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt1" | "greater-than-one" => Ok(Self::GreaterThanOne),
            "lt1" | "less-than-one" => Ok(Self::LessThanOne),
            "none" => Ok(Self::None),
            _ => Err(Error::Config(format!(
                "unknown φ knowledge '{s}' (expected gt1, lt1 or none)"
            ))),
        }
    }
}

impl fmt::Display for PhiKnowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GreaterThanOne => "gt1",
            Self::LessThanOne => "lt1",
            Self::None => "none",
        })
    }
}

/// Uniform prior on φ for AB-Flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPriorPolicy {
    pub knowledge: PhiKnowledge,
    /// Upper bound β used by `gt1` and `none`.
    pub upper: f64,
    /// Explicit `(α, β)`, overriding the knowledge rule.
    pub range: Option<(f64, f64)>,
}

impl PhiPriorPolicy {
    pub fn new(knowledge: PhiKnowledge) -> Self {
        Self {
            knowledge,
            upper: 2.0,
            range: None,
        }
    }

    pub fn with_range(alpha: f64, beta: f64) -> Self {
        Self {
            knowledge: PhiKnowledge::None,
            upper: beta,
            range: Some((alpha, beta)),
        }
    }
}

/// Resolves the φ prior interval `(α, β)` for a data table.
pub fn resolve_phi_prior(policy: &PhiPriorPolicy, data: &DrsData) -> Result<(f64, f64)> {
    let (alpha, beta) = match policy.range {
        Some(r) => r,
        None => {
            let c = data.c_hat()?;
            match policy.knowledge {
                PhiKnowledge::GreaterThanOne => (1.0, policy.upper),
                PhiKnowledge::LessThanOne => (c, 1.0),
                PhiKnowledge::None => (c, policy.upper),
            }
        }
    };
    if !(alpha.is_finite() && beta.is_finite()) || alpha < 0.0 {
        return Err(Error::Config(format!(
            "φ prior bounds must be finite and non-negative, got ({alpha}, {beta})"
        )));
    }
    if alpha >= beta {
        return Err(Error::Config(format!(
            "φ prior interval is empty: α = {alpha} is not below β = {beta}"
        )));
    }
    Ok((alpha, beta))
}

/// Where the Poisson prior mean λ comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    MbEstimate,
    NourEstimate,
    Fixed(f64),
}

impl FromStr for LambdaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mb" => Ok(Self::MbEstimate),
            "nour" => Ok(Self::NourEstimate),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .map(Self::Fixed)
                    .map_err(|_| Error::Config(format!("cannot read a fixed λ from '{v}'"))),
                None => Err(Error::Config(format!(
                    "unknown λ source '{s}' (expected mb, nour or fixed:<value>)"
                ))),
            },
        }
    }
}

impl fmt::Display for LambdaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MbEstimate => f.write_str("mb"),
            Self::NourEstimate => f.write_str("nour"),
            Self::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

/// Prior on the population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NPrior {
    /// `π(N) ∝ 1/N`.
    Jeffreys,
    Poisson {
        lambda: LambdaSource,
    },
}

/// Returns the Poisson prior mean for the data.
pub fn resolve_lambda(source: LambdaSource, data: &DrsData) -> Result<f64> {
    let undefined = |e: Error| Error::Config(format!("cannot set the Poisson prior mean: {e}"));
    let lambda = match source {
        LambdaSource::MbEstimate => estimate_mb(data).map_err(undefined)?,
        LambdaSource::NourEstimate => estimate_nour(data).map_err(undefined)?,
        LambdaSource::Fixed(v) => v,
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "Poisson prior mean must be positive and finite, got {lambda}"
        )));
    }
    Ok(lambda)
}

/// How AB-Flat sets `p` after drawing `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PUpdate {
    /// `p = ĉ/φ`.
    #[default]
    COverPhi,
    /// `p = x01/(N − x1.)`.
    Lloyd,
}

impl FromStr for PUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c-over-phi" => Ok(Self::COverPhi),
            "lloyd" => Ok(Self::Lloyd),
            _ => Err(Error::Config(format!(
                "unknown p-update rule '{s}' (expected c-over-phi or lloyd)"
            ))),
        }
    }
}

impl fmt::Display for PUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::COverPhi => "c-over-phi",
            Self::Lloyd => "lloyd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Burn-in `k`; each chain runs `2k` iterations.
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    /// AB-Flat only.
    pub p_update: PUpdate,
    /// AB-Con variance tuning.
    pub t: f64,
    /// AB-Con only: drop the data from the φ shapes, leaving the prior.
    #[serde(default)]
    pub prior_only: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            chains: 5,
            seed: 1,
            p_update: PUpdate::COverPhi,
            t: 20.0,
            prior_only: false,
        }
    }
}

impl ChainConfig {
    pub fn iterations(&self) -> usize {
        2 * self.burn_in
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in == 0 {
            return Err(Error::Config("burn-in k must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Config(format!("t must be positive, got {}", self.t)));
        }
        Ok(())
    }
}

/// One recorded chain of `2k` Gibbs states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub chain: usize,
    pub burn_in: usize,
    pub n: Vec<u64>,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub p1dot: Vec<f64>,
    /// Lower truncation bound of the φ draw.
    pub phi_lower: f64,
    /// Upper truncation bound of each φ draw.
    pub phi_upper: Vec<f64>,
    /// Infeasible draws that were repeated.
    pub redraws: u64,
}

impl ChainTrace {
    fn with_capacity(chain: usize, burn_in: usize, phi_lower: f64) -> Self {
        let cap = 2 * burn_in;
        Self {
            chain,
            burn_in,
            n: Vec::with_capacity(cap),
            phi: Vec::with_capacity(cap),
            p: Vec::with_capacity(cap),
            p1dot: Vec::with_capacity(cap),
            phi_lower,
            phi_upper: Vec::with_capacity(cap),
            redraws: 0,
        }
    }

    fn push(&mut self, n: u64, phi: f64, p: f64, p1dot: f64, phi_upper: f64) {
        self.n.push(n);
        self.phi.push(phi);
        self.p.push(p);
        self.p1dot.push(p1dot);
        self.phi_upper.push(phi_upper);
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Values of `param` as reals, over the whole chain.
    pub fn values(&self, param: Param) -> Vec<f64> {
        match param {
            Param::N => self.n.iter().map(|&v| v as f64).collect(),
            Param::Phi => self.phi.clone(),
            Param::P => self.p.clone(),
            Param::P1dot => self.p1dot.clone(),
        }
    }

    /// Post-burn-in population sizes.
    pub fn retained_n(&self) -> &[u64] {
        &self.n[self.burn_in.min(self.n.len())..]
    }

    /// Post-burn-in φ draws.
    pub fn retained_phi(&self) -> &[f64] {
        &self.phi[self.burn_in.min(self.phi.len())..]
    }
}

/// A traced model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    N,
    Phi,
    P,
    P1dot,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::N, Param::Phi, Param::P, Param::P1dot];

    pub fn name(self) -> &'static str {
        match self {
            Param::N => "N",
            Param::Phi => "phi",
            Param::P => "p",
            Param::P1dot => "p1dot",
        }
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Param::N),
            "phi" => Ok(Param::Phi),
            "p" => Ok(Param::P),
            "p1dot" | "p1" => Ok(Param::P1dot),
            _ => Err(Error::Config(format!(
                "unknown parameter '{s}' (expected N, phi, p or p1dot)"
            ))),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// N-prior with λ already resolved.
#[derive(Debug, Clone, Copy)]
pub(crate) enum NConditional {
    Jeffreys,
    Poisson(f64),
}

impl NConditional {
    pub(crate) fn resolve(prior: NPrior, data: &DrsData) -> Result<Self> {
        Ok(match prior {
            NPrior::Jeffreys => Self::Jeffreys,
            NPrior::Poisson { lambda } => Self::Poisson(resolve_lambda(lambda, data)?),
        })
    }

    /// Draws `N` given the capture probabilities.
    ///
    /// Jeffreys: `N − x0 ~ NB(x0, 1 − (1−p1.)(1−p))` as a failures count.
    /// Poisson: `N − x0 ~ Poisson(λ(1−p1.)(1−p))`.
    pub(crate) fn draw(&self, x0: u64, p1dot: f64, p: f64, rng: &mut RngStream) -> Result<u64> {
        let q = (1.0 - p1dot) * (1.0 - p);
        let extra = match *self {
            Self::Jeffreys => sample_negative_binomial(x0, 1.0 - q, rng)?,
            Self::Poisson(lambda) => sample_poisson(lambda * q, rng)?,
        };
        Ok(x0 + extra)
    }
}

/// Runs `chains` independent chains in parallel, keeping chain order.
pub(crate) fn run_chains<F>(cfg: &ChainConfig, run: F) -> Result<Vec<ChainTrace>>
where
    F: Fn(usize, &mut RngStream) -> Result<ChainTrace> + Sync,
{
    cfg.validate()?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::new(cfg.seed, j as u64);
            run(j, &mut rng)
        })
        .collect()
}

pub(crate) fn chain_failure(chain: usize, iteration: usize, reason: impl Into<String>) -> Error {
    Error::ChainFailure {
        chain,
        iteration,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(x11: u64, x10: u64, x01: u64) -> DrsData {
        DrsData::new(x11, x10, x01).unwrap()
    }

    #[test]
    fn phi_prior_resolution() {
        let data = d(50, 50, 50);
        assert_eq!(
            resolve_phi_prior(&PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne), &data).unwrap(),
            (1.0, 2.0)
        );
        assert_eq!(
            resolve_phi_prior(&PhiPriorPolicy::new(PhiKnowledge::LessThanOne), &data).unwrap(),
            (0.5, 1.0)
        );
        let none = PhiPriorPolicy::new(PhiKnowledge::None);
        let (a, b) = resolve_phi_prior(&none, &d(90, 10, 5)).unwrap();
        assert_abs_diff_eq!(a, 0.9, epsilon = 1e-15);
        assert_eq!(b, 2.0);
        let three = PhiPriorPolicy {
            upper: 3.0,
            ..PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne)
        };
        assert_eq!(resolve_phi_prior(&three, &data).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn phi_override_wins_and_empty_intervals_fail() {
        let data = d(50, 50, 50);
        let policy = PhiPriorPolicy {
            range: Some((0.7, 1.3)),
            ..PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne)
        };
        assert_eq!(resolve_phi_prior(&policy, &data).unwrap(), (0.7, 1.3));
        assert!(matches!(
            resolve_phi_prior(&PhiPriorPolicy::with_range(1.0, 1.0), &data),
            Err(Error::Config(_))
        ));
        let low = PhiPriorPolicy {
            upper: 0.4,
            ..PhiPriorPolicy::new(PhiKnowledge::None)
        };
        assert!(matches!(
            resolve_phi_prior(&low, &data),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lambda_resolution() {
        let data = d(50, 50, 50);
        assert_abs_diff_eq!(
            resolve_lambda(LambdaSource::MbEstimate, &data).unwrap(),
            200.0,
            epsilon = 1e-9
        );
        assert_eq!(
            resolve_lambda(LambdaSource::NourEstimate, &data).unwrap(),
            200.0
        );
        assert_eq!(
            resolve_lambda(LambdaSource::Fixed(500.0), &data).unwrap(),
            500.0
        );
        let err = resolve_lambda(LambdaSource::MbEstimate, &d(10, 10, 30)).unwrap_err();
        assert!(matches!(&err, Error::Config(msg) if msg.contains("M_b")));
        assert!(resolve_lambda(LambdaSource::Fixed(0.0), &data).is_err());
    }

    #[test]
    fn parsing_round_trips() {
        for k in [
            PhiKnowledge::GreaterThanOne,
            PhiKnowledge::LessThanOne,
            PhiKnowledge::None,
        ] {
            assert_eq!(k.to_string().parse::<PhiKnowledge>().unwrap(), k);
        }
        for l in [
            LambdaSource::MbEstimate,
            LambdaSource::NourEstimate,
            LambdaSource::Fixed(412.5),
        ] {
            assert_eq!(l.to_string().parse::<LambdaSource>().unwrap(), l);
        }
        for u in [PUpdate::COverPhi, PUpdate::Lloyd] {
            assert_eq!(u.to_string().parse::<PUpdate>().unwrap(), u);
        }
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
        assert!("fixed:abc".parse::<LambdaSource>().is_err());
        assert!("sometimes".parse::<PhiKnowledge>().is_err());
    }

    #[test]
    fn config_validation() {
        let bad = ChainConfig {
            burn_in: 0,
            ..ChainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ChainConfig {
            t: -1.0,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(ChainConfig::default().iterations(), 4000);
    }
}
