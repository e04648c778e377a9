//! Dual-record-system tables, model states and generating populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The observed 2×2 dual-record table.
///
/// The both-missed cell `x00` is never observed and has no field here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DrsData {
    /// Captured in both lists.
    pub x11: u64,
    /// Captured in List 1 only.
    pub x10: u64,
    /// Captured in List 2 only.
    pub x01: u64,
}

impl DrsData {
    /// Builds a table, rejecting one with no captured individuals.
    pub fn new(x11: u64, x10: u64, x01: u64) -> Result<Self> {
        let data = Self { x11, x10, x01 };
        if data.x0() == 0 {
            return Err(Error::DegenerateData(
                "no individual was captured in either list (x0 = 0)".into(),
            ));
        }
        Ok(data)
    }

    /// Number of distinct individuals captured.
    pub fn x0(&self) -> u64 {
        self.x11 + self.x10 + self.x01
    }

    /// List 1 total.
    pub fn x1dot(&self) -> u64 {
        self.x11 + self.x10
    }

    /// List 2 total.
    pub fn xdot1(&self) -> u64 {
        self.x11 + self.x01
    }

    /// Maximum-likelihood estimate of the recapture probability, `x11 / x1.`.
    pub fn c_hat(&self) -> Result<f64> {
        c_hat(self)
    }
}

/// `ĉ = x11 / x1.`, the identifiable recapture probability.
pub fn c_hat(data: &DrsData) -> Result<f64> {
    if data.x1dot() == 0 {
        return Err(Error::DegenerateData(
            "List 1 is empty (x1. = 0); the recapture probability is not estimable".into(),
        ));
    }
    Ok(data.x11 as f64 / data.x1dot() as f64)
}

/// One state of model M_tb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtbParams {
    pub n: u64,
    /// List 1 capture probability.
    pub p1dot: f64,
    /// List 2 capture probability for someone missed by List 1.
    pub p: f64,
    /// Behavioural response effect.
    pub phi: f64,
}

impl MtbParams {
    /// Recapture probability `c = φ·p`.
    pub fn c(&self) -> f64 {
        self.phi * self.p
    }
}

/// A generating population for simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_true: u64,
    pub p1dot: f64,
    /// Unconditional List 2 capture probability.
    pub pdot1: f64,
    pub phi: f64,
}

impl PopulationSpec {
    /// List 2 capture probability conditional on a List 1 miss.
    ///
    /// Solves `p.1 = p1.·φ·p + (1 − p1.)·p` for `p`.
    pub fn induced_p(&self) -> f64 {
        self.pdot1 / (1.0 - self.p1dot + self.phi * self.p1dot)
    }
}

/// Multinomial cell probabilities of the full 2×2 table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbabilities {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl CellProbabilities {
    pub fn new(p11: f64, p10: f64, p01: f64, p00: f64) -> Result<Self> {
        let cells = [p11, p10, p01, p00];
        if cells.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!(
                "cell probabilities must lie in [0, 1], got {cells:?}"
            )));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "cell probabilities must sum to 1, got {total}"
            )));
        }
        Ok(Self { p11, p10, p01, p00 })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p11, self.p10, self.p01, self.p00]
    }

    /// Probability that an individual is captured at least once.
    pub fn captured(&self) -> f64 {
        1.0 - self.p00
    }
}

/// Maps `(p1., p.1, φ)` to the four cell probabilities of model M_tb.
pub fn cell_probabilities(spec: &PopulationSpec) -> Result<CellProbabilities> {
    let PopulationSpec {
        p1dot, pdot1, phi, ..
    } = *spec;
    if !(0.0..=1.0).contains(&p1dot) || !(0.0..=1.0).contains(&pdot1) {
        return Err(Error::InfeasibleSpec(format!(
            "capture probabilities must lie in [0, 1] (p1. = {p1dot}, p.1 = {pdot1})"
        )));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InfeasibleSpec(format!(
            "behavioural effect must be positive, got φ = {phi}"
        )));
    }
    let p = spec.induced_p();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InfeasibleSpec(format!(
            "induced conditional capture probability p = {p} lies outside (0, 1)"
        )));
    }
    let c = phi * p;
    if c >= 1.0 {
        return Err(Error::InfeasibleSpec(format!(
            "recapture probability φ·p = {c} is not below 1"
        )));
    }
    let p11 = p1dot * c;
    let p10 = p1dot * (1.0 - c);
    let p01 = (1.0 - p1dot) * p;
    let p00 = (1.0 - p1dot) * (1.0 - p);
    // Renormalise rounding residue so the cells sum to one exactly enough.
    let total = p11 + p10 + p01 + p00;
    CellProbabilities::new(p11 / total, p10 / total, p01 / total, p00 / total)
}

/// Expected number of distinct captured individuals, `N·(1 − p00)`.
pub fn expected_captured(spec: &PopulationSpec) -> Result<f64> {
    Ok(spec.n_true as f64 * cell_probabilities(spec)?.captured())
}
