//! Log-likelihood kernels of models M_tb and M_t.
//!
//! Factorials go through `ln Γ`, so sizes in the thousands do not overflow.
//! Terms that depend only on the data are dropped.

use statrs::function::gamma::ln_gamma;

use crate::data::{DrsData, MtbParams};
use crate::error::{Error, Result};

fn ln_falling_factorial(n: u64, k: u64) -> f64 {
    // ln N! − ln (N − k)!
    ln_gamma(n as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} must lie in (0, 1)")))
    }
}

/// Log of the M_tb likelihood kernel at `params`.
pub fn log_likelihood_mtb(params: &MtbParams, data: &DrsData) -> Result<f64> {
    let MtbParams { n, p1dot, p, phi } = *params;
    if n < data.x0() {
        return Err(Error::Domain(format!(
            "population size N = {n} is below the distinct captured count x0 = {}",
            data.x0()
        )));
    }
    check_open_unit("p1.", p1dot)?;
    check_open_unit("p", p)?;
    if !(phi > 0.0) {
        return Err(Error::Domain(format!("φ = {phi} must be positive")));
    }
    let c = phi * p;
    if c >= 1.0 {
        return Err(Error::Domain(format!("φ·p = {c} must be below 1")));
    }
    let x11 = data.x11 as f64;
    let x10 = data.x10 as f64;
    let x1dot = data.x1dot() as f64;
    let xdot1 = data.xdot1() as f64;
    let nf = n as f64;
    let x0 = data.x0() as f64;
    Ok(ln_falling_factorial(n, data.x0())
        + x11 * phi.ln()
        + x1dot * p1dot.ln()
        + xdot1 * p.ln()
        + (nf - x1dot) * (-p1dot).ln_1p()
        + (nf - x0) * (-p).ln_1p()
        + x10 * (-c).ln_1p())
}

/// Log of the M_t (list-independence) likelihood kernel.
pub fn log_likelihood_mt(n: u64, p1dot: f64, pdot1: f64, data: &DrsData) -> Result<f64> {
    if n < data.x0() {
        return Err(Error::Domain(format!(
            "population size N = {n} is below x0 = {}",
            data.x0()
        )));
    }
    check_open_unit("p1.", p1dot)?;
    check_open_unit("p.1", pdot1)?;
    let nf = n as f64;
    let x1dot = data.x1dot() as f64;
    let xdot1 = data.xdot1() as f64;
    Ok(ln_falling_factorial(n, data.x0())
        + x1dot * p1dot.ln()
        + xdot1 * pdot1.ln()
        + (nf - x1dot) * (-p1dot).ln_1p()
        + (nf - xdot1) * (-pdot1).ln_1p())
}
