use crate::data::DrsData;
use crate::distributions::{sample_beta, RngStream, TruncatedScaledBeta};
use crate::error::{Error, Result};
use crate::special::IncompleteBeta;

use super::{
    chain_failure, resolve_phi_prior, run_chains, ChainConfig, ChainTrace, LambdaSource,
    NConditional, NPrior, PUpdate, PhiKnowledge, PhiPriorPolicy, MAX_REDRAWS,
};

/// AB-Flat: `φ ~ U(α, β)` with `p` tied to `φ` through `p = ĉ/φ`.
///
/// Each iteration draws φ from its truncated GB-I conditional, then `N`
/// from the N-conditional at `p = ĉ/φ`, then updates `p` and `p1.`.
/// An infeasible `p` (possible under the Lloyd rule) repeats the φ and `N`
/// draws, at most [`MAX_REDRAWS`] times.
pub fn run_ab_flat(
    data: &DrsData,
    phi_policy: &PhiPriorPolicy,
    n_prior: NPrior,
    cfg: &ChainConfig,
) -> Result<Vec<ChainTrace>> {
    if data.x11 == 0 {
        return Err(Error::DegenerateData(
            "AB-Flat needs at least one individual in both lists (x11 ≥ 1)".into(),
        ));
    }
    if let NPrior::Poisson {
        lambda: LambdaSource::NourEstimate,
    } = n_prior
    {
        if phi_policy.knowledge != PhiKnowledge::GreaterThanOne || phi_policy.range.is_some() {
            return Err(Error::Config(
                "the Nour prior mean is only available with φ knowledge gt1".into(),
            ));
        }
    }
    if cfg.p_update == PUpdate::Lloyd && data.x01 == 0 {
        return Err(Error::Config("the Lloyd p-update needs x01 ≥ 1".into()));
    }
    let (alpha, beta) = resolve_phi_prior(phi_policy, data)?;
    let cond = NConditional::resolve(n_prior, data)?;
    let c = data.c_hat()?;
    let shapes = IncompleteBeta::new(data.x11 as f64 + 1.0, data.x10 as f64 + 1.0)?;
    let x0 = data.x0();
    let x1 = data.x1dot();
    let x01 = data.x01 as f64;

    let feasible = |p: f64| p > 0.0 && p < 1.0 && alpha * p < 1.0;

    run_chains(cfg, |j, rng: &mut RngStream| {
        let mut trace = ChainTrace::with_capacity(j, cfg.burn_in, alpha);
        let spread = 4.0 * j as f64 / cfg.chains as f64;
        let mut n = ((x0 as f64) * (1.0 + spread)).round() as u64;
        let mut phi = rng.uniform_in(alpha, beta);
        let mut p = c / phi;
        if !feasible(p) {
            phi = 0.5 * (alpha + beta);
            p = c / phi;
        }
        let mut p1 = sample_beta(x1 as f64 + 1.0, (n - x1) as f64 + 1.0, rng)?;

        for it in 0..cfg.iterations() {
            let fail = |reason: String| chain_failure(j, it, reason);
            let mut attempts = 0;
            let hi = loop {
                let hi = beta.min(1.0 / p);
                let dist = TruncatedScaledBeta::with_beta(shapes, p, alpha, hi)
                    .map_err(|e| fail(e.to_string()))?;
                let phi_new = dist.sample(rng).map_err(|e| fail(e.to_string()))?;
                let n_new = cond
                    .draw(x0, p1, c / phi_new, rng)
                    .map_err(|e| fail(e.to_string()))?;
                let p_new = match cfg.p_update {
                    PUpdate::COverPhi => c / phi_new,
                    PUpdate::Lloyd if n_new > x1 => x01 / (n_new - x1) as f64,
                    PUpdate::Lloyd => f64::INFINITY,
                };
                if feasible(p_new) {
                    phi = phi_new;
                    n = n_new;
                    p = p_new;
                    break hi;
                }
                attempts += 1;
                trace.redraws += 1;
                if attempts > MAX_REDRAWS {
                    return Err(fail(format!(
                        "p stayed outside (0, min(1, 1/α)) after {MAX_REDRAWS} redraws"
                    )));
                }
            };
            p1 = sample_beta(x1 as f64 + 1.0, (n - x1) as f64 + 1.0, rng)
                .map_err(|e| fail(e.to_string()))?;
            trace.push(n, phi, p, p1, hi);
        }
        Ok(trace)
    })
}
