use crate::data::DrsData;
use crate::distributions::{sample_beta, RngStream, TruncatedScaledBeta};
use crate::error::{Error, Result};
use crate::special::IncompleteBeta;

use super::{
    chain_failure, run_chains, ChainConfig, ChainTrace, LambdaSource, NConditional, NPrior,
    MAX_REDRAWS,
};

/// GB-I prior shapes `(a, b) = (t·x11/x0, t·x10/x0)`.
pub fn ab_con_hyperparameters(data: &DrsData, t: f64) -> (f64, f64) {
    let x0 = data.x0() as f64;
    (t * data.x11 as f64 / x0, t * data.x10 as f64 / x0)
}

/// AB-Con: conjugate GB-I prior on φ with data-driven shapes and upper
/// bound `β = (N − x1.)/x01`.
///
/// Each iteration draws `p1.`, then φ on `[ĉ, β]` with β taken from the
/// current `N`, sets `p = ĉ/φ` and draws `N`. When `N − x1. ≤ x01·ĉ` the
/// φ interval is empty and `N` is redrawn first.
pub fn run_ab_con(data: &DrsData, n_prior: NPrior, cfg: &ChainConfig) -> Result<Vec<ChainTrace>> {
    if data.x11 == 0 || data.x10 == 0 || data.x01 == 0 {
        return Err(Error::DegenerateData(format!(
            "AB-Con needs x11, x10 and x01 all ≥ 1, got ({}, {}, {})",
            data.x11, data.x10, data.x01
        )));
    }
    if let NPrior::Poisson {
        lambda: LambdaSource::NourEstimate,
    } = n_prior
    {
        return Err(Error::Config(
            "the Nour prior mean is only available for AB-Flat with φ knowledge gt1".into(),
        ));
    }
    let cond = NConditional::resolve(n_prior, data)?;
    let c = data.c_hat()?;
    let (a, b) = ab_con_hyperparameters(data, cfg.t);
    let prior = IncompleteBeta::new(a, b)?;
    let posterior = if cfg.prior_only {
        prior
    } else {
        IncompleteBeta::new(data.x11 as f64 + a, data.x10 as f64 + b)?
    };
    let x0 = data.x0();
    let x1 = data.x1dot();
    let x01 = data.x01 as f64;

    run_chains(cfg, |j, rng: &mut RngStream| {
        let mut trace = ChainTrace::with_capacity(j, cfg.burn_in, c);
        let mut p1 = rng.uniform_in(f64::EPSILON, 1.0);
        let p0 = rng.uniform_in(c, 1.0).max(c + f64::EPSILON);
        let beta0 = 1.0 / p0;
        let phi0 = TruncatedScaledBeta::with_beta(prior, p0, c, beta0)
            .and_then(|d| d.sample(rng))
            .map_err(|e| chain_failure(j, 0, format!("initial φ: {e}")))?;
        let mut p = (c / phi0).min(p0);
        let mut n = cond.draw(x0, p1, p, rng)?;

        for it in 0..cfg.iterations() {
            let fail = |reason: String| chain_failure(j, it, reason);
            p1 = sample_beta(x1 as f64 + 1.0, (n - x1) as f64 + 1.0, rng)
                .map_err(|e| fail(e.to_string()))?;
            let mut attempts = 0;
            let (phi, beta) = loop {
                let beta = (n - x1) as f64 / x01;
                if beta > c {
                    let d = TruncatedScaledBeta::with_beta(posterior, 1.0 / beta, c, beta)
                        .map_err(|e| fail(e.to_string()))?;
                    let phi = d.sample(rng).map_err(|e| fail(e.to_string()))?;
                    if c / phi < 1.0 {
                        break (phi, beta);
                    }
                } else {
                    n = cond.draw(x0, p1, p, rng).map_err(|e| fail(e.to_string()))?;
                }
                attempts += 1;
                trace.redraws += 1;
                if attempts > MAX_REDRAWS {
                    return Err(fail(format!(
                        "φ interval [ĉ, (N − x1.)/x01] stayed empty after {MAX_REDRAWS} redraws"
                    )));
                }
            };
            p = c / phi;
            n = cond.draw(x0, p1, p, rng).map_err(|e| fail(e.to_string()))?;
            trace.push(n, phi, p, p1, beta);
        }
        Ok(trace)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(burn_in: usize, seed: u64) -> ChainConfig {
        ChainConfig {
            burn_in,
            chains: 3,
            seed,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn hyperparameters() {
        let data = DrsData::new(181, 69, 144).unwrap();
        let (a, b) = ab_con_hyperparameters(&data, 20.0);
        assert!((a - 20.0 * 181.0 / 394.0).abs() < 1e-12);
        assert!((b - 20.0 * 69.0 / 394.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prior_mean_ratio_is_c_hat(x11 in 1u64..3000, x10 in 1u64..3000, x01 in 0u64..3000, t in 0.1f64..1e4) {
            let data = DrsData::new(x11, x10, x01).unwrap();
            let (a, b) = ab_con_hyperparameters(&data, t);
            let c = data.c_hat().unwrap();
            prop_assert!((a / (a + b) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn traces_respect_bounds() {
        let data = DrsData::new(181, 69, 144).unwrap();
        let c = data.c_hat().unwrap();
        for prior in [
            NPrior::Jeffreys,
            NPrior::Poisson {
                lambda: LambdaSource::MbEstimate,
            },
        ] {
            let traces = run_ab_con(&data, prior, &cfg(300, 6)).unwrap();
            for t in &traces {
                assert_eq!(t.len(), 600);
                for i in 0..t.len() {
                    assert!(t.n[i] >= data.x0());
                    assert!(t.phi[i] >= c && t.phi[i] <= t.phi_upper[i]);
                    if i > 0 {
                        let beta = (t.n[i - 1] - data.x1dot()) as f64 / 144.0;
                        assert!(t.phi_upper[i] <= beta + 1e-12);
                    }
                    assert!(t.p[i] > 0.0 && t.p[i] < 1.0);
                    assert!(t.p1dot[i] > 0.0 && t.p1dot[i] < 1.0);
                }
            }
        }
    }

    #[test]
    fn reproducible() {
        let data = DrsData::new(60, 30, 40).unwrap();
        let a = run_ab_con(&data, NPrior::Jeffreys, &cfg(100, 8)).unwrap();
        let b = run_ab_con(&data, NPrior::Jeffreys, &cfg(100, 8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_cells_and_nour() {
        assert!(matches!(
            run_ab_con(
                &DrsData::new(10, 0, 5).unwrap(),
                NPrior::Jeffreys,
                &cfg(10, 1)
            ),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            run_ab_con(
                &DrsData::new(10, 5, 0).unwrap(),
                NPrior::Jeffreys,
                &cfg(10, 1)
            ),
            Err(Error::DegenerateData(_))
        ));
        let nour = NPrior::Poisson {
            lambda: LambdaSource::NourEstimate,
        };
        assert!(matches!(
            run_ab_con(&DrsData::new(10, 5, 5).unwrap(), nour, &cfg(10, 1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn large_t_prior_concentrates_at_half_of_beta() {
        // a/(a+b) = 1/2 for x11 = x10, so E[φ | β] = β/2.
        let data = DrsData::new(30, 30, 2).unwrap();
        let cfg = ChainConfig {
            t: 1e6,
            prior_only: true,
            ..cfg(2000, 17)
        };
        let traces = run_ab_con(&data, NPrior::Jeffreys, &cfg).unwrap();
        let ratios: Vec<f64> = traces
            .iter()
            .flat_map(|t| (t.burn_in..t.len()).map(move |i| t.phi[i] / t.phi_upper[i]))
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean φ/β = {mean}");
        let phis: Vec<f64> = traces
            .iter()
            .flat_map(|t| t.retained_phi().to_vec())
            .collect();
        let betas: Vec<f64> = traces
            .iter()
            .flat_map(|t| t.phi_upper[t.burn_in..].to_vec())
            .collect();
        let phi_mean = phis.iter().sum::<f64>() / phis.len() as f64;
        let half_beta = betas.iter().sum::<f64>() / betas.len() as f64 / 2.0;
        assert!((phi_mean / half_beta - 1.0).abs() < 0.01);
    }
}
