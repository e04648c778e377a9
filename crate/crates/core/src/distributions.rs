//! Seeded random streams and the variate generators used by the samplers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};

use crate::data::CellProbabilities;
use crate::error::{Error, Result};
use crate::special::IncompleteBeta;

/// Smallest truncation mass the inverse-CDF sampler accepts.
pub const MIN_TRUNCATED_MASS: f64 = 1e-300;

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sequences for each chain or replication under one seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finaliser, used to derive child seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    let dist = Beta::new(a, b).map_err(|e| Error::Domain(format!("Beta({a}, {b}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Generalized Beta type I with unit power, `φ^{a−1}(1 − rφ)^{b−1}` on
/// `(0, 1/r)`, truncated to `[lo, hi]`.
///
/// With `Y = rφ` the law is Beta(a, b) truncated to `[r·lo, r·hi]`, so draws
/// are exact inverse-CDF samples. The tail the interval sits in decides
/// whether the lower or the upper regularized function is inverted, so an
/// interval deep in either tail keeps full precision.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedScaledBeta {
    beta: IncompleteBeta,
    rate: f64,
    lo: f64,
    hi: f64,
}

impl TruncatedScaledBeta {
    pub fn new(a: f64, b: f64, rate: f64, lo: f64, hi: f64) -> Result<Self> {
        let beta = IncompleteBeta::new(a, b)?;
        Self::with_beta(beta, rate, lo, hi)
    }

    /// Reuses precomputed shapes; the samplers build one of these per chain.
    pub fn with_beta(beta: IncompleteBeta, rate: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("rate must be positive, got {rate}")));
        }
        let support = 1.0 / rate;
        if !(lo >= 0.0 && lo < hi && hi <= support * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "truncation bounds must satisfy 0 ≤ lo < hi ≤ 1/rate = {support}, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            beta,
            rate,
            lo,
            hi: hi.min(support),
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Probability mass of the untruncated law inside `[lo, hi]`.
    pub fn mass(&self) -> f64 {
        let (flo, slo) = self.beta.tails(self.rate * self.lo);
        let (fhi, shi) = self.beta.tails((self.rate * self.hi).min(1.0));
        if fhi <= 0.5 {
            fhi - flo
        } else if flo >= 0.5 {
            slo - shi
        } else {
            fhi - flo
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        let ylo = self.rate * self.lo;
        let yhi = (self.rate * self.hi).min(1.0);
        let (flo, slo) = self.beta.tails(ylo);
        let (fhi, shi) = self.beta.tails(yhi);
        let u = rng.uniform();
        let y = if fhi <= 0.5 {
            let mass = fhi - flo;
            self.check_mass(mass)?;
            self.beta.inverse_cdf(flo + u * mass)?
        } else if flo >= 0.5 {
            let mass = slo - shi;
            self.check_mass(mass)?;
            self.beta.inverse_sf(shi + u * mass)?
        } else {
            let mass = fhi - flo;
            self.check_mass(mass)?;
            let target = flo + u * mass;
            if target <= 0.5 {
                self.beta.inverse_cdf(target)?
            } else {
                self.beta.inverse_sf(1.0 - target)?
            }
        };
        Ok((y / self.rate).clamp(self.lo, self.hi))
    }

    fn check_mass(&self, mass: f64) -> Result<()> {
        if mass > MIN_TRUNCATED_MASS {
            Ok(())
        } else {
            Err(Error::Underflow {
                lo: self.lo,
                hi: self.hi,
                mass,
            })
        }
    }
}

pub fn sample_truncated_scaled_beta(d: &TruncatedScaledBeta, rng: &mut RngStream) -> Result<f64> {
    d.sample(rng)
}

pub fn sample_poisson(mean: f64, rng: &mut RngStream) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::Domain(format!(
            "Poisson mean must be finite and non-negative, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Domain(format!("Poisson({mean}): {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Number of failures before the `successes`-th success, each trial
/// succeeding with probability `success_prob`.
///
/// Drawn as a Gamma–Poisson mixture.
pub fn sample_negative_binomial(
    successes: u64,
    success_prob: f64,
    rng: &mut RngStream,
) -> Result<u64> {
    if successes == 0 {
        return Err(Error::Domain("negative binomial needs r ≥ 1".into()));
    }
    if success_prob == 0.0 {
        return Err(Error::Domain(
            "negative binomial with success probability 0 diverges".into(),
        ));
    }
    if !(success_prob > 0.0 && success_prob <= 1.0) {
        return Err(Error::Domain(format!(
            "success probability {success_prob} outside (0, 1]"
        )));
    }
    let q = 1.0 - success_prob;
    if q == 0.0 {
        return Ok(0);
    }
    let gamma = Gamma::new(successes as f64, q / success_prob)
        .map_err(|e| Error::Domain(format!("Gamma mixing law: {e}")))?;
    let rate = gamma.sample(rng);
    sample_poisson(rate, rng)
}

/// Multinomial draw over the four table cells, via sequential binomials.
pub fn sample_multinomial(n: u64, probs: &CellProbabilities, rng: &mut RngStream) -> [u64; 4] {
    let p = probs.as_array();
    let mut out = [0u64; 4];
    let mut remaining = n;
    let mut rest = 1.0;
    for i in 0..3 {
        if remaining == 0 {
            break;
        }
        let cond = if rest > 0.0 {
            (p[i] / rest).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond)
                .expect("conditional probability lies in (0, 1)")
                .sample(rng)
        };
        out[i] = k;
        remaining -= k;
        rest -= p[i];
    }
    out[3] = remaining;
    out
}
