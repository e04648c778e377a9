//! Regularized incomplete beta function and its inverse.
//!
//! `I_x(a, b)` is evaluated with the Lentz continued fraction, switching to the
//! reflected expansion `1 − I_{1−x}(b, a)` above `(a + 1)/(a + b + 2)`. Both
//! tails are returned so that callers can work with whichever one is small
//! without cancellation.

use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-15;
const CF_MAX_ITER: usize = 100_000;
const FPMIN: f64 = 1e-300;
const SOLVE_MAX_ITER: usize = 400;

/// `I_x(a, b)` for fixed shapes, with `ln B(a, b)` cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncompleteBeta {
    a: f64,
    b: f64,
    ln_beta: f64,
}

impl IncompleteBeta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::Domain(format!(
                "beta shapes must be positive and finite, got a = {a}, b = {b}"
            )));
        }
        Ok(Self {
            a,
            b,
            ln_beta: ln_beta(a, b),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Returns `(I_x(a,b), 1 − I_x(a,b))`, each accurate in relative terms
    /// when it is the smaller of the two.
    pub fn tails(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (0.0, 1.0);
        }
        if x >= 1.0 {
            return (1.0, 0.0);
        }
        let (a, b) = (self.a, self.b);
        let ln_front = a * x.ln() + b * (-x).ln_1p() - self.ln_beta;
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            let lower = front * continued_fraction(a, b, x) / a;
            (lower, 1.0 - lower)
        } else {
            let upper = front * continued_fraction(b, a, 1.0 - x) / b;
            (1.0 - upper, upper)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.tails(x).0
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.tails(x).1
    }

    /// Log density of Beta(a, b) at `x ∈ (0, 1)`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - self.ln_beta
    }

    /// Smallest `x` with `I_x(a, b) = u`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        check_probability(u)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(1.0);
        }
        Ok(if u <= 0.5 {
            self.solve(u, Tail::Lower)
        } else {
            self.solve(1.0 - u, Tail::Upper)
        })
    }

    /// `x` with `1 − I_x(a, b) = v`; exact in the far upper tail.
    pub fn inverse_sf(&self, v: f64) -> Result<f64> {
        check_probability(v)?;
        if v == 0.0 {
            return Ok(1.0);
        }
        if v == 1.0 {
            return Ok(0.0);
        }
        Ok(if v <= 0.5 {
            self.solve(v, Tail::Upper)
        } else {
            self.solve(1.0 - v, Tail::Lower)
        })
    }

    /// Safeguarded Newton iteration on the log of the chosen tail. The
    /// lower tail is solved in `ln x` and the upper one in `ln(1 − x)`, which
    /// makes the step exact in the power-law regime near either endpoint.
    fn solve(&self, target: f64, tail: Tail) -> f64 {
        let ln_target = target.ln();
        let guess_p = match tail {
            Tail::Lower => target,
            Tail::Upper => 1.0 - target,
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = self.initial_guess(guess_p);
        if !(x > 0.0 && x < 1.0) {
            x = 0.5;
        }
        for _ in 0..SOLVE_MAX_ITER {
            let (l, u) = self.tails(x);
            let f = match tail {
                Tail::Lower => l,
                Tail::Upper => u,
            };
            if f == target {
                return x;
            }
            let x_too_small = match tail {
                Tail::Lower => f < target,
                Tail::Upper => f > target,
            };
            if x_too_small {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = f64::NAN;
            if f > 0.0 {
                let h = f.ln() - ln_target;
                let pdf = self.ln_pdf(x).exp();
                match tail {
                    Tail::Lower => {
                        // d ln F / d ln x = x·pdf / F
                        let slope = x * pdf / f;
                        if slope > 0.0 {
                            next = x * (-h / slope).clamp(-700.0, 700.0).exp();
                        }
                    }
                    Tail::Upper => {
                        // d ln S / d ln(1 − x) = (1 − x)·pdf / S
                        let y = 1.0 - x;
                        let slope = y * pdf / f;
                        if slope > 0.0 {
                            next = 1.0 - y * (-h / slope).clamp(-700.0, 700.0).exp();
                        }
                    }
                }
            }
            if !(next > lo && next < hi) {
                next = if lo > 0.0 && hi < 1.0 && hi / lo > 4.0 && tail == Tail::Lower {
                    (lo * hi).sqrt()
                } else if lo > 0.0 && hi < 1.0 && (1.0 - lo) / (1.0 - hi) > 4.0 {
                    1.0 - ((1.0 - lo) * (1.0 - hi)).sqrt()
                } else {
                    0.5 * (lo + hi)
                };
            }
            let scale = match tail {
                Tail::Lower => next.min(x),
                Tail::Upper => (1.0 - next).min(1.0 - x),
            };
            if (next - x).abs() <= 4.0 * f64::EPSILON * scale || hi - lo <= f64::MIN_POSITIVE {
                return next;
            }
            x = next;
        }
        x
    }

    /// Starting point for the quantile search; a normal approximation for
    /// shapes ≥ 1 and a power-law tail approximation otherwise.
    fn initial_guess(&self, p: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if a >= 1.0 && b >= 1.0 {
            let pp = if p < 0.5 { p } else { 1.0 - p };
            let t = (-2.0 * pp.ln()).sqrt();
            let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
            if p < 0.5 {
                z = -z;
            }
            let al = (z * z - 3.0) / 6.0;
            let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
            let w = z * (al + h).sqrt() / h
                - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0))
                    * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
            a / (a + b * (2.0 * w).exp())
        } else {
            let lna = (a / (a + b)).ln();
            let lnb = (b / (a + b)).ln();
            let t = (a * lna).exp() / a;
            let u = (b * lnb).exp() / b;
            let w = t + u;
            if p < t / w {
                (a * w * p).powf(1.0 / a)
            } else {
                1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Lower,
    Upper,
}

fn check_probability(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {u} outside [0, 1]")))
    }
}

fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)`.
pub fn reg_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    Ok(IncompleteBeta::new(a, b)?.cdf(x))
}

/// `x` such that `I_x(a, b) = u`.
pub fn inverse_reg_incomplete_beta(u: f64, a: f64, b: f64) -> Result<f64> {
    IncompleteBeta::new(a, b)?.inverse_cdf(u)
}
