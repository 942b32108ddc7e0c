use crate::error::{Error, Result};

/// Smallest reported tail probability; smaller values are clamped and flagged.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSqTail {
    /// `max(Q, P_FLOOR)`.
    pub p: f64,
    /// Natural log of the unclamped tail probability.
    pub ln_p: f64,
    pub clamped: bool,
}

/// Upper tail `P(X > x)` of the chi-square distribution with `dof` degrees of freedom.
pub fn chisq_sf(x: f64, dof: u32) -> Result<ChiSqTail> {
    let ln_p = ln_chisq_sf(x, dof)?;
    let raw = ln_p.exp();
    Ok(if raw < P_FLOOR {
        ChiSqTail {
            p: P_FLOOR,
            ln_p,
            clamped: true,
        }
    } else {
        ChiSqTail {
            p: raw.min(1.0),
            ln_p,
            clamped: false,
        }
    })
}

/// `ln Q(dof/2, x/2)`, finite for every finite `x`.
pub fn ln_chisq_sf(x: f64, dof: u32) -> Result<f64> {
    if dof == 0 {
        return Err(Error::precondition("chi-square needs dof >= 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::precondition(format!(
            "chi-square argument {x} is negative"
        )));
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ln_gamma_q(0.5 * dof as f64, 0.5 * x))
}

/// Log of the regularized upper incomplete gamma function `Q(a, x)`.
fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        let p = gamma_p_series(a, x);
        (-p).ln_1p()
    } else {
        ln_gamma_q_fraction(a, x)
    }
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// Regularized lower incomplete gamma by its power series.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a) + sum.ln()).exp()
}

/// `ln Q(a, x)` by the modified Lentz continued fraction.
fn ln_gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    a * x.ln() - x - ln_gamma(a) + h.ln()
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` for `z > 0` (Lanczos, g = 7).
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut sum = LANCZOS[0];
    for (k, coef) in LANCZOS.iter().enumerate().skip(1) {
        sum += coef / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}
