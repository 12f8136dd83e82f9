//! Special functions needed by the Ohmic closed forms.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Euler Gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Exponential integral `E1(x) = int_x^inf e^{-u}/u du` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    if x <= 1.0 {
        e1_series(x)
    } else {
        (-x).exp() * e1_scaled_cf(x)
    }
}

/// `e^x E1(x)`, free of overflow/underflow for large `x`.
pub fn e1_scaled(x: f64) -> f64 {
    if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        e1_scaled_cf(x)
    }
}

fn e1_series(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x / kf;
        let add = -term / kf;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

// Modified Lentz evaluation of the continued fraction for e^x E1(x).
fn e1_scaled_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Exponential integral `Ei(x)` (principal value) for `x > 0`.
///
/// Only used for the Ohmic Lamb-shift closed form.
pub fn ei(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 40.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..500 {
            let kf = k as f64;
            term *= x / kf;
            let add = term / kf;
            sum += add;
            if add < 1e-17 * sum {
                break;
            }
        }
        EULER_GAMMA + x.ln() + sum
    } else {
        // asymptotic series e^x/x sum k!/x^k
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..40 {
            let next = term * k as f64 / x;
            if next > term {
                break;
            }
            term = next;
            sum += term;
        }
        x.exp() / x * sum
    }
}

/// Principal branch of the Lambert W function on `x >= 0`.
///
/// Halley iteration from `ln(1 + x)`.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain {
            operation: "lambert_w",
            value: x,
            reason: "principal branch implemented for x >= 0 only",
        });
    }
    if x == 0.0 || x.is_infinite() {
        return Ok(x);
    }
    let mut w = x.ln_1p();
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::quadrature::{integrate_to_infinity, Tolerance};

    #[test]
    fn e1_matches_quadrature() {
        for &x in &[1e-6, 0.01, 0.3, 0.999, 1.0, 1.001, 2.5, 10.0, 40.0] {
            let q = integrate_to_infinity(|u| (-u).exp() / u, x, 1.0, Tolerance::new(1e-300, 1e-13))
                .unwrap();
            let v = e1(x);
            assert!(((v - q) / q).abs() < 1e-11, "x={x} e1={v} quad={q}");
        }
    }

    #[test]
    fn e1_reference_values() {
        // A&S table values
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-15);
        assert!((e1_scaled(100.0) - 0.990_194_228_673_301_8e-2).abs() < 1e-14);
    }

    #[test]
    fn ei_reference_values() {
        assert!((ei(1.0) - 1.895_117_816_355_936_8).abs() < 1e-14);
        assert!(((ei(50.0) - 1.058_563_689_713_169e20) / 1.058_563_689_713_169e20).abs() < 1e-10);
    }

    #[test]
    fn gamma_at_integers() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lambert_w_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w(-1e-3).is_err());
        for &x in &[1e-300, 1e-20, 4.5e-4, 0.3, 7.0, 1e3, 1e100, 1e300] {
            let w = lambert_w(x).unwrap();
            assert!(((w * w.exp() - x) / x).abs() < 1e-12, "x={x}");
        }
    }
}
