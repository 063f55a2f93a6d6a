//! Special functions: the exponential inflation factor and the gamma function.

use crate::error::{DeconvError, Result, OVERFLOW_EXPONENT_LIMIT};

/// The exponent `1/(mu h^lambda)`, checked against the overflow guard.
pub fn zeta_exponent(h: f64, mu: f64, lambda: f64) -> Result<f64> {
    if !(h > 0.0 && mu > 0.0 && lambda > 0.0) || !h.is_finite() {
        return Err(DeconvError::Domain(format!(
            "zeta needs h > 0, mu > 0, lambda > 0 (got h = {h}, mu = {mu}, lambda = {lambda})"
        )));
    }
    let exponent = 1.0 / (mu * h.powf(lambda));
    if exponent > OVERFLOW_EXPONENT_LIMIT {
        return Err(DeconvError::OverflowGuard {
            exponent,
            limit: OVERFLOW_EXPONENT_LIMIT,
        });
    }
    Ok(exponent)
}

/// `zeta(h) = exp(1/(mu h^lambda))`.
pub fn zeta(h: f64, mu: f64, lambda: f64) -> Result<f64> {
    zeta_exponent(h, mu, lambda).map(f64::exp)
}

/// `ln zeta(h)`; same guard as [`zeta`].
pub fn ln_zeta(h: f64, mu: f64, lambda: f64) -> Result<f64> {
    zeta_exponent(h, mu, lambda)
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma_lanczos(x: f64) -> f64 {
    // valid for x >= 0.5
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DeconvError::Domain(format!("gamma needs x > 0, got {x}")));
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        Ok(pi.ln() - (pi * x).sin().ln() - ln_gamma_lanczos(1.0 - x))
    } else {
        Ok(ln_gamma_lanczos(x))
    }
}

/// Gamma function for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x > 0.0 && x.fract() == 0.0 && x <= 21.0 {
        // exact factorials where doubles can hold them
        return Ok((1..x as u64).map(|k| k as f64).product());
    }
    ln_gamma(x).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeta_reference_values() {
        assert!((zeta(0.5, 2.0, 2.0).unwrap() - 2f64.exp()).abs() < 1e-12);
        assert!((zeta(1.0, 1.0, 2.0).unwrap() - 1f64.exp()).abs() < 1e-12);
        let ln = ln_zeta(0.05, 2.0, 2.0).unwrap();
        assert!((ln - 200.0).abs() < 1e-9);
        let z = zeta(0.05, 2.0, 2.0).unwrap();
        assert!(((z.ln() - 200.0) / 200.0).abs() < 1e-14);
    }

    #[test]
    fn zeta_guard() {
        match zeta(0.01, 2.0, 2.0) {
            Err(DeconvError::OverflowGuard { exponent, .. }) => {
                assert!((exponent - 5000.0).abs() < 1e-6)
            }
            other => panic!("expected guard, got {other:?}"),
        }
        assert!(matches!(zeta(0.0, 2.0, 2.0), Err(DeconvError::Domain(_))));
        assert!(matches!(zeta(0.5, -1.0, 2.0), Err(DeconvError::Domain(_))));
    }

    #[test]
    fn gamma_reference_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_eq!(gamma_fn(4.0).unwrap(), 6.0);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma_fn(0.5).unwrap() / sqrt_pi - 1.0).abs() < 1e-12);
        // Gamma(1.5) = sqrt(pi)/2, Gamma(2.5) = 3 sqrt(pi)/4
        assert!((gamma_fn(1.5).unwrap() / (sqrt_pi / 2.0) - 1.0).abs() < 1e-12);
        assert!((gamma_fn(2.5).unwrap() / (0.75 * sqrt_pi) - 1.0).abs() < 1e-12);
        // Gamma(19.5) from the half-integer product formula
        let mut g = sqrt_pi;
        let mut k = 0.5;
        while k < 19.5 {
            g *= k;
            k += 1.0;
        }
        assert!((gamma_fn(19.5).unwrap() / g - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_domain() {
        assert!(matches!(gamma_fn(0.0), Err(DeconvError::Domain(_))));
        assert!(matches!(gamma_fn(-1.5), Err(DeconvError::Domain(_))));
        assert!(gamma_fn(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn gamma_recurrence(x in 0.5f64..10.0) {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zeta_decreasing_and_log_consistent(h in 0.06f64..2.0, dh in 1e-4f64..0.5) {
            let a = zeta(h, 2.0, 2.0).unwrap();
            let b = zeta(h + dh, 2.0, 2.0).unwrap();
            prop_assert!(b < a);
            let direct = (1.0 / 2.0 * h.powi(-2)).exp();
            prop_assert!((a / direct - 1.0).abs() < 1e-12);
        }
    }
}
