//! Standard Gaussian tail, density and inverse tail.

use libm::erfc;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Q(x) = P[N(0,1) > x]`.
pub fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Phi(x) = 1 - Q(x)`.
pub fn big_phi(x: f64) -> f64 {
    q(-x)
}

/// Inverse of `Q` on `(0,1)`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("Q^-1 argument {p} outside (0,1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-q_inv_lower(1.0 - p));
    }
    Ok(q_inv_lower(p))
}

/// Root of `ln Q(t) = ln p` for `p < 1/2`, by Newton steps kept inside a
/// shrinking bracket.
fn q_inv_lower(p: f64) -> f64 {
    let target = p.ln();
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    // Initial guess from the leading tail asymptotics.
    let mut t = (-2.0 * target).sqrt().clamp(lo, hi);
    for _ in 0..200 {
        let qt = q(t);
        let g = qt.ln() - target;
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = g * qt / phi(t);
        let mut next = t + step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || hi - lo <= 1e-15 {
            return next;
        }
        t = next;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_values() {
        let cases = [
            (0.0, 0.5),
            (0.5, 0.308_537_538_725_986_9),
            (1.0, 0.158_655_253_931_457_05),
            (2.0, 0.022_750_131_948_179_207),
            (3.0, 0.001_349_898_031_630_094_5),
            (-1.5, 0.933_192_798_731_141_9),
        ];
        for (x, want) in cases {
            assert!((q(x) - want).abs() < 1e-15, "Q({x})");
        }
        assert!((q(5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-12);
        assert!((q(8.0) / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-12);
        assert!((phi(1.0) - 0.241_970_724_519_143_35).abs() < 1e-16);
    }

    #[test]
    fn inverse_values() {
        let cases = [
            (0.1, 1.281_551_565_544_600_4),
            (0.25, 0.674_489_750_196_081_7),
            (0.4, 0.253_347_103_135_799_74),
            (0.01, 2.326_347_874_040_841),
            (1e-6, 4.753_424_308_822_899),
            (0.9, -1.281_551_565_544_600_6),
            (0.5, 0.0),
        ];
        for (p, want) in cases {
            assert!((q_inv(p).unwrap() - want).abs() < 1e-12, "Q^-1({p})");
        }
        assert!((q_inv(0.5 - 1e-9).unwrap() - 2.506_628_342_884_532_7e-9).abs() < 1e-12);
        assert!(q_inv(0.0).is_err() && q_inv(1.0).is_err() && q_inv(f64::NAN).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let t = q_inv(p).unwrap();
            assert!((q(t) - p).abs() < 1e-14);
        }
        let t = q_inv(1e-300).unwrap();
        assert!((q(t) / 1e-300 - 1.0).abs() < 1e-10);
    }
}
