//! Normal-approximation bounds on the optimal rate, with their blocklength
//! thresholds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{phi, q_inv};
use crate::markov::MarkovAnalysis;
use crate::measures::{h_n_sigma_n, measures, per_y_profile};
use crate::model::{CondIidModel, SideInfoString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    RefConverse,
    RefAchiev,
    PairAchiev,
    PairConverse,
    MarkovAchiev,
    MarkovConverse,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::RefConverse => "ref_converse",
            BoundKind::RefAchiev => "ref_achiev",
            BoundKind::PairAchiev => "pair_achiev",
            BoundKind::PairConverse => "pair_converse",
            BoundKind::MarkovAchiev => "markov_achiev",
            BoundKind::MarkovConverse => "markov_converse",
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, BoundKind::RefAchiev | BoundKind::PairAchiev | BoundKind::MarkovAchiev)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub n: usize,
    pub epsilon: f64,
    /// Bits per symbol.
    pub value: f64,
    pub constants: BTreeMap<String, f64>,
    pub n_threshold: f64,
    pub valid: bool,
}

impl BoundReport {
    /// The bound for prefix-free codes: one extra bit in the achievability
    /// constant of the conditionally-i.i.d. bounds. Converses and the
    /// Markov bounds carry over unchanged.
    pub fn prefix_free(mut self) -> BoundReport {
        let key = match self.kind {
            BoundKind::RefAchiev => "zeta_n",
            BoundKind::PairAchiev => "C",
            _ => return self,
        };
        if let Some(c) = self.constants.get_mut(key) {
            *c += 1.0;
        }
        self.value += 1.0 / self.n as f64;
        self
    }
}

fn check_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0,1)")));
    }
    q_inv(epsilon)
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("blocklength must be positive".into()));
    }
    Ok(n as f64)
}

/// `H + (sigma/sqrt n) Q^-1(eps) - log2(n)/(2n)`.
pub fn normal_approximation(h: f64, sigma2: f64, n: usize, epsilon: f64) -> Result<f64> {
    let nf = check_n(n)?;
    let qi = check_epsilon(epsilon)?;
    Ok(h + (sigma2 / nf).sqrt() * qi - nf.log2() / (2.0 * nf))
}

fn string_inputs(model: &CondIidModel, y: &SideInfoString) -> Result<(f64, f64, f64)> {
    let s = h_n_sigma_n(model, y);
    if s.degenerate {
        return Err(Error::Degenerate("sigma_n^2(y) = 0".into()));
    }
    let m3 = per_y_profile(model).third_moment.into_iter().fold(0.0, f64::max);
    Ok((s.h_n, s.sigma2_n, m3))
}

fn constants(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Lower bound for the reference-based rate, `0 < eps < 1/2`.
pub fn ref_converse(model: &CondIidModel, y: &SideInfoString, epsilon: f64) -> Result<BoundReport> {
    let (h, s2, m3) = string_inputs(model, y)?;
    let n = y.len();
    let nf = check_n(n)?;
    let qi = check_epsilon(epsilon)?;
    let s = s2.sqrt();
    let ph = phi(qi);
    let eta = (s2 * s + 6.0 * m3) / (ph * s2);
    let n_threshold = (1.0 + 6.0 * m3 / (s2 * s)).powi(2) / (4.0 * (qi * ph).powi(2));
    let value = normal_approximation(h, s2, n, epsilon)? - eta / nf;
    Ok(BoundReport {
        kind: BoundKind::RefConverse,
        n,
        epsilon,
        value,
        constants: constants(&[("eta", eta), ("m3", m3), ("sigma2_n", s2), ("h_n", h)]),
        n_threshold,
        valid: epsilon < 0.5 && nf > n_threshold,
    })
}

/// `zeta_n`, or NaN when the shifted quantile leaves `(0,1)`.
fn zeta_n(m3: f64, s2: f64, nf: f64, epsilon: f64) -> Result<f64> {
    let s3 = s2 * s2.sqrt();
    let shift = 6.0 * m3 / (nf.sqrt() * s3);
    if epsilon - shift <= 0.0 {
        return Ok(f64::NAN);
    }
    // Phi^-1(Phi(Q^-1(eps)) + shift) = Q^-1(eps - shift).
    let t = q_inv(epsilon - shift)?;
    Ok(6.0 * m3 / (s3 * phi(t))
        + (std::f64::consts::LOG2_E / (2.0 * std::f64::consts::PI * s2).sqrt() + 12.0 * m3 / s3).log2())
}

/// Upper bound for the reference-based rate, `0 < eps <= 1/2`. When the
/// shifted quantile leaves `(0,1)` (only possible below the threshold) the
/// value is NaN.
pub fn ref_achievability(model: &CondIidModel, y: &SideInfoString, epsilon: f64) -> Result<BoundReport> {
    let (h, s2, m3) = string_inputs(model, y)?;
    let n = y.len();
    let nf = check_n(n)?;
    check_epsilon(epsilon)?;
    let zeta = zeta_n(m3, s2, nf, epsilon)?;
    let n_threshold = 36.0 * m3 * m3 / (epsilon * epsilon * s2 * s2 * s2);
    let value = normal_approximation(h, s2, n, epsilon)? + zeta / nf;
    Ok(BoundReport {
        kind: BoundKind::RefAchiev,
        n,
        epsilon,
        value,
        constants: constants(&[("zeta_n", zeta), ("m3", m3), ("sigma2_n", s2), ("h_n", h)]),
        n_threshold,
        valid: epsilon <= 0.5 && nf > n_threshold && value.is_finite(),
    })
}

/// Upper bound for the pair-based rate, `0 < eps <= 1/2`.
pub fn pair_achievability(model: &CondIidModel, n: usize, epsilon: f64) -> Result<BoundReport> {
    let m = measures(model)?;
    if m.sigma2 <= 0.0 {
        return Err(Error::Degenerate("sigma^2(X|Y) = 0".into()));
    }
    if m.vbar <= 0.0 {
        return Err(Error::Degenerate("E[V(Y)] = 0".into()));
    }
    let nf = check_n(n)?;
    let qi = check_epsilon(epsilon)?;
    let ph = phi(qi);
    let two_pi = 2.0 * std::f64::consts::PI;
    let b = m.mu3_pair / (m.sigma2 * ph);
    let c = (2.0 / m.vbar.sqrt() + 24.0 * m.m3 * two_pi.powf(1.5) / m.vbar.powf(1.5)).log2() + b;
    let bracket = b * b / (2.0 * (two_pi * std::f64::consts::E).sqrt() * m.sigma2)
        + m.psi2 / ((1.0 - 1.0 / two_pi).powi(2) * m.vbar * m.vbar);
    let n_threshold = 4.0 * m.sigma2 / (b * b * ph * ph) * bracket * bracket;
    let value = normal_approximation(m.h_xy, m.sigma2, n, epsilon)? + c / nf;
    Ok(BoundReport {
        kind: BoundKind::PairAchiev,
        n,
        epsilon,
        value,
        constants: constants(&[("B", b), ("C", c), ("vbar", m.vbar), ("psi2", m.psi2)]),
        n_threshold,
        valid: epsilon <= 0.5 && nf > n_threshold,
    })
}

/// Lower bound for the pair-based rate, `0 < eps < 1/2`.
pub fn pair_converse(model: &CondIidModel, n: usize, epsilon: f64) -> Result<BoundReport> {
    let m = measures(model)?;
    if m.sigma2 <= 0.0 {
        return Err(Error::Degenerate("sigma^2(X|Y) = 0".into()));
    }
    let nf = check_n(n)?;
    let qi = check_epsilon(epsilon)?;
    let ph = phi(qi);
    let s = m.sigma2.sqrt();
    let c_prime = (m.mu3_pair + 2.0 * m.sigma2 * s) / (2.0 * m.sigma2 * ph);
    let n_threshold = c_prime * c_prime / (4.0 * qi * qi * m.sigma2);
    let value = normal_approximation(m.h_xy, m.sigma2, n, epsilon)? - c_prime / nf;
    Ok(BoundReport {
        kind: BoundKind::PairConverse,
        n,
        epsilon,
        value,
        constants: constants(&[("C_prime", c_prime)]),
        n_threshold,
        valid: epsilon < 0.5 && nf > n_threshold,
    })
}

/// Markov-source bounds for a user-supplied Berry-Esseen constant `a`,
/// `0 < eps < 1/2`. Valid for `n >= N` (resp. `N'`).
pub fn markov_bounds(
    analysis: &MarkovAnalysis,
    n: usize,
    epsilon: f64,
    a: f64,
) -> Result<(BoundReport, BoundReport)> {
    if analysis.sigma2_rate <= 0.0 {
        return Err(Error::Degenerate("conditional varentropy rate is zero".into()));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("Berry-Esseen constant {a} must be positive")));
    }
    let nf = check_n(n)?;
    let qi = check_epsilon(epsilon)?;
    let ph = phi(qi);
    let s = analysis.sigma2_rate.sqrt();
    let h = analysis.h_rate;
    let c_m = 2.0 * a * s / ph;
    let c_m_prime = s * (a + 1.0) / ph;
    let big_n = 2.0 * a * a / (std::f64::consts::PI * std::f64::consts::E * ph.powi(4));
    let big_n_prime = ((a + 1.0) / (qi * ph)).powi(2);
    let in_range = epsilon < 0.5;
    let shared = [("A", a), ("C_m", c_m), ("C_m_prime", c_m_prime)];
    let achiev = BoundReport {
        kind: BoundKind::MarkovAchiev,
        n,
        epsilon,
        value: h + s / nf.sqrt() * qi + c_m / nf,
        constants: constants(&shared),
        n_threshold: big_n,
        valid: in_range && nf >= big_n,
    };
    let converse = BoundReport {
        kind: BoundKind::MarkovConverse,
        n,
        epsilon,
        value: h + s / nf.sqrt() * qi - nf.log2() / (2.0 * nf) - c_m_prime / nf,
        constants: constants(&shared),
        n_threshold: big_n_prime,
        valid: in_range && nf >= big_n_prime,
    };
    Ok((achiev, converse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, MarkovPairModel, SourceModel};
    use crate::prob::Prob;

    const FIG1: &str = r#"{"kind":"cond_iid","x_alphabet":["0","1"],"y_alphabet":["0","1"],
        "p_y":["2/3","1/3"],"p_x_given_y":[["0.9","0.1"],["0.4","0.6"]]}"#;

    fn fig1() -> CondIidModel {
        SourceModel::from_json_str(FIG1).unwrap().as_cond_iid().unwrap().clone()
    }

    fn periodic(m: &CondIidModel, n: usize) -> SideInfoString {
        SideInfoString::repeat(&[0, 0, 1], n, m.y_alphabet()).unwrap()
    }

    #[test]
    fn reference_thresholds() {
        let m = fig1();
        let r = ref_converse(&m, &periodic(&m, 4800), 0.1).unwrap();
        assert!((r.n_threshold - 4212.0).abs() < 2.0, "{}", r.n_threshold);
        assert!(r.valid);
        assert!(!ref_converse(&m, &periodic(&m, 4800), 0.6).unwrap().valid);
        let a = ref_achievability(&m, &periodic(&m, 6000), 0.4).unwrap();
        assert!((a.n_threshold - 4967.0).abs() < 3.0, "{}", a.n_threshold);
        assert!(a.valid && a.value.is_finite());
        let p = a.clone().prefix_free();
        assert!((p.value - a.value - 1.0 / 6000.0).abs() < 1e-15);
        assert!(ref_achievability(&m, &periodic(&m, 6000), 0.5).unwrap().valid);
    }

    #[test]
    fn zeta_decreases_with_sigma() {
        let mut last = f64::INFINITY;
        for s2 in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let z = zeta_n(1.0, s2, 1e6, 0.2).unwrap();
            assert!(z < last);
            last = z;
        }
        assert!(zeta_n(1.0, 0.5, 1.0, 0.2).unwrap().is_nan());
    }

    #[test]
    fn pair_constants() {
        let m = fig1();
        let a = pair_achievability(&m, 500, 0.1).unwrap();
        assert!((a.constants["B"] - 11.65).abs() < 0.01, "{:?}", a.constants);
        assert!((a.n_threshold - 393.0).abs() < 1.0, "{}", a.n_threshold);
        assert!(a.valid);
        let c = pair_converse(&m, 500, 0.1).unwrap();
        assert!((c.constants["C_prime"] - 10.54).abs() < 0.01);
        assert!((c.n_threshold - 25.0).abs() < 0.5, "{}", c.n_threshold);
        assert!(c.value < a.value);
        assert!(!pair_converse(&m, 500, 0.5).unwrap().valid);
        assert!(pair_converse(&m, 500, 0.499).unwrap().n_threshold > 1e5);
        let p = a.clone().prefix_free();
        assert!((p.constants["C"] - a.constants["C"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_models_are_rejected() {
        let half = vec![Prob::from_ratio(1, 2), Prob::from_ratio(1, 2)];
        let m = CondIidModel::new(
            Alphabet::numeric(2),
            Alphabet::numeric(2),
            Some(half.clone()),
            vec![half.clone(), half],
        )
        .unwrap();
        let y = SideInfoString::parse("0101", m.y_alphabet()).unwrap();
        assert!(matches!(ref_converse(&m, &y, 0.1), Err(Error::Degenerate(_))));
        assert!(matches!(pair_achievability(&m, 10, 0.1), Err(Error::Degenerate(_))));
        assert!(ref_converse(&fig1(), &y, 1.0).is_err());
    }

    #[test]
    fn markov_constants() {
        let chain = MarkovPairModel::from_cond_iid(&fig1()).unwrap();
        let an = crate::markov::markov_rates(&chain).unwrap();
        let (up, low) = markov_bounds(&an, 1000, 0.1, 1.0).unwrap();
        let ph = phi(q_inv(0.1).unwrap());
        let s = an.sigma2_rate.sqrt();
        assert!((up.constants["C_m"] - 2.0 * s / ph).abs() < 1e-12);
        let big_n = 2.0 / (std::f64::consts::PI * std::f64::consts::E * ph.powi(4));
        assert!((up.n_threshold - big_n).abs() < 1e-9);
        // Only the lower bound carries the log term.
        let base = an.h_rate + s / 1000f64.sqrt() * q_inv(0.1).unwrap();
        assert!((up.value - base - up.constants["C_m"] / 1000.0).abs() < 1e-12);
        let log_term = 1000f64.log2() / 2000.0;
        assert!((low.value - (base - log_term - low.constants["C_m_prime"] / 1000.0)).abs() < 1e-12);
    }
}
