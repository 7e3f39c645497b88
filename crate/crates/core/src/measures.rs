//! Single-letter information quantities for conditionally-i.i.d. pairs, in
//! bits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CondIidModel, SideInfoString};

/// Weighted mean computed relative to the first value, so a constant
/// sequence returns that constant exactly.
fn shifted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let Some(&base) = values.first() else {
        return 0.0;
    };
    base + values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - base))
        .sum::<f64>()
}

fn central_moment(values: &[f64], weights: &[f64], center: f64, power: i32) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - center).abs().powi(power))
        .sum()
}

/// `-log2 P(x|y)` and `P(x|y)` over the support of row `y`.
fn row_information(model: &CondIidModel, y: usize) -> (Vec<f64>, Vec<f64>) {
    model
        .cond_row(y)
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| (-p.value().log2(), p.value()))
        .unzip()
}

/// Per-y entropy, varentropy and third absolute central moment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerYProfile {
    pub entropy: Vec<f64>,
    pub varentropy: Vec<f64>,
    pub third_moment: Vec<f64>,
}

pub fn per_y_profile(model: &CondIidModel) -> PerYProfile {
    let mut profile = PerYProfile {
        entropy: Vec::with_capacity(model.y_size()),
        varentropy: Vec::with_capacity(model.y_size()),
        third_moment: Vec::with_capacity(model.y_size()),
    };
    for y in 0..model.y_size() {
        let (info, w) = row_information(model, y);
        let h = shifted_mean(&info, &w);
        profile.entropy.push(h);
        profile.varentropy.push(central_moment(&info, &w, h, 2));
        profile.third_moment.push(central_moment(&info, &w, h, 3));
    }
    profile
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSet {
    /// H(X|Y)
    pub h_xy: f64,
    /// H(X)
    pub h_x: f64,
    /// Conditional varentropy VAR[-log P(X|Y)].
    pub sigma2: f64,
    /// E[V(Y)]
    pub ev: f64,
    /// VAR of the per-y entropy.
    pub var_hhat: f64,
    /// Largest per-y third absolute central moment.
    pub m3: f64,
    /// E|-log P(X|Y) - H(X|Y)|^3, centered at the global H(X|Y).
    pub mu3_pair: f64,
    /// VAR(V(Y))
    pub psi2: f64,
    /// Same as `ev`, under the name used by the pair-based constants.
    pub vbar: f64,
}

pub fn measures(model: &CondIidModel) -> Result<MeasureSet> {
    let p_y: Vec<f64> = model.require_p_y()?.iter().map(|p| p.value()).collect();
    let profile = per_y_profile(model);
    // Restrict to y with positive mass.
    let ys: Vec<usize> = (0..model.y_size()).filter(|&y| p_y[y] > 0.0).collect();
    let w_y: Vec<f64> = ys.iter().map(|&y| p_y[y]).collect();
    let pick = |v: &[f64]| ys.iter().map(|&y| v[y]).collect::<Vec<f64>>();
    let hs = pick(&profile.entropy);
    let vs = pick(&profile.varentropy);
    let h_xy = shifted_mean(&hs, &w_y);
    let ev = shifted_mean(&vs, &w_y);
    let var_hhat = central_moment(&hs, &w_y, h_xy, 2);
    let psi2 = central_moment(&vs, &w_y, ev, 2);

    let mut info = Vec::new();
    let mut joint = Vec::new();
    for &y in &ys {
        let (i, w) = row_information(model, y);
        info.extend(i);
        joint.extend(w.into_iter().map(|p| p * p_y[y]));
    }
    let sigma2 = central_moment(&info, &joint, h_xy, 2);
    let mu3_pair = central_moment(&info, &joint, h_xy, 3);

    let mut p_x = vec![0.0; model.x_size()];
    for &y in &ys {
        for (x, px) in p_x.iter_mut().enumerate() {
            *px += p_y[y] * model.cond(x, y).value();
        }
    }
    let (mx, wx): (Vec<f64>, Vec<f64>) = p_x
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| (-p.log2(), p))
        .unzip();
    let h_x = shifted_mean(&mx, &wx);

    Ok(MeasureSet {
        h_xy,
        h_x,
        sigma2,
        ev,
        var_hhat,
        m3: profile.third_moment.iter().copied().fold(0.0, f64::max),
        mu3_pair,
        psi2,
        vbar: ev,
    })
}

/// Per-string averages `H_n(X|y)` and `sigma_n^2(y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StringMeasures {
    pub h_n: f64,
    pub sigma2_n: f64,
    /// Set when `sigma2_n == 0`; the normal-approximation bounds need it positive.
    pub degenerate: bool,
}

pub fn h_n_sigma_n(model: &CondIidModel, y: &SideInfoString) -> StringMeasures {
    let profile = per_y_profile(model);
    let counts = y.composition(model.y_size());
    let n = y.len() as f64;
    let weight = |v: &[f64]| {
        counts
            .iter()
            .zip(v)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &x)| (x, c as f64 / n))
            .unzip::<f64, f64, Vec<f64>, Vec<f64>>()
    };
    let (h, w) = weight(&profile.entropy);
    let (v, wv) = weight(&profile.varentropy);
    let sigma2_n = shifted_mean(&v, &wv).max(0.0);
    StringMeasures {
        h_n: shifted_mean(&h, &w),
        sigma2_n,
        degenerate: sigma2_n == 0.0,
    }
}

/// `(m3, mu3_pair)`; the second needs `p_y`.
pub fn m3_and_mu3(model: &CondIidModel) -> (f64, Option<f64>) {
    let m3 = per_y_profile(model)
        .third_moment
        .into_iter()
        .fold(0.0, f64::max);
    (m3, measures(model).ok().map(|m| m.mu3_pair))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionGap {
    pub ev: f64,
    pub sigma2: f64,
    pub gap: f64,
}

/// Pair-based minus reference-based dispersion; equals VAR of the per-y
/// entropy.
pub fn dispersion_gap(model: &CondIidModel) -> Result<DispersionGap> {
    let m = measures(model)?;
    Ok(DispersionGap { ev: m.ev, sigma2: m.sigma2, gap: m.var_hhat })
}

/// `-log2 P(x_1^n | y_1^n)` for a conditionally-i.i.d. model.
pub fn cond_info_density(model: &CondIidModel, x: &[usize], y: &SideInfoString) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "source length {} differs from side-information length {}",
            x.len(),
            y.len()
        )));
    }
    let mut total = 0.0;
    for (&xi, &yi) in x.iter().zip(y.symbols()) {
        let p = model
            .cond_row(yi)
            .get(xi)
            .ok_or_else(|| Error::Domain(format!("symbol index {xi} outside the x alphabet")))?;
        if p.is_zero() {
            return Err(Error::Domain("zero-probability source string".into()));
        }
        total -= p.value().log2();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, SourceModel};
    use crate::prob::Prob;

    const FIG1: &str = r#"{"kind":"cond_iid","x_alphabet":["0","1"],"y_alphabet":["0","1"],
        "p_y":["2/3","1/3"],"p_x_given_y":[["0.9","0.1"],["0.4","0.6"]]}"#;

    fn fig1() -> CondIidModel {
        SourceModel::from_json_str(FIG1).unwrap().as_cond_iid().unwrap().clone()
    }

    fn rows(rows: &[&[&str]], p_y: Option<&[&str]>) -> CondIidModel {
        let ps = |r: &[&str]| r.iter().map(|s| s.parse::<Prob>().unwrap()).collect::<Vec<_>>();
        CondIidModel::new(
            Alphabet::numeric(rows[0].len()),
            Alphabet::numeric(rows.len()),
            p_y.map(ps),
            rows.iter().map(|r| ps(r)).collect(),
        )
        .unwrap()
    }

    // Expected values from 40-digit direct summation.
    #[test]
    fn fig1_profile() {
        let p = per_y_profile(&fig1());
        assert!((p.entropy[0] - 0.468_995_593_589_281_2).abs() < 1e-12);
        assert!((p.varentropy[0] - 0.904_358_206_329_214).abs() < 1e-12);
        assert!((p.third_moment[0] - 2.350_733_104_572_050_5).abs() < 1e-12);
        assert!((p.entropy[1] - 0.970_950_594_454_668_6).abs() < 1e-12);
    }

    #[test]
    fn fig1_measures() {
        let m = measures(&fig1()).unwrap();
        assert!((m.h_xy - 0.636).abs() < 1e-3);
        assert!((m.h_x - 0.837).abs() < 1e-3);
        assert!((m.h_xy - 0.636_313_927_211_077).abs() < 1e-12);
        assert!((m.h_x - 0.836_640_741_941_167_2).abs() < 1e-12);
        assert!((m.sigma2 - 0.686_270_810_598_087_7).abs() < 1e-12);
        assert!((m.ev - 0.630_279_961_066_138_5).abs() < 1e-12);
        assert!((m.var_hhat - 0.055_990_849_531_949_13).abs() < 1e-12);
        assert!((m.psi2 - 0.150_237_769_052_973).abs() < 1e-12);
        assert!((m.mu3_pair - 1.402_671_300_557_828).abs() < 1e-12);
        assert!((m.m3 - 2.350_733_104_572_050_5).abs() < 1e-12);
        assert!((m.sigma2 - (m.ev + m.var_hhat)).abs() < 1e-12);
    }

    #[test]
    fn periodic_string_measures() {
        let model = fig1();
        let y = SideInfoString::repeat(&[0, 0, 1], 30, model.y_alphabet()).unwrap();
        let s = h_n_sigma_n(&model, &y);
        assert!((s.h_n - 0.636_313_927_211_077).abs() < 1e-12);
        assert!((s.sigma2_n - 0.630_279_961_066_138_5).abs() < 1e-12);
        assert!(!s.degenerate);

        let ones = SideInfoString::repeat(&[1], 7, model.y_alphabet()).unwrap();
        let p = per_y_profile(&model);
        let s = h_n_sigma_n(&model, &ones);
        assert_eq!(s.h_n, p.entropy[1]);
        assert_eq!(s.sigma2_n, p.varentropy[1]);
    }

    #[test]
    fn uniform_rows_are_degenerate() {
        let m = rows(&[&["1/3", "1/3", "1/3"], &["1/3", "1/3", "1/3"]], Some(&["0.5", "0.5"]));
        let p = per_y_profile(&m);
        assert_eq!(p.varentropy, vec![0.0, 0.0]);
        let y = SideInfoString::parse("0101", m.y_alphabet()).unwrap();
        assert!(h_n_sigma_n(&m, &y).degenerate);
        let all = measures(&m).unwrap();
        assert_eq!(all.sigma2, 0.0);
        assert_eq!(all.m3, 0.0);
        assert_eq!(all.mu3_pair, 0.0);
    }

    #[test]
    fn deterministic_row_has_zero_entropy() {
        let m = rows(&[&["1", "0"], &["0.5", "0.5"]], Some(&["0.5", "0.5"]));
        let p = per_y_profile(&m);
        assert_eq!((p.entropy[0], p.varentropy[0]), (0.0, 0.0));
        // Supports of different sizes: E[V] = 0 but sigma2 > 0.
        let all = measures(&m).unwrap();
        assert_eq!(all.ev, 0.0);
        assert!(all.sigma2 > 0.0);
    }

    #[test]
    fn gap_vanishes_when_entropies_agree() {
        // Mirror-image rows have equal entropy.
        let m = rows(&[&["0.8", "0.2"], &["0.2", "0.8"]], Some(&["0.3", "0.7"]));
        assert!(dispersion_gap(&m).unwrap().gap.abs() < 1e-15);
        // X independent of Y.
        let m = rows(&[&["0.7", "0.3"], &["0.7", "0.3"]], Some(&["0.3", "0.7"]));
        let g = dispersion_gap(&m).unwrap();
        assert_eq!(g.gap, 0.0);
        assert!((measures(&m).unwrap().h_x - measures(&m).unwrap().h_xy).abs() < 1e-15);
        let g1 = dispersion_gap(&fig1()).unwrap();
        assert!((g1.gap - 0.055_990_849_531_949_13).abs() < 1e-12);
    }

    #[test]
    fn information_density_values() {
        let m = fig1();
        let y = SideInfoString::parse("01", m.y_alphabet()).unwrap();
        let d = cond_info_density(&m, &[0, 1], &y).unwrap();
        assert!((d + 0.54f64.log2()).abs() < 1e-12);
        let d = cond_info_density(&m, &[0, 0], &y).unwrap();
        assert!((d + 0.36f64.log2()).abs() < 1e-12);
        let y = SideInfoString::parse("0", m.y_alphabet()).unwrap();
        assert!((cond_info_density(&m, &[1], &y).unwrap() - 10f64.log2()).abs() < 1e-12);
        let det = rows(&[&["1", "0"], &["0", "1"]], None);
        let y = SideInfoString::parse("0110", det.y_alphabet()).unwrap();
        assert_eq!(cond_info_density(&det, &[0, 1, 1, 0], &y).unwrap(), 0.0);
        assert!(cond_info_density(&det, &[1, 1, 1, 0], &y).is_err());
    }
}
