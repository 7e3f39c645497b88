//! Distribution-level converse:
//! `P[l(f*) >= k] >= sup_tau { P[-log2 P(X|Y) >= k + tau] - 2^-tau }`,
//! checked on explicit enumerations.

use serde::Serialize;

use super::bruteforce::epsilon_star_bruteforce;
use super::BRUTEFORCE_MAX_STRINGS;
use crate::code::StringSpace;
use crate::error::{Error, Result};
use crate::model::{CondIidModel, SideInfoString};
use crate::prob::rational_to_f64;

/// Side strings enumerated in the pair scope.
const PAIR_Y_BUDGET: u64 = 1 << 12;

/// Slack allowed when comparing the two sides.
const SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum ConverseScope {
    Reference(SideInfoString),
    Pair(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct ConversePoint {
    pub tau: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConverseReport {
    pub k: usize,
    pub lhs: f64,
    pub points: Vec<ConversePoint>,
    /// Largest right-hand side over the grid.
    pub best_rhs: f64,
    pub holds: bool,
}

/// `(information, mass)` pairs over the scope, with the excess-rate profile.
fn enumerate(model: &CondIidModel, scope: &ConverseScope) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let mut cells = Vec::new();
    let mut profile: Vec<f64> = Vec::new();
    let mut visit = |y: &SideInfoString, weight: f64| -> Result<()> {
        let space = StringSpace::new(model, y, BRUTEFORCE_MAX_STRINGS)?;
        for i in 0..space.len() {
            let p = space.prob(i);
            if p > 0.0 {
                cells.push((-p.log2(), p * weight));
            }
        }
        let eps = epsilon_star_bruteforce(model, y)?;
        if profile.is_empty() {
            profile = vec![0.0; eps.len()];
        }
        for (o, e) in profile.iter_mut().zip(&eps) {
            *o += weight * rational_to_f64(e);
        }
        Ok(())
    };
    match scope {
        ConverseScope::Reference(y) => visit(y, 1.0)?,
        ConverseScope::Pair(n) => {
            let p_y: Vec<f64> = model.require_p_y()?.iter().map(|p| p.value()).collect();
            let ys = model.y_size() as u64;
            let total = ys
                .checked_pow(*n as u32)
                .filter(|&t| t <= PAIR_Y_BUDGET)
                .ok_or_else(|| Error::TooLarge(format!("|Y|^{n} side strings exceed the enumeration limit")))?;
            for mut idx in 0..total {
                let mut symbols = vec![0; *n];
                for slot in symbols.iter_mut().rev() {
                    *slot = (idx % ys) as usize;
                    idx /= ys;
                }
                let w: f64 = symbols.iter().map(|&a| p_y[a]).product();
                if w > 0.0 {
                    visit(&SideInfoString::new(symbols, model.y_alphabet())?, w)?;
                }
            }
        }
    }
    Ok((cells, profile))
}

/// Checks the converse at threshold `k` for every `tau` in the grid.
pub fn check_general_converse(
    model: &CondIidModel,
    scope: &ConverseScope,
    k: usize,
    tau_grid: &[f64],
) -> Result<ConverseReport> {
    if let Some(t) = tau_grid.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("tau must be positive, got {t}")));
    }
    let (cells, profile) = enumerate(model, scope)?;
    let lhs = profile.get(k).copied().unwrap_or(0.0);
    let mut points = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let t = k as f64 + tau;
        let tail: f64 = cells
            .iter()
            .filter(|(info, _)| *info >= t - 1e-12 * t.max(1.0))
            .map(|(_, m)| m)
            .sum();
        let rhs = tail - (-tau).exp2();
        points.push(ConversePoint { tau, rhs, holds: rhs <= lhs + SLACK });
    }
    let best_rhs = points.iter().map(|p| p.rhs).fold(f64::NEG_INFINITY, f64::max);
    let holds = points.iter().all(|p| p.holds);
    Ok(ConverseReport { k, lhs, points, best_rhs, holds })
}
