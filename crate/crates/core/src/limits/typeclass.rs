//! Type-class evaluation of the length law.
//!
//! For a fixed `y^n` a source string's probability depends only on, for each
//! side symbol `a`, how many times each conditional value occurs at the
//! positions where `y_i = a`. Each side symbol contributes a factor table of
//! such compositions; classes are products of one entry per table.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use super::{k_max, tail_profile, tail_profile_exact, ClassSource, LengthLaw};
use crate::error::{Error, Result};
use crate::model::{CondIidModel, SideInfoString};
use crate::prob::log2_biguint;

/// Default limit on the number of product classes per side string.
pub const DEFAULT_CLASS_CAP: u128 = 100_000_000;

/// Blocklengths up to this use the exact rational track by default.
const EXACT_AUTO_MAX: usize = 64;

#[derive(Clone, Debug)]
pub struct TypeClassOptions {
    /// Exact rational numerators (`None` picks by blocklength).
    pub exact: Option<bool>,
    pub class_cap: u128,
}

impl Default for TypeClassOptions {
    fn default() -> Self {
        TypeClassOptions { exact: None, class_cap: DEFAULT_CLASS_CAP }
    }
}

impl TypeClassOptions {
    fn exact_for(&self, n: usize) -> bool {
        self.exact.unwrap_or(n <= EXACT_AUTO_MAX)
    }
}

#[derive(Clone, Debug)]
struct FactorEntry {
    log2_prob: f64,
    log2_count: f64,
    count: BigUint,
    numerator: Option<BigUint>,
}

/// Compositions of `m` positions sharing one side symbol.
#[derive(Clone, Debug)]
pub(crate) struct FactorTable {
    entries: Vec<FactorEntry>,
}

/// Groups of equal positive conditional values for one row:
/// `(log2 value, exact lattice numerator, multiplicity)`.
fn value_groups(model: &CondIidModel, a: usize) -> Vec<(f64, BigUint, usize)> {
    let lattice = model.lattice();
    let mut groups: Vec<(f64, BigUint, usize)> = Vec::new();
    for x in model.support(a) {
        let num = &lattice.numerators[a][x];
        match groups.iter_mut().find(|g| &g.1 == num) {
            Some(g) => g.2 += 1,
            None => groups.push((model.cond(x, a).value().log2(), num.clone(), 1)),
        }
    }
    groups
}

impl FactorTable {
    fn build(model: &CondIidModel, a: usize, m: usize, exact: bool) -> FactorTable {
        let groups = value_groups(model, a);
        let mut entries = Vec::new();
        let mut parts = vec![0usize; groups.len()];
        // Recursive enumeration with incremental binomials.
        fn walk(
            depth: usize,
            remaining: usize,
            multinomial: &BigUint,
            parts: &mut Vec<usize>,
            groups: &[(f64, BigUint, usize)],
            exact: bool,
            out: &mut Vec<FactorEntry>,
        ) {
            if depth + 1 == groups.len() {
                parts[depth] = remaining;
                let mut count = multinomial.clone();
                let mut log2_prob = 0.0;
                let mut numerator = exact.then(BigUint::one);
                for (g, &t) in groups.iter().zip(parts.iter()) {
                    if t == 0 {
                        continue;
                    }
                    if g.2 > 1 {
                        count *= num_traits::pow(BigUint::from(g.2), t);
                    }
                    log2_prob += t as f64 * g.0;
                    if let Some(num) = numerator.as_mut() {
                        *num *= num_traits::pow(g.1.clone(), t);
                    }
                }
                out.push(FactorEntry {
                    log2_prob,
                    log2_count: log2_biguint(&count),
                    count,
                    numerator,
                });
                return;
            }
            let mut binom = BigUint::one();
            for t in 0..=remaining {
                if t > 0 {
                    binom = binom * BigUint::from(remaining - t + 1) / BigUint::from(t);
                }
                parts[depth] = t;
                let next = multinomial * &binom;
                walk(depth + 1, remaining - t, &next, parts, groups, exact, out);
            }
        }
        if groups.is_empty() {
            // Rows always have positive mass; unreachable for valid models.
            return FactorTable { entries };
        }
        walk(0, m, &BigUint::one(), &mut parts, &groups, exact, &mut entries);
        FactorTable { entries }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}

type TableCache = HashMap<(usize, usize), Arc<FactorTable>>;

/// A lazily evaluated product of factor tables, in nonincreasing
/// probability order, followed by the zero-probability class if any.
#[derive(Clone, Debug)]
pub(crate) struct FactoredLaw {
    tables: Vec<Arc<FactorTable>>,
    /// Class ids (mixed radix over `tables`) in sorted order.
    order: Vec<u64>,
    log2_probs: Vec<f64>,
    numerators: Option<Vec<BigUint>>,
    zero_count: BigUint,
}

impl FactoredLaw {
    fn digits(&self, mut id: u64) -> impl Iterator<Item = (usize, &Arc<FactorTable>)> + '_ {
        self.tables.iter().map(move |t| {
            let len = t.len() as u64;
            let d = (id % len) as usize;
            id /= len;
            (d, t)
        })
    }

    fn positive_len(&self) -> usize {
        self.order.len()
    }
}

impl ClassSource for FactoredLaw {
    fn class_count(&self) -> usize {
        self.order.len() + usize::from(!self.zero_count.is_zero())
    }

    fn log2_prob(&self, i: usize) -> f64 {
        if i < self.positive_len() {
            self.log2_probs[i]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log2_count(&self, i: usize) -> f64 {
        if i < self.positive_len() {
            self.digits(self.order[i]).map(|(d, t)| t.entries[d].log2_count).sum()
        } else {
            log2_biguint(&self.zero_count)
        }
    }

    fn count(&self, i: usize) -> BigUint {
        if i < self.positive_len() {
            let mut it = self.digits(self.order[i]);
            let Some((d, t)) = it.next() else { return BigUint::one() };
            let mut count = t.entries[d].count.clone();
            for (d, t) in it {
                let c = &t.entries[d].count;
                if !c.is_one() {
                    count *= c;
                }
            }
            count
        } else {
            self.zero_count.clone()
        }
    }

    fn numerator(&self, i: usize) -> Option<BigUint> {
        if i < self.positive_len() {
            self.numerators.as_ref().map(|v| v[i].clone())
        } else {
            Some(BigUint::zero())
        }
    }
}

fn build_factored(
    model: &CondIidModel,
    composition: &[usize],
    exact: bool,
    cap: u128,
    cache: &mut TableCache,
) -> Result<FactoredLaw> {
    let mut tables = Vec::new();
    let mut classes: u128 = 1;
    let mut supported = BigUint::one();
    for (a, &m) in composition.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let table = cache
            .entry((a, m))
            .or_insert_with(|| Arc::new(FactorTable::build(model, a, m, exact)))
            .clone();
        classes = classes.saturating_mul(table.len() as u128);
        if classes > cap {
            let mut total: u128 = 1;
            for (b, &mb) in composition.iter().enumerate() {
                if mb > 0 {
                    let g = value_groups(model, b).len() as u128;
                    total = total.saturating_mul(binomial_u128(mb as u128 + g - 1, g - 1));
                }
            }
            return Err(Error::ClassCap { count: total, cap });
        }
        supported *= num_traits::pow(BigUint::from(model.support(a).len()), m);
        tables.push(table);
    }
    let n: usize = composition.iter().sum();
    let total = num_traits::pow(BigUint::from(model.x_size()), n);
    let zero_count = total - supported;
    let count = classes as usize;

    let mut order: Vec<u64> = (0..count as u64).collect();
    let log2_of = |mut id: u64| -> f64 {
        let mut s = 0.0;
        for t in &tables {
            let len = t.len() as u64;
            s += t.entries[(id % len) as usize].log2_prob;
            id /= len;
        }
        s
    };
    let (log2_probs, numerators) = if exact {
        let nums: Vec<BigUint> = order
            .iter()
            .map(|&id| {
                let mut id = id;
                let mut num = BigUint::one();
                for t in &tables {
                    let len = t.len() as u64;
                    num *= t.entries[(id % len) as usize].numerator.as_ref().expect("exact table");
                    id /= len;
                }
                num
            })
            .collect();
        order.sort_by(|&a, &b| nums[b as usize].cmp(&nums[a as usize]).then(a.cmp(&b)));
        let sorted_nums: Vec<BigUint> = order.iter().map(|&id| nums[id as usize].clone()).collect();
        (order.iter().map(|&id| log2_of(id)).collect::<Vec<_>>(), Some(sorted_nums))
    } else {
        let mut keyed: Vec<(f64, u64)> = order.iter().map(|&id| (log2_of(id), id)).collect();
        keyed.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        order = keyed.iter().map(|k| k.1).collect();
        (keyed.into_iter().map(|k| k.0).collect(), None)
    };
    Ok(FactoredLaw { tables, order, log2_probs, numerators, zero_count })
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Length law for one side string by type classes.
pub fn length_law_typeclass(model: &CondIidModel, y: &SideInfoString) -> Result<LengthLaw> {
    length_law_typeclass_with(model, y, &TypeClassOptions::default())
}

pub fn length_law_typeclass_with(
    model: &CondIidModel,
    y: &SideInfoString,
    options: &TypeClassOptions,
) -> Result<LengthLaw> {
    let n = y.len();
    let exact = options.exact_for(n);
    let composition = y.composition(model.y_size());
    let law = build_factored(model, &composition, exact, options.class_cap, &mut HashMap::new())?;
    let denominator = exact.then(|| num_traits::pow(model.lattice().denominator.clone(), n));
    Ok(LengthLaw::factored(n, model.x_size(), denominator, law))
}

/// Compositions of `n` into `parts` nonnegative parts, lexicographic.
pub(crate) fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; parts];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for t in (0..=left).rev() {
            cur[i] = t;
            rec(i + 1, left - t, cur, out);
        }
    }
    if parts == 0 {
        return out;
    }
    rec(0, n, &mut cur, &mut out);
    out
}

pub(crate) fn multinomial(parts: &[usize]) -> BigUint {
    let mut acc = BigUint::one();
    let mut total = 0usize;
    for &p in parts {
        for j in 1..=p {
            total += 1;
            acc = acc * BigUint::from(total) / BigUint::from(j);
        }
    }
    acc
}

/// Side compositions with positive probability under `P_Y`.
fn weighted_compositions(model: &CondIidModel, n: usize) -> Result<Vec<Vec<usize>>> {
    let p_y = model.require_p_y()?;
    Ok(compositions(n, model.y_size())
        .into_iter()
        .filter(|c| c.iter().zip(p_y).all(|(&m, p)| m == 0 || !p.is_zero()))
        .collect())
}

/// Builds per-composition tables up front so workers can share them.
fn prebuilt_cache(model: &CondIidModel, comps: &[Vec<usize>], exact: bool) -> TableCache {
    let mut keys: Vec<(usize, usize)> = comps
        .iter()
        .flat_map(|c| c.iter().enumerate().filter(|(_, &m)| m > 0).map(|(a, &m)| (a, m)))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_par_iter()
        .map(|(a, m)| ((a, m), Arc::new(FactorTable::build(model, a, m, exact))))
        .collect()
}

/// `eps*(n,k)` for `k = 0..=k_max`, averaging the per-side-string profiles
/// over side compositions.
pub fn epsilon_profile_pair(
    model: &CondIidModel,
    n: usize,
    options: &TypeClassOptions,
) -> Result<Vec<f64>> {
    let p_y = model.require_p_y()?;
    let comps = weighted_compositions(model, n)?;
    let cache = prebuilt_cache(model, &comps, false);
    let ks: Vec<usize> = (0..=k_max(n, model.x_size())).collect();
    let profiles: Vec<Result<Vec<f64>>> = comps
        .par_iter()
        .map(|c| {
            let mut local = cache.clone();
            let law = build_factored(model, c, false, options.class_cap, &mut local)?;
            let log_w = log2_biguint(&multinomial(c))
                + c.iter()
                    .zip(p_y)
                    .filter(|(&m, _)| m > 0)
                    .map(|(&m, p)| m as f64 * p.value().log2())
                    .sum::<f64>();
            let w = log_w.exp2();
            Ok(tail_profile(&law, &ks).into_iter().map(|e| e * w).collect())
        })
        .collect();
    let mut out = vec![0.0; ks.len()];
    for p in profiles {
        for (o, v) in out.iter_mut().zip(p?) {
            *o += v;
        }
    }
    out[0] = 1.0;
    for v in out.iter_mut() {
        *v = v.min(1.0);
    }
    Ok(out)
}

/// Exact rational `eps*(n,k)` for `k = 0..=k_max`.
pub fn epsilon_profile_pair_exact(model: &CondIidModel, n: usize) -> Result<Vec<BigRational>> {
    let p_y = model.require_p_y()?;
    let comps = weighted_compositions(model, n)?;
    let mut cache = prebuilt_cache(model, &comps, true);
    let ks: Vec<usize> = (0..=k_max(n, model.x_size())).collect();
    let den: BigUint = num_traits::pow(model.lattice().denominator.clone(), n);
    let mut out = vec![BigRational::zero(); ks.len()];
    for c in &comps {
        let law = build_factored(model, c, true, DEFAULT_CLASS_CAP, &mut cache)?;
        let profile = tail_profile_exact(&law, &ks, &den).expect("exact track");
        let mut w = BigRational::from_integer(BigInt::from(multinomial(c)));
        for (&m, p) in c.iter().zip(p_y) {
            for _ in 0..m {
                w *= p.exact();
            }
        }
        for (o, v) in out.iter_mut().zip(profile) {
            *o += v * &w;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_enumerate_all() {
        let c = compositions(3, 3);
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|v| v.iter().sum::<usize>() == 3));
        assert_eq!(compositions(0, 2), vec![vec![0, 0]]);
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[2, 1, 1]), BigUint::from(12u32));
        assert_eq!(multinomial(&[0, 5]), BigUint::one());
        assert_eq!(multinomial(&[10, 10]), BigUint::from(184_756u32));
    }
}
