//! Exact fundamental limits: the law of the optimal description length,
//! excess-rate probabilities `eps*(n,k)` and minimal rates `R*(n,eps)`, in
//! the reference-based, pair-based and prefix-free settings.
//!
//! Two representations of the length law share one evaluation path: an
//! explicit list of probability classes (brute force) and a factored
//! type-class law whose class counts are products of per-y-symbol
//! multinomials, evaluated lazily so blocklengths in the thousands fit in
//! memory.

mod bruteforce;
mod converse;
mod typeclass;

pub use bruteforce::{
    epsilon_star_bruteforce, epsilon_star_pair_bruteforce, length_law_bruteforce,
    markov_epsilon_profile_bruteforce, BRUTEFORCE_MAX_STRINGS,
};
pub use converse::{check_general_converse, ConverseReport, ConverseScope};
pub use typeclass::{
    epsilon_profile_pair, epsilon_profile_pair_exact, length_law_typeclass,
    length_law_typeclass_with, TypeClassOptions, DEFAULT_CLASS_CAP,
};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CondIidModel, SideInfoString};
use crate::prob::log2_biguint;

/// Relative tolerance for merging classes whose log-probabilities agree.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// One class of source strings sharing a conditional probability.
#[derive(Clone, Debug, PartialEq)]
pub struct LawEntry {
    pub log2_prob: f64,
    pub count: BigUint,
    /// Exact per-string probability as a numerator over the law's
    /// denominator (rational track only).
    pub numerator: Option<BigUint>,
}

/// Access to a probability-sorted list of classes.
pub(crate) trait ClassSource {
    fn class_count(&self) -> usize;
    fn log2_prob(&self, i: usize) -> f64;
    fn log2_count(&self, i: usize) -> f64;
    fn count(&self, i: usize) -> BigUint;
    fn numerator(&self, i: usize) -> Option<BigUint>;
}

#[derive(Clone, Debug)]
enum LawRepr {
    Explicit(Vec<LawEntry>),
    Factored(typeclass::FactoredLaw),
}

/// The law of `l(f*_n(X^n|y^n))`, represented by classes of equiprobable
/// strings sorted by nonincreasing probability.
#[derive(Clone, Debug)]
pub struct LengthLaw {
    n: usize,
    x_size: usize,
    /// Denominator of the exact numerators (`L^n`), when on the rational track.
    denominator: Option<BigUint>,
    repr: LawRepr,
}

impl ClassSource for LengthLaw {
    fn class_count(&self) -> usize {
        match &self.repr {
            LawRepr::Explicit(v) => v.len(),
            LawRepr::Factored(f) => f.class_count(),
        }
    }

    fn log2_prob(&self, i: usize) -> f64 {
        match &self.repr {
            LawRepr::Explicit(v) => v[i].log2_prob,
            LawRepr::Factored(f) => f.log2_prob(i),
        }
    }

    fn log2_count(&self, i: usize) -> f64 {
        match &self.repr {
            LawRepr::Explicit(v) => log2_biguint(&v[i].count),
            LawRepr::Factored(f) => f.log2_count(i),
        }
    }

    fn count(&self, i: usize) -> BigUint {
        match &self.repr {
            LawRepr::Explicit(v) => v[i].count.clone(),
            LawRepr::Factored(f) => f.count(i),
        }
    }

    fn numerator(&self, i: usize) -> Option<BigUint> {
        match &self.repr {
            LawRepr::Explicit(v) => v[i].numerator.clone(),
            LawRepr::Factored(f) => f.numerator(i),
        }
    }
}

impl LengthLaw {
    pub(crate) fn explicit(
        n: usize,
        x_size: usize,
        denominator: Option<BigUint>,
        entries: Vec<LawEntry>,
    ) -> Self {
        LengthLaw { n, x_size, denominator, repr: LawRepr::Explicit(entries) }
    }

    pub(crate) fn factored(
        n: usize,
        x_size: usize,
        denominator: Option<BigUint>,
        law: typeclass::FactoredLaw,
    ) -> Self {
        LengthLaw { n, x_size, denominator, repr: LawRepr::Factored(law) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn denominator(&self) -> Option<&BigUint> {
        self.denominator.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.denominator.is_some()
    }

    /// Number of (unmerged) classes.
    pub fn class_len(&self) -> usize {
        self.class_count()
    }

    /// `|X|^n`.
    pub fn total_strings(&self) -> BigUint {
        num_traits::pow(BigUint::from(self.x_size), self.n)
    }

    /// Classes in order, with equal-probability neighbours merged (exact
    /// equality on the rational track, relative `MERGE_TOLERANCE` otherwise).
    pub fn entries(&self) -> Vec<LawEntry> {
        let mut out: Vec<LawEntry> = Vec::new();
        for i in 0..self.class_count() {
            let entry = LawEntry {
                log2_prob: self.log2_prob(i),
                count: self.count(i),
                numerator: self.numerator(i),
            };
            if let Some(last) = out.last_mut() {
                let same = match (&last.numerator, &entry.numerator) {
                    (Some(a), Some(b)) => a == b,
                    _ => {
                        let (a, b) = (last.log2_prob, entry.log2_prob);
                        a == b || (a - b).abs() <= MERGE_TOLERANCE * a.abs().max(1.0)
                    }
                };
                if same {
                    last.count += entry.count;
                    continue;
                }
            }
            out.push(entry);
        }
        out
    }

    /// Sum of class masses (should be 1).
    pub fn total_mass(&self) -> f64 {
        (0..self.class_count())
            .map(|i| class_mass(self, i))
            .sum()
    }

    /// Largest `k` for which `eps*(n,k)` can be nonzero, plus one:
    /// `ceil(n log2 |X|) + 1`.
    pub fn k_max(&self) -> usize {
        k_max(self.n, self.x_size)
    }

    /// `eps*(n,k|y)` for `k = 0..=k_max` (double track).
    pub fn epsilon_profile(&self) -> Vec<f64> {
        let ks: Vec<usize> = (0..=self.k_max()).collect();
        tail_profile(self, &ks)
    }

    pub fn epsilon_star(&self, k: usize) -> f64 {
        tail_profile(self, &[k])[0]
    }

    /// Exact `eps*(n,k|y)` for `k = 0..=k_max` on the rational track.
    pub fn epsilon_profile_exact(&self) -> Option<Vec<BigRational>> {
        let ks: Vec<usize> = (0..=self.k_max()).collect();
        tail_profile_exact(self, &ks, self.denominator.as_ref()?)
    }

    pub fn epsilon_star_exact(&self, k: usize) -> Option<BigRational> {
        tail_profile_exact(self, &[k], self.denominator.as_ref()?).map(|v| v[0].clone())
    }

    /// `P[l(f*) = j]` for `j = 0..k_max`.
    pub fn length_distribution(&self) -> Vec<f64> {
        let eps = self.epsilon_profile();
        eps.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect()
    }

    /// `P[-log2 P(X|y) >= t]`.
    pub fn information_tail(&self, t: f64) -> f64 {
        (0..self.class_count())
            .filter(|&i| -self.log2_prob(i) >= t - 1e-12 * t.abs().max(1.0))
            .map(|i| class_mass(self, i))
            .sum()
    }
}

pub(crate) fn k_max(n: usize, x_size: usize) -> usize {
    (n as f64 * (x_size as f64).log2()).ceil() as usize + 1
}

fn class_mass<S: ClassSource + ?Sized>(src: &S, i: usize) -> f64 {
    let lp = src.log2_prob(i);
    if lp == f64::NEG_INFINITY {
        0.0
    } else {
        (src.log2_count(i) + lp).exp2()
    }
}

/// `P[rank >= 2^k]` for each `k` in ascending `ks`, walking the classes once
/// with an exact cumulative string count.
pub(crate) fn tail_profile<S: ClassSource + ?Sized>(src: &S, ks: &[usize]) -> Vec<f64> {
    debug_assert!(ks.windows(2).all(|w| w[0] <= w[1]));
    let len = src.class_count();
    let masses: Vec<f64> = (0..len).map(|i| class_mass(src, i)).collect();
    let mut suffix = vec![0.0; len + 1];
    for i in (0..len).rev() {
        suffix[i] = suffix[i + 1] + masses[i];
    }
    let mut out = vec![0.0; ks.len()];
    let mut next_k = 0;
    while next_k < ks.len() && ks[next_k] == 0 {
        out[next_k] = 1.0;
        next_k += 1;
    }
    let mut boundary = boundary_for(ks.get(next_k).copied());
    let mut cum = BigUint::zero();
    for i in 0..len {
        let Some(b) = boundary.as_ref() else { break };
        let count = src.count(i);
        let after = &cum + &count;
        if *b < after {
            let lp = src.log2_prob(i);
            let mut b_now = b.clone();
            loop {
                // Strings of class i ranked beyond the boundary.
                let beyond = &after - &b_now;
                let part = if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    (log2_biguint(&beyond) + lp).exp2()
                };
                out[next_k] = part + suffix[i + 1];
                next_k += 1;
                boundary = boundary_for(ks.get(next_k).copied());
                match boundary.as_ref() {
                    Some(nb) if *nb < after => b_now = nb.clone(),
                    _ => break,
                }
            }
        }
        cum = after;
    }
    // Boundaries beyond |X|^n leave an empty tail (already zero).
    out
}

/// Exact version of [`tail_profile`] over the common denominator.
pub(crate) fn tail_profile_exact<S: ClassSource + ?Sized>(
    src: &S,
    ks: &[usize],
    denominator: &BigUint,
) -> Option<Vec<BigRational>> {
    let len = src.class_count();
    let mut numerators = Vec::with_capacity(len);
    let mut counts = Vec::with_capacity(len);
    for i in 0..len {
        numerators.push(src.numerator(i)?);
        counts.push(src.count(i));
    }
    let mut suffix = vec![BigUint::zero(); len + 1];
    for i in (0..len).rev() {
        suffix[i] = &suffix[i + 1] + &counts[i] * &numerators[i];
    }
    let den: num_bigint::BigInt = denominator.clone().into();
    let ratio = |num: BigUint| BigRational::new(num.into(), den.clone());
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        if k == 0 {
            out.push(BigRational::one());
            continue;
        }
        let b = (BigUint::one() << k) - 1u32;
        let mut cum = BigUint::zero();
        let mut value = BigUint::zero();
        for i in 0..len {
            let after = &cum + &counts[i];
            if b < after {
                value = (&after - &b) * &numerators[i] + &suffix[i + 1];
                break;
            }
            cum = after;
        }
        out.push(ratio(value));
    }
    Some(out)
}

fn boundary_for(k: Option<usize>) -> Option<BigUint> {
    k.map(|k| (BigUint::one() << k) - 1u32)
}

/// `R*(n, eps) = k/n` with `eps*(n,k+1) <= eps < eps*(n,k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub epsilon: f64,
    pub k: usize,
    pub rate: f64,
}

/// Scans a nonincreasing profile `eps*(n, 0..)` for the rate at `epsilon`.
pub fn rate_from_profile(n: usize, profile: &[f64], epsilon: f64) -> Result<RatePoint> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0,1)")));
    }
    let k = (0..profile.len())
        .find(|&k| profile.get(k + 1).copied().unwrap_or(0.0) <= epsilon)
        .unwrap_or(profile.len());
    Ok(RatePoint { n, epsilon, k, rate: k as f64 / n as f64 })
}

/// Same scan over exact values.
pub fn rate_from_exact_profile(profile: &[BigRational], epsilon: &BigRational) -> usize {
    (0..profile.len())
        .find(|&k| profile.get(k + 1).is_none_or(|e| e <= epsilon))
        .unwrap_or(profile.len())
}

/// Which implementation computes a reference-based law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Bruteforce,
    Typeclass,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "bruteforce" => Ok(Method::Bruteforce),
            "typeclass" => Ok(Method::Typeclass),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

impl Method {
    /// Resolves `Auto` by the brute-force size limit.
    pub fn resolve(self, x_size: usize, n: usize) -> Method {
        match self {
            Method::Auto => {
                let fits = (x_size as u64)
                    .checked_pow(n as u32)
                    .is_some_and(|t| t <= BRUTEFORCE_MAX_STRINGS);
                if fits {
                    Method::Bruteforce
                } else {
                    Method::Typeclass
                }
            }
            m => m,
        }
    }
}

/// Length law of `f*` for one side-information string.
pub fn length_law(model: &CondIidModel, y: &SideInfoString, method: Method) -> Result<LengthLaw> {
    match method.resolve(model.x_size(), y.len()) {
        Method::Bruteforce => length_law_bruteforce(model, y),
        _ => length_law_typeclass(model, y),
    }
}

/// `eps*(n,k|y)`.
pub fn epsilon_star_ref(model: &CondIidModel, y: &SideInfoString, k: usize) -> Result<f64> {
    Ok(length_law_typeclass(model, y)?.epsilon_star(k))
}

/// `R*(n,eps|y)`.
pub fn rate_star_ref(model: &CondIidModel, y: &SideInfoString, epsilon: f64) -> Result<RatePoint> {
    let law = length_law_typeclass(model, y)?;
    rate_from_profile(y.len(), &law.epsilon_profile(), epsilon)
}

/// `eps*(n,k)` averaged over `Y^n ~ P_Y`.
pub fn epsilon_star_pair(model: &CondIidModel, n: usize, k: usize) -> Result<f64> {
    let profile = epsilon_profile_pair(model, n, &TypeClassOptions::default())?;
    Ok(profile.get(k).copied().unwrap_or(0.0))
}

/// `R*(n,eps)`.
pub fn rate_star_pair(model: &CondIidModel, n: usize, epsilon: f64) -> Result<RatePoint> {
    let profile = epsilon_profile_pair(model, n, &TypeClassOptions::default())?;
    rate_from_profile(n, &profile, epsilon)
}

/// Whether `k < n log2 |X|`, decided exactly as `2^k < |X|^n`.
pub fn below_support_bits(k: usize, n: usize, x_size: usize) -> bool {
    (BigUint::one() << k) < num_traits::pow(BigUint::from(x_size), n)
}

/// Prefix-free excess-rate probability from a one-to-one profile:
/// `eps*_p(n,k) = eps*(n,k-1)` when `k-1 < n log2|X|`, else 0.
pub fn epsilon_star_prefix_from(profile: &[f64], n: usize, x_size: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("prefix threshold k must be >= 1".into()));
    }
    if below_support_bits(k - 1, n, x_size) {
        Ok(profile.get(k - 1).copied().unwrap_or(0.0))
    } else {
        Ok(0.0)
    }
}

/// Scope of an excess-rate computation.
#[derive(Clone, Debug)]
pub enum Scope {
    Reference(SideInfoString),
    Pair(usize),
}

/// `eps*_p(n,k|y)` or `eps*_p(n,k)`.
pub fn epsilon_star_prefix(model: &CondIidModel, scope: &Scope, k: usize) -> Result<f64> {
    let (n, profile) = match scope {
        Scope::Reference(y) => (y.len(), length_law_typeclass(model, y)?.epsilon_profile()),
        Scope::Pair(n) => (*n, epsilon_profile_pair(model, *n, &TypeClassOptions::default())?),
    };
    epsilon_star_prefix_from(&profile, n, model.x_size(), k)
}
