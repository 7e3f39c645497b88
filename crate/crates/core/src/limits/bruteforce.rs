//! Direct enumeration of `X^n`: rank every string, read off its codeword
//! length. Serves as the oracle for the type-class sweep.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{k_max, LawEntry, LengthLaw};
use crate::code::{rank_length, StringSpace};
use crate::error::{Error, Result};
use crate::model::{CondIidModel, MarkovPairModel, SideInfoString};
use crate::prob::log2_biguint;

/// Largest `|X|^n` enumerated explicitly.
pub const BRUTEFORCE_MAX_STRINGS: u64 = 1 << 20;

/// Largest `(|X||Y|)^n` enumerated for Markov pairs.
const MARKOV_MAX_PAIRS: u64 = 1 << 22;

/// Length law by explicit ranking, classes merged on exact probability.
pub fn length_law_bruteforce(model: &CondIidModel, y: &SideInfoString) -> Result<LengthLaw> {
    let space = StringSpace::new(model, y, BRUTEFORCE_MAX_STRINGS)?;
    let scale = log2_biguint(space.denominator());
    let mut entries: Vec<LawEntry> = Vec::new();
    for idx in space.ranked_order() {
        let num = space.numerator(idx);
        match entries.last_mut() {
            Some(last) if last.numerator.as_ref() == Some(num) => last.count += 1u32,
            _ => entries.push(LawEntry {
                log2_prob: if num.is_zero() { f64::NEG_INFINITY } else { log2_biguint(num) - scale },
                count: BigUint::one(),
                numerator: Some(num.clone()),
            }),
        }
    }
    Ok(LengthLaw::explicit(
        y.len(),
        model.x_size(),
        Some(space.denominator().clone()),
        entries,
    ))
}

/// Exact `eps*(n,k|y)` for `k = 0..=k_max`, summing the probabilities of
/// strings whose optimal codeword has at least `k` bits.
pub fn epsilon_star_bruteforce(model: &CondIidModel, y: &SideInfoString) -> Result<Vec<BigRational>> {
    let space = StringSpace::new(model, y, BRUTEFORCE_MAX_STRINGS)?;
    let kmax = k_max(y.len(), model.x_size());
    let mut by_length = vec![BigUint::zero(); kmax + 1];
    for (pos, idx) in space.ranked_order().into_iter().enumerate() {
        by_length[rank_length(pos as u64 + 1)] += space.numerator(idx);
    }
    let den: BigInt = space.denominator().clone().into();
    let mut out = vec![BigRational::zero(); kmax + 1];
    let mut acc = BigUint::zero();
    for k in (0..=kmax).rev() {
        acc += &by_length[k];
        out[k] = BigRational::new(acc.clone().into(), den.clone());
    }
    Ok(out)
}

/// Exact `eps*(n,k)` averaged over side strings by brute force. Every side
/// string is enumerated when `|Y|^n <= y_budget`; otherwise one
/// representative per side composition is weighted by its multiplicity.
pub fn epsilon_star_pair_bruteforce(
    model: &CondIidModel,
    n: usize,
    y_budget: u64,
) -> Result<Vec<BigRational>> {
    let p_y = model.require_p_y()?;
    let ys = model.y_size();
    let kmax = k_max(n, model.x_size());
    let mut out = vec![BigRational::zero(); kmax + 1];
    let mut add = |symbols: Vec<usize>, multiplicity: BigUint| -> Result<()> {
        let mut w = BigRational::from_integer(multiplicity.into());
        for &a in &symbols {
            w *= p_y[a].exact();
        }
        if w.is_zero() {
            return Ok(());
        }
        let y = SideInfoString::new(symbols, model.y_alphabet())?;
        for (o, e) in out.iter_mut().zip(epsilon_star_bruteforce(model, &y)?) {
            *o += e * &w;
        }
        Ok(())
    };
    let full = (ys as u64).checked_pow(n as u32).filter(|&t| t <= y_budget);
    match full {
        Some(total) => {
            for mut idx in 0..total {
                let mut symbols = vec![0; n];
                for slot in symbols.iter_mut().rev() {
                    *slot = (idx % ys as u64) as usize;
                    idx /= ys as u64;
                }
                add(symbols, BigUint::one())?;
            }
        }
        None => {
            for c in super::typeclass::compositions(n, ys) {
                let symbols: Vec<usize> =
                    c.iter().enumerate().flat_map(|(a, &m)| std::iter::repeat_n(a, m)).collect();
                add(symbols, super::typeclass::multinomial(&c))?;
            }
        }
    }
    Ok(out)
}

/// Pair-scope `eps*(n,k)` for a Markov pair source by enumerating every
/// `(x^n, y^n)`, in double precision.
pub fn markov_epsilon_profile_bruteforce(model: &MarkovPairModel, n: usize) -> Result<Vec<f64>> {
    let m = model.pair_size() as u64;
    let d = model.order();
    let span = n.max(d);
    m.checked_pow(span as u32)
        .filter(|&t| t <= MARKOV_MAX_PAIRS)
        .ok_or_else(|| {
            Error::TooLarge(format!("(|X||Y|)^{span} pair sequences exceed the enumeration limit"))
        })?;
    // Laws of pair sequences, index = mixed radix with the oldest pair first.
    let mut probs = model.initial_law()?;
    for _ in d..n {
        let mut next = Vec::with_capacity(probs.len() * m as usize);
        for (idx, &p) in probs.iter().enumerate() {
            let context = idx % model.context_count();
            for s in 0..m as usize {
                next.push(p * model.transition(context, s).value());
            }
        }
        probs = next;
    }
    if n < d {
        let chunk = (m as usize).pow((d - n) as u32);
        probs = probs.chunks(chunk).map(|c| c.iter().sum()).collect();
    }
    let ys = model.y_size();
    let y_count = ys.pow(n as u32);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); y_count];
    for (mut idx, &p) in probs.iter().enumerate() {
        let mut y_idx = 0;
        let mut place = 1;
        for _ in 0..n {
            let s = idx % m as usize;
            idx /= m as usize;
            y_idx += (s % ys) * place;
            place *= ys;
        }
        groups[y_idx].push(p);
    }
    let kmax = k_max(n, model.x_size());
    let mut by_length = vec![0.0; kmax + 1];
    for mut g in groups {
        g.sort_by(|a, b| b.total_cmp(a));
        for (pos, p) in g.into_iter().enumerate() {
            by_length[rank_length(pos as u64 + 1)] += p;
        }
    }
    let mut out = vec![0.0; kmax + 1];
    let mut acc = 0.0;
    for k in (0..=kmax).rev() {
        acc += by_length[k];
        out[k] = acc;
    }
    out[0] = 1.0;
    Ok(out)
}
