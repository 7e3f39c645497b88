//! The optimal one-to-one compressor with side information, its prefix-free
//! counterpart, and the single-shot pointwise checks.

use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CondIidModel, SideInfoString};
use crate::prob::rational_to_f64;

/// Explicit codebooks are limited to `n log2 |X| <= 30`.
pub const MAX_EXPLICIT_BITS: f64 = 30.0;

/// A finite binary string, possibly empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Codeword {
    bits: Vec<bool>,
}

impl Codeword {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Codeword { bits }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text == "∅" {
            return Ok(Codeword::default());
        }
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidCodeword(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(Codeword::from_bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// ASCII rendering; the empty codeword is `""`.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn is_prefix_of(&self, other: &Codeword) -> bool {
        other.bits.starts_with(&self.bits)
    }

    fn concat(&self, tail: &Codeword) -> Codeword {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&tail.bits);
        Codeword { bits }
    }

    fn fixed_width(value: u64, width: usize) -> Codeword {
        Codeword {
            bits: (0..width).rev().map(|i| (value >> i) & 1 == 1).collect(),
        }
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            f.write_str("∅")
        } else {
            f.write_str(&self.to_bit_string())
        }
    }
}

/// The `m`-th string of `{0,1}*` in length-then-lexicographic order:
/// the binary expansion of `m` with its leading one removed.
pub fn codeword_for_rank(m: u64) -> Result<Codeword> {
    if m == 0 {
        return Err(Error::Domain("ranks start at 1".into()));
    }
    let width = 63 - m.leading_zeros() as usize;
    Ok(Codeword::fixed_width(m, width))
}

/// Inverse of [`codeword_for_rank`].
pub fn rank_for_codeword(word: &Codeword) -> Result<u64> {
    if word.len() > 62 {
        return Err(Error::InvalidCodeword("codeword longer than 62 bits".into()));
    }
    Ok(word.bits.iter().fold(1u64, |acc, &b| (acc << 1) | b as u64))
}

/// `floor(log2 m)` for `m >= 1`.
pub fn rank_length(m: u64) -> usize {
    63 - m.leading_zeros() as usize
}

/// Enumerates `X^n` for one side-information string, each source string
/// identified by its lexicographic index.
#[derive(Clone, Debug)]
pub struct StringSpace {
    x_size: usize,
    n: usize,
    /// Exact probabilities as numerators over `denominator`.
    numerators: Vec<BigUint>,
    denominator: BigUint,
    values: Vec<f64>,
}

impl StringSpace {
    pub fn new(model: &CondIidModel, y: &SideInfoString, max_strings: u64) -> Result<Self> {
        let x_size = model.x_size();
        let n = y.len();
        let total = (x_size as u64)
            .checked_pow(n as u32)
            .filter(|&t| t <= max_strings)
            .ok_or_else(|| {
                Error::TooLarge(format!(
                    "|X|^n = {x_size}^{n} strings exceeds the explicit enumeration limit"
                ))
            })?;
        let lattice = model.lattice();
        let denominator = num_traits::pow(lattice.denominator.clone(), n);
        // Numerators built digit by digit: index = sum x_i |X|^(n-i).
        let mut numerators = vec![BigUint::one()];
        for &yi in y.symbols() {
            let row = &lattice.numerators[yi];
            let mut next = Vec::with_capacity(numerators.len() * x_size);
            for prefix in &numerators {
                for num in row {
                    next.push(prefix * num);
                }
            }
            numerators = next;
        }
        debug_assert_eq!(numerators.len() as u64, total);
        let scale = crate::prob::log2_biguint(&denominator);
        let values = numerators
            .iter()
            .map(|num| {
                if num.is_zero() {
                    0.0
                } else {
                    (crate::prob::log2_biguint(num) - scale).exp2()
                }
            })
            .collect();
        Ok(StringSpace { x_size, n, numerators, denominator, values })
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numerator(&self, index: usize) -> &BigUint {
        &self.numerators[index]
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn prob_exact(&self, index: usize) -> BigRational {
        BigRational::new(
            self.numerators[index].clone().into(),
            self.denominator.clone().into(),
        )
    }

    pub fn symbols(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = index % self.x_size;
            index /= self.x_size;
        }
        out
    }

    pub fn index_of(&self, x: &[usize]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::Domain(format!(
                "source string has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        x.iter().try_fold(0usize, |acc, &s| {
            if s >= self.x_size {
                Err(Error::Domain(format!("symbol index {s} outside the x alphabet")))
            } else {
                Ok(acc * self.x_size + s)
            }
        })
    }

    /// Indices sorted by nonincreasing probability, ties in lexicographic order.
    pub fn ranked_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.numerators[b].cmp(&self.numerators[a]).then(a.cmp(&b)));
        order
    }
}

/// The optimal compressor `f*` for one side-information string.
#[derive(Clone, Debug)]
pub struct RankedCodebook {
    y: SideInfoString,
    space: StringSpace,
    order: Vec<usize>,
    rank_of: Vec<u64>,
}

/// Orders `X^n` by decreasing `P(x|y)` (lexicographic tie-break) and assigns
/// `{0,1}*` codewords in length-lexicographic order.
pub fn build_code(model: &CondIidModel, y: &SideInfoString) -> Result<RankedCodebook> {
    let bits = y.len() as f64 * (model.x_size() as f64).log2();
    if bits > MAX_EXPLICIT_BITS {
        return Err(Error::TooLarge(format!(
            "n log2|X| = {bits:.2} > {MAX_EXPLICIT_BITS}; use the type-class limits instead"
        )));
    }
    let space = StringSpace::new(model, y, u64::MAX)?;
    let order = space.ranked_order();
    let mut rank_of = vec![0u64; order.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank_of[idx] = r as u64 + 1;
    }
    Ok(RankedCodebook { y: y.clone(), space, order, rank_of })
}

impl RankedCodebook {
    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn y(&self) -> &SideInfoString {
        &self.y
    }

    pub fn space(&self) -> &StringSpace {
        &self.space
    }

    /// String indices by rank (rank 1 first).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self, index: usize) -> u64 {
        self.rank_of[index]
    }

    pub fn length(&self, index: usize) -> usize {
        rank_length(self.rank_of[index])
    }

    pub fn encode(&self, x: &[usize]) -> Result<Codeword> {
        codeword_for_rank(self.rank_of[self.space.index_of(x)?])
    }

    pub fn decode(&self, word: &Codeword) -> Result<Vec<usize>> {
        let rank = rank_for_codeword(word)?;
        if rank as usize > self.order.len() {
            return Err(Error::InvalidCodeword(format!(
                "{word} is not a codeword at blocklength {}",
                self.n()
            )));
        }
        Ok(self.space.symbols(self.order[rank as usize - 1]))
    }

    /// Probabilities in rank order.
    pub fn sorted_probabilities(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.space.prob(i)).collect()
    }
}

pub fn encode(model: &CondIidModel, y: &SideInfoString, x: &[usize]) -> Result<Codeword> {
    build_code(model, y)?.encode(x)
}

pub fn decode(model: &CondIidModel, y: &SideInfoString, word: &Codeword) -> Result<Vec<usize>> {
    build_code(model, y)?.decode(word)
}

/// `max_x [ l(f*(x|y)) + log2 P(x|y) ]` over positive-probability `x`; the
/// pointwise achievability bound says this is `<= 0`.
pub fn check_pointwise_achievability(model: &CondIidModel, y: &SideInfoString) -> Result<f64> {
    let code = build_code(model, y)?;
    Ok((0..code.space.len())
        .filter(|&i| code.space.prob(i) > 0.0)
        .map(|i| code.length(i) as f64 + code.space.prob(i).log2())
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub x_index: usize,
    pub lower: f64,
    pub length: usize,
    pub upper: f64,
}

impl SandwichRow {
    pub fn holds(&self) -> bool {
        let tol = 1e-9;
        self.lower <= self.length as f64 + tol && self.length as f64 <= self.upper + tol
    }
}

/// Counting bounds on the optimal length of every positive-probability `x`:
/// `log2 E[1/P 1{P > p}] - 1 <= l <= log2 E[1/P 1{P >= p}]`.
pub fn check_counting_sandwich(model: &CondIidModel, y: &SideInfoString) -> Result<Vec<SandwichRow>> {
    let code = build_code(model, y)?;
    let space = &code.space;
    // Direct summation of P(x')/P(x') over the indicator sets, walking the
    // sorted order once.
    let order = code.order();
    let mut rows = Vec::new();
    let mut strictly_above = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let num = space.numerator(order[i]);
        if num.is_zero() {
            break;
        }
        let mut j = i;
        let mut tied = 0.0f64;
        while j < order.len() && space.numerator(order[j]) == num {
            let p = space.prob(order[j]);
            tied += p * (1.0 / p);
            j += 1;
        }
        for &idx in &order[i..j] {
            rows.push(SandwichRow {
                x_index: idx,
                lower: strictly_above.log2() - 1.0,
                length: code.length(idx),
                upper: (strictly_above + tied).log2(),
            });
        }
        strictly_above += tied;
        i = j;
    }
    rows.sort_by_key(|r| r.x_index);
    Ok(rows)
}

/// A prefix-free code for one threshold `k`.
#[derive(Clone, Debug)]
pub struct PrefixCodebook {
    k: usize,
    space: StringSpace,
    codewords: Vec<Codeword>,
}

/// The `min(2^k - 1, |X|^n)` most probable strings receive the first
/// `2^k - 1` leaves of depth `k`; the last depth-`k` node roots a subtree
/// holding the remaining strings at depth `k + ceil(log2 remaining)`.
pub fn build_prefix_code(model: &CondIidModel, y: &SideInfoString, k: usize) -> Result<PrefixCodebook> {
    if k == 0 {
        return Err(Error::Domain("prefix threshold k must be >= 1".into()));
    }
    if k > 62 {
        return Err(Error::Domain("prefix threshold k must be <= 62".into()));
    }
    let code = build_code(model, y)?;
    let order = code.order();
    let top = ((1u64 << k) - 1).min(order.len() as u64) as usize;
    let mut codewords = vec![Codeword::default(); order.len()];
    for (slot, &idx) in order[..top].iter().enumerate() {
        codewords[idx] = Codeword::fixed_width(slot as u64, k);
    }
    let remaining = order.len() - top;
    if remaining > 0 {
        let reserved = Codeword::fixed_width((1u64 << k) - 1, k);
        let width = 64 - ((remaining - 1) as u64).leading_zeros() as usize;
        let width = if remaining == 1 { 0 } else { width };
        for (slot, &idx) in order[top..].iter().enumerate() {
            codewords[idx] = reserved.concat(&Codeword::fixed_width(slot as u64, width));
        }
    }
    Ok(PrefixCodebook { k, space: code.space, codewords })
}

impl PrefixCodebook {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codeword(&self, index: usize) -> &Codeword {
        &self.codewords[index]
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn kraft_sum(&self) -> BigRational {
        self.codewords
            .iter()
            .map(|c| BigRational::new(1.into(), (num_bigint::BigInt::one()) << c.len()))
            .sum()
    }

    pub fn is_prefix_free(&self) -> bool {
        let mut sorted: Vec<&Codeword> = self.codewords.iter().collect();
        sorted.sort();
        sorted.windows(2).all(|w| !w[0].is_prefix_of(w[1]))
    }

    /// Exact `P[l_p >= threshold | y]`.
    pub fn excess_probability(&self, threshold: usize) -> BigRational {
        let num: BigUint = self
            .codewords
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() >= threshold)
            .map(|(i, _)| self.space.numerator(i).clone())
            .sum();
        BigRational::new(num.into(), self.space.denominator().clone().into())
    }

    pub fn excess_probability_f64(&self, threshold: usize) -> f64 {
        rational_to_f64(&self.excess_probability(threshold))
    }
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

    fn uniform(size: usize) -> CondIidModel {
        let row: Vec<Prob> = (0..size).map(|_| Prob::from_ratio(1, size as u64)).collect();
        CondIidModel::new(Alphabet::numeric(size), Alphabet::numeric(1), None, vec![row]).unwrap()
    }

    fn y(model: &CondIidModel, s: &str) -> SideInfoString {
        SideInfoString::parse(s, model.y_alphabet()).unwrap()
    }

    #[test]
    fn rank_codewords() {
        let words: Vec<String> = (1..=7).map(|m| codeword_for_rank(m).unwrap().to_bit_string()).collect();
        assert_eq!(words, ["", "0", "1", "00", "01", "10", "11"]);
        assert_eq!(codeword_for_rank(5).unwrap().len(), 2);
        assert_eq!(codeword_for_rank(1).unwrap().to_string(), "∅");
        assert!(codeword_for_rank(0).is_err());
        for m in 1..300 {
            let w = codeword_for_rank(m).unwrap();
            assert_eq!(rank_for_codeword(&w).unwrap(), m);
            assert_eq!(w.len(), (m as f64).log2().floor() as usize);
        }
    }

    #[test]
    fn fig1_two_symbol_code() {
        let m = fig1();
        let code = build_code(&m, &y(&m, "01")).unwrap();
        let labels: Vec<String> = code
            .order()
            .iter()
            .map(|&i| m.x_alphabet().render(&code.space().symbols(i)))
            .collect();
        assert_eq!(labels, ["01", "00", "11", "10"]);
        let probs = code.sorted_probabilities();
        for (p, e) in probs.iter().zip([0.54, 0.36, 0.06, 0.04]) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(code.encode(&[0, 1]).unwrap().to_bit_string(), "");
        assert_eq!(code.encode(&[0, 0]).unwrap().to_bit_string(), "0");
    }

    #[test]
    fn fig1_single_symbol_code() {
        let m = fig1();
        let code = build_code(&m, &y(&m, "0")).unwrap();
        assert_eq!(code.order(), &[0, 1]);
        assert_eq!(code.encode(&[1]).unwrap().to_bit_string(), "0");
        assert_eq!(code.encode(&[0]).unwrap().to_bit_string(), "");
    }

    #[test]
    fn uniform_order_is_lexicographic() {
        let m = uniform(3);
        let code = build_code(&m, &SideInfoString::new(vec![0; 3], m.y_alphabet()).unwrap()).unwrap();
        assert_eq!(code.order(), (0..27).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn decode_rejects_out_of_range_words() {
        let m = fig1();
        let code = build_code(&m, &y(&m, "01")).unwrap();
        // Ranks 1..4 only: "" "0" "1" "00".
        assert!(code.decode(&Codeword::parse("01").unwrap()).is_err());
        assert!(Codeword::parse("0a").is_err());
        assert_eq!(code.decode(&Codeword::parse("00").unwrap()).unwrap(), vec![1, 0]);
    }

    #[test]
    fn explicit_guard() {
        let m = uniform(4);
        let long = SideInfoString::new(vec![0; 16], m.y_alphabet()).unwrap();
        assert!(matches!(build_code(&m, &long), Err(Error::TooLarge(_))));
    }

    #[test]
    fn pointwise_achievability_slack() {
        let m = fig1();
        assert!(check_pointwise_achievability(&m, &y(&m, "0")).unwrap() <= 0.0);
        assert!(check_pointwise_achievability(&m, &y(&m, "01")).unwrap() <= 0.0);
        // Uniform over 4 = 2^2 symbols: the last rank meets the bound exactly.
        let u = uniform(4);
        let slack = check_pointwise_achievability(&u, &SideInfoString::new(vec![0], u.y_alphabet()).unwrap()).unwrap();
        assert_eq!(slack, 0.0);
    }

    #[test]
    fn counting_sandwich_examples() {
        let m = fig1();
        let rows = check_counting_sandwich(&m, &y(&m, "0")).unwrap();
        assert_eq!(rows[0].upper, 0.0);
        assert_eq!(rows[0].length, 0);
        assert_eq!(rows[0].lower, f64::NEG_INFINITY);
        assert!(rows.iter().all(SandwichRow::holds));

        let u = uniform(4);
        let rows = check_counting_sandwich(&u, &SideInfoString::new(vec![0], u.y_alphabet()).unwrap()).unwrap();
        assert!(rows.iter().all(|r| r.upper == 2.0 && r.holds()));
        let lengths: Vec<usize> = rows.iter().map(|r| r.length).collect();
        assert_eq!(lengths, [0, 1, 1, 2]);
    }

    #[test]
    fn prefix_code_threshold_one() {
        let m = fig1();
        let code = build_prefix_code(&m, &y(&m, "01"), 1).unwrap();
        assert!(code.is_prefix_free());
        assert!(code.kraft_sum() <= BigRational::one());
        // "01" (rank 1) alone gets a 1-bit word.
        assert_eq!(code.codeword(1).len(), 1);
        assert_eq!(code.excess_probability(2), BigRational::new(46.into(), 100.into()));
    }

    #[test]
    fn prefix_code_uniform_four() {
        let u = uniform(2);
        let code = build_prefix_code(&u, &SideInfoString::new(vec![0; 2], u.y_alphabet()).unwrap(), 2).unwrap();
        let short = code.codewords().iter().filter(|c| c.len() <= 2).count();
        assert_eq!(short, 4);
        assert!(code.is_prefix_free());
        assert!(code.kraft_sum() <= BigRational::one());
        let u = uniform(4);
        let code = build_prefix_code(&u, &SideInfoString::new(vec![0; 2], u.y_alphabet()).unwrap(), 2).unwrap();
        assert_eq!(code.codewords().iter().filter(|c| c.len() <= 2).count(), 3);
        assert!(code.is_prefix_free());
        assert!(code.kraft_sum() <= BigRational::one());
    }

    #[test]
    fn prefix_code_beyond_support() {
        let m = fig1();
        let code = build_prefix_code(&m, &y(&m, "01"), 2).unwrap();
        assert!(code.codewords().iter().all(|c| c.len() <= 2));
        assert!(code.excess_probability(3).is_zero());
    }

    proptest::proptest! {
        #[test]
        fn round_trip_every_string(w in proptest::collection::vec(1u64..20, 3), ys in proptest::collection::vec(0usize..2, 1..6)) {
            let total: u64 = w.iter().sum();
            let row: Vec<Prob> = w.iter().map(|&v| Prob::from_ratio(v, total)).collect();
            let rev: Vec<Prob> = row.iter().rev().cloned().collect();
            let m = CondIidModel::new(Alphabet::numeric(3), Alphabet::numeric(2), None, vec![row, rev]).unwrap();
            let y = SideInfoString::new(ys, m.y_alphabet()).unwrap();
            let code = build_code(&m, &y).unwrap();
            let probs = code.sorted_probabilities();
            proptest::prop_assert!(probs.windows(2).all(|p| p[0] >= p[1]));
            for idx in 0..code.space().len() {
                let x = code.space().symbols(idx);
                let word = code.encode(&x).unwrap();
                proptest::prop_assert_eq!(word.len(), rank_length(code.rank(idx)));
                proptest::prop_assert_eq!(code.decode(&word).unwrap(), x);
            }
            proptest::prop_assert!(check_pointwise_achievability(&m, &y).unwrap() <= 1e-12);
            proptest::prop_assert!(check_counting_sandwich(&m, &y).unwrap().iter().all(SandwichRow::holds));
        }
    }
}
