//! Exact probabilities.
//!
//! Model files carry probabilities as decimal strings ("0.1") or fractions
//! ("1/3"). They are parsed into exact rationals; a double-precision mirror
//! is kept alongside for the floating-point track.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A probability held both exactly and as an `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prob {
    exact: BigRational,
    value: f64,
}

impl Prob {
    pub fn from_rational(exact: BigRational) -> Self {
        let value = rational_to_f64(&exact);
        Prob { exact, value }
    }

    pub fn from_ratio(num: u64, den: u64) -> Self {
        Prob::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Prob::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Prob::from_rational(BigRational::one())
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_zero(&self) -> bool {
        self.exact.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.exact.is_negative()
    }
}

impl FromStr for Prob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(Prob::from_rational)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.exact))
    }
}

/// Parses `"0.125"`, `"1e-3"`, `"-2.5E+1"` or `"1/3"` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(num / den);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {text:?}")))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("no digits in {text:?}")));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("not a decimal number: {text:?}")));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits })
        .map_err(|_| Error::Parse(format!("not a decimal number: {text:?}")))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Renders a rational as a terminating decimal when one exists, else `"p/q"`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let den = r.denom().magnitude().clone();
    let mut rest = den.clone();
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = r * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let digits = scaled.to_integer();
    let negative = digits.sign() == Sign::Minus;
    let mut body = digits.magnitude().to_string();
    if body.len() <= places {
        body = format!("{}{}", "0".repeat(places + 1 - body.len()), body);
    }
    let split = body.len() - places;
    format!("{}{}.{}", if negative { "-" } else { "" }, &body[..split], &body[split..])
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Extremely small or large ratios: go through log2.
        let sign = if r.is_negative() { -1.0 } else { 1.0 };
        if r.is_zero() {
            return 0.0;
        }
        sign * (log2_biguint(r.numer().magnitude()) - log2_biguint(r.denom().magnitude())).exp2()
    })
}

/// log2 of a big unsigned integer, accurate to double precision; `-inf` for 0.
pub fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return n.to_f64().map(f64::log2).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    top.to_f64().map(f64::log2).unwrap_or(f64::NAN) + shift as f64
}

/// Least common multiple of the denominators of nonnegative rationals, and
/// the numerators rescaled onto it.
pub fn common_denominator<'a, I>(values: I) -> (BigUint, Vec<BigUint>)
where
    I: IntoIterator<Item = &'a BigRational> + Clone,
{
    let mut lcm = BigUint::one();
    for v in values.clone() {
        lcm = lcm.lcm(v.denom().magnitude());
    }
    let numerators = values
        .into_iter()
        .map(|v| v.numer().magnitude() * (&lcm / v.denom().magnitude()))
        .collect();
    (lcm, numerators)
}
