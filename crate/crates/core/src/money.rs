//! Exact monetary amounts.
//!
//! Every valuation, bid, cost and payment in the engine is a [`Money`]: an
//! arbitrary-precision rational. Budget balance is asserted as equality, so
//! nothing here ever rounds. Text forms are decimals (`"4.50"`) or fractions
//! (`"13/3"`); both parse back to the identical value.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid money literal {literal:?}: {reason}")]
pub struct ParseMoneyError {
    pub literal: String,
    pub reason: &'static str,
}

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn one() -> Self {
        Money(BigRational::one())
    }

    pub fn from_integer(value: i64) -> Self {
        Money(BigRational::from_integer(BigInt::from(value)))
    }

    /// `numer / denom`. Panics if `denom` is zero.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Money(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// `max(self, 0)`.
    pub fn clamp_non_negative(self) -> Self {
        if self.is_negative() {
            Money::zero()
        } else {
            self
        }
    }

    /// Largest integer `q` with `q * divisor <= self`. `divisor` must be positive.
    pub fn floor_div(&self, divisor: &Money) -> BigInt {
        (&self.0 / &divisor.0).floor().to_integer()
    }

    /// Smallest integer multiple of `step` that is at least `self`.
    pub fn round_up_to(&self, step: &Money) -> Money {
        let quotient = &self.0 / &step.0;
        Money(quotient.ceil() * &step.0)
    }

    /// Integer multiple `count * self`.
    pub fn times(&self, count: u64) -> Money {
        Money(&self.0 * BigRational::from_integer(BigInt::from(count)))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering rounded half away from zero to `places` digits.
    /// Lossy; use `Display` for the exact form.
    pub fn to_decimal_string(&self, places: u32) -> String {
        let scale = BigInt::from(10u32).pow(places);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let negative = rounded.is_negative();
        let (int_part, frac_part) = rounded.abs().div_rem(&scale);
        let sign = if negative { "-" } else { "" };
        if places == 0 {
            return format!("{sign}{int_part}");
        }
        format!(
            "{sign}{int_part}.{frac:0>width$}",
            frac = frac_part.to_string(),
            width = places as usize
        )
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }
}

impl Default for Money {
    fn default() -> Self {
        Money::zero()
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

fn parse_digits(digits: &str, literal: &str) -> Result<BigInt, ParseMoneyError> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseMoneyError {
            literal: literal.to_string(),
            reason: "expected ASCII digits",
        });
    }
    Ok(digits.parse::<BigInt>().expect("digits validated"))
}

impl FromStr for Money {
    type Err = ParseMoneyError;

    /// Accepts `[-]digits[.digits]` or `[-]digits/digits`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let literal = s.trim();
        let (negative, body) = match literal.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, literal.strip_prefix('+').unwrap_or(literal)),
        };
        let value = if let Some((numer, denom)) = body.split_once('/') {
            let numer = parse_digits(numer, literal)?;
            let denom = parse_digits(denom, literal)?;
            if denom.is_zero() {
                return Err(ParseMoneyError {
                    literal: literal.to_string(),
                    reason: "zero denominator",
                });
            }
            BigRational::new(numer, denom)
        } else if let Some((whole, frac)) = body.split_once('.') {
            let whole = if whole.is_empty() {
                BigInt::zero()
            } else {
                parse_digits(whole, literal)?
            };
            let frac_value = parse_digits(frac, literal)?;
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            BigRational::new(whole * &scale + frac_value, scale)
        } else {
            BigRational::from_integer(parse_digits(body, literal)?)
        };
        Ok(Money(if negative { -value } else { value }))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct MoneyVisitor;

impl Visitor<'_> for MoneyVisitor {
    type Value = Money;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a money amount as a quoted decimal or fraction string, e.g. \"4.50\"")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Money, E> {
        Err(E::custom(format!(
            "binary number {v} rejected; write money as a quoted decimal string"
        )))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
        Err(E::custom(format!(
            "bare number {v} rejected; write money as a quoted decimal string"
        )))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
        Err(E::custom(format!(
            "bare number {v} rejected; write money as a quoted decimal string"
        )))
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(MoneyVisitor)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Money> for Money {
            type Output = Money;
            fn $method(self, rhs: Money) -> Money {
                Money(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Money> for Money {
            type Output = Money;
            fn $method(self, rhs: &Money) -> Money {
                Money(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Money> for &Money {
            type Output = Money;
            fn $method(self, rhs: Money) -> Money {
                Money((&self.0).$method(rhs.0))
            }
        }
        impl $trait<&Money> for &Money {
            type Output = Money;
            fn $method(self, rhs: &Money) -> Money {
                Money((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Neg for &Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-&self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, x| acc + x)
    }
}

impl From<i64> for Money {
    fn from(value: i64) -> Self {
        Money::from_integer(value)
    }
}

/// Shorthand for building amounts from literals. Panics on a malformed literal.
pub fn money(literal: &str) -> Money {
    literal.parse().unwrap_or_else(|e| panic!("{e}"))
}
