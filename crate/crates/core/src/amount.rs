//! Exact token quantities and exact decimal rendering of rationals.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::ops::{Add, Neg, Sub};
use core::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Largest number of decimals accepted for rendering and parsing.
pub const MAX_DECIMALS: u8 = 36;

/// Decimals of the native coin (wei scale).
pub const NATIVE_DECIMALS: u8 = 18;

pub fn pow10(exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u8), exp as usize)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("decimals {0} exceed the supported maximum of 36")]
    TooManyDecimals(u8),
    #[error("invalid decimal number {0:?}")]
    Syntax(String),
    #[error("{value:?} has more than {decimals} fractional digits")]
    Precision { value: String, decimals: u8 },
    #[error("decimals mismatch: {0} vs {1}")]
    DecimalsMismatch(u8, u8),
}

/// A signed raw token quantity in smallest units together with the token's
/// decimal scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenAmount {
    pub raw: BigInt,
    pub decimals: u8,
}

impl TokenAmount {
    pub fn new(raw: impl Into<BigInt>, decimals: u8) -> Self {
        Self {
            raw: raw.into(),
            decimals,
        }
    }

    pub fn zero(decimals: u8) -> Self {
        Self::new(BigInt::zero(), decimals)
    }

    pub fn native(raw: impl Into<BigInt>) -> Self {
        Self::new(raw, NATIVE_DECIMALS)
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.raw.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.raw.is_positive()
    }

    /// Value in whole tokens as an exact rational.
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.raw.clone(), pow10(self.decimals as u32))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, AmountError> {
        if self.decimals != other.decimals {
            return Err(AmountError::DecimalsMismatch(self.decimals, other.decimals));
        }
        Ok(Self::new(&self.raw + &other.raw, self.decimals))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, AmountError> {
        self.checked_add(&-other.clone())
    }

    /// Exact decimal rendering: `raw / 10^decimals` with trailing zeros trimmed.
    pub fn render(&self) -> Result<String, AmountError> {
        if self.decimals > MAX_DECIMALS {
            return Err(AmountError::TooManyDecimals(self.decimals));
        }
        Ok(render_scaled(&self.raw, self.decimals as u32))
    }

    /// Parses a plain decimal string (`-12.5`, `0.3121`) into raw units.
    pub fn parse(s: &str, decimals: u8) -> Result<Self, AmountError> {
        if decimals > MAX_DECIMALS {
            return Err(AmountError::TooManyDecimals(decimals));
        }
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int_part.is_empty() || !all_digits(int_part) || !all_digits(frac_part) {
            return Err(AmountError::Syntax(s.to_string()));
        }
        if body.contains('.') && frac_part.is_empty() {
            return Err(AmountError::Syntax(s.to_string()));
        }
        if frac_part.len() > decimals as usize {
            return Err(AmountError::Precision {
                value: s.to_string(),
                decimals,
            });
        }
        let mut digits = String::with_capacity(int_part.len() + decimals as usize);
        digits.push_str(int_part);
        digits.push_str(frac_part);
        for _ in frac_part.len()..decimals as usize {
            digits.push('0');
        }
        let magnitude = BigInt::from_str(&digits).map_err(|_| AmountError::Syntax(s.to_string()))?;
        Ok(Self::new(if negative { -magnitude } else { magnitude }, decimals))
    }
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_scaled(&self.raw, self.decimals as u32))
    }
}

impl Neg for TokenAmount {
    type Output = TokenAmount;
    fn neg(self) -> Self::Output {
        TokenAmount::new(-self.raw, self.decimals)
    }
}

/// Panics when the decimals differ; use [`TokenAmount::checked_add`] otherwise.
impl Add for &TokenAmount {
    type Output = TokenAmount;
    fn add(self, rhs: Self) -> Self::Output {
        self.checked_add(rhs).expect("adding amounts of different scale")
    }
}

impl Sub for &TokenAmount {
    type Output = TokenAmount;
    fn sub(self, rhs: Self) -> Self::Output {
        self.checked_sub(rhs).expect("subtracting amounts of different scale")
    }
}

fn render_scaled(raw: &BigInt, scale: u32) -> String {
    let sign = if raw.is_negative() { "-" } else { "" };
    let digits = raw.magnitude().to_string();
    if scale == 0 {
        return format!("{sign}{digits}");
    }
    let scale = scale as usize;
    let padded = if digits.len() <= scale {
        let mut p = String::with_capacity(scale + 1);
        for _ in 0..=(scale - digits.len()) {
            p.push('0');
        }
        p.push_str(&digits);
        p
    } else {
        digits
    };
    let (int_part, frac_part) = padded.split_at(padded.len() - scale);
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Renders a rational exactly: a terminating decimal when the reduced
/// denominator has only the prime factors 2 and 5, else `num/den`.
pub fn render_rational(r: &BigRational) -> String {
    let den = r.denom().magnitude().clone();
    let mut rest = den.clone();
    let two = BigUint::from(2u8);
    let five = BigUint::from(5u8);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while rest.is_even() && !rest.is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() && !rest.is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let scale = twos.max(fives);
    let factor = pow10(scale) / BigInt::from_biguint(Sign::Plus, den);
    render_scaled(&(r.numer() * factor), scale)
}

/// Inverse of [`render_rational`]; also accepts plain integers.
pub fn parse_rational(s: &str) -> Result<BigRational, AmountError> {
    let bad = || AmountError::Syntax(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n).map_err(|_| bad())?;
        let d = BigInt::from_str(d).map_err(|_| bad())?;
        if d.is_zero() || d.is_negative() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int_part.is_empty()
        || !all_digits(int_part)
        || !all_digits(frac_part)
        || (body.contains('.') && frac_part.is_empty())
    {
        return Err(bad());
    }
    let mut digits = String::from(int_part);
    digits.push_str(frac_part);
    let magnitude = BigInt::from_str(&digits).map_err(|_| bad())?;
    let numer = if negative { -magnitude } else { magnitude };
    Ok(BigRational::new(numer, pow10(frac_part.len() as u32)))
}
