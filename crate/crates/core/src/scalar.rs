//! Exact arithmetic in the Gaussian rationals `Q(i)`.
//!
//! Every coefficient in the library is a [`Scalar`]: a pair of arbitrary
//! precision rationals `re + im*i`, always stored in lowest terms.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to negative power {0}")]
    ZeroToNegativePower(i64),
    #[error("cannot parse scalar `{text}`: {reason}")]
    Parse { text: String, reason: String },
}

/// An element `re + im*i` of `Q(i)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    re: BigRational,
    im: BigRational,
}

impl Scalar {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        // BigRational is always kept reduced with a positive denominator
        Scalar { re, im }
    }

    pub fn zero() -> Self {
        Scalar::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn i() -> Self {
        Scalar::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::new(BigRational::from_integer(n.into()), BigRational::zero())
    }

    /// `num/den` as a real scalar. Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::new(BigRational::new(num.into(), den.into()), BigRational::zero())
    }

    pub fn complex(re: BigRational, im: BigRational) -> Self {
        Scalar::new(re, im)
    }

    /// `(re_num/re_den) + (im_num/im_den)i`.
    pub fn gaussian(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        Scalar::new(
            BigRational::new(re_num.into(), re_den.into()),
            BigRational::new(im_num.into(), im_den.into()),
        )
    }

    pub fn re(&self) -> &BigRational {
        &self.re
    }

    pub fn im(&self) -> &BigRational {
        &self.im
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.im.is_zero() && self.re.is_integer()
    }

    pub fn conj(&self) -> Self {
        Scalar::new(self.re.clone(), -self.im.clone())
    }

    /// `|z|^2 = re^2 + im^2`.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(Scalar::new(&self.re / &n, -(&self.im / &n)))
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Result<Scalar, ScalarError> {
        let inv = rhs.inv().ok_or(ScalarError::DivisionByZero)?;
        Ok(self * &inv)
    }

    /// Exact integer power. `b^0 = 1` for every `b`, including zero.
    pub fn int_pow(&self, exponent: i64) -> Result<Scalar, ScalarError> {
        if exponent == 0 {
            return Ok(Scalar::one());
        }
        let base = if exponent < 0 {
            self.inv().ok_or(ScalarError::ZeroToNegativePower(exponent))?
        } else {
            self.clone()
        };
        let mut e = exponent.unsigned_abs();
        let mut acc = Scalar::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    /// Combined bit length of all numerators and denominators, used to pick
    /// small pivots during elimination.
    pub fn bit_size(&self) -> u64 {
        self.re.numer().bits() + self.re.denom().bits() + self.im.numer().bits() + self.im.denom().bits()
    }

    /// All `g`-th roots of `self` that lie in `Q(i)`, for `g >= 1`.
    ///
    /// The returned flag is `false` when the search could not be carried out
    /// exactly (magnitudes beyond double precision) and a root may have been
    /// missed. When one root is found the list is complete, since the others
    /// differ by the roots of unity in `Q(i)`.
    pub fn roots(&self, g: u32) -> (Vec<Scalar>, bool) {
        assert!(g >= 1, "root degree must be positive");
        if self.is_zero() {
            return (vec![Scalar::zero()], true);
        }
        if g == 1 {
            return (vec![self.clone()], true);
        }
        let first = if g % 2 == 0 {
            // square roots are exact; reduce the degree
            match self.sqrt_exact() {
                Some(r) => {
                    // a g-th root of c is a (g/2)-th root of either square root
                    let mut out: Vec<Scalar> = Vec::new();
                    let mut complete = true;
                    for base in [r.clone(), -r] {
                        let (sub, c) = base.roots(g / 2);
                        complete &= c;
                        for s in sub {
                            if !out.contains(&s) {
                                out.push(s);
                            }
                        }
                    }
                    out.sort_by(Scalar::canonical_cmp);
                    return (out, complete);
                }
                None => return (Vec::new(), true),
            }
        } else {
            match self.odd_root_guided(g) {
                Ok(r) => r,
                Err(incomplete) => return (Vec::new(), !incomplete),
            }
        };
        let mut out = Vec::new();
        for unit in units() {
            if unit.int_pow(g as i64).map(|u| u.is_one()).unwrap_or(false) {
                let cand = &first * &unit;
                if !out.contains(&cand) {
                    out.push(cand);
                }
            }
        }
        out.sort_by(Scalar::canonical_cmp);
        (out, true)
    }

    /// Exact square root in `Q(i)` if one exists. Returns the root with
    /// positive real part (or positive imaginary part when the real part is 0).
    pub fn sqrt_exact(&self) -> Option<Scalar> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        // (x + yi)^2 = p + qi  =>  x^2 = (p + |c|)/2, y^2 = (|c| - p)/2
        let modulus = match rational_sqrt(&self.norm_sqr()) {
            Some(m) => m,
            None => return None,
        };
        let two = BigRational::from_integer(2.into());
        let x2 = (&self.re + &modulus) / &two;
        let y2 = (&modulus - &self.re) / &two;
        let (x, y) = match (rational_sqrt(&x2), rational_sqrt(&y2)) {
            (Some(x), Some(y)) => (x, y),
            _ => return None,
        };
        // fix the relative sign from 2xy = q
        let y = if self.im.is_negative() { -y } else { y };
        let root = Scalar::new(x, y);
        debug_assert_eq!(&(&root * &root), self);
        Some(root)
    }

    /// One odd-degree root guided by a floating point estimate and confirmed
    /// exactly. `Err(true)` means the estimate was out of range.
    fn odd_root_guided(&self, g: u32) -> Result<Scalar, bool> {
        // clear denominators: root = M / D with D | den(c), M^g = c * D^g
        let d = self.re.denom().lcm(self.im.denom());
        let dg = num_traits::pow(d.clone(), g as usize);
        let zr = (self.re.clone() * BigRational::from_integer(dg.clone())).to_integer();
        let zi = (self.im.clone() * BigRational::from_integer(dg)).to_integer();
        let (fr, fi) = match (zr.to_f64(), zi.to_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => return Err(true),
        };
        let modulus = (fr * fr + fi * fi).sqrt().powf(1.0 / g as f64);
        if modulus > 2f64.powi(48) {
            return Err(true);
        }
        let arg = fi.atan2(fr);
        let target = Scalar::new(BigRational::from_integer(zr), BigRational::from_integer(zi));
        for k in 0..g {
            let theta = (arg + 2.0 * std::f64::consts::PI * k as f64) / g as f64;
            let (ex, ey) = (modulus * theta.cos(), modulus * theta.sin());
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let cand = Scalar::new(
                        BigRational::from_integer(BigInt::from(ex.round() as i64 + dx)),
                        BigRational::from_integer(BigInt::from(ey.round() as i64 + dy)),
                    );
                    if cand.int_pow(g as i64).map(|p| p == target).unwrap_or(false) {
                        let den = Scalar::new(BigRational::from_integer(d.clone()), BigRational::zero());
                        return Ok(cand.checked_div(&den).expect("nonzero denominator"));
                    }
                }
            }
        }
        Err(false)
    }

    /// Total order used for canonical listings: by real part, then imaginary.
    pub fn canonical_cmp(a: &Scalar, b: &Scalar) -> Ordering {
        a.re.cmp(&b.re).then_with(|| a.im.cmp(&b.im))
    }

    /// Parenthesised form used as a coefficient inside element text.
    pub fn coefficient_text(&self) -> String {
        if self.is_integer() {
            self.to_string()
        } else if self.is_real() {
            format!("({})", self)
        } else {
            self.to_string()
        }
    }
}

fn units() -> [Scalar; 4] {
    [Scalar::one(), Scalar::i(), -Scalar::one(), -Scalar::i()]
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().magnitude().sqrt();
    let d = q.denom().magnitude().sqrt();
    let r = BigRational::new(BigInt::from_biguint(Sign::Plus, n), BigInt::from_biguint(Sign::Plus, d));
    if &(&r * &r) == q {
        Some(r)
    } else {
        None
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::new(q, BigRational::zero())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a, 'b> $tr<&'b Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                let f: fn(&Scalar, &Scalar) -> Scalar = $body;
                f(self, rhs)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'b> $tr<&'b Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl<'a> $tr<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| Scalar::new(&a.re + &b.re, &a.im + &b.im));
forward_binop!(Sub, sub, |a, b| Scalar::new(&a.re - &b.re, &a.im - &b.im));
forward_binop!(Mul, mul, |a, b| Scalar::new(
    &a.re * &b.re - &a.im * &b.im,
    &a.re * &b.im + &a.im * &b.re
));

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::new(-self.re, -self.im)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::new(-self.re.clone(), -self.im.clone())
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl Product for Scalar {
    fn product<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::one(), |acc, x| acc * x)
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Scalar {
    /// Real values print as `p/q`; anything with an imaginary part prints
    /// parenthesised as `(p/q+r/si)`, omitting a zero real part.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return f.write_str(&fmt_rational(&self.re));
        }
        let im = fmt_rational(&self.im);
        if self.re.is_zero() {
            write!(f, "({}i)", im)
        } else if self.im.is_negative() {
            write!(f, "({}{}i)", fmt_rational(&self.re), im)
        } else {
            write!(f, "({}+{}i)", fmt_rational(&self.re), im)
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Scalar {
    type Err = ScalarError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ScalarError::Parse { text: text.to_string(), reason: reason.to_string() };
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(err("empty"));
        }
        let inner = match t.strip_prefix('(') {
            Some(rest) => rest.strip_suffix(')').ok_or_else(|| err("unbalanced parenthesis"))?,
            None => t.as_str(),
        };
        parse_complex_body(inner).ok_or_else(|| err("expected p/q, (p/q+r/si) or i"))
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, with `i` alone meaning `1i`.
fn parse_complex_body(s: &str) -> Option<Scalar> {
    if s.is_empty() {
        return None;
    }
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not the leading one
        let split = body
            .char_indices()
            .rev()
            .find(|&(idx, c)| idx > 0 && (c == '+' || c == '-'))
            .map(|(idx, _)| idx);
        let (re, im) = match split {
            Some(idx) => (parse_rational(&body[..idx])?, parse_imag_coeff(&body[idx..])?),
            None => (BigRational::zero(), parse_imag_coeff(body)?),
        };
        return Some(Scalar::new(re, im));
    }
    Some(Scalar::new(parse_rational(s)?, BigRational::zero()))
}

fn parse_imag_coeff(s: &str) -> Option<BigRational> {
    match s {
        "" | "+" => Some(BigRational::one()),
        "-" => Some(-BigRational::one()),
        _ => {
            let s = s.strip_suffix('*').unwrap_or(s);
            parse_rational(s)
        }
    }
}

pub(crate) fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.strip_prefix('+').unwrap_or(s);
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let valid_int = |t: &str| {
        let digits = t.strip_prefix('-').unwrap_or(t);
        !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())
    };
    if !valid_int(num) || den.is_empty() || !den.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}
