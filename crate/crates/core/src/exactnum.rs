//! Exact rationals and quadratic radicals.
//!
//! Every coefficient that goes through a ceiling or floor in the E-CG map is
//! computed here, so family membership and rounding never depend on floating
//! point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Huge numerator or denominator: shift both down before dividing.
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(900);
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

/// Writes `a = s²·d` with `d` square-free.
pub fn squarefree_decompose(a: u64) -> (u64, u64) {
    assert!(a >= 1, "squarefree_decompose needs a positive integer");
    let mut rest = a;
    let mut s = 1u64;
    let mut d = 1u64;
    let mut p = 2u64;
    while p.saturating_mul(p) <= rest {
        let mut e = 0;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        for _ in 0..e / 2 {
            s *= p;
        }
        if e % 2 == 1 {
            d *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    // Whatever is left is 1 or a prime.
    d *= rest;
    (s, d)
}

pub fn is_squarefree(d: u64) -> bool {
    d >= 1 && squarefree_decompose(d).0 == 1
}

/// An exact number `r·√d` with `r` rational and `d` a square-free positive
/// integer. Zero is always stored with `d = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Radical {
    r: Rational,
    d: u64,
}

impl Radical {
    /// Builds `r·√d` for any positive `d`, pulling square factors of `d` into `r`.
    pub fn new(r: Rational, d: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("radicand must be positive"));
        }
        let (s, d) = squarefree_decompose(d);
        let r = r * Rational::from_integer(BigInt::from(s));
        Ok(Self::canonical(r, d))
    }

    fn canonical(r: Rational, d: u64) -> Self {
        if r.is_zero() {
            Radical { r, d: 1 }
        } else {
            Radical { r, d }
        }
    }

    pub fn zero() -> Self {
        Radical { r: Rational::zero(), d: 1 }
    }

    pub fn one() -> Self {
        Radical { r: Rational::one(), d: 1 }
    }

    pub fn from_rational(r: Rational) -> Self {
        Radical { r, d: 1 }
    }

    pub fn from_int(v: i64) -> Self {
        Self::from_rational(int(v))
    }

    /// `√d` for a positive integer `d`.
    pub fn sqrt(d: u64) -> Result<Self> {
        Self::new(Rational::one(), d)
    }

    pub fn coeff(&self) -> &Rational {
        &self.r
    }

    pub fn radicand(&self) -> u64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.r.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.d == 1
    }

    pub fn is_integer(&self) -> bool {
        self.d == 1 && self.r.is_integer()
    }

    pub fn to_rational(&self) -> Option<Rational> {
        self.is_rational().then(|| self.r.clone())
    }

    pub fn signum(&self) -> i32 {
        if self.r.is_zero() {
            0
        } else if self.r.is_positive() {
            1
        } else {
            -1
        }
    }

    /// The exact square `r²·d`.
    pub fn square(&self) -> Rational {
        &self.r * &self.r * Rational::from_integer(BigInt::from(self.d))
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self::canonical(&self.r * k, self.d)
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.r) * (self.d as f64).sqrt()
    }

    /// `⌊r·√d⌋`, exact.
    pub fn floor(&self) -> BigInt {
        if self.d == 1 {
            return self.r.floor().to_integer();
        }
        // Irrational, so never an integer: compare r²d against integer squares.
        let m = isqrt_floor(&self.square());
        if self.r.is_positive() {
            m
        } else {
            -(m + BigInt::one())
        }
    }

    /// `⌈r·√d⌉`, exact.
    pub fn ceil(&self) -> BigInt {
        if self.d == 1 {
            return self.r.ceil().to_integer();
        }
        let m = isqrt_floor(&self.square());
        if self.r.is_positive() {
            m + 1
        } else {
            -m
        }
    }
}

/// `⌊√x⌋` for a nonnegative rational, which equals `isqrt(⌊x⌋)`.
fn isqrt_floor(x: &Rational) -> BigInt {
    debug_assert!(!x.is_negative());
    x.floor().to_integer().sqrt()
}

/// Exact sign of `a − b`.
pub fn radical_compare(a: &Radical, b: &Radical) -> Ordering {
    if a.d == b.d {
        return a.r.cmp(&b.r);
    }
    let (sa, sb) = (a.signum(), b.signum());
    if sa != sb {
        return sa.cmp(&sb);
    }
    // Same nonzero sign; compare magnitudes through the squares.
    let by_square = a.square().cmp(&b.square());
    if sa > 0 {
        by_square
    } else {
        by_square.reverse()
    }
}

pub fn radical_mul(a: &Radical, b: &Radical) -> Radical {
    a * b
}

pub fn radical_floor(a: &Radical) -> BigInt {
    a.floor()
}

pub fn radical_ceil(a: &Radical) -> BigInt {
    a.ceil()
}

/// `⌊q + s⌋` for a rational `q` and a radical `s`, exact.
pub fn floor_sum(q: &Rational, s: &Radical) -> BigInt {
    if s.is_rational() {
        return (q + &s.r).floor().to_integer();
    }
    // q + s is irrational. Start from a float guess and fix it with exact
    // comparisons `s ≷ m − q`.
    let guess = (rational_to_f64(q) + s.to_f64()).floor();
    let mut m = if guess.is_finite() {
        BigInt::from(guess as i64)
    } else {
        (q.floor().to_integer()) + s.floor()
    };
    let above = |m: &BigInt| {
        // q + s > m  <=>  s > m - q
        let rhs = Radical::from_rational(Rational::from_integer(m.clone()) - q);
        radical_compare(s, &rhs) == Ordering::Greater
    };
    while !above(&m) {
        m -= 1;
    }
    loop {
        let next = &m + 1;
        if above(&next) {
            m = next;
        } else {
            break;
        }
    }
    m
}

/// `⌈q + s⌉` for a rational `q` and a radical `s`, exact.
pub fn ceil_sum(q: &Rational, s: &Radical) -> BigInt {
    if s.is_rational() {
        return (q + &s.r).ceil().to_integer();
    }
    floor_sum(q, s) + 1
}

impl Ord for Radical {
    fn cmp(&self, other: &Self) -> Ordering {
        radical_compare(self, other)
    }
}

impl PartialOrd for Radical {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mul for &Radical {
    type Output = Radical;

    fn mul(self, rhs: &Radical) -> Radical {
        if self.is_zero() || rhs.is_zero() {
            return Radical::zero();
        }
        if self.d == rhs.d {
            let r = &self.r * &rhs.r * Rational::from_integer(BigInt::from(self.d));
            return Radical::from_rational(r);
        }
        let g = self.d.gcd(&rhs.d);
        // √a·√b = g·√(a/g · b/g); the cofactors are coprime and square-free.
        let d = (self.d / g) * (rhs.d / g);
        let r = &self.r * &rhs.r * Rational::from_integer(BigInt::from(g));
        Radical::canonical(r, d)
    }
}

impl Mul for Radical {
    type Output = Radical;

    fn mul(self, rhs: Radical) -> Radical {
        &self * &rhs
    }
}

impl Neg for Radical {
    type Output = Radical;

    fn neg(self) -> Radical {
        Radical::canonical(-self.r, self.d)
    }
}

impl Neg for &Radical {
    type Output = Radical;

    fn neg(self) -> Radical {
        -(self.clone())
    }
}

impl From<Rational> for Radical {
    fn from(r: Rational) -> Self {
        Radical::from_rational(r)
    }
}

impl From<i64> for Radical {
    fn from(v: i64) -> Self {
        Radical::from_int(v)
    }
}

impl fmt::Display for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d == 1 {
            write!(f, "{}", self.r)
        } else if self.r.is_one() {
            write!(f, "sqrt({})", self.d)
        } else if (-&self.r).is_one() {
            write!(f, "-sqrt({})", self.d)
        } else {
            write!(f, "{}*sqrt({})", self.r, self.d)
        }
    }
}

impl FromStr for Radical {
    type Err = Error;

    /// Accepts `p`, `p/q`, `r*sqrt(d)`, `sqrt(d)` and `-sqrt(d)`, with `r` in
    /// integer or `p/q` form.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::domain(format!("cannot parse radical `{s}`"));
        let (coeff, radicand) = match s.find("sqrt(") {
            None => (s.as_str(), None),
            Some(pos) => {
                let inner = s[pos + 5..].strip_suffix(')').ok_or_else(bad)?;
                let d: u64 = inner.parse().map_err(|_| bad())?;
                let head = &s[..pos];
                let head = head.strip_suffix('*').unwrap_or(head);
                (head, Some(d))
            }
        };
        let r = match coeff {
            "" | "+" => Rational::one(),
            "-" => -Rational::one(),
            c => Rational::from_str(c).map_err(|_| bad())?,
        };
        match radicand {
            None => Ok(Radical::from_rational(r)),
            Some(d) => Radical::new(r, d),
        }
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    Rational::from_str(s.trim()).map_err(|_| Error::domain(format!("cannot parse rational `{s}`")))
}

/// Rank of a rational matrix by Gaussian elimination.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let piv = m[r][c].clone();
        for i in r + 1..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for k in c..cols {
                let delta = &f * &m[r][k];
                m[i][k] -= delta;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Solves `A·λ = b` exactly for an `m×k` system with `m ≥ k`.
///
/// Returns `None` when the columns are dependent or the system is inconsistent.
pub fn solve_exact(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut r = 0;
    for c in 0..cols {
        let p = (r..rows).find(|&i| !m[i][c].is_zero())?;
        m.swap(r, p);
        let piv = m[r][c].clone();
        for k in c..=cols {
            m[r][k] = &m[r][k] / &piv;
        }
        for i in 0..rows {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for k in c..=cols {
                let delta = &f * &m[r][k];
                m[i][k] -= delta;
            }
        }
        r += 1;
    }
    if m[r..].iter().any(|row| !row[cols].is_zero()) {
        return None;
    }
    Some(m[..cols].iter().map(|row| row[cols].clone()).collect())
}
