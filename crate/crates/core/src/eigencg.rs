//! Eigen-cuts, their Chvátal–Gomory rounding (E-CG), Boros–Hammer (BH)
//! inequalities, the `F0 ⊆ F1 ⊆ F2` family tests and the two-BH decomposition
//! of `F2` members.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{ceil_sum, int, Radical, Rational};
use crate::ineq::{pair_count, pairs, LiftedPoint, LinearIneq};
use crate::numerics::eigen::{jacobi_eigen, JACOBI_TOL};

/// Default per-coefficient error bound for [`ecg_float`].
pub const DEFAULT_FLOAT_ERR: f64 = 1.0 / (1u64 << 40) as f64;

/// Eigenvalues above `−EIGEN_CUT_TOL` do not produce eigen-cuts.
pub const EIGEN_CUT_TOL: f64 = 1e-8;

/// `(v₀, v)` with exact radical entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadicalVec {
    pub v0: Radical,
    pub v: Vec<Radical>,
}

impl RadicalVec {
    pub fn new(v0: Radical, v: Vec<Radical>) -> Self {
        RadicalVec { v0, v }
    }

    pub fn from_ints(v0: Rational, v: &[i64]) -> Self {
        RadicalVec { v0: Radical::from_rational(v0), v: v.iter().map(|&x| Radical::from_int(x)).collect() }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn to_f64(&self) -> (f64, Vec<f64>) {
        (self.v0.to_f64(), self.v.iter().map(Radical::to_f64).collect())
    }
}

impl fmt::Display for RadicalVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", self.v0)?;
        for (k, x) in self.v.iter().enumerate() {
            write!(f, "{}{x}", if k == 0 { " " } else { ", " })?;
        }
        f.write_str(")")
    }
}

/// `(v₀, v)` in floating point with a per-coefficient error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatVec {
    pub v0: f64,
    pub v: Vec<f64>,
    pub err: f64,
}

impl FloatVec {
    pub fn new(v0: f64, v: Vec<f64>) -> Self {
        FloatVec { v0, v, err: DEFAULT_FLOAT_ERR }
    }

    pub fn with_err(v0: f64, v: Vec<f64>, err: f64) -> Self {
        assert!(err >= 0.0, "error bound must be nonnegative");
        FloatVec { v0, v, err }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum FamilyTag {
    F0,
    F1,
    F2,
    General,
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyTag::F0 => "F0",
            FamilyTag::F1 => "F1",
            FamilyTag::F2 => "F2",
            FamilyTag::General => "GENERAL",
        })
    }
}

/// `Σ 2v_iv_j X_ij + Σ v_i² X_ii + Σ 2v_iv₀ x_i + v₀² ≥ 0`, with coefficients
/// over `T`. For float cuts `err` bounds the error of every coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenCut<T> {
    pub n: usize,
    pub gamma: T,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub diag: Vec<T>,
    pub err: f64,
}

fn two() -> Rational {
    int(2)
}

/// Exact eigen-cut of a radical vector.
pub fn eigen_cut(w: &RadicalVec) -> EigenCut<Radical> {
    let n = w.n();
    let twice = |a: &Radical, b: &Radical| (a * b).scale(&two());
    EigenCut {
        n,
        gamma: Radical::from_rational(w.v0.square()),
        alpha: w.v.iter().map(|vi| twice(vi, &w.v0)).collect(),
        beta: pairs(n).map(|(i, j)| twice(&w.v[i], &w.v[j])).collect(),
        diag: w.v.iter().map(|vi| Radical::from_rational(vi.square())).collect(),
        err: 0.0,
    }
}

/// Float eigen-cut; `err` grows by the rounding of the products.
pub fn eigen_cut_float(w: &FloatVec) -> EigenCut<f64> {
    let n = w.v.len();
    let alpha: Vec<f64> = w.v.iter().map(|vi| 2.0 * vi * w.v0).collect();
    let beta: Vec<f64> = pairs(n).map(|(i, j)| 2.0 * w.v[i] * w.v[j]).collect();
    let diag: Vec<f64> = w.v.iter().map(|vi| vi * vi).collect();
    let gamma = w.v0 * w.v0;
    let biggest = alpha.iter().chain(&beta).chain(&diag).fold(gamma.abs(), |m, v| m.max(v.abs()));
    EigenCut { n, gamma, alpha, beta, diag, err: w.err + f64::EPSILON * biggest }
}

impl EigenCut<Radical> {
    /// The same inequality over rationals, when every coefficient is rational.
    pub fn to_linear(&self) -> Option<LinearIneq> {
        let conv = |v: &[Radical]| v.iter().map(Radical::to_rational).collect::<Option<Vec<_>>>();
        Some(LinearIneq {
            n: self.n,
            gamma: self.gamma.to_rational()?,
            alpha: conv(&self.alpha)?,
            beta: conv(&self.beta)?,
            diag: conv(&self.diag)?,
        })
    }
}

impl EigenCut<f64> {
    /// Left-hand side at `p`.
    pub fn evaluate(&self, p: &LiftedPoint) -> f64 {
        let n = self.n;
        let mut s = self.gamma;
        for i in 0..n {
            s += self.alpha[i] * p.x[i] + self.diag[i] * p.get(i, i);
        }
        for (k, (i, j)) in pairs(n).enumerate() {
            s += self.beta[k] * p.get(i, j);
        }
        s
    }

    /// The float coefficients as exact rationals.
    pub fn to_linear(&self) -> LinearIneq {
        let conv = |v: &[f64]| v.iter().map(|&x| float_rational(x)).collect::<Vec<_>>();
        LinearIneq {
            n: self.n,
            gamma: float_rational(self.gamma),
            alpha: conv(&self.alpha),
            beta: conv(&self.beta),
            diag: conv(&self.diag),
        }
    }
}

/// Exact value of a finite double.
pub fn float_rational(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

fn floor_int(r: &Rational) -> Rational {
    Rational::from_integer(r.floor().to_integer())
}

/// The E-CG inequality `Σ⌈2v_iv_j⌉X_ij + Σ⌈v_i² + 2v_iv₀⌉x_i + ⌊v₀²⌋ ≥ 0`, exact.
pub fn ecg(w: &RadicalVec) -> LinearIneq {
    let n = w.n();
    let mut out = LinearIneq::zero(n);
    out.gamma = floor_int(&w.v0.square());
    for i in 0..n {
        let cross = (&w.v[i] * &w.v0).scale(&two());
        out.alpha[i] = Rational::from_integer(ceil_sum(&w.v[i].square(), &cross));
    }
    for (k, (i, j)) in pairs(n).enumerate() {
        out.beta[k] = Rational::from_integer((&w.v[i] * &w.v[j]).scale(&two()).ceil());
    }
    out
}

/// E-CG from a float vector with safe rounding.
///
/// Products of the doubles are formed exactly in rationals, and every
/// non-constant coefficient is `⌈value + err⌉`. The constant is rounded from the
/// same side, `⌊v₀² + err⌋`, so it never drops below the exact `⌊v₀²⌋`: a
/// smaller constant would make the inequality stronger than the rounding
/// argument allows.
pub fn ecg_float(w: &FloatVec) -> LinearIneq {
    let n = w.v.len();
    let err = float_rational(w.err);
    let v0 = float_rational(w.v0);
    let v: Vec<Rational> = w.v.iter().map(|&x| float_rational(x)).collect();
    let ceil = |r: Rational| Rational::from_integer((r + &err).ceil().to_integer());
    let mut out = LinearIneq::zero(n);
    out.gamma = floor_int(&(&v0 * &v0 + &err));
    for i in 0..n {
        out.alpha[i] = ceil(&v[i] * &v[i] + two() * &v[i] * &v0);
    }
    for (k, (i, j)) in pairs(n).enumerate() {
        out.beta[k] = ceil(two() * &v[i] * &v[j]);
    }
    out
}

/// The BH inequality from `(wᵀx + w₀ − 1)(wᵀx + w₀) ≥ 0`:
/// `Σ 2w_iw_j X_ij + Σ w_i(w_i + 2w₀ − 1)x_i + w₀(w₀ − 1) ≥ 0`.
pub fn bh_ineq(w0: i64, w: &[i64]) -> LinearIneq {
    let n = w.len();
    let mut out = LinearIneq::zero(n);
    let w0b = BigInt::from(w0);
    out.gamma = Rational::from_integer(&w0b * (&w0b - 1));
    for i in 0..n {
        let wi = BigInt::from(w[i]);
        out.alpha[i] = Rational::from_integer(&wi * (&wi + 2 * &w0b - 1));
    }
    for (k, (i, j)) in pairs(n).enumerate() {
        out.beta[k] = Rational::from_integer(BigInt::from(2) * w[i] * w[j]);
    }
    out
}

/// Tightest family whose integrality conditions hold exactly.
pub fn classify_family(w: &RadicalVec) -> FamilyTag {
    let v_integer = w.v.iter().all(Radical::is_integer);
    if v_integer {
        let half = Radical::from_rational(Rational::new(BigInt::one(), BigInt::from(2)));
        let shifted = match (w.v0.to_rational(), half.to_rational()) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        if shifted.is_some_and(|s| s.is_integer()) {
            return FamilyTag::F0;
        }
    }
    let cross_integer = w.v.iter().all(|vi| (vi * &w.v0).scale(&two()).is_integer());
    if v_integer && cross_integer {
        return FamilyTag::F1;
    }
    let squares = w.v.iter().all(|vi| vi.square().is_integer());
    let products = pairs(w.n()).all(|(i, j)| (&w.v[i] * &w.v[j]).scale(&two()).is_integer());
    if squares && products && cross_integer {
        FamilyTag::F2
    } else {
        FamilyTag::General
    }
}

/// `p = g√d` and `r = v/p` with `gcd(r) = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct F2Normal {
    pub p: Radical,
    pub r: Vec<BigInt>,
}

pub fn normalize_f2(w: &RadicalVec) -> Result<F2Normal> {
    if w.v.iter().all(Radical::is_zero) {
        return Err(Error::domain("normalization needs v ≠ 0"));
    }
    if classify_family(w) == FamilyTag::General {
        return Err(Error::domain("vector is not in F2"));
    }
    let d = w.v.iter().find(|x| !x.is_zero()).map(Radical::radicand).unwrap();
    let mut s: Vec<BigInt> = Vec::with_capacity(w.n());
    for x in &w.v {
        if x.is_zero() {
            s.push(BigInt::zero());
            continue;
        }
        if x.radicand() != d || !x.coeff().is_integer() {
            return Err(Error::domain("F2 entries must share one radicand with integer coefficients"));
        }
        s.push(x.coeff().to_integer());
    }
    let g = s.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    let p = Radical::new(Rational::from_integer(g.clone()), d)?;
    let r = s.iter().map(|v| v / &g).collect();
    Ok(F2Normal { p, r })
}

/// Lemma-style decomposition of an `F2` E-CG inequality into two BH inequalities.
#[derive(Clone, Debug)]
pub struct F2Decomposition {
    pub normal: F2Normal,
    /// Integer with `a − ½ ≤ v₀/p ≤ a + ½`, ties to the smaller one.
    pub a: BigInt,
    /// `BH(a, r)`, equal to `E-CG(a − ½, r)`.
    pub bh_minus: LinearIneq,
    pub lambda_minus: Radical,
    /// `BH(a + 1, r)`, equal to `E-CG(a + ½, r)`.
    pub bh_plus: LinearIneq,
    pub lambda_plus: Radical,
    /// `a²p² + a(−2ap² + 2v₀p)`, the constant of the combination.
    pub combined_constant: Rational,
}

fn bh_big(w0: &BigInt, r: &[BigInt]) -> LinearIneq {
    let n = r.len();
    let mut out = LinearIneq::zero(n);
    out.gamma = Rational::from_integer(w0 * (w0 - 1));
    for i in 0..n {
        out.alpha[i] = Rational::from_integer(&r[i] * (&r[i] + 2 * w0 - 1));
    }
    for (k, (i, j)) in pairs(n).enumerate() {
        out.beta[k] = Rational::from_integer(BigInt::from(2) * &r[i] * &r[j]);
    }
    out
}

pub fn decompose_f2(w: &RadicalVec) -> Result<F2Decomposition> {
    let normal = normalize_f2(w)?;
    let p = &normal.p;
    let p2 = p.square();
    let two_v0p = (&w.v0 * p)
        .scale(&two())
        .to_rational()
        .filter(Rational::is_integer)
        .ok_or_else(|| Error::domain("2·v0·p is not an integer"))?;
    // v0/p = 2v0p / (2p²) is rational here.
    let ratio = &two_v0p / (two() * &p2);
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let a = (&ratio - &half).ceil().to_integer();
    let ar = Rational::from_integer(a.clone());
    let v0p = &two_v0p / two();
    let lambda_minus = &p2 / two() + &ar * &p2 - &v0p;
    let lambda_plus = &p2 / two() - &ar * &p2 + &v0p;
    debug_assert!(!lambda_minus.is_negative() && !lambda_plus.is_negative());
    let combined_constant = &ar * &ar * &p2 + &ar * (-(two() * &ar * &p2) + &two_v0p);
    Ok(F2Decomposition {
        bh_minus: bh_big(&a, &normal.r),
        bh_plus: bh_big(&(&a + 1), &normal.r),
        lambda_minus: Radical::from_rational(lambda_minus),
        lambda_plus: Radical::from_rational(lambda_plus),
        combined_constant,
        a,
        normal,
    })
}

/// Eigen-cuts from the negative eigenvalues of the moment matrix, most
/// negative first. `v₀` is the eigenvector's leading coordinate.
pub fn eigvec_cuts(p: &LiftedPoint, max_cuts: usize) -> Result<Vec<LinearIneq>> {
    Ok(eigvec_cuts_float(p, max_cuts, EIGEN_CUT_TOL)?.into_iter().map(|c| c.to_linear()).collect())
}

/// Float variant of [`eigvec_cuts`] with an explicit threshold.
pub fn eigvec_cuts_float(p: &LiftedPoint, max_cuts: usize, tol: f64) -> Result<Vec<EigenCut<f64>>> {
    let e = jacobi_eigen(&p.moment_matrix(), JACOBI_TOL)?;
    let mut out = Vec::new();
    for (val, vec) in e.values.iter().zip(&e.vectors) {
        if *val >= -tol || out.len() == max_cuts {
            break;
        }
        let w = FloatVec::with_err(vec[0], vec[1..].to_vec(), 0.0);
        out.push(eigen_cut_float(&w));
    }
    Ok(out)
}

/// Number of coefficient slots of a dimension-`n` BQP-style inequality.
pub fn slot_count(n: usize) -> usize {
    pair_count(n) + n
}
