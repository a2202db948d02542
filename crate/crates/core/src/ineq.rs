//! Lifted points, linear inequalities over `(x, X)`, and the brute-force
//! oracles everything else is tested against.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{int, parse_rational, rational_to_f64, solve_exact, Rational};
use crate::numerics::lp::{LpProblem, LpRow, LpSession, LpStatus, Relation};

/// Number of pairs `i < j` among `n` indices.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs `i < j` in the order used by `beta`.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// `Σ_{i<j} β_ij X_ij + Σ diag_i X_ii + Σ α_i x_i + γ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearIneq {
    pub n: usize,
    pub gamma: Rational,
    pub alpha: Vec<Rational>,
    pub beta: Vec<Rational>,
    pub diag: Vec<Rational>,
}

impl LinearIneq {
    /// The inequality `0 ≥ 0` in dimension `n`.
    pub fn zero(n: usize) -> Self {
        LinearIneq {
            n,
            gamma: Rational::zero(),
            alpha: vec![Rational::zero(); n],
            beta: vec![Rational::zero(); pair_count(n)],
            diag: vec![Rational::zero(); n],
        }
    }

    /// Builds a diagonal-free inequality from integer data; `beta` lists
    /// `(i, j, value)` with 0-based indices in any order.
    pub fn from_ints(n: usize, gamma: i64, alpha: &[i64], beta: &[(usize, usize, i64)]) -> Self {
        assert_eq!(alpha.len(), n);
        let mut out = LinearIneq::zero(n);
        out.gamma = int(gamma);
        for (a, &v) in out.alpha.iter_mut().zip(alpha) {
            *a = int(v);
        }
        for &(i, j, v) in beta {
            out.set_beta(i, j, int(v));
        }
        out
    }

    pub fn beta_at(&self, i: usize, j: usize) -> &Rational {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        &self.beta[pair_index(self.n, i, j)]
    }

    pub fn set_beta(&mut self, i: usize, j: usize, v: Rational) {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let k = pair_index(self.n, i, j);
        self.beta[k] = v;
    }

    /// No `X_ii` terms, as for inequalities over the Boolean quadric polytope.
    pub fn is_bqp_style(&self) -> bool {
        self.diag.iter().all(Zero::is_zero)
    }

    /// Every non-constant coefficient is zero.
    pub fn is_constant(&self) -> bool {
        self.alpha.iter().chain(&self.beta).chain(&self.diag).all(Zero::is_zero)
    }

    pub fn scale(&self, k: &Rational) -> Self {
        LinearIneq {
            n: self.n,
            gamma: &self.gamma * k,
            alpha: self.alpha.iter().map(|v| v * k).collect(),
            beta: self.beta.iter().map(|v| v * k).collect(),
            diag: self.diag.iter().map(|v| v * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let zip = |a: &[Rational], b: &[Rational]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(LinearIneq {
            n: self.n,
            gamma: &self.gamma + &other.gamma,
            alpha: zip(&self.alpha, &other.alpha),
            beta: zip(&self.beta, &other.beta),
            diag: zip(&self.diag, &other.diag),
        })
    }

    /// Merges each `X_ii` term into `x_i`, which is exact on `X_ii = x_i`.
    pub fn fold_diagonal(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.alpha[i] = &self.alpha[i] + &self.diag[i];
            out.diag[i] = Rational::zero();
        }
        out
    }

    /// Non-constant coefficients as `[β…, α…]`, the slot order used by
    /// [`dominated_by_cone`].
    pub fn slot_vector(&self) -> Vec<Rational> {
        self.beta.iter().chain(&self.alpha).cloned().collect()
    }

    /// Indices with a nonzero coefficient in `α`, `β` or `diag`.
    pub fn support(&self) -> Vec<usize> {
        let mut used = vec![false; self.n];
        for i in 0..self.n {
            if !self.alpha[i].is_zero() || !self.diag[i].is_zero() {
                used[i] = true;
            }
        }
        for (k, (i, j)) in pairs(self.n).enumerate() {
            if !self.beta[k].is_zero() {
                used[i] = true;
                used[j] = true;
            }
        }
        (0..self.n).filter(|&i| used[i]).collect()
    }

    /// Re-indexes an inequality on `k` variables into dimension `n` by sending
    /// local index `a` to `map[a]`.
    pub fn lift(&self, map: &[usize], n: usize) -> Result<Self> {
        if map.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: map.len() });
        }
        if let Some(&bad) = map.iter().find(|&&m| m >= n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
        }
        let mut out = LinearIneq::zero(n);
        out.gamma = self.gamma.clone();
        for a in 0..self.n {
            out.alpha[map[a]] = self.alpha[a].clone();
            out.diag[map[a]] = self.diag[a].clone();
        }
        for (k, (a, b)) in pairs(self.n).enumerate() {
            if !self.beta[k].is_zero() {
                out.set_beta(map[a], map[b], self.beta[k].clone());
            }
        }
        Ok(out)
    }

    /// Restriction to the listed indices; terms outside are dropped.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut out = LinearIneq::zero(k);
        out.gamma = self.gamma.clone();
        for (a, &i) in idx.iter().enumerate() {
            out.alpha[a] = self.alpha[i].clone();
            out.diag[a] = self.diag[i].clone();
        }
        for (a, b) in pairs(k) {
            out.set_beta(a, b, self.beta_at(idx[a], idx[b]).clone());
        }
        out
    }

    pub fn to_dense(&self) -> DenseIneq {
        let f = |v: &[Rational]| v.iter().map(rational_to_f64).collect::<Vec<_>>();
        DenseIneq {
            n: self.n,
            gamma: rational_to_f64(&self.gamma),
            alpha: f(&self.alpha),
            beta: f(&self.beta),
            diag: f(&self.diag),
        }
    }

    /// Left-hand side at a lifted point.
    pub fn evaluate(&self, p: &LiftedPoint) -> Result<f64> {
        evaluate(self, p)
    }

    /// Euclidean norm of the non-constant coefficients.
    pub fn coeff_norm(&self) -> f64 {
        self.to_dense().coeff_norm()
    }

    /// Least common multiple of the denominators of `γ`, `α` and `β`.
    pub fn denominator_lcm(&self) -> BigInt {
        let mut l = BigInt::one();
        for v in self.alpha.iter().chain(&self.beta).chain(std::iter::once(&self.gamma)) {
            l = l.lcm(v.denom());
        }
        l
    }

    /// Multiplies through by the lcm of the denominators, returning integer
    /// `(γ, α, β)`. Diagonal terms must be absent.
    pub fn integer_coeffs(&self) -> (BigInt, Vec<BigInt>, Vec<BigInt>) {
        let l = self.denominator_lcm();
        let lift = |v: &Rational| (v * Rational::from_integer(l.clone())).to_integer();
        (
            lift(&self.gamma),
            self.alpha.iter().map(lift).collect(),
            self.beta.iter().map(lift).collect(),
        )
    }
}

/// A float copy of [`LinearIneq`] for hot evaluation loops.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseIneq {
    pub n: usize,
    pub gamma: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub diag: Vec<f64>,
}

impl DenseIneq {
    pub fn evaluate(&self, p: &LiftedPoint) -> f64 {
        let n = self.n;
        let mut s = self.gamma;
        for i in 0..n {
            s += self.alpha[i] * p.x[i] + self.diag[i] * p.xx[i * n + i];
        }
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                s += self.beta[k] * p.xx[i * n + j];
                k += 1;
            }
        }
        s
    }

    /// Evaluates on the sub-point indexed by `idx` without materializing it.
    pub fn evaluate_on(&self, p: &LiftedPoint, idx: &[usize]) -> f64 {
        let n = p.n();
        let mut s = self.gamma;
        for (a, &i) in idx.iter().enumerate() {
            s += self.alpha[a] * p.x[i] + self.diag[a] * p.xx[i * n + i];
        }
        let mut k = 0;
        for a in 0..idx.len() {
            let row = idx[a] * n;
            for &j in &idx[a + 1..] {
                s += self.beta[k] * p.xx[row + j];
                k += 1;
            }
        }
        s
    }

    pub fn coeff_norm(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).chain(&self.diag).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(x, X)` with `X` symmetric `n×n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    pub x: Vec<f64>,
    pub xx: Vec<f64>,
}

impl LiftedPoint {
    pub fn new(x: Vec<f64>, xx: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if xx.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: xx.len() });
        }
        let mut p = LiftedPoint { x, xx };
        p.symmetrize();
        Ok(p)
    }

    pub fn from_rows(x: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = x.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: rows.len() });
        }
        Self::new(x, rows.iter().flatten().copied().collect())
    }

    /// `(x, xxᵀ)`.
    pub fn rank_one(x: &[f64]) -> Self {
        let n = x.len();
        let mut xx = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                xx[i * n + j] = x[i] * x[j];
            }
        }
        LiftedPoint { x: x.to_vec(), xx }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.xx[i * self.n() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n();
        self.xx[i * n + j] = v;
        self.xx[j * n + i] = v;
    }

    fn symmetrize(&mut self) {
        let n = self.n();
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (self.xx[i * n + j] + self.xx[j * n + i]);
                self.xx[i * n + j] = v;
                self.xx[j * n + i] = v;
            }
        }
    }

    /// `[[1, xᵀ], [x, X]]`.
    pub fn moment_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n + 1]; n + 1];
        m[0][0] = 1.0;
        for i in 0..n {
            m[0][i + 1] = self.x[i];
            m[i + 1][0] = self.x[i];
            for j in 0..n {
                m[i + 1][j + 1] = self.xx[i * n + j];
            }
        }
        m
    }

    /// Moment matrix of the sub-point on `idx`.
    pub fn moment_submatrix(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        self.restrict(idx).moment_matrix()
    }

    pub fn restrict(&self, idx: &[usize]) -> Self {
        let n = self.n();
        let k = idx.len();
        let x = idx.iter().map(|&i| self.x[i]).collect();
        let mut xx = vec![0.0; k * k];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                xx[a * k + b] = self.xx[i * n + j];
            }
        }
        LiftedPoint { x, xx }
    }
}

/// Left-hand side of the `≥ 0` form at `p`.
pub fn evaluate(ineq: &LinearIneq, p: &LiftedPoint) -> Result<f64> {
    if ineq.n != p.n() {
        return Err(Error::DimensionMismatch { expected: ineq.n, found: p.n() });
    }
    Ok(ineq.to_dense().evaluate(p))
}

/// Sense of a quadratic constraint `xᵀQx + cᵀx + d (≤ | =) 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConstraintSense {
    Le,
    Eq,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadConstraint {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub d: f64,
    pub sense: ConstraintSense,
}

impl QuadConstraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        quad_form(&self.q, x) + dot(&self.c, x) + self.d
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let v = self.value(x);
        match self.sense {
            ConstraintSense::Le => v <= tol,
            ConstraintSense::Eq => v.abs() <= tol,
        }
    }
}

/// Minimize `xᵀQ₀x + c₀ᵀx` over `x ∈ [0,1]ⁿ` subject to the quadratic constraints.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QcqpInstance {
    pub n: usize,
    pub q0: Vec<Vec<f64>>,
    pub c0: Vec<f64>,
    pub constraints: Vec<QuadConstraint>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn quad_form(q: &[Vec<f64>], x: &[f64]) -> f64 {
    q.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum()
}

impl QcqpInstance {
    pub fn new(q0: Vec<Vec<f64>>, c0: Vec<f64>) -> Result<Self> {
        let n = c0.len();
        check_square(&q0, n)?;
        Ok(QcqpInstance { n, q0, c0, constraints: Vec::new() })
    }

    /// Binary QP: adds `x_i − x_i² = 0` for every `i`, which lifts to `X_ii = x_i`.
    pub fn binary_qp(q0: Vec<Vec<f64>>, c0: Vec<f64>) -> Result<Self> {
        let mut inst = Self::new(q0, c0)?;
        let n = inst.n;
        for i in 0..n {
            let mut q = vec![vec![0.0; n]; n];
            q[i][i] = -1.0;
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            inst.constraints.push(QuadConstraint { q, c, d: 0.0, sense: ConstraintSense::Eq });
        }
        Ok(inst)
    }

    pub fn add_constraint(&mut self, k: QuadConstraint) -> Result<()> {
        check_square(&k.q, self.n)?;
        if k.c.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: k.c.len() });
        }
        self.constraints.push(k);
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        quad_form(&self.q0, x) + dot(&self.c0, x)
    }

    /// Whether constraint `k` is exactly `x_i − x_i² = 0` for some `i`.
    pub fn binary_index(&self, k: usize) -> Option<usize> {
        let c = &self.constraints[k];
        if c.sense != ConstraintSense::Eq || c.d != 0.0 {
            return None;
        }
        let i = c.c.iter().position(|&v| v != 0.0)?;
        let s = c.c[i];
        let ok_c = c.c.iter().enumerate().all(|(j, &v)| if j == i { true } else { v == 0.0 });
        let ok_q = c.q.iter().enumerate().all(|(a, row)| {
            row.iter().enumerate().all(|(b, &v)| if a == i && b == i { v == -s } else { v == 0.0 })
        });
        (ok_c && ok_q).then_some(i)
    }
}

fn check_square(q: &[Vec<f64>], n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.len() });
    }
    for row in q {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (q[i][j], q[j][i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::domain(format!("matrix is not symmetric at ({}, {})", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// The four McCormick inequalities for each pair:
/// `x_i − X_ij ≥ 0`, `x_j − X_ij ≥ 0`, `X_ij ≥ 0`, `X_ij − x_i − x_j + 1 ≥ 0`.
pub fn mccormick_ineqs(n: usize) -> Vec<LinearIneq> {
    let mut out = Vec::with_capacity(4 * pair_count(n));
    for (i, j) in pairs(n) {
        let mut a = vec![0; n];
        a[i] = 1;
        out.push(LinearIneq::from_ints(n, 0, &a, &[(i, j, -1)]));
        let mut a = vec![0; n];
        a[j] = 1;
        out.push(LinearIneq::from_ints(n, 0, &a, &[(i, j, -1)]));
        out.push(LinearIneq::from_ints(n, 0, &vec![0; n], &[(i, j, 1)]));
        let mut a = vec![0; n];
        a[i] = -1;
        a[j] = -1;
        out.push(LinearIneq::from_ints(n, 1, &a, &[(i, j, 1)]));
    }
    out
}

/// The four triangle inequalities for each triple `i < j < k`.
pub fn triangle_ineqs(n: usize) -> Vec<LinearIneq> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.extend(triangles_for(n, i, j, k));
            }
        }
    }
    out
}

/// Triangle inequalities on one triple, in the order
/// `X_ij − X_ik − X_jk + x_k`, `X_ik − X_ij − X_jk + x_j`,
/// `X_jk − X_ij − X_ik + x_i`, `X_ij + X_ik + X_jk − x_i − x_j − x_k + 1`.
pub fn triangles_for(n: usize, i: usize, j: usize, k: usize) -> [LinearIneq; 4] {
    let e = |idx: &[(usize, i64)]| {
        let mut a = vec![0; n];
        for &(t, v) in idx {
            a[t] = v;
        }
        a
    };
    [
        LinearIneq::from_ints(n, 0, &e(&[(k, 1)]), &[(i, j, 1), (i, k, -1), (j, k, -1)]),
        LinearIneq::from_ints(n, 0, &e(&[(j, 1)]), &[(i, j, -1), (i, k, 1), (j, k, -1)]),
        LinearIneq::from_ints(n, 0, &e(&[(i, 1)]), &[(i, j, -1), (i, k, -1), (j, k, 1)]),
        LinearIneq::from_ints(n, 1, &e(&[(i, -1), (j, -1), (k, -1)]), &[(i, j, 1), (i, k, 1), (j, k, 1)]),
    ]
}

/// Largest `n` the `2ⁿ` enumeration oracles accept.
pub const ENUMERATION_CAP: usize = 24;

/// Visits every `x ∈ {0,1}ⁿ` in Gray-code order with the value of
/// `γ + Σα_i x_i + Σ_{i<j} β_ij x_i x_j`. `beta_full` is the symmetric `n×n`
/// matrix of pair coefficients with zero diagonal. The mask has bit `i` set
/// when `x_i = 1`.
pub fn gray_scan<T>(n: usize, gamma: T, alpha: &[T], beta_full: &[T], mut visit: impl FnMut(T, u64))
where
    T: Copy + std::ops::AddAssign + std::ops::SubAssign,
{
    // gain[i] = α_i + Σ_{j≠i} β_ij x_j, the change from switching x_i on.
    let mut gain: Vec<T> = alpha.to_vec();
    let mut value = gamma;
    let mut mask: u64 = 0;
    visit(value, mask);
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let row = &beta_full[i * n..(i + 1) * n];
        if mask >> i & 1 == 0 {
            value += gain[i];
            mask |= 1 << i;
            for (g, &b) in gain.iter_mut().zip(row) {
                *g += b;
            }
        } else {
            value -= gain[i];
            mask &= !(1 << i);
            for (g, &b) in gain.iter_mut().zip(row) {
                *g -= b;
            }
        }
        visit(value, mask);
    }
}

fn full_beta<T: Copy + Default>(n: usize, beta: &[T]) -> Vec<T> {
    let mut m = vec![T::default(); n * n];
    for (k, (i, j)) in pairs(n).enumerate() {
        m[i * n + j] = beta[k];
        m[j * n + i] = beta[k];
    }
    m
}

/// Minimum of the left-hand side over binary lifted points, exact.
pub fn bqp_minimum(ineq: &LinearIneq) -> Result<(Rational, u64)> {
    if !ineq.is_bqp_style() {
        return Err(Error::domain("validity oracle needs an inequality without X_ii terms"));
    }
    let n = ineq.n;
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap { what: "binary enumeration", size: n, cap: ENUMERATION_CAP });
    }
    let (g, a, b) = ineq.integer_coeffs();
    let scale = ineq.denominator_lcm();
    let fits = std::iter::once(&g).chain(&a).chain(&b).all(|v| v.bits() <= 90);
    let (min, mask) = if fits {
        let g = g.to_i128().unwrap();
        let a: Vec<i128> = a.iter().map(|v| v.to_i128().unwrap()).collect();
        let b: Vec<i128> = b.iter().map(|v| v.to_i128().unwrap()).collect();
        let full = full_beta(n, &b);
        let mut best = (i128::MAX, 0u64);
        gray_scan(n, g, &a, &full, |v, m| {
            if v < best.0 {
                best = (v, m);
            }
        });
        (BigInt::from(best.0), best.1)
    } else {
        let mut best: Option<(BigInt, u64)> = None;
        for m in 0u64..(1u64 << n) {
            let mut v = g.clone();
            for i in 0..n {
                if m >> i & 1 == 1 {
                    v += &a[i];
                }
            }
            for (k, (i, j)) in pairs(n).enumerate() {
                if m >> i & 1 == 1 && m >> j & 1 == 1 {
                    v += &b[k];
                }
            }
            if best.as_ref().map_or(true, |bst| v < bst.0) {
                best = Some((v, m));
            }
        }
        best.unwrap()
    };
    Ok((Rational::new(min, scale), mask))
}

/// Whether the inequality holds at every binary lifted point.
pub fn is_valid_bqp(ineq: &LinearIneq) -> Result<bool> {
    Ok(!bqp_minimum(ineq)?.0.is_negative())
}

/// Mask to a 0/1 vector.
pub fn mask_to_vec(mask: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (mask >> i & 1) as f64).collect()
}

/// Exact minimum of `xᵀQ₀x + c₀ᵀx` over binary `x` that satisfy the
/// instance's constraints. Returns `None` when no binary point is feasible.
pub fn binary_qp_optimum(inst: &QcqpInstance) -> Result<Option<(f64, Vec<f64>)>> {
    let n = inst.n;
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap { what: "binary enumeration", size: n, cap: ENUMERATION_CAP });
    }
    let alpha: Vec<f64> = (0..n).map(|i| inst.q0[i][i] + inst.c0[i]).collect();
    let beta: Vec<f64> = pairs(n).map(|(i, j)| inst.q0[i][j] + inst.q0[j][i]).collect();
    let full = full_beta(n, &beta);
    let generic: Vec<usize> = (0..inst.constraints.len()).filter(|&k| inst.binary_index(k).is_none()).collect();
    let feasible = |m: u64| {
        let x = mask_to_vec(m, n);
        generic.iter().all(|&k| inst.constraints[k].satisfied(&x, 1e-9))
    };
    // Gray-code accumulation drifts slightly, so candidates are re-evaluated
    // directly and the scan keeps a small slack.
    let mut best: Option<(f64, u64)> = None;
    gray_scan(n, 0.0, &alpha, &full, |v, m| {
        let slack = 1e-9 * (1.0 + v.abs());
        if best.map_or(true, |b| v < b.0 + slack) && feasible(m) {
            let exact = inst.objective(&mask_to_vec(m, n));
            if best.map_or(true, |b| exact < b.0) {
                best = Some((exact, m));
            }
        }
    });
    Ok(best.map(|(v, m)| (v, mask_to_vec(m, n))))
}

/// Violation at `p` divided by the norm of the non-constant coefficients;
/// zero when `p` satisfies the inequality to within `10⁻⁹`.
pub fn depth(ineq: &LinearIneq, p: &LiftedPoint) -> Result<f64> {
    let lhs = evaluate(ineq, p)?;
    Ok(depth_from(lhs, ineq.coeff_norm()))
}

pub fn depth_from(lhs: f64, norm: f64) -> f64 {
    if lhs < -1e-9 {
        -lhs / norm
    } else {
        0.0
    }
}

/// Outcome of [`dominated_by_cone`].
#[derive(Clone, Debug)]
pub struct Domination {
    pub dominated: bool,
    /// `λ_k ≥ 0`, one per generator; empty when not dominated.
    pub multipliers: Vec<f64>,
    /// Exact multipliers when the rational refinement succeeded.
    pub exact: Option<Vec<Rational>>,
    /// `max |Σλ_k a_k − a_target|` over all coefficient slots.
    pub residual: f64,
    /// `Σλ_kγ_k`, to compare with the target constant.
    pub combined_constant: f64,
}

impl Domination {
    fn negative() -> Self {
        Domination {
            dominated: false,
            multipliers: Vec::new(),
            exact: None,
            residual: f64::INFINITY,
            combined_constant: f64::INFINITY,
        }
    }
}

/// Decides `∃ λ ≥ 0` with `Σλ_k a_k = a_t` on every non-constant coefficient
/// and `Σλ_kγ_k ≤ γ_t`.
///
/// Solved through the dual LP `max a_tᵀu` s.t. `a_kᵀu ≤ γ_k`, whose row duals
/// are the multipliers. The float answer is refined on its support with exact
/// rational elimination.
pub fn dominated_by_cone(target: &LinearIneq, generators: &[LinearIneq]) -> Result<Domination> {
    if !target.is_bqp_style() {
        return Err(Error::domain("cone domination needs inequalities without X_ii terms"));
    }
    for g in generators {
        if g.n != target.n {
            return Err(Error::DimensionMismatch { expected: target.n, found: g.n });
        }
        if !g.is_bqp_style() {
            return Err(Error::domain("cone domination needs inequalities without X_ii terms"));
        }
    }
    let at = target.slot_vector();
    let slots = at.len();
    let gens: Vec<Vec<Rational>> = generators.iter().map(LinearIneq::slot_vector).collect();
    let at_f: Vec<f64> = at.iter().map(rational_to_f64).collect();
    let gt = rational_to_f64(&target.gamma);

    let mut lp = LpProblem::new(slots);
    for s in 0..slots {
        lp.objective[s] = -at_f[s];
        lp.set_bounds(s, f64::NEG_INFINITY, f64::INFINITY);
    }
    for (g, ineq) in gens.iter().zip(generators) {
        let terms = g.iter().enumerate().map(|(s, v)| (s, rational_to_f64(v)));
        lp.add_row(LpRow::new(terms, Relation::Le, rational_to_f64(&ineq.gamma)));
    }
    let sol = LpSession::new(lp)?.solve()?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Ok(Domination::negative()),
        LpStatus::Infeasible => {
            return Err(Error::LpFailure("generator system has no common point".into()))
        }
        LpStatus::IterLimit => return Err(Error::LpFailure("iteration limit in domination LP".into())),
    }
    let best = -sol.objective;
    let lambda: Vec<f64> = sol.row_duals.iter().map(|y| (-y).max(0.0)).collect();
    let float_residual = residual_of(&lambda, &gens, &at_f);
    let combined: f64 = lambda.iter().zip(generators).map(|(l, g)| l * rational_to_f64(&g.gamma)).sum();
    let tol = 1e-5 * (1.0 + gt.abs());

    // Exact refinement on the support.
    let support: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k] > 1e-9).collect();
    if best <= gt + tol && support.len() <= slots.max(1) {
        let a: Vec<Vec<Rational>> = (0..slots).map(|s| support.iter().map(|&k| gens[k][s].clone()).collect()).collect();
        if let Some(ls) = solve_exact(&a, &at) {
            if ls.iter().all(|v| !v.is_negative()) {
                let c: Rational = ls.iter().zip(&support).map(|(l, &k)| l * &generators[k].gamma).sum();
                if c <= target.gamma {
                    let mut exact = vec![Rational::zero(); generators.len()];
                    for (l, &k) in ls.into_iter().zip(&support) {
                        exact[k] = l;
                    }
                    let mult: Vec<f64> = exact.iter().map(rational_to_f64).collect();
                    return Ok(Domination {
                        dominated: true,
                        residual: residual_of(&mult, &gens, &at_f),
                        multipliers: mult,
                        exact: Some(exact),
                        combined_constant: rational_to_f64(&c),
                    });
                } else if (best - gt).abs() <= tol {
                    return Ok(Domination::negative());
                }
            }
        }
    }
    if best <= gt + 1e-9 * (1.0 + gt.abs()) {
        Ok(Domination {
            dominated: true,
            multipliers: lambda,
            exact: None,
            residual: float_residual,
            combined_constant: combined,
        })
    } else {
        Ok(Domination::negative())
    }
}

fn residual_of(lambda: &[f64], gens: &[Vec<Rational>], at: &[f64]) -> f64 {
    let mut acc: Vec<f64> = at.iter().map(|v| -v).collect();
    for (l, g) in lambda.iter().zip(gens) {
        if *l == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(g) {
            *a += l * rational_to_f64(v);
        }
    }
    acc.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn fmt_list(f: &mut fmt::Formatter<'_>, v: &[Rational]) -> fmt::Result {
    for (k, r) in v.iter().enumerate() {
        if k > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{r}")?;
    }
    Ok(())
}

/// `n; gamma; alpha[a1 a2 …]; beta[(i,j)=v …]` with 1-based indices and only
/// nonzero `β` listed, plus `; diag[…]` when any diagonal term is present.
/// Serialized as its text form.
impl serde::Serialize for LinearIneq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for LinearIneq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for LinearIneq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; {}; alpha[", self.n, self.gamma)?;
        fmt_list(f, &self.alpha)?;
        f.write_str("]; beta[")?;
        let mut first = true;
        for (k, (i, j)) in pairs(self.n).enumerate() {
            if self.beta[k].is_zero() {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "({},{})={}", i + 1, j + 1, self.beta[k])?;
        }
        f.write_str("]")?;
        if !self.is_bqp_style() {
            f.write_str("; diag[")?;
            fmt_list(f, &self.diag)?;
            f.write_str("]")?;
        }
        Ok(())
    }
}

fn bracketed<'a>(field: &'a str, tag: &str) -> Result<&'a str> {
    field
        .trim()
        .strip_prefix(tag)
        .and_then(|s| s.strip_prefix('['))
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::domain(format!("expected `{tag}[...]`, found `{}`", field.trim())))
}

fn parse_list(body: &str, n: usize, what: &str) -> Result<Vec<Rational>> {
    let v: Vec<Rational> = body.split_whitespace().map(parse_rational).collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::domain(format!("{what} has {} entries, expected {n}", v.len())));
    }
    Ok(v)
}

impl FromStr for LinearIneq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split(';').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(Error::domain(format!("expected 4 or 5 `;`-separated fields in `{s}`")));
        }
        let n: usize = fields[0].trim().parse().map_err(|_| Error::domain("bad dimension"))?;
        let mut out = LinearIneq::zero(n);
        out.gamma = parse_rational(fields[1])?;
        out.alpha = parse_list(bracketed(fields[2], "alpha")?, n, "alpha")?;
        for item in bracketed(fields[3], "beta")?.split_whitespace() {
            let bad = || Error::domain(format!("bad beta entry `{item}`"));
            let (key, val) = item.split_once('=').ok_or_else(bad)?;
            let key = key.strip_prefix('(').and_then(|k| k.strip_suffix(')')).ok_or_else(bad)?;
            let (i, j) = key.split_once(',').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(bad());
            }
            out.set_beta(i - 1, j - 1, parse_rational(val)?);
        }
        if fields.len() == 5 {
            out.diag = parse_list(bracketed(fields[4], "diag")?, n, "diag")?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn lemma_i() -> LinearIneq {
        LinearIneq::from_ints(2, 0, &[7, 10], &[(0, 1, -16)])
    }

    #[test]
    fn pair_indexing_is_lexicographic() {
        let n = 5;
        for (k, (i, j)) in pairs(n).enumerate() {
            assert_eq!(pair_index(n, i, j), k);
        }
        assert_eq!(pairs(n).count(), pair_count(n));
    }

    #[test]
    fn evaluate_examples() {
        let one = LiftedPoint::rank_one(&[1.0, 1.0]);
        let mc = LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]);
        assert_eq!(evaluate(&mc, &one).unwrap(), 1.0);
        let tri = &triangle_ineqs(3)[3];
        assert_eq!(evaluate(tri, &LiftedPoint::rank_one(&[0.0; 3])).unwrap(), 1.0);
        assert_eq!(evaluate(&lemma_i(), &one).unwrap(), 1.0);
        let wrong = LiftedPoint::rank_one(&[0.0; 3]);
        assert!(matches!(evaluate(&mc, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn generator_counts() {
        assert_eq!(mccormick_ineqs(2).len(), 4);
        assert_eq!(mccormick_ineqs(10).len(), 180);
        assert_eq!(triangle_ineqs(3).len(), 4);
        assert_eq!(triangle_ineqs(6).len(), 80);
    }

    #[test]
    fn generators_are_valid_canonical_and_distinct() {
        for n in 2..=6 {
            let mut all = mccormick_ineqs(n);
            all.extend(triangle_ineqs(n));
            for ineq in &all {
                assert!(is_valid_bqp(ineq).unwrap(), "{ineq}");
                let (g, a, b) = ineq.integer_coeffs();
                let gcd = std::iter::once(&g).chain(&a).chain(&b).fold(BigInt::zero(), |acc, v| acc.gcd(v));
                assert_eq!(gcd, BigInt::one());
                assert!(ineq.gamma.is_integer());
            }
            let set: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(set.len(), all.len());
        }
    }

    #[test]
    fn validity_examples() {
        assert!(is_valid_bqp(&lemma_i()).unwrap());
        let mut half = LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]);
        half.gamma = rat(-1, 2);
        assert!(!is_valid_bqp(&half).unwrap());
        let mut diag = LinearIneq::zero(2);
        diag.diag[0] = int(1);
        assert!(is_valid_bqp(&diag).is_err());
        assert!(matches!(is_valid_bqp(&LinearIneq::zero(25)), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn huge_coefficients_use_the_exact_path() {
        let big = BigInt::from(1u8) << 100u32;
        let mut ineq = LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]);
        ineq.beta[0] = Rational::from_integer(big.clone());
        ineq.alpha[0] = Rational::from_integer(-big);
        assert!(!is_valid_bqp(&ineq).unwrap());
        ineq.gamma = ineq.alpha[0].clone() * int(-1);
        assert!(is_valid_bqp(&ineq).unwrap());
    }

    #[test]
    fn binary_qp_examples() {
        let z = QcqpInstance::new(vec![vec![0.0; 3]; 3], vec![0.0; 3]).unwrap();
        assert_eq!(binary_qp_optimum(&z).unwrap().unwrap().0, 0.0);
        let n = 5;
        let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let inst = QcqpInstance::binary_qp(id, vec![-2.0; n]).unwrap();
        let (v, x) = binary_qp_optimum(&inst).unwrap().unwrap();
        assert_eq!(v, -(n as f64));
        assert_eq!(x, vec![1.0; n]);
    }

    #[test]
    fn binary_qp_respects_extra_constraints() {
        // min -x1 - x2 with x1 + x2 <= 1.
        let mut inst = QcqpInstance::new(vec![vec![0.0; 2]; 2], vec![-1.0, -1.0]).unwrap();
        inst.add_constraint(QuadConstraint {
            q: vec![vec![0.0; 2]; 2],
            c: vec![1.0, 1.0],
            d: -1.0,
            sense: ConstraintSense::Le,
        })
        .unwrap();
        assert_eq!(binary_qp_optimum(&inst).unwrap().unwrap().0, -1.0);
    }

    #[test]
    fn random_binary_qp_matches_direct_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = 8;
            let mut q = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-10.0..10.0);
                    q[i][j] = v;
                    q[j][i] = v;
                }
            }
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let inst = QcqpInstance::binary_qp(q, c).unwrap();
            let mut best = f64::INFINITY;
            for m in 0u64..256 {
                best = best.min(inst.objective(&mask_to_vec(m, n)));
            }
            let got = binary_qp_optimum(&inst).unwrap().unwrap().0;
            assert!((got - best).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_examples() {
        let mc = LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]);
        let mut p = LiftedPoint::rank_one(&[0.0, 0.0]);
        p.set(0, 1, -1.0);
        assert_eq!(depth(&mc, &p).unwrap(), 1.0);
        let mut q = LiftedPoint::rank_one(&[0.0, 0.0]);
        q.set(0, 1, 0.5);
        let d = depth(&lemma_i(), &q).unwrap();
        assert!((d - 8.0 / (405f64).sqrt()).abs() < 1e-15);
        let d2 = depth(&lemma_i().scale(&int(2)), &q).unwrap();
        assert!((d - d2).abs() < 1e-12);
        assert_eq!(depth(&mc, &LiftedPoint::rank_one(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn domination_examples() {
        let mc = LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]);
        let d = dominated_by_cone(&mc, &[lemma_i(), mc.clone()]).unwrap();
        assert!(d.dominated);
        assert_eq!(d.exact.as_ref().unwrap()[1], int(1));
        let x1 = LinearIneq::from_ints(2, 0, &[1, 0], &[]);
        assert!(!dominated_by_cone(&mc, &[x1]).unwrap().dominated);
        // Constant too strong: X12 - 1 >= 0 is not implied by X12 >= 0.
        let mut strong = mc.clone();
        strong.gamma = int(-1);
        assert!(!dominated_by_cone(&strong, &[mc.clone()]).unwrap().dominated);
        // Weaker constant is implied.
        let mut weak = mc.clone();
        weak.gamma = int(3);
        assert!(dominated_by_cone(&weak, &[mc]).unwrap().dominated);
    }

    #[test]
    fn text_form_round_trip() {
        let t = lemma_i();
        let s = t.to_string();
        assert_eq!(s, "2; 0; alpha[7 10]; beta[(1,2)=-16]");
        assert_eq!(s.parse::<LinearIneq>().unwrap(), t);
        let mut d = LinearIneq::zero(2);
        d.diag = vec![rat(4, 1), rat(16, 1)];
        d.gamma = rat(9, 16);
        let s = d.to_string();
        assert!(s.ends_with("; diag[4 16]"));
        assert_eq!(s.parse::<LinearIneq>().unwrap(), d);
        assert!("2; 0; alpha[1]; beta[]".parse::<LinearIneq>().is_err());
        assert!("2; 0; alpha[1 2]; beta[(1,1)=3]".parse::<LinearIneq>().is_err());
    }

    fn arb_ineq(n: usize) -> impl Strategy<Value = LinearIneq> {
        (
            -5i64..=5,
            proptest::collection::vec(-5i64..=5, n),
            proptest::collection::vec(-5i64..=5, pair_count(n)),
        )
            .prop_map(move |(g, a, b)| {
                let beta: Vec<(usize, usize, i64)> = pairs(n).zip(b).map(|((i, j), v)| (i, j, v)).collect();
                LinearIneq::from_ints(n, g, &a, &beta)
            })
    }

    proptest! {
        #[test]
        fn valid_inequalities_hold_on_rank_one_box_points(ineq in arb_ineq(4), seed in any::<u64>()) {
            if is_valid_bqp(&ineq).unwrap() {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let dense = ineq.to_dense();
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                    prop_assert!(dense.evaluate(&LiftedPoint::rank_one(&x)) >= -1e-9);
                }
            }
        }

        #[test]
        fn depth_is_scale_invariant(ineq in arb_ineq(3), k in 1i64..50, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let mut p = LiftedPoint::rank_one(&x);
            p.set(0, 1, rng.gen_range(-1.0..1.0));
            let a = depth(&ineq, &p).unwrap();
            let b = depth(&ineq.scale(&int(k)), &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn domination_certificate_holds_pointwise(t in arb_ineq(3), g1 in arb_ineq(3), g2 in arb_ineq(3), g3 in arb_ineq(3)) {
            let gens = vec![g1, g2, g3];
            let d = dominated_by_cone(&t, &gens).unwrap();
            if d.dominated {
                for m in 0u64..8 {
                    let p = LiftedPoint::rank_one(&mask_to_vec(m, 3));
                    let lhs = evaluate(&t, &p).unwrap();
                    let comb: f64 = d.multipliers.iter().zip(&gens).map(|(l, g)| l * evaluate(g, &p).unwrap()).sum();
                    prop_assert!(lhs >= comb - 1e-7);
                }
            }
        }

        #[test]
        fn text_round_trip_prop(ineq in arb_ineq(5)) {
            prop_assert_eq!(ineq.to_string().parse::<LinearIneq>().unwrap(), ineq);
        }
    }
}
