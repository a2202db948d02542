//! Dense revised dual simplex for bounded LPs.
//!
//! Every constraint, including each finite variable bound, is handled in the
//! form `gᵀx ≥ h`. A basis is a set of `n` such constraints whose normals are
//! linearly independent; the vertex is `x = B⁻¹h` and the basis is dual
//! feasible when `c = Bᵀy` with `y ≥ 0`. The box vertex that puts every
//! variable at the bound favoured by its cost is dual feasible, so no phase one
//! is needed, and appending rows keeps the current basis dual feasible. That
//! makes re-solving after adding cuts a warm start.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// One sparse constraint row `aᵀx rel rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

impl LpRow {
    pub fn new(terms: impl IntoIterator<Item = (usize, f64)>, rel: Relation, rhs: f64) -> Self {
        let mut pairs: Vec<(usize, f64)> = terms.into_iter().filter(|t| t.1 != 0.0).collect();
        pairs.sort_by_key(|t| t.0);
        let mut idx: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut val: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        LpRow { idx, val, rel, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

/// `min cᵀx` subject to rows and `lower ≤ x ≤ upper`. Infinite bounds mark
/// free directions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub col_names: Option<Vec<String>>,
}

impl LpProblem {
    /// `n` variables in `[0, ∞)` with zero cost.
    pub fn new(n: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            col_names: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn add_row(&mut self, row: LpRow) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for r in &self.rows {
            let lhs = r.dot(x);
            let gap = match r.rel {
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for v in [self.lower.len(), self.upper.len()] {
            if v != n {
                return Err(Error::DimensionMismatch { expected: n, found: v });
            }
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::domain(format!("bad bounds on column {j}")));
            }
        }
        for r in &self.rows {
            if r.idx.len() != r.val.len() {
                return Err(Error::DimensionMismatch { expected: r.idx.len(), found: r.val.len() });
            }
            if let Some(&bad) = r.idx.iter().find(|&&i| i >= n) {
                return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
            }
            if !r.rhs.is_finite() || r.val.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("non-finite row data"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers with `c = Σ row_duals[i]·a_i + reduced_costs`:
    /// nonnegative on `≥` rows, nonpositive on `≤` rows.
    pub row_duals: Vec<f64>,
    /// Bound multipliers, positive at a lower bound and negative at an upper one.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// `Σ yᵢbᵢ + Σ dⱼ·bound_j`, the dual objective of the returned multipliers.
    pub fn dual_objective(&self, p: &LpProblem) -> f64 {
        let mut s: f64 = self.row_duals.iter().zip(&p.rows).map(|(y, r)| y * r.rhs).sum();
        for (j, &d) in self.reduced_costs.iter().enumerate() {
            if d > 0.0 {
                s += d * p.lower[j];
            } else if d < 0.0 {
                s += d * p.upper[j];
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub dual_tol: f64,
    /// Stand-in bound for infinite ones; binding artificials mean unbounded.
    pub big_m: f64,
    pub max_iters: Option<usize>,
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-9,
            feas_tol: 1e-9,
            dual_tol: 1e-9,
            big_m: 1e6,
            max_iters: None,
            refactor_every: 64,
        }
    }
}

/// Common contract for the bundled solver and any external adapter.
pub trait LpSolver {
    fn solve(&mut self, problem: &LpProblem) -> Result<LpSolution>;
}

/// The bundled dense dual simplex.
#[derive(Clone, Debug, Default)]
pub struct DenseSimplex {
    pub options: SimplexOptions,
}

impl LpSolver for DenseSimplex {
    fn solve(&mut self, problem: &LpProblem) -> Result<LpSolution> {
        LpSession::with_options(problem.clone(), self.options.clone())?.solve()
    }
}

pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    LpSession::new(problem.clone())?.solve()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cons {
    Lo(usize),
    Up(usize),
    /// Row `i` read as `aᵀx ≥ b`.
    Ge(usize),
    /// Row `i` read as `−aᵀx ≥ −b`.
    Le(usize),
}

/// A problem plus a live basis. Rows may be appended between solves.
#[derive(Clone, Debug)]
pub struct LpSession {
    problem: LpProblem,
    opts: SimplexOptions,
    lo: Vec<f64>,
    up: Vec<f64>,
    lo_art: Vec<bool>,
    up_art: Vec<bool>,
    row_norm: Vec<f64>,
    basis: Vec<Cons>,
    /// Position in `basis` of each constraint, if basic.
    pos_lo: Vec<Option<usize>>,
    pos_up: Vec<Option<usize>>,
    pos_ge: Vec<Option<usize>>,
    pos_le: Vec<Option<usize>>,
    /// Row-major `B⁻¹`, where row `k` of `B` is the normal of `basis[k]`.
    binv: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

impl LpSession {
    pub fn new(problem: LpProblem) -> Result<Self> {
        Self::with_options(problem, SimplexOptions::default())
    }

    pub fn with_options(problem: LpProblem, opts: SimplexOptions) -> Result<Self> {
        problem.validate()?;
        let n = problem.num_vars();
        let mut s = LpSession {
            lo: vec![0.0; n],
            up: vec![0.0; n],
            lo_art: vec![false; n],
            up_art: vec![false; n],
            row_norm: Vec::new(),
            basis: Vec::with_capacity(n),
            pos_lo: vec![None; n],
            pos_up: vec![None; n],
            pos_ge: Vec::new(),
            pos_le: Vec::new(),
            binv: vec![0.0; n * n],
            x: vec![0.0; n],
            y: vec![0.0; n],
            since_refactor: 0,
            iterations: 0,
            problem,
            opts,
        };
        for j in 0..n {
            let (l, u) = (s.problem.lower[j], s.problem.upper[j]);
            s.lo_art[j] = !l.is_finite();
            s.up_art[j] = !u.is_finite();
            s.lo[j] = if l.is_finite() { l } else { -s.opts.big_m };
            s.up[j] = if u.is_finite() { u } else { s.opts.big_m };
            if s.lo[j] > s.up[j] {
                // Only reachable with an artificial bound on the wrong side.
                if s.lo_art[j] {
                    s.lo[j] = s.up[j] - s.opts.big_m;
                } else {
                    s.up[j] = s.lo[j] + s.opts.big_m;
                }
            }
        }
        let rows = std::mem::take(&mut s.problem.rows);
        for r in &rows {
            s.register_row(r);
        }
        s.problem.rows = rows;
        // Box vertex: lower bound for nonnegative cost, upper otherwise.
        for j in 0..n {
            let c = s.problem.objective[j];
            if c >= 0.0 {
                s.basis.push(Cons::Lo(j));
                s.pos_lo[j] = Some(j);
                s.binv[j * n + j] = 1.0;
                s.x[j] = s.lo[j];
                s.y[j] = c;
            } else {
                s.basis.push(Cons::Up(j));
                s.pos_up[j] = Some(j);
                s.binv[j * n + j] = -1.0;
                s.x[j] = s.up[j];
                s.y[j] = -c;
            }
        }
        Ok(s)
    }

    fn register_row(&mut self, r: &LpRow) {
        self.row_norm.push(r.val.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300));
        self.pos_ge.push(None);
        self.pos_le.push(None);
    }

    pub fn problem(&self) -> &LpProblem {
        &self.problem
    }

    pub fn num_vars(&self) -> usize {
        self.problem.num_vars()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Appends rows; the current basis stays dual feasible.
    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = LpRow>) -> Result<()> {
        let n = self.num_vars();
        for r in rows {
            if let Some(&bad) = r.idx.iter().find(|&&i| i >= n) {
                return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
            }
            if !r.rhs.is_finite() || r.val.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("non-finite row data"));
            }
            self.register_row(&r);
            self.problem.rows.push(r);
        }
        Ok(())
    }

    fn rhs(&self, c: Cons) -> f64 {
        match c {
            Cons::Lo(j) => self.lo[j],
            Cons::Up(j) => -self.up[j],
            Cons::Ge(i) => self.problem.rows[i].rhs,
            Cons::Le(i) => -self.problem.rows[i].rhs,
        }
    }

    fn set_pos(&mut self, c: Cons, p: Option<usize>) {
        match c {
            Cons::Lo(j) => self.pos_lo[j] = p,
            Cons::Up(j) => self.pos_up[j] = p,
            Cons::Ge(i) => self.pos_ge[i] = p,
            Cons::Le(i) => self.pos_le[i] = p,
        }
    }

    fn is_basic(&self, c: Cons) -> bool {
        match c {
            Cons::Lo(j) => self.pos_lo[j].is_some(),
            Cons::Up(j) => self.pos_up[j].is_some(),
            Cons::Ge(i) => self.pos_ge[i].is_some(),
            Cons::Le(i) => self.pos_le[i].is_some(),
        }
    }

    /// `t = B⁻ᵀg`.
    fn btran(&self, c: Cons) -> Vec<f64> {
        let n = self.num_vars();
        let mut t = vec![0.0; n];
        let mut axpy = |j: usize, s: f64| {
            let row = &self.binv[j * n..(j + 1) * n];
            for (tk, b) in t.iter_mut().zip(row) {
                *tk += s * b;
            }
        };
        match c {
            Cons::Lo(j) => axpy(j, 1.0),
            Cons::Up(j) => axpy(j, -1.0),
            Cons::Ge(i) | Cons::Le(i) => {
                let s = if matches!(c, Cons::Ge(_)) { 1.0 } else { -1.0 };
                let r = &self.problem.rows[i];
                for (&j, &v) in r.idx.iter().zip(&r.val) {
                    axpy(j, s * v);
                }
            }
        }
        t
    }

    /// Rebuilds `B⁻¹`, `x` and `y` from the basis list.
    fn refactor(&mut self) -> Result<()> {
        let n = self.num_vars();
        let mut b = vec![0.0; n * n];
        for (k, &c) in self.basis.iter().enumerate() {
            match c {
                Cons::Lo(j) => b[k * n + j] = 1.0,
                Cons::Up(j) => b[k * n + j] = -1.0,
                Cons::Ge(i) | Cons::Le(i) => {
                    let s = if matches!(c, Cons::Ge(_)) { 1.0 } else { -1.0 };
                    let r = &self.problem.rows[i];
                    for (&j, &v) in r.idx.iter().zip(&r.val) {
                        b[k * n + j] = s * v;
                    }
                }
            }
        }
        self.binv = invert(b, n).ok_or_else(|| Error::LpFailure("singular basis on refactorization".into()))?;
        self.recompute_primal_dual();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_primal_dual(&mut self) {
        let n = self.num_vars();
        let h: Vec<f64> = self.basis.iter().map(|&c| self.rhs(c)).collect();
        for i in 0..n {
            let row = &self.binv[i * n..(i + 1) * n];
            self.x[i] = row.iter().zip(&h).map(|(a, b)| a * b).sum();
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let ci = self.problem.objective[i];
            if ci == 0.0 {
                continue;
            }
            let row = &self.binv[i * n..(i + 1) * n];
            for (yk, b) in y.iter_mut().zip(row) {
                *yk += ci * b;
            }
        }
        for v in &mut y {
            if *v < 0.0 && *v > -1e-7 {
                *v = 0.0;
            }
        }
        self.y = y;
    }

    /// Most violated nonbasic constraint, or the first one under Bland's rule.
    fn price(&self, bland: bool) -> Option<(Cons, f64)> {
        let n = self.num_vars();
        let tol = self.opts.feas_tol;
        let mut best: Option<(Cons, f64, f64)> = None;
        let mut candidates = (0..n)
            .flat_map(|j| {
                let v = self.x[j];
                let lo = self.pos_lo[j].is_none().then(|| (Cons::Lo(j), v, self.lo[j], 1.0));
                let up = self.pos_up[j].is_none().then(|| (Cons::Up(j), -v, -self.up[j], 1.0));
                lo.into_iter().chain(up)
            })
            .chain(self.problem.rows.iter().enumerate().flat_map(|(i, r)| {
                let ge = r.rel != Relation::Le && self.pos_ge[i].is_none();
                let le = r.rel != Relation::Ge && self.pos_le[i].is_none();
                let lhs = if ge || le { r.dot(&self.x) } else { 0.0 };
                let norm = self.row_norm[i];
                let a = ge.then(|| (Cons::Ge(i), lhs, r.rhs, norm));
                let b = le.then(|| (Cons::Le(i), -lhs, -r.rhs, norm));
                a.into_iter().chain(b)
            }));
        for (c, lhs, rhs, norm) in &mut candidates {
            let viol = rhs - lhs;
            if viol > tol * (1.0 + rhs.abs()) {
                if bland {
                    return Some((c, viol));
                }
                let score = viol / norm;
                if best.map_or(true, |b| score > b.2) {
                    best = Some((c, viol, score));
                }
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Runs dual simplex pivots from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution> {
        let n = self.num_vars();
        let m = self.problem.num_rows();
        let max_iters = self.opts.max_iters.unwrap_or(50 * (n + m) + 10_000);
        let bland_after = 5 * (n + m).max(1);
        let mut degenerate = 0usize;
        let mut iters_here = 0usize;
        if self.since_refactor > 0 {
            self.refactor()?;
        }
        loop {
            let bland = degenerate > bland_after;
            let Some((enter, viol)) = self.price(bland) else {
                if self.since_refactor > 0 {
                    // Confirm optimality against a fresh factorization.
                    self.refactor()?;
                    if self.price(false).is_some() {
                        continue;
                    }
                }
                return Ok(self.finish(self.status_at_optimum()));
            };
            if iters_here >= max_iters {
                return Ok(self.finish(LpStatus::IterLimit));
            }
            let t = self.btran(enter);
            // Ratio test over y_k / t_k with t_k > 0, two passes for stability.
            let ptol = self.opts.pivot_tol;
            let dtol = self.opts.dual_tol;
            let mut bound = f64::INFINITY;
            for k in 0..n {
                if t[k] > ptol {
                    bound = bound.min((self.y[k].max(0.0) + dtol) / t[k]);
                }
            }
            if !bound.is_finite() {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Ok(self.finish(LpStatus::Infeasible));
            }
            let mut leave: Option<usize> = None;
            for k in 0..n {
                if t[k] > ptol && self.y[k].max(0.0) / t[k] <= bound {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.cons_order(self.basis[k]) < self.cons_order(self.basis[l]),
                        Some(l) => t[k] > t[l],
                    };
                    if better {
                        leave = Some(k);
                    }
                }
            }
            let k = leave.expect("ratio test found a finite bound");
            let tk = t[k];
            let theta = self.y[k].max(0.0) / tk;
            if theta * viol <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            // Dual update.
            for (i, yi) in self.y.iter_mut().enumerate() {
                *yi -= theta * t[i];
                if *yi < 0.0 {
                    *yi = 0.0;
                }
            }
            self.y[k] = theta;
            // Primal step along column k of B⁻¹.
            let sigma = viol / tk;
            let col: Vec<f64> = (0..n).map(|i| self.binv[i * n + k]).collect();
            for (xi, ci) in self.x.iter_mut().zip(&col) {
                *xi += sigma * ci;
            }
            // B'⁻¹ = B⁻¹ − col·(t − e_k)ᵀ / t_k.
            let mut w = t;
            w[k] -= 1.0;
            for v in &mut w {
                *v /= tk;
            }
            for i in 0..n {
                let ci = col[i];
                if ci == 0.0 {
                    continue;
                }
                let row = &mut self.binv[i * n..(i + 1) * n];
                for (b, wv) in row.iter_mut().zip(&w) {
                    *b -= ci * wv;
                }
            }
            let old = self.basis[k];
            self.set_pos(old, None);
            self.basis[k] = enter;
            self.set_pos(enter, Some(k));
            self.iterations += 1;
            iters_here += 1;
            self.since_refactor += 1;
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
        }
    }

    fn cons_order(&self, c: Cons) -> usize {
        match c {
            Cons::Lo(j) => 2 * j,
            Cons::Up(j) => 2 * j + 1,
            Cons::Ge(i) => 2 * self.num_vars() + 2 * i,
            Cons::Le(i) => 2 * self.num_vars() + 2 * i + 1,
        }
    }

    fn status_at_optimum(&self) -> LpStatus {
        let scale = 1.0 + self.problem.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        for (k, &c) in self.basis.iter().enumerate() {
            let artificial = match c {
                Cons::Lo(j) => self.lo_art[j],
                Cons::Up(j) => self.up_art[j],
                _ => false,
            };
            if artificial && self.y[k] > 1e-9 * scale {
                return LpStatus::Unbounded;
            }
        }
        LpStatus::Optimal
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let n = self.num_vars();
        let m = self.problem.num_rows();
        let mut row_duals = vec![0.0; m];
        let mut reduced_costs = vec![0.0; n];
        for (k, &c) in self.basis.iter().enumerate() {
            let y = self.y[k];
            match c {
                Cons::Lo(j) => reduced_costs[j] += y,
                Cons::Up(j) => reduced_costs[j] -= y,
                Cons::Ge(i) => row_duals[i] += y,
                Cons::Le(i) => row_duals[i] -= y,
            }
        }
        let objective = self.problem.objective_value(&self.x);
        LpSolution {
            status,
            x: self.x.clone(),
            objective,
            row_duals,
            reduced_costs,
            iterations: self.iterations,
        }
    }

    /// Whether `x` currently sits on the given row.
    pub fn row_is_active(&self, i: usize) -> bool {
        self.is_basic(Cons::Ge(i)) || self.is_basic(Cons::Le(i))
    }
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
fn invert(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let (p, best) = (c..n)
            .map(|r| (r, a[r * n + c].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if best < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
                inv.swap(p * n + k, c * n + k);
            }
        }
        let piv = a[c * n + c];
        for k in 0..n {
            a[c * n + k] /= piv;
            inv[c * n + k] /= piv;
        }
        for r in 0..n {
            if r == c {
                continue;
            }
            let f = a[r * n + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] -= f * a[c * n + k];
                inv[r * n + k] -= f * inv[c * n + k];
            }
        }
    }
    Some(inv)
}
