//! Separation of Boros–Hammer inequalities: the bounded integer quadratic
//! program over `(w₀, w)`, greedy eigenvalue-based index refinement and the
//! randomized sampling loop that feeds a relaxation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::canonicalize;
use crate::eigencg::bh_ineq;
use crate::error::{Error, Result};
use crate::ineq::{LiftedPoint, LinearIneq};
use crate::numerics::min_eigenvalue;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatorConfig {
    /// Lower bound on every `wᵢ`.
    pub lower: i64,
    pub upper: i64,
    /// Cap on every `|wᵢ|`.
    pub u_bar: i64,
    /// Cap on `Σ|wᵢ|`.
    pub u_hat: i64,
    /// Report `(w₀, w)` with objective strictly below this.
    pub viol_tol: f64,
    /// Per separation problem; `None` runs to completion.
    pub time_limit: Option<Duration>,
    pub refine_fraction: f64,
    pub select_fraction: f64,
    pub samples_per_round: usize,
    pub max_rounds: usize,
    pub stall_rounds: usize,
    /// Floor on the refined and sampled subset sizes; below three indices
    /// every BH inequality is implied by McCormick.
    pub min_subset: usize,
    /// Most violated solutions kept per separation problem.
    pub max_cuts_per_problem: usize,
    pub seed: u64,
}

impl Default for SeparatorConfig {
    fn default() -> Self {
        SeparatorConfig {
            lower: -2,
            upper: 2,
            u_bar: 2,
            u_hat: 10,
            viol_tol: -0.01,
            time_limit: Some(Duration::from_secs(10)),
            refine_fraction: 0.15,
            select_fraction: 0.10,
            samples_per_round: 100,
            max_rounds: 30,
            stall_rounds: 2,
            min_subset: 3,
            max_cuts_per_problem: 100,
            seed: 0,
        }
    }
}

impl SeparatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower <= 0 && 0 <= self.upper) {
            return Err(Error::domain("separator bounds must satisfy L ≤ 0 ≤ U"));
        }
        if !(self.viol_tol < 0.0) {
            return Err(Error::domain("violation tolerance must be negative"));
        }
        for f in [self.refine_fraction, self.select_fraction] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::domain("fractions must lie in (0, 1]"));
            }
        }
        if self.u_bar < 0 || self.u_hat < 0 {
            return Err(Error::domain("sparsity caps must be nonnegative"));
        }
        Ok(())
    }

    /// Largest `|wᵢ|` the box and per-coordinate cap allow.
    fn coord_cap(&self) -> i64 {
        self.upper.max(-self.lower).min(self.u_bar)
    }
}

/// `w₀(w₀−1) + Σ wᵢ(wᵢ+2w₀−1)x̂ᵢ + Σᵢ<ⱼ 2wᵢwⱼX̂ᵢⱼ` over `p` restricted to
/// `indices`.
pub fn bh_objective(w0: i64, w: &[i64], p: &LiftedPoint, indices: &[usize]) -> Result<f64> {
    if w.len() != indices.len() {
        return Err(Error::DimensionMismatch { expected: indices.len(), found: w.len() });
    }
    let w0f = w0 as f64;
    let mut v = w0f * (w0f - 1.0);
    for (a, &i) in indices.iter().enumerate() {
        let wa = w[a] as f64;
        v += wa * (wa + 2.0 * w0f - 1.0) * p.x[i];
        for (b, &j) in indices.iter().enumerate().skip(a + 1) {
            v += 2.0 * wa * w[b] as f64 * p.get(i, j);
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhCut {
    pub w0: i64,
    /// One entry per separated index.
    pub w: Vec<i64>,
    pub v_cut: f64,
}

impl BhCut {
    /// The BH inequality on the ambient `n` variables.
    pub fn ineq(&self, indices: &[usize], n: usize) -> Result<LinearIneq> {
        bh_ineq(self.w0, &self.w).lift(indices, n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationResult {
    /// Ascending by `v_cut`, ties by `(w₀, w)`.
    pub cuts: Vec<BhCut>,
    pub timed_out: bool,
    pub nodes: u64,
}

impl SeparationResult {
    pub fn best(&self) -> Option<&BhCut> {
        self.cuts.first()
    }
}

/// Range of `w₀` searched for `k` indices.
///
/// For fixed `w` the objective is `w₀² + (2S − 1)w₀ + C` with `S = Σwᵢx̂ᵢ`,
/// minimized at `w₀ = ½ − S`. For `x̂ ∈ [0,1]ᵏ`, `S ∈ [kL, kU]`, so every
/// minimizer lies in `[−kU, 1 − kL]`, and moving further out only increases
/// the objective. The union with `[kL, kU + 1]` keeps the range symmetric
/// under `(w₀, w) ↦ (1 − w₀, −w)`.
pub fn w0_range(k: usize, cfg: &SeparatorConfig) -> (i64, i64) {
    let k = k as i64;
    let (l, u) = (cfg.lower, cfg.upper);
    ((k * l).min(-k * u), (k * u + 1).max(1 - k * l))
}

struct Search<'a> {
    k: usize,
    x: Vec<f64>,
    /// `2X̂ᵢⱼ`, row-major `k×k`.
    cross: Vec<f64>,
    /// `tail_cross[m] = Σ_{m ≤ i < j} |2X̂ᵢⱼ|`.
    tail_cross: Vec<f64>,
    cfg: &'a SeparatorConfig,
    collect: bool,
    threshold: f64,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
    w0: i64,
    w: Vec<i64>,
    field: Vec<f64>,
    out: Vec<BhCut>,
}

impl Search<'_> {
    fn lin(&self, i: usize) -> f64 {
        (2.0 * self.w0 as f64 - 1.0) * self.x[i]
    }

    fn domain(&self, budget: i64) -> impl Iterator<Item = i64> {
        let cap = self.cfg.coord_cap().min(budget);
        (self.cfg.lower.max(-cap))..=(self.cfg.upper.min(cap))
    }

    fn sep(&self, i: usize, t: i64) -> f64 {
        let t = t as f64;
        self.x[i] * t * t + (self.lin(i) + self.field[i]) * t
    }

    fn lower_bound(&self, m: usize, budget: i64) -> f64 {
        let cap = self.cfg.coord_cap().min(budget) as f64;
        let mut lb = -cap * cap * self.tail_cross[m];
        for i in m..self.k {
            lb += self.domain(budget).map(|t| self.sep(i, t)).fold(f64::INFINITY, f64::min);
        }
        lb
    }

    fn record(&mut self, value: f64) {
        if !self.collect {
            self.threshold = value;
            self.out.clear();
        }
        self.out.push(BhCut { w0: self.w0, w: self.w.clone(), v_cut: value });
        let cap = self.cfg.max_cuts_per_problem.max(1);
        if self.collect && self.out.len() > cap.saturating_mul(2) {
            sort_cuts(&mut self.out);
            self.out.truncate(cap);
        }
    }

    fn dfs(&mut self, m: usize, value: f64, budget: i64, leading_zero: bool) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 1024 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    return;
                }
            }
        }
        if m == self.k {
            if value < self.threshold && !leading_zero {
                self.record(value);
            }
            return;
        }
        if value + self.lower_bound(m, budget) >= self.threshold {
            return;
        }
        let mut cands: Vec<(f64, i64)> = self
            .domain(budget)
            .filter(|&t| !(leading_zero && t < 0))
            .map(|t| (self.sep(m, t), t))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (contrib, t) in cands {
            self.w[m] = t;
            if t != 0 {
                for j in m + 1..self.k {
                    self.field[j] += self.cross[m * self.k + j] * t as f64;
                }
            }
            self.dfs(m + 1, value + contrib, budget - t.abs(), leading_zero && t == 0);
            if t != 0 {
                for j in m + 1..self.k {
                    self.field[j] -= self.cross[m * self.k + j] * t as f64;
                }
            }
            if self.timed_out {
                break;
            }
        }
        self.w[m] = 0;
    }
}

fn sort_cuts(c: &mut [BhCut]) {
    c.sort_by(|a, b| a.v_cut.total_cmp(&b.v_cut).then(a.w0.cmp(&b.w0)).then_with(|| a.w.cmp(&b.w)));
}

fn run_search(p: &LiftedPoint, indices: &[usize], cfg: &SeparatorConfig, collect: bool) -> Result<SeparationResult> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::domain("separation needs at least one index"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= p.n()) {
        return Err(Error::domain(format!("index {bad} out of range for n = {}", p.n())));
    }
    let k = indices.len();
    let x: Vec<f64> = indices.iter().map(|&i| p.x[i]).collect();
    let mut cross = vec![0.0; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let v = 2.0 * p.get(indices[a], indices[b]);
            cross[a * k + b] = v;
            cross[b * k + a] = v;
        }
    }
    let mut tail_cross = vec![0.0; k + 1];
    for m in (0..k).rev() {
        tail_cross[m] = tail_cross[m + 1] + (m + 1..k).map(|j| cross[m * k + j].abs()).sum::<f64>();
    }
    let mut s = Search {
        k,
        x,
        cross,
        tail_cross,
        cfg,
        collect,
        threshold: if collect { cfg.viol_tol } else { f64::INFINITY },
        deadline: cfg.time_limit.map(|d| Instant::now() + d),
        timed_out: false,
        nodes: 0,
        w0: 0,
        w: vec![0; k],
        field: vec![0.0; k],
        out: Vec::new(),
    };
    let (lo, hi) = w0_range(k, cfg);
    for w0 in lo..=hi {
        s.w0 = w0;
        let c = (w0 * (w0 - 1)) as f64;
        s.dfs(0, c, cfg.u_hat, true);
        if s.timed_out {
            break;
        }
    }
    let mut cuts = s.out;
    sort_cuts(&mut cuts);
    if collect {
        cuts.truncate(cfg.max_cuts_per_problem.max(1));
    }
    Ok(SeparationResult { cuts, timed_out: s.timed_out, nodes: s.nodes })
}

/// All `(w₀, w)` in the box `L ≤ wᵢ ≤ U`, `|wᵢ| ≤ ū`, `Σ|wᵢ| ≤ Û` with
/// objective below `viol_tol`, found by depth-first branch and bound.
///
/// Since `(w₀, w)` and `(1 − w₀, −w)` give the same inequality, only the
/// representative whose first nonzero `wᵢ` is positive is reported. On
/// timeout the solutions found so far are returned with `timed_out` set.
pub fn bh_separate(p: &LiftedPoint, indices: &[usize], cfg: &SeparatorConfig) -> Result<SeparationResult> {
    run_search(p, indices, cfg, true)
}

/// The minimum of the same objective over the same box with `w ≠ 0`,
/// pruning against the incumbent.
pub fn bh_minimize(p: &LiftedPoint, indices: &[usize], cfg: &SeparatorConfig) -> Result<SeparationResult> {
    run_search(p, indices, cfg, false)
}

/// Shrinks `{0..n}` to `target_size` indices by repeatedly dropping the
/// index whose removal gives the most negative smallest eigenvalue of the
/// remaining moment submatrix. Ties go to the lowest index.
pub fn greedy_refine(p: &LiftedPoint, target_size: usize) -> Result<Vec<usize>> {
    let n = p.n();
    if target_size > n {
        return Err(Error::domain(format!("target size {target_size} exceeds n = {n}")));
    }
    let mut r: Vec<usize> = (0..n).collect();
    while r.len() > target_size {
        let scores: Vec<(f64, usize)> = (0..r.len())
            .into_par_iter()
            .map(|pos| {
                let rest: Vec<usize> = r.iter().enumerate().filter(|&(q, _)| q != pos).map(|(_, &i)| i).collect();
                min_eigenvalue(&p.moment_submatrix(&rest)).map(|v| (v, r[pos]))
            })
            .collect::<Result<_>>()?;
        let (_, drop) = scores
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("nonempty");
        r.retain(|&i| i != drop);
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolCut {
    /// Canonical inequality on the ambient variables.
    pub ineq: LinearIneq,
    pub w0: i64,
    pub w: Vec<i64>,
    pub indices: Vec<usize>,
    pub v_cut: f64,
    pub round: usize,
    pub sample: usize,
    pub sample_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxRounds,
    Stalled,
    TooSmall,
    CallbackFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStat {
    pub round: usize,
    pub refined: Vec<usize>,
    pub new_cuts: usize,
    pub pool_size: usize,
    pub best_v_cut: Option<f64>,
    pub timed_out_problems: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOutcome {
    pub pool: Vec<PoolCut>,
    pub rounds: Vec<RoundStat>,
    pub stop: StopReason,
    pub seed: u64,
    pub point: LiftedPoint,
    pub error: Option<String>,
}

/// `(refined size, sampled size)` for `n` variables.
pub fn subset_sizes(n: usize, cfg: &SeparatorConfig) -> (usize, usize) {
    let floor = |f: f64| (f * n as f64).floor() as usize;
    let refined = floor(cfg.refine_fraction).max(cfg.min_subset).min(n);
    let sampled = floor(cfg.select_fraction).max(cfg.min_subset).min(refined);
    (refined, sampled)
}

/// Refine, sample, separate and re-solve until `max_rounds` or
/// `stall_rounds` consecutive rounds add nothing new.
///
/// `resolve` receives the cuts added in the round and returns the new
/// relaxation point. It is not called after a round without new cuts. If it
/// fails, the loop stops and the pool collected so far is returned.
pub fn sampling_loop<F>(p0: LiftedPoint, cfg: &SeparatorConfig, mut resolve: F) -> Result<SamplingOutcome>
where
    F: FnMut(&[PoolCut]) -> Result<LiftedPoint>,
{
    cfg.validate()?;
    let n = p0.n();
    let (refined_size, sampled_size) = subset_sizes(n, cfg);
    let mut out = SamplingOutcome {
        pool: Vec::new(),
        rounds: Vec::new(),
        stop: StopReason::MaxRounds,
        seed: cfg.seed,
        point: p0,
        error: None,
    };
    if sampled_size < cfg.min_subset || sampled_size == 0 {
        out.stop = StopReason::TooSmall;
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen: HashSet<LinearIneq> = HashSet::new();
    let mut stall = 0;
    for round in 1..=cfg.max_rounds {
        let refined = greedy_refine(&out.point, refined_size)?;
        let seeds: Vec<u64> = (0..cfg.samples_per_round).map(|_| rng.gen()).collect();
        let results: Vec<(usize, u64, Vec<usize>, SeparationResult)> = seeds
            .par_iter()
            .enumerate()
            .map(|(s, &seed)| {
                let mut local = ChaCha8Rng::seed_from_u64(seed);
                let mut idx: Vec<usize> =
                    sample(&mut local, refined.len(), sampled_size).into_iter().map(|q| refined[q]).collect();
                idx.sort_unstable();
                bh_separate(&out.point, &idx, cfg).map(|r| (s, seed, idx, r))
            })
            .collect::<Result<_>>()?;
        let mut new_cuts = Vec::new();
        let mut timed_out = 0;
        for (s, seed, idx, r) in results {
            timed_out += r.timed_out as usize;
            for c in r.cuts {
                let ineq = canonicalize(&c.ineq(&idx, n)?)?;
                if seen.insert(ineq.clone()) {
                    new_cuts.push(PoolCut {
                        ineq,
                        w0: c.w0,
                        w: c.w,
                        indices: idx.clone(),
                        v_cut: c.v_cut,
                        round,
                        sample: s,
                        sample_seed: seed,
                    });
                }
            }
        }
        out.rounds.push(RoundStat {
            round,
            refined,
            new_cuts: new_cuts.len(),
            pool_size: out.pool.len() + new_cuts.len(),
            best_v_cut: new_cuts.iter().map(|c| c.v_cut).min_by(f64::total_cmp),
            timed_out_problems: timed_out,
        });
        if new_cuts.is_empty() {
            stall += 1;
            if stall >= cfg.stall_rounds {
                out.stop = StopReason::Stalled;
                return Ok(out);
            }
            continue;
        }
        stall = 0;
        out.pool.extend(new_cuts.iter().cloned());
        match resolve(&new_cuts) {
            Ok(p) => out.point = p,
            Err(e) => {
                out.stop = StopReason::CallbackFailed;
                out.error = Some(e.to_string());
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// One line per cut: the inequality text, then `#` and its provenance.
pub fn pool_text(pool: &[PoolCut], seed: u64) -> String {
    let mut s = format!("# cut pool seed={seed} count={}\n", pool.len());
    for c in pool {
        let _ = writeln!(
            s,
            "{} # round={} sample={} sample_seed={} v_cut={:e} w0={} w=({}) idx=({})",
            c.ineq,
            c.round,
            c.sample,
            c.sample_seed,
            c.v_cut,
            c.w0,
            c.w.iter().join(","),
            c.indices.iter().map(|i| i + 1).join(",")
        );
    }
    s
}

pub fn export_pool(pool: &[PoolCut], seed: u64, path: &Path) -> Result<()> {
    fs::write(path, pool_text(pool, seed))?;
    Ok(())
}

/// Inequalities from a pool file, ignoring provenance.
pub fn read_pool(path: &Path) -> Result<Vec<LinearIneq>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push(body.parse().map_err(|e: Error| Error::Parse { line: k + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ineq::{evaluate, is_valid_bqp};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn unlimited() -> SeparatorConfig {
        SeparatorConfig { time_limit: None, max_cuts_per_problem: 1_000_000, ..Default::default() }
    }

    /// Point violating `X₀₁ − X₀₂ − X₁₂ + x₂ ≥ 0` by 0.5.
    fn triangle_point() -> LiftedPoint {
        let mut p = LiftedPoint::rank_one(&[0.5, 0.5, 0.5]);
        p.set(0, 1, 0.0);
        p.set(0, 2, 0.5);
        p.set(1, 2, 0.5);
        p
    }

    fn exhaustive_min(p: &LiftedPoint, idx: &[usize], cfg: &SeparatorConfig) -> f64 {
        let k = idx.len();
        let cap = cfg.coord_cap();
        let dom: Vec<i64> = (cfg.lower.max(-cap)..=cfg.upper.min(cap)).collect();
        let mut best = f64::INFINITY;
        for w in (0..k).map(|_| dom.iter().copied()).multi_cartesian_product() {
            if w.iter().all(|&t| t == 0) || w.iter().map(|t| t.abs()).sum::<i64>() > cfg.u_hat {
                continue;
            }
            for w0 in -30..=30 {
                best = best.min(bh_objective(w0, &w, p, idx).unwrap());
            }
        }
        best
    }

    fn random_point(n: usize, seed: u64) -> LiftedPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut p = LiftedPoint::rank_one(&x);
        for i in 0..n {
            for j in i + 1..n {
                let lo = (x[i] + x[j] - 1.0).max(0.0);
                let hi = x[i].min(x[j]);
                p.set(i, j, rng.gen_range(lo..=hi));
            }
        }
        p
    }

    #[test]
    fn objective_examples() {
        let p = triangle_point();
        assert_eq!(bh_objective(0, &[0, 0, 0], &p, &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(bh_objective(1, &[0, 0, 0], &p, &[0, 1, 2]).unwrap(), 0.0);
        let v = bh_objective(0, &[1, 1, -1], &p, &[0, 1, 2]).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!(bh_objective(0, &[1], &p, &[0, 1]).is_err());
        let x = [1.0, 0.0, 1.0, 1.0];
        let q = LiftedPoint::rank_one(&x);
        for (w0, w) in [(0, vec![1, -2, 2, 1]), (-3, vec![2, 2, 0, -1]), (2, vec![-1, -1, -1, 1])] {
            let s: f64 = w.iter().zip(&x).map(|(a, b)| *a as f64 * b).sum::<f64>() + w0 as f64;
            let v = bh_objective(w0, &w, &q, &[0, 1, 2, 3]).unwrap();
            assert!((v - (s - 1.0) * s).abs() < 1e-12);
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn separation_examples() {
        let p = triangle_point();
        let r = bh_separate(&p, &[0, 1, 2], &unlimited()).unwrap();
        assert!(r.best().unwrap().v_cut <= -1.0 + 1e-12);
        assert!(r.cuts.iter().any(|c| c.w0 == 0 && c.w == vec![1, 1, -1] && (c.v_cut + 1.0).abs() < 1e-12));
        let rank1 = LiftedPoint::rank_one(&[1.0, 0.0, 1.0, 1.0]);
        assert!(bh_separate(&rank1, &[0, 1, 2, 3], &unlimited()).unwrap().cuts.is_empty());
        let none = SeparatorConfig { u_hat: 0, ..unlimited() };
        assert!(bh_separate(&p, &[0, 1, 2], &none).unwrap().cuts.is_empty());
        assert!(bh_separate(&p, &[], &unlimited()).is_err());
    }

    #[test]
    fn cuts_match_their_inequalities() {
        let p = random_point(7, 5);
        let mut p = p;
        p.set(0, 1, 0.0);
        p.set(0, 2, p.x[0].min(p.x[2]));
        p.set(1, 2, p.x[1].min(p.x[2]));
        let idx = [0, 1, 2, 4, 6];
        let r = bh_separate(&p, &idx, &unlimited()).unwrap();
        assert!(!r.cuts.is_empty());
        for c in r.cuts.iter().take(200) {
            let ineq = c.ineq(&idx, 7).unwrap();
            assert!((evaluate(&ineq, &p).unwrap() - c.v_cut).abs() < 1e-9);
            assert!(is_valid_bqp(&ineq).unwrap());
            assert!(c.w.iter().find(|&&t| t != 0).unwrap() > &0);
        }
    }

    #[test]
    fn w0_range_is_wide_enough() {
        let cfg = SeparatorConfig { lower: -1, upper: 3, u_bar: 3, ..unlimited() };
        for seed in 0..20 {
            let k = 1 + seed as usize % 5;
            let p = random_point(k, seed);
            let idx: Vec<usize> = (0..k).collect();
            let r = bh_minimize(&p, &idx, &cfg).unwrap();
            let (lo, hi) = w0_range(k, &cfg);
            assert!(lo <= -(k as i64) * 3 && hi >= 1 + k as i64);
            assert!((r.best().unwrap().v_cut - exhaustive_min(&p, &idx, &cfg)).abs() < 1e-9);
        }
    }

    #[test]
    fn refine_examples() {
        let p = random_point(6, 1);
        assert_eq!(greedy_refine(&p, 6).unwrap(), (0..6).collect::<Vec<_>>());
        assert!(greedy_refine(&p, 7).is_err());
        // Negative direction supported on {1, 3, 4}.
        let mut q = LiftedPoint::rank_one(&[0.5; 8]);
        for (i, j) in [(1, 3), (1, 4), (3, 4)] {
            q.set(i, j, 0.0);
        }
        let r = greedy_refine(&q, 3).unwrap();
        assert_eq!(r, vec![1, 3, 4]);
        let psd = LiftedPoint::rank_one(&[0.2, 0.7, 0.1, 0.9, 0.4]);
        for j in 0..5 {
            let rest: Vec<usize> = (0..5).filter(|&i| i != j).collect();
            assert!(min_eigenvalue(&psd.moment_submatrix(&rest)).unwrap() > -1e-12);
        }
    }

    #[test]
    fn sampling_on_binary_point_stalls() {
        let p = LiftedPoint::rank_one(&[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let cfg = SeparatorConfig { samples_per_round: 10, ..Default::default() };
        let out = sampling_loop(p.clone(), &cfg, |_| Ok(p.clone())).unwrap();
        assert_eq!(out.stop, StopReason::Stalled);
        assert_eq!(out.rounds.len(), cfg.stall_rounds);
        assert!(out.pool.is_empty());
    }

    #[test]
    fn sampling_is_reproducible_and_keeps_pool_on_failure() {
        let mut p = random_point(10, 9);
        for (i, j) in [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)] {
            p.set(i, j, 0.0);
        }
        let cfg = SeparatorConfig { samples_per_round: 20, max_rounds: 3, time_limit: None, seed: 42, ..Default::default() };
        let run = || sampling_loop(p.clone(), &cfg, |_| Ok(p.clone())).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.pool, b.pool);
        assert!(!a.rounds.is_empty() && a.rounds[0].new_cuts > 0);
        let failing = sampling_loop(p.clone(), &cfg, |_| Err(Error::Callback("boom".into()))).unwrap();
        assert_eq!(failing.stop, StopReason::CallbackFailed);
        assert_eq!(failing.pool.len(), a.rounds[0].new_cuts);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.txt");
        export_pool(&a.pool, cfg.seed, &path).unwrap();
        let back = read_pool(&path).unwrap();
        assert_eq!(back, a.pool.iter().map(|c| c.ineq.clone()).collect::<Vec<_>>());
        assert!(fs::read_to_string(&path).unwrap().starts_with("# cut pool seed=42"));
    }

    #[test]
    fn config_validation() {
        assert!(SeparatorConfig::default().validate().is_ok());
        assert!(SeparatorConfig { lower: 1, ..Default::default() }.validate().is_err());
        assert!(SeparatorConfig { viol_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SeparatorConfig { refine_fraction: 0.0, ..Default::default() }.validate().is_err());
        assert_eq!(subset_sizes(100, &SeparatorConfig::default()), (15, 10));
        assert_eq!(subset_sizes(10, &SeparatorConfig::default()), (3, 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn branch_and_bound_matches_exhaustive(k in 1usize..=6, seed in any::<u64>()) {
            let p = random_point(k + 2, seed);
            let idx: Vec<usize> = (0..k).map(|i| i + (i % 2)).filter(|&i| i < k + 2).collect();
            let cfg = unlimited();
            let r = bh_minimize(&p, &idx, &cfg).unwrap();
            let ex = exhaustive_min(&p, &idx, &cfg);
            prop_assert!((r.best().unwrap().v_cut - ex).abs() < 1e-9);
            let all = bh_separate(&p, &idx, &cfg).unwrap();
            match all.best() {
                Some(b) => prop_assert!((b.v_cut - ex).abs() < 1e-9),
                None => prop_assert!(ex >= cfg.viol_tol),
            }
        }

        #[test]
        fn refine_is_permutation_invariant(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let n = 8;
            let p = random_point(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            // q has variable perm[i] equal to p's variable i.
            let mut x = vec![0.0; n];
            for i in 0..n { x[perm[i]] = p.x[i]; }
            let mut q = LiftedPoint::rank_one(&x);
            for i in 0..n { for j in 0..n { q.set(perm[i], perm[j], p.get(i, j)); } }
            let a = greedy_refine(&p, 3).unwrap();
            let mut mapped: Vec<usize> = a.iter().map(|&i| perm[i]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, greedy_refine(&q, 3).unwrap());
        }
    }
}
