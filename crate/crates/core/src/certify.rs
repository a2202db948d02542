//! Certificates that an integer inequality is not an Eigen-CG inequality,
//! plus a bounded search for Boros–Hammer representations.
//!
//! Both tests only look at `β`. If `μ·f = ecg(v₀, v)` for a gcd-1 integer
//! facet `f`, then `μ` is a positive integer and `2vᵢvⱼ ∈ (μβᵢⱼ − 1, μβᵢⱼ]`.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use itertools::Itertools;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::FacetAtlas;
use crate::eigencg::bh_ineq;
use crate::error::{Error, Result};
use crate::exactnum::Rational;
use crate::ineq::{pair_index, LinearIneq};

/// Default `λ` budget for [`ratio_2x2_test`].
pub const DEFAULT_LAMBDA_MAX: u64 = 10_000;
/// Default coefficient box for [`bh_representable`].
pub const DEFAULT_BH_BOX: i64 = 4;

/// Which `β` entries the certificates may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPattern {
    /// Zero entries contribute `2vᵢvⱼ ∈ (−1, 0]` as well.
    #[default]
    Full,
    /// Only nonzero entries; certifies a subset of what `Full` does.
    NonzeroOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignRel {
    /// `β > 0`, so `vᵢ` and `vⱼ` are nonzero with equal signs.
    Same,
    /// `β < 0`, so both are nonzero with opposite signs.
    Opposite,
    /// `β = 0` between two indices forced nonzero, so signs differ.
    ZeroOpposite,
}

impl SignRel {
    fn parity(self) -> u8 {
        match self {
            SignRel::Same => 0,
            SignRel::Opposite | SignRel::ZeroOpposite => 1,
        }
    }
}

/// One pairwise constraint in a contradictory cycle, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignEdge {
    pub i: usize,
    pub j: usize,
    pub rel: SignRel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignOutcome {
    /// The sign constraints contain an odd cycle.
    Certified { cycle: Vec<SignEdge> },
    Inconclusive,
}

impl SignOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, SignOutcome::Certified { .. })
    }
}

fn check_input(ineq: &LinearIneq) -> Result<()> {
    if !ineq.is_bqp_style() {
        return Err(Error::domain("certificates need an inequality without X_ii terms"));
    }
    if !ineq.denominator_lcm().is_one() {
        return Err(Error::domain("certificates need integer coefficients"));
    }
    Ok(())
}

fn beta_sign(ineq: &LinearIneq, i: usize, j: usize) -> i8 {
    let b = &ineq.beta[pair_index(ineq.n, i, j)];
    if b.is_positive() {
        1
    } else if b.is_negative() {
        -1
    } else {
        0
    }
}

/// Decides whether some sign assignment `sign(vᵢ) ∈ {+, −, 0}` is consistent
/// with the signs of `β`.
///
/// Any index touching a nonzero `β` must be nonzero. Every other index can be
/// set to zero, which satisfies all of its `β = 0` constraints, so the test
/// reduces to 2-colouring the forced indices with parity edges.
pub fn sign_pattern_test(ineq: &LinearIneq) -> Result<SignOutcome> {
    sign_pattern_test_with(ineq, BetaPattern::Full)
}

pub fn sign_pattern_test_with(ineq: &LinearIneq, pattern: BetaPattern) -> Result<SignOutcome> {
    check_input(ineq)?;
    let n = ineq.n;
    let mut forced = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            if beta_sign(ineq, i, j) != 0 {
                forced[i] = true;
                forced[j] = true;
            }
        }
    }
    let mut adj: Vec<Vec<(usize, SignRel)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if !(forced[i] && forced[j]) {
                continue;
            }
            let rel = match beta_sign(ineq, i, j) {
                1 => SignRel::Same,
                -1 => SignRel::Opposite,
                _ if pattern == BetaPattern::Full => SignRel::ZeroOpposite,
                _ => continue,
            };
            adj[i].push((j, rel));
            adj[j].push((i, rel));
        }
    }
    let mut colour: Vec<Option<u8>> = vec![None; n];
    let mut parent: Vec<Option<(usize, SignRel)>> = vec![None; n];
    let mut depth = vec![0usize; n];
    for root in 0..n {
        if !forced[root] || colour[root].is_some() {
            continue;
        }
        colour[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(w, rel) in &adj[u] {
                let want = colour[u].unwrap() ^ rel.parity();
                match colour[w] {
                    None => {
                        colour[w] = Some(want);
                        parent[w] = Some((u, rel));
                        depth[w] = depth[u] + 1;
                        queue.push_back(w);
                    }
                    Some(c) if c != want => {
                        return Ok(SignOutcome::Certified { cycle: tree_cycle(u, w, rel, &parent, &depth) });
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(SignOutcome::Inconclusive)
}

fn tree_cycle(
    u: usize,
    w: usize,
    rel: SignRel,
    parent: &[Option<(usize, SignRel)>],
    depth: &[usize],
) -> Vec<SignEdge> {
    let edge = |a: usize, b: usize, rel| SignEdge { i: a.min(b), j: a.max(b), rel };
    let (mut a, mut b) = (u, w);
    let mut left = Vec::new();
    let mut right = Vec::new();
    while a != b {
        if depth[a] >= depth[b] {
            let (p, r) = parent[a].expect("non-root has a parent");
            left.push(edge(a, p, r));
            a = p;
        } else {
            let (p, r) = parent[b].expect("non-root has a parent");
            right.push(edge(b, p, r));
            b = p;
        }
    }
    let mut cycle = vec![edge(u, w, rel)];
    cycle.extend(left);
    cycle.extend(right.into_iter().rev());
    cycle
}

/// A 4-index set and two of its pairings whose products cannot agree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioWitness {
    /// Sorted, 0-based.
    pub quad: [usize; 4],
    pub first: [(usize, usize); 2],
    pub second: [(usize, usize); 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioOutcome {
    Certified { witness: RatioWitness },
    Inconclusive,
}

impl RatioOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, RatioOutcome::Certified { .. })
    }
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    lo: i128,
    hi: i128,
    lo_in: bool,
    hi_in: bool,
}

/// `{xy : x ∈ (a₁, b₁], y ∈ (a₂, b₂]}` described by its closure and whether
/// each end is attained.
fn product_interval(a1: i128, b1: i128, a2: i128, b2: i128) -> Interval {
    let corners = [(a1, false, a2, false), (a1, false, b2, true), (b1, true, a2, false), (b1, true, b2, true)];
    let value = |c: &(i128, bool, i128, bool)| c.0 * c.2;
    let attained = |c: &(i128, bool, i128, bool)| (c.1 && c.3) || (c.0 == 0 && c.1) || (c.2 == 0 && c.3);
    let lo = corners.iter().map(value).min().unwrap();
    let hi = corners.iter().map(value).max().unwrap();
    let lo_in = corners.iter().any(|c| value(c) == lo && attained(c));
    let hi_in = corners.iter().any(|c| value(c) == hi && attained(c));
    Interval { lo, hi, lo_in, hi_in }
}

fn disjoint(x: Interval, y: Interval) -> bool {
    let below = |p: Interval, q: Interval| p.hi < q.lo || (p.hi == q.lo && !(p.hi_in && q.lo_in));
    below(x, y) || below(y, x)
}

/// Whether `b₁b₂ = b₃b₄` is impossible for every integer `λ ≥ 1` when each
/// `bₖ ∈ (λcₖ − 1, λcₖ]`, checking `λ ≤ lambda_max` directly.
fn pairing_excluded(c: [i128; 4], lambda_max: u64) -> bool {
    let p1 = c[0] * c[1];
    let p2 = c[2] * c[3];
    if p1 == p2 {
        return false;
    }
    // (λc − δ)(λc' − δ') lies within (|c|+|c'|)λ + 1 of cc'λ², so beyond the
    // root of dλ² − sλ − 1 the two ranges separate.
    let d = (p1 - p2).abs();
    let s = c.iter().map(|v| v.abs()).sum::<i128>();
    let mut threshold: i128 = 1;
    while d * threshold * threshold - s * threshold - 1 <= 0 || 2 * d * threshold - s <= 0 {
        threshold += 1;
    }
    if threshold - 1 > lambda_max as i128 {
        return false;
    }
    (1..threshold).all(|l| {
        let i1 = product_interval(l * c[0] - 1, l * c[0], l * c[1] - 1, l * c[1]);
        let i2 = product_interval(l * c[2] - 1, l * c[2], l * c[3] - 1, l * c[3]);
        disjoint(i1, i2)
    })
}

/// Every quadruple/pairing pair that certifies, in lexicographic order.
pub fn ratio_witnesses(ineq: &LinearIneq, lambda_max: u64) -> Result<Vec<RatioWitness>> {
    ratio_witnesses_with(ineq, lambda_max, BetaPattern::Full)
}

pub fn ratio_witnesses_with(ineq: &LinearIneq, lambda_max: u64, pattern: BetaPattern) -> Result<Vec<RatioWitness>> {
    check_input(ineq)?;
    let n = ineq.n;
    let coeff = |i: usize, j: usize| -> Result<i128> {
        ineq.beta[pair_index(n, i, j)].to_integer().to_i128().ok_or(Error::Overflow("ratio test"))
    };
    let mut out = Vec::new();
    for q in (0..n).combinations(4) {
        let (a, b, c, d) = (q[0], q[1], q[2], q[3]);
        let pairings = [[(a, b), (c, d)], [(a, c), (b, d)], [(a, d), (b, c)]];
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            let (px, py) = (pairings[x], pairings[y]);
            let cs = [coeff(px[0].0, px[0].1)?, coeff(px[1].0, px[1].1)?, coeff(py[0].0, py[0].1)?, coeff(py[1].0, py[1].1)?];
            if pattern == BetaPattern::NonzeroOnly && cs.contains(&0) {
                continue;
            }
            if pairing_excluded(cs, lambda_max) {
                out.push(RatioWitness { quad: [a, b, c, d], first: px, second: py });
            }
        }
    }
    Ok(out)
}

/// Certifies when some quadruple has two pairings whose `β`-product ranges
/// are disjoint for every admissible `λ`.
pub fn ratio_2x2_test(ineq: &LinearIneq, lambda_max: u64) -> Result<RatioOutcome> {
    ratio_2x2_test_with(ineq, lambda_max, BetaPattern::Full)
}

pub fn ratio_2x2_test_with(ineq: &LinearIneq, lambda_max: u64, pattern: BetaPattern) -> Result<RatioOutcome> {
    Ok(match ratio_witnesses_with(ineq, lambda_max, pattern)?.into_iter().next() {
        Some(witness) => RatioOutcome::Certified { witness },
        None => RatioOutcome::Inconclusive,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BhWitness {
    pub w0: i64,
    pub w: Vec<i64>,
    /// `bh_ineq(w0, w) = multiplier · ineq`.
    pub multiplier: i64,
}

/// Integer roots of `t(t + 2w₀ − 1) = m` within `[−box, box]`, ascending.
fn alpha_roots(w0: i64, m: i128, bound: i64) -> Vec<i64> {
    // t² + (2w₀ − 1)t − m = 0
    let b = 2 * w0 as i128 - 1;
    let disc = b * b + 4 * m;
    if disc < 0 {
        return Vec::new();
    }
    let r = (disc as f64).sqrt().round() as i128;
    let root = (r - 2..=r + 2).find(|x| *x >= 0 && x * x == disc);
    let Some(r) = root else { return Vec::new() };
    let mut out: Vec<i64> = [-b - r, -b + r]
        .into_iter()
        .filter(|v| v % 2 == 0)
        .map(|v| (v / 2) as i64)
        .filter(|t| t.abs() <= bound)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Searches `|wᵢ| ≤ box`, `|w₀| ≤ box + 1` and positive integer multipliers
/// for a BH inequality equal to a multiple of `ineq`. Candidates for each
/// `wᵢ` come from `α`, and `β` prunes partial assignments. Returns the first
/// hit in ascending `(multiplier, w₀, w)` order.
pub fn bh_representable(ineq: &LinearIneq, bound: i64) -> Result<Option<BhWitness>> {
    check_input(ineq)?;
    let n = ineq.n;
    let to_i = |v: &Rational| v.to_integer().to_i128().ok_or(Error::Overflow("BH search"));
    let gamma = to_i(&ineq.gamma)?;
    let alpha: Vec<i128> = ineq.alpha.iter().map(to_i).collect::<Result<_>>()?;
    let beta: Vec<i128> = ineq.beta.iter().map(to_i).collect::<Result<_>>()?;
    let b = bound as i128;
    let max_bh = ((b + 1) * (b + 2)).max(b * (3 * b + 3)).max(2 * b * b);
    let max_f = alpha.iter().chain(&beta).chain(std::iter::once(&gamma)).map(|v| v.abs()).max().unwrap_or(0);
    if max_f == 0 {
        return Ok(None);
    }
    let mu_max = max_bh / max_f;
    for mu in 1..=mu_max {
        for w0 in -(bound + 1)..=(bound + 1) {
            if (w0 as i128) * (w0 as i128 - 1) != mu * gamma {
                continue;
            }
            let cands: Vec<Vec<i64>> = alpha.iter().map(|&a| alpha_roots(w0, mu * a, bound)).collect();
            if cands.iter().any(Vec::is_empty) {
                continue;
            }
            let mut w = Vec::with_capacity(n);
            if assign(&cands, &beta, mu, n, &mut w) {
                return Ok(Some(BhWitness { w0, w, multiplier: mu as i64 }));
            }
        }
    }
    Ok(None)
}

fn assign(cands: &[Vec<i64>], beta: &[i128], mu: i128, n: usize, w: &mut Vec<i64>) -> bool {
    let i = w.len();
    if i == n {
        return true;
    }
    for &t in &cands[i] {
        let ok = (0..i).all(|j| 2 * (w[j] as i128) * (t as i128) == mu * beta[pair_index(n, j, i)]);
        if ok {
            w.push(t);
            if assign(cands, beta, mu, n, w) {
                return true;
            }
            w.pop();
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Bh,
    SignCertified,
    RatioCertified,
    Inconclusive,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucket::Bh => "bh",
            Bucket::SignCertified => "sign_certified",
            Bucket::RatioCertified => "ratio_certified",
            Bucket::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertRow {
    pub facet_id: usize,
    pub bucket: Bucket,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertReport {
    pub n: usize,
    pub total: usize,
    pub bh_count: usize,
    pub sign_certified: usize,
    pub ratio_certified: usize,
    pub inconclusive: usize,
    pub bh_box: i64,
    pub lambda_max: u64,
    pub pattern: BetaPattern,
    #[serde(skip)]
    pub rows: Vec<CertRow>,
}

fn witness_text_sign(cycle: &[SignEdge]) -> String {
    cycle
        .iter()
        .map(|e| {
            let r = match e.rel {
                SignRel::Same => "+",
                SignRel::Opposite => "-",
                SignRel::ZeroOpposite => "0",
            };
            format!("({},{}){r}", e.i + 1, e.j + 1)
        })
        .join(" ")
}

fn witness_text_ratio(w: &RatioWitness) -> String {
    let p = |x: [(usize, usize); 2]| format!("{}{}*{}{}", x[0].0 + 1, x[0].1 + 1, x[1].0 + 1, x[1].1 + 1);
    format!("{{{}}} {}!={}", w.quad.iter().map(|i| i + 1).join(","), p(w.first), p(w.second))
}

/// Classifies one inequality: BH search first, then the sign test, then the
/// ratio test.
pub fn certify_one(ineq: &LinearIneq, bound: i64, lambda_max: u64, pattern: BetaPattern) -> Result<(Bucket, String)> {
    if let Some(w) = bh_representable(ineq, bound)? {
        return Ok((Bucket::Bh, format!("w0={} w=({}) mult={}", w.w0, w.w.iter().join(","), w.multiplier)));
    }
    if let SignOutcome::Certified { cycle } = sign_pattern_test_with(ineq, pattern)? {
        return Ok((Bucket::SignCertified, witness_text_sign(&cycle)));
    }
    if let RatioOutcome::Certified { witness } = ratio_2x2_test_with(ineq, lambda_max, pattern)? {
        return Ok((Bucket::RatioCertified, witness_text_ratio(&witness)));
    }
    Ok((Bucket::Inconclusive, String::new()))
}

pub fn certify_batch(atlas: &FacetAtlas, bound: i64, lambda_max: u64) -> Result<CertReport> {
    certify_batch_with(atlas, bound, lambda_max, BetaPattern::Full)
}

pub fn certify_batch_with(atlas: &FacetAtlas, bound: i64, lambda_max: u64, pattern: BetaPattern) -> Result<CertReport> {
    let rows: Vec<CertRow> = atlas
        .facets
        .par_iter()
        .enumerate()
        .map(|(k, f)| certify_one(f, bound, lambda_max, pattern).map(|(bucket, witness)| CertRow { facet_id: k, bucket, witness }))
        .collect::<Result<_>>()?;
    let count = |b: Bucket| rows.iter().filter(|r| r.bucket == b).count();
    Ok(CertReport {
        n: atlas.n,
        total: rows.len(),
        bh_count: count(Bucket::Bh),
        sign_certified: count(Bucket::SignCertified),
        ratio_certified: count(Bucket::RatioCertified),
        inconclusive: count(Bucket::Inconclusive),
        bh_box: bound,
        lambda_max,
        pattern,
        rows,
    })
}

impl CertReport {
    /// Writes `facet_id,bucket,witness` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// `bh_ineq(w0, w)` as a gcd-1 inequality, for callers that only need the
/// canonical form.
pub fn canonical_bh(w0: i64, w: &[i64]) -> Result<Option<LinearIneq>> {
    let b = bh_ineq(w0, w);
    if b.alpha.iter().chain(&b.beta).chain(std::iter::once(&b.gamma)).all(Zero::is_zero) {
        return Ok(None);
    }
    crate::atlas::canonicalize(&b).map(Some)
}
