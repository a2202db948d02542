//! Facets of the Boolean quadric polytope for small `n`, their on-disk atlas
//! format, and lookup-table separation over index subsets.
//!
//! Facets are found by the double-description method on the cone of valid
//! inequalities `{(γ, α, β) : γ + αᵀx + βᵀX ≥ 0 at every vertex}`. Each vertex
//! contributes one homogeneous constraint, so vertices are inserted one at a
//! time and the extreme rays of the final cone are the facets.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exactnum::{rank, Rational};
use crate::ineq::{bqp_minimum, pair_count, pairs, DenseIneq, LiftedPoint, LinearIneq};

/// Largest `n` the enumeration accepts; `n = 6` needs [`EnumerateOptions::allow_long_run`].
pub const ENUMERATION_MAX_N: usize = 6;

/// `n + C(n, 2)`.
pub fn bqp_dim(n: usize) -> usize {
    n + pair_count(n)
}

/// Binary lifted points in coordinates `(x₁…x_n, X₁₂, X₁₃, …)`, one per
/// `x ∈ {0,1}ⁿ` in mask order.
pub fn bqp_vertices(n: usize) -> Result<Vec<Vec<i64>>> {
    if n > ENUMERATION_MAX_N {
        return Err(Error::SizeCap { what: "BQP vertex list", size: n, cap: ENUMERATION_MAX_N });
    }
    let mut out = Vec::with_capacity(1 << n);
    for m in 0u64..(1u64 << n) {
        let x: Vec<i64> = (0..n).map(|i| (m >> i & 1) as i64).collect();
        let mut v = x.clone();
        v.extend(pairs(n).map(|(i, j)| x[i] * x[j]));
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AtlasMeta {
    pub method: String,
    /// Hex SHA-256 of the serialized body.
    pub checksum: String,
}

/// All facets of `BQP_n` in canonical integer form, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacetAtlas {
    pub n: usize,
    pub facets: Vec<LinearIneq>,
    pub meta: AtlasMeta,
}

impl FacetAtlas {
    pub fn new(n: usize, mut facets: Vec<LinearIneq>, method: &str) -> Self {
        facets.sort();
        facets.dedup();
        let checksum = hex::encode(Sha256::digest(body_text(&facets).as_bytes()));
        FacetAtlas { n, facets, meta: AtlasMeta { method: method.to_string(), checksum } }
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn dense(&self) -> Vec<DenseIneq> {
        self.facets.iter().map(LinearIneq::to_dense).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct EnumerateOptions {
    /// Permit `n = 6`, which takes hours.
    pub allow_long_run: bool,
    /// Resume from and periodically write this JSON file.
    pub checkpoint: Option<PathBuf>,
    /// Vertex insertions between checkpoint writes (0 means 1).
    pub checkpoint_every: usize,
    /// Print one progress line per inserted vertex to stderr.
    pub verbose: bool,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    n: usize,
    order: Vec<usize>,
    processed: usize,
    rays: Vec<Vec<i128>>,
    zeros: Vec<u64>,
}

/// Exact facet list of `BQP_n` for `n ≤ 5`.
pub fn enumerate_facets(n: usize) -> Result<FacetAtlas> {
    enumerate_facets_with(n, &EnumerateOptions::default())
}

pub fn enumerate_facets_with(n: usize, opts: &EnumerateOptions) -> Result<FacetAtlas> {
    if n == 0 {
        return Err(Error::domain("enumeration needs n ≥ 1"));
    }
    if n > ENUMERATION_MAX_N || (n == ENUMERATION_MAX_N && !opts.allow_long_run) {
        return Err(Error::SizeCap { what: "facet enumeration without the long-run flag", size: n, cap: 5 });
    }
    let vertices = bqp_vertices(n)?;
    enumerate_from_vertices(n, &vertices, opts)
}

/// Dot product of a homogeneous vertex row `(1, z)` with a ray `(γ, α, β)`.
fn row_dot(z: &[i64], r: &[i128]) -> Result<i128> {
    let mut s = r[0];
    for (zi, ri) in z.iter().zip(&r[1..]) {
        if *zi != 0 {
            s = s.checked_add((*zi as i128).checked_mul(*ri).ok_or(Error::Overflow("facet enumeration"))?)
                .ok_or(Error::Overflow("facet enumeration"))?;
        }
    }
    Ok(s)
}

fn gcd_normalize(r: &mut [i128]) {
    let g = r.iter().fold(0i128, |g, &v| g.gcd(&v));
    if g > 1 {
        for v in r.iter_mut() {
            *v /= g;
        }
    }
}

/// Facets from an arbitrary ordering of the vertex list of `BQP_n`.
pub fn enumerate_from_vertices(n: usize, vertices: &[Vec<i64>], opts: &EnumerateOptions) -> Result<FacetAtlas> {
    let dim = bqp_dim(n);
    let d = dim + 1;
    if vertices.len() > 64 {
        return Err(Error::SizeCap { what: "vertex bitset", size: vertices.len(), cap: 64 });
    }
    if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    let resumed = match &opts.checkpoint {
        Some(path) if path.exists() => {
            let cp: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
            if cp.n != n || cp.order.len() != vertices.len() {
                return Err(Error::domain("checkpoint was written for a different problem"));
            }
            Some(cp)
        }
        _ => None,
    };
    let (order, mut processed, mut rays, mut zeros) = match resumed {
        Some(cp) => (cp.order, cp.processed, cp.rays, cp.zeros),
        None => {
            let (order, rays, zeros) = initial_simplex(vertices, d)?;
            (order, d, rays, zeros)
        }
    };
    let every = opts.checkpoint_every.max(1);
    let started = Instant::now();
    while processed < order.len() {
        let vid = order[processed];
        let z = &vertices[vid];
        let bit = 1u64 << vid;
        let dots: Vec<i128> = rays.iter().map(|r| row_dot(z, r)).collect::<Result<_>>()?;
        let plus: Vec<usize> = (0..rays.len()).filter(|&k| dots[k] > 0).collect();
        let minus: Vec<usize> = (0..rays.len()).filter(|&k| dots[k] < 0).collect();
        let need = d.saturating_sub(2) as u32;
        let pairs_found: Vec<(usize, usize)> = plus
            .par_iter()
            .flat_map_iter(|&p| {
                let zeros = &zeros;
                minus.iter().filter_map(move |&m| {
                    let common = zeros[p] & zeros[m];
                    if common.count_ones() < need {
                        return None;
                    }
                    let blocked = zeros
                        .iter()
                        .enumerate()
                        .any(|(k, &zk)| k != p && k != m && zk & common == common);
                    (!blocked).then_some((p, m))
                })
            })
            .collect();
        let mut next_rays = Vec::with_capacity(rays.len() + pairs_found.len());
        let mut next_zeros = Vec::with_capacity(rays.len() + pairs_found.len());
        for k in 0..rays.len() {
            if dots[k] >= 0 {
                next_rays.push(rays[k].clone());
                next_zeros.push(if dots[k] == 0 { zeros[k] | bit } else { zeros[k] });
            }
        }
        for (p, m) in pairs_found {
            let (dp, dm) = (dots[p], -dots[m]);
            let mut r = Vec::with_capacity(d);
            for (a, b) in rays[p].iter().zip(&rays[m]) {
                let v = dp
                    .checked_mul(*b)
                    .and_then(|x| dm.checked_mul(*a).and_then(|y| x.checked_add(y)))
                    .ok_or(Error::Overflow("facet enumeration"))?;
                r.push(v);
            }
            gcd_normalize(&mut r);
            next_rays.push(r);
            next_zeros.push((zeros[p] & zeros[m]) | bit);
        }
        rays = next_rays;
        zeros = next_zeros;
        processed += 1;
        if opts.verbose {
            eprintln!(
                "inserted vertex {processed}/{} rays={} elapsed={:.1}s",
                order.len(),
                rays.len(),
                started.elapsed().as_secs_f64()
            );
        }
        if let Some(path) = &opts.checkpoint {
            if processed % every == 0 || processed == order.len() {
                let cp = Checkpoint { n, order: order.clone(), processed, rays: rays.clone(), zeros: zeros.clone() };
                let tmp = path.with_extension("tmp");
                fs::write(&tmp, serde_json::to_vec(&cp)?)?;
                fs::rename(&tmp, path)?;
            }
        }
    }
    let facets = rays.iter().map(|r| ray_to_ineq(n, r)).collect();
    Ok(FacetAtlas::new(n, facets, "double-description"))
}

/// Picks `d` linearly independent vertex rows (greedily in input order) and
/// returns the insertion order with those first, the simplex-cone rays and
/// their zero sets.
fn initial_simplex(vertices: &[Vec<i64>], d: usize) -> Result<(Vec<usize>, Vec<Vec<i128>>, Vec<u64>)> {
    let row = |v: &[i64]| -> Vec<Rational> {
        std::iter::once(Rational::one()).chain(v.iter().map(|&x| Rational::from_integer(BigInt::from(x)))).collect()
    };
    let mut chosen: Vec<usize> = Vec::new();
    let mut mat: Vec<Vec<Rational>> = Vec::new();
    for (k, v) in vertices.iter().enumerate() {
        mat.push(row(v));
        if rank(&mat) == mat.len() {
            chosen.push(k);
            if chosen.len() == d {
                break;
            }
        } else {
            mat.pop();
        }
    }
    if chosen.len() < d {
        return Err(Error::domain("vertex set is not full-dimensional"));
    }
    let inv = invert_rational(&mat).ok_or_else(|| Error::domain("singular initial basis"))?;
    // Ray k is column k of A⁻¹: tight on every chosen row except row k.
    let mut rays = Vec::with_capacity(d);
    let mut zeros = Vec::with_capacity(d);
    let all: u64 = chosen.iter().fold(0, |acc, &v| acc | 1u64 << v);
    for k in 0..d {
        let col: Vec<Rational> = (0..d).map(|i| inv[i][k].clone()).collect();
        let l = col.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut r: Vec<i128> = Vec::with_capacity(d);
        for v in &col {
            let x = (v * Rational::from_integer(l.clone())).to_integer();
            r.push(x.to_i128().ok_or(Error::Overflow("initial simplex"))?);
        }
        gcd_normalize(&mut r);
        rays.push(r);
        zeros.push(all & !(1u64 << chosen[k]));
    }
    let mut order = chosen.clone();
    order.extend((0..vertices.len()).filter(|k| !chosen.contains(k)));
    Ok((order, rays, zeros))
}

fn invert_rational(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a.to_vec();
    let mut inv: Vec<Vec<Rational>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect()).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        inv.swap(c, p);
        let piv = m[c][c].clone();
        for k in 0..n {
            m[c][k] = &m[c][k] / &piv;
            inv[c][k] = &inv[c][k] / &piv;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for k in 0..n {
                let a = &f * &m[c][k];
                m[r][k] -= a;
                let b = &f * &inv[c][k];
                inv[r][k] -= b;
            }
        }
    }
    Some(inv)
}

fn ray_to_ineq(n: usize, r: &[i128]) -> LinearIneq {
    let q = |v: i128| Rational::from_integer(BigInt::from(v));
    let mut out = LinearIneq::zero(n);
    out.gamma = q(r[0]);
    for i in 0..n {
        out.alpha[i] = q(r[1 + i]);
    }
    for k in 0..pair_count(n) {
        out.beta[k] = q(r[1 + n + k]);
    }
    out
}

/// Integer coefficients with gcd 1, same orientation. Rejects `0 ≥ 0`.
pub fn canonicalize(ineq: &LinearIneq) -> Result<LinearIneq> {
    let all = || ineq.alpha.iter().chain(&ineq.beta).chain(&ineq.diag).chain(std::iter::once(&ineq.gamma));
    if all().all(Zero::is_zero) {
        return Err(Error::domain("cannot canonicalize the zero inequality"));
    }
    let l = all().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let scaled = ineq.scale(&Rational::from_integer(l));
    let g = scaled
        .alpha
        .iter()
        .chain(&scaled.beta)
        .chain(&scaled.diag)
        .chain(std::iter::once(&scaled.gamma))
        .fold(BigInt::zero(), |acc, v| acc.gcd(&v.to_integer()));
    Ok(scaled.scale(&Rational::new(BigInt::one(), g)))
}

/// Valid at every vertex and tight on an affinely spanning set of
/// `dim(BQP_n)` vertices.
pub fn facetness_check(ineq: &LinearIneq, n: usize) -> Result<bool> {
    if ineq.n != n {
        return Err(Error::DimensionMismatch { expected: n, found: ineq.n });
    }
    if !ineq.is_bqp_style() {
        return Err(Error::domain("facet test needs an inequality without X_ii terms"));
    }
    if n > ENUMERATION_MAX_N {
        return Err(Error::SizeCap { what: "facet test", size: n, cap: ENUMERATION_MAX_N });
    }
    if bqp_minimum(ineq)?.0.is_negative() {
        return Ok(false);
    }
    let (g, a, b) = ineq.integer_coeffs();
    let mut tight: Vec<Vec<Rational>> = Vec::new();
    for v in bqp_vertices(n)? {
        let mut s = g.clone();
        for (c, z) in a.iter().chain(&b).zip(&v) {
            if *z != 0 {
                s += c * z;
            }
        }
        if s.is_zero() {
            tight.push(
                std::iter::once(Rational::one())
                    .chain(v.iter().map(|&z| Rational::from_integer(BigInt::from(z))))
                    .collect(),
            );
        }
    }
    Ok(rank(&tight) == bqp_dim(n))
}

/// One candidate from [`atlas_separate`].
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatedCut {
    /// The atlas facet lifted to the ambient dimension.
    pub cut: LinearIneq,
    /// `−LHS` at the point; positive means violated.
    pub violation: f64,
    pub subset: Vec<usize>,
    pub facet: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Hit {
    violation: f64,
    subset: Vec<usize>,
    facet: usize,
}

fn hit_order(a: &Hit, b: &Hit) -> std::cmp::Ordering {
    b.violation.total_cmp(&a.violation).then_with(|| a.subset.cmp(&b.subset)).then(a.facet.cmp(&b.facet))
}

fn prune(hits: &mut Vec<Hit>, cap: usize) {
    hits.sort_by(hit_order);
    hits.truncate(cap);
}

fn scan_subset(p: &LiftedPoint, dense: &[DenseIneq], subset: &[usize], tol: f64, out: &mut Vec<Hit>, cap: usize) {
    for (f, ineq) in dense.iter().enumerate() {
        let v = -ineq.evaluate_on(p, subset);
        if v > tol {
            out.push(Hit { violation: v, subset: subset.to_vec(), facet: f });
            if out.len() > cap.saturating_mul(2).max(1) {
                prune(out, cap);
            }
        }
    }
}

fn finish(p: &LiftedPoint, atlas: &FacetAtlas, mut hits: Vec<Hit>, cap: usize) -> Result<Vec<SeparatedCut>> {
    prune(&mut hits, cap);
    hits.into_iter()
        .map(|h| {
            Ok(SeparatedCut {
                cut: atlas.facets[h.facet].lift(&h.subset, p.n())?,
                violation: h.violation,
                subset: h.subset,
                facet: h.facet,
            })
        })
        .collect()
}

/// Evaluates every atlas facet on every `k`-subset of indices and returns the
/// violated ones (violation `> tol`), most violated first, at most `cap`.
pub fn atlas_separate(p: &LiftedPoint, atlas: &FacetAtlas, tol: f64, cap: usize) -> Result<Vec<SeparatedCut>> {
    let n = p.n();
    let k = atlas.n;
    if k > n || cap == 0 {
        return Ok(Vec::new());
    }
    let dense = atlas.dense();
    let hits = (0..n)
        .into_par_iter()
        .fold(Vec::new, |mut acc, first| {
            for rest in (first + 1..n).combinations(k - 1) {
                let mut subset = Vec::with_capacity(k);
                subset.push(first);
                subset.extend(rest);
                scan_subset(p, &dense, &subset, tol, &mut acc, cap);
            }
            acc
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            if a.len() > cap.saturating_mul(2) {
                prune(&mut a, cap);
            }
            a
        });
    finish(p, atlas, hits, cap)
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Like [`atlas_separate`] but scans at most `max_subsets` index subsets,
/// drawn uniformly without repetition from a seeded RNG when `C(n, k)` exceeds
/// the budget.
pub fn atlas_separate_sampled(
    p: &LiftedPoint,
    atlas: &FacetAtlas,
    tol: f64,
    cap: usize,
    max_subsets: usize,
    seed: u64,
) -> Result<Vec<SeparatedCut>> {
    let n = p.n();
    let k = atlas.n;
    if k > n || cap == 0 {
        return Ok(Vec::new());
    }
    if binomial(n, k) <= max_subsets as u128 {
        return atlas_separate(p, atlas, tol, cap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(max_subsets);
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(max_subsets);
    while subsets.len() < max_subsets {
        let mut s = sample(&mut rng, n, k).into_vec();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            subsets.push(s);
        }
    }
    let dense = atlas.dense();
    let hits = subsets
        .par_iter()
        .fold(Vec::new, |mut acc, s| {
            scan_subset(p, &dense, s, tol, &mut acc, cap);
            acc
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            if a.len() > cap.saturating_mul(2) {
                prune(&mut a, cap);
            }
            a
        });
    finish(p, atlas, hits, cap)
}

fn body_text(facets: &[LinearIneq]) -> String {
    let mut s = String::new();
    for f in facets {
        s.push_str(&f.to_string());
        s.push('\n');
    }
    s
}

pub fn save_atlas(atlas: &FacetAtlas, path: &Path) -> Result<()> {
    let body = body_text(&atlas.facets);
    let sha = hex::encode(Sha256::digest(body.as_bytes()));
    let mut f = fs::File::create(path)?;
    writeln!(f, "BQPATLAS v1 n={} count={} sha={}", atlas.n, atlas.facets.len(), sha)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

pub fn load_atlas(path: &Path) -> Result<FacetAtlas> {
    let text = fs::read_to_string(path)?;
    let (header, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let mut it = header.split_whitespace();
    let bad = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
    if it.next() != Some("BQPATLAS") {
        return Err(bad("missing BQPATLAS header"));
    }
    let version = it.next().ok_or_else(|| bad("missing version"))?;
    if version != "v1" {
        return Err(Error::Version(version.to_string()));
    }
    let field = |tok: Option<&str>, key: &str| -> Result<String> {
        tok.and_then(|t| t.strip_prefix(key)).map(str::to_string).ok_or_else(|| bad(&format!("missing {key}")))
    };
    let n: usize = field(it.next(), "n=")?.parse().map_err(|_| bad("bad n"))?;
    let count: usize = field(it.next(), "count=")?.parse().map_err(|_| bad("bad count"))?;
    let sha = field(it.next(), "sha=")?;
    let found = hex::encode(Sha256::digest(body.as_bytes()));
    if found != sha {
        return Err(Error::Checksum { path: path.to_path_buf(), expected: sha, found });
    }
    let mut facets = Vec::with_capacity(count);
    for (k, line) in body.lines().enumerate() {
        let ineq: LinearIneq = line.parse().map_err(|e: Error| Error::Parse { line: k + 2, msg: e.to_string() })?;
        if ineq.n != n {
            return Err(Error::Parse { line: k + 2, msg: format!("dimension {} in an n={n} atlas", ineq.n) });
        }
        facets.push(ineq);
    }
    if facets.len() != count {
        return Err(bad(&format!("header count {count} but {} facets", facets.len())));
    }
    Ok(FacetAtlas { n, facets, meta: AtlasMeta { method: "file".into(), checksum: sha } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{int, rat};
    use crate::ineq::{is_valid_bqp, mccormick_ineqs, triangle_ineqs};
    use rand::seq::SliceRandom;

    #[test]
    fn vertex_lists() {
        let v1 = bqp_vertices(1).unwrap();
        assert_eq!(v1, vec![vec![0], vec![1]]);
        let v2 = bqp_vertices(2).unwrap();
        assert_eq!(v2.len(), 4);
        assert_eq!(v2.iter().filter(|v| v[2] == 1).count(), 1);
        assert_eq!(v2[3], vec![1, 1, 1]);
        let v5 = bqp_vertices(5).unwrap();
        assert_eq!(v5.len(), 32);
        assert!(v5.iter().all(|v| v.len() == 15));
        assert!(bqp_vertices(7).is_err());
    }

    #[test]
    fn small_atlases() {
        let a2 = enumerate_facets(2).unwrap();
        let mut mc = mccormick_ineqs(2);
        mc.sort();
        assert_eq!(a2.facets, mc);
        let a3 = enumerate_facets(3).unwrap();
        let mut expect = mccormick_ineqs(3);
        expect.extend(triangle_ineqs(3));
        expect.sort();
        assert_eq!(a3.facets, expect);
        assert!(enumerate_facets(6).is_err());
    }

    #[test]
    fn locked_counts() {
        let a4 = enumerate_facets(4).unwrap();
        assert_eq!(a4.len(), 56);
        assert_eq!(a4.meta.checksum, "fc42996e80cebbbca8e1095972bc3e2ea35fa320c016f1375f7ef95b77d101b8");
        let a5 = enumerate_facets(5).unwrap();
        assert_eq!(a5.len(), 368);
        assert_eq!(a5.meta.checksum, "57c11cb3aaa5c7e5360c916e27473a31989f743630981b030fd95a6493a5d39f");
    }

    #[test]
    fn one_dimensional_atlas() {
        let a1 = enumerate_facets(1).unwrap();
        assert_eq!(a1.facets.len(), 2);
    }

    #[test]
    fn order_independence() {
        let n = 4;
        let base = enumerate_facets(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let mut v = bqp_vertices(n).unwrap();
            v.shuffle(&mut rng);
            let a = enumerate_from_vertices(n, &v, &EnumerateOptions::default()).unwrap();
            assert_eq!(a.facets, base.facets);
        }
    }

    #[test]
    fn facetness_examples() {
        let tri = triangle_ineqs(3)[3].clone();
        assert!(facetness_check(&tri, 3).unwrap());
        let mut loose = LinearIneq::from_ints(2, 1, &[0, 0], &[(0, 1, 1)]);
        assert!(is_valid_bqp(&loose).unwrap());
        assert!(!facetness_check(&loose, 2).unwrap());
        loose.gamma = int(0);
        assert!(facetness_check(&loose, 2).unwrap());
        let mc = mccormick_ineqs(3);
        let sum = mc[0].add(&mc[2]).unwrap();
        assert!(!facetness_check(&sum, 3).unwrap());
    }

    #[test]
    fn canonical_forms() {
        let mut half = LinearIneq::zero(2);
        half.beta[0] = rat(1, 2);
        let c = canonicalize(&half).unwrap();
        assert_eq!(c, LinearIneq::from_ints(2, 0, &[0, 0], &[(0, 1, 1)]));
        assert_eq!(canonicalize(&c).unwrap(), c);
        let l2 = LinearIneq::from_ints(2, 3, &[78, 144], &[(0, 1, -200)]);
        assert_eq!(canonicalize(&l2).unwrap(), l2);
        assert!(canonicalize(&LinearIneq::zero(3)).is_err());
        assert_eq!(canonicalize(&l2.scale(&rat(6, 7))).unwrap(), l2);
    }

    #[test]
    fn separation_examples() {
        let atlas = enumerate_facets(3).unwrap();
        let rank1 = LiftedPoint::rank_one(&[0.2, 0.9, 0.4, 0.7]);
        assert!(atlas_separate(&rank1, &atlas, 1e-9, 100).unwrap().is_empty());
        // Violate X01 - X02 - X12 + x2 >= 0 on {0, 1, 2} by 0.5.
        let mut p = LiftedPoint::rank_one(&[0.5, 0.5, 0.5, 0.0]);
        p.set(0, 1, 0.0);
        p.set(0, 2, 0.5);
        p.set(1, 2, 0.5);
        p.set(0, 0, 0.5);
        let cuts = atlas_separate(&p, &atlas, 1e-9, 100).unwrap();
        assert!(!cuts.is_empty());
        let tri = crate::ineq::triangles_for(4, 0, 1, 2)[0].clone();
        let hit = cuts.iter().find(|c| c.cut == tri).expect("triangle found");
        assert!((hit.violation - 0.5).abs() < 1e-12);
        assert!((crate::ineq::evaluate(&hit.cut, &p).unwrap() + hit.violation).abs() < 1e-12);
        let capped = atlas_separate(&p, &atlas, 1e-9, 2).unwrap();
        assert!(capped.len() <= 2);
        assert!(cuts.windows(2).all(|w| w[0].violation >= w[1].violation));
    }

    #[test]
    fn sampled_separation_is_seeded() {
        let atlas = enumerate_facets(3).unwrap();
        let mut p = LiftedPoint::rank_one(&[0.5; 9]);
        for i in 0..9 {
            for j in i + 1..9 {
                p.set(i, j, if (i + j) % 2 == 0 { 0.0 } else { 0.5 });
            }
        }
        let a = atlas_separate_sampled(&p, &atlas, 1e-9, 50, 20, 11).unwrap();
        let b = atlas_separate_sampled(&p, &atlas, 1e-9, 50, 20, 11).unwrap();
        assert_eq!(a, b);
        let subsets: HashSet<_> = a.iter().map(|c| c.subset.clone()).collect();
        assert!(subsets.len() <= 20);
        assert_eq!(binomial(100, 5), 75_287_520);
    }

    #[test]
    fn atlas_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a3.atlas");
        let a = enumerate_facets(3).unwrap();
        save_atlas(&a, &path).unwrap();
        let b = load_atlas(&path).unwrap();
        assert_eq!(a.facets, b.facets);
        assert_eq!(a.meta.checksum, b.meta.checksum);
        let bytes = fs::read(&path).unwrap();
        let p2 = dir.path().join("again.atlas");
        save_atlas(&b, &p2).unwrap();
        assert_eq!(bytes, fs::read(&p2).unwrap());
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_atlas(&path), Err(Error::Checksum { .. })));
        let text = String::from_utf8(bytes).unwrap().replacen("v1", "v9", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_atlas(&path), Err(Error::Version(_))));
    }

    #[test]
    fn checkpoint_resume_matches() {
        let dir = tempfile::tempdir().unwrap();
        let cp = dir.path().join("cp.json");
        let opts = EnumerateOptions { checkpoint: Some(cp.clone()), checkpoint_every: 1, ..Default::default() };
        let a = enumerate_facets_with(4, &opts).unwrap();
        assert!(cp.exists());
        // Resuming from the finished checkpoint returns the same atlas.
        let b = enumerate_facets_with(4, &opts).unwrap();
        assert_eq!(a.facets, b.facets);
    }
}
