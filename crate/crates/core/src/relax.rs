//! Lifted linear relaxations of QCQPs, the eigen-cut outer approximation of
//! the PSD constraint on the moment matrix, and the cutting-plane pipelines
//! (i)–(ix) built from McCormick, triangle, atlas and BH cuts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{atlas_separate, atlas_separate_sampled, binomial, enumerate_facets, FacetAtlas};
use crate::eigencg::{eigen_cut_float, FloatVec};
use crate::error::{Error, Result};
use crate::exactnum::rational_to_f64;
use crate::ineq::{pairs, triangles_for, LiftedPoint, LinearIneq, QcqpInstance};
use crate::numerics::{jacobi_eigen, LpProblem, LpRow, LpSession, LpStatus, Relation, JACOBI_TOL};
use crate::separate::{sampling_loop, SeparatorConfig};

/// Column layout: `x₀…x_{n−1}`, then `X_ij` for `i ≤ j` row by row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub n: usize,
}

impl VarMap {
    pub fn num_vars(&self) -> usize {
        self.n + self.n * (self.n + 1) / 2
    }

    pub fn x(&self, i: usize) -> usize {
        i
    }

    /// Column of `X_ij` in either order, diagonal included.
    pub fn xx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.n + i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.n).map(|i| format!("x{}", i + 1)).collect();
        for i in 0..self.n {
            for j in i..self.n {
                out.push(format!("X{}_{}", i + 1, j + 1));
            }
        }
        out
    }

    /// `γ + αᵀx + βᵀX + diagᵀX_ii ≥ 0` as an LP row.
    pub fn row(&self, ineq: &LinearIneq) -> Result<LpRow> {
        if ineq.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: ineq.n });
        }
        let mut terms = Vec::new();
        for i in 0..self.n {
            terms.push((self.x(i), rational_to_f64(&ineq.alpha[i])));
            if !ineq.diag.is_empty() {
                terms.push((self.xx(i, i), rational_to_f64(&ineq.diag[i])));
            }
        }
        for (k, (i, j)) in pairs(self.n).enumerate() {
            terms.push((self.xx(i, j), rational_to_f64(&ineq.beta[k])));
        }
        terms.retain(|t| t.1 != 0.0);
        Ok(LpRow::new(terms, Relation::Ge, -rational_to_f64(&ineq.gamma)))
    }

    /// The lifted point stored in a primal vector.
    pub fn point(&self, sol: &[f64]) -> LiftedPoint {
        let n = self.n;
        let mut p = LiftedPoint::rank_one(&sol[..n]);
        for i in 0..n {
            for j in i..n {
                p.set(i, j, sol[self.xx(i, j)]);
            }
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleMode {
    None,
    All,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpMode {
    None,
    EigenCutLoop,
}

/// One separation pass over the BQP_k atlas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasPass {
    pub k: usize,
    pub tol: f64,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BhMode {
    None,
    SamplingLoop(SeparatorConfig),
}

/// The relaxations studied, from plain McCormick up to BH sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relaxation {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
}

impl Relaxation {
    pub const ALL: [Relaxation; 9] = [
        Relaxation::I,
        Relaxation::II,
        Relaxation::III,
        Relaxation::IV,
        Relaxation::V,
        Relaxation::VI,
        Relaxation::VII,
        Relaxation::VIII,
        Relaxation::IX,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Relaxation::I => "i",
            Relaxation::II => "ii",
            Relaxation::III => "iii",
            Relaxation::IV => "iv",
            Relaxation::V => "v",
            Relaxation::VI => "vi",
            Relaxation::VII => "vii",
            Relaxation::VIII => "viii",
            Relaxation::IX => "ix",
        }
    }
}

impl std::str::FromStr for Relaxation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relaxation::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::domain(format!("unknown relaxation '{s}' (expected i to ix)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub use_mccormick: bool,
    pub triangle_mode: TriangleMode,
    pub sdp_mode: SdpMode,
    pub atlas_passes: Vec<AtlasPass>,
    pub bh_mode: BhMode,
    pub bqp4_cap: usize,
    pub bqp5_combo_cap: usize,
    pub tol_with_sdp: f64,
    pub tol_without_sdp: f64,
    pub sdp_max_iters: usize,
    pub eig_tol: f64,
    pub triangle_rounds: usize,
    pub seed: u64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            use_mccormick: true,
            triangle_mode: TriangleMode::None,
            sdp_mode: SdpMode::None,
            atlas_passes: Vec::new(),
            bh_mode: BhMode::None,
            bqp4_cap: 50_000,
            bqp5_combo_cap: 100_000,
            tol_with_sdp: 1e-3,
            tol_without_sdp: 1e-2,
            sdp_max_iters: 500,
            eig_tol: 1e-6,
            triangle_rounds: 20,
            seed: 0,
        }
    }
}

impl RelaxConfig {
    pub fn preset(r: Relaxation) -> Self {
        let base = RelaxConfig::default();
        let sdp_tol = base.tol_with_sdp;
        let lp_tol = base.tol_without_sdp;
        let uncapped = usize::MAX;
        let with = |triangle_mode, sdp_mode, atlas_passes: Vec<AtlasPass>| RelaxConfig {
            triangle_mode,
            sdp_mode,
            atlas_passes,
            ..base.clone()
        };
        match r {
            Relaxation::I => base.clone(),
            Relaxation::II => with(TriangleMode::All, SdpMode::None, vec![]),
            Relaxation::III => with(TriangleMode::None, SdpMode::EigenCutLoop, vec![]),
            Relaxation::IV => with(TriangleMode::All, SdpMode::EigenCutLoop, vec![]),
            Relaxation::V => with(
                TriangleMode::Violated,
                SdpMode::EigenCutLoop,
                vec![AtlasPass { k: 4, tol: sdp_tol, cap: uncapped }],
            ),
            Relaxation::VI => with(
                TriangleMode::Violated,
                SdpMode::EigenCutLoop,
                vec![AtlasPass { k: 4, tol: sdp_tol, cap: uncapped }, AtlasPass { k: 5, tol: sdp_tol, cap: uncapped }],
            ),
            Relaxation::VII => with(
                TriangleMode::Violated,
                SdpMode::None,
                vec![AtlasPass { k: 4, tol: lp_tol, cap: base.bqp4_cap }],
            ),
            Relaxation::VIII | Relaxation::IX => {
                let mut c = with(
                    TriangleMode::Violated,
                    SdpMode::None,
                    vec![AtlasPass { k: 4, tol: lp_tol, cap: base.bqp4_cap }, AtlasPass { k: 5, tol: lp_tol, cap: uncapped }],
                );
                if r == Relaxation::IX {
                    let sep = SeparatorConfig { time_limit: Some(std::time::Duration::from_secs(30)), ..Default::default() };
                    c.bh_mode = BhMode::SamplingLoop(sep);
                }
                c
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bqp4_cap == 0 || self.bqp5_combo_cap == 0 {
            return Err(Error::domain("caps must be positive"));
        }
        if !(self.tol_with_sdp > 0.0 && self.tol_without_sdp > 0.0 && self.eig_tol > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        if let Some(p) = self.atlas_passes.iter().find(|p| p.k < 2 || p.k > 5) {
            return Err(Error::domain(format!("atlas pass for k = {} is not supported", p.k)));
        }
        Ok(())
    }

    /// Violation tolerance for triangle and atlas separation.
    pub fn tol(&self) -> f64 {
        match self.sdp_mode {
            SdpMode::EigenCutLoop => self.tol_with_sdp,
            SdpMode::None => self.tol_without_sdp,
        }
    }
}

/// Rows for the quadratic constraints, diagonal bounds and, if asked,
/// McCormick inequalities. Objective `⟨X, Q₀⟩ + c₀ᵀx`.
pub fn build_lifted_model(inst: &QcqpInstance, cfg: &RelaxConfig) -> Result<(LpProblem, VarMap)> {
    let n = inst.n;
    let map = VarMap { n };
    let mut lp = LpProblem::new(map.num_vars());
    for j in 0..map.num_vars() {
        lp.set_bounds(j, 0.0, 1.0);
    }
    lp.col_names = Some(map.names());
    for i in 0..n {
        lp.objective[map.x(i)] = inst.c0[i];
        for j in i..n {
            lp.objective[map.xx(i, j)] = if i == j { inst.q0[i][i] } else { inst.q0[i][j] + inst.q0[j][i] };
        }
    }
    for k in &inst.constraints {
        let mut terms = Vec::new();
        for i in 0..n {
            terms.push((map.x(i), k.c[i]));
            for j in i..n {
                let v = if i == j { k.q[i][i] } else { k.q[i][j] + k.q[j][i] };
                terms.push((map.xx(i, j), v));
            }
        }
        terms.retain(|t| t.1 != 0.0);
        let rel = match k.sense {
            crate::ineq::ConstraintSense::Le => Relation::Le,
            crate::ineq::ConstraintSense::Eq => Relation::Eq,
        };
        lp.add_row(LpRow::new(terms, rel, -k.d));
    }
    for i in 0..n {
        lp.add_row(LpRow::new([(map.xx(i, i), 1.0), (map.x(i), -1.0)], Relation::Le, 0.0));
        lp.add_row(LpRow::new([(map.xx(i, i), 1.0), (map.x(i), -2.0)], Relation::Ge, -1.0));
    }
    if cfg.use_mccormick {
        for (i, j) in pairs(n) {
            let xij = map.xx(i, j);
            lp.add_row(LpRow::new([(xij, 1.0), (map.x(i), -1.0)], Relation::Le, 0.0));
            lp.add_row(LpRow::new([(xij, 1.0), (map.x(j), -1.0)], Relation::Le, 0.0));
            lp.add_row(LpRow::new([(xij, 1.0)], Relation::Ge, 0.0));
            lp.add_row(LpRow::new([(xij, 1.0), (map.x(i), -1.0), (map.x(j), -1.0)], Relation::Ge, -1.0));
        }
    }
    if cfg.triangle_mode == TriangleMode::All {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for t in triangles_for(n, i, j, k) {
                        lp.add_row(map.row(&t)?);
                    }
                }
            }
        }
    }
    Ok((lp, map))
}

/// One line of the per-iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: String,
    pub iteration: usize,
    pub cuts_added: usize,
    pub bound: f64,
    pub time_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpOutcome {
    pub point: LiftedPoint,
    pub bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_eigenvalue: f64,
}

/// A live relaxation: the LP session plus bookkeeping for cuts and trace.
pub struct Relaxer {
    session: LpSession,
    map: VarMap,
    started: Instant,
    pub trace: Vec<TraceRow>,
    pub cuts_by_family: BTreeMap<String, usize>,
    seen: HashSet<LinearIneq>,
    bound: f64,
    point: Option<LiftedPoint>,
}

impl Relaxer {
    pub fn new(inst: &QcqpInstance, cfg: &RelaxConfig) -> Result<Self> {
        let (lp, map) = build_lifted_model(inst, cfg)?;
        Ok(Relaxer {
            session: LpSession::new(lp)?,
            map,
            started: Instant::now(),
            trace: Vec::new(),
            cuts_by_family: BTreeMap::new(),
            seen: HashSet::new(),
            bound: f64::NEG_INFINITY,
            point: None,
        })
    }

    pub fn map(&self) -> VarMap {
        self.map
    }

    pub fn problem(&self) -> &LpProblem {
        self.session.problem()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn point(&self) -> Option<&LiftedPoint> {
        self.point.as_ref()
    }

    /// Every exact cut added so far, eigen-cuts excluded.
    pub fn cuts(&self) -> impl Iterator<Item = &LinearIneq> {
        self.seen.iter()
    }

    /// Solves the current LP.
    pub fn solve(&mut self) -> Result<(f64, LiftedPoint)> {
        let sol = self.session.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::domain("relaxation is infeasible")),
            LpStatus::Unbounded => return Err(Error::LpFailure("bounded relaxation reported unbounded".into())),
            LpStatus::IterLimit => return Err(Error::LpFailure("simplex iteration limit".into())),
        }
        let p = self.map.point(&sol.x);
        self.bound = sol.objective;
        self.point = Some(p.clone());
        Ok((sol.objective, p))
    }

    fn log(&mut self, stage: &str, iteration: usize, cuts_added: usize) {
        self.trace.push(TraceRow {
            stage: stage.to_string(),
            iteration,
            cuts_added,
            bound: self.bound,
            time_secs: self.started.elapsed().as_secs_f64(),
        });
    }

    /// Adds the inequalities not already present; returns how many were new.
    pub fn add_cuts(&mut self, family: &str, cuts: impl IntoIterator<Item = LinearIneq>) -> Result<usize> {
        let mut rows = Vec::new();
        for c in cuts {
            if self.seen.insert(c.clone()) {
                rows.push(self.map.row(&c)?);
            }
        }
        let k = rows.len();
        self.session.add_rows(rows)?;
        *self.cuts_by_family.entry(family.to_string()).or_default() += k;
        Ok(k)
    }

    /// Adds raw rows without deduplication.
    pub fn add_rows(&mut self, family: &str, rows: Vec<LpRow>) -> Result<usize> {
        let k = rows.len();
        self.session.add_rows(rows)?;
        *self.cuts_by_family.entry(family.to_string()).or_default() += k;
        Ok(k)
    }

    /// Alternates LP solves with eigen-cuts `(v₀ + vᵀx)² ≥ 0` for every
    /// eigenvector of the moment matrix with eigenvalue below `−eig_tol`,
    /// until the moment matrix is PSD within `eig_tol` or `max_iters` rounds
    /// of cuts have been added.
    pub fn sdp_loop(&mut self, max_iters: usize, eig_tol: f64) -> Result<SdpOutcome> {
        let (mut bound, mut point) = self.solve()?;
        let mut iterations = 0;
        loop {
            let e = jacobi_eigen(&point.moment_matrix(), JACOBI_TOL)?;
            let min = e.min_value();
            if min >= -eig_tol || iterations == max_iters {
                self.log("sdp", iterations, 0);
                return Ok(SdpOutcome { point, bound, iterations, converged: min >= -eig_tol, min_eigenvalue: min });
            }
            let mut rows = Vec::new();
            for (val, vec) in e.values.iter().zip(&e.vectors) {
                if *val >= -eig_tol {
                    break;
                }
                let cut = eigen_cut_float(&FloatVec::with_err(vec[0], vec[1..].to_vec(), 0.0));
                rows.push(self.eigen_row(&cut.alpha, &cut.beta, &cut.diag, cut.gamma));
            }
            iterations += 1;
            let k = self.add_rows("eigen", rows)?;
            (bound, point) = self.solve()?;
            self.log("sdp", iterations, k);
        }
    }

    fn eigen_row(&self, alpha: &[f64], beta: &[f64], diag: &[f64], gamma: f64) -> LpRow {
        let n = self.map.n;
        let mut terms = Vec::with_capacity(self.map.num_vars());
        for i in 0..n {
            terms.push((self.map.x(i), alpha[i]));
            terms.push((self.map.xx(i, i), diag[i]));
        }
        for (k, (i, j)) in pairs(n).enumerate() {
            terms.push((self.map.xx(i, j), beta[k]));
        }
        terms.retain(|t| t.1 != 0.0);
        LpRow::new(terms, Relation::Ge, -gamma)
    }

}

/// Violated triangle inequalities at `p`, most violated first.
pub fn violated_triangles(p: &LiftedPoint, tol: f64) -> Vec<(f64, LinearIneq)> {
    let n = p.n();
    let mut hits: Vec<(f64, [usize; 3], usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut local = Vec::new();
            for j in i + 1..n {
                for k in j + 1..n {
                    let (xij, xik, xjk) = (p.get(i, j), p.get(i, k), p.get(j, k));
                    let vals = [
                        xij - xik - xjk + p.x[k],
                        xik - xij - xjk + p.x[j],
                        xjk - xij - xik + p.x[i],
                        xij + xik + xjk - p.x[i] - p.x[j] - p.x[k] + 1.0,
                    ];
                    for (t, v) in vals.iter().enumerate() {
                        if -v > tol {
                            local.push((-v, [i, j, k], t));
                        }
                    }
                }
            }
            local
        })
        .collect();
    hits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    hits.into_iter().map(|(v, [i, j, k], t)| (v, triangles_for(n, i, j, k)[t].clone())).collect()
}

/// Atlases shared by pipelines; enumerated on first use.
#[derive(Clone, Default)]
pub struct AtlasSet {
    atlases: HashMap<usize, Arc<FacetAtlas>>,
}

static BUILT: OnceLock<Mutex<HashMap<usize, Arc<FacetAtlas>>>> = OnceLock::new();

impl AtlasSet {
    pub fn insert(&mut self, atlas: FacetAtlas) {
        self.atlases.insert(atlas.n, Arc::new(atlas));
    }

    pub fn get(&self, k: usize) -> Result<Arc<FacetAtlas>> {
        if let Some(a) = self.atlases.get(&k) {
            return Ok(a.clone());
        }
        let cache = BUILT.get_or_init(Default::default);
        let mut guard = cache.lock().expect("atlas cache poisoned");
        if let Some(a) = guard.get(&k) {
            return Ok(a.clone());
        }
        let a = Arc::new(enumerate_facets(k)?);
        guard.insert(k, a.clone());
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBound {
    pub stage: String,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub bound: f64,
    pub stages: Vec<StageBound>,
    pub cuts_added: BTreeMap<String, usize>,
    pub time_secs: f64,
    pub sdp_converged: Option<bool>,
    pub seed: u64,
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub point: Option<LiftedPoint>,
}

impl PipelineReport {
    /// Whether no stage lowered the bound by more than `tol·(1 + |bound|)`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.stages.windows(2).all(|w| w[1].bound >= w[0].bound - tol * (1.0 + w[0].bound.abs()))
    }
}

pub fn run_pipeline(inst: &QcqpInstance, cfg: &RelaxConfig) -> Result<PipelineReport> {
    run_pipeline_with(inst, cfg, &AtlasSet::default())
}

/// Builds the static model, then applies violated triangles, atlas passes
/// and the BH loop as configured, re-solving after each family. With the
/// eigen-cut loop enabled every re-solve restores PSD feasibility.
pub fn run_pipeline_with(inst: &QcqpInstance, cfg: &RelaxConfig, atlases: &AtlasSet) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut rx = Relaxer::new(inst, cfg)?;
    run_stages(&mut rx, cfg, atlases)
}

/// The separation stages of [`run_pipeline_with`] on a relaxer built from
/// the same `cfg`; the relaxer keeps every added cut.
pub fn run_stages(rx: &mut Relaxer, cfg: &RelaxConfig, atlases: &AtlasSet) -> Result<PipelineReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut stages = Vec::new();
    let mut sdp_converged = None;
    let stage = |rx: &mut Relaxer, name: &str, stages: &mut Vec<StageBound>| {
        stages.push(StageBound { stage: name.to_string(), bound: rx.bound });
    };
    let resolve = |rx: &mut Relaxer, conv: &mut Option<bool>| -> Result<()> {
        if cfg.sdp_mode == SdpMode::EigenCutLoop {
            let o = rx.sdp_loop(cfg.sdp_max_iters, cfg.eig_tol)?;
            *conv = Some(o.converged && conv.unwrap_or(true));
        } else {
            rx.solve()?;
            rx.log("lp", 0, 0);
        }
        Ok(())
    };
    resolve(&mut *rx, &mut sdp_converged)?;
    stage(&mut *rx, "base", &mut stages);
    let tol = cfg.tol();
    if cfg.triangle_mode == TriangleMode::Violated {
        for round in 1..=cfg.triangle_rounds {
            let p = rx.point.clone().expect("solved");
            let cuts = violated_triangles(&p, tol);
            if cuts.is_empty() {
                break;
            }
            let k = rx.add_cuts("triangle", cuts.into_iter().map(|c| c.1))?;
            if k == 0 {
                break;
            }
            resolve(&mut *rx, &mut sdp_converged)?;
            rx.log("triangle", round, k);
        }
        stage(&mut *rx, "triangle", &mut stages);
    }
    for pass in &cfg.atlas_passes {
        let atlas = atlases.get(pass.k)?;
        let p = rx.point.clone().expect("solved");
        let n = p.n();
        let cuts = if cfg.sdp_mode == SdpMode::None && pass.k == 5 && binomial(n, 5) > cfg.bqp5_combo_cap as u128 {
            atlas_separate_sampled(&p, &atlas, pass.tol, pass.cap, cfg.bqp5_combo_cap, cfg.seed)?
        } else {
            atlas_separate(&p, &atlas, pass.tol, pass.cap)?
        };
        let family = format!("bqp{}", pass.k);
        let k = rx.add_cuts(&family, cuts.into_iter().map(|c| c.cut))?;
        if k > 0 {
            resolve(&mut *rx, &mut sdp_converged)?;
        }
        rx.log(&family, 1, k);
        stage(&mut *rx, &family, &mut stages);
    }
    if let BhMode::SamplingLoop(sep) = &cfg.bh_mode {
        let sep = SeparatorConfig { seed: cfg.seed, ..sep.clone() };
        let p0 = rx.point.clone().expect("solved");
        let mut round = 0;
        let mut failure: Option<Error> = None;
        sampling_loop(p0, &sep, |cuts| {
            round += 1;
            let k = rx.add_cuts("bh", cuts.iter().map(|c| c.ineq.clone()))?;
            let r = resolve(&mut *rx, &mut sdp_converged);
            rx.log("bh", round, k);
            match r {
                Ok(()) => Ok(rx.point.clone().expect("solved")),
                Err(e) => {
                    let msg = e.to_string();
                    failure = Some(e);
                    Err(Error::Callback(msg))
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        stage(&mut *rx, "bh", &mut stages);
    }
    Ok(PipelineReport {
        bound: rx.bound,
        stages,
        cuts_added: rx.cuts_by_family.clone(),
        time_secs: started.elapsed().as_secs_f64(),
        sdp_converged,
        seed: cfg.seed,
        trace: std::mem::take(&mut rx.trace),
        point: rx.point.clone(),
    })
}

/// `|UB − LB| / |LB| · 100`.
pub fn gap_report(ub: f64, lb: f64) -> Result<f64> {
    if lb == 0.0 {
        return Err(Error::domain("gap is undefined for LB = 0"));
    }
    Ok((ub - lb).abs() / lb.abs() * 100.0)
}

/// Two decimals and a percent sign, e.g. `0.22%`.
pub fn format_gap(gap: f64) -> String {
    format!("{gap:.2}%")
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(report: &PipelineReport, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ineq::{binary_qp_optimum, evaluate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bqp(n: usize, seed: u64) -> QcqpInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-10i32..=10) as f64;
                q[i][j] = v;
                q[j][i] = v;
            }
        }
        let c = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
        QcqpInstance::binary_qp(q, c).unwrap()
    }

    #[test]
    fn var_map_layout() {
        let m = VarMap { n: 3 };
        assert_eq!(m.num_vars(), 9);
        let cols: Vec<usize> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).map(|(i, j)| m.xx(i, j)).collect();
        assert_eq!(cols, vec![3, 4, 5, 6, 7, 8]);
        assert_eq!(m.xx(2, 0), m.xx(0, 2));
        assert_eq!(m.names()[4], "X1_2");
    }

    #[test]
    fn model_examples() {
        let inst = QcqpInstance::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let (lp, map) = build_lifted_model(&inst, &RelaxConfig::default()).unwrap();
        assert_eq!(lp.rows.len(), 4 + 2 * 2);
        assert_eq!(map.num_vars(), 5);
        let bin = QcqpInstance::binary_qp(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let (lp, map) = build_lifted_model(&bin, &RelaxConfig::default()).unwrap();
        let eq = &lp.rows[0];
        assert_eq!(eq.rel, Relation::Eq);
        assert_eq!(eq.idx, vec![map.x(0), map.xx(0, 0)]);
        assert_eq!(eq.val, vec![1.0, -1.0]);
        let inst = random_bqp(4, 3);
        let (lp, map) = build_lifted_model(&inst, &RelaxConfig::default()).unwrap();
        let x = [0.3, 0.9, 0.1, 0.6];
        let p = LiftedPoint::rank_one(&x);
        let mut sol = x.to_vec();
        for i in 0..4 {
            for j in i..4 {
                sol.push(p.get(i, j));
            }
        }
        assert_eq!(sol.len(), map.num_vars());
        assert!((lp.objective_value(&sol) - inst.objective(&x)).abs() < 1e-12);
    }

    #[test]
    fn sdp_loop_examples() {
        // An already-binary optimum needs no eigen-cuts.
        let easy = QcqpInstance::binary_qp(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let mut rx = Relaxer::new(&easy, &RelaxConfig::default()).unwrap();
        let o = rx.sdp_loop(500, 1e-6).unwrap();
        assert_eq!(o.iterations, 0);
        assert!(o.converged);
        let tight = QcqpInstance::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let mut rx = Relaxer::new(&tight, &RelaxConfig::default()).unwrap();
        let o = rx.sdp_loop(500, 1e-6).unwrap();
        assert!(o.min_eigenvalue >= -1e-6);
        assert!(rx.trace.windows(2).all(|w| w[1].bound >= w[0].bound - 1e-9));
        // Box QP min x1² + x2² − x1 − x2: McCormick gives −1, the SDP bound is −½.
        let bx = QcqpInstance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![-1.0, -1.0]).unwrap();
        let mut rx = Relaxer::new(&bx, &RelaxConfig::default()).unwrap();
        let (b0, _) = rx.solve().unwrap();
        let o = rx.sdp_loop(500, 1e-6).unwrap();
        assert!(o.converged && o.iterations > 0);
        assert!(o.bound > b0 + 0.1);
        assert!((o.bound + 0.5).abs() < 1e-3);
        let bounds: Vec<f64> = rx.trace.iter().map(|t| t.bound).collect();
        assert!(bounds.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn eigen_cuts_separate_their_point() {
        let (p, e) = (0..50)
            .find_map(|seed| {
                let mut rx = Relaxer::new(&random_bqp(6, seed), &RelaxConfig::default()).unwrap();
                let (_, p) = rx.solve().unwrap();
                let e = jacobi_eigen(&p.moment_matrix(), JACOBI_TOL).unwrap();
                (e.min_value() < -1e-6).then_some((p, e))
            })
            .expect("some McCormick optimum is not PSD");
        let v = &e.vectors[0];
        let cut = eigen_cut_float(&FloatVec::with_err(v[0], v[1..].to_vec(), 0.0));
        assert!((cut.evaluate(&p) - e.values[0]).abs() < 1e-9);
    }

    #[test]
    fn triangle_search_matches_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut p = LiftedPoint::rank_one(&x);
        for i in 0..6 {
            for j in i + 1..6 {
                p.set(i, j, rng.gen_range(0.0..1.0));
            }
        }
        let found = violated_triangles(&p, 1e-3);
        let mut expect: Vec<(f64, LinearIneq)> = crate::ineq::triangle_ineqs(6)
            .into_iter()
            .map(|t| (-evaluate(&t, &p).unwrap(), t))
            .filter(|t| t.0 > 1e-3)
            .collect();
        expect.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert_eq!(found.len(), expect.len());
        for (a, b) in found.iter().zip(&expect) {
            assert!((a.0 - b.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxation_ordering_and_exactness() {
        for seed in 0..6 {
            let inst = random_bqp(5, seed);
            let opt = binary_qp_optimum(&inst).unwrap().unwrap().0;
            let b = |r| run_pipeline(&inst, &RelaxConfig::preset(r)).unwrap().bound;
            let (b1, b2) = (b(Relaxation::I), b(Relaxation::II));
            let b4 = b(Relaxation::IV);
            assert!(b1 <= b2 + 1e-7 && b2 <= b4 + 1e-6 && b4 <= opt + 1e-6, "{b1} {b2} {b4} {opt}");
            let cfg = RelaxConfig {
                atlas_passes: vec![
                    AtlasPass { k: 3, tol: 1e-9, cap: usize::MAX },
                    AtlasPass { k: 4, tol: 1e-9, cap: usize::MAX },
                    AtlasPass { k: 5, tol: 1e-9, cap: usize::MAX },
                ],
                ..RelaxConfig::default()
            };
            let r = run_pipeline(&inst, &cfg).unwrap();
            assert!(r.is_monotone(1e-9));
            assert!((r.bound - opt).abs() < 1e-7, "seed {seed}: {} vs {opt}", r.bound);
        }
    }

    #[test]
    fn added_cuts_are_valid() {
        for (seed, r) in [(5, Relaxation::VIII), (6, Relaxation::IX)] {
            // positive couplings with a rewarding diagonal keep McCormick fractional
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let mut q = vec![vec![0.0; n]; n];
            for i in 0..n {
                q[i][i] = rng.gen_range(-12i32..=-4) as f64;
                for j in i + 1..n {
                    let v = rng.gen_range(0i32..=6) as f64;
                    q[i][j] = v;
                    q[j][i] = v;
                }
            }
            let inst = QcqpInstance::binary_qp(q, vec![0.0; n]).unwrap();
            let mut cfg = RelaxConfig::preset(r);
            if let BhMode::SamplingLoop(sep) = &mut cfg.bh_mode {
                sep.time_limit = Some(std::time::Duration::from_secs(2));
                sep.max_rounds = 3;
            }
            let mut rx = Relaxer::new(&inst, &cfg).unwrap();
            let rep = run_stages(&mut rx, &cfg, &AtlasSet::default()).unwrap();
            assert!(rep.is_monotone(1e-7), "{:?}", rep.stages);
            let cuts: Vec<&LinearIneq> = rx.cuts().collect();
            assert!(!cuts.is_empty(), "{:?} {:?}", rx.cuts_by_family, rep.stages);
            for c in cuts.iter().step_by(3) {
                assert!(crate::ineq::is_valid_bqp(c).unwrap(), "{c}");
            }
        }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(format_gap(gap_report(-5.0, -5.0).unwrap()), "0.00%");
        assert_eq!(format_gap(gap_report(-9748.00, -9769.21).unwrap()), "0.22%");
        assert_eq!(format_gap(gap_report(-8837.00, -8837.00).unwrap()), "0.00%");
        assert!(gap_report(1.0, 0.0).is_err());
    }

    #[test]
    fn report_outputs() {
        let inst = random_bqp(5, 2);
        let r = run_pipeline(&inst, &RelaxConfig::preset(Relaxation::VIII)).unwrap();
        assert!(r.is_monotone(1e-9));
        let dir = tempfile::tempdir().unwrap();
        write_trace_csv(&r.trace, &dir.path().join("t.csv")).unwrap();
        write_report_json(&r, &dir.path().join("r.json")).unwrap();
        let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(csv.starts_with("stage,iteration,cuts_added,bound,time_secs"));
        let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(j["seed"], 0);
        assert!("vi".parse::<Relaxation>().unwrap() == Relaxation::VI);
        assert!("x".parse::<Relaxation>().is_err());
    }
}
