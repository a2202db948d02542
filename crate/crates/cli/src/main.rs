use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cutforge::atlas::{enumerate_facets_with, facetness_check, load_atlas, save_atlas, EnumerateOptions};
use cutforge::certify::{certify_batch_with, certify_one, BetaPattern, DEFAULT_BH_BOX, DEFAULT_LAMBDA_MAX};
use cutforge::eigencg::{classify_family, decompose_f2, ecg, RadicalVec};
use cutforge::ineq::{is_valid_bqp, pairs, LiftedPoint, LinearIneq};
use cutforge::io::{parse_biqmac, write_report, ReportRow, RunReport, Sense};
use cutforge::relax::{
    format_gap, gap_report, run_pipeline_with, write_trace_csv, AtlasSet, BhMode, RelaxConfig, Relaxation,
};
use cutforge::separate::{bh_separate, export_pool, sampling_loop, SeparatorConfig};
use cutforge::{Error, Radical, Rational};

#[derive(Parser)]
#[command(name = "cutforge", version, about = "Eigen-CG and Boros-Hammer cuts for binary and box QPs")]
struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "CUTFORGE_THREADS")]
    threads: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "CUTFORGE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build or verify a BQP facet atlas.
    #[command(subcommand)]
    Atlas(AtlasCmd),
    /// Family tag and E-CG inequality of a vector (v0, v).
    Classify(VecArgs),
    /// Split an F2 E-CG inequality into two BH inequalities.
    Decompose(VecArgs),
    /// Try to certify facets as non-E-CG.
    Certify(CertifyArgs),
    /// Run the BH separator on a lifted point.
    Separate(SeparateArgs),
    /// Solve one of the relaxations (i)..(ix) of a BiqMac instance.
    Solve(SolveArgs),
    /// Relative gap between an upper and a lower bound.
    Gap {
        #[arg(long, allow_hyphen_values = true)]
        ub: f64,
        #[arg(long, allow_hyphen_values = true)]
        lb: f64,
    },
}

#[derive(Subcommand)]
enum AtlasCmd {
    Build {
        #[arg(short, long)]
        n: usize,
        /// Defaults to `bqp<n>.atlas`.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Needed for n = 6.
        #[arg(long)]
        allow_long_run: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(short, long)]
        verbose: bool,
    },
    Verify {
        /// Defaults to `bqp<n>.atlas` when `-n` is given.
        path: Option<PathBuf>,
        #[arg(short, long)]
        n: Option<usize>,
        /// Also check that every entry is a facet (slow for n = 6).
        #[arg(long)]
        facetness: bool,
    },
}

#[derive(Args)]
struct VecArgs {
    /// `p`, `p/q` or `r*sqrt(d)`.
    #[arg(long, allow_hyphen_values = true)]
    v0: String,
    /// Comma-separated entries in the same syntax.
    #[arg(long, allow_hyphen_values = true)]
    v: String,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, conflicts_with = "ineq")]
    atlas: Option<PathBuf>,
    /// A single inequality in text form.
    #[arg(long)]
    ineq: Option<String>,
    #[arg(long = "box", default_value_t = DEFAULT_BH_BOX)]
    bh_box: i64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_MAX)]
    lambda_max: u64,
    /// `full` or `nonzero-only`.
    #[arg(long, default_value = "full")]
    pattern: String,
    /// Writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeparateArgs {
    /// JSON `{"x": [...], "xx": [[...], ...]}`.
    #[arg(long, conflicts_with = "instance")]
    point: Option<PathBuf>,
    /// Separate at the relaxation (i) optimum of this BiqMac file.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "max-to-min")]
    sense: String,
    /// 1-based indices for a single separation problem; otherwise the
    /// sampling loop runs.
    #[arg(long)]
    indices: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
    #[arg(long)]
    pool: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "i")]
    relaxation: String,
    #[arg(long, default_value = "max-to-min")]
    sense: String,
    /// Upper bound for the GAP column.
    #[arg(long, allow_hyphen_values = true)]
    ub: Option<f64>,
    /// `k=path` atlas files; missing ones are enumerated.
    #[arg(long)]
    atlas: Vec<String>,
    /// Time limit per BH separation problem, seconds.
    #[arg(long)]
    bh_time_limit: Option<f64>,
    /// Directory for the report and trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list(s: &str) -> anyhow::Result<Vec<Radical>> {
    s.split(',').map(|t| t.trim().parse::<Radical>().map_err(Into::into)).collect()
}

fn parse_indices(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(i) if i > 0 => Ok(i - 1),
            _ => bail!(Error::domain(format!("bad index `{t}`"))),
        })
        .collect()
}

/// `7 x1 + 10 x2 − 16 X1,2 ≥ 0` style rendering.
fn expression(ineq: &LinearIneq) -> String {
    let mut terms: Vec<(Rational, String)> = Vec::new();
    for (k, (i, j)) in pairs(ineq.n).enumerate() {
        terms.push((ineq.beta[k].clone(), format!("X{},{}", i + 1, j + 1)));
    }
    for i in 0..ineq.n {
        terms.push((ineq.diag[i].clone(), format!("X{},{}", i + 1, i + 1)));
    }
    for i in 0..ineq.n {
        terms.push((ineq.alpha[i].clone(), format!("x{}", i + 1)));
    }
    terms.push((ineq.gamma.clone(), String::new()));
    let mut out = String::new();
    for (c, name) in terms.into_iter().filter(|t| t.0 != Rational::from_integer(0.into())) {
        let neg = c < Rational::from_integer(0.into());
        let mag = if neg { -c } else { c };
        let body = match (mag == Rational::from_integer(1.into()), name.is_empty()) {
            (true, false) => name,
            (_, true) => mag.to_string(),
            _ => format!("{mag} {name}"),
        };
        if out.is_empty() {
            out = if neg { format!("-{body}") } else { body };
        } else {
            out.push_str(if neg { " - " } else { " + " });
            out.push_str(&body);
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out + " >= 0"
}

fn read_point(path: &Path) -> anyhow::Result<LiftedPoint> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let nums = |v: &serde_json::Value| -> anyhow::Result<Vec<f64>> {
        v.as_array()
            .context("expected an array")?
            .iter()
            .map(|x| x.as_f64().context("expected a number"))
            .collect()
    };
    let x = nums(&v["x"]).context("field `x`")?;
    let rows = v["xx"].as_array().context("field `xx`")?.iter().map(nums).collect::<anyhow::Result<Vec<_>>>()?;
    Ok(LiftedPoint::from_rows(x, &rows)?)
}

fn relax_point(instance: &Path, sense: Sense) -> anyhow::Result<LiftedPoint> {
    let inst = parse_biqmac(instance, sense)?;
    let r = run_pipeline_with(&inst, &RelaxConfig::preset(Relaxation::I), &AtlasSet::default())?;
    r.point.context("relaxation returned no point")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Atlas(AtlasCmd::Build { n, out, allow_long_run, checkpoint, verbose }) => {
            let opts = EnumerateOptions { allow_long_run, checkpoint, verbose, ..Default::default() };
            let atlas = enumerate_facets_with(n, &opts)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("bqp{n}.atlas")));
            save_atlas(&atlas, &out)?;
            println!("n={} facets={} sha={} -> {}", atlas.n, atlas.len(), atlas.meta.checksum, out.display());
        }
        Cmd::Atlas(AtlasCmd::Verify { path, n, facetness }) => {
            let path = match (path, n) {
                (Some(p), _) => p,
                (None, Some(n)) => PathBuf::from(format!("bqp{n}.atlas")),
                (None, None) => bail!(Error::domain("give an atlas path or -n")),
            };
            let atlas = load_atlas(&path)?;
            for (k, f) in atlas.facets.iter().enumerate() {
                if !is_valid_bqp(f)? {
                    bail!(Error::domain(format!("entry {} is not valid: {f}", k + 1)));
                }
                if facetness && !facetness_check(f, atlas.n)? {
                    bail!(Error::domain(format!("entry {} is not a facet: {f}", k + 1)));
                }
            }
            println!("n={} facets={} checksum OK", atlas.n, atlas.len());
        }
        Cmd::Classify(a) => {
            let w = RadicalVec::new(a.v0.parse()?, parse_list(&a.v)?);
            let e = ecg(&w);
            println!("{}", classify_family(&w));
            println!("{}", expression(&e));
            println!("{e}");
        }
        Cmd::Decompose(a) => {
            let w = RadicalVec::new(a.v0.parse()?, parse_list(&a.v)?);
            let d = decompose_f2(&w)?;
            let r: Vec<String> = d.normal.r.iter().map(ToString::to_string).collect();
            println!("p={} r=({}) a={}", d.normal.p, r.join(","), d.a);
            println!("{} * [{}]", d.lambda_minus, expression(&d.bh_minus));
            println!("{} * [{}]", d.lambda_plus, expression(&d.bh_plus));
            println!("combined constant {} <= {}", d.combined_constant, ecg(&w).gamma);
        }
        Cmd::Certify(a) => {
            let pattern = match a.pattern.as_str() {
                "full" => BetaPattern::Full,
                "nonzero-only" => BetaPattern::NonzeroOnly,
                p => bail!(Error::domain(format!("unknown pattern `{p}`"))),
            };
            if let Some(text) = a.ineq {
                let ineq: LinearIneq = text.parse()?;
                let (bucket, witness) = certify_one(&ineq, a.bh_box, a.lambda_max, pattern)?;
                println!("{bucket} {witness}");
                return Ok(());
            }
            let path = a.atlas.ok_or_else(|| Error::domain("give --atlas or --ineq"))?;
            let rep = certify_batch_with(&load_atlas(&path)?, a.bh_box, a.lambda_max, pattern)?;
            println!(
                "total={} bh={} sign_certified={} ratio_certified={} inconclusive={}",
                rep.total, rep.bh_count, rep.sign_certified, rep.ratio_certified, rep.inconclusive
            );
            if let Some(out) = a.out {
                rep.write_csv(&out.with_extension("csv"))?;
                rep.write_summary_json(&out.with_extension("json"))?;
            }
        }
        Cmd::Separate(a) => {
            let sense: Sense = a.sense.parse()?;
            let p = match (a.point, a.instance) {
                (Some(p), _) => read_point(&p)?,
                (None, Some(i)) => relax_point(&i, sense)?,
                (None, None) => bail!(Error::domain("give --point or --instance")),
            };
            let cfg = SeparatorConfig {
                time_limit: Some(Duration::from_secs_f64(a.time_limit)),
                seed: cli.seed,
                ..Default::default()
            };
            cfg.validate()?;
            if let Some(idx) = a.indices {
                let idx = parse_indices(&idx)?;
                let res = bh_separate(&p, &idx, &cfg)?;
                for c in &res.cuts {
                    println!("v_cut={:.6} w0={} w=({:?})", c.v_cut, c.w0, c.w);
                }
                println!("cuts={} nodes={} timed_out={}", res.cuts.len(), res.nodes, res.timed_out);
            } else {
                let fixed = p.clone();
                let out = sampling_loop(p, &cfg, |_| Ok(fixed.clone()))?;
                println!("pool={} rounds={} stop={:?}", out.pool.len(), out.rounds.len(), out.stop);
                if let Some(path) = a.pool {
                    export_pool(&out.pool, out.seed, &path)?;
                }
            }
        }
        Cmd::Solve(a) => {
            let sense: Sense = a.sense.parse()?;
            let rel: Relaxation = a.relaxation.parse()?;
            let inst = parse_biqmac(&a.instance, sense)?;
            let mut cfg = RelaxConfig::preset(rel);
            cfg.seed = cli.seed;
            if let (Some(t), BhMode::SamplingLoop(sep)) = (a.bh_time_limit, &mut cfg.bh_mode) {
                sep.time_limit = Some(Duration::from_secs_f64(t));
            }
            let mut atlases = AtlasSet::default();
            for spec in &a.atlas {
                let (k, path) = spec.split_once('=').ok_or_else(|| Error::domain(format!("expected k=path, got `{spec}`")))?;
                let atlas = load_atlas(Path::new(path))?;
                if atlas.n.to_string() != k {
                    bail!(Error::domain(format!("{path} holds an n={} atlas, not {k}", atlas.n)));
                }
                atlases.insert(atlas);
            }
            let r = run_pipeline_with(&inst, &cfg, &atlases)?;
            let gap = a.ub.map(|ub| gap_report(ub, r.bound)).transpose()?.map(format_gap);
            println!("relaxation={} bound={:.6}{}", rel.label(), r.bound, gap.as_ref().map(|g| format!(" gap={g}")).unwrap_or_default());
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir)?;
                let name = a.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let mut rep = RunReport::new(cli.seed, serde_json::to_value(&cfg)?);
                rep.rows.push(ReportRow {
                    instance: name.clone(),
                    relaxation: rel.label().to_string(),
                    bound: r.bound,
                    cuts_added: r.cuts_added.values().sum(),
                    time_secs: r.time_secs,
                    ub: a.ub,
                    gap,
                });
                let stem = dir.join(format!("{name}-{}", rel.label()));
                write_report(&rep, &stem)?;
                write_trace_csv(&r.trace, &dir.join(format!("{name}-{}-trace.csv", rel.label())))?;
            }
        }
        Cmd::Gap { ub, lb } => println!("{}", format_gap(gap_report(ub, lb)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.downcast_ref::<Error>().is_some_and(Error::is_numerical);
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}
