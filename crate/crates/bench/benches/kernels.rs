use criterion::{black_box, criterion_group, criterion_main, Criterion};
use cutforge::atlas::{atlas_separate, enumerate_facets};
use cutforge::eigencg::{ecg, RadicalVec};
use cutforge::io::{parse_biqmac_str, Sense};
use cutforge::numerics::{jacobi_eigen, JACOBI_TOL};
use cutforge::relax::{run_pipeline, violated_triangles, RelaxConfig, Relaxation};
use cutforge::separate::{bh_separate, SeparatorConfig};
use cutforge::{Radical, Rational};
use cutforge_bench::{random_biqmac, random_bqp, random_point};

fn exact(c: &mut Criterion) {
    let w = RadicalVec::new(
        Radical::new(Rational::new(3.into(), 2.into()), 2).unwrap(),
        (1..=10).map(|k| Radical::new(Rational::from_integer((k - 5).into()), 2).unwrap()).collect(),
    );
    c.bench_function("ecg_radical_n10", |b| b.iter(|| ecg(black_box(&w))));
}

fn numerics(c: &mut Criterion) {
    let p = random_point(30, 1);
    let m = p.moment_matrix();
    c.bench_function("jacobi_31", |b| b.iter(|| jacobi_eigen(black_box(&m), JACOBI_TOL).unwrap()));
    let inst = random_bqp(20, 2);
    c.bench_function("mccormick_lp_n20", |b| {
        b.iter(|| run_pipeline(black_box(&inst), &RelaxConfig::preset(Relaxation::I)).unwrap())
    });
}

fn separation(c: &mut Criterion) {
    let p = random_point(14, 3);
    let bqp4 = enumerate_facets(4).unwrap();
    c.bench_function("triangles_n14", |b| b.iter(|| violated_triangles(black_box(&p), 1e-3)));
    c.bench_function("atlas4_n14", |b| b.iter(|| atlas_separate(black_box(&p), &bqp4, 1e-3, 1000).unwrap()));
    let idx: Vec<usize> = (0..6).collect();
    let cfg = SeparatorConfig { time_limit: None, ..Default::default() };
    c.bench_function("bh_separate_k6", |b| b.iter(|| bh_separate(black_box(&p), &idx, &cfg).unwrap()));
}

fn ingest(c: &mut Criterion) {
    let text = random_biqmac(100, 0.1, 4);
    c.bench_function("parse_biqmac_n100", |b| b.iter(|| parse_biqmac_str(black_box(&text), Sense::MaxToMin).unwrap()));
}

criterion_group!(benches, exact, numerics, separation, ingest);
criterion_main!(benches);
