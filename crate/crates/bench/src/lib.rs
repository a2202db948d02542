//! Seeded inputs shared by the benchmarks.

use cutforge::ineq::LiftedPoint;
use cutforge::QcqpInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binary QP with integer entries in `[-10, 10]`.
pub fn random_bqp(n: usize, seed: u64) -> QcqpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-10i32..=10) as f64;
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    QcqpInstance::binary_qp(q, vec![0.0; n]).expect("square")
}

/// Uniform `(x, X)` in the unit box with `X_ii = x_i`.
pub fn random_point(n: usize, seed: u64) -> LiftedPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut p = LiftedPoint::rank_one(&x);
    for i in 0..n {
        for j in i + 1..n {
            p.set(i, j, rng.gen_range(0.0..1.0));
        }
    }
    p
}

/// BiqMac text for [`random_bqp`]-style data, `density` in `(0, 1]`.
pub fn random_biqmac(n: usize, density: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for i in 1..=n {
        for j in i..=n {
            if rng.gen_bool(density) {
                lines.push(format!("{i} {j} {}", rng.gen_range(-100i32..=100)));
            }
        }
    }
    format!("{n} {}\n{}\n", lines.len(), lines.join("\n"))
}
