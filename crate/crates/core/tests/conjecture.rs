//! Empirical check that E-CG inequalities of general vectors are implied by
//! nonnegative combinations of BH inequalities with small coefficients.
//! A non-dominated case is printed, not failed: the pool is finite, so it is
//! only a candidate counterexample.

use std::collections::BTreeSet;

use cutforge::certify::canonical_bh;
use cutforge::eigencg::{classify_family, ecg, FamilyTag, RadicalVec};
use cutforge::exactnum::rat;
use cutforge::ineq::{dominated_by_cone, is_valid_bqp};
use cutforge::{LinearIneq, Radical};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bh_pool(n: usize, bound: i64) -> Vec<LinearIneq> {
    let mut pool = BTreeSet::new();
    for w0 in -bound..=bound {
        for w in (0..n).map(|_| -bound..=bound).multi_cartesian_product() {
            if let Some(b) = canonical_bh(w0, &w).unwrap() {
                if !b.is_constant() {
                    pool.insert(b);
                }
            }
        }
    }
    pool.into_iter().collect()
}

fn random_general(n: usize, rng: &mut ChaCha8Rng) -> RadicalVec {
    loop {
        let entry = |rng: &mut ChaCha8Rng| {
            let d = [1u64, 2, 3, 5][rng.gen_range(0..4)];
            Radical::new(rat(rng.gen_range(-6..=6), rng.gen_range(1..=3)), d).unwrap()
        };
        let v0 = entry(rng);
        let v: Vec<Radical> = (0..n).map(|_| entry(rng)).collect();
        let w = RadicalVec::new(v0, v);
        if classify_family(&w) == FamilyTag::General && w.v.iter().filter(|x| !x.is_zero()).count() >= 2 {
            return w;
        }
    }
}

#[test]
fn general_ecg_dominated_by_bh_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut candidates = Vec::new();
    let mut total = 0;
    for (n, trials) in [(2usize, 10usize), (3, 8), (4, 3)] {
        let pool = bh_pool(n, 4);
        for _ in 0..trials {
            let w = random_general(n, &mut rng);
            let target = ecg(&w);
            assert!(is_valid_bqp(&target).unwrap());
            if target.is_constant() {
                continue;
            }
            total += 1;
            let dom = dominated_by_cone(&target, &pool).unwrap();
            println!("n={n} w={w} dominated={} residual={:e}", dom.dominated, dom.residual);
            if dom.dominated {
                assert!(dom.residual <= 1e-8);
                assert!(dom.combined_constant <= cutforge::exactnum::rational_to_f64(&target.gamma) + 1e-8);
            } else {
                candidates.push((w, target));
            }
        }
    }
    for (w, t) in &candidates {
        println!("!!! NOT DOMINATED by the |w| <= 4 BH pool: w={w} ecg={t}");
    }
    println!("{} of {total} general E-CG inequalities dominated", total - candidates.len());
}
