#![allow(dead_code, clippy::needless_range_loop)]

use ebc_core::region::weighted_bound;
use ebc_core::state::{product_joint, toy_model_joint, Geometry, JointStateTable, PerVehicleJoint};
use rand::Rng;

pub const LAMBDA: f64 = 4.0;
pub const RB: f64 = 0.2;
pub const TS: f64 = 10.0;

pub fn geometry(lambda: f64) -> Geometry {
    Geometry::new(lambda, RB, TS).unwrap()
}

pub fn toy(lambda: f64, v1: f64, v2: f64) -> JointStateTable {
    toy_model_joint(&geometry(lambda), &[v1, v2]).unwrap()
}

pub fn fig3() -> JointStateTable {
    toy(LAMBDA, 60.0, 60.0)
}

/// Random symmetric toy-model parameters `(lambda, v)`.
pub fn random_toy_params(rng: &mut impl Rng) -> (f64, f64) {
    (rng.gen_range(0.5..20.0), rng.gen_range(0.0..200.0))
}

/// A random two-receiver joint: either a product of random per-vehicle
/// laws or a random symmetric 4x4 table (equal marginals by construction).
pub fn random_joint(rng: &mut impl Rng) -> JointStateTable {
    if rng.gen_bool(0.5) {
        let per: Vec<PerVehicleJoint> = (0..2)
            .map(|_| {
                let q: f64 = rng.gen_range(0.05..0.95);
                // P(S=0, Shat=0) between independence and perfect estimates.
                let t: f64 = rng.gen();
                let p00 = q * q + t * (q - q * q);
                PerVehicleJoint::new([[p00, q - p00], [q - p00, 1.0 - 2.0 * q + p00]]).unwrap()
            })
            .collect();
        product_joint(&per).unwrap()
    } else {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let w: f64 = rng.gen::<f64>().powi(2);
                m[i][j] = w;
                m[j][i] = w;
            }
        }
        let total: f64 = m.iter().flatten().sum();
        let probs = m.iter().flatten().map(|x| x / total).collect();
        JointStateTable::new(2, probs).unwrap()
    }
}

/// Symmetric rate by scanning `mu` on a dense grid over `[1, mu_max]`, then
/// refining the best cell by ternary search, plus the single-user limits.
/// Uses only the weighted bound itself, never its breakpoints.
pub fn grid_sym_rate(joint: &JointStateTable, points: usize, mu_max: f64) -> f64 {
    let ratio = |mu: f64| {
        let a = weighted_bound(joint, mu, 2);
        let b = weighted_bound(joint, mu, 1);
        a.min(b) / (1.0 + mu)
    };
    let step = (mu_max - 1.0) / (points - 1) as f64;
    let (mut best, mut best_i) = (f64::INFINITY, 0);
    for i in 0..points {
        let r = ratio(1.0 + step * i as f64);
        if r < best {
            best = r;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (
        1.0 + step * best_i.saturating_sub(1) as f64,
        (1.0 + step * (best_i + 1) as f64).min(mu_max),
    );
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if ratio(m1) <= ratio(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    best = best.min(ratio(0.5 * (lo + hi)));
    // mu -> infinity: bound / (1 + mu) tends to P(S_k = 1).
    let limit = (1..=2)
        .map(|k| joint.p_received_by(k).total())
        .fold(f64::INFINITY, f64::min);
    best.min(limit)
}

/// Area of disk(0, rb) outside disk((d, 0), rb), by uniform darts over the
/// bounding box of the first disk.
pub fn crescent_area_mc(d: f64, rb: f64, samples: u64, rng: &mut impl Rng) -> f64 {
    let mut hits = 0u64;
    for _ in 0..samples {
        let x: f64 = rng.gen_range(-rb..rb);
        let y: f64 = rng.gen_range(-rb..rb);
        if x * x + y * y <= rb * rb && (x - d) * (x - d) + y * y > rb * rb {
            hits += 1;
        }
    }
    4.0 * rb * rb * hits as f64 / samples as f64
}
