#![allow(dead_code)]

use driftbwk::environment::Marginal;
use driftbwk::lp_core::LpInstance;
use driftbwk::reduction::{BwkArm, BwkInstance};
use rand::Rng;

/// Uniform draw from `{lo, lo + 0.05, …, hi}`.
pub fn grid<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / 0.05).round() as u32;
    lo + 0.05 * rng.random_range(0..=steps) as f64
}

/// Valid instance with `k ≤ 6`, `m ≤ 3` and coefficients on a 0.05 grid.
pub fn grid_instance<R: Rng>(rng: &mut R) -> LpInstance {
    let k = rng.random_range(1..=6);
    let m = rng.random_range(1..=3);
    let horizon = 1000;
    let budget = grid(rng, 0.0, 0.5) * horizon as f64;
    let mut rewards = vec![0.0];
    rewards.extend((1..k).map(|_| grid(rng, 0.0, 1.0)));
    let drifts = (0..m)
        .map(|_| {
            let mut row = vec![grid(rng, 0.05, 1.0)];
            row.extend((1..k).map(|_| grid(rng, -1.0, 1.0)));
            row
        })
        .collect();
    LpInstance::new(horizon, budget, rewards, drifts).expect("generator builds valid instances")
}

fn bernoulli(p: f64) -> Marginal {
    Marginal {
        support: vec![0.0, 1.0],
        probs: vec![1.0 - p, p],
    }
}

/// Valid BwK instance with `k ≤ 5`, `m ≤ 3`.
pub fn random_bwk<R: Rng>(rng: &mut R, horizon: u64) -> BwkInstance {
    let k = rng.random_range(1..=5);
    let m = rng.random_range(1..=3);
    let delta = grid(rng, 0.05, 0.1);
    let rate = grid(rng, 0.2, 0.6);
    let arms = (0..k)
        .map(|_| {
            let consumptions = (0..m)
                .map(|_| loop {
                    let c = grid(rng, 0.0, 1.0);
                    if (c - rate).abs() >= delta + 1e-9 {
                        break bernoulli(c);
                    }
                })
                .collect();
            BwkArm {
                reward: bernoulli(grid(rng, 0.0, 1.0)),
                consumptions,
            }
        })
        .collect();
    BwkInstance {
        horizon,
        budget: rate * horizon as f64,
        delta_drift: delta,
        arms,
    }
}
