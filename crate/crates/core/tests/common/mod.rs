//! Random instance generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use fairalloc::{GroupThresholdPolicy, GroupedPopulation, ScoreDistribution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Pop = GroupedPopulation<f64>;
pub type Dist = ScoreDistribution<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_atoms` support points with positive scores, or scores in `[0, 1]` when
/// `allow_zero`.
pub fn random_dist(rng: &mut ChaCha8Rng, max_atoms: usize, allow_zero: bool) -> Dist {
    let k = rng.gen_range(1..=max_atoms);
    let pts: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let v = if allow_zero && rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.001..=1.0) };
            (v, rng.gen_range(0.05..1.0))
        })
        .collect();
    Dist::from_masses(pts).unwrap()
}

pub fn random_population(rng: &mut ChaCha8Rng, m: usize, max_atoms: usize, allow_zero: bool) -> Pop {
    Pop::from_masses((0..m).map(|i| (format!("G{i}"), rng.gen_range(0.2..1.0), random_dist(rng, max_atoms, allow_zero))))
        .unwrap()
}

pub fn equal_population(dists: Vec<Dist>) -> Pop {
    let w = 1.0 / dists.len() as f64;
    Pop::new(dists.into_iter().enumerate().map(|(i, d)| (format!("G{i}"), w, d))).unwrap()
}

/// Random within-group capacities, one per group.
pub fn random_policy(rng: &mut ChaCha8Rng, pop: &Pop) -> GroupThresholdPolicy<f64> {
    let caps: Vec<f64> = (0..pop.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
    GroupThresholdPolicy::for_capacities(pop, &caps).unwrap()
}

// ---- brute-force evaluation, independent of the library's prefix sums ----

pub fn direct_survival(d: &Dist, r: f64) -> f64 {
    d.iter().filter(|(v, _)| *v > r).map(|(_, w)| w).sum()
}

pub fn direct_cdf(d: &Dist, r: f64) -> f64 {
    d.iter().filter(|(v, _)| *v <= r).map(|(_, w)| w).sum()
}

/// `E[1(t < u <= t_max) u]` by summing over the support.
pub fn direct_tail(d: &Dist, t: f64, t_max: f64) -> f64 {
    d.iter().filter(|(v, _)| *v > t && *v <= t_max).map(|(v, w)| v * w).sum()
}

/// `(E[f | S], E[f u | S])` of `1(u > t) + γ 1(u = t)` by summing over the support.
pub fn direct_rule(d: &Dist, t: f64, gamma: f64) -> (f64, f64) {
    d.iter().fold((0.0, 0.0), |(c, tp), (v, w)| {
        let f = if v > t {
            1.0
        } else if v == t {
            gamma
        } else {
            0.0
        };
        (c + f * w, tp + f * w * v)
    })
}

/// Per-group `(capacity, TP)` of a policy, summed directly.
pub fn direct_policy(policy: &GroupThresholdPolicy<f64>, pop: &Pop) -> Vec<(f64, f64)> {
    pop.groups()
        .iter()
        .map(|g| {
            let e = policy.get(&g.name).unwrap();
            direct_rule(&g.dist, e.threshold, e.gamma)
        })
        .collect()
}

/// `∫_a^b q`, integrating the quantile step by step over the CDF jumps.
pub fn direct_quantile_integral(d: &Dist, a: f64, b: f64) -> f64 {
    let mut lo = 0.0;
    let mut acc = 0.0;
    for (v, w) in d.iter() {
        let hi = lo + w;
        let overlap = (hi.min(b) - lo.max(a)).max(0.0);
        acc += overlap * v;
        lo = hi;
    }
    acc
}

/// `Σ p_i ln(p_i / q_i)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum()
}

// ---- proptest strategies ----

pub fn dist_strategy(max_atoms: usize) -> impl Strategy<Value = Dist> {
    prop::collection::vec((0u32..=1000, 1u32..=100), 1..=max_atoms).prop_map(|pts| {
        Dist::from_masses(pts.into_iter().map(|(v, w)| (v as f64 / 1000.0, w as f64))).unwrap()
    })
}

pub fn population_strategy(max_groups: usize, max_atoms: usize) -> impl Strategy<Value = Pop> {
    prop::collection::vec((1u32..=20, dist_strategy(max_atoms)), 1..=max_groups).prop_map(|groups| {
        Pop::from_masses(groups.into_iter().enumerate().map(|(i, (w, d))| (format!("G{i}"), w as f64, d))).unwrap()
    })
}
