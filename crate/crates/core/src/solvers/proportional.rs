use super::{check_capacity, fill_zero_mass, finish, repair, Regime, SolveResult, SolverFlag, SolverOptions};
use crate::error::Result;
use crate::population::GroupedPopulation;
use crate::scalar::Scalar;

/// Maximizes `Σ ρ_i ln H_i(c_i)` subject to `Σ ρ_i c_i = c`.
///
/// At the optimum every group with spare positive mass sits where its marginal score
/// over accumulated TP, `t_i(c_i) / H_i(c_i)`, brackets a common `λ`; groups whose
/// positive mass is exhausted satisfy the inequality form. The solver bisects on
/// `L = 1 / λ`, mapping each group to the capacity where that ratio falls to `λ`.
/// Groups without positive scores get zero capacity and are reported in
/// [`SolverFlag::DegenerateGroupsExcluded`].
pub fn solve_proportional<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    run(pop, c, &SolverOptions::for_scalar::<T>())
}

pub(super) fn run<T: Scalar>(pop: &GroupedPopulation<T>, c: T, opts: &SolverOptions) -> Result<SolveResult<T>> {
    check_capacity(c)?;
    let groups = pop.groups();
    let weights = pop.weights();
    let positive: Vec<T> = groups.iter().map(|g| g.dist.positive_mass()).collect();
    let mut flags = Vec::new();
    let degenerate: Vec<String> = groups
        .iter()
        .filter(|g| g.dist.mean() <= T::zero())
        .map(|g| g.name.clone())
        .collect();
    if !degenerate.is_empty() {
        flags.push(SolverFlag::DegenerateGroupsExcluded(degenerate));
    }

    let caps_at = |level: T| -> Vec<T> { groups.iter().map(|g| g.dist.capacity_at_level(level)).collect() };
    let used = |caps: &[T]| -> T { weights.iter().zip(caps).map(|(&w, &x)| w * x).sum() };
    let total_positive = used(&positive);
    let tol = T::of(opts.tolerance);

    let (mut caps, level, iterations) = if c == T::zero() {
        (vec![T::zero(); groups.len()], None, 0)
    } else if c >= total_positive {
        let mut caps = positive.clone();
        fill_zero_mass(pop, &mut caps, c);
        (caps, None, 0)
    } else {
        // Every group saturates once L exceeds its mean over its smallest positive score.
        let mut hi = groups
            .iter()
            .filter(|g| g.dist.mean() > T::zero())
            .map(|g| {
                let smallest = g.dist.values().iter().copied().find(|&v| v > T::zero()).unwrap_or(T::one());
                g.dist.mean() / smallest
            })
            .fold(T::zero(), T::max)
            * T::of(2.0);
        let mut lo = T::zero();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iterations {
            iterations += 1;
            let mid = (lo + hi) * T::half();
            if mid <= lo || mid >= hi {
                converged = true;
                break;
            }
            let g = used(&caps_at(mid));
            if (g - c).abs() <= tol * T::of(1e-3) {
                lo = mid;
                hi = mid;
                converged = true;
                break;
            }
            if g < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if !converged {
            flags.push(SolverFlag::NotConverged);
        }
        let l = if used(&caps_at(hi)) - c <= c - used(&caps_at(lo)) { hi } else { lo };
        let mut caps = caps_at(l);
        let adjustable: Vec<bool> = caps.iter().zip(&positive).map(|(&x, &p)| x < p && p > T::zero()).collect();
        repair(pop, &mut caps, &positive, &adjustable, c);
        (caps, Some(T::one() / l), iterations)
    };
    for x in caps.iter_mut() {
        *x = x.max(T::zero()).min(T::one());
    }
    finish(Regime::Proportional, pop, c, &caps, level, iterations, flags)
}
