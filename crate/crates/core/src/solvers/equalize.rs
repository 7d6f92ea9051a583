use super::{check_capacity, fill_zero_mass, finish, repair, Regime, SolveResult, SolverFlag, SolverOptions};
use crate::error::{domain, Result};
use crate::fairness::achievable_tp;
use crate::population::GroupedPopulation;
use crate::scalar::Scalar;

/// What the equalized quantity `TP_i / a_i` is normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Scale {
    /// `a_i = 1`: max-min on per-group TP.
    Unit,
    /// `a_i = b_i`: equal opportunity.
    BaseRate,
    /// `a_i = A(c, S_i)`: achievable equal opportunity.
    Achievable,
}

/// Maximizes the minimum per-group TP at capacity `c`.
///
/// Bisects the common TP level `μ`; each group receives the least capacity reaching
/// `μ`. A group whose whole positive mass cannot reach `μ` keeps its full TP and the
/// result carries [`SolverFlag::EqualizationInfeasible`].
pub fn solve_max_min<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    run(pop, c, Scale::Unit, &SolverOptions::for_scalar::<T>())
}

/// Maximizes global TP subject to equal `TP_i / b_i` across groups.
pub fn solve_equal_opportunity<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    run(pop, c, Scale::BaseRate, &SolverOptions::for_scalar::<T>())
}

/// Maximizes global TP subject to equal `TP_i / A(c, S_i)` across groups.
pub fn solve_achievable_eo<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    run(pop, c, Scale::Achievable, &SolverOptions::for_scalar::<T>())
}

pub(super) fn run<T: Scalar>(pop: &GroupedPopulation<T>, c: T, scale: Scale, opts: &SolverOptions) -> Result<SolveResult<T>> {
    check_capacity(c)?;
    let regime = match scale {
        Scale::Unit => Regime::MaxMin,
        Scale::BaseRate => Regime::EqualOpportunity,
        Scale::Achievable => Regime::AchievableEo,
    };
    let groups = pop.groups();
    let a: Vec<T> = match scale {
        Scale::Unit => vec![T::one(); groups.len()],
        Scale::BaseRate => groups.iter().map(|g| g.dist.mean()).collect(),
        Scale::Achievable => {
            if c == T::zero() {
                vec![T::one(); groups.len()]
            } else {
                groups.iter().map(|g| achievable_tp(pop, &g.name, c)).collect::<Result<_>>()?
            }
        }
    };
    if scale != Scale::Unit {
        if let Some((g, _)) = groups.iter().zip(&a).find(|(_, &x)| x <= T::zero()) {
            let what = if scale == Scale::BaseRate { "base rate" } else { "achievable TP" };
            return Err(domain(format!("group `{}` has zero {what}", g.name)));
        }
    }
    let full: Vec<T> = groups.iter().map(|g| g.dist.mean()).collect();
    let positive: Vec<T> = groups.iter().map(|g| g.dist.positive_mass()).collect();
    let weights = pop.weights();

    // Least within-group capacities at which every group reaches TP `s * a_i`.
    let caps_at = |s: T| -> Vec<T> {
        groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let target = s * a[i];
                if target >= full[i] {
                    positive[i]
                } else {
                    g.dist.capacity_for_tp(target).unwrap_or(positive[i])
                }
            })
            .collect()
    };
    let used = |caps: &[T]| -> T { weights.iter().zip(caps).map(|(&w, &x)| w * x).sum() };
    let total_positive = used(&positive);
    let tol = T::of(opts.tolerance);

    let mut flags = Vec::new();
    let (mut caps, level, iterations) = if c >= total_positive {
        let s = (0..groups.len()).map(|i| full[i] / a[i]).fold(T::zero(), T::max);
        let mut caps = positive.clone();
        fill_zero_mass(pop, &mut caps, c);
        (caps, s, 0)
    } else {
        let mut lo = T::zero();
        let mut hi = (0..groups.len()).map(|i| full[i] / a[i]).fold(T::zero(), T::max);
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
        let s = if used(&caps_at(hi)) - c <= c - used(&caps_at(lo)) { hi } else { lo };
        let mut caps = caps_at(s);
        let adjustable: Vec<bool> = (0..groups.len())
            .map(|i| s * a[i] < full[i] && a[i] > T::zero())
            .collect();
        repair(pop, &mut caps, &positive, &adjustable, c);
        (caps, s, iterations)
    };
    if (0..groups.len()).any(|i| level * a[i] > full[i] * (T::one() + T::of(opts.tolerance)) + T::epsilon()) {
        flags.push(SolverFlag::EqualizationInfeasible);
    }
    for x in caps.iter_mut() {
        *x = x.max(T::zero()).min(T::one());
    }
    finish(regime, pop, c, &caps, Some(level), iterations, flags)
}
