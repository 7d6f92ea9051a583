//! Allocation solvers at a fixed global capacity.

mod equalize;
mod proportional;
mod utility;

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::policy::{capacity, tp_count, GroupThresholdPolicy};
use crate::population::GroupedPopulation;
use crate::scalar::Scalar;

pub use equalize::{solve_achievable_eo, solve_equal_opportunity, solve_max_min};
pub use proportional::solve_proportional;
pub use utility::solve_utility_max;

/// Fairness regime an allocation is solved under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    UtilityMax,
    MaxMin,
    EqualOpportunity,
    Proportional,
    AchievableEo,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::UtilityMax,
        Regime::MaxMin,
        Regime::EqualOpportunity,
        Regime::Proportional,
        Regime::AchievableEo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::UtilityMax => "utility_max",
            Regime::MaxMin => "max_min",
            Regime::EqualOpportunity => "equal_opportunity",
            Regime::Proportional => "proportional",
            Regime::AchievableEo => "achievable_eo",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown regime `{s}`")))
    }
}

/// Non-fatal conditions a solver reports alongside its answer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SolverFlag {
    /// Some group's whole positive mass is allocated before the common level is reached;
    /// it keeps its full TP and the remaining groups are equalized among themselves.
    EqualizationInfeasible,
    /// Groups with no positive scores were given zero capacity (proportional mode).
    DegenerateGroupsExcluded(Vec<String>),
    /// Bisection stopped at the iteration cap before reaching the tolerance.
    NotConverged,
}

impl fmt::Display for SolverFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverFlag::EqualizationInfeasible => f.write_str("equalization_infeasible"),
            SolverFlag::DegenerateGroupsExcluded(g) => write!(f, "degenerate_excluded({})", g.join(";")),
            SolverFlag::NotConverged => f.write_str("not_converged"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on `|Σ ρ_i c_i - c|`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SolverOptions {
    pub fn for_scalar<T: Scalar>() -> Self {
        Self { tolerance: T::CAPACITY_TOL, max_iterations: 200 }
    }

    pub fn solve<T: Scalar>(&self, regime: Regime, pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
        match regime {
            Regime::UtilityMax => utility::run(pop, c),
            Regime::MaxMin => equalize::run(pop, c, equalize::Scale::Unit, self),
            Regime::EqualOpportunity => equalize::run(pop, c, equalize::Scale::BaseRate, self),
            Regime::AchievableEo => equalize::run(pop, c, equalize::Scale::Achievable, self),
            Regime::Proportional => proportional::run(pop, c, self),
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::for_scalar::<f64>()
    }
}

/// Solves `pop` at capacity `c` under `regime` with default options.
pub fn solve<T: Scalar>(regime: Regime, pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    SolverOptions::for_scalar::<T>().solve(regime, pop, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub regime: Regime,
    /// Requested global capacity.
    pub capacity: T,
    pub policy: GroupThresholdPolicy<T>,
    /// Within-group capacities `c_i`, in population order.
    pub capacities: Vec<T>,
    /// Per-group TP `H_i(c_i)`.
    pub group_tp: Vec<T>,
    /// Global TP `Σ ρ_i H_i(c_i)`.
    pub tp: T,
    /// The common parameter the solver settled on: the pooled threshold (utility-max),
    /// the common TP, TP/base-rate or TP/achievable ratio (equalizing regimes), or the
    /// multiplier `λ` of `t_i(c_i) / H_i(c_i) = λ` (proportional).
    pub level: Option<T>,
    pub iterations: usize,
    /// `|Σ ρ_i c_i - c|` of the returned policy.
    pub residual: T,
    pub flags: Vec<SolverFlag>,
}

impl<T: Scalar> SolveResult<T> {
    /// Fraction of the allocated resource going to each group, `ρ_i c_i / Σ ρ_j c_j`.
    pub fn shares(&self, pop: &GroupedPopulation<T>) -> Vec<T> {
        let parts: Vec<T> = pop.weights().iter().zip(&self.capacities).map(|(&w, &c)| w * c).collect();
        let total: T = parts.iter().copied().sum();
        parts.into_iter().map(|p| if total > T::zero() { p / total } else { T::zero() }).collect()
    }
}

fn check_capacity<T: Scalar>(c: T) -> Result<()> {
    if !(c >= T::zero() && c <= T::one()) {
        return Err(domain(format!("capacity {c} is outside [0, 1]")));
    }
    Ok(())
}

/// Builds the canonical policy for within-group capacities and evaluates it.
fn finish<T: Scalar>(
    regime: Regime,
    pop: &GroupedPopulation<T>,
    c: T,
    caps: &[T],
    level: Option<T>,
    iterations: usize,
    flags: Vec<SolverFlag>,
) -> Result<SolveResult<T>> {
    let caps: Vec<T> = caps.iter().map(|x| x.max(T::zero()).min(T::one())).collect();
    let policy = GroupThresholdPolicy::for_capacities(pop, &caps)?;
    let cap = capacity(&policy, pop)?;
    let tp = tp_count(&policy, pop)?;
    Ok(SolveResult {
        regime,
        capacity: c,
        residual: (cap.global - c).abs(),
        capacities: cap.per_group,
        group_tp: tp.per_group,
        tp: tp.global,
        policy,
        level,
        iterations,
        flags,
    })
}

/// Spreads capacity beyond the total positive mass over zero-score mass, pro rata.
///
/// `caps` must already hold each group's full positive mass.
fn fill_zero_mass<T: Scalar>(pop: &GroupedPopulation<T>, caps: &mut [T], c: T) {
    let groups = pop.groups();
    let used: T = groups.iter().zip(caps.iter()).map(|(g, &x)| g.weight * x).sum();
    let zero: T = groups.iter().map(|g| g.weight * (T::one() - g.dist.positive_mass())).sum();
    if c <= used || zero <= T::zero() {
        return;
    }
    let phi = ((c - used) / zero).min(T::one());
    for (x, g) in caps.iter_mut().zip(groups) {
        *x = *x + phi * (T::one() - g.dist.positive_mass());
    }
}

/// Moves the leftover `c - Σ ρ_i c_i` onto groups flagged `adjustable`, largest weight
/// first, keeping every capacity inside `[0, upper_i]`.
fn repair<T: Scalar>(pop: &GroupedPopulation<T>, caps: &mut [T], upper: &[T], adjustable: &[bool], c: T) {
    let weights = pop.weights();
    let mut order: Vec<usize> = (0..caps.len()).filter(|&i| adjustable[i]).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).expect("weights are finite"));
    for i in order {
        let used: T = weights.iter().zip(caps.iter()).map(|(&w, &x)| w * x).sum();
        let r = c - used;
        if r == T::zero() {
            break;
        }
        caps[i] = (caps[i] + r / weights[i]).max(T::zero()).min(upper[i]);
    }
}

/// Multiplicative and additive price of fairness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceOfFairness<T> {
    /// `TP_opt / TP_regime`; `+inf` when the regime's TP is zero.
    pub multiplicative: T,
    /// `TP_opt - TP_regime`.
    pub additive: T,
}

impl<T: Scalar> PriceOfFairness<T> {
    pub fn from_tp(opt: T, fair: T) -> Self {
        let multiplicative = if fair > T::zero() { opt / fair } else { T::infinity() };
        Self { multiplicative, additive: opt - fair }
    }
}

/// Price of enforcing `regime` at capacity `c`, relative to [`solve_utility_max`].
pub fn price_of_fairness<T: Scalar>(pop: &GroupedPopulation<T>, c: T, regime: Regime) -> Result<PriceOfFairness<T>> {
    if regime == Regime::UtilityMax {
        return Err(domain("price of fairness needs a fairness regime, not utility_max"));
    }
    let opt = solve_utility_max(pop, c)?;
    let fair = solve(regime, pop, c)?;
    Ok(PriceOfFairness::from_tp(opt.tp, fair.tp))
}
