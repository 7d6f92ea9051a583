//! Exhaustive reference solutions over a grid of capacity splits.
//!
//! The global budget `c` is cut into `steps - 1` equal units; a split hands `n_i` units
//! to group `i`, giving it within-group capacity `c n_i / ((steps - 1) ρ_i)`. Splits that
//! would need more than a whole group are dropped.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, validation, Error, Result};
use crate::fairness::{achievable_tp, prop_from_tp};
use crate::policy::{tp_count, GroupThresholdPolicy};
use crate::population::GroupedPopulation;
use crate::scalar::Scalar;
use crate::solvers::Regime;

/// Largest number of groups the oracle will enumerate.
pub const MAX_GROUPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    /// Grid points per coordinate, including both ends.
    pub steps: usize,
    pub capacity: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(steps: usize, capacity: T) -> Result<Self> {
        if steps < 2 {
            return Err(validation(format!("grid needs at least 2 steps, got {steps}")));
        }
        if !(capacity >= T::zero() && capacity.is_finite()) {
            return Err(domain(format!("grid capacity {capacity} must be finite and nonnegative")));
        }
        Ok(Self { steps, capacity })
    }

    /// Global budget per grid unit.
    pub fn cell(&self) -> T {
        self.capacity / T::of((self.steps - 1) as f64)
    }
}

/// Compositions of `total` into `parts` nonnegative integers, lexicographically ascending.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            go(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// All feasible within-group capacity vectors on the grid, in lexicographic order.
pub fn enumerate_splits<T: Scalar>(
    pop: &GroupedPopulation<T>,
    grid: &GridSpec<T>,
) -> Result<impl Iterator<Item = Vec<T>>> {
    if pop.len() > MAX_GROUPS {
        return Err(Error::Capability(format!(
            "oracle enumerates at most {MAX_GROUPS} groups, population has {}",
            pop.len()
        )));
    }
    let weights = pop.weights();
    let cell = grid.cell();
    let slack = T::epsilon() * T::of(64.0);
    let splits = compositions(grid.steps - 1, pop.len()).into_iter().filter_map(move |n| {
        let caps: Vec<T> = n
            .iter()
            .zip(&weights)
            .map(|(&k, &w)| cell * T::of(k as f64) / w)
            .collect();
        if caps.iter().any(|&x| x > T::one() + slack) {
            return None;
        }
        Some(caps.into_iter().map(|x| x.min(T::one())).collect())
    });
    Ok(splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Global TP.
    Tp,
    /// `min_i TP_i`.
    MinTp,
    /// `Σ ρ_i ln TP_i`.
    Prop,
    /// `min_i TP_i / b_i`.
    EoRatio,
    /// `min_i TP_i / A(c, S_i)`.
    AeoRatio,
}

impl Objective {
    pub const ALL: [Objective; 5] =
        [Objective::Tp, Objective::MinTp, Objective::Prop, Objective::EoRatio, Objective::AeoRatio];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Tp => "tp",
            Objective::MinTp => "min_tp",
            Objective::Prop => "prop",
            Objective::EoRatio => "eo_ratio",
            Objective::AeoRatio => "aeo_ratio",
        }
    }

    /// The objective a solver regime optimizes.
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::UtilityMax => Objective::Tp,
            Regime::MaxMin => Objective::MinTp,
            Regime::EqualOpportunity => Objective::EoRatio,
            Regime::Proportional => Objective::Prop,
            Regime::AchievableEo => Objective::AeoRatio,
        }
    }

    /// Normalizers `a_i` of the ratio objectives; all ones otherwise.
    pub fn normalizers<T: Scalar>(self, pop: &GroupedPopulation<T>, c: T) -> Result<Vec<T>> {
        let a: Vec<T> = match self {
            Objective::EoRatio => pop.base_rates(),
            Objective::AeoRatio => {
                pop.names().map(|g| achievable_tp(pop, g, c.min(T::one()))).collect::<Result<_>>()?
            }
            _ => return Ok(vec![T::one(); pop.len()]),
        };
        if a.iter().any(|&x| x <= T::zero()) {
            return Err(domain(format!("objective {} needs positive normalizers for every group", self.name())));
        }
        Ok(a)
    }

    /// Objective value given the per-group TP and the ratio normalizers.
    pub fn value<T: Scalar>(self, weights: &[T], group_tp: &[T], scales: &[T]) -> T {
        match self {
            Objective::Tp => weights.iter().zip(group_tp).map(|(&w, &t)| w * t).sum(),
            Objective::Prop => prop_from_tp(weights, group_tp).value,
            Objective::MinTp | Objective::EoRatio | Objective::AeoRatio => group_tp
                .iter()
                .zip(scales)
                .map(|(&t, &a)| t / a)
                .fold(T::infinity(), T::min),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    /// Within-group capacities of the best split.
    pub split: Vec<T>,
    pub value: T,
    pub group_tp: Vec<T>,
    pub tp: T,
    /// Number of feasible splits evaluated.
    pub evaluated: usize,
}

/// Best grid split for `objective`; ties go to the lexicographically smallest split.
pub fn oracle_solve<T: Scalar>(
    pop: &GroupedPopulation<T>,
    grid: &GridSpec<T>,
    objective: Objective,
) -> Result<OracleResult<T>> {
    let scales = objective.normalizers(pop, grid.capacity)?;
    let weights = pop.weights();
    let mut best: Option<OracleResult<T>> = None;
    let mut evaluated = 0;
    for split in enumerate_splits(pop, grid)? {
        evaluated += 1;
        let policy = GroupThresholdPolicy::for_capacities(pop, &split)?;
        let tp = tp_count(&policy, pop)?;
        let value = objective.value(&weights, &tp.per_group, &scales);
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(OracleResult { split, value, group_tp: tp.per_group, tp: tp.global, evaluated: 0 });
        }
    }
    let mut best = best.ok_or_else(|| domain("no feasible split on the grid"))?;
    best.evaluated = evaluated;
    Ok(best)
}

/// How far the best grid split can fall below the continuous optimum.
///
/// Valid when `c <= min ρ_i`, so that rounding the optimal split to the grid stays feasible.
/// Each group then moves by at most one cell of global budget, changing `TP_i` by at most
/// `d_i = max score_i · cell / ρ_i`. `group_tp` is the per-group TP at (or near) the optimum
/// and enters only the logarithmic bound.
pub fn lipschitz_bound<T: Scalar>(
    pop: &GroupedPopulation<T>,
    grid: &GridSpec<T>,
    objective: Objective,
    group_tp: &[T],
) -> T {
    let cell = grid.cell();
    let d: Vec<T> = pop.groups().iter().map(|g| g.dist.max_value() * cell / g.weight).collect();
    let weights = pop.weights();
    match objective {
        Objective::Tp => weights.iter().zip(&d).map(|(&w, &x)| w * x).sum(),
        Objective::MinTp => d.iter().copied().fold(T::zero(), T::max),
        Objective::EoRatio | Objective::AeoRatio => match objective.normalizers(pop, grid.capacity) {
            Ok(a) => d.iter().zip(&a).map(|(&x, &ai)| x / ai).fold(T::zero(), T::max),
            Err(_) => T::infinity(),
        },
        Objective::Prop => weights
            .iter()
            .zip(&d)
            .zip(group_tp)
            .map(|((&w, &x), &tp)| if tp > x { w * x / (tp - x) } else { T::infinity() })
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score_dist::ScoreDistribution;

    fn g2() -> GroupedPopulation<f64> {
        GroupedPopulation::new([
            ("S1".into(), 0.5, ScoreDistribution::new([(0.2, 0.8), (0.8, 0.2)]).unwrap()),
            ("S2".into(), 0.5, ScoreDistribution::new([(0.1, 0.8), (0.4, 0.2)]).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn two_group_enumeration() {
        let pop = g2();
        let grid = GridSpec::new(5, 0.4).unwrap();
        let splits: Vec<Vec<f64>> = enumerate_splits(&pop, &grid).unwrap().collect();
        assert_eq!(splits.len(), 5);
        for (k, s) in splits.iter().enumerate() {
            assert!((0.5 * s[0] - 0.1 * k as f64).abs() < 1e-15);
            assert!((0.5 * s[1] - (0.4 - 0.1 * k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_group_and_infeasible() {
        let d = ScoreDistribution::<f64>::new([(0.3, 1.0)]).unwrap();
        let one = GroupedPopulation::new([("A".into(), 1.0, d)]).unwrap();
        let splits: Vec<_> = enumerate_splits(&one, &GridSpec::new(7, 0.3).unwrap()).unwrap().collect();
        assert_eq!(splits, vec![vec![0.3]]);
        let grid = GridSpec::new(5, 1.2).unwrap();
        assert_eq!(enumerate_splits(&g2(), &grid).unwrap().count(), 0);
        assert!(oracle_solve(&g2(), &grid, Objective::Tp).is_err());
    }

    #[test]
    fn too_many_groups() {
        let d = ScoreDistribution::<f64>::point_mass(0.5).unwrap();
        let pop = GroupedPopulation::from_masses((0..5).map(|i| (format!("G{i}"), 1.0, d.clone()))).unwrap();
        assert!(matches!(enumerate_splits(&pop, &GridSpec::new(3, 0.1).unwrap()), Err(Error::Capability(_))));
        assert!(GridSpec::new(1, 0.1).is_err());
    }

    #[test]
    fn g2_objectives() {
        let pop = g2();
        let grid = GridSpec::new(401, 0.2).unwrap();
        let tp = oracle_solve(&pop, &grid, Objective::Tp).unwrap();
        assert!((tp.split[0] - 0.2).abs() < 1e-12 && (tp.split[1] - 0.2).abs() < 1e-12);
        assert!((tp.value - 0.12).abs() < 1e-12);

        let mm = oracle_solve(&pop, &grid, Objective::MinTp).unwrap();
        assert!((mm.split[0] - 1.0 / 9.0).abs() < 2.0 * grid.cell());
        assert!((mm.value - 0.0889).abs() < 1e-3);
    }

    #[test]
    fn symmetric_prop_is_equal_split() {
        let d = ScoreDistribution::<f64>::new([(0.1, 0.5), (0.6, 0.5)]).unwrap();
        let pop = GroupedPopulation::new([("A".into(), 0.5, d.clone()), ("B".into(), 0.5, d)]).unwrap();
        let r = oracle_solve(&pop, &GridSpec::new(41, 0.4).unwrap(), Objective::Prop).unwrap();
        assert!((r.split[0] - r.split[1]).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_smallest_split() {
        let d = ScoreDistribution::<f64>::point_mass(0.5).unwrap();
        let pop = GroupedPopulation::new([("A".into(), 0.5, d.clone()), ("B".into(), 0.5, d)]).unwrap();
        let r = oracle_solve(&pop, &GridSpec::new(5, 0.25).unwrap(), Objective::Tp).unwrap();
        assert_eq!(r.split[0], 0.0);
    }
}
