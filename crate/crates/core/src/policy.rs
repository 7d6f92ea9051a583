//! Randomized group-threshold policies and their evaluation.

use crate::error::{domain, validation, Error, Result};
use crate::population::{GroupedPopulation, LabeledSample};
use crate::scalar::Scalar;
use crate::score_dist::ScoreDistribution;

/// Threshold rule for one group: allocate above `threshold`, and at it with probability `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupThreshold<T> {
    pub group: String,
    pub threshold: T,
    pub gamma: T,
}

impl<T: Scalar> GroupThreshold<T> {
    /// `τ(r)`.
    pub fn allocate(&self, r: T) -> T {
        if r > self.threshold {
            T::one()
        } else if r == self.threshold {
            self.gamma
        } else {
            T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupThresholdPolicy<T> {
    entries: Vec<GroupThreshold<T>>,
}

/// A population-level total together with its per-group conditional values.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTotals<T> {
    pub global: T,
    /// Conditional on the group, in population order.
    pub per_group: Vec<T>,
}

impl<T: Scalar> GroupThresholdPolicy<T> {
    pub fn new(entries: impl IntoIterator<Item = (String, T, T)>) -> Result<Self> {
        let mut out: Vec<GroupThreshold<T>> = Vec::new();
        for (group, threshold, gamma) in entries {
            for (what, x) in [("threshold", threshold), ("gamma", gamma)] {
                if !(x >= T::zero() && x <= T::one()) {
                    return Err(validation(format!("{what} {x} for group `{group}` is outside [0, 1]")));
                }
            }
            if out.iter().any(|e| e.group == group) {
                return Err(validation(format!("duplicate group `{group}` in policy")));
            }
            out.push(GroupThreshold { group, threshold, gamma });
        }
        Ok(Self { entries: out })
    }

    /// The canonical thresholds realizing within-group capacities `caps` (population order).
    pub fn for_capacities(pop: &GroupedPopulation<T>, caps: &[T]) -> Result<Self> {
        if caps.len() != pop.len() {
            return Err(validation(format!("{} capacities for {} groups", caps.len(), pop.len())));
        }
        let entries = pop
            .groups()
            .iter()
            .zip(caps)
            .map(|(g, &c)| {
                let (t, gamma) = solve_threshold_for_capacity(&g.dist, c)?;
                Ok((g.name.clone(), t, gamma))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[GroupThreshold<T>] {
        &self.entries
    }

    pub fn get(&self, group: &str) -> Result<&GroupThreshold<T>> {
        self.entries
            .iter()
            .find(|e| e.group == group)
            .ok_or_else(|| Error::UnknownGroup(group.to_owned()))
    }

    /// `τ(r, group)`.
    pub fn allocate(&self, group: &str, r: T) -> Result<T> {
        Ok(self.get(group)?.allocate(r))
    }

    /// Per-group `(capacity, TP)` pairs in population order.
    fn evaluate(&self, pop: &GroupedPopulation<T>) -> Result<Vec<(T, T)>> {
        pop.groups()
            .iter()
            .map(|g| {
                let e = self.get(&g.name)?;
                Ok(g.dist.evaluate_threshold(e.threshold, e.gamma))
            })
            .collect()
    }
}

/// Randomized threshold `(t, γ)` with capacity exactly `c` under `dist`.
pub fn solve_threshold_for_capacity<T: Scalar>(dist: &ScoreDistribution<T>, c: T) -> Result<(T, T)> {
    if !(c >= T::zero() && c <= T::one()) {
        return Err(domain(format!("capacity {c} is outside [0, 1]")));
    }
    Ok(dist.threshold_for_capacity(c))
}

fn totals<T: Scalar>(pop: &GroupedPopulation<T>, per_group: Vec<T>) -> GroupTotals<T> {
    let global = pop.weights().iter().zip(&per_group).map(|(&w, &x)| w * x).sum();
    GroupTotals { global, per_group }
}

/// `E[f(x)]` and `E[f(x) | x ∈ S_i]`.
pub fn capacity<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<GroupTotals<T>> {
    let per_group = policy.evaluate(pop)?.into_iter().map(|e| e.0).collect();
    Ok(totals(pop, per_group))
}

/// True-positive count `E[f(x) y]` on the simulated distribution, unnormalized;
/// per-group values are `E[f(x) y | x ∈ S_i]`.
pub fn tp_count<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<GroupTotals<T>> {
    let per_group = policy.evaluate(pop)?.into_iter().map(|e| e.1).collect();
    Ok(totals(pop, per_group))
}

/// Weighted `Σ τ(score, group) y` over labeled samples. Per-group values are in
/// policy order and conditional on the group.
pub fn tp_count_empirical<T: Scalar>(
    policy: &GroupThresholdPolicy<T>,
    samples: &[LabeledSample<T>],
) -> Result<GroupTotals<T>> {
    let n = policy.entries().len();
    let mut hit = vec![T::zero(); n];
    let mut mass = vec![T::zero(); n];
    for s in samples {
        let i = group_slot(policy, &s.group)?;
        mass[i] = mass[i] + s.weight;
        if s.label {
            hit[i] = hit[i] + s.weight * policy.entries[i].allocate(s.score);
        }
    }
    let total: T = mass.iter().copied().sum();
    if total <= T::zero() {
        return Err(domain("no labeled samples"));
    }
    let mut per_group = Vec::with_capacity(n);
    for (i, e) in policy.entries().iter().enumerate() {
        if mass[i] <= T::zero() {
            return Err(domain(format!("group `{}` has no samples", e.group)));
        }
        per_group.push(hit[i] / mass[i]);
    }
    let global = hit.iter().copied().sum::<T>() / total;
    Ok(GroupTotals { global, per_group })
}

fn group_slot<T: Scalar>(policy: &GroupThresholdPolicy<T>, group: &str) -> Result<usize> {
    policy
        .entries()
        .iter()
        .position(|e| e.group == group)
        .ok_or_else(|| Error::UnknownGroup(group.to_owned()))
}

/// Binary loss `ℓ(prediction, label)` with zero loss on correct decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTable<T> {
    table: [[T; 2]; 2],
}

impl<T: Scalar> LossTable<T> {
    /// `table[prediction][label]`.
    pub fn new(table: [[T; 2]; 2]) -> Result<Self> {
        if table[0][0] != T::zero() || table[1][1] != T::zero() {
            return Err(validation("loss table must have zero diagonal"));
        }
        if !(table[0][1] >= T::zero() && table[1][0] >= T::zero()) || !table[0][1].is_finite() || !table[1][0].is_finite() {
            return Err(validation("loss table entries must be finite and nonnegative"));
        }
        Ok(Self { table })
    }

    /// `ℓ(1, 0) = false_positive`, `ℓ(0, 1) = false_negative`.
    pub fn asymmetric(false_positive: T, false_negative: T) -> Result<Self> {
        Self::new([[T::zero(), false_negative], [false_positive, T::zero()]])
    }

    pub fn zero_one() -> Self {
        Self { table: [[T::zero(), T::one()], [T::one(), T::zero()]] }
    }

    pub fn get(&self, prediction: bool, label: bool) -> T {
        self.table[prediction as usize][label as usize]
    }

    /// Expected loss when allocating with probability `f` to an individual with
    /// `Pr[y = 1] = p`.
    fn expected(&self, f: T, p: T) -> T {
        let one = T::one();
        let row = |pred: bool| (one - p) * self.get(pred, false) + p * self.get(pred, true);
        f * row(true) + (one - f) * row(false)
    }
}

/// `E[f(x) ℓ(1, y) + (1 - f(x)) ℓ(0, y)]` on the simulated distribution.
pub fn expected_loss<T: Scalar>(
    policy: &GroupThresholdPolicy<T>,
    pop: &GroupedPopulation<T>,
    loss: &LossTable<T>,
) -> Result<T> {
    let mut total = T::zero();
    for g in pop.groups() {
        let e = policy.get(&g.name)?;
        let within: T = g.dist.iter().map(|(r, w)| w * loss.expected(e.allocate(r), r)).sum();
        total = total + g.weight * within;
    }
    Ok(total)
}

/// Expected loss over weighted labeled samples.
pub fn expected_loss_empirical<T: Scalar>(
    policy: &GroupThresholdPolicy<T>,
    samples: &[LabeledSample<T>],
    loss: &LossTable<T>,
) -> Result<T> {
    let (mut acc, mut mass) = (T::zero(), T::zero());
    for s in samples {
        let y = if s.label { T::one() } else { T::zero() };
        acc = acc + s.weight * loss.expected(policy.allocate(&s.group, s.score)?, y);
        mass = mass + s.weight;
    }
    if mass <= T::zero() {
        return Err(domain("no labeled samples"));
    }
    Ok(acc / mass)
}

/// `Σ_r |E[(y - r) 1(p(x) = r) | S_i]|` over the distinct scores of the group.
pub fn calibration_error<T: Scalar>(samples: &[LabeledSample<T>], group: &str) -> Result<T> {
    let mut pts: Vec<(T, T)> = Vec::new();
    let mut mass = T::zero();
    for s in samples.iter().filter(|s| s.group == group) {
        let y = if s.label { T::one() } else { T::zero() };
        pts.push((s.score, s.weight * (y - s.score)));
        mass = mass + s.weight;
    }
    if pts.is_empty() || mass <= T::zero() {
        return Err(domain(format!("group `{group}` has no samples")));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are not NaN"));
    let mut err = T::zero();
    let mut i = 0;
    while i < pts.len() {
        let r = pts[i].0;
        let mut bucket = T::zero();
        while i < pts.len() && pts[i].0 == r {
            bucket = bucket + pts[i].1;
            i += 1;
        }
        err = err + bucket.abs();
    }
    Ok(err / mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_a() -> ScoreDistribution<f64> {
        ScoreDistribution::new([(0.1, 0.5), (0.3, 0.3), (0.6, 0.2)]).unwrap()
    }

    fn single(d: ScoreDistribution<f64>) -> GroupedPopulation<f64> {
        GroupedPopulation::new([("A".to_owned(), 1.0, d)]).unwrap()
    }

    fn g2() -> GroupedPopulation<f64> {
        GroupedPopulation::new([
            ("S1".into(), 0.5, ScoreDistribution::new([(0.2, 0.8), (0.8, 0.2)]).unwrap()),
            ("S2".into(), 0.5, ScoreDistribution::new([(0.1, 0.8), (0.4, 0.2)]).unwrap()),
        ])
        .unwrap()
    }

    fn sample(group: &str, score: f64, label: bool, weight: f64) -> LabeledSample<f64> {
        LabeledSample { group: group.into(), score, label, weight }
    }

    #[test]
    fn threshold_examples() {
        let d = d_a();
        let (t, g) = solve_threshold_for_capacity(&d, 0.2).unwrap();
        assert_eq!(t, 0.3);
        assert!(g.abs() < 1e-12);
        let (t, g) = solve_threshold_for_capacity(&d, 0.35).unwrap();
        assert_eq!(t, 0.3);
        assert!((g - 0.5).abs() < 1e-12);
        let (t, g) = solve_threshold_for_capacity(&d, 1.0).unwrap();
        assert_eq!(t, 0.1);
        assert_eq!(g, 1.0);
        assert!(solve_threshold_for_capacity(&d, 1.5).is_err());
        assert!(solve_threshold_for_capacity(&d, -0.1).is_err());
    }

    #[test]
    fn capacity_examples() {
        let pop = single(d_a());
        let p = GroupThresholdPolicy::new([("A".to_owned(), 0.3, 0.5)]).unwrap();
        assert!((capacity(&p, &pop).unwrap().global - 0.35).abs() < 1e-15);
        let none = GroupThresholdPolicy::new([("A".to_owned(), 1.0, 0.0)]).unwrap();
        assert_eq!(capacity(&none, &pop).unwrap().global, 0.0);

        let pop = g2();
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.2, 0.2]).unwrap();
        let cap = capacity(&p, &pop).unwrap();
        assert!((cap.global - 0.2).abs() < 1e-15);
        let missing = GroupThresholdPolicy::new([("S1".to_owned(), 0.5, 0.0)]).unwrap();
        assert!(matches!(capacity(&missing, &pop), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn tp_examples() {
        let pop = g2();
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.2, 0.2]).unwrap();
        let tp = tp_count(&p, &pop).unwrap();
        assert!((tp.per_group[0] - 0.16).abs() < 1e-15);
        assert!((tp.per_group[1] - 0.08).abs() < 1e-15);
        assert!((tp.global - 0.12).abs() < 1e-15);

        let empty = GroupThresholdPolicy::for_capacities(&pop, &[0.0, 0.0]).unwrap();
        assert_eq!(tp_count(&empty, &pop).unwrap().global, 0.0);

        let pop = single(d_a());
        let p = GroupThresholdPolicy::new([("A".to_owned(), 0.3, 0.5)]).unwrap();
        assert!((tp_count(&p, &pop).unwrap().global - 0.165).abs() < 1e-15);
    }

    #[test]
    fn empirical_tp_on_exact_samples_matches_analytic() {
        let pop = g2();
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.3, 0.1]).unwrap();
        let exact = pop.labeled_expectation(|_, r| r);
        let emp = tp_count_empirical(&p, &exact).unwrap();
        let ana = tp_count(&p, &pop).unwrap();
        assert!((emp.global - ana.global).abs() < 1e-15);
        for (a, b) in emp.per_group.iter().zip(&ana.per_group) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_one_loss_identity() {
        let pop = g2();
        let b = pop.mean_score();
        for caps in [[0.0, 0.0], [0.2, 0.2], [0.3, 0.1], [1.0, 0.5]] {
            let p = GroupThresholdPolicy::for_capacities(&pop, &caps).unwrap();
            let c = capacity(&p, &pop).unwrap().global;
            let t = tp_count(&p, &pop).unwrap().global;
            let l = expected_loss(&p, &pop, &LossTable::zero_one()).unwrap();
            assert!((l - (b + c - 2.0 * t)).abs() < 1e-15);
            let exact = pop.labeled_expectation(|_, r| r);
            let le = expected_loss_empirical(&p, &exact, &LossTable::zero_one()).unwrap();
            assert!((le - l).abs() < 1e-14);
        }
        let empty = GroupThresholdPolicy::for_capacities(&pop, &[0.0, 0.0]).unwrap();
        assert!((expected_loss(&empty, &pop, &LossTable::zero_one()).unwrap() - b).abs() < 1e-15);
    }

    #[test]
    fn perfect_policy_has_no_loss() {
        let pop = single(ScoreDistribution::new([(0.0, 0.7), (1.0, 0.3)]).unwrap());
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.3]).unwrap();
        assert_eq!(expected_loss(&p, &pop, &LossTable::zero_one()).unwrap(), 0.0);
    }

    #[test]
    fn loss_table_validation() {
        assert!(LossTable::new([[0.1, 1.0], [1.0, 0.0]]).is_err());
        assert!(LossTable::new([[0.0, 1.0], [1.0, 0.2]]).is_err());
        assert!(LossTable::new([[0.0, -1.0], [1.0, 0.0]]).is_err());
        assert!(LossTable::asymmetric(2.0, 3.0).is_ok());
    }

    #[test]
    fn calibration_examples() {
        let s: Vec<_> = (0..10).map(|_| sample("A", 0.5, true, 0.1)).collect();
        assert!((calibration_error(&s, "A").unwrap() - 0.5).abs() < 1e-15);
        let s = vec![sample("A", 0.0, false, 0.4), sample("A", 1.0, true, 0.6)];
        assert_eq!(calibration_error(&s, "A").unwrap(), 0.0);
        assert!(calibration_error(&s, "B").is_err());
    }

    #[test]
    fn calibration_error_shrinks_with_samples() {
        let pop = g2();
        let small = calibration_error(&pop.simulate_labels(1_000, 11).unwrap(), "S1").unwrap();
        let large = calibration_error(&pop.simulate_labels(200_000, 11).unwrap(), "S1").unwrap();
        assert!(large < small, "{large} !< {small}");
        assert!(large < 0.01);
    }
}
