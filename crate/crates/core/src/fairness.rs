//! Group fairness metrics and structural diagnostics.

use crate::error::{domain, Result};
use crate::policy::{calibration_error, capacity, tp_count, GroupThresholdPolicy};
use crate::population::{GroupedPopulation, LabeledSample};
use crate::scalar::Scalar;
use crate::score_dist::ScoreDistribution;

fn spread<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let (lo, hi) = xs
        .into_iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        T::zero()
    } else {
        hi - lo
    }
}

/// `max_{i,j} |E[f | S_i] - E[f | S_j]|`.
pub fn dp_gap<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<T> {
    Ok(spread(capacity(policy, pop)?.per_group))
}

/// `max_{i,j} |TP_i / b_i - TP_j / b_j|`, the equal-opportunity gap on the simulated distribution.
pub fn eo_gap<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<T> {
    let tp = tp_count(policy, pop)?.per_group;
    eo_gap_from_tp(pop, &tp)
}

pub fn eo_gap_from_tp<T: Scalar>(pop: &GroupedPopulation<T>, tp: &[T]) -> Result<T> {
    let ratios = pop
        .groups()
        .iter()
        .zip(tp)
        .map(|(g, &t)| {
            let b = g.dist.mean();
            if b > T::zero() {
                Ok(t / b)
            } else {
                Err(domain(format!("group `{}` has zero base rate", g.name)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(spread(ratios))
}

/// Value of the normalized proportional-fairness objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropValue<T> {
    /// `Σ ρ_i ln TP_i`; `-inf` when some group has zero TP.
    pub value: T,
    pub zero_group_tp: bool,
}

/// `Σ ρ_i ln E[f y | S_i]`.
pub fn prop_value<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<PropValue<T>> {
    Ok(prop_from_tp(&pop.weights(), &tp_count(policy, pop)?.per_group))
}

pub fn prop_from_tp<T: Scalar>(weights: &[T], tp: &[T]) -> PropValue<T> {
    if tp.iter().any(|&t| t <= T::zero()) {
        return PropValue { value: T::neg_infinity(), zero_group_tp: true };
    }
    let value = weights.iter().zip(tp).map(|(&w, &t)| w * t.ln()).sum();
    PropValue { value, zero_group_tp: false }
}

/// `(D_KL(Q_S || Q_f), ln TP)` where `Q_S(i) = ρ_i` and `Q_f(i) = ρ_i TP_i / TP`.
pub fn kl_decomposition<T: Scalar>(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<(T, T)> {
    kl_from_tp(&pop.weights(), &tp_count(policy, pop)?.per_group)
}

pub fn kl_from_tp<T: Scalar>(weights: &[T], tp: &[T]) -> Result<(T, T)> {
    let total: T = weights.iter().zip(tp).map(|(&w, &t)| w * t).sum();
    if total <= T::zero() {
        return Err(domain("KL decomposition needs a positive global TP"));
    }
    let mut kl = T::zero();
    for (&w, &t) in weights.iter().zip(tp) {
        // ρ ln(ρ / (ρ t / TP)) = ρ ln(TP / t)
        kl = kl + if t > T::zero() { w * (total / t).ln() } else { T::infinity() };
    }
    Ok((kl, total.ln()))
}

fn slack<T: Scalar>() -> T {
    T::epsilon() * T::of(16.0)
}

/// Survival points where `Pr[u > r]` can change within `[lo, hi]`: `lo` and every support
/// value of either distribution in `(lo, hi]`.
fn breakpoints<T: Scalar>(d1: &ScoreDistribution<T>, d2: &ScoreDistribution<T>, lo: T, hi: T) -> Vec<T> {
    let mut pts: Vec<T> = std::iter::once(lo)
        .chain(d1.values().iter().chain(d2.values()).copied().filter(|&v| v > lo && v <= hi))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("not NaN"));
    pts.dedup();
    pts
}

/// `t0`-tail dominance of `d1` over `d2`: `Pr_1[u > r] >= Pr_2[u > r]` for all `r >= t0`.
pub fn tail_dominance<T: Scalar>(d1: &ScoreDistribution<T>, d2: &ScoreDistribution<T>, t0: T) -> bool {
    breakpoints(d1, d2, t0, T::one())
        .into_iter()
        .all(|r| d1.survival(r) + slack::<T>() >= d2.survival(r))
}

/// `t0, t_M`-tail dominance with gap `eta`: a margin of `eta` on `[t0, t_M]` and weak
/// dominance on `[t_M, 1]`.
pub fn tail_dominance_gap<T: Scalar>(
    d1: &ScoreDistribution<T>,
    d2: &ScoreDistribution<T>,
    t0: T,
    t_m: T,
    eta: T,
) -> bool {
    let gap_ok = breakpoints(d1, d2, t0, t_m)
        .into_iter()
        .all(|r| d1.survival(r) - d2.survival(r) + slack::<T>() >= eta);
    gap_ok && tail_dominance(d1, d2, t_m)
}

/// Non-degeneracy at capacity `c` within the threshold class.
///
/// Any allocation with capacity at least `1 - c` covers at least `1 - c / ρ_i` of every
/// group, and the worst such region is that group's bottom mass; it must carry a positive
/// mean score. So every group needs `c < ρ_i` and `Pr_i[u = 0] < 1 - c / ρ_i`.
pub fn non_degenerate<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> bool {
    pop.groups().iter().all(|g| {
        let zero_mass = T::one() - g.dist.positive_mass();
        c < g.weight && zero_mass < T::one() - c / g.weight
    })
}

/// `A(c, S_i)`: the TP of group `i` when the whole budget `c` is spent on it.
pub fn achievable_tp<T: Scalar>(pop: &GroupedPopulation<T>, group: &str, c: T) -> Result<T> {
    if !(c >= T::zero() && c <= T::one()) {
        return Err(domain(format!("capacity {c} is outside [0, 1]")));
    }
    let g = pop.group(group)?;
    Ok(g.dist.tp_at_capacity((c / g.weight).min(T::one())))
}

/// Fairness summary of one policy on one population.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport<T> {
    pub groups: Vec<String>,
    /// `E[f | S_i]`.
    pub group_capacity: Vec<T>,
    /// `E[f y | S_i]`.
    pub group_tp: Vec<T>,
    /// `E[f]`.
    pub capacity: T,
    /// `E[f y]`, unnormalized.
    pub tp: T,
    pub dp_gap: T,
    /// `None` when some group has zero base rate.
    pub eo_gap: Option<T>,
    pub prop: PropValue<T>,
    /// `None` when the global TP is zero.
    pub kl: Option<T>,
    pub log_tp: Option<T>,
    pub min_group_tp: T,
    /// Ordered pairs `(i, j)` such that group `i` has 0-tail dominance over group `j`.
    pub dominance: Vec<(usize, usize)>,
    pub calibration: Option<Vec<T>>,
}

impl<T: Scalar> FairnessReport<T> {
    pub fn evaluate(policy: &GroupThresholdPolicy<T>, pop: &GroupedPopulation<T>) -> Result<Self> {
        let cap = capacity(policy, pop)?;
        let tp = tp_count(policy, pop)?;
        let weights = pop.weights();
        let (kl, log_tp) = match kl_from_tp(&weights, &tp.per_group) {
            Ok((k, l)) => (Some(k), Some(l)),
            Err(_) => (None, None),
        };
        let groups = pop.groups();
        let mut dominance = Vec::new();
        for (i, gi) in groups.iter().enumerate() {
            for (j, gj) in groups.iter().enumerate() {
                if i != j && tail_dominance(&gi.dist, &gj.dist, T::zero()) {
                    dominance.push((i, j));
                }
            }
        }
        Ok(Self {
            groups: pop.names().map(str::to_owned).collect(),
            dp_gap: spread(cap.per_group.iter().copied()),
            eo_gap: eo_gap_from_tp(pop, &tp.per_group).ok(),
            prop: prop_from_tp(&weights, &tp.per_group),
            min_group_tp: tp.per_group.iter().copied().fold(T::infinity(), T::min),
            kl,
            log_tp,
            dominance,
            capacity: cap.global,
            tp: tp.global,
            group_capacity: cap.per_group,
            group_tp: tp.per_group,
            calibration: None,
        })
    }

    /// Attaches per-group calibration errors measured on `samples`.
    pub fn with_calibration(mut self, samples: &[LabeledSample<T>]) -> Result<Self> {
        let errs = self.groups.iter().map(|g| calibration_error(samples, g)).collect::<Result<Vec<_>>>()?;
        self.calibration = Some(errs);
        Ok(self)
    }

    /// `|prop + kl - ln TP|`, when all three are finite.
    pub fn identity_residual(&self) -> Option<T> {
        match (self.kl, self.log_tp) {
            (Some(kl), Some(l)) if !self.prop.zero_group_tp => Some((self.prop.value + kl - l).abs()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> GroupedPopulation<f64> {
        GroupedPopulation::new([
            ("S1".into(), 0.5, ScoreDistribution::new([(0.2, 0.8), (0.8, 0.2)]).unwrap()),
            ("S2".into(), 0.5, ScoreDistribution::new([(0.1, 0.8), (0.4, 0.2)]).unwrap()),
        ])
        .unwrap()
    }

    fn at(caps: &[f64]) -> (GroupThresholdPolicy<f64>, GroupedPopulation<f64>) {
        let pop = g2();
        (GroupThresholdPolicy::for_capacities(&pop, caps).unwrap(), pop)
    }

    #[test]
    fn dp_gap_examples() {
        let (p, pop) = at(&[0.2, 0.2]);
        assert!(dp_gap(&p, &pop).unwrap() < 1e-15);
        let (p, pop) = at(&[1.0 / 9.0, 0.2 + 0.8 / 9.0]);
        assert!((dp_gap(&p, &pop).unwrap() - 0.17778).abs() < 1e-4);
        let d = ScoreDistribution::new([(0.3, 0.5), (0.7, 0.5)]).unwrap();
        let pop = GroupedPopulation::new([("A".into(), 0.4, d.clone()), ("B".into(), 0.6, d)]).unwrap();
        let p = GroupThresholdPolicy::new([("A".into(), 0.3, 0.4), ("B".into(), 0.3, 0.4)]).unwrap();
        assert_eq!(dp_gap(&p, &pop).unwrap(), 0.0);
    }

    #[test]
    fn eo_gap_examples() {
        let (p, pop) = at(&[0.2, 0.2]);
        assert!(eo_gap(&p, &pop).unwrap() < 1e-15);
        let (p, pop) = at(&[1.0 / 9.0, 0.2 + 0.8 / 9.0]);
        let tp = tp_count(&p, &pop).unwrap().per_group;
        assert!((tp[0] - 0.08889).abs() < 1e-5 && (tp[1] - 0.08889).abs() < 1e-5);
        assert!((eo_gap(&p, &pop).unwrap() - 0.27778).abs() < 1e-4);

        let zero = GroupedPopulation::new([
            ("A".into(), 0.5, ScoreDistribution::point_mass(0.0).unwrap()),
            ("B".into(), 0.5, ScoreDistribution::point_mass(0.5).unwrap()),
        ])
        .unwrap();
        let p = GroupThresholdPolicy::for_capacities(&zero, &[0.1, 0.1]).unwrap();
        assert!(eo_gap(&p, &zero).is_err());
    }

    #[test]
    fn prop_examples() {
        let (p, pop) = at(&[0.2, 0.2]);
        let v = prop_value(&p, &pop).unwrap();
        assert!(!v.zero_group_tp);
        assert!((v.value - (-2.1791)).abs() < 1e-3);
        let (kl, log_tp) = kl_decomposition(&p, &pop).unwrap();
        assert!((kl - 0.0589).abs() < 1e-4);
        assert!((log_tp - 0.12f64.ln()).abs() < 1e-15);
        assert!((v.value + kl - log_tp).abs() < 1e-12);

        let (p, pop) = at(&[0.0, 0.2]);
        let v = prop_value(&p, &pop).unwrap();
        assert!(v.zero_group_tp && v.value == f64::NEG_INFINITY);
        let (p, pop) = at(&[0.0, 0.0]);
        assert!(kl_decomposition(&p, &pop).is_err());
    }

    #[test]
    fn identical_groups_collapse() {
        let d = ScoreDistribution::<f64>::new([(0.2, 0.5), (0.6, 0.5)]).unwrap();
        let pop = GroupedPopulation::new([("A".into(), 0.3, d.clone()), ("B".into(), 0.7, d)]).unwrap();
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.25, 0.25]).unwrap();
        let tp = tp_count(&p, &pop).unwrap().global;
        assert!((prop_value(&p, &pop).unwrap().value - tp.ln()).abs() < 1e-15);
        assert!(kl_decomposition(&p, &pop).unwrap().0.abs() < 1e-15);
    }

    #[test]
    fn split_leaves_prop_unchanged() {
        let (_, pop) = at(&[0.0, 0.0]);
        let split = pop.split_group("S1", 0.5).unwrap();
        let p = GroupThresholdPolicy::for_capacities(&pop, &[0.3, 0.1]).unwrap();
        let q = GroupThresholdPolicy::for_capacities(&split, &[0.3, 0.3, 0.1]).unwrap();
        let a = prop_value(&p, &pop).unwrap().value;
        let b = prop_value(&q, &split).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dominance_examples() {
        let pop = g2();
        let (s1, s2) = (&pop.groups()[0].dist, &pop.groups()[1].dist);
        assert!(tail_dominance(s1, s2, 0.0));
        assert!(tail_dominance(s1, s1, 0.3));
        assert!(!tail_dominance(s2, s1, 0.0));
        assert!(tail_dominance_gap(s1, s2, 0.4, 0.5, 0.2));
        assert!(!tail_dominance_gap(s1, s2, 0.4, 0.5, 0.3));
        assert!(!tail_dominance_gap(s1, s2, 0.0, 0.5, 0.1));
    }

    #[test]
    fn non_degeneracy_examples() {
        let pop = g2();
        assert!(non_degenerate(&pop, 0.2));
        assert!(non_degenerate(&pop, 0.0));
        assert!(!non_degenerate(&pop, 0.5));
        let zeros = GroupedPopulation::new([
            ("A".into(), 0.5, ScoreDistribution::new([(0.0, 0.9), (0.5, 0.1)]).unwrap()),
            ("B".into(), 0.5, ScoreDistribution::point_mass(0.5).unwrap()),
        ])
        .unwrap();
        assert!(!non_degenerate(&zeros, 0.2));
        assert!(non_degenerate(&zeros, 0.0));
    }

    #[test]
    fn achievable_tp_examples() {
        let pop = g2();
        assert!((achievable_tp(&pop, "S1", 0.2).unwrap() - 0.2).abs() < 1e-15);
        assert!((achievable_tp(&pop, "S2", 0.2).unwrap() - 0.1).abs() < 1e-15);
        assert!((achievable_tp(&pop, "S2", 1.0).unwrap() - 0.16).abs() < 1e-15);
        assert!(achievable_tp(&pop, "S3", 0.2).is_err());
    }

    #[test]
    fn report_satisfies_identity() {
        let (p, pop) = at(&[0.3, 0.1]);
        let r = FairnessReport::evaluate(&p, &pop).unwrap();
        assert!(r.identity_residual().unwrap() < 1e-12);
        assert_eq!(r.dominance, vec![(0, 1)]);
        let r = r.with_calibration(&pop.labeled_expectation(|_, s| s)).unwrap();
        assert!(r.calibration.unwrap().iter().all(|e| e.abs() < 1e-15));
    }
}
