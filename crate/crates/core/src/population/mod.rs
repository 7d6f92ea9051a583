//! Grouped populations of risk scores and labeled samples.

mod csv;
mod presets;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use self::csv::{from_csv, read_labeled_csv, read_population_csv, CsvData};
pub use self::presets::{calibrate_clipped_mean, make_figure_population, Figure};

use crate::error::{domain, validation, Error, Result};
use crate::scalar::Scalar;
use crate::score_dist::ScoreDistribution;

#[derive(Debug, Clone, PartialEq)]
pub struct Group<T> {
    pub name: String,
    /// `Pr[x ∈ S_i]`.
    pub weight: T,
    pub dist: ScoreDistribution<T>,
}

/// A partition of the population into disjoint groups, each with its score distribution.
///
/// Group order is the construction order and is preserved everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPopulation<T> {
    groups: Vec<Group<T>>,
}

/// One labeled observation `(p(x), g(x), y)` carrying a probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub group: String,
    pub score: T,
    pub label: bool,
    pub weight: T,
}

impl<T: Scalar> GroupedPopulation<T> {
    /// Groups with weights that already sum to one.
    pub fn new(groups: impl IntoIterator<Item = (String, T, ScoreDistribution<T>)>) -> Result<Self> {
        let groups: Vec<_> = groups.into_iter().collect();
        let total: T = groups.iter().map(|g| g.1).sum();
        if (total - T::one()).abs() > T::of(T::SUM_TOL) {
            return Err(validation(format!("group weights sum to {total}, expected 1")));
        }
        Self::from_masses(groups)
    }

    /// Groups with arbitrary positive masses, normalized to weights.
    pub fn from_masses(groups: impl IntoIterator<Item = (String, T, ScoreDistribution<T>)>) -> Result<Self> {
        let groups: Vec<_> = groups.into_iter().collect();
        if groups.is_empty() {
            return Err(validation("population needs at least one group"));
        }
        for (i, (name, w, _)) in groups.iter().enumerate() {
            if !(w.is_finite() && *w > T::zero()) {
                return Err(validation(format!("group `{name}` has non-positive weight {w}")));
            }
            if groups[..i].iter().any(|g| &g.0 == name) {
                return Err(validation(format!("duplicate group `{name}`")));
            }
        }
        let total: T = groups.iter().map(|g| g.1).sum();
        let groups = groups
            .into_iter()
            .map(|(name, weight, dist)| Group { name, weight: weight / total, dist })
            .collect();
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Group<T>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|g| g.name.as_str())
    }

    pub fn weights(&self) -> Vec<T> {
        self.groups.iter().map(|g| g.weight).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| Error::UnknownGroup(name.to_owned()))
    }

    pub fn group(&self, name: &str) -> Result<&Group<T>> {
        Ok(&self.groups[self.index_of(name)?])
    }

    /// `E[p(x) | x ∈ S_i]`: the base rate under simulated labels.
    pub fn base_rate(&self, name: &str) -> Result<T> {
        Ok(self.group(name)?.dist.mean())
    }

    pub fn base_rates(&self) -> Vec<T> {
        self.groups.iter().map(|g| g.dist.mean()).collect()
    }

    /// Score distribution of the whole population.
    pub fn pooled(&self) -> ScoreDistribution<T> {
        ScoreDistribution::mixture(self.groups.iter().map(|g| (g.weight, &g.dist)))
            .expect("mixture of valid distributions is valid")
    }

    /// Population-level mean score.
    pub fn mean_score(&self) -> T {
        self.pooled().mean()
    }

    /// Splits group `name` uniformly at random into two groups of relative sizes
    /// `eta` and `1 - eta`; both keep the original score distribution.
    pub fn split_group(&self, name: &str, eta: T) -> Result<Self> {
        if !(eta > T::zero() && eta < T::one()) {
            return Err(domain(format!("split fraction {eta} must lie in (0, 1)")));
        }
        let at = self.index_of(name)?;
        let mut groups = Vec::with_capacity(self.len() + 1);
        for (i, g) in self.groups.iter().enumerate() {
            if i == at {
                groups.push((format!("{}.a", g.name), g.weight * eta, g.dist.clone()));
                groups.push((format!("{}.b", g.name), g.weight * (T::one() - eta), g.dist.clone()));
            } else {
                groups.push((g.name.clone(), g.weight, g.dist.clone()));
            }
        }
        Self::from_masses(groups)
    }

    /// Draws `n` iid samples of the simulated distribution: group by weight, score by
    /// the group's distribution, label `~ Ber(score)`. Each sample carries mass `1/n`.
    pub fn simulate_labels(&self, n: usize, seed: u64) -> Result<Vec<LabeledSample<T>>> {
        if n == 0 {
            return Err(domain("cannot simulate zero samples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = WeightedIndex::new(self.groups.iter().map(|g| g.weight.as_f64()))
            .map_err(|e| validation(e.to_string()))?;
        let w = T::one() / T::of(n as f64);
        let samples = (0..n)
            .map(|_| {
                let g = &self.groups[pick.sample(&mut rng)];
                let u = 1.0 - rng.gen::<f64>();
                let score = g.dist.quantile(T::of(u)).expect("u in (0, 1]");
                let label = rng.gen::<f64>() < score.as_f64();
                LabeledSample { group: g.name.clone(), score, label, weight: w }
            })
            .collect();
        Ok(samples)
    }

    /// Exact labeled representation of the population when `Pr[y = 1 | group i, score r]`
    /// is `truth(i, r)`: every support point becomes a positive and a negative sample
    /// with the corresponding masses. With `truth(i, r) = r` this is the simulated distribution.
    pub fn labeled_expectation(&self, truth: impl Fn(usize, T) -> T) -> Vec<LabeledSample<T>> {
        let mut out = Vec::new();
        for (i, g) in self.groups.iter().enumerate() {
            for (r, w) in g.dist.iter() {
                let p = truth(i, r).max(T::zero()).min(T::one());
                for (label, mass) in [(true, p), (false, T::one() - p)] {
                    if mass > T::zero() {
                        out.push(LabeledSample {
                            group: g.name.clone(),
                            score: r,
                            label,
                            weight: g.weight * w * mass,
                        });
                    }
                }
            }
        }
        out
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

    #[test]
    fn base_rates() {
        let pop = g2();
        assert!((pop.base_rate("S1").unwrap() - 0.32).abs() < 1e-15);
        assert!((pop.base_rate("S2").unwrap() - 0.16).abs() < 1e-15);
        assert!(matches!(pop.base_rate("S3"), Err(Error::UnknownGroup(_))));
        let one = GroupedPopulation::new([("A".into(), 1.0, ScoreDistribution::point_mass(1.0).unwrap())]).unwrap();
        assert_eq!(one.base_rate("A").unwrap(), 1.0);
    }

    #[test]
    fn population_mean_is_weighted_base_rate() {
        let pop = g2();
        let weighted: f64 = pop.weights().iter().zip(pop.base_rates()).map(|(w, b)| w * b).sum();
        assert!((pop.mean_score() - weighted).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_groups() {
        let d = ScoreDistribution::point_mass(0.5).unwrap();
        assert!(GroupedPopulation::<f64>::from_masses(Vec::new()).is_err());
        assert!(GroupedPopulation::new([("A".into(), 0.5, d.clone())]).is_err());
        assert!(GroupedPopulation::from_masses([("A".into(), 0.0, d.clone())]).is_err());
        assert!(GroupedPopulation::from_masses([("A".into(), 1.0, d.clone()), ("A".into(), 1.0, d)]).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let pop = g2();
        let a = pop.simulate_labels(500, 3).unwrap();
        let b = pop.simulate_labels(500, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, pop.simulate_labels(500, 4).unwrap());
        assert!(pop.simulate_labels(0, 3).is_err());
    }

    #[test]
    fn all_positive_scores_give_positive_labels() {
        let pop = GroupedPopulation::new([("A".into(), 1.0, ScoreDistribution::point_mass(1.0).unwrap())]).unwrap();
        assert!(pop.simulate_labels(1000, 9).unwrap().iter().all(|s| s.label));
    }

    #[test]
    fn empirical_base_rate_matches() {
        let pop = g2();
        let samples = pop.simulate_labels(1_000_000, 7).unwrap();
        let (pos, tot) = samples
            .iter()
            .filter(|s| s.group == "S1")
            .fold((0.0, 0.0), |(p, t), s| (p + if s.label { s.weight } else { 0.0 }, t + s.weight));
        let rate = pos / tot;
        assert!((rate - 0.32).abs() <= 0.002, "empirical base rate {rate}");
    }

    #[test]
    fn labeled_expectation_is_exact() {
        let pop = g2();
        let samples = pop.labeled_expectation(|_, r| r);
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        let pos: f64 = samples.iter().filter(|s| s.label).map(|s| s.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((pos - pop.mean_score()).abs() < 1e-15);
    }

    #[test]
    fn split_preserves_weights() {
        let pop = g2().split_group("S1", 0.3).unwrap();
        assert_eq!(pop.len(), 3);
        assert!((pop.weights()[0] - 0.15).abs() < 1e-15);
        assert!((pop.weights()[1] - 0.35).abs() < 1e-15);
        assert!(g2().split_group("S1", 1.0).is_err());
    }
}
