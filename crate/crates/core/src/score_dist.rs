//! Discrete score distributions on `[0, 1]`.
//!
//! A [`ScoreDistribution`] is a finite, weighted support of predictor scores for a
//! single group. Everything downstream (thresholds, true-positive counts, solver
//! curves) is computed exactly on this support with prefix sums; continuous
//! families only enter through [`discretize`].
//!
//! Two orderings are kept:
//!
//! * ascending prefix sums back the CDF, the quantile function and quantile integrals;
//! * descending ("top-down") prefix sums back the allocation curve: giving a group
//!   within-group capacity `c` means allocating its highest-scored mass first, and
//!   the resulting true-positive count `H(c)` is piecewise linear and concave in `c`.

use statrs::function::erf::erfc;

use crate::error::{domain, validation, Result};
use crate::scalar::Scalar;

/// Default number of interior bins used when discretizing a clipped Gaussian.
pub const DEFAULT_BINS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution<T> {
    values: Vec<T>,
    weights: Vec<T>,
    /// `cdf[i] = Pr[u <= values[i]]`; the last entry is exactly one.
    cdf: Vec<T>,
    /// `low_tp[i] = E[1(u <= values[i]) u]`.
    low_tp: Vec<T>,
    /// `top_mass[k]` is the mass of the `k` largest support points; length `n + 1`.
    top_mass: Vec<T>,
    /// `top_tp[k] = E[u; u among the k largest support points]`; length `n + 1`.
    top_tp: Vec<T>,
    /// Number of strictly positive support values.
    positive: usize,
}

fn check_unit<T: Scalar>(name: &str, x: T) -> Result<()> {
    if x.is_nan() || x < T::zero() || x > T::one() {
        return Err(domain(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

impl<T: Scalar> ScoreDistribution<T> {
    /// Builds a distribution from `(score, probability)` pairs whose probabilities sum to one.
    ///
    /// Duplicate scores are merged, masses below the precision floor are dropped and
    /// the result is renormalized.
    pub fn new(points: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let points: Vec<(T, T)> = points.into_iter().collect();
        let total: T = points.iter().map(|p| p.1).sum();
        if (total - T::one()).abs() > T::of(T::SUM_TOL) {
            return Err(validation(format!(
                "weights sum to {total}, expected 1 (use from_masses for unnormalized input)"
            )));
        }
        Self::from_masses(points)
    }

    /// Builds a distribution from `(score, mass)` pairs with arbitrary positive total mass.
    pub fn from_masses(points: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let mut pts: Vec<(T, T)> = Vec::new();
        for (v, w) in points {
            check_unit("score", v)?;
            if !w.is_finite() || w < T::zero() {
                return Err(validation(format!("weight {w} at score {v} is negative or not finite")));
            }
            if w > T::zero() {
                pts.push((v, w));
            }
        }
        if pts.is_empty() {
            return Err(validation("distribution has no positive mass"));
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are not NaN"));

        let mut merged: Vec<(T, T)> = Vec::with_capacity(pts.len());
        for (v, w) in pts {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 = last.1 + w,
                _ => merged.push((v, w)),
            }
        }
        let total: T = merged.iter().map(|p| p.1).sum();
        let floor = T::of(T::MASS_FLOOR);
        merged.retain(|p| p.1 / total >= floor);
        if merged.is_empty() {
            return Err(validation("all masses fall below the precision floor"));
        }
        let total: T = merged.iter().map(|p| p.1).sum();
        let (values, weights): (Vec<T>, Vec<T>) =
            merged.into_iter().map(|(v, w)| (v, w / total)).unzip();
        Ok(Self::from_sorted(values, weights))
    }

    /// A single atom at `value`.
    pub fn point_mass(value: T) -> Result<Self> {
        Self::from_masses([(value, T::one())])
    }

    /// Mixture `Σ a_j D_j` of distributions with positive mixing weights.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (T, &'a ScoreDistribution<T>)>) -> Result<Self> {
        let mut pts = Vec::new();
        for (a, d) in parts {
            pts.extend(d.iter().map(|(v, w)| (v, a * w)));
        }
        Self::from_masses(pts)
    }

    fn from_sorted(values: Vec<T>, weights: Vec<T>) -> Self {
        let n = values.len();
        let mut cdf = Vec::with_capacity(n);
        let mut low_tp = Vec::with_capacity(n);
        let (mut acc, mut acc_tp) = (T::zero(), T::zero());
        for (&v, &w) in values.iter().zip(&weights) {
            acc = acc + w;
            acc_tp = acc_tp + w * v;
            cdf.push(acc);
            low_tp.push(acc_tp);
        }
        cdf[n - 1] = T::one();

        let mut top_mass = Vec::with_capacity(n + 1);
        let mut top_tp = Vec::with_capacity(n + 1);
        let (mut acc, mut acc_tp) = (T::zero(), T::zero());
        top_mass.push(acc);
        top_tp.push(acc_tp);
        for (&v, &w) in values.iter().zip(&weights).rev() {
            acc = acc + w;
            acc_tp = acc_tp + w * v;
            top_mass.push(acc);
            top_tp.push(acc_tp);
        }
        top_mass[n] = T::one();
        let positive = values.iter().filter(|v| **v > T::zero()).count();
        Self { values, weights, cdf, low_tp, top_mass, top_tp, positive }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Support values in increasing order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `(score, probability)` pairs in increasing score order.
    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn min_value(&self) -> T {
        self.values[0]
    }

    pub fn max_value(&self) -> T {
        self.values[self.len() - 1]
    }

    /// `E[u]`, which is the base rate of the group under simulated labels.
    pub fn mean(&self) -> T {
        self.top_tp[self.len()]
    }

    /// `Pr[u > 0]`.
    pub fn positive_mass(&self) -> T {
        self.top_mass[self.positive]
    }

    /// Number of support points `<= t`.
    fn count_le(&self, t: T) -> usize {
        self.values.partition_point(|v| *v <= t)
    }

    /// Index of `t` in the support, if it is an atom.
    fn index_of(&self, t: T) -> Option<usize> {
        self.values.binary_search_by(|v| v.partial_cmp(&t).expect("not NaN")).ok()
    }

    /// `F(t) = Pr[u <= t]`.
    pub fn cdf(&self, t: T) -> Result<T> {
        check_unit("t", t)?;
        Ok(self.cdf_at(t))
    }

    pub(crate) fn cdf_at(&self, t: T) -> T {
        match self.count_le(t) {
            0 => T::zero(),
            k => self.cdf[k - 1],
        }
    }

    /// `Pr[u = t]`.
    pub fn mass_at(&self, t: T) -> T {
        self.index_of(t).map_or(T::zero(), |i| self.weights[i])
    }

    /// `Pr[u > t]`, summed from the top so small tails keep their precision.
    pub fn survival(&self, t: T) -> T {
        self.top_mass[self.len() - self.count_le(t)]
    }

    /// `q(κ) = inf { t ∈ [0, 1] : F(t) >= κ }`, so `q(0) = 0`.
    pub fn quantile(&self, kappa: T) -> Result<T> {
        check_unit("kappa", kappa)?;
        if kappa == T::zero() {
            return Ok(T::zero());
        }
        let i = self.cdf.partition_point(|f| *f < kappa);
        Ok(self.values[i.min(self.len() - 1)])
    }

    /// `∫_0^κ q(r) dr`, exact for the piecewise-constant quantile function.
    fn quantile_primitive(&self, kappa: T) -> T {
        let i = self.cdf.partition_point(|f| *f < kappa).min(self.len() - 1);
        let (below_mass, below_tp) =
            if i == 0 { (T::zero(), T::zero()) } else { (self.cdf[i - 1], self.low_tp[i - 1]) };
        below_tp + (kappa - below_mass) * self.values[i]
    }

    /// `∫_a^b q(r) dr` for `0 <= a <= b <= 1`, computed exactly (no quadrature).
    pub fn quantile_integral(&self, a: T, b: T) -> Result<T> {
        check_unit("lower limit", a)?;
        check_unit("upper limit", b)?;
        if a > b {
            return Err(domain(format!("integral limits out of order: {a} > {b}")));
        }
        Ok(self.quantile_primitive(b) - self.quantile_primitive(a))
    }

    /// `E[1(u > t) u]`, or `E[1(t < u <= t_max) u]` when `t_max` is given.
    pub fn tail_expectation(&self, t: T, t_max: Option<T>) -> Result<T> {
        check_unit("t", t)?;
        let n = self.len();
        let above = self.top_tp[n - self.count_le(t)];
        match t_max {
            None => Ok(above),
            Some(tm) => {
                check_unit("t_max", tm)?;
                if tm < t {
                    return Err(domain(format!("t = {t} exceeds t_max = {tm}")));
                }
                Ok(above - self.top_tp[n - self.count_le(tm)])
            }
        }
    }

    // ---- allocation curve -------------------------------------------------------

    /// Value of the `k`-th largest support point.
    #[inline]
    fn top_value(&self, k: usize) -> T {
        self.values[self.len() - 1 - k]
    }

    #[inline]
    fn top_weight(&self, k: usize) -> T {
        self.weights[self.len() - 1 - k]
    }

    /// Segment of the allocation curve that within-group capacity `c` ends in: the
    /// largest `k` with `top_mass[k] <= c`, snapping to the segment boundary when
    /// `c` sits on it up to rounding.
    fn segment_for_capacity(&self, c: T) -> usize {
        let slack = T::epsilon() * T::of(16.0);
        let n = self.len();
        let k = self.top_mass[..n].partition_point(|m| *m <= c + slack);
        k.saturating_sub(1)
    }

    /// Canonical randomized threshold `(t, γ)` with `E[τ(u)] = c`.
    ///
    /// `t = q(1 - c)`; `γ` is the fraction of the atom at `t` that must be allocated.
    pub fn threshold_for_capacity(&self, c: T) -> (T, T) {
        let c = c.max(T::zero()).min(T::one());
        let k = self.segment_for_capacity(c);
        let gamma = ((c - self.top_mass[k]) / self.top_weight(k)).max(T::zero()).min(T::one());
        (self.top_value(k), gamma)
    }

    /// Capacity and true-positive count of the rule `1(u > t) + γ 1(u = t)`.
    pub fn evaluate_threshold(&self, t: T, gamma: T) -> (T, T) {
        let k = self.len() - self.count_le(t);
        let atom = self.mass_at(t);
        (self.top_mass[k] + gamma * atom, self.top_tp[k] + gamma * atom * t)
    }

    /// `H(c)`: true-positive count `E[τ(u) u]` of the best threshold rule with capacity `c`.
    pub fn tp_at_capacity(&self, c: T) -> T {
        let c = c.max(T::zero()).min(T::one());
        let k = self.segment_for_capacity(c);
        self.top_tp[k] + (c - self.top_mass[k]).max(T::zero()) * self.top_value(k)
    }

    /// Smallest capacity `c` with `H(c) >= target`, or `None` when `target` exceeds the mean.
    ///
    /// Plateaus (mass at score zero) never receive capacity.
    pub fn capacity_for_tp(&self, target: T) -> Option<T> {
        if target <= T::zero() {
            return Some(T::zero());
        }
        let total = self.mean();
        if target >= total {
            let tol = T::epsilon() * T::of(64.0) * total.max(T::min_positive_value());
            return (target - total <= tol).then(|| self.positive_mass());
        }
        let k = self.top_tp[1..=self.positive].partition_point(|h| *h < target);
        let d = self.top_value(k);
        let c = self.top_mass[k] + (target - self.top_tp[k]) / d;
        Some(c.min(self.top_mass[k + 1]))
    }

    /// Capacity at which the ratio `t(c) / H(c)` of marginal to accumulated
    /// true positives falls to `1 / level`.
    ///
    /// This is nondecreasing and continuous in `level`; it starts at zero and
    /// saturates at [`positive_mass`](Self::positive_mass).
    pub fn capacity_at_level(&self, level: T) -> T {
        if level <= T::zero() {
            return T::zero();
        }
        // Segment k is fully used once H at its end reaches t_k * level.
        let (mut lo, mut hi) = (0usize, self.positive);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.top_tp[mid + 1] / self.top_value(mid) < level {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo == self.positive {
            return self.positive_mass();
        }
        let k = lo;
        let d = self.top_value(k);
        let extra = (level - self.top_tp[k] / d).max(T::zero());
        (self.top_mass[k] + extra).min(self.top_mass[k + 1])
    }

    /// Threshold (the marginal score) at within-group capacity `c`.
    pub fn marginal_at_capacity(&self, c: T) -> T {
        self.threshold_for_capacity(c).0
    }
}

/// Gaussian clipped to `[0, 1]` and histogrammed into `bins` equal interior bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedGaussianSpec {
    pub mean: f64,
    pub variance: f64,
    pub bins: usize,
}

impl ClippedGaussianSpec {
    pub fn new(mean: f64, variance: f64, bins: usize) -> Result<Self> {
        let spec = Self { mean, variance, bins };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(domain(format!("mean {} is not finite", self.mean)));
        }
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(domain(format!("variance {} must be positive", self.variance)));
        }
        if self.bins < 2 {
            return Err(domain(format!("bins = {} must be at least 2", self.bins)));
        }
        Ok(())
    }
}

/// Discretizes a clipped Gaussian.
///
/// Interior mass of bin `[k/B, (k+1)/B)` sits at its midpoint; everything clipped
/// below zero becomes an atom at 0 and everything clipped above one an atom at 1.
pub fn discretize<T: Scalar>(spec: &ClippedGaussianSpec) -> Result<ScoreDistribution<T>> {
    spec.validate()?;
    let sd = spec.variance.sqrt();
    let z = |x: f64| (x - spec.mean) / (sd * std::f64::consts::SQRT_2);
    // Lower and upper tail probabilities, each accurate far into its own tail.
    let lower = |x: f64| 0.5 * erfc(-z(x));
    let upper = |x: f64| 0.5 * erfc(z(x));
    let between = |a: f64, b: f64| {
        if a >= spec.mean {
            upper(a) - upper(b)
        } else {
            lower(b) - lower(a)
        }
    };

    let b = spec.bins;
    let width = 1.0 / b as f64;
    let mut pts = Vec::with_capacity(b + 2);
    pts.push((T::zero(), T::of(lower(0.0))));
    for k in 0..b {
        let lo = k as f64 * width;
        let hi = if k + 1 == b { 1.0 } else { (k + 1) as f64 * width };
        let mass = between(lo, hi).max(0.0);
        pts.push((T::of(lo + 0.5 * width), T::of(mass)));
    }
    pts.push((T::one(), T::of(upper(1.0))));
    ScoreDistribution::from_masses(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_a() -> ScoreDistribution<f64> {
        ScoreDistribution::new([(0.1, 0.5), (0.3, 0.3), (0.6, 0.2)]).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let d = d_a();
        assert!((d.cdf(0.3).unwrap() - 0.8).abs() < 1e-15);
        assert!((d.cdf(0.2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ScoreDistribution::point_mass(0.5).unwrap().cdf(1.0).unwrap(), 1.0);
        assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        assert!(d.cdf(1.5).is_err());
        assert!(d.cdf(-0.1).is_err());
    }

    #[test]
    fn quantile_examples() {
        let d = d_a();
        assert_eq!(d.quantile(0.5).unwrap(), 0.1);
        assert_eq!(d.quantile(0.6).unwrap(), 0.3);
        assert_eq!(d.quantile(0.0).unwrap(), 0.0);
        assert_eq!(d.quantile(1e-9).unwrap(), 0.1);
        assert_eq!(d.quantile(1.0).unwrap(), 0.6);
        assert_eq!(ScoreDistribution::point_mass(0.5).unwrap().quantile(0.7).unwrap(), 0.5);
        assert!(d.quantile(1.01).is_err());
    }

    #[test]
    fn tail_expectation_examples() {
        let d = d_a();
        assert!((d.tail_expectation(0.3, None).unwrap() - 0.12).abs() < 1e-15);
        assert!((d.tail_expectation(0.1, Some(0.3)).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(d.tail_expectation(1.0, None).unwrap(), 0.0);
        assert!(d.tail_expectation(0.5, Some(0.2)).is_err());
    }

    #[test]
    fn construction_merges_and_validates() {
        let d = ScoreDistribution::new([(0.3, 0.25), (0.1, 0.5), (0.3, 0.25)]).unwrap();
        assert_eq!(d.values(), &[0.1, 0.3]);
        assert_eq!(d.weights(), &[0.5, 0.5]);
        assert!(ScoreDistribution::new([(0.1, 0.5), (0.2, 0.2)]).is_err());
        assert!(ScoreDistribution::<f64>::from_masses([(0.1, -1.0)]).is_err());
        assert!(ScoreDistribution::<f64>::from_masses([(1.1, 1.0)]).is_err());
        assert!(ScoreDistribution::<f64>::from_masses(std::iter::empty()).is_err());
        // Negligible mass is dropped.
        let d = ScoreDistribution::from_masses([(0.2, 1.0), (0.9, 1e-17)]).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn threshold_for_capacity_examples() {
        let d = d_a();
        assert_eq!(d.threshold_for_capacity(0.2), (0.3, 0.0));
        let (t, g) = d.threshold_for_capacity(0.35);
        assert_eq!(t, 0.3);
        assert!((g - 0.5).abs() < 1e-12);
        let (t, g) = d.threshold_for_capacity(1.0);
        assert_eq!((t, g), (0.1, 1.0));
        assert_eq!(d.threshold_for_capacity(0.0), (0.6, 0.0));
    }

    #[test]
    fn allocation_curve() {
        let d = d_a();
        assert!((d.tp_at_capacity(0.35) - 0.165).abs() < 1e-15);
        assert!((d.tp_at_capacity(1.0) - d.mean()).abs() < 1e-15);
        assert!((d.capacity_for_tp(0.165).unwrap() - 0.35).abs() < 1e-15);
        assert!(d.capacity_for_tp(0.3).is_none());
        let z = ScoreDistribution::from_masses([(0.0, 0.5), (0.4, 0.5)]).unwrap();
        // Full true positives need only the positive mass.
        assert_eq!(z.capacity_for_tp(0.2), Some(0.5));
        assert_eq!(z.capacity_at_level(1e9), 0.5);
    }

    #[test]
    fn level_solves_ratio_condition() {
        let d = d_a();
        for &c in &[0.05, 0.15, 0.3, 0.45, 0.7] {
            let t = d.marginal_at_capacity(c);
            let level = d.tp_at_capacity(c) / t;
            let back = d.capacity_at_level(level);
            assert!((back - c).abs() < 1e-12, "c = {c}, back = {back}");
        }
    }

    #[test]
    fn discretize_examples() {
        let spec = ClippedGaussianSpec::new(-1.0, 0.0001, 100).unwrap();
        let d: ScoreDistribution<f64> = discretize(&spec).unwrap();
        assert!(d.mass_at(0.0) >= 0.999);
        assert!(ClippedGaussianSpec::new(0.5, 0.0, 10).is_err());
        assert!(ClippedGaussianSpec::new(0.5, 0.1, 1).is_err());

        let d: ScoreDistribution<f64> =
            discretize(&ClippedGaussianSpec::new(0.5, 1e-14, DEFAULT_BINS).unwrap()).unwrap();
        assert!((d.mean() - 0.5).abs() < 1e-9);
        let near: f64 = d.iter().filter(|(v, _)| (v - 0.5).abs() <= 1e-4).map(|p| p.1).sum();
        assert!((near - 1.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let d = ScoreDistribution::<f32>::new([(0.1, 0.5), (0.3, 0.3), (0.6, 0.2)]).unwrap();
        assert!((d.cdf(0.3).unwrap() - 0.8).abs() < 1e-6);
        assert_eq!(d.quantile(0.6).unwrap(), 0.3);
        assert!((d.tp_at_capacity(0.35) - 0.165).abs() < 1e-6);
        let g: ScoreDistribution<f32> =
            discretize(&ClippedGaussianSpec::new(0.05, 0.01, 1000).unwrap()).unwrap();
        assert!((g.iter().map(|p| p.1).sum::<f32>() - 1.0).abs() < 1e-5);
    }
}
