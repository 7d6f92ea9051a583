use std::fmt;
use std::str::FromStr;

use super::GroupedPopulation;
use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::score_dist::{discretize, ClippedGaussianSpec};

/// The simulated populations behind the three figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Mean 0.05, variances 0.02 / 0.01: a single threshold selects mostly from S1.
    Fig1,
    /// Variances 5e-5 / 5e-6 with equal post-clip mean 0.00235.
    Fig2,
    /// S1 mean 0.005 variance 5e-6, S2 mean 0.002 variance 8e-6.
    Fig3,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig1, Figure::Fig2, Figure::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (expected fig1, fig2 or fig3)")))
    }
}

const FIG2_TARGET_MEAN: f64 = 0.00235;

/// Two equal-sized groups `S1`, `S2` with clipped-Gaussian scores on `bins` bins.
pub fn make_figure_population<T: Scalar>(which: Figure, bins: usize) -> Result<GroupedPopulation<T>> {
    let specs = match which {
        Figure::Fig1 => [(0.05, 0.02), (0.05, 0.01)],
        Figure::Fig2 => {
            let m1 = calibrate_clipped_mean(5e-5, FIG2_TARGET_MEAN, bins)?;
            let m2 = calibrate_clipped_mean(5e-6, FIG2_TARGET_MEAN, bins)?;
            [(m1, 5e-5), (m2, 5e-6)]
        }
        Figure::Fig3 => [(0.005, 5e-6), (0.002, 8e-6)],
    };
    let half = T::half();
    let groups = specs
        .iter()
        .zip(["S1", "S2"])
        .map(|(&(mean, var), name)| {
            let dist = discretize(&ClippedGaussianSpec::new(mean, var, bins)?)?;
            Ok((name.to_owned(), half, dist))
        })
        .collect::<Result<Vec<_>>>()?;
    GroupedPopulation::new(groups)
}

/// Pre-clip mean whose discretized clipped Gaussian (given variance and bins) has
/// post-clip mean `target`. The post-clip mean is increasing in the pre-clip mean.
pub fn calibrate_clipped_mean(variance: f64, target: f64, bins: usize) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain(format!("target mean {target} must lie in (0, 1)")));
    }
    let post = |m: f64| -> Result<f64> {
        Ok(discretize::<f64>(&ClippedGaussianSpec::new(m, variance, bins)?)?.mean())
    };
    let sd = variance.sqrt();
    let (mut lo, mut hi) = (-10.0 * sd - 1.0, 10.0 * sd + 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if post(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
