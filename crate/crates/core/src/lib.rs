//! Fair allocation of a limited budget across groups of risk-scored individuals.
//!
//! A population is a weighted set of groups, each with a discrete distribution of
//! scores `r ∈ [0, 1]` read as the probability of a positive outcome. Policies are
//! per-group randomized thresholds; solvers pick them to maximize expected true
//! positives under a capacity constraint and one of several fairness regimes.
//!
//! Everything numeric is generic over [`Scalar`]; the `*F64` aliases below are the
//! usual entry points.

pub mod error;
pub mod fairness;
pub mod oracle;
pub mod policy;
pub mod population;
pub mod scalar;
pub mod scenario;
pub mod score_dist;
pub mod solvers;

pub use error::{Error, Result};
pub use fairness::FairnessReport;
pub use oracle::{oracle_solve, GridSpec, Objective, OracleResult};
pub use policy::{GroupThreshold, GroupThresholdPolicy, LossTable};
pub use population::{Figure, Group, GroupedPopulation, LabeledSample};
pub use scalar::Scalar;
pub use scenario::{Scenario, ScenarioConfig};
pub use score_dist::{ClippedGaussianSpec, ScoreDistribution};
pub use solvers::{price_of_fairness, solve, PriceOfFairness, Regime, SolveResult, SolverFlag, SolverOptions};

pub type ScoreDistF64 = ScoreDistribution<f64>;
pub type GroupF64 = Group<f64>;
pub type PopulationF64 = GroupedPopulation<f64>;
pub type LabeledSampleF64 = LabeledSample<f64>;
pub type PolicyF64 = GroupThresholdPolicy<f64>;
pub type SolveResultF64 = SolveResult<f64>;
pub type FairnessReportF64 = FairnessReport<f64>;
pub type PriceOfFairnessF64 = PriceOfFairness<f64>;
pub type OracleResultF64 = OracleResult<f64>;
