//! Declarative experiments: population source, capacities and regimes in, CSV reports out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::FairnessReport;
use crate::oracle::{lipschitz_bound, oracle_solve, GridSpec, Objective};
use crate::policy::{tp_count_empirical, GroupThresholdPolicy};
use crate::population::{make_figure_population, read_population_csv, Figure, GroupedPopulation, LabeledSample};
use crate::score_dist::{discretize, ClippedGaussianSpec, ScoreDistribution, DEFAULT_BINS};
use crate::solvers::{solve, PriceOfFairness, Regime, SolveResult};

/// A clipped-Gaussian group given inline in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianGroup {
    pub name: String,
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Experiment description as read from JSON. Every key has a matching CLI flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `fig1`, `fig2` or `fig3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Population file with header `group,score,weight`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussians: Option<Vec<GaussianGroup>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<f64>>,
    /// All regimes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regimes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Simulated labeled samples for empirical TP and calibration columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
    /// Upper edge of the last regular histogram bin; mass above it lands in a final
    /// `[histogram_max, 1]` bin. Defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_max: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative `population_csv` is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(csv), Some(dir)) = (&cfg.population_csv, path.parent()) {
            if csv.is_relative() {
                cfg.population_csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    /// Checks the config and fixes defaults.
    pub fn validate(&self) -> Result<Scenario> {
        let bad = |m: String| Err(Error::Config(m));
        let sources = [self.preset.is_some(), self.population_csv.is_some(), self.gaussians.is_some()];
        let source = match sources.iter().filter(|s| **s).count() {
            1 => {
                if let Some(p) = &self.preset {
                    PopulationSource::Preset(p.parse()?)
                } else if let Some(p) = &self.population_csv {
                    PopulationSource::Csv(p.clone())
                } else {
                    PopulationSource::Gaussians(self.gaussians.clone().unwrap_or_default())
                }
            }
            0 => return bad("no population source (set one of preset, population_csv, gaussians)".into()),
            _ => return bad("more than one population source given".into()),
        };
        if let PopulationSource::Gaussians(g) = &source {
            if g.is_empty() {
                return bad("gaussians list is empty".into());
            }
        }

        let mut capacities: Vec<f64> = match (&self.capacity, &self.capacities) {
            (Some(_), Some(_)) => return bad("give either capacity or capacities, not both".into()),
            (Some(c), None) => vec![*c],
            (None, Some(cs)) => cs.clone(),
            (None, None) => return bad("no capacity given".into()),
        };
        if capacities.is_empty() {
            return bad("capacities list is empty".into());
        }
        if let Some(c) = capacities.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return bad(format!("capacity {c} is outside [0, 1]"));
        }
        let mut warnings = Vec::new();
        capacities.sort_by(|a, b| a.partial_cmp(b).expect("capacities are finite"));
        let before = capacities.len();
        capacities.dedup();
        if capacities.len() < before {
            warnings.push(format!("removed {} duplicate capacities", before - capacities.len()));
        }

        let names = match &self.regimes {
            Some(r) => r.clone(),
            None => Regime::ALL.iter().map(|r| r.name().to_owned()).collect(),
        };
        if names.is_empty() {
            return bad("regimes list is empty".into());
        }
        let mut regimes = names.iter().map(|r| r.parse::<Regime>()).collect::<Result<Vec<_>>>()?;
        regimes.sort_by_key(|r| r.name());
        regimes.dedup();

        let bins = self.bins.unwrap_or(DEFAULT_BINS);
        if bins < 2 {
            return bad(format!("bins = {bins} must be at least 2"));
        }
        let histogram_bins = self.histogram_bins.unwrap_or(100);
        if histogram_bins == 0 {
            return bad("histogram_bins must be positive".into());
        }
        let histogram_max = self.histogram_max.unwrap_or(1.0);
        if !(histogram_max > 0.0 && histogram_max <= 1.0) {
            return bad(format!("histogram_max {histogram_max} must lie in (0, 1]"));
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        Ok(Scenario {
            source,
            capacities,
            regimes,
            bins,
            seed: self.seed.unwrap_or(0),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            samples: self.samples,
            histogram_bins,
            histogram_max,
            warnings,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSource {
    Preset(Figure),
    Csv(PathBuf),
    Gaussians(Vec<GaussianGroup>),
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub source: PopulationSource,
    /// Ascending, without duplicates.
    pub capacities: Vec<f64>,
    /// Sorted by name.
    pub regimes: Vec<Regime>,
    pub bins: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub samples: Option<usize>,
    pub histogram_bins: usize,
    pub histogram_max: f64,
    pub warnings: Vec<String>,
}

/// The four CSV reports of a scenario, rendered in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reports {
    pub allocations: String,
    pub fairness: String,
    pub pof: String,
    pub histogram: String,
    pub warnings: Vec<String>,
    /// Rows whose solver raised at least one flag.
    pub flagged_rows: usize,
}

impl Reports {
    pub const FILES: [&'static str; 4] = ["allocations.csv", "fairness.csv", "pof.csv", "histogram.csv"];

    /// Writes the reports into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in Self::FILES.iter().zip([&self.allocations, &self.fairness, &self.pof, &self.histogram]) {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

impl Scenario {
    pub fn population(&self) -> Result<GroupedPopulation<f64>> {
        match &self.source {
            PopulationSource::Preset(f) => make_figure_population(*f, self.bins),
            PopulationSource::Csv(path) => {
                let file = fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
                read_population_csv(file)
            }
            PopulationSource::Gaussians(groups) => {
                let groups = groups
                    .iter()
                    .map(|g| {
                        let dist = discretize(&ClippedGaussianSpec::new(g.mean, g.variance, self.bins)?)?;
                        Ok((g.name.clone(), g.weight, dist))
                    })
                    .collect::<Result<Vec<_>>>()?;
                GroupedPopulation::from_masses(groups)
            }
        }
    }

    /// Solves every (capacity, regime) pair and renders the reports.
    pub fn evaluate(&self) -> Result<Reports> {
        self.evaluate_with(&self.population()?)
    }

    /// As [`Scenario::evaluate`], on an already loaded population.
    pub fn evaluate_with(&self, pop: &GroupedPopulation<f64>) -> Result<Reports> {
        let samples = match self.samples {
            Some(n) => Some(pop.simulate_labels(n, self.seed)?),
            None => None,
        };
        let names: Vec<&str> = pop.names().collect();
        let mut alloc = csv_writer();
        let mut fair = csv_writer();
        let mut pof = csv_writer();
        let mut flagged_rows = 0;
        alloc.write_record(allocation_header(&names))?;
        fair.write_record(fairness_header(&names, samples.is_some()))?;
        pof.write_record(["capacity", "regime", "tp_opt", "tp_regime", "multiplicative", "additive"])?;

        for &c in &self.capacities {
            let opt = solve(Regime::UtilityMax, pop, c)?;
            for &regime in &self.regimes {
                let res = if regime == Regime::UtilityMax { opt.clone() } else { solve(regime, pop, c)? };
                let report = FairnessReport::evaluate(&res.policy, pop)?;
                revalidate(&res, &report, pop)?;
                if !res.flags.is_empty() {
                    flagged_rows += 1;
                }
                alloc.write_record(allocation_row(&res, pop))?;
                fair.write_record(fairness_row(&res, &report, samples.as_deref())?)?;
                if regime != Regime::UtilityMax {
                    let p = PriceOfFairness::from_tp(opt.tp, res.tp);
                    pof.write_record([
                        num(c),
                        regime.name().to_owned(),
                        num(opt.tp),
                        num(res.tp),
                        num(p.multiplicative),
                        num(p.additive),
                    ])?;
                }
            }
        }
        Ok(Reports {
            allocations: finish_csv(alloc)?,
            fairness: finish_csv(fair)?,
            pof: finish_csv(pof)?,
            histogram: histogram_csv(pop, self.histogram_bins, self.histogram_max)?,
            warnings: self.warnings.clone(),
            flagged_rows,
        })
    }
}

/// Rejects a row whose Prop/KL identity or capacity constraint is off by more than 1e-9.
fn revalidate(res: &SolveResult<f64>, report: &FairnessReport<f64>, pop: &GroupedPopulation<f64>) -> Result<()> {
    if let Some(r) = report.identity_residual() {
        if r > 1e-9 {
            return Err(Error::Validation(format!("{} at c = {}: |prop + kl - ln TP| = {r:e}", res.regime, res.capacity)));
        }
    }
    let used: f64 = pop.weights().iter().zip(&res.capacities).map(|(w, c)| w * c).sum();
    if (used - res.capacity).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "{} at c = {}: allocated capacity {used}",
            res.regime, res.capacity
        )));
    }
    Ok(())
}

/// Shortest round-trip decimal, in exponent form for very small or large magnitudes.
/// The price-of-fairness sentinel prints as `inf`.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn allocation_header(groups: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = ["capacity", "regime", "tp", "level", "iterations", "residual", "warning"]
        .map(String::from)
        .to_vec();
    for g in groups {
        for col in ["threshold", "gamma", "capacity", "tp", "share"] {
            h.push(format!("{g}_{col}"));
        }
    }
    h
}

fn allocation_row(res: &SolveResult<f64>, pop: &GroupedPopulation<f64>) -> Vec<String> {
    let warning = res.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("|");
    let mut row = vec![
        num(res.capacity),
        res.regime.name().to_owned(),
        num(res.tp),
        opt_num(res.level),
        res.iterations.to_string(),
        num(res.residual),
        warning,
    ];
    let shares = res.shares(pop);
    for (i, e) in res.policy.entries().iter().enumerate() {
        row.extend([num(e.threshold), num(e.gamma), num(res.capacities[i]), num(res.group_tp[i]), num(shares[i])]);
    }
    row
}

fn fairness_header(groups: &[&str], empirical: bool) -> Vec<String> {
    let mut h: Vec<String> = [
        "capacity",
        "regime",
        "tp",
        "dp_gap",
        "eo_gap",
        "prop_value",
        "prop_zero_group_tp",
        "kl",
        "log_tp",
        "min_group_tp",
        "dominance",
    ]
    .map(String::from)
    .to_vec();
    for g in groups {
        h.push(format!("{g}_capacity"));
        h.push(format!("{g}_tp_given_group"));
        if empirical {
            h.push(format!("{g}_tp_empirical"));
            h.push(format!("{g}_calibration_error"));
        }
    }
    h
}

fn fairness_row(
    res: &SolveResult<f64>,
    r: &FairnessReport<f64>,
    samples: Option<&[LabeledSample<f64>]>,
) -> Result<Vec<String>> {
    let dominance = r
        .dominance
        .iter()
        .map(|&(i, j)| format!("{}>{}", r.groups[i], r.groups[j]))
        .collect::<Vec<_>>()
        .join("|");
    let mut row = vec![
        num(res.capacity),
        res.regime.name().to_owned(),
        num(r.tp),
        num(r.dp_gap),
        opt_num(r.eo_gap),
        num(r.prop.value),
        r.prop.zero_group_tp.to_string(),
        opt_num(r.kl),
        opt_num(r.log_tp),
        num(r.min_group_tp),
        dominance,
    ];
    let empirical = match samples {
        Some(s) => {
            let tp = empirical_tp(&res.policy, s)?;
            let r = r.clone().with_calibration(s)?;
            Some((tp, r.calibration.unwrap_or_default()))
        }
        None => None,
    };
    for i in 0..r.groups.len() {
        row.push(num(r.group_capacity[i]));
        row.push(num(r.group_tp[i]));
        if let Some((tp, cal)) = &empirical {
            row.push(num(tp[i]));
            row.push(num(cal[i]));
        }
    }
    Ok(row)
}

fn empirical_tp(policy: &GroupThresholdPolicy<f64>, samples: &[LabeledSample<f64>]) -> Result<Vec<f64>> {
    Ok(tp_count_empirical(policy, samples)?.per_group)
}

/// Binned score mass per group: `bins` equal bins on `[0, max)` and a final `[max, 1]` bin
/// when `max < 1`.
pub fn histogram_csv(pop: &GroupedPopulation<f64>, bins: usize, max: f64) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["group", "lower", "upper", "mass"])?;
    for g in pop.groups() {
        for (lo, hi, mass) in histogram(&g.dist, bins, max) {
            w.write_record([g.name.clone(), num(lo), num(hi), num(mass)])?;
        }
    }
    finish_csv(w)
}

fn histogram(d: &ScoreDistribution<f64>, bins: usize, max: f64) -> Vec<(f64, f64, f64)> {
    let width = max / bins as f64;
    let edge = |k: usize| if k == bins { max } else { k as f64 * width };
    let mut mass = vec![0.0; bins + 1];
    for (v, w) in d.iter() {
        let k = if v >= max { bins } else { ((v / width) as usize).min(bins - 1) };
        mass[k] += w;
    }
    let mut out: Vec<(f64, f64, f64)> = (0..bins).map(|k| (edge(k), edge(k + 1), mass[k])).collect();
    if max < 1.0 {
        out.push((max, 1.0, mass[bins]));
    }
    out
}

/// One solver-versus-oracle comparison of the verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCase {
    pub instance: String,
    pub regime: Regime,
    pub solver: f64,
    pub oracle: f64,
    /// Solver-minus-oracle gap on the refined grid.
    pub refined: f64,
    /// One-cell Lipschitz bound on the coarse grid.
    pub bound: f64,
    /// The same bound on the refined grid, half a coarse cell.
    pub fine_bound: f64,
    pub passed: bool,
}

fn verify_instances() -> Result<Vec<(String, GroupedPopulation<f64>, f64)>> {
    let g2 = GroupedPopulation::new([
        ("S1".to_owned(), 0.5, ScoreDistribution::new([(0.2, 0.8), (0.8, 0.2)])?),
        ("S2".to_owned(), 0.5, ScoreDistribution::new([(0.1, 0.8), (0.4, 0.2)])?),
    ])?;
    let three = GroupedPopulation::new([
        ("A".to_owned(), 0.5, ScoreDistribution::new([(0.05, 0.6), (0.3, 0.3), (0.9, 0.1)])?),
        ("B".to_owned(), 0.3, ScoreDistribution::new([(0.1, 0.5), (0.2, 0.4), (0.6, 0.1)])?),
        ("C".to_owned(), 0.2, ScoreDistribution::new([(0.0, 0.3), (0.15, 0.5), (0.45, 0.2)])?),
    ])?;
    Ok(vec![
        ("g2".to_owned(), g2, 0.2),
        ("three_groups".to_owned(), three, 0.15),
        ("fig2_200bins".to_owned(), make_figure_population(Figure::Fig2, 200)?, 0.01),
        ("fig3_200bins".to_owned(), make_figure_population(Figure::Fig3, 200)?, 0.15),
    ])
}

/// Compares every solver with the grid oracle on the bundled instances.
///
/// A case passes when the solver is at least as good as the oracle, the gap is within
/// the one-cell bound, and on a grid with half the cell the gap neither widens nor
/// exceeds the halved bound.
pub fn verify(steps: usize) -> Result<Vec<VerifyCase>> {
    let mut out = Vec::new();
    for (name, pop, c) in verify_instances()? {
        let coarse = GridSpec::new(steps, c)?;
        let fine = GridSpec::new(2 * (steps - 1) + 1, c)?;
        for regime in Regime::ALL {
            let objective = Objective::for_regime(regime);
            let scales = objective.normalizers(&pop, c)?;
            let res = solve(regime, &pop, c)?;
            let solver = objective.value(&pop.weights(), &res.group_tp, &scales);
            let oc = oracle_solve(&pop, &coarse, objective)?;
            let of = oracle_solve(&pop, &fine, objective)?;
            let bound = lipschitz_bound(&pop, &coarse, objective, &res.group_tp);
            let fine_bound = lipschitz_bound(&pop, &fine, objective, &res.group_tp);
            let slack = 1e-9 * solver.abs().max(1e-3);
            let (gap, refined) = (solver - oc.value, solver - of.value);
            let passed = gap >= -slack
                && gap <= bound + slack
                && refined >= -slack
                && refined <= gap + slack
                && refined <= fine_bound + slack;
            out.push(VerifyCase {
                instance: name.clone(),
                regime,
                solver,
                oracle: oc.value,
                refined,
                bound,
                fine_bound,
                passed,
            });
        }
    }
    Ok(out)
}

/// Human-readable verification summary, one line per case.
pub fn verify_summary(cases: &[VerifyCase]) -> String {
    let mut s = String::new();
    for c in cases {
        let _ = writeln!(
            s,
            "{} {:<14} {:<18} solver={:.12e} oracle={:.12e} gap={:.3e} bound={:.3e} refined={:.3e} fine_bound={:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.instance,
            c.regime.name(),
            c.solver,
            c.oracle,
            c.solver - c.oracle,
            c.bound,
            c.refined,
            c.fine_bound
        );
    }
    s
}
