use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fairalloc::scenario::{verify, verify_summary, Reports, Scenario, ScenarioConfig};
use fairalloc::Error;

#[derive(Parser)]
#[command(name = "fairalloc", version, about = "Fair capacity allocation over grouped risk scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at a single capacity and write the CSV reports.
    Run(ScenarioArgs),
    /// Solve over a list of capacities.
    Sweep(ScenarioArgs),
    /// Compare every solver with the brute-force grid oracle on bundled instances.
    Verify {
        /// Grid points per coordinate on the coarse grid.
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
}

/// Flags mirror the config keys and take precedence over them.
#[derive(Args)]
struct ScenarioArgs {
    /// JSON scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Capacity, or a comma list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    capacity: Vec<f64>,
    /// Regimes, comma separated.
    #[arg(long, value_delimiter = ',')]
    regime: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    /// fig1, fig2 or fig3; replaces any population source in the config.
    #[arg(long, conflicts_with = "population_csv")]
    preset: Option<String>,
    /// Population CSV; replaces any population source in the config.
    #[arg(long)]
    population_csv: Option<PathBuf>,
    /// Simulated labeled samples for the empirical columns.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    histogram_bins: Option<usize>,
    #[arg(long)]
    histogram_max: Option<f64>,
}

impl ScenarioArgs {
    fn config(&self) -> fairalloc::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if self.preset.is_some() || self.population_csv.is_some() {
            cfg.preset = self.preset.clone();
            cfg.population_csv = self.population_csv.clone();
            cfg.gaussians = None;
        }
        match self.capacity.as_slice() {
            [] => {}
            [c] => {
                cfg.capacity = Some(*c);
                cfg.capacities = None;
            }
            cs => {
                cfg.capacity = None;
                cfg.capacities = Some(cs.to_vec());
            }
        }
        if !self.regime.is_empty() {
            cfg.regimes = Some(self.regime.clone());
        }
        cfg.seed = self.seed.or(cfg.seed);
        cfg.out = self.out.clone().or(cfg.out);
        cfg.bins = self.bins.or(cfg.bins);
        cfg.samples = self.samples.or(cfg.samples);
        cfg.histogram_bins = self.histogram_bins.or(cfg.histogram_bins);
        cfg.histogram_max = self.histogram_max.or(cfg.histogram_max);
        Ok(cfg)
    }
}

/// Bad input of any kind: exit status 2.
struct Invalid(Error);

fn prepare(args: &ScenarioArgs, single: bool) -> Result<(Scenario, fairalloc::PopulationF64), Invalid> {
    let scenario = args.config().and_then(|c| c.validate()).map_err(Invalid)?;
    if single && scenario.capacities.len() != 1 {
        return Err(Invalid(Error::Config(format!(
            "run takes one capacity, got {}; use sweep",
            scenario.capacities.len()
        ))));
    }
    let pop = scenario.population().map_err(Invalid)?;
    Ok((scenario, pop))
}

fn execute(scenario: &Scenario, pop: &fairalloc::PopulationF64) -> anyhow::Result<Reports> {
    let reports = scenario.evaluate_with(pop).context("solving scenario")?;
    reports
        .write(&scenario.out)
        .with_context(|| format!("writing reports to {}", scenario.out.display()))?;
    Ok(reports)
}

fn scenario_command(args: &ScenarioArgs, single: bool) -> ExitCode {
    let (scenario, pop) = match prepare(args, single) {
        Ok(p) => p,
        Err(Invalid(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for w in &scenario.warnings {
        eprintln!("warning: {w}");
    }
    match execute(&scenario, &pop) {
        Ok(reports) => {
            if reports.flagged_rows > 0 {
                eprintln!("warning: {} rows carry solver flags, see the warning column of allocations.csv", reports.flagged_rows);
            }
            println!("wrote {} files to {}", Reports::FILES.len(), scenario.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => scenario_command(args, true),
        Command::Sweep(args) => scenario_command(args, false),
        Command::Verify { steps } => match verify(*steps) {
            Ok(cases) => {
                print!("{}", verify_summary(&cases));
                let failed = cases.iter().filter(|c| !c.passed).count();
                println!("{} cases, {failed} failed", cases.len());
                if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
