use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod context;

use context::Context;

/// Age–happiness curve estimation, u-shape detection and bias simulations.
#[derive(Debug, Parser)]
#[command(name = "agecurve", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Survey microdata CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated country codes, in output order.
    #[arg(long, global = true, value_delimiter = ',')]
    pub countries: Vec<String>,
    /// Comma-separated output formats: csv, text, svg.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Vec<String>,
    /// Master seed for simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableSpec {
    /// Four quadratic models per country.
    Table1,
    /// No-controls all-ages quadratic per country, with reductions.
    Table2,
    /// Coarse age ranges with period and cohort factors.
    Table3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    Mediator,
    Truncation,
    Attrition,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit model specifications per country and write coefficient tables.
    Fit {
        #[arg(long, value_enum, default_value = "table2")]
        spec: Vec<TableSpec>,
    },
    /// Period/cohort-adjusted happiness by age bin.
    Curves {
        #[arg(long, value_enum, default_value = "fine")]
        scheme: SchemeArg,
        /// Fit the chart's y-axis to the data.
        #[arg(long)]
        autoscale: bool,
    },
    /// Classify countries as u-shaped under a rule.
    Detect {
        /// quad_t15, range_t1 or curve_heuristic.
        #[arg(long)]
        rule: String,
        /// Bundled table (table2, table3, table4) or a fit/curve CSV written by this tool.
        #[arg(long)]
        fixture: Option<String>,
        /// Override the rule's |t| threshold or rise epsilon.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Monte Carlo bias experiments.
    Simulate {
        #[arg(long, value_enum, default_value = "all")]
        experiment: ExperimentArg,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fixture checks, plus data fits and curves when --input is given.
    Report {
        /// Also run the three simulation experiments.
        #[arg(long)]
        simulations: bool,
    },
}

/// Result of a command that did not fail outright.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn fail(&mut self, what: impl Into<String>) {
        self.failures.push(what.into());
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let ctx = Context::resolve(&cli.global)?;
    match cli.command {
        Command::Fit { spec } => commands::fit(&ctx, &spec),
        Command::Curves { scheme, autoscale } => commands::curves(&ctx, scheme, autoscale),
        Command::Detect {
            rule,
            fixture,
            threshold,
        } => commands::detect(&ctx, &rule, fixture.as_deref(), threshold),
        Command::Simulate { experiment, reps, n } => commands::simulate(&ctx, experiment, reps, n),
        Command::Report { simulations } => commands::report(&ctx, simulations),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) if outcome.failures.is_empty() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} failure(s):", outcome.failures.len());
            for f in &outcome.failures {
                eprintln!("  {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
