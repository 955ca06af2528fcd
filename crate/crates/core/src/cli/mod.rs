//! `voi` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 when the configuration
//! cannot be read or parsed, 3 when the model violates an invariant.

mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, ExperimentSettings, GridSettings, NamedPolicy, SeedSettings};

use crate::error::Error;
use crate::estimator::KalmanSchedule;
use crate::lqr::riccati_backward;
use crate::model::{validate_model, Problem};
use crate::policy::{ControllerConfig, SchedulerConfig};
use crate::simulate::{monte_carlo, rollout, seed_sequence, PolicySpec, SimulationContext};
use crate::voi::{build_voi_table, default_grid, VoiTable, DEFAULT_MAX_DIM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "voi", version, about = "Value-of-information scheduling for networked LQG control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Model and experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Number of seeds (overrides the configuration).
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model invariants and report every violation.
    Validate,
    /// Write the Riccati gains, cost-to-go and estimation penalties.
    Riccati,
    /// Tabulate the exact value of information on the mismatch grid.
    VoiTable,
    /// Run closed-loop rollouts and write their traces.
    Simulate,
    /// Compare policies under common random numbers.
    Compare,
    /// Trace the rate/regulation tradeoff across tradeoff multipliers.
    Sweep {
        /// Comma-separated tradeoff values (overrides the configuration).
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Invariant(Vec<String>),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(list) => Failure::Invariant(list),
            Error::Dimension { .. } | Error::StageCount { .. } => Failure::Invariant(vec![e.to_string()]),
            Error::Json(_) | Error::Config(_) | Error::Policy(_) | Error::Randomized => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Invariant(list)) => {
            eprintln!("error: model violates {} invariant(s):", list.len());
            for item in list {
                eprintln!("  - {item}");
            }
            EXIT_INVARIANT
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

struct Session<'a> {
    cli: &'a Cli,
    config: ExperimentConfig,
}

impl Session<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if self.cli.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn problem(&self) -> Result<Problem, Failure> {
        let (model, costs) = self.config.document().build()?;
        let report = validate_model(&model, &costs)?;
        if !report.is_valid() {
            return Err(Failure::Invariant(report.messages()));
        }
        if report.symmetrized > 0 {
            self.note(format!("symmetrized {} matrices with rounding-level asymmetry", report.symmetrized));
        }
        Ok(Problem::new(report.model, report.costs)?)
    }

    fn prepare_output(&self) -> Result<&Path, Failure> {
        let out = self.cli.out.as_path();
        std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
        output::write_json(&out.join("config.json"), &self.config)?;
        let seeds = self.config.experiment.seeds;
        output::write_json(
            &out.join("seeds.json"),
            &output::SeedLedger {
                base: seeds.base,
                count: seeds.count,
                seeds: seed_sequence(seeds.base, seeds.count),
            },
        )?;
        Ok(out)
    }

    fn table(&self, problem: &Problem, ric: &crate::lqr::RiccatiSolution) -> Result<VoiTable, Failure> {
        let schedule = KalmanSchedule::new(problem)?;
        let settings = &self.config.experiment;
        let grid = default_grid(&schedule, settings.grid.points, settings.grid.bound_multiple)?;
        self.note(format!(
            "building value-of-information table: {} nodes, {} stages",
            grid.len(),
            problem.horizon() + 1
        ));
        Ok(build_voi_table(
            problem,
            ric,
            &schedule,
            grid,
            settings.quadrature,
            DEFAULT_MAX_DIM,
        )?)
    }

    fn policy(
        &self,
        name: &str,
        scheduler: &SchedulerConfig,
        controller: &ControllerConfig,
        ctx: &SimulationContext,
        table: &mut Option<Arc<VoiTable>>,
    ) -> Result<PolicySpec, Failure> {
        if scheduler.needs_table() && table.is_none() {
            *table = Some(Arc::new(self.table(&ctx.problem, &ctx.riccati)?));
        }
        Ok(PolicySpec::new(
            name,
            scheduler.build(&ctx.problem, &ctx.riccati, table.as_ref())?,
            controller.build(&ctx.problem, &ctx.riccati)?,
        ))
    }

    fn context(&self, problem: Problem) -> Result<SimulationContext, Failure> {
        Ok(SimulationContext::new(problem)?.with_encoding(self.config.experiment.payload))
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path).map_err(Failure::Config)?;
    if let Some(n) = cli.seeds {
        config.experiment.seeds.count = n;
    }
    if let Command::Sweep { lambdas } = &cli.command {
        if !lambdas.is_empty() {
            config.experiment.lambdas = lambdas.clone();
        }
    }
    let session = Session { cli, config };
    match cli.command {
        Command::Validate => validate(&session),
        Command::Riccati => riccati(&session),
        Command::VoiTable => voi_table(&session),
        Command::Simulate => simulate(&session),
        Command::Compare => compare(&session),
        Command::Sweep { .. } => sweep(&session),
    }
}

fn validate(s: &Session) -> Result<(), Failure> {
    let problem = s.problem()?;
    println!(
        "valid: horizon {}, n = {}, m = {}, p = {}",
        problem.horizon(),
        problem.state_dim(),
        problem.input_dim(),
        problem.output_dim()
    );
    Ok(())
}

fn riccati(s: &Session) -> Result<(), Failure> {
    let problem = s.problem()?;
    let ric = riccati_backward(&problem)?;
    let out = s.prepare_output()?;
    output::write_json(&out.join("riccati.json"), &output::RiccatiDocument::new(&ric))?;
    output::write_riccati_csv(&out.join("riccati.csv"), &ric)?;
    s.note(format!("wrote riccati.json and riccati.csv to {}", out.display()));
    Ok(())
}

fn voi_table(s: &Session) -> Result<(), Failure> {
    let problem = s.problem()?;
    let ric = riccati_backward(&problem)?;
    let table = s.table(&problem, &ric)?;
    let out = s.prepare_output()?;
    output::write_json(&out.join("voi_table.json"), &table)?;
    output::write_table_csv(&out.join("voi_table.csv"), &table, &problem, &ric)?;
    s.note(format!("wrote voi_table.json and voi_table.csv to {}", out.display()));
    Ok(())
}

fn simulate(s: &Session) -> Result<(), Failure> {
    let ctx = s.context(s.problem()?)?;
    let settings = &s.config.experiment;
    let mut table = None;
    let policy = s.policy("policy", &settings.scheduler, &settings.controller, &ctx, &mut table)?;
    let count = s.cli.seeds.unwrap_or(1).max(1);
    let out = s.prepare_output()?;
    let mut summaries = Vec::with_capacity(count);
    for seed in seed_sequence(settings.seeds.base, count) {
        let trace = rollout(&ctx, &policy.scheduler, &policy.controller, seed);
        let name = if count == 1 {
            "trace.csv".to_string()
        } else {
            format!("trace-{seed}.csv")
        };
        output::write_trace_csv(&out.join(&name), &trace, &ctx)?;
        s.note(format!(
            "seed {seed}: {} transmissions, loss {}",
            trace.metrics.transmissions, trace.metrics.loss
        ));
        summaries.push(output::TraceSummary {
            seed,
            file: name,
            metrics: trace.metrics,
        });
    }
    output::write_json(&out.join("summary.json"), &summaries)?;
    Ok(())
}

fn compare(s: &Session) -> Result<(), Failure> {
    let ctx = s.context(s.problem()?)?;
    let settings = &s.config.experiment;
    let mut table = None;
    let policies = settings
        .compare
        .iter()
        .map(|p| s.policy(&p.name, &p.scheduler, &p.controller, &ctx, &mut table))
        .collect::<Result<Vec<_>, _>>()?;
    let out = s.prepare_output()?;
    s.note(format!("evaluating {} policies on {} seeds", policies.len(), settings.seeds.count));
    let summary = monte_carlo(&ctx, &policies, settings.seeds.count, settings.seeds.base)?;
    output::write_json(&out.join("summary.json"), &summary)?;
    for p in &summary.policies {
        println!(
            "{:<20} loss {:.6} ± {:.6}  rate {:.4}  transmissions {:.2}",
            p.name, p.loss.mean, p.loss.se, p.rate.mean, p.transmissions.mean
        );
    }
    Ok(())
}

fn sweep(s: &Session) -> Result<(), Failure> {
    let base = s.problem()?;
    let settings = &s.config.experiment;
    let out = s.prepare_output()?;
    let mut rows = Vec::new();
    for lambda in s.config.sweep_lambdas() {
        let ctx = s.context(base.with_tradeoff(lambda)?)?;
        let mut table = None;
        let policy = s.policy("policy", &settings.scheduler, &settings.controller, &ctx, &mut table)?;
        let summary = monte_carlo(&ctx, &[policy], settings.seeds.count, settings.seeds.base)?;
        let p = &summary.policies[0];
        s.note(format!("lambda {lambda}: rate {}, regulation {}", p.rate.mean, p.regulation.mean));
        rows.push(output::SweepRow {
            lambda,
            rate: p.rate,
            regulation: p.regulation,
            loss: p.loss,
            transmissions: p.transmissions.mean,
        });
    }
    output::write_sweep_csv(&out.join("tradeoff.csv"), &rows)?;
    Ok(())
}
