//! `kge`: run Klein-Gordon solves, convergence studies and energy traces from a config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use kge_core::grid::inverse_dft;
use kge_core::harness::output::{records_to_csv, traces_to_csv, unix_now, write_text, Summary};
use kge_core::harness::reference::{obtain_reference, CacheStatus, ReferenceRequest};
use kge_core::harness::studies::{
    run_cell, run_energy_trace, run_spatial_study, run_stability_study, run_temporal_study,
};
use kge_core::harness::RunConfig;
use kge_core::KgeError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INSTABILITY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kge",
    version,
    about = "Exponential wave integrators for the nonlinear Klein-Gordon equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the final state.
    Solve(Common),
    /// Temporal convergence study over the tau (and coupled eps) ladder.
    Temporal(Common),
    /// Spatial convergence study over the h ladder at fixed tau.
    Spatial(Common),
    /// Fixed large tau over the h ladder.
    Stability(Common),
    /// Energy traces for every method and tau.
    Energy(Common),
    /// Compute or load the cached reference solutions.
    Reference(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// CSV output path; overrides `output.csv`. Defaults to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary path; overrides `output.json`.
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Instability(String),
    Other(String),
}

impl From<KgeError> for Failure {
    fn from(e: KgeError) -> Self {
        match e {
            KgeError::Config(_)
            | KgeError::NonIntegerStepCount { .. }
            | KgeError::InvalidGrid(_)
            | KgeError::InvalidParameter(_) => Failure::Config(e.to_string()),
            KgeError::Instability { .. } => Failure::Instability(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

struct Outputs {
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
}

impl Outputs {
    fn resolve(common: &Common, config: &RunConfig) -> Self {
        Self {
            csv: common.csv.clone().or_else(|| config.output.csv.clone()),
            json: common.json.clone().or_else(|| config.output.json.clone()),
        }
    }

    fn emit<T: Serialize>(
        &self,
        command: &str,
        config: &RunConfig,
        csv: &str,
        records: &T,
        started: f64,
    ) -> Result<(), Failure> {
        match &self.csv {
            Some(path) => write(path, csv)?,
            None => print!("{csv}"),
        }
        if let Some(path) = &self.json {
            let json = Summary::new(command, config, records, started).to_json()?;
            write(path, &json)?;
        }
        Ok(())
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    write_text(path, text).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct SolveSummary {
    method: String,
    order: u32,
    epsilon: f64,
    tau: f64,
    h: f64,
    t_final: f64,
    steps: usize,
    energy_initial: f64,
    energy_final: f64,
    max_energy_rel_error: f64,
    wall_time_s: Option<f64>,
}

fn solve(common: &Common, config: &RunConfig, started: f64) -> Result<(), Failure> {
    let method = config.method.methods[0];
    let problem = config.problem.build(config.problem.epsilon)?;
    let grid = config.grid()?;
    let d = &config.discretization;
    let run = run_cell(
        &problem,
        &grid,
        method,
        d.tau,
        d.t_final,
        config.method.dealias,
        config.output.energy_stride,
    )?;
    let u = inverse_dft(&grid, &run.state.u)?;
    let udot = inverse_dft(&grid, &run.state.udot)?;
    let mut csv = String::from("x,u,udot\n");
    for j in 0..grid.m() {
        csv.push_str(&format!(
            "{:e},{:e},{:e}\n",
            grid.node(j),
            u.values()[j],
            udot.values()[j]
        ));
    }
    let (first, last) = (run.energy_trace.first(), run.energy_trace.last());
    let summary = SolveSummary {
        method: method.family().to_string(),
        order: method.order(),
        epsilon: problem.epsilon(),
        tau: d.tau,
        h: grid.h(),
        t_final: d.t_final,
        steps: last.map_or(0, |r| r.step),
        energy_initial: first.map_or(f64::NAN, |r| r.energy),
        energy_final: last.map_or(f64::NAN, |r| r.energy),
        max_energy_rel_error: run.max_energy_rel_error,
        wall_time_s: config.output.record_wall_time.then_some(run.wall_time_s),
    };
    eprintln!(
        "{method}: t = {}, max relative energy error {:e}",
        d.t_final, summary.max_energy_rel_error
    );
    Outputs::resolve(common, config).emit("solve", config, &csv, &summary, started)
}

#[derive(Serialize)]
struct ReferenceRow {
    epsilon: f64,
    m: usize,
    tau_ref: f64,
    t_final: f64,
    status: String,
    path: String,
}

fn reference(common: &Common, config: &RunConfig, started: f64) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for eps in config.epsilon_ladder() {
        let req = ReferenceRequest::from_config(config, eps, None)?;
        let out = obtain_reference(&req, Some(&config.reference.cache_dir), config.reference.regenerate)?;
        let status = match &out.status {
            CacheStatus::Hit => "cache hit".to_string(),
            CacheStatus::Generated => "generated".to_string(),
            CacheStatus::Regenerated(why) => format!("regenerated ({why})"),
            CacheStatus::Uncached => "uncached".to_string(),
        };
        let path = out.path.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
        eprintln!("eps = {eps:e}: {status}: {path}");
        rows.push(ReferenceRow {
            epsilon: eps,
            m: req.grid.m(),
            tau_ref: req.tau_ref,
            t_final: req.t_final,
            status,
            path,
        });
    }
    let mut csv = String::from("epsilon,m,tau_ref,t_final,status,path\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{},{:e},{:e},{},{}\n",
            r.epsilon, r.m, r.tau_ref, r.t_final, r.status, r.path
        ));
    }
    Outputs::resolve(common, config).emit("reference", config, &csv, &rows, started)
}

fn run(command: &Command) -> Result<(), Failure> {
    let (name, common) = match command {
        Command::Solve(c) => ("solve", c),
        Command::Temporal(c) => ("temporal", c),
        Command::Spatial(c) => ("spatial", c),
        Command::Stability(c) => ("stability", c),
        Command::Energy(c) => ("energy", c),
        Command::Reference(c) => ("reference", c),
    };
    let config = RunConfig::from_file(&common.config)?;
    let started = unix_now();
    info!("{name}: {}", common.config.display());
    let records = match command {
        Command::Solve(_) => return solve(common, &config, started),
        Command::Reference(_) => return reference(common, &config, started),
        Command::Energy(_) => {
            let traces = run_energy_trace(&config)?;
            Outputs::resolve(common, &config).emit(name, &config, &traces_to_csv(&traces), &traces, started)?;
            return match traces.iter().find_map(|t| t.aborted_at.map(|s| (t, s))) {
                Some((t, step)) => Err(Failure::Instability(format!(
                    "{}{} at tau = {:e} went non-finite at step {step}",
                    t.method, t.order, t.tau
                ))),
                None => Ok(()),
            };
        }
        Command::Temporal(_) => run_temporal_study(&config)?,
        Command::Spatial(_) => run_spatial_study(&config)?,
        Command::Stability(_) => run_stability_study(&config)?,
    };
    Outputs::resolve(common, &config).emit(name, &config, &records_to_csv(&records), &records, started)?;
    let unstable = records.iter().filter(|r| r.h1_error.is_infinite()).count();
    if unstable > 0 {
        return Err(Failure::Instability(format!("{unstable} cell(s) went non-finite")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Instability(msg)) => {
            eprintln!("instability: {msg}");
            ExitCode::from(EXIT_INSTABILITY)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
