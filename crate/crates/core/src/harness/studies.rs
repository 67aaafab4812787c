//! Convergence, stability and energy studies over ladders of `(eps, tau, h)`.

use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KgeError, Result};
use crate::ewi::{step_count, EwiIntegrator};
use crate::grid::GridSpec;
use crate::harness::config::{Method, RunConfig};
use crate::harness::reference::{h1_error_vs_reference, obtain_reference, ReferenceRequest, ReferenceSolution};
use crate::problem::{energy, initial_state, KgeProblem, SolverState};
use crate::rk4::Rk4Integrator;

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "KGE_WORKERS";

/// One cell of a study table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub epsilon: f64,
    pub tau: f64,
    pub h: f64,
    pub method: String,
    pub order: u32,
    /// `+inf` when the run aborted on a non-finite state.
    pub h1_error: f64,
    pub rate: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub max_energy_rel_error: f64,
}

/// Result of integrating one cell to the final time.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub state: SolverState,
    pub max_energy_rel_error: f64,
    pub energy_trace: Vec<EnergyRow>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub rel_error: f64,
}

/// Energy history of one `(method, eps, tau)` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub method: String,
    pub order: u32,
    pub epsilon: f64,
    pub tau: f64,
    pub h: f64,
    pub rows: Vec<EnergyRow>,
    /// Step at which a non-finite state stopped the run.
    pub aborted_at: Option<usize>,
}

impl EnergyTrace {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn final_rel_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.rel_error)
    }
}

/// Thread pool sized by `KGE_WORKERS`, defaulting to rayon's choice.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| KgeError::Config(format!("{WORKERS_ENV} = `{v}` is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| KgeError::Config(format!("cannot start worker pool: {e}")))
}

/// Integrates `problem` on `grid` to `t_final`, sampling the energy every `stride` steps.
///
/// The energy error is `|E^n - E^0| / |E^0|`; the last level is always sampled.
pub fn run_cell(
    problem: &KgeProblem,
    grid: &GridSpec,
    method: Method,
    tau: f64,
    t_final: f64,
    dealias: bool,
    stride: usize,
) -> Result<CellRun> {
    let steps = step_count(t_final, tau)?;
    let stride = stride.max(1);
    let start = Instant::now();
    let s0 = initial_state(problem, grid);
    let e0 = energy(problem, grid, &s0)?;
    let mut trace = Vec::with_capacity(steps / stride + 2);
    let mut n = 0usize;
    let mut observe = |s: &SolverState| {
        if n.is_multiple_of(stride) || n == steps {
            // every state reaching the observer is finite, so the energy is too
            let e = energy(problem, grid, s).unwrap_or(f64::NAN);
            trace.push(EnergyRow {
                step: n,
                t: s.t,
                energy: e,
                rel_error: (e - e0).abs() / e0.abs(),
            });
        }
        n += 1;
    };
    let state = match method {
        Method::Ewi(order) => {
            EwiIntegrator::new(problem, grid, tau, order)?
                .with_dealiasing(dealias)
                .run(s0, steps, &mut observe)?
                .curr
        }
        Method::Rk4 => Rk4Integrator::new(problem, grid, tau)?.run(s0, steps, &mut observe)?,
    };
    let max_energy_rel_error = trace.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(CellRun {
        state,
        max_energy_rel_error,
        energy_trace: trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

struct Cell {
    method: Method,
    epsilon: f64,
    tau: f64,
    grid: GridSpec,
    reference: usize,
}

fn run_cells(config: &RunConfig, cells: &[Cell], references: &[ReferenceSolution]) -> Result<Vec<ErrorRecord>> {
    let pool = worker_pool()?;
    let out: Vec<Result<ErrorRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let problem = config.problem.build(c.epsilon)?;
                let t_final = config.discretization.t_final;
                let run = run_cell(
                    &problem,
                    &c.grid,
                    c.method,
                    c.tau,
                    t_final,
                    config.method.dealias,
                    config.output.energy_stride,
                );
                let (h1_error, max_energy, wall) = match run {
                    Ok(r) => (
                        h1_error_vs_reference(&c.grid, &r.state, &references[c.reference])?,
                        r.max_energy_rel_error,
                        r.wall_time_s,
                    ),
                    Err(KgeError::Instability { step, t }) => {
                        warn!(
                            "{} at eps = {:e}, tau = {:e}, h = {:e} went non-finite at step {step} (t = {t})",
                            c.method,
                            c.epsilon,
                            c.tau,
                            c.grid.h()
                        );
                        (f64::INFINITY, f64::INFINITY, f64::NAN)
                    }
                    Err(e) => return Err(e),
                };
                Ok(ErrorRecord {
                    epsilon: c.epsilon,
                    tau: c.tau,
                    h: c.grid.h(),
                    method: c.method.family().to_string(),
                    order: c.method.order(),
                    h1_error,
                    rate: None,
                    wall_time_s: (config.output.record_wall_time && wall.is_finite()).then_some(wall),
                    max_energy_rel_error: max_energy,
                })
            })
            .collect()
    });
    out.into_iter().collect()
}

fn references_for(config: &RunConfig, finest: &GridSpec) -> Result<Vec<ReferenceSolution>> {
    let pool = worker_pool()?;
    let cache = &config.reference.cache_dir;
    let outcomes: Vec<Result<ReferenceSolution>> = pool.install(|| {
        config
            .epsilon_ladder()
            .into_par_iter()
            .map(|eps| {
                let req = ReferenceRequest::from_config(config, eps, Some(finest))?;
                Ok(obtain_reference(&req, Some(cache), config.reference.regenerate)?.solution)
            })
            .collect()
    });
    outcomes.into_iter().collect()
}

/// Convergence rate between two refinements, `ln(e1/e2) / ln(x1/x2)`.
pub fn observed_rate(e1: f64, e2: f64, x1: f64, x2: f64) -> Option<f64> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    (ok(e1) && ok(e2) && x1 != x2).then(|| (e1 / e2).ln() / (x1 / x2).ln())
}

/// Fills `rate` along consecutive records of each `(method, order, epsilon)` run of length `row_len`.
fn fill_rates(records: &mut [ErrorRecord], row_len: usize, step: impl Fn(&ErrorRecord) -> f64) {
    for row in records.chunks_mut(row_len) {
        for i in 1..row.len() {
            let (a, b) = (&row[i - 1], &row[i]);
            row[i].rate = observed_rate(a.h1_error, b.h1_error, step(a), step(b));
        }
    }
}

/// Temporal study: for each method and `eps_j = eps_0 / 2^j`, the ladder
/// `tau_0 / 4^j / 2^k` on the base grid. Rates are taken along `k`.
pub fn run_temporal_study(config: &RunConfig) -> Result<Vec<ErrorRecord>> {
    config.validate()?;
    let grid = config.grid()?;
    let references = references_for(config, &grid)?;
    let mut cells = Vec::new();
    for &method in &config.method.methods {
        for (j, eps) in config.epsilon_ladder().into_iter().enumerate() {
            for tau in config.tau_ladder(j) {
                cells.push(Cell {
                    method,
                    epsilon: eps,
                    tau,
                    grid: grid.clone(),
                    reference: j,
                });
            }
        }
    }
    let mut records = run_cells(config, &cells, &references)?;
    fill_rates(&mut records, config.study.tau_levels, |r| r.tau);
    Ok(records)
}

fn run_h_ladder(config: &RunConfig, with_rates: bool) -> Result<Vec<ErrorRecord>> {
    config.validate()?;
    let grids = config.grid_ladder()?;
    let finest = grids.last().expect("at least one level").clone();
    let references = references_for(config, &finest)?;
    let mut cells = Vec::new();
    for &method in &config.method.methods {
        for (j, eps) in config.epsilon_ladder().into_iter().enumerate() {
            for g in &grids {
                cells.push(Cell {
                    method,
                    epsilon: eps,
                    tau: config.discretization.tau,
                    grid: g.clone(),
                    reference: j,
                });
            }
        }
    }
    let mut records = run_cells(config, &cells, &references)?;
    if with_rates {
        fill_rates(&mut records, config.study.h_levels, |r| r.h);
    }
    Ok(records)
}

/// Spatial study: `h_0 / 2^k` at fixed `tau`, for each method and `eps_0 / 2^j`.
/// Coarse solutions are compared after embedding into the reference grid.
pub fn run_spatial_study(config: &RunConfig) -> Result<Vec<ErrorRecord>> {
    run_h_ladder(config, true)
}

/// Stability study: a large fixed `tau` over `h_0 / 2^k`. The reference grid is
/// at least as fine as the finest study grid. No rates are reported.
pub fn run_stability_study(config: &RunConfig) -> Result<Vec<ErrorRecord>> {
    run_h_ladder(config, false)
}

/// Energy traces for every method over the temporal ladder of `config`.
pub fn run_energy_trace(config: &RunConfig) -> Result<Vec<EnergyTrace>> {
    config.validate()?;
    let grid = config.grid()?;
    let mut jobs = Vec::new();
    for &method in &config.method.methods {
        for (j, eps) in config.epsilon_ladder().into_iter().enumerate() {
            for tau in config.tau_ladder(j) {
                jobs.push((method, eps, tau));
            }
        }
    }
    let pool = worker_pool()?;
    let out: Vec<Result<EnergyTrace>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, eps, tau)| {
                let problem = config.problem.build(eps)?;
                let t_final = config.discretization.t_final;
                let stride = config.output.energy_stride;
                let base = EnergyTrace {
                    method: method.family().to_string(),
                    order: method.order(),
                    epsilon: eps,
                    tau,
                    h: grid.h(),
                    rows: Vec::new(),
                    aborted_at: None,
                };
                match run_cell(&problem, &grid, method, tau, t_final, config.method.dealias, stride) {
                    Ok(run) => Ok(EnergyTrace {
                        rows: run.energy_trace,
                        ..base
                    }),
                    Err(KgeError::Instability { step, .. }) => Ok(EnergyTrace {
                        aborted_at: Some(step),
                        ..base
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    out.into_iter().collect()
}
