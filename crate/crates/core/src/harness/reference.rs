//! Cached high-accuracy reference solutions.
//!
//! A cache file is a text header of `key: value` lines, a `data:` marker, and one
//! `index u udot` line per grid point with 17 significant digits. The header
//! carries a hash of everything that determines the solution (`problem_hash`) and
//! a hash of the data lines (`content_hash`). Files are written to a temporary
//! name and renamed into place, so concurrent writers never expose partial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::error::{KgeError, Result};
use crate::ewi::integrate;
use crate::grid::{embed, forward_dft, h1_norm, inverse_dft, GridSpec, RealField};
use crate::harness::config::RunConfig;
use crate::problem::{KgeProblem, SolverState};
use crate::weights::EwiOrder;

const FORMAT_VERSION: u32 = 1;
/// Integrator used for every reference solution.
pub const REFERENCE_GENERATOR: &str = "ewi6";

/// What a reference solution is a solution of.
#[derive(Debug, Clone)]
pub struct ReferenceRequest {
    pub problem: KgeProblem,
    pub grid: GridSpec,
    pub tau_ref: f64,
    pub t_final: f64,
}

impl ReferenceRequest {
    /// Canonical description hashed into `problem_hash`.
    pub fn key(&self) -> String {
        format!(
            "format={FORMAT_VERSION};{};a={:e};b={:e};m={};tau_ref={:e};t_final={:e};generator={REFERENCE_GENERATOR}",
            self.problem.describe(),
            self.grid.a(),
            self.grid.b(),
            self.grid.m(),
            self.tau_ref,
            self.t_final
        )
    }

    pub fn problem_hash(&self) -> String {
        sha256_hex(self.key().as_bytes())
    }

    /// Cache file name derived from the problem hash.
    pub fn file_name(&self) -> String {
        format!("ref-{}.txt", &self.problem_hash()[..16])
    }

    /// Reference for `epsilon` under `config`, on the `h_ref` grid or on `finest` if that is finer.
    pub fn from_config(config: &RunConfig, epsilon: f64, finest: Option<&GridSpec>) -> Result<Self> {
        let p = &config.problem;
        let mut grid = GridSpec::with_mesh_size(p.a, p.b, config.reference.h_ref)
            .map_err(|e| KgeError::Config(format!("reference.h_ref: {e}")))?;
        if let Some(f) = finest {
            if f.m() > grid.m() {
                grid = f.clone();
            }
        }
        Ok(Self {
            problem: p.build(epsilon)?,
            grid,
            tau_ref: config.reference.tau_ref,
            t_final: config.discretization.t_final,
        })
    }
}

/// A reference state at `t_final` together with its provenance.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub problem_hash: String,
    pub content_hash: String,
    pub epsilon: f64,
    pub t_final: f64,
    pub tau_ref: f64,
    pub generator: String,
    pub grid: GridSpec,
    pub u: RealField,
    pub udot: RealField,
    pub state: SolverState,
}

/// How a reference was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Generated,
    /// An existing file was unusable; the string says why.
    Regenerated(String),
    /// No cache directory was given.
    Uncached,
}

#[derive(Debug, Clone)]
pub struct ReferenceOutcome {
    pub solution: ReferenceSolution,
    pub status: CacheStatus,
    pub path: Option<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn data_block(u: &RealField, udot: &RealField) -> String {
    let mut s = String::with_capacity(u.len() * 52);
    for (j, (a, b)) in u.values().iter().zip(udot.values()).enumerate() {
        writeln!(s, "{j} {a:.16e} {b:.16e}").expect("writing to a String");
    }
    s
}

fn render(req: &ReferenceRequest, u: &RealField, udot: &RealField) -> (String, String) {
    let data = data_block(u, udot);
    let content_hash = sha256_hex(data.as_bytes());
    let mut out = String::new();
    let header = [
        ("format", FORMAT_VERSION.to_string()),
        ("problem_hash", req.problem_hash()),
        ("problem", req.problem.describe()),
        ("epsilon", format!("{:e}", req.problem.epsilon())),
        ("t_final", format!("{:e}", req.t_final)),
        ("a", format!("{:e}", req.grid.a())),
        ("b", format!("{:e}", req.grid.b())),
        ("m", req.grid.m().to_string()),
        ("tau_ref", format!("{:e}", req.tau_ref)),
        ("generator", REFERENCE_GENERATOR.to_string()),
        ("content_hash", content_hash.clone()),
    ];
    out.push_str("# kge reference solution\n");
    for (k, v) in header {
        writeln!(out, "{k}: {v}").expect("writing to a String");
    }
    out.push_str("data:\n");
    out.push_str(&data);
    (out, content_hash)
}

fn assemble(req: &ReferenceRequest, u: RealField, udot: RealField, content_hash: String) -> Result<ReferenceSolution> {
    let state = SolverState {
        u: forward_dft(&req.grid, &u)?,
        udot: forward_dft(&req.grid, &udot)?,
        t: req.t_final,
    };
    Ok(ReferenceSolution {
        problem_hash: req.problem_hash(),
        content_hash,
        epsilon: req.problem.epsilon(),
        t_final: req.t_final,
        tau_ref: req.tau_ref,
        generator: REFERENCE_GENERATOR.to_string(),
        grid: req.grid.clone(),
        u,
        udot,
        state,
    })
}

/// Parses a cache file and checks it against `req`. The error string explains a rejection.
pub fn parse_reference(req: &ReferenceRequest, text: &str) -> std::result::Result<ReferenceSolution, String> {
    let (head, data) = text.split_once("\ndata:\n").ok_or("missing data section")?;
    let header: BTreeMap<&str, &str> = head
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| l.split_once(": "))
        .collect();
    let field = |k: &str| header.get(k).copied().ok_or(format!("missing header field `{k}`"));
    let want = req.problem_hash();
    if field("problem_hash")? != want {
        return Err(format!("problem hash {} does not match {want}", field("problem_hash")?));
    }
    let content_hash = sha256_hex(data.as_bytes());
    if field("content_hash")? != content_hash {
        return Err("content hash mismatch".into());
    }
    let m = req.grid.m();
    let mut u = Vec::with_capacity(m);
    let mut udot = Vec::with_capacity(m);
    for (j, line) in data.lines().enumerate() {
        let mut it = line.split_ascii_whitespace();
        let idx: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(format!("bad index on data line {j}"))?;
        if idx != j {
            return Err(format!("data line {j} has index {idx}"));
        }
        let mut num = || -> std::result::Result<f64, String> {
            it.next()
                .and_then(|s| s.parse().ok())
                .ok_or(format!("bad value on data line {j}"))
        };
        u.push(num()?);
        udot.push(num()?);
    }
    if u.len() != m {
        return Err(format!("expected {m} data lines, found {}", u.len()));
    }
    assemble(req, RealField::new(u), RealField::new(udot), content_hash).map_err(|e| e.to_string())
}

fn generate(req: &ReferenceRequest) -> Result<(ReferenceSolution, String)> {
    info!(
        "computing reference: eps = {:e}, M = {}, tau_ref = {:e}, T = {:e}",
        req.problem.epsilon(),
        req.grid.m(),
        req.tau_ref,
        req.t_final
    );
    let state = integrate(&req.problem, &req.grid, req.tau_ref, req.t_final, EwiOrder::Sixth, None)?;
    let u = inverse_dft(&req.grid, &state.u)?;
    let udot = inverse_dft(&req.grid, &state.udot)?;
    let (text, content_hash) = render(req, &u, &udot);
    // 17 significant digits round-trip exactly, so a fresh solution equals a reloaded one
    Ok((assemble(req, u, udot, content_hash)?, text))
}

fn write_atomic(dir: &Path, path: &Path, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| cache_err(dir, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| cache_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| cache_err(path, e))?;
    tmp.persist(path).map_err(|e| cache_err(path, e.error))?;
    Ok(())
}

fn cache_err(path: &Path, e: std::io::Error) -> KgeError {
    KgeError::Cache {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Loads the reference from `cache_dir` or computes and stores it.
///
/// An unreadable or inconsistent cache file is replaced, with a warning.
pub fn obtain_reference(
    req: &ReferenceRequest,
    cache_dir: Option<&Path>,
    regenerate: bool,
) -> Result<ReferenceOutcome> {
    let Some(dir) = cache_dir else {
        let (solution, _) = generate(req)?;
        return Ok(ReferenceOutcome {
            solution,
            status: CacheStatus::Uncached,
            path: None,
        });
    };
    let path = dir.join(req.file_name());
    let mut status = CacheStatus::Generated;
    if path.exists() && !regenerate {
        match std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_reference(req, &t))
        {
            Ok(solution) => {
                info!("reference cache hit: {}", path.display());
                return Ok(ReferenceOutcome {
                    solution,
                    status: CacheStatus::Hit,
                    path: Some(path),
                });
            }
            Err(reason) => {
                warn!("reference cache {} unusable ({reason}); regenerating", path.display());
                status = CacheStatus::Regenerated(reason);
            }
        }
    } else if regenerate {
        status = CacheStatus::Regenerated("regeneration requested".into());
    }
    let (solution, text) = generate(req)?;
    write_atomic(dir, &path, &text)?;
    info!("reference written: {}", path.display());
    Ok(ReferenceOutcome {
        solution,
        status,
        path: Some(path),
    })
}

/// Reference for the base `epsilon` of `config`, cached under `reference.cache_dir`.
pub fn compute_reference(config: &RunConfig) -> Result<ReferenceOutcome> {
    let req = ReferenceRequest::from_config(config, config.problem.epsilon, None)?;
    obtain_reference(&req, Some(&config.reference.cache_dir), config.reference.regenerate)
}

/// `||I u - u_ref||_{H^1}`, embedding `state` into the reference grid when it is coarser.
pub fn h1_error_vs_reference(grid: &GridSpec, state: &SolverState, reference: &ReferenceSolution) -> Result<f64> {
    if grid.m() > reference.grid.m() {
        return Err(KgeError::IncompatibleGrids(format!(
            "state grid M = {} is finer than reference grid M = {}",
            grid.m(),
            reference.grid.m()
        )));
    }
    let u = embed(grid, &state.u, &reference.grid)?;
    Ok(h1_norm(&reference.grid, &u.sub(&reference.state.u)))
}
