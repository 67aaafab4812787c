//! CSV and JSON writers for study results.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::studies::{EnergyTrace, ErrorRecord};

/// Header of the error CSV.
pub const ERROR_CSV_HEADER: &str = "epsilon,tau,h,method,order,h1_error,rate,wall_time_s,max_energy_rel_error";

/// Header of the energy-trace CSV.
pub const ENERGY_CSV_HEADER: &str = "method,order,epsilon,tau,h,step,t,energy,rel_error";

// `{:e}` prints the shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn records_to_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::from(ERROR_CSV_HEADER);
    out.push('\n');
    for r in records {
        let row = [
            num(r.epsilon),
            num(r.tau),
            num(r.h),
            r.method.clone(),
            r.order.to_string(),
            num(r.h1_error),
            opt(r.rate),
            opt(r.wall_time_s),
            num(r.max_energy_rel_error),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn traces_to_csv(traces: &[EnergyTrace]) -> String {
    let mut out = String::from(ENERGY_CSV_HEADER);
    out.push('\n');
    for t in traces {
        for r in &t.rows {
            let row = [
                t.method.clone(),
                t.order.to_string(),
                num(t.epsilon),
                num(t.tau),
                num(t.h),
                r.step.to_string(),
                num(r.t),
                num(r.energy),
                num(r.rel_error),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// JSON summary: run metadata plus the records.
#[derive(Debug, Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub version: &'static str,
    pub command: &'a str,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub config: &'a RunConfig,
    pub records: &'a T,
}

impl<'a, T: Serialize> Summary<'a, T> {
    pub fn new(command: &'a str, config: &'a RunConfig, records: &'a T, started_unix_s: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            started_unix_s,
            finished_unix_s: unix_now(),
            config,
            records,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
