//! Configuration, reference caching and the study runners behind the `kge` command.

pub mod config;
pub mod output;
pub mod reference;
pub mod studies;

pub use config::{Method, ProblemConfig, ProfileConfig, RunConfig};
pub use reference::{
    compute_reference, h1_error_vs_reference, CacheStatus, ReferenceOutcome, ReferenceRequest, ReferenceSolution,
};
pub use studies::{
    run_cell, run_energy_trace, run_spatial_study, run_stability_study, run_temporal_study, EnergyRow, EnergyTrace,
    ErrorRecord,
};
