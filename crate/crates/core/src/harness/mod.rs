//! Experiment driver: configuration, seeding, the NMSE and rate sweeps and
//! their result files.

pub mod config;
pub mod io;
pub mod sweep;

pub use config::{ExperimentConfig, Scheme};
pub use sweep::{
    apply_position_error, draw_trial, draw_users, inject_position_error, run_nmse_sweep, run_rate_sweep, run_single,
    trial_seed, NmseRecord, RateRecord, RateScheme, SampleStats, SchemeOutcome, SingleRun, TrialDraw,
};
