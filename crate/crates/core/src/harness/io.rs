//! Result files: one CSV per sweep plus a metadata sidecar recording the
//! configuration and the modelling choices the numbers depend on.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

use super::config::ExperimentConfig;
use super::sweep::{NmseRecord, RateRecord};

pub const NMSE_HEADER: &str = "scheme,n_t,K,sigma_e_sq,nmse,ci95,n_valid";
pub const RATE_HEADER: &str = "scheme,n_t,K,sigma_e_sq,snr_db,mean_rate_bps,ci95_bps";

pub fn nmse_csv(records: &[NmseRecord]) -> String {
    let mut out = format!("{NMSE_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme, r.n_t, r.k, r.sigma_e_sq, r.stats.mean, r.stats.ci95, r.stats.n
        );
    }
    out
}

pub fn rate_csv(records: &[RateRecord]) -> String {
    let mut out = format!("{RATE_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.n_t,
            r.k,
            r.sigma_e_sq,
            r.snr_db,
            r.stats.mean,
            r.stats.ci95
        );
    }
    out
}

const MODEL_NOTES: &[&str] = &[
    "nmse: mean of |H_est - H|^2 / |H|^2 over (trial, UE) pairs; pairs with H = 0 are skipped; n_valid counts the kept pairs",
    "ci95: 1.96 * sample std / sqrt(n) over the same samples",
    "nlos existence also checks the AP-to-reflection-point leg against all other surfaces",
    "feedback: a path keeps F = 1 if some true path arrives inside the UE half-power main lobe steered to its AoA",
    "los existence tests the reported UE position; path gains use the true distances",
    "trials share one scene, UE set and error direction across all cells (common random numbers)",
    "rate: per-UE rate averaged over trials and UEs; snr_db is P_T / sigma_n^2",
    "AP-CRF-approx: desired term |alpha|^2 P_T N_T N_ue of the selected path, interference exact",
];

pub fn metadata_text(cfg: &ExperimentConfig, sweep: &str) -> String {
    let mut out = format!("# ambientsim {sweep} sweep\n# version {}\n", env!("CARGO_PKG_VERSION"));
    for note in MODEL_NOTES {
        let _ = writeln!(out, "# {note}");
    }
    out.push_str(&cfg.to_text());
    out
}

/// Write `<name>.csv` and `<name>_metadata.txt` into `dir`, creating it.
pub fn write_sweep(dir: &Path, name: &str, csv: &str, metadata: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{name}.csv")), csv)?;
    fs::write(dir.join(format!("{name}_metadata.txt")), metadata)?;
    Ok(())
}
