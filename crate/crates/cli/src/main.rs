use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ambientsim::harness::{self, io, ExperimentConfig, SingleRun, TrialDraw};
use ambientsim::reconstruction::{paths_to_csv_rows, PATHS_CSV_HEADER};
use ambientsim::scene::{MaterialTable, Scene};
use ambientsim::sensing::targets_to_csv;
use ambientsim::{exec, SimError};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Radar-assisted mmWave access point simulator.
#[derive(Parser, Debug)]
#[command(name = "ambientsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// key = value configuration file; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// master seed, overrides the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo trials per cell, overrides the configuration
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// worker threads (AMBIENTSIM_THREADS takes precedence)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// AP antennas for single-scene commands (default: first of n_t_list)
    #[arg(long = "n-t", global = true)]
    n_t: Option<usize>,
    /// probing beams for single-scene commands (default: rate_k)
    #[arg(long, global = true)]
    k: Option<usize>,
    /// positioning error variance for single-scene commands
    #[arg(long = "sigma-e-sq", global = true, default_value_t = 0.0)]
    sigma_e_sq: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probe one random scene and write its targets
    Sense,
    /// Probe and perceive one random scene
    Perceive,
    /// Full pipeline on one random scene: paths and per-UE NMSE
    Reconstruct,
    /// NMSE over the configured (scheme, N_T, K, sigma_e^2) grid
    NmseSweep,
    /// Downlink rate against SNR
    RateSweep,
    /// Rerun the full pipeline on a saved scene file
    Replay {
        scene: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ambientsim: {e}");
            match e {
                SimError::Config(_) | SimError::Parse { .. } => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_SIMULATION),
            }
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, SimError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = c.trials {
        cfg.n_trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(c: &Common) -> Result<Option<usize>, SimError> {
    match std::env::var("AMBIENTSIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| SimError::Config(format!("AMBIENTSIM_THREADS must be a count, got {v:?}"))),
        _ => Ok(c.threads),
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    let cfg = load_config(&cli.common)?;
    let threads = thread_count(&cli.common)?;
    let table = MaterialTable::reference();
    exec::with_threads(threads, || dispatch(&cli, &cfg, &table))
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig, table: &MaterialTable) -> Result<(), SimError> {
    let out = &cli.common.out;
    match &cli.command {
        Command::NmseSweep => {
            let records = harness::run_nmse_sweep(cfg, table)?;
            io::write_sweep(out, "nmse", &io::nmse_csv(&records), &io::metadata_text(cfg, "nmse"))?;
            println!("wrote {} records to {}", records.len(), out.join("nmse.csv").display());
        }
        Command::RateSweep => {
            let records = harness::run_rate_sweep(cfg, table)?;
            io::write_sweep(out, "rate", &io::rate_csv(&records), &io::metadata_text(cfg, "rate"))?;
            println!("wrote {} records to {}", records.len(), out.join("rate.csv").display());
        }
        Command::Sense | Command::Perceive | Command::Reconstruct => {
            let draw = harness::draw_trial(cfg, table, 0)?;
            single(cli, cfg, table, draw)?;
        }
        Command::Replay { scene } => {
            let text = fs::read_to_string(scene)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", scene.display())))?;
            let scene = Scene::from_text(&text)?;
            let draw = harness::draw_users(cfg, scene)?;
            single(cli, cfg, table, draw)?;
        }
    }
    Ok(())
}

fn single(cli: &Cli, cfg: &ExperimentConfig, table: &MaterialTable, draw: TrialDraw) -> Result<(), SimError> {
    let c = &cli.common;
    let n_t = c.n_t.unwrap_or(cfg.n_t_list[0]);
    let k = c.k.unwrap_or(cfg.rate_k);
    if c.sigma_e_sq.is_nan() || c.sigma_e_sq < 0.0 {
        return Err(SimError::Config("sigma-e-sq must be non-negative".into()));
    }
    let run = harness::run_single(cfg, table, draw, n_t, k, c.sigma_e_sq)?;
    fs::create_dir_all(&c.out)?;
    write(&c.out, "scene.txt", &run.draw.scene.to_text())?;
    write(&c.out, "targets.csv", &targets_to_csv(&run.perceived.targets))?;
    let valid = run.perceived.targets.iter().filter(|t| t.valid).count();
    println!("{} objects, {valid}/{k} valid targets", run.draw.scene.objects.len());
    if matches!(cli.command, Command::Sense) {
        return Ok(());
    }
    write(&c.out, "perception.txt", &run.perceived.result.to_text(table))?;
    println!(
        "{} visible and {} supplementary surfaces",
        run.perceived.result.visible.len(),
        run.perceived.result.supplementary.len()
    );
    if matches!(cli.command, Command::Perceive) {
        return Ok(());
    }
    let (paths, nmse) = reconstruction_reports(&run);
    write(&c.out, "paths.csv", &paths)?;
    write(&c.out, "ue_nmse.csv", &nmse)?;
    Ok(())
}

fn reconstruction_reports(run: &SingleRun) -> (String, String) {
    let mut paths = format!("scheme,{PATHS_CSV_HEADER}\n");
    let mut nmse = String::from("scheme,ue,nmse\n");
    for (scheme, per_ue, errors) in &run.schemes {
        for (m, (p, e)) in per_ue.iter().zip(errors).enumerate() {
            let mut rows = String::new();
            paths_to_csv_rows(m, p, &mut rows);
            for row in rows.lines() {
                let _ = writeln!(paths, "{scheme},{row}");
            }
            let value = e.map_or_else(|| "nan".to_string(), |v| v.to_string());
            let _ = writeln!(nmse, "{scheme},{m},{value}");
        }
        let valid: Vec<f64> = errors.iter().flatten().copied().collect();
        let mean = valid.iter().sum::<f64>() / valid.len().max(1) as f64;
        println!("{scheme}: mean NMSE {mean:.4e} over {} UEs", valid.len());
    }
    (paths, nmse)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), SimError> {
    fs::write(dir.join(name), text)?;
    Ok(())
}
