//! Monte Carlo sweeps. Every trial draws one scene, its UEs and their
//! positioning-error directions from its own random stream; all cells of a
//! sweep reuse that draw, so differences between cells are not blurred by
//! independent sampling noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::arrays::{BeamwidthProfile, ProbeBeamwidths, UcaSpec};
use crate::comm::{
    design_beamformers, evaluate_links, evaluate_links_approx, gain_matrix, strongest_path, LinkBudget,
};
use crate::error::Result;
use crate::exec;
use crate::geometry::Point2;
use crate::perception::{perceive, PerceptionParams, PerceptionResult};
use crate::reconstruction::{
    compute_feedback, normalized_error, reconstruct_channel, trace_paths, FlagMode, Path, ReconParams, SurfaceSet,
    UeEstimate,
};
use crate::scene::{
    generate_scene, ground_truth_channel, place_ue, true_front_surfaces, true_surface_set, GroundTruth,
    MaterialTable, Scene, TrueSurface, UeTruth,
};
use crate::sensing::{probe_directions, sweep, FmcwParams, ProbeSetup, Target};

use super::config::{ExperimentConfig, Scheme};

const SCENE_STREAM: u64 = 0;
const UE_STREAM: u64 = 1;
const ERROR_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial`; distinct trials get unrelated seeds.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Independent zero-mean Gaussian offsets of variance `sigma_e_sq` on each
/// axis.
pub fn inject_position_error<R: Rng + ?Sized>(ue: &UeTruth, sigma_e_sq: f64, rng: &mut R) -> UeEstimate {
    apply_position_error(ue, standard_pair(rng), sigma_e_sq)
}

fn standard_pair<R: Rng + ?Sized>(rng: &mut R) -> Point2 {
    Point2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `x̂ = x + σ_e·z` for a standard normal pair `z`.
pub fn apply_position_error(ue: &UeTruth, z: Point2, sigma_e_sq: f64) -> UeEstimate {
    UeEstimate::with_offset(ue, z.scale(sigma_e_sq.sqrt()))
}

/// Everything random about one trial.
#[derive(Clone, Debug)]
pub struct TrialDraw {
    pub scene: Scene,
    pub ues: Vec<UeTruth>,
    /// Standard normal pair per UE, scaled by σ_e in each cell.
    pub error_draws: Vec<Point2>,
}

pub fn draw_trial(cfg: &ExperimentConfig, table: &MaterialTable, trial: u64) -> Result<TrialDraw> {
    let seed = trial_seed(cfg.master_seed, trial);
    let scene = generate_scene(&cfg.scene, table, &mut stream(seed, SCENE_STREAM), seed)?;
    draw_users(cfg, scene)
}

/// UEs and error draws for a given scene, from the scene's own seed. A
/// replayed scene file therefore gets the same users as the original run.
pub fn draw_users(cfg: &ExperimentConfig, scene: Scene) -> Result<TrialDraw> {
    let mut rng = stream(scene.seed, UE_STREAM);
    let ues = (0..cfg.n_ues).map(|_| place_ue(&scene, cfg.n_ue_antennas, &mut rng)).collect::<Result<Vec<_>>>()?;
    let mut rng = stream(scene.seed, ERROR_STREAM);
    let error_draws = (0..cfg.n_ues).map(|_| standard_pair(&mut rng)).collect();
    Ok(TrialDraw { scene, ues, error_draws })
}

/// Per-N_T array data and per-(N_T, K) probe data, computed once per sweep.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub table: &'a MaterialTable,
    pub fmcw: FmcwParams,
    arrays: Vec<(usize, BeamwidthProfile)>,
    probes: Vec<((usize, usize), Vec<f64>, ProbeBeamwidths)>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig, table: &'a MaterialTable, n_ts: &[usize], ks: &[usize]) -> Result<Self> {
        cfg.validate()?;
        let mut arrays = Vec::new();
        let mut probes = Vec::new();
        for &n_t in n_ts {
            let spec = UcaSpec::new(n_t, cfg.wavelength);
            arrays.push((n_t, BeamwidthProfile::new(spec)));
            for &k in ks {
                let dirs = probe_directions(k)?;
                let widths = ProbeBeamwidths::new(&dirs, &spec);
                probes.push(((n_t, k), dirs, widths));
            }
        }
        Ok(Self { cfg, table, fmcw: cfg.fmcw(), arrays, probes })
    }

    pub fn profile(&self, n_t: usize) -> &BeamwidthProfile {
        &self.arrays.iter().find(|(n, _)| *n == n_t).expect("N_T prepared").1
    }

    pub fn recon_params(&self, n_t: usize) -> ReconParams<'_> {
        ReconParams { beamwidth: self.profile(n_t), eta: self.cfg.eta }
    }

    /// FMCW sweep of `scene` followed by surface perception.
    pub fn sense_and_perceive(&self, scene: &Scene, front: &[TrueSurface], n_t: usize, k: usize) -> Result<Perceived> {
        let (_, dirs, widths) = self.probes.iter().find(|(key, _, _)| *key == (n_t, k)).expect("probe set prepared");
        let uca = *self.profile(n_t).spec();
        let setup = ProbeSetup { uca: &uca, fmcw: &self.fmcw, eta: self.cfg.eta };
        let targets = sweep(scene, front, dirs, widths, &setup)?;
        let params = PerceptionParams {
            table: self.table,
            eta: self.cfg.eta,
            zeta: self.cfg.zeta,
            uca: &uca,
            widths,
            least_squares: self.cfg.least_squares,
        };
        let result = perceive(&targets, &params)?;
        let surfaces = result.surface_set(self.table);
        Ok(Perceived { targets, result, surfaces })
    }
}

pub struct Perceived {
    pub targets: Vec<Target>,
    pub result: PerceptionResult,
    pub surfaces: SurfaceSet,
}

/// Paths of one UE under `scheme` and the flag that weights them.
pub fn scheme_paths(
    scheme: Scheme,
    perceived: &SurfaceSet,
    truth_set: &SurfaceSet,
    est: &UeEstimate,
    truth: &GroundTruth,
    params: &ReconParams<'_>,
) -> (Vec<Path>, FlagMode) {
    match scheme {
        Scheme::ICr => (trace_paths(truth_set, est, params), FlagMode::Existence),
        Scheme::ApCr => (trace_paths(perceived, est, params), FlagMode::Existence),
        Scheme::ApCrf => {
            let mut paths = trace_paths(perceived, est, params);
            compute_feedback(&mut paths, &truth.paths, &est.ula(params.wavelength()));
            (paths, FlagMode::Feedback)
        }
    }
}

/// Mean and 95 % confidence half-width of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl SampleStats {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, ci95: f64::NAN, n };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ci95 = if n > 1 {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, ci95, n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmseRecord {
    pub scheme: Scheme,
    pub n_t: usize,
    pub k: usize,
    pub sigma_e_sq: f64,
    /// Mean over (trial, UE) pairs with a non-zero benchmark channel.
    pub stats: SampleStats,
}

struct Grid {
    dims: Vec<usize>,
}

impl Grid {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn index(&self, at: &[usize]) -> usize {
        at.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }
}

/// Collect per-trial sample vectors in trial order and merge them cell by
/// cell, so the result does not depend on scheduling.
fn run_trials<F>(n_trials: usize, cells: usize, trial: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<Vec<f64>>> + Sync + Send,
{
    let per_trial = exec::map_indexed(n_trials, |t| trial(t as u64));
    let mut merged = vec![Vec::new(); cells];
    for result in per_trial {
        for (cell, samples) in merged.iter_mut().zip(result?) {
            cell.extend(samples);
        }
    }
    Ok(merged)
}

/// NMSE for every (scheme, N_T, K, σ_e²) cell of the configuration.
pub fn run_nmse_sweep(cfg: &ExperimentConfig, table: &MaterialTable) -> Result<Vec<NmseRecord>> {
    let ctx = Context::new(cfg, table, &cfg.n_t_list, &cfg.k_list)?;
    let grid = Grid { dims: vec![cfg.schemes.len(), cfg.n_t_list.len(), cfg.k_list.len(), cfg.sigma_e_sq_list.len()] };
    let merged = run_trials(cfg.n_trials, grid.len(), |t| nmse_trial(&ctx, &grid, t))?;
    let mut records = Vec::with_capacity(grid.len());
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        for (ni, &n_t) in cfg.n_t_list.iter().enumerate() {
            for (ki, &k) in cfg.k_list.iter().enumerate() {
                for (ei, &sigma_e_sq) in cfg.sigma_e_sq_list.iter().enumerate() {
                    let stats = SampleStats::of(&merged[grid.index(&[si, ni, ki, ei])]);
                    records.push(NmseRecord { scheme, n_t, k, sigma_e_sq, stats });
                }
            }
        }
    }
    Ok(records)
}

fn nmse_trial(ctx: &Context<'_>, grid: &Grid, trial: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = ctx.cfg;
    let draw = draw_trial(cfg, ctx.table, trial)?;
    let front = true_front_surfaces(&draw.scene);
    let truth_set = true_surface_set(&draw.scene);
    let mut out = vec![Vec::new(); grid.len()];
    let slot = |s: Scheme| cfg.schemes.iter().position(|&x| x == s);
    let perceiving = cfg.schemes.iter().any(|&s| s != Scheme::ICr);
    let empty = SurfaceSet::default();

    for (ni, &n_t) in cfg.n_t_list.iter().enumerate() {
        let params = ctx.recon_params(n_t);
        let truths: Vec<GroundTruth> = draw.ues.iter().map(|u| ground_truth_channel(&truth_set, u, &params)).collect();

        if let Some(si) = slot(Scheme::ICr) {
            // independent of K: evaluated once and copied to every K cell
            for (ei, &sigma) in cfg.sigma_e_sq_list.iter().enumerate() {
                let samples = nmse_samples(Scheme::ICr, &empty, &truth_set, &draw, &truths, sigma, &params);
                for ki in 0..cfg.k_list.len() {
                    out[grid.index(&[si, ni, ki, ei])].extend_from_slice(&samples);
                }
            }
        }
        if !perceiving {
            continue;
        }
        for (ki, &k) in cfg.k_list.iter().enumerate() {
            let perceived = ctx.sense_and_perceive(&draw.scene, &front, n_t, k)?;
            for (ei, &sigma) in cfg.sigma_e_sq_list.iter().enumerate() {
                for (si, &scheme) in cfg.schemes.iter().enumerate().filter(|(_, s)| **s != Scheme::ICr) {
                    let samples =
                        nmse_samples(scheme, &perceived.surfaces, &truth_set, &draw, &truths, sigma, &params);
                    out[grid.index(&[si, ni, ki, ei])] = samples;
                }
            }
        }
    }
    Ok(out)
}

fn nmse_samples(
    scheme: Scheme,
    perceived: &SurfaceSet,
    truth_set: &SurfaceSet,
    draw: &TrialDraw,
    truths: &[GroundTruth],
    sigma_e_sq: f64,
    params: &ReconParams<'_>,
) -> Vec<f64> {
    draw.ues
        .iter()
        .zip(&draw.error_draws)
        .zip(truths)
        .filter_map(|((ue, &z), truth)| {
            let est = apply_position_error(ue, z, sigma_e_sq);
            let (paths, mode) = scheme_paths(scheme, perceived, truth_set, &est, truth, params);
            let h = reconstruct_channel(&paths, &est, params, mode);
            normalized_error(&h, &truth.channel)
        })
        .collect()
}

/// Curves of the rate sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateScheme {
    ICr,
    ApCrf,
    ApCr,
    /// Closed-form approximation of the AP-CRF rate.
    ApCrfApprox,
}

impl RateScheme {
    pub const ALL: [RateScheme; 4] = [RateScheme::ICr, RateScheme::ApCrf, RateScheme::ApCr, RateScheme::ApCrfApprox];

    pub fn name(self) -> &'static str {
        match self {
            RateScheme::ICr => "I-CR",
            RateScheme::ApCrf => "AP-CRF",
            RateScheme::ApCr => "AP-CR",
            RateScheme::ApCrfApprox => "AP-CRF-approx",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateRecord {
    pub scheme: RateScheme,
    pub n_t: usize,
    pub k: usize,
    pub sigma_e_sq: f64,
    pub snr_db: f64,
    /// Per-UE rate in bit/s, averaged over trials and UEs.
    pub stats: SampleStats,
}

/// Mean downlink rate against SNR for every curve, N_T and σ_e² of the
/// rate slice.
pub fn run_rate_sweep(cfg: &ExperimentConfig, table: &MaterialTable) -> Result<Vec<RateRecord>> {
    let ctx = Context::new(cfg, table, &cfg.rate_n_t_list, &[cfg.rate_k])?;
    let grid = Grid {
        dims: vec![RateScheme::ALL.len(), cfg.rate_n_t_list.len(), cfg.rate_sigma_e_sq_list.len(), cfg.snr_db_list.len()],
    };
    let merged = run_trials(cfg.n_trials, grid.len(), |t| rate_trial(&ctx, &grid, t))?;
    let mut records = Vec::with_capacity(grid.len());
    for (si, &scheme) in RateScheme::ALL.iter().enumerate() {
        for (ni, &n_t) in cfg.rate_n_t_list.iter().enumerate() {
            for (ei, &sigma_e_sq) in cfg.rate_sigma_e_sq_list.iter().enumerate() {
                for (pi, &snr_db) in cfg.snr_db_list.iter().enumerate() {
                    let stats = SampleStats::of(&merged[grid.index(&[si, ni, ei, pi])]);
                    records.push(RateRecord { scheme, n_t, k: cfg.rate_k, sigma_e_sq, snr_db, stats });
                }
            }
        }
    }
    Ok(records)
}

fn rate_trial(ctx: &Context<'_>, grid: &Grid, trial: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = ctx.cfg;
    let draw = draw_trial(cfg, ctx.table, trial)?;
    let front = true_front_surfaces(&draw.scene);
    let truth_set = true_surface_set(&draw.scene);
    let mut out = vec![Vec::new(); grid.len()];
    // P_T/σ_n² on the SNR axis fixes the noise for the configured power
    let budgets: Vec<LinkBudget> = cfg
        .snr_db_list
        .iter()
        .map(|&snr| LinkBudget {
            tx_power: cfg.tx_power,
            noise_var: cfg.tx_power * 10f64.powf(-snr / 10.0),
            bandwidth: cfg.bandwidth_hz,
        })
        .collect();

    for (ni, &n_t) in cfg.rate_n_t_list.iter().enumerate() {
        let params = ctx.recon_params(n_t);
        let truths: Vec<GroundTruth> = draw.ues.iter().map(|u| ground_truth_channel(&truth_set, u, &params)).collect();
        let channels: Vec<_> = truths.iter().map(|t| t.channel.clone()).collect();
        let perceived = ctx.sense_and_perceive(&draw.scene, &front, n_t, cfg.rate_k)?;

        for (ei, &sigma) in cfg.rate_sigma_e_sq_list.iter().enumerate() {
            let ests: Vec<UeEstimate> =
                draw.ues.iter().zip(&draw.error_draws).map(|(u, &z)| apply_position_error(u, z, sigma)).collect();
            for (si, scheme) in [(0, Scheme::ICr), (1, Scheme::ApCrf), (2, Scheme::ApCr)] {
                let mut beams = Vec::with_capacity(ests.len());
                let mut selected = Vec::with_capacity(ests.len());
                for (est, truth) in ests.iter().zip(&truths) {
                    let (paths, mode) = scheme_paths(scheme, &perceived.surfaces, &truth_set, est, truth, &params);
                    let pick = strongest_path(&paths, mode);
                    selected.push(pick.map(|l| paths[l].gain));
                    beams.push(pick.map(|l| (l, design_beamformers(&paths[l], params.uca(), &est.ula(cfg.wavelength)))));
                }
                let g = gain_matrix(&beams, &channels)?;
                for (pi, budget) in budgets.iter().enumerate() {
                    let links = evaluate_links(&g, budget)?;
                    out[grid.index(&[si, ni, ei, pi])].extend(links.iter().map(|l| l.rate));
                    if scheme == Scheme::ApCrf {
                        let approx = evaluate_links_approx(&g, &selected, n_t, cfg.n_ue_antennas, budget)?;
                        out[grid.index(&[3, ni, ei, pi])].extend(approx.iter().map(|l| l.rate));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One scheme's per-UE paths and NMSE (`None` when the benchmark channel is
/// zero).
pub type SchemeOutcome = (Scheme, Vec<Vec<Path>>, Vec<Option<f64>>);

/// Outputs of the pipeline on one scene for one (N_T, K, σ_e²) setting.
pub struct SingleRun {
    pub draw: TrialDraw,
    pub n_t: usize,
    pub k: usize,
    pub sigma_e_sq: f64,
    pub perceived: Perceived,
    pub truths: Vec<GroundTruth>,
    pub estimates: Vec<UeEstimate>,
    /// Per scheme in configuration order.
    pub schemes: Vec<SchemeOutcome>,
}

pub fn run_single(
    cfg: &ExperimentConfig,
    table: &MaterialTable,
    draw: TrialDraw,
    n_t: usize,
    k: usize,
    sigma_e_sq: f64,
) -> Result<SingleRun> {
    let ctx = Context::new(cfg, table, &[n_t], &[k])?;
    let params = ctx.recon_params(n_t);
    let front = true_front_surfaces(&draw.scene);
    let truth_set = true_surface_set(&draw.scene);
    let perceived = ctx.sense_and_perceive(&draw.scene, &front, n_t, k)?;
    let truths: Vec<GroundTruth> = draw.ues.iter().map(|u| ground_truth_channel(&truth_set, u, &params)).collect();
    let estimates: Vec<UeEstimate> =
        draw.ues.iter().zip(&draw.error_draws).map(|(u, &z)| apply_position_error(u, z, sigma_e_sq)).collect();
    let mut schemes = Vec::new();
    for &scheme in &cfg.schemes {
        let mut all_paths = Vec::new();
        let mut nmse = Vec::new();
        for (est, truth) in estimates.iter().zip(&truths) {
            let (paths, mode) = scheme_paths(scheme, &perceived.surfaces, &truth_set, est, truth, &params);
            nmse.push(normalized_error(&reconstruct_channel(&paths, est, &params, mode), &truth.channel));
            all_paths.push(paths);
        }
        schemes.push((scheme, all_paths, nmse));
    }
    Ok(SingleRun { draw, n_t, k, sigma_e_sq, perceived, truths, estimates, schemes })
}
