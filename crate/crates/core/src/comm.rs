//! Single-beam downlink: each UE is served along its strongest reconstructed
//! path with conjugate beamformers, and every other UE's beam leaks in as
//! interference through the true channel.

use num_complex::Complex64;

use crate::arrays::{uca_steering, ula_combiner, CVector, UcaSpec, UlaSpec};
use crate::error::{Result, SimError};
use crate::reconstruction::{Channel, FlagMode, Path};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    /// Normalized transmit power P_T.
    pub tx_power: f64,
    pub noise_var: f64,
    pub bandwidth: f64,
}

impl LinkBudget {
    /// Unit transmit power with noise set by `P_T/σ_n²` in dB.
    pub fn from_snr_db(snr_db: f64, bandwidth: f64) -> Self {
        Self { tx_power: 1.0, noise_var: 10f64.powf(-snr_db / 10.0), bandwidth }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_power > 0.0 && self.noise_var > 0.0 && self.bandwidth > 0.0 {
            Ok(())
        } else {
            Err(SimError::Config(format!("link budget must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkResult {
    pub path: Option<usize>,
    pub signal: f64,
    pub interference: f64,
    pub sinr: f64,
    pub rate: f64,
}

impl LinkResult {
    fn silent() -> Self {
        Self { path: None, signal: 0.0, interference: 0.0, sinr: 0.0, rate: 0.0 }
    }
}

/// Index of the path with the largest `|flag·α|`; lowest index on ties.
pub fn strongest_path(paths: &[Path], mode: FlagMode) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in paths.iter().enumerate() {
        let m = if p.flag(mode) { p.gain.norm() } else { 0.0 };
        if m > 0.0 && best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Debug)]
pub struct Beamformers {
    /// `f = a_T(AoD)/√N_T`.
    pub tx: CVector,
    /// `w = a_ue^H(AoA)/√N_ue`, applied as a row vector.
    pub rx: CVector,
}

pub fn design_beamformers(path: &Path, uca: &UcaSpec, ula: &UlaSpec) -> Beamformers {
    let s = (uca.n_antennas as f64).sqrt();
    Beamformers { tx: uca_steering(path.aod, uca).mapv(|z| z / s), rx: ula_combiner(path.aoa, ula) }
}

/// `w·H·f`.
pub fn effective_gain(h: &Channel, rx: &CVector, tx: &CVector) -> Result<Complex64> {
    if h.ncols() != tx.len() || h.nrows() != rx.len() {
        return Err(SimError::Config(format!(
            "channel is {}x{}, beamformers are {} and {}",
            h.nrows(),
            h.ncols(),
            rx.len(),
            tx.len()
        )));
    }
    Ok(rx.dot(&h.dot(tx)))
}

/// `G[m][i] = |w_m H_m f_i|²` for all served pairs; rows and columns of
/// unserved UEs are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GainMatrix {
    pub served: Vec<Option<usize>>,
    pub gains: Vec<Vec<f64>>,
}

/// Beamformed gains through the true channels. `beams[m]` is the selected
/// path index and beamformers of UE m, if any.
pub fn gain_matrix(beams: &[Option<(usize, Beamformers)>], truth: &[Channel]) -> Result<GainMatrix> {
    if beams.len() != truth.len() {
        return Err(SimError::Config("one true channel per UE is required".into()));
    }
    let m = beams.len();
    let mut gains = vec![vec![0.0; m]; m];
    for mi in 0..m {
        let Some((_, bm)) = &beams[mi] else { continue };
        for (i, beam) in beams.iter().enumerate() {
            if let Some((_, bi)) = beam {
                gains[mi][i] = effective_gain(&truth[mi], &bm.rx, &bi.tx)?.norm_sqr();
            }
        }
    }
    Ok(GainMatrix { served: beams.iter().map(|b| b.as_ref().map(|(l, _)| *l)).collect(), gains })
}

fn link(path: Option<usize>, signal: f64, interference: f64, budget: &LinkBudget) -> LinkResult {
    if path.is_none() {
        return LinkResult::silent();
    }
    let sinr = signal / (interference + budget.noise_var);
    LinkResult { path, signal, interference, sinr, rate: budget.bandwidth * (1.0 + sinr).log2() }
}

fn interference(g: &GainMatrix, m: usize, tx_power: f64) -> f64 {
    (0..g.gains.len()).filter(|&i| i != m).map(|i| tx_power * g.gains[m][i]).sum()
}

/// SINR and rate of every UE with unit-power data symbols.
pub fn evaluate_links(g: &GainMatrix, budget: &LinkBudget) -> Result<Vec<LinkResult>> {
    budget.validate()?;
    Ok((0..g.gains.len())
        .map(|m| link(g.served[m], budget.tx_power * g.gains[m][m], interference(g, m, budget.tx_power), budget))
        .collect())
}

/// Closed-form rate: the desired term replaced by `|α|²P_T N_T N_ue` of the
/// selected path, interference kept exact.
pub fn evaluate_links_approx(
    g: &GainMatrix,
    selected_gain: &[Option<Complex64>],
    n_t: usize,
    n_ue: usize,
    budget: &LinkBudget,
) -> Result<Vec<LinkResult>> {
    budget.validate()?;
    if selected_gain.len() != g.gains.len() {
        return Err(SimError::Config("one selected gain per UE is required".into()));
    }
    let array_gain = (n_t * n_ue) as f64;
    Ok((0..g.gains.len())
        .map(|m| {
            let signal = selected_gain[m].map_or(0.0, |a| a.norm_sqr()) * budget.tx_power * array_gain;
            link(g.served[m], signal, interference(g, m, budget.tx_power), budget)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::BeamwidthProfile;
    use crate::geometry::Point2;
    use crate::reconstruction::{los_path, reconstruct_channel, PathKind, ReconParams, UeEstimate};

    const LAMBDA: f64 = 0.005;

    fn path(gain: f64, exists: bool) -> Path {
        Path {
            kind: PathKind::Los,
            exists,
            feedback: exists,
            aod: 0.3,
            aoa: 1.2,
            gain: Complex64::new(gain, 0.0),
            ue_aperture: 0.01,
            d_t: 1.0,
            d_r: 0.0,
            reflection_point: None,
        }
    }

    fn ue(x: f64, y: f64) -> UeEstimate {
        let p = Point2::new(x, y);
        UeEstimate { position: p, true_position: p, n_antennas: 16, orientation: 0.4 }
    }

    #[test]
    fn strongest_path_selection() {
        let mut nlos = path(0.4, true);
        nlos.kind = PathKind::Nlos(0);
        assert_eq!(strongest_path(&[path(0.9, true), nlos], FlagMode::Existence), Some(0));
        assert_eq!(strongest_path(&[path(0.9, false), path(0.4, false)], FlagMode::Existence), None);
        assert_eq!(strongest_path(&[path(0.4, false), path(0.4, true), path(0.4, true)], FlagMode::Existence), Some(1));
        let mut dropped = path(0.9, true);
        dropped.feedback = false;
        assert_eq!(strongest_path(&[dropped, nlos], FlagMode::Feedback), Some(1));
    }

    #[test]
    fn beamformer_norms() {
        let uca = UcaSpec::new(64, LAMBDA);
        let ula = UlaSpec { n_antennas: 16, wavelength: LAMBDA, orientation: 0.0 };
        let b = design_beamformers(&path(1.0, true), &uca, &ula);
        let nf: f64 = b.tx.iter().map(|z| z.norm_sqr()).sum();
        let nw: f64 = b.rx.iter().map(|z| z.norm_sqr()).sum();
        assert!((nf - 1.0).abs() < 1e-12 && (nw - 1.0).abs() < 1e-12);
        let resp = b.rx.dot(&crate::arrays::ula_steering(1.2, &ula));
        assert!((resp - Complex64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_user_rate_matches_closed_form() {
        let p = BeamwidthProfile::new(UcaSpec::new(64, LAMBDA));
        let params = ReconParams { beamwidth: &p, eta: 0.25 };
        let u = ue(3.0, 2.0);
        let los = los_path(&u, true, &params);
        let h = reconstruct_channel(&[los], &u, &params, FlagMode::Existence);
        let b = design_beamformers(&los, params.uca(), &u.ula(LAMBDA));
        assert!((effective_gain(&h, &b.rx, &b.tx).unwrap().norm() - los.gain.norm() * (64.0f64 * 16.0).sqrt()).abs() < 1e-9);
        let g = gain_matrix(&[Some((0, b))], &[h]).unwrap();
        let budget = LinkBudget::from_snr_db(10.0, 1e9);
        let r = evaluate_links(&g, &budget).unwrap();
        let want = 1e9 * (1.0 + los.gain.norm_sqr() * 64.0 * 16.0 / 0.1).log2();
        assert!((r[0].rate - want).abs() / want < 1e-10);
        let approx = evaluate_links_approx(&g, &[Some(los.gain)], 64, 16, &budget).unwrap();
        assert!((approx[0].rate - want).abs() / want < 1e-10);
    }

    #[test]
    fn unserved_user_gets_nothing() {
        let h = Channel::zeros((16, 64));
        let g = gain_matrix(&[None], &[h]).unwrap();
        let r = evaluate_links(&g, &LinkBudget::from_snr_db(0.0, 1e9)).unwrap();
        assert_eq!(r[0].rate, 0.0);
        assert!(r[0].path.is_none());
    }

    #[test]
    fn separated_users_barely_interfere() {
        let p = BeamwidthProfile::new(UcaSpec::new(256, LAMBDA));
        let params = ReconParams { beamwidth: &p, eta: 0.25 };
        let users = [ue(4.0, 0.5), ue(-1.0, 4.0)];
        let mut beams = Vec::new();
        let mut truth = Vec::new();
        for u in &users {
            let los = los_path(u, true, &params);
            truth.push(reconstruct_channel(&[los], u, &params, FlagMode::Existence));
            beams.push(Some((0, design_beamformers(&los, params.uca(), &u.ula(LAMBDA)))));
        }
        let g = gain_matrix(&beams, &truth).unwrap();
        for m in 0..2 {
            assert!(g.gains[m][1 - m] < 0.01 * g.gains[m][m]);
        }
    }

    #[test]
    fn rate_is_monotone_in_snr() {
        let g = GainMatrix { served: vec![Some(0), Some(0)], gains: vec![vec![4.0, 0.3], vec![0.2, 2.0]] };
        let mut last = [0.0; 2];
        for snr in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            let r = evaluate_links(&g, &LinkBudget::from_snr_db(snr, 1e9)).unwrap();
            for m in 0..2 {
                assert!(r[m].rate >= last[m]);
                last[m] = r[m].rate;
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let h = Channel::zeros((16, 64));
        let tx = CVector::zeros(32);
        let rx = CVector::zeros(16);
        assert!(matches!(effective_gain(&h, &rx, &tx), Err(SimError::Config(_))));
    }
}
