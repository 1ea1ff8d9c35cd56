//! Experiment configuration as flat `key = value` text.
//!
//! Lists are comma separated. `#` starts a comment. Unknown keys are
//! rejected so that a typo never silently falls back to a default.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::scene::SceneConfig;
use crate::sensing::{FmcwParams, SPEED_OF_LIGHT};

/// Channel reconstruction scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Perceived surfaces, paths weighted by existence indicators.
    ApCr,
    /// Perceived surfaces, paths weighted by UE feedback.
    ApCrf,
    /// True surfaces; the benchmark.
    ICr,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::ApCr, Scheme::ApCrf, Scheme::ICr];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ApCr => "AP-CR",
            Scheme::ApCrf => "AP-CRF",
            Scheme::ICr => "I-CR",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub carrier_hz: f64,
    pub wavelength: f64,
    pub bandwidth_hz: f64,
    pub chirp_rate: f64,
    pub chirp_duration: f64,
    pub k_list: Vec<usize>,
    pub n_t_list: Vec<usize>,
    pub eta: f64,
    pub zeta: f64,
    pub n_ues: usize,
    pub n_ue_antennas: usize,
    pub sigma_e_sq_list: Vec<f64>,
    pub tx_power: f64,
    pub schemes: Vec<Scheme>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub least_squares: bool,
    /// Rate sweep slice.
    pub rate_k: usize,
    pub rate_n_t_list: Vec<usize>,
    pub rate_sigma_e_sq_list: Vec<f64>,
    pub snr_db_list: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            carrier_hz: 60e9,
            wavelength: 0.005,
            bandwidth_hz: 1e9,
            chirp_rate: 1e13,
            chirp_duration: 1e-4,
            k_list: vec![256, 512, 1024],
            n_t_list: vec![64, 128, 256],
            eta: 0.25,
            zeta: 5e-7,
            n_ues: 10,
            n_ue_antennas: 32,
            sigma_e_sq_list: (0..=10).map(|i| f64::from(4 * i) / 10_000.0).collect(),
            tx_power: 1.0,
            schemes: vec![Scheme::ApCr, Scheme::ApCrf, Scheme::ICr],
            n_trials: 200,
            master_seed: 1,
            least_squares: false,
            rate_k: 512,
            rate_n_t_list: vec![64, 256],
            rate_sigma_e_sq_list: vec![0.0, 0.001],
            snr_db_list: (0..=8).map(|i| -10.0 + 5.0 * f64::from(i)).collect(),
        }
    }
}

/// Relative mismatch allowed between `wavelength` and `c/f_c`; the nominal
/// 5 mm differs from c/60 GHz by 0.07 %.
pub const WAVELENGTH_REL_TOL: f64 = 1e-3;

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn one<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            c.set(key.trim(), value.trim()).map_err(err)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "room_length" => self.scene.room_length = one(v)?,
            "room_width" => self.scene.room_width = one(v)?,
            "ap_from_left" => self.scene.ap_from_left = one(v)?,
            "ap_from_bottom" => self.scene.ap_from_bottom = one(v)?,
            "lambda_ppp" => self.scene.lambda_ppp = one(v)?,
            "max_object_length" => self.scene.max_object_length = one(v)?,
            "max_object_width" => self.scene.max_object_width = one(v)?,
            "ap_clearance" => self.scene.ap_clearance = one(v)?,
            "carrier_hz" => self.carrier_hz = one(v)?,
            "wavelength" => self.wavelength = one(v)?,
            "bandwidth_hz" => self.bandwidth_hz = one(v)?,
            "chirp_rate" => self.chirp_rate = one(v)?,
            "chirp_duration" => self.chirp_duration = one(v)?,
            "k_list" => self.k_list = list(v)?,
            "n_t_list" => self.n_t_list = list(v)?,
            "eta" => self.eta = one(v)?,
            "zeta" => self.zeta = one(v)?,
            "n_ues" => self.n_ues = one(v)?,
            "n_ue_antennas" => self.n_ue_antennas = one(v)?,
            "sigma_e_sq_list" => self.sigma_e_sq_list = list(v)?,
            "tx_power" => self.tx_power = one(v)?,
            "schemes" => self.schemes = list(v)?,
            "n_trials" => self.n_trials = one(v)?,
            "master_seed" => self.master_seed = one(v)?,
            "least_squares" => self.least_squares = one(v)?,
            "rate_k" => self.rate_k = one(v)?,
            "rate_n_t_list" => self.rate_n_t_list = list(v)?,
            "rate_sigma_e_sq_list" => self.rate_sigma_e_sq_list = list(v)?,
            "snr_db_list" => self.snr_db_list = list(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let s = &self.scene;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("room_length", s.room_length.to_string());
        kv("room_width", s.room_width.to_string());
        kv("ap_from_left", s.ap_from_left.to_string());
        kv("ap_from_bottom", s.ap_from_bottom.to_string());
        kv("lambda_ppp", s.lambda_ppp.to_string());
        kv("max_object_length", s.max_object_length.to_string());
        kv("max_object_width", s.max_object_width.to_string());
        kv("ap_clearance", s.ap_clearance.to_string());
        kv("carrier_hz", self.carrier_hz.to_string());
        kv("wavelength", self.wavelength.to_string());
        kv("bandwidth_hz", self.bandwidth_hz.to_string());
        kv("chirp_rate", self.chirp_rate.to_string());
        kv("chirp_duration", self.chirp_duration.to_string());
        kv("k_list", join(&self.k_list));
        kv("n_t_list", join(&self.n_t_list));
        kv("eta", self.eta.to_string());
        kv("zeta", self.zeta.to_string());
        kv("n_ues", self.n_ues.to_string());
        kv("n_ue_antennas", self.n_ue_antennas.to_string());
        kv("sigma_e_sq_list", join(&self.sigma_e_sq_list));
        kv("tx_power", self.tx_power.to_string());
        kv("schemes", join(&self.schemes));
        kv("n_trials", self.n_trials.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("least_squares", self.least_squares.to_string());
        kv("rate_k", self.rate_k.to_string());
        kv("rate_n_t_list", join(&self.rate_n_t_list));
        kv("rate_sigma_e_sq_list", join(&self.rate_sigma_e_sq_list));
        kv("snr_db_list", join(&self.snr_db_list));
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.fmcw().validate()?;
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.wavelength > 0.0) {
            return bad(format!("wavelength must be positive, got {}", self.wavelength));
        }
        let nominal = SPEED_OF_LIGHT / self.carrier_hz;
        if ((self.wavelength - nominal) / nominal).abs() > WAVELENGTH_REL_TOL {
            return bad(format!("wavelength {} does not match c/f_c = {nominal}", self.wavelength));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.zeta > 0.0) || !(self.bandwidth_hz > 0.0) || !(self.tx_power > 0.0) {
            return bad("zeta, bandwidth_hz and tx_power must be positive".into());
        }
        if self.k_list.iter().chain([&self.rate_k]).any(|&k| k < 3) {
            return bad("every K must be at least 3".into());
        }
        if self.n_t_list.iter().chain(&self.rate_n_t_list).any(|&n| n < 2) {
            return bad("every N_T must be at least 2".into());
        }
        if self.sigma_e_sq_list.iter().chain(&self.rate_sigma_e_sq_list).any(|&s| !(s >= 0.0 && s.is_finite())) {
            return bad("position error variances must be non-negative".into());
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        if self.n_ues == 0 || self.n_ue_antennas == 0 || self.n_trials == 0 {
            return bad("n_ues, n_ue_antennas and n_trials must be positive".into());
        }
        if self.k_list.is_empty() || self.n_t_list.is_empty() || self.sigma_e_sq_list.is_empty() || self.schemes.is_empty() {
            return bad("sweep lists must not be empty".into());
        }
        Ok(())
    }

    pub fn fmcw(&self) -> FmcwParams {
        FmcwParams {
            carrier_hz: self.carrier_hz,
            chirp_rate: self.chirp_rate,
            chirp_duration: self.chirp_duration,
            tx_power: self.tx_power,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_values() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_ues, 10);
        assert_eq!(c.n_ue_antennas, 32);
        assert_eq!(c.eta, 0.25);
        assert_eq!(c.zeta, 5e-7);
        assert_eq!(c.scene.lambda_ppp, 0.015);
        assert_eq!(c.sigma_e_sq_list.len(), 11);
        assert!((c.sigma_e_sq_list[10] - 0.004).abs() < 1e-15);
        assert_eq!(c.snr_db_list.first(), Some(&-10.0));
        assert_eq!(c.snr_db_list.last(), Some(&30.0));
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let c = ExperimentConfig {
            k_list: vec![64],
            schemes: vec![Scheme::ApCrf],
            master_seed: 77,
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(ExperimentConfig::parse("eta = 0.2\nbogus = 1\n"), Err(SimError::Parse { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("n_ues 3"), Err(SimError::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("k_list = 64, x"), Err(SimError::Parse { .. })));
        assert!(matches!(ExperimentConfig::parse("wavelength = 0.006"), Err(SimError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("schemes = AP-XYZ"), Err(SimError::Parse { .. })));
        let c = ExperimentConfig::parse("# comment\n  n_trials = 5  # five\nschemes = ap-crf, I-CR\n").unwrap();
        assert_eq!(c.n_trials, 5);
        assert_eq!(c.schemes, vec![Scheme::ApCrf, Scheme::ICr]);
    }
}
