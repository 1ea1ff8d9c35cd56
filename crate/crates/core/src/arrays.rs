//! Antenna arrays: the AP's uniform circular array (UCA), the UE's uniform
//! linear array (ULA), beam patterns and half-power beamwidths.

use std::f64::consts::{PI, TAU};

use ndarray::Array1;
use num_complex::Complex64;

pub type CVector = Array1<Complex64>;

/// Uniform circular array. Entry `n` sits at azimuth `2πn/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UcaSpec {
    pub n_antennas: usize,
    pub radius: f64,
    pub wavelength: f64,
}

impl UcaSpec {
    /// Array with aperture `2r = Nλ/π`.
    pub fn new(n_antennas: usize, wavelength: f64) -> Self {
        Self {
            n_antennas,
            radius: n_antennas as f64 * wavelength / TAU,
            wavelength,
        }
    }

    /// Two-dimensional aperture `A = 2r`.
    pub fn aperture(&self) -> f64 {
        2.0 * self.radius
    }

    fn wavenumber_radius(&self) -> f64 {
        TAU / self.wavelength * self.radius
    }
}

/// Uniform linear array with one-wavelength element spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UlaSpec {
    pub n_antennas: usize,
    pub wavelength: f64,
    pub orientation: f64,
}

impl UlaSpec {
    /// Effective two-dimensional aperture for a ray arriving at `aoa`
    /// (relative to the array axis): `λ + (N-1)λ|sin aoa|`.
    pub fn effective_aperture(&self, aoa: f64) -> f64 {
        self.wavelength + (self.n_antennas as f64 - 1.0) * self.wavelength * aoa.sin().abs()
    }
}

pub fn uca_steering(theta: f64, spec: &UcaSpec) -> CVector {
    let kr = spec.wavenumber_radius();
    let n = spec.n_antennas as f64;
    Array1::from_shape_fn(spec.n_antennas, |i| {
        Complex64::from_polar(1.0, kr * (theta - TAU * i as f64 / n).cos())
    })
}

/// ULA steering vector, entry `n` = `exp(-j 2π n cos θ)`.
pub fn ula_steering(theta: f64, spec: &UlaSpec) -> CVector {
    let c = theta.cos();
    Array1::from_shape_fn(spec.n_antennas, |i| Complex64::from_polar(1.0, -TAU * i as f64 * c))
}

/// Normalized UCA beam pattern `|a^H(θ_k) a(θ) / N|²`.
pub fn uca_pattern(theta_k: f64, theta: f64, spec: &UcaSpec) -> f64 {
    let kr = spec.wavenumber_radius();
    let n = spec.n_antennas as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..spec.n_antennas {
        let phi = TAU * i as f64 / n;
        acc += Complex64::from_polar(1.0, kr * ((theta - phi).cos() - (theta_k - phi).cos()));
    }
    (acc / n).norm_sqr()
}

/// Normalized ULA pattern `|a^H(θ_0) a(θ) / N|²`, a Dirichlet kernel in cos θ.
pub fn ula_pattern(theta_0: f64, theta: f64, spec: &UlaSpec) -> f64 {
    let n = spec.n_antennas as f64;
    let psi = PI * (theta.cos() - theta_0.cos());
    let s = psi.sin();
    if s.abs() < 1e-12 {
        return 1.0;
    }
    ((n * psi).sin() / (n * s)).powi(2)
}

/// Offset from `center` at which `pattern` first drops below 1/2 when moving
/// in direction `sign`, found by a coarse outward scan followed by bisection.
fn half_power_edge(pattern: impl Fn(f64) -> f64, step: f64, max_offset: f64, tol: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = step;
    while pattern(hi) >= 0.5 {
        lo = hi;
        hi += step;
        if hi >= max_offset {
            return max_offset;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pattern(mid) >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Width of the contiguous interval around `theta_k` where the UCA pattern
/// stays at or above half power.
pub fn half_power_beamwidth(theta_k: f64, spec: &UcaSpec) -> f64 {
    // the main lobe is about 2.25/N wide and its first null near 2.4/N out
    let step = 0.1 / spec.n_antennas.max(1) as f64;
    let up = half_power_edge(|d| uca_pattern(theta_k, theta_k + d, spec), step, PI / 2.0, 1e-9);
    let down = half_power_edge(|d| uca_pattern(theta_k, theta_k - d, spec), step, PI / 2.0, 1e-9);
    up + down
}

/// Main-lobe half-power width of the ULA around `theta_0`.
pub fn ula_half_power_beamwidth(theta_0: f64, spec: &UlaSpec) -> f64 {
    let step = 0.05 / spec.n_antennas.max(1) as f64;
    let up = half_power_edge(|d| ula_pattern(theta_0, theta_0 + d, spec), step, PI, 1e-9);
    let down = half_power_edge(|d| ula_pattern(theta_0, theta_0 - d, spec), step, PI, 1e-9);
    up + down
}

/// Whether `theta` lies inside the ULA's half-power main lobe steered to
/// `theta_0`.
pub fn ula_within_main_lobe(theta_0: f64, theta: f64, spec: &UlaSpec) -> bool {
    if ula_pattern(theta_0, theta, spec) < 0.5 {
        return false;
    }
    // Reject grating lobes: the pattern must stay above half power on the
    // whole way from theta_0 to theta.
    let d = crate::geometry::wrap_angle_diff(theta, theta_0);
    let steps = ((d.abs() * spec.n_antennas as f64 / 0.05).ceil() as usize).max(1);
    (1..steps).all(|i| ula_pattern(theta_0, theta_0 + d * i as f64 / steps as f64, spec) >= 0.5)
}

/// `a_T(θ)/√N_T`.
pub fn conjugate_tx_beamformer(theta: f64, spec: &UcaSpec) -> CVector {
    uca_steering(theta, spec) / Complex64::new((spec.n_antennas as f64).sqrt(), 0.0)
}

/// `a_R^H(θ)/√N_R` as a row vector.
pub fn conjugate_rx_combiner(theta: f64, spec: &UcaSpec) -> CVector {
    let s = (spec.n_antennas as f64).sqrt();
    uca_steering(theta, spec).mapv(|z| z.conj() / s)
}

/// `a_ue^H(θ)/√N_ue` as a row vector.
pub fn ula_combiner(theta: f64, spec: &UlaSpec) -> CVector {
    let s = (spec.n_antennas as f64).sqrt();
    ula_steering(theta, spec).mapv(|z| z.conj() / s)
}

/// Half-power beamwidth of a UCA at an arbitrary steering angle.
///
/// Steering the UCA by `2π/N` only permutes its elements and mirroring the
/// angle does the same, so the width is even and periodic with period
/// `2π/N`. It is tabulated over half a period and interpolated linearly.
#[derive(Clone, Debug)]
pub struct BeamwidthProfile {
    spec: UcaSpec,
    half_period: f64,
    table: Vec<f64>,
}

const PROFILE_SAMPLES: usize = 64;

impl BeamwidthProfile {
    pub fn new(spec: UcaSpec) -> Self {
        let half_period = PI / spec.n_antennas as f64;
        let table = (0..=PROFILE_SAMPLES)
            .map(|i| half_power_beamwidth(half_period * i as f64 / PROFILE_SAMPLES as f64, &spec))
            .collect();
        Self { spec, half_period, table }
    }

    pub fn spec(&self) -> &UcaSpec {
        &self.spec
    }

    /// W(θ, N).
    pub fn at(&self, theta: f64) -> f64 {
        let period = 2.0 * self.half_period;
        let mut t = theta.rem_euclid(period);
        if t > self.half_period {
            t = period - t;
        }
        let x = t / self.half_period * PROFILE_SAMPLES as f64;
        let i = (x.floor() as usize).min(PROFILE_SAMPLES - 1);
        let f = x - i as f64;
        self.table[i] * (1.0 - f) + self.table[i + 1] * f
    }

    pub fn min_max(&self) -> (f64, f64) {
        let min = self.table.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.table.iter().copied().fold(0.0, f64::max);
        (min, max)
    }
}

/// Beamwidths `W(θ_k, N_T)` of the K probing directions, computed once per
/// `(N_T, K)` configuration.
#[derive(Clone, Debug)]
pub struct ProbeBeamwidths {
    pub values: Vec<f64>,
}

impl ProbeBeamwidths {
    pub fn new(directions: &[f64], spec: &UcaSpec) -> Self {
        Self {
            values: crate::exec::map_indexed(directions.len(), |i| {
                half_power_beamwidth(directions[i], spec)
            }),
        }
    }

    /// Width for probe index `i` (0-based).
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}
