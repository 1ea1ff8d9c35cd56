//! FMCW probing: the beam sweep, echo formation under the Phong reflection
//! model, the multi-surface discard rule and beat-to-delay conversion.
//!
//! Measurements are exact. The beat frequency of each echo is synthesized
//! from the true delay and converted back, so the FMCW arithmetic is
//! exercised without modelling the waveform.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::arrays::{ProbeBeamwidths, UcaSpec};
use crate::error::{Result, SimError};
use crate::geometry::{ray_hits_segment, Point2};
use crate::scene::{Material, Scene, TrueSurface};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FmcwParams {
    pub carrier_hz: f64,
    /// Chirp slope f′ in Hz/s.
    pub chirp_rate: f64,
    pub chirp_duration: f64,
    pub tx_power: f64,
}

impl Default for FmcwParams {
    fn default() -> Self {
        Self { carrier_hz: 60e9, chirp_rate: 1e13, chirp_duration: 1e-4, tx_power: 1.0 }
    }
}

impl FmcwParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0 && self.chirp_rate > 0.0 && self.chirp_duration > 0.0) {
            return Err(SimError::Config("FMCW parameters must be positive".into()));
        }
        // the sweep has to stay narrow relative to the carrier
        if self.chirp_rate * self.chirp_duration > 0.1 * self.carrier_hz {
            return Err(SimError::Config(format!(
                "chirp sweeps {} Hz, too wide for a {} Hz carrier",
                self.chirp_rate * self.chirp_duration,
                self.carrier_hz
            )));
        }
        Ok(())
    }
}

/// One probing result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    /// 0-based probe index; probe `k` points at `2π(k+1)/K`.
    pub k: usize,
    pub theta: f64,
    /// One-way delay in seconds, `+inf` when discarded.
    pub tau: f64,
    pub alpha: Complex64,
    pub valid: bool,
}

impl Target {
    pub fn discarded(k: usize, theta: f64) -> Self {
        Self { k, theta, tau: f64::INFINITY, alpha: Complex64::new(0.0, 0.0), valid: false }
    }

    /// Reflection point `(cτ cos θ, cτ sin θ)`.
    pub fn position(&self) -> Point2 {
        Point2::polar(SPEED_OF_LIGHT * self.tau, self.theta)
    }
}

/// Bistatic reflection geometry. Angles are measured from the surface
/// normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionGeometry {
    pub phi_in: f64,
    pub phi_r: f64,
    pub d_t: f64,
    pub d_r: f64,
    /// Transmit beamwidth W.
    pub beamwidth: f64,
    /// Receive aperture A.
    pub aperture: f64,
    pub eta: f64,
}

impl ReflectionGeometry {
    /// Collocated transmitter and receiver at distance `d`.
    pub fn monostatic(phi_in: f64, d: f64, beamwidth: f64, uca: &UcaSpec, eta: f64) -> Self {
        Self { phi_in, phi_r: phi_in, d_t: d, d_r: d, beamwidth, aperture: uca.aperture(), eta }
    }

    fn check(&self) -> Result<()> {
        let half = FRAC_PI_2;
        let ok = self.phi_in.abs() < half
            && self.phi_r.abs() < half
            && self.d_t > 0.0
            && self.d_r > 0.0
            && self.beamwidth > 0.0
            && self.aperture > 0.0
            && self.eta > 0.0
            && self.eta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Domain(format!("invalid reflection geometry {self:?}")))
        }
    }

    /// Bounds `(D_1, D_2)` of the specular illumination footprint in units
    /// of `D_R`.
    pub fn footprint(&self) -> (f64, f64) {
        let spread = self.beamwidth * (self.d_t + self.d_r);
        ((self.aperture - spread) / (2.0 * self.d_r), (self.aperture + spread) / (2.0 * self.d_r))
    }
}

/// Share of the specular lobe captured by the receive aperture, before η
/// and R_s: one when the aperture covers the whole footprint, zero once the
/// mirror direction misses the aperture.
pub fn specular_capture(g: &ReflectionGeometry) -> f64 {
    let (d1, d2) = g.footprint();
    let offset = (g.phi_in + g.phi_r).abs().min(d2.atan()).tan();
    ((d2 - offset.max(d1.abs())) / (d2 - d1)).max(0.0)
}

/// `sin(ω/2)` for the angle ω the aperture subtends at the reflection point.
pub fn diffuse_capture(g: &ReflectionGeometry) -> f64 {
    g.aperture / (4.0 * g.d_r * g.d_r + g.aperture * g.aperture).sqrt()
}

/// P_re,s / P_in.
pub fn specular_power_fraction(g: &ReflectionGeometry, m: &Material) -> f64 {
    g.eta * specular_capture(g) * m.specular
}

/// Normalizing constant of the Lambert diffuse lobe.
pub const DIFFUSE_NORMALIZATION: f64 = 0.5;

/// Diffuse power per unit reflection angle, relative to P_in, for outgoing
/// angle `phi` measured from the normal.
pub fn diffuse_density(phi: f64, phi_in: f64, eta: f64, diffuse: f64) -> f64 {
    if phi.abs() > FRAC_PI_2 {
        return 0.0;
    }
    DIFFUSE_NORMALIZATION * eta * phi_in.cos() * phi.cos() * diffuse
}

/// P_re,d / P_in.
pub fn diffuse_power_fraction(g: &ReflectionGeometry, m: &Material) -> f64 {
    g.eta * g.phi_in.cos() * g.phi_r.cos() * diffuse_capture(g) * m.diffuse
}

/// Complex reflection coefficient of a single-bounce reflection.
pub fn reflection_coefficient(g: &ReflectionGeometry, m: &Material, wavelength: f64) -> Result<Complex64> {
    g.check()?;
    let power = specular_power_fraction(g, m) + diffuse_power_fraction(g, m);
    let propagation = TAU * (g.d_t + g.d_r) / wavelength;
    let phase = -(m.phase - propagation);
    if !power.is_finite() || !phase.is_finite() || power < 0.0 {
        return Err(SimError::Numeric(format!("reflection power {power}, phase {phase}")));
    }
    Ok(Complex64::from_polar(power.sqrt(), phase))
}

/// Monostatic decomposition `|α|² = η(β R_s + γ R_d)` for an echo with
/// one-way distance `d`.
pub fn monostatic_weights(phi_in: f64, d: f64, beamwidth: f64, radius: f64) -> (f64, f64) {
    let d1 = radius / d - beamwidth;
    let d2 = radius / d + beamwidth;
    let offset = (2.0 * phi_in).abs().min(d2.atan()).tan();
    let beta = (d2 - offset.max(d1.abs())) / (d2 - d1);
    let c = phi_in.cos();
    let gamma = c * c * radius / (d * d + radius * radius).sqrt();
    (beta, gamma)
}

/// The K probing directions `2πk/K`, k = 1..K.
pub fn probe_directions(k: usize) -> Result<Vec<f64>> {
    if k < 3 {
        return Err(SimError::Config(format!("need at least 3 probing beams, got {k}")));
    }
    Ok((1..=k).map(|i| i as f64 / k as f64 * TAU).collect())
}

/// Delay from a measured beat frequency.
pub fn beat_to_delay(beat_hz: f64, chirp_rate: f64) -> f64 {
    beat_hz / (2.0 * chirp_rate)
}

/// Beat frequency of an echo delayed by `2τ`.
pub fn delay_to_beat(tau: f64, chirp_rate: f64) -> f64 {
    2.0 * chirp_rate * tau
}

/// First surface hit by a ray from the AP, with its distance.
pub fn first_hit(surfaces: &[TrueSurface], angle: f64) -> Option<(usize, Point2, f64)> {
    let mut best: Option<(usize, Point2, f64)> = None;
    for (i, s) in surfaces.iter().enumerate() {
        if let Some((p, d)) = ray_hits_segment(Point2::ORIGIN, angle, &s.segment) {
            if d > 0.0 && best.is_none_or(|b| d < b.2) {
                best = Some((i, p, d));
            }
        }
    }
    best
}

/// Signed incidence angle from the normal at `hit` on `surface`, for an echo
/// returning to the AP.
pub fn incidence_angle(surface: &TrueSurface, hit: Point2) -> f64 {
    let e = surface.segment.p2 - surface.segment.p1;
    let to_ap = Point2::ORIGIN - hit;
    let cos = e.dot(to_ap) / (e.norm() * to_ap.norm());
    cos.clamp(-1.0, 1.0).acos() - FRAC_PI_2
}

/// Everything a probe needs besides the scene.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSetup<'a> {
    pub uca: &'a UcaSpec,
    pub fmcw: &'a FmcwParams,
    pub eta: f64,
}

/// One probe. The beam is kept only if its centre and both half-power edge
/// rays first hit the same surface.
pub fn simulate_probe(
    scene: &Scene,
    surfaces: &[TrueSurface],
    k: usize,
    theta: f64,
    beamwidth: f64,
    setup: &ProbeSetup<'_>,
) -> Result<Target> {
    let (idx, hit, dist) = first_hit(surfaces, theta)
        .ok_or_else(|| SimError::Simulation(format!("probe at {theta} rad hits nothing")))?;
    for edge in [theta - 0.5 * beamwidth, theta + 0.5 * beamwidth] {
        match first_hit(surfaces, edge) {
            Some((j, _, _)) if j == idx => {}
            _ => return Ok(Target::discarded(k, theta)),
        }
    }
    let surface = &surfaces[idx];
    let phi_in = incidence_angle(surface, hit);
    let geometry = ReflectionGeometry::monostatic(phi_in, dist, beamwidth, setup.uca, setup.eta);
    let alpha = reflection_coefficient(&geometry, scene.material(surface.material), setup.uca.wavelength)?;
    let beat = delay_to_beat(dist / SPEED_OF_LIGHT, setup.fmcw.chirp_rate);
    let tau = beat_to_delay(beat, setup.fmcw.chirp_rate);
    Ok(Target { k, theta, tau, alpha, valid: true })
}

/// The whole K-beam sweep, ordered by probe index.
pub fn sweep(
    scene: &Scene,
    surfaces: &[TrueSurface],
    directions: &[f64],
    widths: &ProbeBeamwidths,
    setup: &ProbeSetup<'_>,
) -> Result<Vec<Target>> {
    if widths.values.len() != directions.len() {
        return Err(SimError::Config("beamwidth table does not match the probe count".into()));
    }
    crate::exec::map_indexed(directions.len(), |k| {
        simulate_probe(scene, surfaces, k, directions[k], widths.get(k), setup)
    })
    .into_iter()
    .collect()
}

pub fn targets_to_csv(targets: &[Target]) -> String {
    let mut out = String::from("k,theta_rad,tau_s,alpha_re,alpha_im,valid\n");
    for t in targets {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.k + 1,
            t.theta,
            t.tau,
            t.alpha.re,
            t.alpha.im,
            u8::from(t.valid)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment2;
    use crate::scene::{MaterialTable, SceneConfig, SurfaceOwner};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    const LAMBDA: f64 = 0.005;

    fn mat(rs: f64, rd: f64) -> Material {
        Material { index: 1, specular: rs, diffuse: rd, phase: 2.0 }
    }

    fn geometry(phi_in: f64, phi_r: f64, d_t: f64, d_r: f64, w: f64, a: f64) -> ReflectionGeometry {
        ReflectionGeometry { phi_in, phi_r, d_t, d_r, beamwidth: w, aperture: a, eta: 0.25 }
    }

    #[test]
    fn probe_direction_examples() {
        let d = probe_directions(4).unwrap();
        let expected = [PI / 2.0, PI, 1.5 * PI, TAU];
        assert!(d.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        let d = probe_directions(512).unwrap();
        assert_eq!(d.len(), 512);
        assert!(d.windows(2).all(|w| (w[1] - w[0] - TAU / 512.0).abs() < 1e-12));
        assert!(probe_directions(2).is_err());
    }

    #[test]
    fn beat_conversion_examples() {
        assert_eq!(beat_to_delay(0.0, 1e12), 0.0);
        assert!((beat_to_delay(1e5, 1e12) - 5e-8).abs() < 1e-22);
        let tau0 = 3.3e-8;
        assert!((beat_to_delay(delay_to_beat(tau0, 1e13), 1e13) - tau0).abs() < 1e-22);
    }

    #[test]
    fn specular_vanishes_outside_footprint() {
        let g = geometry(0.4, 0.3, 3.0, 2.0, 0.01, 0.05);
        let (_, d2) = g.footprint();
        assert!((0.7f64) >= d2.atan());
        let m = mat(0.5, 0.4);
        assert_eq!(specular_power_fraction(&g, &m), 0.0);
        let alpha = reflection_coefficient(&g, &m, LAMBDA).unwrap();
        let expected = 0.25 * 0.4f64.cos() * 0.3f64.cos() * 0.05 / (16.0 + 0.0025f64).sqrt() * 0.4;
        assert!((alpha.norm_sqr() - expected).abs() < 1e-15);
    }

    #[test]
    fn full_specular_capture_at_normal_incidence() {
        // A ≥ W(D_T + D_R)
        let g = geometry(0.0, 0.0, 2.0, 2.0, 0.01, 0.05);
        let m = mat(0.5, 0.4);
        let alpha = reflection_coefficient(&g, &m, LAMBDA).unwrap();
        let expected = 0.25 * (0.5 + 0.05 / (16.0 + 0.0025f64).sqrt() * 0.4);
        assert!((alpha.norm_sqr() - expected).abs() < 1e-15);
    }

    /// Partial overlap worked out from the footprint picture: the specular
    /// lobe lands on the receive plane between `D_R tan(φ_re−φ_R) ± W(D_T+D_R)/2`
    /// and the aperture covers `[-A/2, A/2]`.
    fn overlap_oracle(g: &ReflectionGeometry) -> f64 {
        let centre = g.d_r * (g.phi_in + g.phi_r).abs().tan();
        let half = 0.5 * g.beamwidth * (g.d_t + g.d_r);
        let lo = (centre - half).max(-0.5 * g.aperture);
        let hi = (centre + half).min(0.5 * g.aperture);
        let covered = (hi - lo).max(0.0);
        covered / (2.0 * half)
    }

    #[test]
    fn partial_overlap_matches_footprint_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut partial = 0;
        for _ in 0..20_000 {
            let g = geometry(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(0.5..5.0),
                rng.random_range(0.5..5.0),
                rng.random_range(0.005..0.05),
                rng.random_range(0.02..0.2),
            );
            let (d1, d2) = g.footprint();
            let got = specular_capture(&g);
            let want = overlap_oracle(&g);
            assert!((got - want).abs() < 1e-12, "{g:?}: {got} vs {want}");
            if got > 0.0 && got < (d2 - d1.abs()) / (d2 - d1) {
                partial += 1;
            }
        }
        assert!(partial > 100);
    }

    #[test]
    fn monostatic_matches_beta_gamma() {
        let uca = UcaSpec::new(128, LAMBDA);
        let m = mat(0.3286, 0.6464);
        for (phi, d, w) in [(0.0, 3.0, 0.017), (0.01, 6.0, 0.017), (0.6, 2.0, 0.02), (-0.3, 9.0, 0.01)] {
            let g = ReflectionGeometry::monostatic(phi, d, w, &uca, 0.25);
            let alpha = reflection_coefficient(&g, &m, LAMBDA).unwrap();
            // evaluated from the per-target definitions with A = 2r, D = d
            let r = uca.radius;
            let d1: f64 = r / d - w;
            let d2: f64 = r / d + w;
            let beta = (d2 - (2.0 * phi).abs().min(d2.atan()).tan().max(d1.abs())) / (d2 - d1);
            let gamma = phi.cos().powi(2) * r / (d * d + r * r).sqrt();
            let expected = 0.25 * (beta * m.specular + gamma * m.diffuse);
            assert!((alpha.norm_sqr() - expected).abs() < 1e-15);
            let (b2, g2) = monostatic_weights(phi, d, w, r);
            assert!((b2 - beta).abs() < 1e-15 && (g2 - gamma).abs() < 1e-15);
        }
    }

    #[test]
    fn power_equals_fraction_sum_and_phase_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let g = geometry(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.1..20.0),
                rng.random_range(0.1..20.0),
                rng.random_range(0.005..0.05),
                rng.random_range(0.02..0.2),
            );
            let m = Material { index: 1, specular: rng.random(), diffuse: rng.random(), phase: rng.random_range(0.01..6.2) };
            let a = reflection_coefficient(&g, &m, LAMBDA).unwrap();
            let sum = specular_power_fraction(&g, &m) + diffuse_power_fraction(&g, &m);
            assert!((a.norm_sqr() - sum).abs() < 1e-12);
            let spec = specular_power_fraction(&g, &m);
            assert!(spec >= 0.0 && spec <= g.eta * m.specular + 1e-15, "{g:?} {spec}");
            let want = -(m.phase - TAU * (g.d_t + g.d_r) / LAMBDA);
            assert!(crate::geometry::wrap_angle_diff(a.arg(), want).abs() < 1e-9);
        }
    }

    #[test]
    fn specular_is_continuous_at_case_boundary() {
        // case 1 ends where tan|φ_in+φ_R| reaches |D_1|
        let base = geometry(0.0, 0.0, 2.0, 3.0, 0.02, 0.04);
        let (d1, d2) = base.footprint();
        let edge = d1.abs().atan();
        let at = |x: f64| specular_capture(&ReflectionGeometry { phi_in: x / 2.0, phi_r: x / 2.0, ..base });
        assert!((at(edge - 1e-9) - at(edge + 1e-9)).abs() < 1e-7);
        assert!(at(d2.atan()).abs() < 1e-12);
        assert!(at(d2.atan() - 1e-9) > 0.0);
    }

    #[test]
    fn diffuse_surround_limit() {
        let g = geometry(0.3, 0.2, 1.0, 1e-9, 0.01, 0.1);
        let m = mat(0.5, 0.4);
        let want = 0.25 * 0.3f64.cos() * 0.2f64.cos() * 0.4;
        assert!((diffuse_power_fraction(&g, &m) - want).abs() < 1e-12);
    }

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn diffuse_density_integrates_to_lambert_power() {
        let total = simpson(-FRAC_PI_2, FRAC_PI_2, 20_000, |p| diffuse_density(p, 0.4, 0.25, 0.6));
        assert!((total - 0.25 * 0.6 * 0.4f64.cos()).abs() < 1e-10);
        // the captured window reproduces the closed form
        let g = geometry(0.4, 0.3, 2.0, 1.5, 0.01, 0.2);
        let m = mat(0.1, 0.6);
        let half = diffuse_capture(&g).asin();
        let window = simpson(0.3 - half, 0.3 + half, 20_000, |p| diffuse_density(p, 0.4, 0.25, 0.6));
        assert!((window - diffuse_power_fraction(&g, &m)).abs() < 1e-10);
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let g = geometry(1.6, 0.0, 1.0, 1.0, 0.01, 0.1);
        assert!(reflection_coefficient(&g, &mat(0.5, 0.5), LAMBDA).is_err());
    }

    fn wall_scene() -> (Scene, Vec<TrueSurface>) {
        let scene = Scene {
            config: SceneConfig::default(),
            objects: vec![],
            wall_material: 5,
            materials: MaterialTable::reference(),
            seed: 0,
        };
        let surfaces = crate::scene::true_front_surfaces(&scene);
        (scene, surfaces)
    }

    #[test]
    fn normal_incidence_on_wall_gives_distance_over_c() {
        let (scene, surfaces) = wall_scene();
        let uca = UcaSpec::new(64, LAMBDA);
        let fmcw = FmcwParams::default();
        let setup = ProbeSetup { uca: &uca, fmcw: &fmcw, eta: 0.25 };
        // the right wall is 7.5 m away along θ = 0
        let t = simulate_probe(&scene, &surfaces, 0, 0.0, 0.035, &setup).unwrap();
        assert!(t.valid);
        assert!((t.tau - 7.5 / SPEED_OF_LIGHT).abs() < 1e-20);
        let t = simulate_probe(&scene, &surfaces, 0, PI / 2.0, 0.035, &setup).unwrap();
        assert!((t.tau - 10.0 / SPEED_OF_LIGHT).abs() < 1e-20);
    }

    #[test]
    fn beam_straddling_two_surfaces_is_discarded() {
        let (mut scene, _) = wall_scene();
        scene.objects = vec![];
        let a = Segment2::new(Point2::new(3.0, -1.0), Point2::new(3.0, 0.001)).unwrap();
        let b = Segment2::new(Point2::new(3.0, 0.001), Point2::new(3.0, 1.0)).unwrap();
        let surfaces: Vec<TrueSurface> = [a, b]
            .iter()
            .enumerate()
            .map(|(i, s)| TrueSurface { segment: s.oriented_ccw(), material: 1, owner: SurfaceOwner::Object { object: 0, side: i } })
            .chain(crate::scene::true_front_surfaces(&scene))
            .collect();
        let uca = UcaSpec::new(64, LAMBDA);
        let fmcw = FmcwParams::default();
        let setup = ProbeSetup { uca: &uca, fmcw: &fmcw, eta: 0.25 };
        let t = simulate_probe(&scene, &surfaces, 3, 0.0, 0.035, &setup).unwrap();
        assert!(!t.valid);
        assert!(t.tau.is_infinite() && t.alpha.norm() == 0.0);
    }

    #[test]
    fn sweep_is_deterministic() {
        let (scene, surfaces) = wall_scene();
        let uca = UcaSpec::new(64, LAMBDA);
        let fmcw = FmcwParams::default();
        let setup = ProbeSetup { uca: &uca, fmcw: &fmcw, eta: 0.25 };
        let dirs = probe_directions(256).unwrap();
        let widths = ProbeBeamwidths::new(&dirs, &uca);
        let a = sweep(&scene, &surfaces, &dirs, &widths, &setup).unwrap();
        let b = sweep(&scene, &surfaces, &dirs, &widths, &setup).unwrap();
        assert_eq!(a, b);
        let diag = scene.room().diagonal() / SPEED_OF_LIGHT;
        assert!(a.iter().filter(|t| t.valid).all(|t| t.tau > 0.0 && t.tau <= diag));
        // only the four corner beams can straddle two walls
        assert!(a.iter().filter(|t| !t.valid).count() <= 8);
        let csv = targets_to_csv(&a);
        assert!(csv.starts_with("k,theta_rad,tau_s,alpha_re,alpha_im,valid\n"));
        assert_eq!(csv.lines().count(), 257);
    }

    #[test]
    fn fmcw_validation() {
        assert!(FmcwParams::default().validate().is_ok());
        let wide = FmcwParams { chirp_rate: 1e15, chirp_duration: 1e-3, ..FmcwParams::default() };
        assert!(matches!(wide.validate(), Err(SimError::Config(_))));
    }
}
