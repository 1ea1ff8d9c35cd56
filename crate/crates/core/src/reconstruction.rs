//! Channel reconstruction by ray tracing over known or perceived surfaces:
//! line-of-sight and single-bounce paths, their gains, the channel matrix and
//! the feedback flags reported by the UE.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;

use crate::arrays::{uca_steering, ula_steering, ula_within_main_lobe, BeamwidthProfile, UcaSpec, UlaSpec};
use crate::geometry::{mirror_point, range_between, theta, AngularRange, Line2, Point2, Segment2};
use crate::scene::UeTruth;

/// `N_ue × N_T` channel matrix.
pub type Channel = Array2<Complex64>;

/// A surface as used by the ray tracer, with the material it is believed to
/// have.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reflector {
    /// Endpoints ordered counter-clockwise as seen from the AP.
    pub segment: Segment2,
    pub range: AngularRange,
    pub specular: f64,
    pub diffuse: f64,
    pub phase: f64,
    /// Table position of the material, when known.
    pub material: Option<usize>,
}

impl Reflector {
    pub fn new(segment: Segment2, specular: f64, diffuse: f64, phase: f64, material: Option<usize>) -> Self {
        let segment = segment.oriented_ccw();
        let range = range_between(theta(segment.p1), theta(segment.p2));
        Self { segment, range, specular, diffuse, phase, material }
    }

    pub fn line(&self) -> &Line2 {
        &self.segment.line
    }
}

/// Surfaces that can reflect (visible) and surfaces that only block
/// (supplementary).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceSet {
    pub visible: Vec<Reflector>,
    pub supplementary: Vec<Reflector>,
}

impl SurfaceSet {
    pub fn new(visible: Vec<Reflector>, supplementary: Vec<Reflector>) -> Self {
        Self { visible, supplementary }
    }

    /// Visible surfaces first, then supplementary ones.
    pub fn all(&self) -> impl Iterator<Item = &Reflector> {
        self.visible.iter().chain(&self.supplementary)
    }

    pub fn len(&self) -> usize {
        self.visible.len() + self.supplementary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The AP's view of a UE: the reported position and the known array. The
/// true position is carried along because path gains are defined on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UeEstimate {
    pub position: Point2,
    pub true_position: Point2,
    pub n_antennas: usize,
    pub orientation: f64,
}

impl UeEstimate {
    pub fn exact(ue: &UeTruth) -> Self {
        Self::with_offset(ue, Point2::ORIGIN)
    }

    pub fn with_offset(ue: &UeTruth, offset: Point2) -> Self {
        Self {
            position: ue.position + offset,
            true_position: ue.position,
            n_antennas: ue.n_antennas,
            orientation: ue.orientation,
        }
    }

    pub fn ula(&self, wavelength: f64) -> UlaSpec {
        UlaSpec { n_antennas: self.n_antennas, wavelength, orientation: self.orientation }
    }
}

/// AP-side constants for path gains.
#[derive(Clone, Copy, Debug)]
pub struct ReconParams<'a> {
    pub beamwidth: &'a BeamwidthProfile,
    pub eta: f64,
}

impl ReconParams<'_> {
    pub fn uca(&self) -> &UcaSpec {
        self.beamwidth.spec()
    }

    pub fn wavelength(&self) -> f64 {
        self.uca().wavelength
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Los,
    /// Reflection off the visible surface with this index.
    Nlos(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    /// Existence indicator I.
    pub exists: bool,
    /// Feedback flag F; equals `exists` until feedback is applied.
    pub feedback: bool,
    pub aod: f64,
    pub aoa: f64,
    /// Zero when the path does not exist.
    pub gain: Complex64,
    pub ue_aperture: f64,
    /// AP to reflection point, or AP to UE for the direct path.
    pub d_t: f64,
    /// Reflection point to UE; zero for the direct path.
    pub d_r: f64,
    pub reflection_point: Option<Point2>,
}

impl Path {
    pub fn flag(&self, mode: FlagMode) -> bool {
        match mode {
            FlagMode::Existence => self.exists,
            FlagMode::Feedback => self.feedback,
        }
    }
}

/// Which indicator weights the paths: I (AP-CR) or F (AP-CRF).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlagMode {
    Existence,
    Feedback,
}

/// Whether `s` cuts the segment from the AP to `p`.
pub fn blocks_from_ap(s: &Reflector, p: Point2) -> bool {
    s.range.contains(theta(p)) && s.line().ray_parameter(p).is_some_and(|t| t.abs() < 1.0)
}

/// Whether `s` cuts the segment from `ue` to `re`: the crossing with the
/// carrier line must lie inside the surface's angular range and strictly
/// between both ends.
pub fn blocks_leg(s: &Reflector, ue: Point2, re: Point2) -> bool {
    let f_ue = s.line().residual(ue);
    let f_re = s.line().residual(re);
    let den = f_ue - f_re;
    if den == 0.0 {
        return false;
    }
    if !((f_re / den).abs() < 1.0 && (f_ue / den).abs() < 1.0) {
        return false;
    }
    let ip = ue + (re - ue).scale(f_ue / den);
    s.range.contains(theta(ip))
}

/// Direct-path indicator: no visible surface lies between the AP and the
/// reported UE position.
pub fn los_existence(surfaces: &SurfaceSet, ue: &UeEstimate) -> bool {
    !surfaces.visible.iter().any(|s| blocks_from_ap(s, ue.position))
}

fn wavelength_phase(distance: f64, wavelength: f64) -> f64 {
    TAU * distance / wavelength
}

/// Direct path parameters. Angles follow the reported position, the gain
/// the true distance.
pub fn los_path(ue: &UeEstimate, exists: bool, params: &ReconParams<'_>) -> Path {
    let lambda = params.wavelength();
    let aod = theta(ue.position);
    let aoa = (aod - ue.orientation + PI).rem_euclid(TAU);
    let aperture = ue.ula(lambda).effective_aperture(aoa);
    let d = ue.true_position.norm();
    let gain = if exists {
        let mag = (aperture / (params.beamwidth.at(aod) * d)).min(1.0).sqrt();
        Complex64::from_polar(mag, wavelength_phase(d, lambda))
    } else {
        Complex64::new(0.0, 0.0)
    };
    Path {
        kind: PathKind::Los,
        exists,
        feedback: exists,
        aod,
        aoa,
        gain,
        ue_aperture: aperture,
        d_t: d,
        d_r: 0.0,
        reflection_point: None,
    }
}

/// Reflection point on visible surface `l` if the specular path through it
/// exists: the mirror image projects into the surface, and neither leg is
/// cut by another surface.
pub fn nlos_existence(l: usize, surfaces: &SurfaceSet, ue: &UeEstimate) -> Option<Point2> {
    let s = &surfaces.visible[l];
    let mirror = mirror_point(ue.position, s.line());
    if !s.range.contains(theta(mirror)) {
        return None;
    }
    let t = s.line().ray_parameter(mirror)?;
    if !(t.abs() < 1.0) {
        return None;
    }
    let re = mirror.scale(t);
    let blocked = surfaces
        .all()
        .enumerate()
        .filter(|&(n, _)| n != l)
        .any(|(_, other)| blocks_leg(other, ue.position, re) || blocks_from_ap(other, re));
    (!blocked).then_some(re)
}

/// Parameters of the path via surface `l`; `reflection` is the point found
/// by [`nlos_existence`], `None` when the path does not exist.
pub fn nlos_path(l: usize, surfaces: &SurfaceSet, ue: &UeEstimate, reflection: Option<Point2>, params: &ReconParams<'_>) -> Path {
    let s = &surfaces.visible[l];
    let lambda = params.wavelength();
    let mirror = mirror_point(ue.position, s.line());
    let psi = s.line().direction_angle();
    let aod = theta(mirror);
    let aoa = (2.0 * psi - aod - ue.orientation + PI).rem_euclid(TAU);
    let aperture = ue.ula(lambda).effective_aperture(aoa);
    let mut path = Path {
        kind: PathKind::Nlos(l),
        exists: reflection.is_some(),
        feedback: reflection.is_some(),
        aod,
        aoa,
        gain: Complex64::new(0.0, 0.0),
        ue_aperture: aperture,
        d_t: 0.0,
        d_r: 0.0,
        reflection_point: reflection,
    };
    if let Some(re) = reflection {
        let d_t = re.norm();
        let d_r = re.dist(ue.true_position);
        let specular = (aperture / (params.beamwidth.at(aod) * (d_t + d_r))).min(1.0) * s.specular;
        let grazing = (psi - aod).sin();
        let diffuse = grazing * grazing * aperture / (4.0 * d_r * d_r + aperture * aperture).sqrt() * s.diffuse;
        let mag = (params.eta * (specular + diffuse)).sqrt();
        path.gain = Complex64::from_polar(mag, -(s.phase - wavelength_phase(d_t + d_r, lambda)));
        path.d_t = d_t;
        path.d_r = d_r;
    }
    path
}

/// The direct path followed by one candidate path per visible surface.
pub fn trace_paths(surfaces: &SurfaceSet, ue: &UeEstimate, params: &ReconParams<'_>) -> Vec<Path> {
    let mut paths = Vec::with_capacity(surfaces.visible.len() + 1);
    paths.push(los_path(ue, los_existence(surfaces, ue), params));
    for l in 0..surfaces.visible.len() {
        let re = nlos_existence(l, surfaces, ue);
        paths.push(nlos_path(l, surfaces, ue, re, params));
    }
    paths
}

/// `Σ flag·α·a_ue(AoA)·a_T^H(AoD)`.
pub fn reconstruct_channel(paths: &[Path], ue: &UeEstimate, params: &ReconParams<'_>, mode: FlagMode) -> Channel {
    let uca = params.uca();
    let ula = ue.ula(uca.wavelength);
    let mut h = Channel::zeros((ue.n_antennas, uca.n_antennas));
    for p in paths.iter().filter(|p| p.flag(mode) && p.gain.norm() > 0.0) {
        let rx = ula_steering(p.aoa, &ula).mapv(|z| z * p.gain);
        let tx = uca_steering(p.aod, uca);
        for (i, r) in rx.iter().enumerate() {
            for (j, t) in tx.iter().enumerate() {
                h[[i, j]] += r * t.conj();
            }
        }
    }
    h
}

/// Feedback flags: a path keeps F = 1 only if it exists and the UE actually
/// receives something inside its half-power main lobe steered to the path's
/// arrival angle.
pub fn compute_feedback(paths: &mut [Path], truth: &[Path], ula: &UlaSpec) {
    for p in paths.iter_mut() {
        p.feedback = p.exists && truth.iter().any(|t| t.exists && ula_within_main_lobe(p.aoa, t.aoa, ula));
    }
}

/// `‖Ĥ − H‖² / ‖H‖²`; `None` when `H = 0`.
pub fn normalized_error(estimate: &Channel, truth: &Channel) -> Option<f64> {
    let den: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return None;
    }
    let num: f64 = estimate.iter().zip(truth.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Some(num / den)
}

pub const PATHS_CSV_HEADER: &str = "ue,kind,l,I,F,aod_rad,aoa_rad,gain_abs,gain_arg,d_t_m,d_r_m";

/// Rows of the path dump for one UE.
pub fn paths_to_csv_rows(ue_index: usize, paths: &[Path], out: &mut String) {
    for p in paths {
        let (kind, l) = match p.kind {
            PathKind::Los => ("los", 0),
            PathKind::Nlos(l) => ("nlos", l + 1),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            ue_index,
            kind,
            l,
            u8::from(p.exists),
            u8::from(p.feedback),
            p.aod,
            p.aoa,
            p.gain.norm(),
            p.gain.arg(),
            p.d_t,
            p.d_r
        );
    }
}
