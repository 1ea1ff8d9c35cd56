//! From probing results to reflective surfaces: included angles, material
//! lookup, target clustering and surface forming with corner pairing.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use crate::arrays::{ProbeBeamwidths, UcaSpec};
use crate::error::{Result, SimError};
use crate::geometry::{line_intersection, Line2, Point2, Segment2};
use crate::reconstruction::{Reflector, SurfaceSet};
use crate::scene::MaterialTable;
use crate::sensing::{monostatic_weights, Target, SPEED_OF_LIGHT};

/// Orthogonality threshold on unit direction vectors for corner pairing.
pub const ORTHOGONALITY_EPS: f64 = 1e-3;

/// Angle at `T_k` in the triangle formed with the AP and `T_{k+1}`.
/// `None` when either delay is not finite.
pub fn included_angle(tau_k: f64, tau_k1: f64, delta_theta: f64) -> Option<f64> {
    if !(tau_k.is_finite() && tau_k1.is_finite() && tau_k > 0.0 && tau_k1 > 0.0) {
        return None;
    }
    let c = delta_theta.cos();
    let side = (tau_k * tau_k + tau_k1 * tau_k1 - 2.0 * tau_k * tau_k1 * c).sqrt();
    if side == 0.0 {
        return None;
    }
    Some(((tau_k - tau_k1 * c) / side).clamp(-1.0, 1.0).acos())
}

/// Inputs of the material lookup shared by every target.
#[derive(Clone, Copy, Debug)]
pub struct PerceptionParams<'a> {
    pub table: &'a MaterialTable,
    pub eta: f64,
    pub zeta: f64,
    pub uca: &'a UcaSpec,
    pub widths: &'a ProbeBeamwidths,
    /// Fit surface lines to all cluster members instead of the two ends.
    pub least_squares: bool,
}

/// Table position of the material that best explains `|α|²`, or `None`
/// when even the best residual exceeds `zeta`. Ties go to the lowest index.
#[allow(clippy::too_many_arguments)]
pub fn estimate_reflectance(
    tau: f64,
    phi_in: f64,
    alpha_mag: f64,
    table: &MaterialTable,
    eta: f64,
    zeta: f64,
    beamwidth: f64,
    radius: f64,
) -> Option<usize> {
    if !tau.is_finite() || tau <= 0.0 || table.is_empty() {
        return None;
    }
    let (beta, gamma) = monostatic_weights(phi_in, SPEED_OF_LIGHT * tau, beamwidth, radius);
    let power = alpha_mag * alpha_mag;
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in table.entries().iter().enumerate() {
        let r = (power - eta * (beta * m.specular + gamma * m.diffuse)).abs();
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((i, r));
        }
    }
    best.filter(|&(_, r)| r <= zeta).map(|(i, _)| i)
}

/// Consecutive targets attributed to one surface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    /// Target indices in angular order; may wrap from K-1 to 0.
    pub members: Vec<usize>,
    /// Table position of the label.
    pub label: usize,
}

impl Cluster {
    pub fn first(&self) -> usize {
        self.members[0]
    }

    pub fn last(&self) -> usize {
        *self.members.last().expect("clusters have at least two members")
    }
}

/// Per-target intermediate values, kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub angles: Vec<Option<f64>>,
    pub estimates: Vec<Option<usize>>,
}

struct Lookup<'a, 'p> {
    targets: &'a [Target],
    params: &'a PerceptionParams<'p>,
}

impl Lookup<'_, '_> {
    fn reflectance(&self, k: usize, phi_in: f64) -> Option<usize> {
        let t = &self.targets[k];
        estimate_reflectance(
            t.tau,
            phi_in,
            t.alpha.norm(),
            self.params.table,
            self.params.eta,
            self.params.zeta,
            self.params.widths.get(k),
            self.params.uca.radius,
        )
    }
}

/// Group targets into clusters by comparing their material estimates with
/// those of their neighbours.
///
/// A target may also join its predecessor's cluster when the lookup repeated
/// with the incidence angle carried over from the predecessor matches. That
/// re-estimate is never stored.
pub fn cluster_targets(targets: &[Target], params: &PerceptionParams<'_>) -> Result<Clustering> {
    let k_total = targets.len();
    if k_total < 3 {
        return Err(SimError::Config("clustering needs at least 3 targets".into()));
    }
    if params.table.is_empty() {
        return Err(SimError::Config("empty material table".into()));
    }
    if params.widths.values.len() != k_total {
        return Err(SimError::Config("beamwidth table does not match the target count".into()));
    }
    let dtheta = std::f64::consts::TAU / k_total as f64;
    let lookup = Lookup { targets, params };
    let angles: Vec<Option<f64>> = (0..k_total)
        .map(|k| included_angle(targets[k].tau, targets[(k + 1) % k_total].tau, dtheta))
        .collect();
    let estimates: Vec<Option<usize>> = crate::exec::map_indexed(k_total, |k| {
        angles[k].and_then(|v| lookup.reflectance(k, v - FRAC_PI_2))
    });

    // whether T_next belongs with T_k
    let flag = |k: usize, next: usize| -> bool {
        let Some(label) = estimates[k] else { return false };
        if estimates[next] == Some(label) {
            return true;
        }
        angles[k].is_some_and(|v| lookup.reflectance(next, v + dtheta - FRAC_PI_2) == Some(label))
    };

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; k_total];
    for k in 0..k_total - 1 {
        if !flag(k, k + 1) {
            continue;
        }
        match owner[k] {
            Some(c) => {
                clusters[c].members.push(k + 1);
                owner[k + 1] = Some(c);
            }
            None => {
                let label = estimates[k].expect("flag implies an estimate");
                clusters.push(Cluster { members: vec![k, k + 1], label });
                owner[k] = Some(clusters.len() - 1);
                owner[k + 1] = Some(clusters.len() - 1);
            }
        }
    }

    // wrap-around between the last and the first target
    let tail = k_total - 1;
    let head = 0;
    if estimates[tail].is_some() && estimates[tail] == estimates[head] {
        match (owner[tail], owner[head]) {
            (Some(a), Some(b)) if a != b => {
                let moved = std::mem::take(&mut clusters[b].members);
                clusters[a].members.extend(moved);
                clusters.remove(b);
            }
            (Some(_), Some(_)) => {}
            (Some(a), None) => clusters[a].members.push(head),
            (None, Some(b)) => clusters[b].members.insert(0, tail),
            (None, None) => clusters.push(Cluster {
                members: vec![tail, head],
                label: estimates[tail].expect("checked above"),
            }),
        }
    } else if owner[head].is_none() && flag(tail, head) {
        match owner[tail] {
            Some(a) => clusters[a].members.push(head),
            None => clusters.push(Cluster {
                members: vec![tail, head],
                label: estimates[tail].expect("flag implies an estimate"),
            }),
        }
    }
    Ok(Clustering { clusters, angles, estimates })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Visible,
    Supplementary,
}

impl SurfaceKind {
    fn as_str(self) -> &'static str {
        match self {
            SurfaceKind::Visible => "visible",
            SurfaceKind::Supplementary => "supplementary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerceivedSurface {
    pub kind: SurfaceKind,
    pub line: Line2,
    /// Endpoints in angular order as seen from the AP.
    pub p1: Point2,
    pub p2: Point2,
    /// Table position of the estimated material.
    pub material: usize,
}

impl PerceivedSurface {
    pub fn segment(&self) -> Segment2 {
        Segment2::on_line(self.p1, self.p2, self.line).oriented_ccw()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionResult {
    pub visible: Vec<PerceivedSurface>,
    pub supplementary: Vec<PerceivedSurface>,
    pub clustering: Option<Clustering>,
}

/// Line through the cluster members: through the two end members, or the
/// orthogonal least-squares fit with the ends projected onto it.
fn cluster_line(points: &[Point2], least_squares: bool) -> Option<(Line2, Point2, Point2)> {
    let first = points[0];
    let last = *points.last()?;
    if !least_squares || points.len() < 3 {
        return Line2::through(first, last).map(|l| (l, first, last));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Point2::ORIGIN, |acc, &p| acc + p).scale(1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &p in points {
        let d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // principal axis of the scatter matrix
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = Point2::new(angle.cos(), angle.sin());
    let project = |p: Point2| mean + dir.scale((p - mean).dot(dir));
    let (a, b) = (project(first), project(last));
    Line2::through(a, b).map(|l| (l, a, b))
}

fn unit(v: Point2) -> Point2 {
    v.scale(1.0 / v.norm())
}

/// Turn clusters into surfaces and add the hidden faces of objects whose
/// two visible faces meet at a right angle.
pub fn form_surfaces(clustering: Clustering, targets: &[Target], least_squares: bool) -> PerceptionResult {
    let mut ordered: Vec<&Cluster> = clustering.clusters.iter().collect();
    ordered.sort_by_key(|c| c.first());

    let mut visible: Vec<PerceivedSurface> = Vec::with_capacity(ordered.len());
    for c in ordered {
        let points: Vec<Point2> = c.members.iter().map(|&k| targets[k].position()).collect();
        if let Some((line, p1, p2)) = cluster_line(&points, least_squares) {
            visible.push(PerceivedSurface { kind: SurfaceKind::Visible, line, p1, p2, material: c.label });
        }
    }

    let n = visible.len();
    let mut supplementary = Vec::new();
    let mut end_snapped = vec![false; n];
    let mut start_snapped = vec![false; n];
    if n >= 2 {
        for l in 0..n {
            let m = (l + 1) % n;
            if end_snapped[l] || start_snapped[m] {
                continue;
            }
            let (sl, sm) = (visible[l], visible[m]);
            let dl = sl.p2 - sl.p1;
            let dm = sm.p2 - sm.p1;
            if unit(dl).dot(unit(dm)).abs() >= ORTHOGONALITY_EPS {
                continue;
            }
            let Some(ip) = line_intersection(&sl.line, &sm.line) else { continue };
            // a convex corner faces the AP; wall corners seen from inside fail
            if ip.dot(dl) >= 0.0 {
                continue;
            }
            let far_l = sl.line.parallel_through(sm.p2);
            let far_m = sm.line.parallel_through(sl.p1);
            let Some(ip_far) = line_intersection(&far_l, &far_m) else { continue };
            supplementary.push(PerceivedSurface {
                kind: SurfaceKind::Supplementary,
                line: far_l,
                p1: ip_far,
                p2: sm.p2,
                material: sl.material,
            });
            supplementary.push(PerceivedSurface {
                kind: SurfaceKind::Supplementary,
                line: far_m,
                p1: sl.p1,
                p2: ip_far,
                material: sm.material,
            });
            visible[l].p2 = ip;
            visible[m].p1 = ip;
            end_snapped[l] = true;
            start_snapped[m] = true;
        }
    }
    PerceptionResult { visible, supplementary, clustering: Some(clustering) }
}

/// Clustering followed by surface forming.
pub fn perceive(targets: &[Target], params: &PerceptionParams<'_>) -> Result<PerceptionResult> {
    let clustering = cluster_targets(targets, params)?;
    Ok(form_surfaces(clustering, targets, params.least_squares))
}

impl PerceptionResult {
    /// Reflectors for ray tracing, with the estimated material properties.
    pub fn surface_set(&self, table: &MaterialTable) -> SurfaceSet {
        let to_reflector = |s: &PerceivedSurface| {
            let m = table.get(s.material);
            Reflector::new(s.segment(), m.specular, m.diffuse, m.phase, Some(s.material))
        };
        SurfaceSet::new(
            self.visible.iter().map(to_reflector).collect(),
            self.supplementary.iter().map(to_reflector).collect(),
        )
    }

    /// One surface per line: `kind a b x1 y1 x2 y2 material_index`, with
    /// `a = inf` and `b` the x-intercept for vertical lines.
    pub fn to_text(&self, table: &MaterialTable) -> String {
        let mut out = String::from("# kind a b x1 y1 x2 y2 material\n");
        for s in self.visible.iter().chain(&self.supplementary) {
            let (a, b) = s.line.coefficients();
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                s.kind.as_str(),
                a,
                b,
                s.p1.x,
                s.p1.y,
                s.p2.x,
                s.p2.y,
                table.get(s.material).index
            );
        }
        out
    }

    pub fn from_text(text: &str, table: &MaterialTable) -> Result<PerceptionResult> {
        let mut visible = Vec::new();
        let mut supplementary = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| SimError::Parse { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(perr(format!("expected 8 fields, found {}", fields.len())));
            }
            let kind = match fields[0] {
                "visible" => SurfaceKind::Visible,
                "supplementary" => SurfaceKind::Supplementary,
                other => return Err(perr(format!("unknown surface kind `{other}`"))),
            };
            let v: Vec<f64> = fields[1..7]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| perr(e.to_string())))
                .collect::<Result<_>>()?;
            let index: usize = fields[7].parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?;
            let material = table
                .entries()
                .iter()
                .position(|m| m.index == index)
                .ok_or_else(|| perr(format!("unknown material index {index}")))?;
            let surface = PerceivedSurface {
                kind,
                line: Line2::from_coefficients(v[0], v[1]),
                p1: Point2::new(v[2], v[3]),
                p2: Point2::new(v[4], v[5]),
                material,
            };
            match kind {
                SurfaceKind::Visible => visible.push(surface),
                SurfaceKind::Supplementary => supplementary.push(surface),
            }
        }
        Ok(PerceptionResult { visible, supplementary, clustering: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Material, MaterialTable, RectObject, Scene, SceneConfig, SurfaceOwner, TrueSurface};
    use crate::sensing::{self, FmcwParams, ProbeSetup};
    use std::f64::consts::{PI, TAU};

    const LAMBDA: f64 = 0.005;

    #[test]
    fn isoceles_included_angle() {
        let dt = 0.02;
        let v = included_angle(1e-8, 1e-8, dt).unwrap();
        assert!((v - (FRAC_PI_2 - dt / 2.0)).abs() < 1e-12);
        assert!(included_angle(f64::INFINITY, 1e-8, dt).is_none());
    }

    #[test]
    fn included_angle_on_wall_gives_incidence() {
        // wall x = d, targets at angles t and t + Δθ
        let d = 4.0;
        let dt = 0.01;
        for t in [-0.7, -0.2, 0.0, 0.3, 0.9] {
            let r1: f64 = d / f64::cos(t);
            let r2: f64 = d / f64::cos(t + dt);
            let v = included_angle(r1 / SPEED_OF_LIGHT, r2 / SPEED_OF_LIGHT, dt).unwrap();
            // the ray at angle t meets the wall normal (-1, 0) at incidence t
            assert!((v - FRAC_PI_2 - t).abs() < 1e-9, "t={t}: {}", v - FRAC_PI_2);
        }
    }

    #[test]
    fn degenerate_triangle_limits() {
        let v = included_angle(2e-8, 1e-8, 1e-9).unwrap();
        assert!(v.abs() < 1e-6);
        let v = included_angle(1e-8, 2e-8, 1e-9).unwrap();
        assert!((v - PI).abs() < 1e-6);
    }

    fn synth_alpha(phi: f64, d: f64, w: f64, r: f64, m: &Material) -> f64 {
        let (b, g) = monostatic_weights(phi, d, w, r);
        (0.25 * (b * m.specular + g * m.diffuse)).sqrt()
    }

    #[test]
    fn reflectance_round_trip() {
        let table = MaterialTable::reference();
        let uca = UcaSpec::new(128, LAMBDA);
        let (phi, d, w) = (0.2, 4.0, 0.017);
        for pos in 0..table.len() {
            let a = synth_alpha(phi, d, w, uca.radius, table.get(pos));
            let got = estimate_reflectance(d / SPEED_OF_LIGHT, phi, a, &table, 0.25, 5e-7, w, uca.radius);
            assert_eq!(got, Some(pos));
        }
        let none = estimate_reflectance(d / SPEED_OF_LIGHT, phi, 0.0, &table, 0.25, 5e-7, w, uca.radius);
        assert_eq!(none, None);
    }

    #[test]
    fn reflectance_ties_go_to_lowest_index() {
        // two entries with the same weighted power at this geometry
        let (phi, d, w, r) = (0.3, 5.0, 0.01, 0.1);
        let (b, g) = monostatic_weights(phi, d, w, r);
        let m1 = Material { index: 1, specular: 0.2, diffuse: 0.5, phase: 1.0 };
        let rs2 = 0.3;
        let rd2 = (b * m1.specular + g * m1.diffuse - b * rs2) / g;
        assert!(rd2 > 0.0 && rd2 < 1.0, "{rd2}");
        let m2 = Material { index: 2, specular: rs2, diffuse: rd2, phase: 2.0 };
        let m3 = Material { index: 3, specular: 0.9, diffuse: 0.9, phase: 3.0 };
        let table = MaterialTable::new(vec![m3, m1, m2]).unwrap();
        let power = 0.25 * (b * m1.specular + g * m1.diffuse);
        let residuals: Vec<f64> = [m1, m2]
            .iter()
            .map(|m| (power - 0.25 * (b * m.specular + g * m.diffuse)).abs())
            .collect();
        let got = estimate_reflectance(d / SPEED_OF_LIGHT, phi, power.sqrt(), &table, 0.25, 1e-3, w, r).unwrap();
        if residuals[0] == residuals[1] {
            assert_eq!(got, 1);
        } else {
            let want = if residuals[0] < residuals[1] { 1 } else { 2 };
            assert_eq!(got, want);
        }
    }

    struct Synthetic {
        scene: Scene,
        surfaces: Vec<TrueSurface>,
        uca: UcaSpec,
        widths: ProbeBeamwidths,
        targets: Vec<Target>,
    }

    fn synth(surfaces: Vec<TrueSurface>, materials: MaterialTable, n_t: usize, k: usize) -> Synthetic {
        let scene = Scene {
            config: SceneConfig::default(),
            objects: vec![],
            wall_material: materials.wall(),
            materials,
            seed: 0,
        };
        let uca = UcaSpec::new(n_t, LAMBDA);
        let dirs = sensing::probe_directions(k).unwrap();
        let widths = ProbeBeamwidths::new(&dirs, &uca);
        let fmcw = FmcwParams::default();
        let setup = ProbeSetup { uca: &uca, fmcw: &fmcw, eta: 0.25 };
        let targets = sensing::sweep(&scene, &surfaces, &dirs, &widths, &setup).unwrap();
        Synthetic { scene, surfaces, uca, widths, targets }
    }

    fn seg(a: (f64, f64), b: (f64, f64), material: usize) -> TrueSurface {
        TrueSurface {
            segment: Segment2::new(Point2::new(a.0, a.1), Point2::new(b.0, b.1)).unwrap().oriented_ccw(),
            material,
            owner: SurfaceOwner::Wall(0),
        }
    }

    fn perceive_synth(s: &Synthetic) -> PerceptionResult {
        let params = PerceptionParams {
            table: &s.scene.materials,
            eta: 0.25,
            zeta: 5e-7,
            uca: &s.uca,
            widths: &s.widths,
            least_squares: false,
        };
        perceive(&s.targets, &params).unwrap()
    }

    /// Index of the true surface each target's centre ray hit.
    fn hit_surface(s: &Synthetic, k: usize) -> usize {
        sensing::first_hit(&s.surfaces, s.targets[k].theta).unwrap().0
    }

    #[test]
    fn collinear_targets_form_one_cluster() {
        // a closed square room whose walls all share material 0 except one
        let walls = vec![
            seg((5.0, -5.0), (5.0, 5.0), 0),
            seg((5.0, 5.0), (-5.0, 5.0), 1),
            seg((-5.0, 5.0), (-5.0, -5.0), 2),
            seg((-5.0, -5.0), (5.0, -5.0), 3),
        ];
        let s = synth(walls, MaterialTable::reference(), 128, 64);
        let r = perceive_synth(&s);
        let c = r.clustering.as_ref().unwrap();
        assert_eq!(c.clusters.len(), 4, "{:?}", c.clusters);
        for cl in &c.clusters {
            let owner = hit_surface(&s, cl.first());
            assert!(cl.members.iter().all(|&k| hit_surface(&s, k) == owner));
            assert_eq!(cl.label, s.surfaces[owner].material);
        }
        assert!(r.supplementary.is_empty());
        // the wall at x = 5 straddles θ = 0 and is joined across the cut
        let right = c.clusters.iter().find(|cl| hit_surface(&s, cl.first()) == 0).unwrap();
        assert!(right.members.contains(&63) && right.members.contains(&0));
    }

    #[test]
    fn three_targets_on_a_wall() {
        // the AP sees only one narrow wall between two far ones: three beams
        let table = MaterialTable::reference();
        let k = 64;
        let dt = TAU / k as f64;
        let r = 3.0;
        let (t0, t2) = (dt * 9.5, dt * 12.5);
        let p = |t: f64| (r * t.cos(), r * t.sin());
        let near = seg(p(t0 - 1e-4), p(t2 + 1e-4), 2);
        let walls = vec![
            near,
            seg((30.0, -30.0), (30.0, 30.0), 0),
            seg((30.0, 30.0), (-30.0, 30.0), 1),
            seg((-30.0, 30.0), (-30.0, -30.0), 3),
            seg((-30.0, -30.0), (30.0, -30.0), 4),
        ];
        let s = synth(walls, table, 256, k);
        let r = perceive_synth(&s);
        let c = r.clustering.unwrap();
        let on_near: Vec<&Cluster> = c.clusters.iter().filter(|cl| hit_surface(&s, cl.first()) == 0).collect();
        assert_eq!(on_near.len(), 1);
        assert_eq!(on_near[0].members, vec![9, 10, 11]);
    }

    #[test]
    fn box_corner_is_snapped_with_supplementary_faces() {
        // axis-aligned box with two faces visible from the AP
        let mut table: Vec<Material> = MaterialTable::reference().entries().to_vec();
        table[0] = Material { index: 1, specular: 0.15, diffuse: 0.85, phase: 1.0 };
        let table = MaterialTable::new(table).unwrap();
        let obj = RectObject { center: Point2::new(3.5, 2.5), length: 2.0, width: 2.0, tilt: 0.0, material: 0 };
        let mut surfaces: Vec<TrueSurface> = Vec::new();
        let c = obj.corners();
        for i in 0..4 {
            surfaces.push(TrueSurface {
                segment: Segment2::new(c[i], c[(i + 1) % 4]).unwrap().oriented_ccw(),
                material: 0,
                owner: SurfaceOwner::Object { object: 0, side: i },
            });
        }
        for w in [
            seg((7.5, -5.0), (7.5, 10.0), 5),
            seg((7.5, 10.0), (-12.5, 10.0), 5),
            seg((-12.5, 10.0), (-12.5, -5.0), 5),
            seg((-12.5, -5.0), (7.5, -5.0), 5),
        ] {
            surfaces.push(w);
        }
        let s = synth(surfaces, table, 256, 1024);
        let r = perceive_synth(&s);
        // 4 walls + 2 box faces
        assert_eq!(r.visible.len(), 6, "{:?}", r.visible);
        assert_eq!(r.supplementary.len(), 2);
        let corner = Point2::new(2.5, 1.5);
        assert!(r.visible.iter().any(|v| v.p2.dist(corner) < 1e-6));
        assert!(r.visible.iter().any(|v| v.p1.dist(corner) < 1e-6));
        // the hidden faces lie near the true far faces; they pass through the
        // outermost kept target, which stops short of the far corner
        let far_top = Line2::Sloped { a: 0.0, b: 3.5 };
        let far_right = Line2::Vertical { x: 4.5 };
        for sup in &r.supplementary {
            let on_top = far_top.distance(sup.p1) < 0.2 && far_top.distance(sup.p2) < 0.2;
            let on_right = far_right.distance(sup.p1) < 0.2 && far_right.distance(sup.p2) < 0.2;
            assert!(on_top || on_right, "{sup:?}");
        }
        // each supplementary line is parallel to the face that generated it
        let dirs: Vec<f64> = r.supplementary.iter().map(|s| s.line.direction_angle()).collect();
        assert!(dirs.iter().any(|d| d.abs() < 1e-6) && dirs.iter().any(|d| (d - PI / 2.0).abs() < 1e-6));
    }

    #[test]
    fn wall_only_room_has_no_supplementary_surfaces() {
        let scene = Scene {
            config: SceneConfig::default(),
            objects: vec![],
            wall_material: 5,
            materials: MaterialTable::reference(),
            seed: 0,
        };
        let surfaces = crate::scene::true_front_surfaces(&scene);
        let s = synth(surfaces, MaterialTable::reference(), 256, 512);
        let r = perceive_synth(&s);
        assert_eq!(r.visible.len(), 4);
        assert!(r.supplementary.is_empty());
        // perceived lines coincide with the true walls
        for v in &r.visible {
            let on_wall = s.surfaces.iter().any(|t| t.segment.line.distance(v.p1) < 1e-6 && t.segment.line.distance(v.p2) < 1e-6);
            assert!(on_wall);
        }
    }

    #[test]
    fn single_surface_is_not_paired() {
        let mut targets = Vec::new();
        let k = 16;
        for i in 0..k {
            let theta = (i + 1) as f64 / k as f64 * TAU;
            targets.push(Target::discarded(i, theta));
        }
        for t in &mut targets[2..5] {
            t.tau = 3.0 / t.theta.cos().abs() / SPEED_OF_LIGHT;
            t.valid = true;
        }
        let clustering = Clustering {
            clusters: vec![Cluster { members: vec![2, 3, 4], label: 0 }],
            angles: vec![None; k],
            estimates: vec![None; k],
        };
        let r = form_surfaces(clustering, &targets, false);
        assert_eq!(r.visible.len(), 1);
        assert!(r.supplementary.is_empty());
        assert_eq!(r.visible[0].p1, targets[2].position());
    }

    #[test]
    fn least_squares_recovers_exact_line() {
        let pts: Vec<Point2> = (0..10).map(|i| Point2::new(1.0 + i as f64 * 0.1, 2.0 + 0.5 * (1.0 + i as f64 * 0.1))).collect();
        let (line, a, b) = cluster_line(&pts, true).unwrap();
        assert!(line.distance(pts[4]) < 1e-12);
        assert!(a.dist(pts[0]) < 1e-12 && b.dist(pts[9]) < 1e-12);
    }

    #[test]
    fn perception_text_round_trip() {
        let table = MaterialTable::reference();
        let r = PerceptionResult {
            visible: vec![PerceivedSurface {
                kind: SurfaceKind::Visible,
                line: Line2::Vertical { x: 7.5 },
                p1: Point2::new(7.5, -5.0),
                p2: Point2::new(7.5, 10.0),
                material: 5,
            }],
            supplementary: vec![PerceivedSurface {
                kind: SurfaceKind::Supplementary,
                line: Line2::Sloped { a: 0.25, b: -1.0 / 3.0 },
                p1: Point2::new(1.0, 0.1),
                p2: Point2::new(2.0, 0.2),
                material: 0,
            }],
            clustering: None,
        };
        let text = r.to_text(&table);
        assert!(text.contains("visible inf 7.5 7.5 -5 7.5 10 6"));
        let back = PerceptionResult::from_text(&text, &table).unwrap();
        assert_eq!(back, r);
        assert!(PerceptionResult::from_text("bogus 1 2 3 4 5 6 1", &table).is_err());
    }
}
