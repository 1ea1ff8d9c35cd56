//! Ground truth: the room, its rectangular objects, the material table, user
//! placement and the perfect-information channel used as the benchmark.

use std::fmt::Write as _;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Result, SimError};
use crate::geometry::{Point2, Segment2};
use crate::reconstruction::{
    self, Channel, Path, ReconParams, Reflector, SurfaceSet, UeEstimate,
};

/// Reflection properties of one material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// 1-based index as listed in the table file.
    pub index: usize,
    pub specular: f64,
    pub diffuse: f64,
    /// Phase shift Φ_re in `(0, 2π)`.
    pub phase: f64,
}

/// Materials known in advance. The last entry is the wall material; the
/// others are assigned to objects.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialTable {
    entries: Vec<Material>,
}

impl MaterialTable {
    pub fn new(entries: Vec<Material>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(SimError::Config(
                "material table needs at least one object material and a wall material".into(),
            ));
        }
        for (i, m) in entries.iter().enumerate() {
            if !(m.specular > 0.0 && m.specular < 1.0 && m.diffuse > 0.0 && m.diffuse < 1.0) {
                return Err(SimError::Config(format!("material {} reflectance out of (0,1)", m.index)));
            }
            if !(m.phase > 0.0 && m.phase < TAU) {
                return Err(SimError::Config(format!("material {} phase out of (0,2π)", m.index)));
            }
            for other in &entries[..i] {
                if other.specular == m.specular && other.diffuse == m.diffuse {
                    return Err(SimError::Config(format!(
                        "materials {} and {} have identical reflectance",
                        other.index, m.index
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// The six-entry reference table; entry 6 is the wall.
    pub fn reference() -> Self {
        let rows = [
            (0.6606, 0.6781, 2.6134),
            (0.3286, 0.6464, 2.2530),
            (0.5233, 0.9288, 1.1897),
            (0.2865, 0.2412, 4.3408),
            (0.8745, 0.3547, 4.7810),
            (0.5736, 0.3262, 2.4454),
        ];
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, &(specular, diffuse, phase))| Material { index: i + 1, specular, diffuse, phase })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[Material] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of the wall material.
    pub fn wall(&self) -> usize {
        self.entries.len() - 1
    }

    /// Number of materials objects are drawn from.
    pub fn object_materials(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn get(&self, pos: usize) -> &Material {
        &self.entries[pos]
    }

    /// Parse whitespace-separated `index R_s R_d Φ_re` rows; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(SimError::Parse {
                    line: lineno + 1,
                    msg: format!("expected 4 columns, found {}", fields.len()),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>().map_err(|e| SimError::Parse { line: lineno + 1, msg: e.to_string() })
            };
            let index = fields[0]
                .parse::<usize>()
                .map_err(|e| SimError::Parse { line: lineno + 1, msg: e.to_string() })?;
            entries.push(Material {
                index,
                specular: num(fields[1])?,
                diffuse: num(fields[2])?,
                phase: num(fields[3])?,
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# index R_s R_d phi_re\n");
        for m in &self.entries {
            let _ = writeln!(out, "{} {} {} {}", m.index, m.specular, m.diffuse, m.phase);
        }
        out
    }
}

/// Parameters of the random indoor scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub room_length: f64,
    pub room_width: f64,
    /// AP distance from the left wall.
    pub ap_from_left: f64,
    /// AP distance from the bottom wall.
    pub ap_from_bottom: f64,
    pub lambda_ppp: f64,
    pub max_object_length: f64,
    pub max_object_width: f64,
    /// Objects closer than this to the AP are redrawn.
    pub ap_clearance: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_length: 20.0,
            room_width: 15.0,
            ap_from_left: 12.5,
            ap_from_bottom: 5.0,
            lambda_ppp: 0.015,
            max_object_length: 5.0,
            max_object_width: 5.0,
            ap_clearance: 0.25,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.room_length, "room_length")?;
        pos(self.room_width, "room_width")?;
        pos(self.lambda_ppp, "lambda_ppp")?;
        pos(self.max_object_length, "max_object_length")?;
        pos(self.max_object_width, "max_object_width")?;
        if !(self.ap_from_left > 0.0 && self.ap_from_left < self.room_length)
            || !(self.ap_from_bottom > 0.0 && self.ap_from_bottom < self.room_width)
        {
            return Err(SimError::Config("AP must be strictly inside the room".into()));
        }
        if self.ap_clearance < 0.0 {
            return Err(SimError::Config("ap_clearance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn room(&self) -> Room {
        Room {
            x_min: -self.ap_from_left,
            x_max: self.room_length - self.ap_from_left,
            y_min: -self.ap_from_bottom,
            y_max: self.room_width - self.ap_from_bottom,
        }
    }

    pub fn mean_object_count(&self) -> f64 {
        self.lambda_ppp * self.room_length * self.room_width
    }
}

/// Room rectangle in AP-centred coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Room {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Room {
    pub fn contains(&self, p: Point2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }

    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.x_min, self.y_min),
            Point2::new(self.x_max, self.y_min),
            Point2::new(self.x_max, self.y_max),
            Point2::new(self.x_min, self.y_max),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectObject {
    pub center: Point2,
    pub length: f64,
    pub width: f64,
    /// Rotation of the length axis from the x-axis, in `[0, π)`.
    pub tilt: f64,
    /// Position in the material table.
    pub material: usize,
}

impl RectObject {
    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point2; 4] {
        let (s, c) = self.tilt.sin_cos();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
            .map(|(u, v)| Point2::new(self.center.x + u * c - v * s, self.center.y + u * s + v * c))
    }

    /// Whether `p` is inside the rectangle grown by `margin` on every side.
    pub fn contains(&self, p: Point2, margin: f64) -> bool {
        let (s, c) = self.tilt.sin_cos();
        let d = p - self.center;
        let u = d.x * c + d.y * s;
        let v = -d.x * s + d.y * c;
        u.abs() < 0.5 * self.length + margin && v.abs() < 0.5 * self.width + margin
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub objects: Vec<RectObject>,
    /// Position in the material table.
    pub wall_material: usize,
    pub materials: MaterialTable,
    pub seed: u64,
}

/// What a true surface belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceOwner {
    Wall(usize),
    Object { object: usize, side: usize },
}

/// One face of the ground-truth world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrueSurface {
    /// Endpoints ordered counter-clockwise as seen from the AP.
    pub segment: Segment2,
    pub material: usize,
    pub owner: SurfaceOwner,
}

const OBJECT_REDRAWS: usize = 10_000;

/// Random scene: Poisson object count, uniform centres, uniform sizes and
/// tilts, object materials drawn uniformly from the non-wall entries.
///
/// Objects must lie entirely inside the room and keep `ap_clearance` from
/// the AP; offending draws are redrawn. Objects may overlap each other.
pub fn generate_scene(
    config: &SceneConfig,
    materials: &MaterialTable,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Scene> {
    config.validate()?;
    let room = config.room();
    let count = Poisson::new(config.mean_object_count())
        .map_err(|e| SimError::Config(e.to_string()))?
        .sample(rng) as usize;
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..OBJECT_REDRAWS {
            let obj = RectObject {
                center: Point2::new(
                    rng.random_range(room.x_min..room.x_max),
                    rng.random_range(room.y_min..room.y_max),
                ),
                length: positive_uniform(rng, config.max_object_length),
                width: positive_uniform(rng, config.max_object_width),
                tilt: rng.random_range(0.0..PI),
                material: rng.random_range(0..materials.object_materials()),
            };
            let inside = obj.corners().iter().all(|&c| room.contains(c));
            if inside && !obj.contains(Point2::ORIGIN, config.ap_clearance) {
                placed = Some(obj);
                break;
            }
        }
        objects.push(placed.ok_or_else(|| {
            SimError::Simulation("could not place an object inside the room".into())
        })?);
    }
    Ok(Scene {
        config: config.clone(),
        objects,
        wall_material: materials.wall(),
        materials: materials.clone(),
        seed,
    })
}

/// Uniform on `(0, max]`.
fn positive_uniform(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    max - rng.random_range(0.0..max)
}

impl Scene {
    pub fn room(&self) -> Room {
        self.config.room()
    }

    pub fn material(&self, pos: usize) -> &Material {
        self.materials.get(pos)
    }

    pub fn inside_object(&self, p: Point2) -> bool {
        self.objects.iter().any(|o| o.contains(p, 0.0))
    }
}

/// All four walls and all four sides of every object, oriented
/// counter-clockwise as seen from the AP.
pub fn true_front_surfaces(scene: &Scene) -> Vec<TrueSurface> {
    let mut out = Vec::with_capacity(4 + 4 * scene.objects.len());
    let wall_corners = scene.room().corners();
    for i in 0..4 {
        let seg = Segment2::new(wall_corners[i], wall_corners[(i + 1) % 4])
            .expect("room has positive size")
            .oriented_ccw();
        out.push(TrueSurface { segment: seg, material: scene.wall_material, owner: SurfaceOwner::Wall(i) });
    }
    for (j, obj) in scene.objects.iter().enumerate() {
        let c = obj.corners();
        for side in 0..4 {
            let seg = Segment2::new(c[side], c[(side + 1) % 4])
                .expect("object dimensions are positive")
                .oriented_ccw();
            out.push(TrueSurface {
                segment: seg,
                material: obj.material,
                owner: SurfaceOwner::Object { object: j, side },
            });
        }
    }
    out
}

/// A user with its true position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UeTruth {
    pub position: Point2,
    pub n_antennas: usize,
    pub orientation: f64,
}

const UE_PLACEMENT_ATTEMPTS: usize = 1000;

/// Uniform position in the room outside every object, orientation U(0, π).
pub fn place_ue(scene: &Scene, n_antennas: usize, rng: &mut ChaCha8Rng) -> Result<UeTruth> {
    let room = scene.room();
    for _ in 0..UE_PLACEMENT_ATTEMPTS {
        let p = Point2::new(rng.random_range(room.x_min..room.x_max), rng.random_range(room.y_min..room.y_max));
        if p.norm() > 1e-6 && !scene.inside_object(p) {
            let orientation = rng.random_range(0.0..PI);
            return Ok(UeTruth { position: p, n_antennas, orientation });
        }
    }
    Err(SimError::Simulation("no free position for a UE".into()))
}

/// The true surfaces as a reflector set with their true materials.
pub fn true_surface_set(scene: &Scene) -> SurfaceSet {
    let visible = true_front_surfaces(scene)
        .into_iter()
        .map(|s| {
            let m = scene.material(s.material);
            Reflector::new(s.segment, m.specular, m.diffuse, m.phase, Some(s.material))
        })
        .collect();
    SurfaceSet::new(visible, Vec::new())
}

/// Benchmark channel and its paths: ray tracing with every true surface,
/// the true UE position and the true materials.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub channel: Channel,
    pub paths: Vec<Path>,
}

pub fn ground_truth_channel(
    surfaces: &SurfaceSet,
    ue: &UeTruth,
    params: &ReconParams<'_>,
) -> GroundTruth {
    let est = UeEstimate::exact(ue);
    let paths = reconstruction::trace_paths(surfaces, &est, params);
    let channel = reconstruction::reconstruct_channel(&paths, &est, params, reconstruction::FlagMode::Existence);
    GroundTruth { channel, paths }
}

// -- plain-text scene files --------------------------------------------------

impl Scene {
    /// One record per line: `room`, `ap`, `seed`, `wall_material`,
    /// `material` rows and `object cx cy length width tilt material_index`
    /// with 1-based material indices. Floats use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::from("# ambientsim scene v1\n");
        let _ = writeln!(out, "room {} {}", c.room_length, c.room_width);
        let _ = writeln!(out, "ap {} {}", c.ap_from_left, c.ap_from_bottom);
        let _ = writeln!(out, "lambda_ppp {}", c.lambda_ppp);
        let _ = writeln!(out, "max_object {} {}", c.max_object_length, c.max_object_width);
        let _ = writeln!(out, "ap_clearance {}", c.ap_clearance);
        let _ = writeln!(out, "seed {}", self.seed);
        for m in self.materials.entries() {
            let _ = writeln!(out, "material {} {} {} {}", m.index, m.specular, m.diffuse, m.phase);
        }
        let _ = writeln!(out, "wall_material {}", self.materials.get(self.wall_material).index);
        for o in &self.objects {
            let _ = writeln!(
                out,
                "object {} {} {} {} {} {}",
                o.center.x,
                o.center.y,
                o.length,
                o.width,
                o.tilt,
                self.materials.get(o.material).index
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene> {
        let mut config = SceneConfig::default();
        let mut seed = 0;
        let mut materials = Vec::new();
        let mut wall_index = None;
        let mut raw_objects = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| SimError::Parse { line: lineno + 1, msg };
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let vals: Vec<&str> = it.collect();
            let nums = |n: usize| -> Result<Vec<f64>> {
                if vals.len() != n {
                    return Err(perr(format!("`{key}` expects {n} values")));
                }
                vals.iter().map(|v| v.parse::<f64>().map_err(|e| perr(e.to_string()))).collect()
            };
            match key {
                "room" => {
                    let v = nums(2)?;
                    config.room_length = v[0];
                    config.room_width = v[1];
                }
                "ap" => {
                    let v = nums(2)?;
                    config.ap_from_left = v[0];
                    config.ap_from_bottom = v[1];
                }
                "lambda_ppp" => config.lambda_ppp = nums(1)?[0],
                "max_object" => {
                    let v = nums(2)?;
                    config.max_object_length = v[0];
                    config.max_object_width = v[1];
                }
                "ap_clearance" => config.ap_clearance = nums(1)?[0],
                "seed" => {
                    seed = vals
                        .first()
                        .ok_or_else(|| perr("missing seed".into()))?
                        .parse()
                        .map_err(|e: std::num::ParseIntError| perr(e.to_string()))?
                }
                "material" => {
                    let v = nums(4)?;
                    materials.push(Material { index: v[0] as usize, specular: v[1], diffuse: v[2], phase: v[3] });
                }
                "wall_material" => wall_index = Some(nums(1)?[0] as usize),
                "object" => raw_objects.push((lineno + 1, nums(6)?)),
                other => return Err(perr(format!("unknown record `{other}`"))),
            }
        }
        let materials = if materials.is_empty() { MaterialTable::reference() } else { MaterialTable::new(materials)? };
        let lookup = |index: usize, line: usize| {
            materials
                .entries()
                .iter()
                .position(|m| m.index == index)
                .ok_or(SimError::Parse { line, msg: format!("unknown material index {index}") })
        };
        let wall_material = match wall_index {
            Some(i) => lookup(i, 0)?,
            None => materials.wall(),
        };
        let objects = raw_objects
            .into_iter()
            .map(|(line, v)| {
                Ok(RectObject {
                    center: Point2::new(v[0], v[1]),
                    length: v[2],
                    width: v[3],
                    tilt: v[4],
                    material: lookup(v[5] as usize, line)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        config.validate()?;
        Ok(Scene { config, objects, wall_material, materials, seed })
    }
}
