//! Rooms, materials, sources and receivers.
//!
//! A [`Scene`] is a pure value. [`validate_scene`] reports every broken
//! invariant instead of failing on the first, so a scene file can be fixed in
//! one pass.

mod format;
pub mod mesh;
mod presets;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bands::{Bands, NUM_BANDS};
use crate::error::{Error, Result};
use crate::math::Vec3;

pub use format::{emit_scene, parse_scene, KvDocument, KvSection};
pub use mesh::{Aabb, Mesh, Triangle};
pub use presets::{preset_scene, Preset, EAR_OFFSET_FROM_SOURCE, LAB_SCATTERING, SOURCE_HEIGHT};

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Sabine's constant in s/m.
const SABINE_CONSTANT: f64 = 0.161;

/// Per-band absorption and scattering coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub absorption: Bands,
    pub scattering: Bands,
}

impl Material {
    /// Frequency-independent material.
    pub fn uniform(absorption: f64, scattering: f64) -> Self {
        Material {
            absorption: [absorption; NUM_BANDS],
            scattering: [scattering; NUM_BANDS],
        }
    }
}

/// Shoebox wall order used by `wall_materials`, image sources and meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    XMin = 0,
    XMax = 1,
    YMin = 2,
    YMax = 3,
    ZMin = 4,
    ZMax = 5,
}

impl Wall {
    pub fn index(axis: usize, max_side: bool) -> usize {
        2 * axis + max_side as usize
    }
}

/// Axis-aligned rectangular room spanning `[0, width] x [0, length] x [0, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shoebox {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    /// Material ids in [`Wall`] order.
    pub wall_materials: [String; 6],
}

impl Shoebox {
    pub fn uniform(width: f64, length: f64, height: f64, material: &str) -> Self {
        Shoebox {
            width,
            length,
            height,
            wall_materials: std::array::from_fn(|_| material.to_string()),
        }
    }

    pub fn dims(&self) -> Vec3 {
        Vec3::new(self.width, self.length, self.height)
    }

    pub fn volume(&self) -> f64 {
        self.width * self.length * self.height
    }

    /// Area of each wall in [`Wall`] order.
    pub fn wall_areas(&self) -> [f64; 6] {
        let (w, l, h) = (self.width, self.length, self.height);
        [l * h, l * h, w * h, w * h, w * l, w * l]
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x > 0.0 && p.x < self.width && p.y > 0.0 && p.y < self.length && p.z > 0.0 && p.z < self.height
    }

    pub fn to_mesh(&self) -> Mesh {
        let bx = Aabb::new(Vec3::ZERO, self.dims());
        Mesh::from_box_union(&[bx], |f| {
            // Air on the positive side means the face is the min wall.
            self.wall_materials[Wall::index(f.axis, !f.air_on_positive_side)].clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RoomGeometry {
    Shoebox(Shoebox),
    Mesh(Mesh),
}

impl RoomGeometry {
    pub fn volume(&self) -> f64 {
        match self {
            RoomGeometry::Shoebox(b) => b.volume(),
            RoomGeometry::Mesh(m) => m.volume(),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            RoomGeometry::Shoebox(b) => b.contains(p),
            RoomGeometry::Mesh(m) => m.contains_point(p),
        }
    }

    /// Triangulated boundary; shoeboxes are converted on the fly.
    pub fn to_mesh(&self) -> Mesh {
        match self {
            RoomGeometry::Shoebox(b) => b.to_mesh(),
            RoomGeometry::Mesh(m) => m.clone(),
        }
    }

    /// Every material id referenced by the geometry, in first-use order.
    pub fn material_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        let iter: Box<dyn Iterator<Item = &String>> = match self {
            RoomGeometry::Shoebox(b) => Box::new(b.wall_materials.iter()),
            RoomGeometry::Mesh(m) => Box::new(m.triangles.iter().map(|t| &t.material)),
        };
        for id in iter {
            if !ids.contains(&id.as_str()) {
                ids.push(id);
            }
        }
        ids
    }

    /// Surface area per material id.
    pub fn areas_by_material(&self) -> BTreeMap<String, f64> {
        let mut areas = BTreeMap::new();
        match self {
            RoomGeometry::Shoebox(b) => {
                for (id, a) in b.wall_materials.iter().zip(b.wall_areas()) {
                    *areas.entry(id.clone()).or_insert(0.0) += a;
                }
            }
            RoomGeometry::Mesh(m) => {
                for t in &m.triangles {
                    *areas.entry(t.material.clone()).or_insert(0.0) += t.area();
                }
            }
        }
        areas
    }
}

/// Source directivity sampled on an azimuth/elevation grid (world frame).
///
/// `gains[e * azimuths.len() + a]` holds the per-band pressure gain at
/// elevation `e` and azimuth `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectivityGrid {
    pub azimuths_deg: Vec<f64>,
    pub elevations_deg: Vec<f64>,
    pub gains: Vec<Bands>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Directivity {
    #[default]
    Omni,
    Grid(DirectivityGrid),
}

impl Directivity {
    /// Per-band pressure gain toward the unit direction `dir`, nearest grid
    /// point by angular distance.
    pub fn gain(&self, dir: Vec3) -> Bands {
        match self {
            Directivity::Omni => [1.0; NUM_BANDS],
            Directivity::Grid(g) => {
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (e, el) in g.elevations_deg.iter().enumerate() {
                    for (a, az) in g.azimuths_deg.iter().enumerate() {
                        let p = unit_from_az_el(az.to_radians(), el.to_radians());
                        let c = p.dot(dir);
                        if c > best.0 {
                            best = (c, e * g.azimuths_deg.len() + a);
                        }
                    }
                }
                g.gains[best.1]
            }
        }
    }
}

/// Unit vector for azimuth (counter-clockwise from +x in the xy plane) and
/// elevation (from the xy plane toward +z).
pub fn unit_from_az_el(az: f64, el: f64) -> Vec3 {
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub position: Vec3,
    pub directivity: Directivity,
}

/// Where the receiver's HRTF comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HrtfRef {
    Parametric { head_radius: f64 },
    GridFile(PathBuf),
}

impl Default for HrtfRef {
    fn default() -> Self {
        HrtfRef::Parametric { head_radius: 0.0875 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSpec {
    pub position: Vec3,
    pub look: Vec3,
    pub up: Vec3,
    pub hrtf: HrtfRef,
}

impl ReceiverSpec {
    /// Unit vector toward the listener's left ear: `up x look`.
    pub fn left(&self) -> Vec3 {
        self.up.cross(self.look)
    }

    /// Expresses a world-frame direction in head coordinates
    /// `(forward, left, up)`.
    pub fn to_head_frame(&self, dir: Vec3) -> Vec3 {
        Vec3::new(dir.dot(self.look), dir.dot(self.left()), dir.dot(self.up))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: RoomGeometry,
    pub materials: BTreeMap<String, Material>,
    pub source: SourceSpec,
    pub receiver: ReceiverSpec,
    pub speed_of_sound: f64,
    /// Air attenuation per band in dB/m.
    pub air_absorption: Bands,
}

impl Scene {
    pub fn material(&self, id: &str) -> Option<&Material> {
        self.materials.get(id)
    }

    /// Shoebox view of the room, or [`Error::NotShoebox`].
    pub fn shoebox(&self) -> Result<&Shoebox> {
        match &self.room {
            RoomGeometry::Shoebox(b) => Ok(b),
            RoomGeometry::Mesh(_) => Err(Error::NotShoebox),
        }
    }

    /// Returns a copy with every absorption coefficient replaced by `alpha`.
    pub fn with_uniform_absorption(&self, alpha: f64) -> Scene {
        let mut s = self.clone();
        for m in s.materials.values_mut() {
            m.absorption = [alpha; NUM_BANDS];
        }
        s
    }
}

/// One broken invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, message: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(message))
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_scene(scene: &Scene) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (id, m) in &scene.materials {
        for (name, coeffs) in [("absorption", &m.absorption), ("scattering", &m.scattering)] {
            for (band, c) in coeffs.iter().enumerate() {
                if !(0.0..=1.0).contains(c) {
                    report.push(
                        format!("material {id}, {name}[{band}]"),
                        format!("coefficient {c} outside [0, 1]"),
                    );
                }
            }
        }
    }

    match &scene.room {
        RoomGeometry::Shoebox(b) => {
            for (name, d) in [("width", b.width), ("length", b.length), ("height", b.height)] {
                if !(d > 0.0 && d.is_finite()) {
                    report.push(format!("room.{name}"), format!("dimension {d} must be positive"));
                }
            }
        }
        RoomGeometry::Mesh(m) => {
            if m.triangles.is_empty() {
                report.push("room", "mesh has no triangles");
            } else {
                let open = m.unmatched_edges();
                if let Some((a, b, n)) = open.first() {
                    report.push(
                        format!("room, edge ({}, {}, {})-({}, {}, {})", a.x, a.y, a.z, b.x, b.y, b.z),
                        format!("mesh not watertight ({} bad edges; first used {n} times)", open.len()),
                    );
                } else {
                    let bad = m.misoriented_triangles();
                    if let Some(first) = bad.first() {
                        report.push(
                            format!("room, triangle {first}"),
                            format!("{} triangle normals do not point into the air volume", bad.len()),
                        );
                    }
                }
            }
        }
    }

    for id in scene.room.material_ids() {
        if !scene.materials.contains_key(id) {
            report.push("room", format!("unknown material id `{id}`"));
        }
    }

    let src = scene.source.position;
    let rcv = scene.receiver.position;
    if !src.is_finite() || !scene.room.contains(src) {
        report.push("source.position", "source outside the air volume");
    }
    if !rcv.is_finite() || !scene.room.contains(rcv) {
        report.push("receiver.position", "receiver outside the air volume");
    }
    if src.distance(rcv) <= 1e-6 {
        report.push("source.position", "source coincides with receiver");
    }

    if let Directivity::Grid(g) = &scene.source.directivity {
        if g.gains.len() != g.azimuths_deg.len() * g.elevations_deg.len() || g.gains.is_empty() {
            report.push("source.directivity", "gain table size does not match the grid");
        }
        if g.gains.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            report.push("source.directivity", "gains must be finite and non-negative");
        }
    }

    let r = &scene.receiver;
    let orthonormal = (r.look.norm() - 1.0).abs() <= 1e-6
        && (r.up.norm() - 1.0).abs() <= 1e-6
        && r.look.dot(r.up).abs() <= 1e-6;
    if !orthonormal {
        report.push("receiver.orientation", "look and up vectors are not orthonormal");
    }
    if let HrtfRef::Parametric { head_radius } = r.hrtf {
        if !(head_radius > 0.0 && head_radius.is_finite()) {
            report.push("receiver.hrtf", "head radius must be positive");
        }
    }

    if !(scene.speed_of_sound > 0.0 && scene.speed_of_sound.is_finite()) {
        report.push("room.speed_of_sound", "speed of sound must be positive");
    }
    if scene.air_absorption.iter().any(|a| !a.is_finite() || *a < 0.0) {
        report.push("room.air_absorption", "air absorption must be finite and non-negative");
    }

    report
}

/// Sabine reverberation time `0.161 V / sum(S_i alpha_i)` for one band.
pub fn sabine_rt(scene: &Scene, band: usize) -> Result<f64> {
    if band >= NUM_BANDS {
        return Err(Error::InvalidArgument(format!("band index {band} out of range")));
    }
    let mut absorption_area = 0.0;
    for (id, area) in scene.room.areas_by_material() {
        let m = scene
            .material(&id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown material id `{id}`")))?;
        absorption_area += area * m.absorption[band];
    }
    if absorption_area <= 0.0 {
        return Err(Error::NoAbsorption { band });
    }
    Ok(SABINE_CONSTANT * scene.room.volume() / absorption_area)
}
