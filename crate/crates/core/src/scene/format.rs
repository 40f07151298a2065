//! Line-oriented `key = value` scene files.
//!
//! ```text
//! # hearing booth
//! [room]
//! type = shoebox
//! size = 2, 2, 2
//! walls = walls, walls, walls, walls, walls, walls
//! speed_of_sound = 343
//! air_absorption = 0, 0, 0, 0, 0, 0, 0, 0
//!
//! [material walls]
//! absorption = 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5
//! scattering = 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3
//!
//! [source]
//! position = 1, 1, 1.5
//! directivity = omni
//!
//! [receiver]
//! position = 1.2, 0.85, 1.7
//! look = 0, 1, 0
//! up = 0, 0, 1
//! hrtf = parametric 0.0875
//! ```
//!
//! Mesh rooms use `type = mesh` and one `triangle = x,y,z; x,y,z; x,y,z; material`
//! line per face. Directivity grids use `directivity = grid` with
//! `azimuths_deg`, `elevations_deg` and one `gains = <8 floats>` line per grid
//! point in elevation-major order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::bands::{Bands, NUM_BANDS};
use crate::error::{Error, Result};
use crate::math::Vec3;

use super::mesh::{Mesh, Triangle};
use super::{
    Directivity, DirectivityGrid, HrtfRef, Material, ReceiverSpec, RoomGeometry, Scene, Shoebox,
    SourceSpec, SPEED_OF_SOUND,
};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvSection {
    pub name: String,
    pub arg: Option<String>,
    pub line: usize,
    pub entries: Vec<(String, String, usize)>,
}

impl KvSection {
    pub fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (&'a str, usize)> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn require(&self, key: &str) -> Result<(&str, usize)> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("section [{}] is missing `{key}`", self.name),
        })
    }
}

/// A parsed `key = value` document. Entries before the first section header
/// land in a section with an empty name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvDocument {
    pub sections: Vec<KvSection>,
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDocument::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                let mut parts = header.split_whitespace();
                let name = parts.next().unwrap_or_default().to_string();
                let arg = parts.next().map(str::to_string);
                if parts.next().is_some() || name.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("bad section header `[{header}]`"),
                    });
                }
                doc.sections.push(KvSection {
                    name,
                    arg,
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            if doc.sections.is_empty() {
                doc.sections.push(KvSection::default());
            }
            let section = doc.sections.last_mut().expect("at least one section");
            section
                .entries
                .push((key.trim().to_string(), value.trim().to_string(), line_no));
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&KvSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a KvSection> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }
}

fn parse_floats(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` is not a number", t.trim()),
            })
        })
        .collect()
}

pub(crate) fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{value}` is not a number"),
    })
}

pub(crate) fn parse_vec3(value: &str, line: usize) -> Result<Vec3> {
    let v = parse_floats(value, line)?;
    if v.len() != 3 {
        return Err(Error::Parse {
            line,
            message: format!("expected 3 components, found {}", v.len()),
        });
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_bands(value: &str, line: usize) -> Result<Bands> {
    let v = parse_floats(value, line)?;
    v.try_into().map_err(|v: Vec<f64>| Error::Parse {
        line,
        message: format!("expected {NUM_BANDS} band values, found {}", v.len()),
    })
}

fn fmt_vec3(v: Vec3) -> String {
    format!("{}, {}, {}", v.x, v.y, v.z)
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let doc = KvDocument::parse(text)?;
    let room = doc.section("room").ok_or(Error::Parse {
        line: 1,
        message: "missing [room] section".into(),
    })?;

    let (kind, kind_line) = room.require("type")?;
    let geometry = match kind {
        "shoebox" => {
            let (v, l) = room.require("size")?;
            let d = parse_vec3(v, l)?;
            let (walls, wl) = room.require("walls")?;
            let ids: Vec<String> = walls.split(',').map(|s| s.trim().to_string()).collect();
            let wall_materials: [String; 6] = ids.try_into().map_err(|ids: Vec<String>| Error::Parse {
                line: wl,
                message: format!("expected 6 wall materials, found {}", ids.len()),
            })?;
            RoomGeometry::Shoebox(Shoebox {
                width: d.x,
                length: d.y,
                height: d.z,
                wall_materials,
            })
        }
        "mesh" => {
            let mut triangles = Vec::new();
            for (v, l) in room.all("triangle") {
                let parts: Vec<&str> = v.split(';').collect();
                if parts.len() != 4 {
                    return Err(Error::Parse {
                        line: l,
                        message: "triangle needs three vertices and a material".into(),
                    });
                }
                triangles.push(Triangle::new(
                    parse_vec3(parts[0], l)?,
                    parse_vec3(parts[1], l)?,
                    parse_vec3(parts[2], l)?,
                    parts[3].trim(),
                ));
            }
            RoomGeometry::Mesh(Mesh { triangles })
        }
        other => {
            return Err(Error::Parse {
                line: kind_line,
                message: format!("unknown room type `{other}`"),
            })
        }
    };
    let speed_of_sound = match room.get("speed_of_sound") {
        Some((v, l)) => parse_f64(v, l)?,
        None => SPEED_OF_SOUND,
    };
    let air_absorption = match room.get("air_absorption") {
        Some((v, l)) => parse_bands(v, l)?,
        None => [0.0; NUM_BANDS],
    };

    let mut materials = BTreeMap::new();
    for sec in doc.sections_named("material") {
        let id = sec.arg.clone().ok_or(Error::Parse {
            line: sec.line,
            message: "material section needs an id: [material <id>]".into(),
        })?;
        let (a, al) = sec.require("absorption")?;
        let (s, sl) = sec.require("scattering")?;
        materials.insert(
            id,
            Material {
                absorption: parse_bands(a, al)?,
                scattering: parse_bands(s, sl)?,
            },
        );
    }

    let src = doc.section("source").ok_or(Error::Parse {
        line: 1,
        message: "missing [source] section".into(),
    })?;
    let (p, pl) = src.require("position")?;
    let directivity = match src.get("directivity") {
        None | Some(("omni", _)) => Directivity::Omni,
        Some(("grid", _)) => {
            let (az, azl) = src.require("azimuths_deg")?;
            let (el, ell) = src.require("elevations_deg")?;
            let gains = src
                .all("gains")
                .map(|(v, l)| parse_bands(v, l))
                .collect::<Result<Vec<_>>>()?;
            Directivity::Grid(DirectivityGrid {
                azimuths_deg: parse_floats(az, azl)?,
                elevations_deg: parse_floats(el, ell)?,
                gains,
            })
        }
        Some((other, l)) => {
            return Err(Error::Parse {
                line: l,
                message: format!("unknown directivity `{other}`"),
            })
        }
    };
    let source = SourceSpec {
        position: parse_vec3(p, pl)?,
        directivity,
    };

    let rcv = doc.section("receiver").ok_or(Error::Parse {
        line: 1,
        message: "missing [receiver] section".into(),
    })?;
    let (p, pl) = rcv.require("position")?;
    let (look, ll) = rcv.require("look")?;
    let (up, ul) = rcv.require("up")?;
    let hrtf = match rcv.get("hrtf") {
        None => HrtfRef::default(),
        Some((v, l)) => {
            let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
            match kind {
                "parametric" if rest.trim().is_empty() => HrtfRef::default(),
                "parametric" => HrtfRef::Parametric {
                    head_radius: parse_f64(rest, l)?,
                },
                "grid" => HrtfRef::GridFile(PathBuf::from(rest.trim())),
                _ => {
                    return Err(Error::Parse {
                        line: l,
                        message: format!("unknown hrtf `{v}`"),
                    })
                }
            }
        }
    };
    let receiver = ReceiverSpec {
        position: parse_vec3(p, pl)?,
        look: parse_vec3(look, ll)?,
        up: parse_vec3(up, ul)?,
        hrtf,
    };

    Ok(Scene {
        room: geometry,
        materials,
        source,
        receiver,
        speed_of_sound,
        air_absorption,
    })
}

pub fn emit_scene(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str("[room]\n");
    match &scene.room {
        RoomGeometry::Shoebox(b) => {
            out.push_str("type = shoebox\n");
            let _ = writeln!(out, "size = {}", fmt_vec3(b.dims()));
            let _ = writeln!(out, "walls = {}", b.wall_materials.join(", "));
        }
        RoomGeometry::Mesh(m) => {
            out.push_str("type = mesh\n");
            for t in &m.triangles {
                let [a, b, c] = t.vertices;
                let _ = writeln!(
                    out,
                    "triangle = {}; {}; {}; {}",
                    fmt_vec3(a),
                    fmt_vec3(b),
                    fmt_vec3(c),
                    t.material
                );
            }
        }
    }
    let _ = writeln!(out, "speed_of_sound = {}", scene.speed_of_sound);
    let _ = writeln!(out, "air_absorption = {}", fmt_list(&scene.air_absorption));

    for (id, m) in &scene.materials {
        let _ = writeln!(out, "\n[material {id}]");
        let _ = writeln!(out, "absorption = {}", fmt_list(&m.absorption));
        let _ = writeln!(out, "scattering = {}", fmt_list(&m.scattering));
    }

    out.push_str("\n[source]\n");
    let _ = writeln!(out, "position = {}", fmt_vec3(scene.source.position));
    match &scene.source.directivity {
        Directivity::Omni => out.push_str("directivity = omni\n"),
        Directivity::Grid(g) => {
            out.push_str("directivity = grid\n");
            let _ = writeln!(out, "azimuths_deg = {}", fmt_list(&g.azimuths_deg));
            let _ = writeln!(out, "elevations_deg = {}", fmt_list(&g.elevations_deg));
            for gains in &g.gains {
                let _ = writeln!(out, "gains = {}", fmt_list(gains));
            }
        }
    }

    let r = &scene.receiver;
    out.push_str("\n[receiver]\n");
    let _ = writeln!(out, "position = {}", fmt_vec3(r.position));
    let _ = writeln!(out, "look = {}", fmt_vec3(r.look));
    let _ = writeln!(out, "up = {}", fmt_vec3(r.up));
    match &r.hrtf {
        HrtfRef::Parametric { head_radius } => {
            let _ = writeln!(out, "hrtf = parametric {head_radius}");
        }
        HrtfRef::GridFile(p) => {
            let _ = writeln!(out, "hrtf = grid {}", p.display());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{preset_scene, Preset};

    #[test]
    fn presets_round_trip() {
        for p in Preset::ALL {
            let scene = preset_scene(p);
            let text = emit_scene(&scene);
            assert_eq!(parse_scene(&text).unwrap(), scene, "{p}");
        }
    }

    #[test]
    fn directivity_grid_round_trips() {
        let mut scene = preset_scene(Preset::Booth1);
        scene.source.directivity = Directivity::Grid(DirectivityGrid {
            azimuths_deg: vec![0.0, 90.0, 180.0, 270.0],
            elevations_deg: vec![-45.0, 45.0],
            gains: (0..8).map(|i| [i as f64 * 0.1; NUM_BANDS]).collect(),
        });
        scene.receiver.hrtf = HrtfRef::GridFile("hrtf/kemar.txt".into());
        assert_eq!(parse_scene(&emit_scene(&scene)).unwrap(), scene);
    }

    #[test]
    fn comments_and_defaults() {
        let text = "\
# a booth
[room]
type = shoebox   # trailing comment
size = 2, 3, 2.5
walls = a, a, a, a, b, b

[material a]
absorption = 0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5
scattering = 0,0,0,0,0,0,0,0
[material b]
absorption = 1,1,1,1,1,1,1,1
scattering = 0,0,0,0,0,0,0,0

[source]
position = 1, 1, 1
[receiver]
position = 1.5, 1, 1
look = 0, 1, 0
up = 0, 0, 1
";
        let s = parse_scene(text).unwrap();
        assert_eq!(s.speed_of_sound, 343.0);
        assert_eq!(s.source.directivity, Directivity::Omni);
        assert_eq!(s.receiver.hrtf, HrtfRef::default());
        assert_eq!(s.shoebox().unwrap().wall_materials[4], "b");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_scene("[room]\ntype = shoebox\nsize = 1, 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_scene("[room]\nnonsense\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_scene("[room]\ntype = sphere\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
