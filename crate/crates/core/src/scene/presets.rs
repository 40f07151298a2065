//! Built-in laboratory rooms and virtual stages.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::bands::NUM_BANDS;
use crate::error::Error;
use crate::math::Vec3;

use super::mesh::{Aabb, Mesh};
use super::{
    Directivity, HrtfRef, Material, ReceiverSpec, RoomGeometry, Scene, Shoebox, SourceSpec,
    SPEED_OF_SOUND,
};

/// Height of the instrument above the floor, in meters.
pub const SOURCE_HEIGHT: f64 = 1.5;

/// Head center relative to the instrument, as (forward, left, up) meters in
/// the player's frame. The viola rests on the left shoulder with the bridge
/// about 0.2 m ahead of and 0.2 m left of the chin, the chin about 0.1 m ahead
/// of the head center, and the body about 0.2 m below ear height: 0.41 m in all.
pub const EAR_OFFSET_FROM_SOURCE: [f64; 3] = [-0.3, -0.2, 0.2];

/// Scattering coefficient assigned to the laboratory rooms' walls.
pub const LAB_SCATTERING: f64 = 0.3;

const STAGE_DEPTH: f64 = 10.0;
const HALL_LENGTH: f64 = 41.5;
const HALL_WIDTH: f64 = 23.0;
const HALL_HEIGHT: f64 = 19.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Anechoic,
    Booth1,
    Booth2,
    StageSmall,
    StageLarge,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Anechoic,
        Preset::Booth1,
        Preset::Booth2,
        Preset::StageSmall,
        Preset::StageLarge,
    ];
    pub const LAB_ROOMS: [Preset; 3] = [Preset::Anechoic, Preset::Booth1, Preset::Booth2];
    pub const STAGES: [Preset; 2] = [Preset::StageSmall, Preset::StageLarge];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Anechoic => "anechoic",
            Preset::Booth1 => "booth1",
            Preset::Booth2 => "booth2",
            Preset::StageSmall => "stage_small",
            Preset::StageLarge => "stage_large",
        }
    }

    pub fn is_stage(self) -> bool {
        matches!(self, Preset::StageSmall | Preset::StageLarge)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Source at `center` facing +y, receiver at the player's head.
fn player(center: Vec3) -> (SourceSpec, ReceiverSpec) {
    let look = Vec3::Y;
    let up = Vec3::Z;
    let left = up.cross(look);
    let [fwd, lft, upw] = EAR_OFFSET_FROM_SOURCE;
    let head = center + look * fwd + left * lft + up * upw;
    (
        SourceSpec {
            position: center,
            directivity: Directivity::Omni,
        },
        ReceiverSpec {
            position: head,
            look,
            up,
            hrtf: HrtfRef::default(),
        },
    )
}

fn lab_room(width: f64, length: f64, height: f64, alpha: f64) -> Scene {
    let (source, receiver) = player(Vec3::new(width / 2.0, length / 2.0, SOURCE_HEIGHT));
    Scene {
        room: RoomGeometry::Shoebox(Shoebox::uniform(width, length, height, "walls")),
        materials: BTreeMap::from([("walls".to_string(), Material::uniform(alpha, LAB_SCATTERING))]),
        source,
        receiver,
        speed_of_sound: SPEED_OF_SOUND,
        air_absorption: [0.0; NUM_BANDS],
    }
}

/// Stage box (y < 0) opening onto the hall (y > 0) through the shared face.
/// The hall floor is the audience area.
fn stage(width: f64, height: f64) -> Scene {
    let stage = Aabb::new(
        Vec3::new(-width / 2.0, -STAGE_DEPTH, 0.0),
        Vec3::new(width / 2.0, 0.0, height),
    );
    let hall = Aabb::new(
        Vec3::new(-HALL_WIDTH / 2.0, 0.0, 0.0),
        Vec3::new(HALL_WIDTH / 2.0, HALL_LENGTH, HALL_HEIGHT),
    );
    let mesh = Mesh::from_box_union(&[stage, hall], |f| {
        let audience = f.axis == 2 && f.air_on_positive_side && f.air_cell_center.y > 0.0;
        if audience { "audience" } else { "surfaces" }.to_string()
    });
    let (source, receiver) = player(Vec3::new(0.0, -STAGE_DEPTH / 2.0, SOURCE_HEIGHT));
    Scene {
        room: RoomGeometry::Mesh(mesh),
        materials: BTreeMap::from([
            ("audience".to_string(), Material::uniform(0.80, 0.70)),
            ("surfaces".to_string(), Material::uniform(0.20, 0.10)),
        ]),
        source,
        receiver,
        speed_of_sound: SPEED_OF_SOUND,
        air_absorption: [0.0; NUM_BANDS],
    }
}

pub fn preset_scene(preset: Preset) -> Scene {
    match preset {
        Preset::Anechoic => lab_room(3.5, 4.5, 2.5, 0.99),
        Preset::Booth1 => lab_room(2.0, 2.0, 2.0, 0.50),
        Preset::Booth2 => lab_room(2.1, 3.0, 2.5, 0.97),
        Preset::StageSmall => stage(12.0, 6.0),
        Preset::StageLarge => stage(24.0, 12.0),
    }
}
