//! Image-source method for shoebox rooms.
//!
//! Along one axis of a room `[0, L]`, the mirror images of a source at `s`
//! are indexed by an integer `k`; image `k` lies behind `|k|` walls:
//!
//! * even `k`: position `s + k L`, `|k|/2` hits on each wall;
//! * odd `k`: position `(k + 1) L - s`, `|n - 1|` hits on the min wall and
//!   `|n|` on the max wall with `n = (k + 1) / 2`.
//!
//! A 3D image is a triple of such indices, and its order is `|kx|+|ky|+|kz|`.

use crate::bands::{Bands, NUM_BANDS};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::{RoomGeometry, Scene, Shoebox, Wall};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    /// Hits per axis as `[min wall, max wall]`, axes ordered x, y, z.
    pub reflection_counts: [[u32; 2]; 3],
    pub order: u32,
    /// Lattice index per axis; odd entries mirror that axis.
    pub index: [i32; 3],
}

/// A deterministic propagation path reaching the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    /// Propagation delay in seconds.
    pub delay: f64,
    /// Pressure factor per band, relative to unit pressure at 1 m.
    pub amplitude: Bands,
    /// Unit vector from the receiver toward the apparent source (world frame).
    pub direction: Vec3,
    /// Number of wall reflections along the path.
    pub order: u32,
}

fn axis_image(k: i32, s: f64, len: f64) -> (f64, [u32; 2]) {
    if k % 2 == 0 {
        let n = (k / 2).unsigned_abs();
        (s + k as f64 * len, [n, n])
    } else {
        let n = (k + 1) / 2;
        (
            (k + 1) as f64 * len - s,
            [(n - 1).unsigned_abs(), n.unsigned_abs()],
        )
    }
}

fn shoebox_of(room: &RoomGeometry) -> Result<&Shoebox> {
    match room {
        RoomGeometry::Shoebox(b) => Ok(b),
        RoomGeometry::Mesh(_) => Err(Error::NotShoebox),
    }
}

/// All images with order `<= max_order`, sorted by order then lattice index.
pub fn image_sources(room: &RoomGeometry, source: Vec3, max_order: u32) -> Result<Vec<ImageSource>> {
    let room = shoebox_of(room)?;
    if !room.contains(source) {
        return Err(Error::InvalidArgument("source outside the shoebox".into()));
    }
    let dims = room.dims();
    let m = max_order as i32;
    let mut images = Vec::new();
    for kx in -m..=m {
        let rest_x = m - kx.abs();
        for ky in -rest_x..=rest_x {
            let rest_y = rest_x - ky.abs();
            for kz in -rest_y..=rest_y {
                let index = [kx, ky, kz];
                let mut position = Vec3::ZERO;
                let mut counts = [[0u32; 2]; 3];
                for axis in 0..3 {
                    let (p, c) = axis_image(index[axis], source.component(axis), dims.component(axis));
                    position = position.with_component(axis, p);
                    counts[axis] = c;
                }
                images.push(ImageSource {
                    position,
                    reflection_counts: counts,
                    order: index.iter().map(|k| k.unsigned_abs()).sum(),
                    index,
                });
            }
        }
    }
    images.sort_by_key(|im| (im.order, im.index));
    Ok(images)
}

/// Pressure arrivals for every image source; `skip_direct` drops order 0.
pub fn ism_arrivals(scene: &Scene, max_order: u32, skip_direct: bool) -> Result<Vec<Arrival>> {
    let room = scene.shoebox()?;
    let images = image_sources(&scene.room, scene.source.position, max_order)?;

    let mut wall_factor = [[1.0; NUM_BANDS]; 6];
    for (w, id) in room.wall_materials.iter().enumerate() {
        let m = scene
            .material(id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown material id `{id}`")))?;
        for b in 0..NUM_BANDS {
            wall_factor[w][b] = (1.0 - m.absorption[b]).max(0.0).sqrt();
        }
    }

    let rcv = scene.receiver.position;
    let mut arrivals = Vec::with_capacity(images.len());
    for im in images.iter().filter(|im| !(skip_direct && im.order == 0)) {
        let to_receiver = rcv - im.position;
        let dist = to_receiver.norm();
        // Launch direction at the real source: undo one flip per reflection.
        let mut launch = to_receiver / dist;
        for axis in 0..3 {
            if im.index[axis] % 2 != 0 {
                launch = launch.with_component(axis, -launch.component(axis));
            }
        }
        let gain = scene.source.directivity.gain(launch);
        let mut amplitude = [0.0; NUM_BANDS];
        for (b, a) in amplitude.iter_mut().enumerate() {
            let mut v = gain[b] / dist * air_pressure_factor(scene.air_absorption[b], dist);
            for axis in 0..3 {
                for side in 0..2 {
                    let hits = im.reflection_counts[axis][side];
                    if hits > 0 {
                        v *= wall_factor[Wall::index(axis, side == 1)][b].powi(hits as i32);
                    }
                }
            }
            *a = v;
        }
        arrivals.push(Arrival {
            delay: dist / scene.speed_of_sound,
            amplitude,
            direction: -to_receiver / dist,
            order: im.order,
        });
    }
    Ok(arrivals)
}

/// Pressure attenuation for `db_per_m` of air absorption over `dist` meters.
pub(crate) fn air_pressure_factor(db_per_m: f64, dist: f64) -> f64 {
    if db_per_m == 0.0 {
        1.0
    } else {
        10f64.powf(-db_per_m * dist / 20.0)
    }
}
