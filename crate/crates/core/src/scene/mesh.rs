//! Triangle meshes: construction from box unions, watertightness, inside tests.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// A triangle whose winding gives a normal pointing into the air volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    pub material: String,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3, material: impl Into<String>) -> Self {
        Triangle {
            vertices: [a, b, c],
            material: material.into(),
        }
    }

    /// Unit normal from the winding order `(b - a) x (c - a)`.
    pub fn normal(&self) -> Vec3 {
        let [a, b, c] = self.vertices;
        (b - a).cross(c - a).normalized()
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn centroid(&self) -> Vec3 {
        let [a, b, c] = self.vertices;
        (a + b + c) / 3.0
    }

    /// Möller–Trumbore intersection. Returns the ray parameter of the hit, if
    /// any, for `t > t_min`. Barycentric bounds are padded by `edge_eps` so
    /// rays grazing a shared edge hit at least one of its two triangles.
    pub fn intersect(&self, origin: Vec3, dir: Vec3, t_min: f64, edge_eps: f64) -> Option<f64> {
        let [a, b, c] = self.vertices;
        let e1 = b - a;
        let e2 = c - a;
        let p = dir.cross(e2);
        let det = e1.dot(p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - a;
        let u = s.dot(p) * inv;
        if u < -edge_eps || u > 1.0 + edge_eps {
            return None;
        }
        let q = s.cross(e1);
        let v = dir.dot(q) * inv;
        if v < -edge_eps || u + v > 1.0 + edge_eps {
            return None;
        }
        let t = e2.dot(q) * inv;
        (t > t_min).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub triangles: Vec<Triangle>,
}

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p.component(a) > self.min.component(a) && p.component(a) < self.max.component(a))
    }
}

/// Identifies a boundary face of a box union: the axis of its normal, the
/// side of the air (`true` when air lies on the positive side), and the
/// center of the air cell it bounds.
#[derive(Debug, Clone, Copy)]
pub struct FaceInfo {
    pub axis: usize,
    pub air_on_positive_side: bool,
    pub plane: f64,
    pub air_cell_center: Vec3,
}

/// Quantized vertex key used for edge matching.
fn vertex_key(v: Vec3) -> [i64; 3] {
    let q = |x: f64| (x * 1e9).round() as i64;
    [q(v.x), q(v.y), q(v.z)]
}

impl Mesh {
    /// Builds the boundary of a union of axis-aligned boxes as a watertight
    /// mesh. Every coordinate of every box becomes a grid breakpoint, so
    /// neighbouring faces always share complete edges.
    pub fn from_box_union(boxes: &[Aabb], material: impl Fn(&FaceInfo) -> String) -> Mesh {
        let mut grid: [Vec<f64>; 3] = Default::default();
        for (axis, coords) in grid.iter_mut().enumerate() {
            for b in boxes {
                coords.push(b.min.component(axis));
                coords.push(b.max.component(axis));
            }
            coords.sort_by(f64::total_cmp);
            coords.dedup();
        }
        let dims = [grid[0].len() - 1, grid[1].len() - 1, grid[2].len() - 1];
        let center = |i: usize, j: usize, k: usize| {
            Vec3::new(
                0.5 * (grid[0][i] + grid[0][i + 1]),
                0.5 * (grid[1][j] + grid[1][j + 1]),
                0.5 * (grid[2][k] + grid[2][k + 1]),
            )
        };
        let inside = |idx: [isize; 3]| -> bool {
            if (0..3).any(|a| idx[a] < 0 || idx[a] >= dims[a] as isize) {
                return false;
            }
            let c = center(idx[0] as usize, idx[1] as usize, idx[2] as usize);
            boxes.iter().any(|b| b.contains(c))
        };

        let mut triangles = Vec::new();
        for axis in 0..3 {
            let u = (axis + 1) % 3;
            let v = (axis + 2) % 3;
            for plane in 0..grid[axis].len() {
                for iu in 0..dims[u] {
                    for iv in 0..dims[v] {
                        let mut below = [0isize; 3];
                        below[axis] = plane as isize - 1;
                        below[u] = iu as isize;
                        below[v] = iv as isize;
                        let mut above = below;
                        above[axis] = plane as isize;
                        let (in_below, in_above) = (inside(below), inside(above));
                        if in_below == in_above {
                            continue;
                        }
                        let air = if in_above { above } else { below };
                        let info = FaceInfo {
                            axis,
                            air_on_positive_side: in_above,
                            plane: grid[axis][plane],
                            air_cell_center: center(air[0] as usize, air[1] as usize, air[2] as usize),
                        };
                        let corner = |cu: usize, cv: usize| {
                            Vec3::ZERO
                                .with_component(axis, grid[axis][plane])
                                .with_component(u, grid[u][cu])
                                .with_component(v, grid[v][cv])
                        };
                        // Counter-clockwise about +axis.
                        let mut quad = [
                            corner(iu, iv),
                            corner(iu + 1, iv),
                            corner(iu + 1, iv + 1),
                            corner(iu, iv + 1),
                        ];
                        if !in_above {
                            quad.reverse();
                        }
                        let m = material(&info);
                        triangles.push(Triangle::new(quad[0], quad[1], quad[2], m.clone()));
                        triangles.push(Triangle::new(quad[0], quad[2], quad[3], m));
                    }
                }
            }
        }
        Mesh { triangles }
    }

    /// Edges (as quantized vertex pairs) not shared by exactly two triangles.
    pub fn unmatched_edges(&self) -> Vec<(Vec3, Vec3, usize)> {
        let mut count: HashMap<([i64; 3], [i64; 3]), (Vec3, Vec3, usize)> = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let a = tri.vertices[i];
                let b = tri.vertices[(i + 1) % 3];
                let (ka, kb) = (vertex_key(a), vertex_key(b));
                let key = if ka <= kb { (ka, kb) } else { (kb, ka) };
                count.entry(key).or_insert((a, b, 0)).2 += 1;
            }
        }
        let mut bad: Vec<_> = count.into_values().filter(|e| e.2 != 2).collect();
        bad.sort_by(|l, r| {
            vertex_key(l.0)
                .cmp(&vertex_key(r.0))
                .then(vertex_key(l.1).cmp(&vertex_key(r.1)))
        });
        bad
    }

    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.unmatched_edges().is_empty()
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        let signed: f64 = self
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.vertices;
                a.dot(b.cross(c)) / 6.0
            })
            .sum();
        signed.abs()
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    pub fn bounds(&self) -> Aabb {
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = -min;
        for v in self.triangles.iter().flat_map(|t| t.vertices) {
            min = Vec3::new(min.x.min(v.x), min.y.min(v.y), min.z.min(v.z));
            max = Vec3::new(max.x.max(v.x), max.y.max(v.y), max.z.max(v.z));
        }
        Aabb::new(min, max)
    }

    /// Parity test along three skewed directions; majority vote guards
    /// against rays that pass exactly through an edge or vertex.
    pub fn contains_point(&self, p: Vec3) -> bool {
        const DIRS: [Vec3; 3] = [
            Vec3::new(0.577_215_664_9, 0.318_309_886_1, 0.751_988_482_7),
            Vec3::new(-0.414_213_562_3, 0.707_106_781_2, 0.272_019_649_5),
            Vec3::new(0.161_803_398_8, -0.693_147_180_5, -0.301_029_995_6),
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let d = d.normalized();
                let crossings = self
                    .triangles
                    .iter()
                    .filter(|t| t.intersect(p, d, 0.0, 0.0).is_some())
                    .count();
                crossings % 2 == 1
            })
            .count();
        votes >= 2
    }

    /// Indices of triangles whose normal does not point into the enclosed volume.
    pub fn misoriented_triangles(&self) -> Vec<usize> {
        let b = self.bounds();
        let scale = (b.max - b.min).norm().max(1e-9);
        let step = 1e-6 * scale;
        self.triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let c = t.centroid();
                let n = t.normal();
                !(self.contains_point(c + n * step) && !self.contains_point(c - n * step))
            })
            .map(|(i, _)| i)
            .collect()
    }
}
