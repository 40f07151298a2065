//! Head-related transfer functions: measured grids and a spherical-head model.
//!
//! Directions handed to [`hrtf_lookup`] are unit vectors in the head frame
//! `(forward, left, up)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Left and right ear impulse responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FirPair {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Spherical head with Woodworth ITD and a one-pole/one-zero head shadow
/// per ear.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricHead {
    pub head_radius: f64,
    pub speed_of_sound: f64,
    pub sample_rate: u32,
    pub fir_len: usize,
}

impl ParametricHead {
    /// Latency applied to both ears so fractional ITDs stay causal.
    pub const BULK_DELAY: usize = 16;

    pub fn new(head_radius: f64, speed_of_sound: f64, sample_rate: u32) -> Self {
        ParametricHead {
            head_radius,
            speed_of_sound,
            sample_rate,
            fir_len: 128,
        }
    }

    /// Interaural time difference in seconds, `t_right - t_left`: positive
    /// when the sound comes from the left.
    pub fn itd(&self, direction: Vec3) -> f64 {
        let lateral = direction.y.clamp(-1.0, 1.0).asin();
        self.head_radius / self.speed_of_sound * (lateral + lateral.sin())
    }

    /// Head-shadow filter for an ear whose axis makes `angle` radians with
    /// the source direction: `(1 + j a w / 2w0) / (1 + j w / 2w0)`,
    /// `w0 = c / r`, discretized with the bilinear transform.
    fn shadow(&self, angle: f64, len: usize) -> Vec<f64> {
        const ALPHA_MIN: f64 = 0.1;
        const THETA_MIN: f64 = 150.0 * PI / 180.0;
        let alpha = (1.0 + ALPHA_MIN / 2.0) + (1.0 - ALPHA_MIN / 2.0) * (angle / THETA_MIN * PI).cos();
        let w0 = self.speed_of_sound / self.head_radius;
        let k = 2.0 * self.sample_rate as f64;
        let norm = 2.0 * w0 + k;
        let b0 = (2.0 * w0 + alpha * k) / norm;
        let b1 = (2.0 * w0 - alpha * k) / norm;
        let a1 = (2.0 * w0 - k) / norm;
        let mut h = vec![0.0; len];
        let mut prev_out = 0.0;
        for (n, out) in h.iter_mut().enumerate() {
            let x0 = if n == 0 { 1.0 } else { 0.0 };
            let x1 = if n == 1 { 1.0 } else { 0.0 };
            let y = b0 * x0 + b1 * x1 - a1 * prev_out;
            *out = y;
            prev_out = y;
        }
        h
    }

    fn ear(&self, angle: f64, delay_samples: f64) -> Vec<f64> {
        let shadow = self.shadow(angle, self.fir_len);
        let delay = fractional_delay(delay_samples, self.fir_len);
        let mut out = vec![0.0; self.fir_len];
        for (i, s) in shadow.iter().enumerate() {
            for (j, d) in delay.iter().enumerate() {
                if let Some(o) = out.get_mut(i + j) {
                    *o += s * d;
                }
            }
        }
        out
    }

    pub fn lookup(&self, direction: Vec3) -> FirPair {
        let dir = direction.normalized();
        let itd_samples = self.itd(dir) * self.sample_rate as f64;
        let bulk = Self::BULK_DELAY as f64;
        let (left_delay, right_delay) = if itd_samples >= 0.0 {
            (bulk, bulk + itd_samples)
        } else {
            (bulk - itd_samples, bulk)
        };
        let left_angle = dir.y.clamp(-1.0, 1.0).acos();
        let right_angle = (-dir.y).clamp(-1.0, 1.0).acos();
        FirPair {
            left: self.ear(left_angle, left_delay),
            right: self.ear(right_angle, right_delay),
        }
    }
}

/// Windowed-sinc fractional delay; integer delays give an exact unit impulse.
fn fractional_delay(delay: f64, len: usize) -> Vec<f64> {
    const HALF_WIDTH: f64 = 16.0;
    let mut h = vec![0.0; len];
    if delay.fract() == 0.0 {
        if let Some(v) = h.get_mut(delay as usize) {
            *v = 1.0;
        }
        return h;
    }
    for (n, v) in h.iter_mut().enumerate() {
        let m = n as f64 - delay;
        if m.abs() < HALF_WIDTH {
            let sinc = (PI * m).sin() / (PI * m);
            let window = 0.5 * (1.0 + (PI * m / HALF_WIDTH).cos());
            *v = sinc * window;
        }
    }
    h
}

/// Measured HRTF pairs on a direction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfGrid {
    pub directions: Vec<Vec3>,
    pub filters: Vec<FirPair>,
    pub sample_rate: u32,
}

impl HrtfGrid {
    pub fn fir_len(&self) -> usize {
        self.filters.first().map_or(0, |f| f.left.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() || self.directions.len() != self.filters.len() {
            return Err(Error::HrtfFormat("grid needs one filter pair per direction".into()));
        }
        if self.directions.iter().any(|d| (d.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::HrtfFormat("grid directions must be unit vectors".into()));
        }
        let len = self.fir_len();
        if len == 0 || self.filters.iter().any(|f| f.left.len() != len || f.right.len() != len) {
            return Err(Error::HrtfFormat("FIR lengths differ across the set".into()));
        }
        Ok(())
    }

    /// Nearest direction by angular distance, ties to the lowest index.
    pub fn lookup(&self, direction: Vec3) -> &FirPair {
        let dir = direction.normalized();
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, d) in self.directions.iter().enumerate() {
            let c = d.dot(dir);
            if c > best.0 {
                best = (c, i);
            }
        }
        &self.filters[best.1]
    }

    /// Parses the `HRTFGRID v1 <n_dirs> <fir_len> <sample_rate>` text format:
    /// per direction a left line and a right line, each `x y z tap...`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::HrtfFormat("empty file".into()))?
            .split_whitespace()
            .collect();
        if header.len() != 5 || header[0] != "HRTFGRID" || header[1] != "v1" {
            return Err(Error::HrtfFormat(format!("bad header `{}`", header.join(" "))));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::HrtfFormat(format!("`{s}` is not an integer")))
        };
        let (n_dirs, fir_len, sample_rate) = (num(header[2])?, num(header[3])?, num(header[4])? as u32);

        let mut parse_line = |ear: &str| -> Result<(Vec3, Vec<f64>)> {
            let line = lines
                .next()
                .ok_or_else(|| Error::HrtfFormat(format!("missing {ear} line")))?;
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::HrtfFormat(format!("`{t}` is not a number"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != 3 + fir_len {
                return Err(Error::HrtfFormat(format!(
                    "{ear} line has {} values, expected {}",
                    values.len(),
                    3 + fir_len
                )));
            }
            Ok((Vec3::new(values[0], values[1], values[2]), values[3..].to_vec()))
        };

        let mut directions = Vec::with_capacity(n_dirs);
        let mut filters = Vec::with_capacity(n_dirs);
        for _ in 0..n_dirs {
            let (dl, left) = parse_line("left")?;
            let (dr, right) = parse_line("right")?;
            if (dl - dr).norm() > 1e-9 {
                return Err(Error::HrtfFormat("left and right lines disagree on direction".into()));
            }
            directions.push(dl);
            filters.push(FirPair { left, right });
        }
        let grid = HrtfGrid {
            directions,
            filters,
            sample_rate,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "HRTFGRID v1 {} {} {}\n",
            self.directions.len(),
            self.fir_len(),
            self.sample_rate
        );
        for (d, f) in self.directions.iter().zip(&self.filters) {
            for taps in [&f.left, &f.right] {
                let _ = write!(out, "{} {} {}", d.x, d.y, d.z);
                for t in taps {
                    let _ = write!(out, " {t}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HrtfSet {
    Parametric(ParametricHead),
    Grid(HrtfGrid),
}

impl HrtfSet {
    /// Single-direction grid with unit-impulse filters: no head at all.
    pub fn identity(sample_rate: u32) -> Self {
        HrtfSet::Grid(HrtfGrid {
            directions: vec![Vec3::X],
            filters: vec![FirPair {
                left: vec![1.0],
                right: vec![1.0],
            }],
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        match self {
            HrtfSet::Parametric(p) => p.sample_rate,
            HrtfSet::Grid(g) => g.sample_rate,
        }
    }
}

/// Filter pair for a head-frame direction.
pub fn hrtf_lookup(set: &HrtfSet, direction: Vec3) -> FirPair {
    match set {
        HrtfSet::Parametric(p) => p.lookup(direction),
        HrtfSet::Grid(g) => g.lookup(direction).clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head() -> ParametricHead {
        ParametricHead::new(0.0875, 343.0, 48_000)
    }

    fn peak_index(h: &[f64]) -> usize {
        h.iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0
    }

    #[test]
    fn frontal_is_symmetric() {
        let p = head();
        assert_eq!(p.itd(Vec3::X), 0.0);
        let pair = p.lookup(Vec3::X);
        assert_eq!(pair.left, pair.right);
    }

    #[test]
    fn woodworth_at_ninety_degrees() {
        // (0.0875 / 343) * (pi/2 + 1)
        let itd = head().itd(Vec3::Y);
        assert!((itd * 1e3 - 0.6558).abs() < 5e-4, "{itd}");
    }

    #[test]
    fn itd_is_antisymmetric() {
        let p = head();
        for deg in (-90..=90).step_by(5) {
            let t = (deg as f64).to_radians();
            let d = Vec3::new(t.cos(), t.sin(), 0.0);
            let m = Vec3::new(t.cos(), -t.sin(), 0.0);
            assert!((p.itd(d) + p.itd(m)).abs() < 1e-15);
        }
    }

    #[test]
    fn lateral_source_delays_and_shadows_far_ear() {
        let p = head();
        let pair = p.lookup(Vec3::Y);
        let (l, r) = (peak_index(&pair.left), peak_index(&pair.right));
        assert!(r > l + 25, "left peak {l}, right peak {r}");
        let energy = |h: &[f64]| h.iter().map(|v| v * v).sum::<f64>();
        assert!(energy(&pair.left) > energy(&pair.right));
    }

    #[test]
    fn grid_nearest_neighbour_and_ties() {
        let grid = HrtfGrid {
            directions: vec![Vec3::X, Vec3::Y, -Vec3::X],
            filters: (0..3)
                .map(|i| FirPair {
                    left: vec![i as f64, 0.0],
                    right: vec![0.0, i as f64],
                })
                .collect(),
            sample_rate: 48_000,
        };
        assert_eq!(grid.lookup(Vec3::new(0.9, 0.1, 0.0)).left[0], 0.0);
        assert_eq!(grid.lookup(Vec3::new(-0.2, 0.9, 0.1)).left[0], 1.0);
        // Equidistant from +x and +y: lowest index wins.
        assert_eq!(grid.lookup(Vec3::new(1.0, 1.0, 0.0)).left[0], 0.0);
    }

    #[test]
    fn grid_text_round_trip() {
        let grid = HrtfGrid {
            directions: vec![Vec3::X, Vec3::new(0.0, 0.6, 0.8)],
            filters: vec![
                FirPair {
                    left: vec![1.0, 0.5, 0.25],
                    right: vec![0.1, 0.2, 0.3],
                },
                FirPair {
                    left: vec![-1.0, 1e-9, 3.0],
                    right: vec![0.0, 0.0, 1.0],
                },
            ],
            sample_rate: 44_100,
        };
        assert_eq!(HrtfGrid::parse(&grid.to_text()).unwrap(), grid);
    }

    #[test]
    fn grid_format_errors() {
        assert!(HrtfGrid::parse("HRTFGRID v2 1 1 48000\n").is_err());
        assert!(HrtfGrid::parse("HRTFGRID v1 1 2 48000\n1 0 0 1 0\n").is_err());
        assert!(HrtfGrid::parse("HRTFGRID v1 1 1 48000\n1 0 0 1\n0 1 0 1\n").is_err());
        assert!(HrtfGrid::parse("HRTFGRID v1 1 1 48000\n2 0 0 1\n2 0 0 1\n").is_err());
    }
}
