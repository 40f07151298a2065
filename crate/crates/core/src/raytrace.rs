//! Stochastic energy ray tracing.
//!
//! Rays leave the source uniformly over the sphere, weighted by the squared
//! directivity gain, and bounce until their energy falls below a floor or
//! their travel time exceeds `max_time`. Each time a ray enters the receiver
//! sphere of radius `r_d`, its per-band energy times `4 / (N r_d^2)` (the
//! ray's solid angle share over the sphere cross-section `pi r_d^2`) is added
//! to the histogram, so a free field reads `1 / r^2` at distance `r`, the
//! same unit as squared image-source amplitudes.
//!
//! Each ray draws from its own ChaCha stream keyed by `(seed, ray index)` and
//! hits are merged in ray order, so the result does not depend on the number
//! of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bands::{Bands, NUM_BANDS};
use crate::error::{Error, Result};
use crate::math::{orthonormal_basis, Vec3};
use crate::scene::Scene;

/// Parameters of a [`trace`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub n_rays: usize,
    pub seed: u64,
    /// Longest recorded delay in seconds.
    pub max_time: f64,
    /// Discard hits that reached the receiver without reflecting.
    pub skip_direct: bool,
    /// Discard hits with at most this many reflections.
    pub skip_order_leq: Option<u32>,
    /// Keep only hits with at most this many reflections.
    pub max_order: Option<u32>,
    pub receiver_radius: f64,
    pub bin_width: f64,
    /// Rays die when every band falls below this fraction of their initial energy.
    pub energy_floor: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            n_rays: 100_000,
            seed: 0,
            max_time: 1.0,
            skip_direct: false,
            skip_order_leq: None,
            max_order: None,
            receiver_radius: 0.25,
            bin_width: 1e-3,
            energy_floor: 1e-12,
        }
    }
}

impl TraceOptions {
    fn keeps(&self, order: u32) -> bool {
        if self.skip_direct && order == 0 {
            return false;
        }
        if let Some(k) = self.skip_order_leq {
            if order <= k {
                return false;
            }
        }
        if let Some(m) = self.max_order {
            if order > m {
                return false;
            }
        }
        true
    }
}

/// The 26 incidence directions: 6 axes, 12 edges, 8 corners of a cube.
pub fn direction_bins() -> Vec<Vec3> {
    let mut axes = Vec::new();
    let mut edges = Vec::new();
    let mut corners = Vec::new();
    for x in -1i32..=1 {
        for y in -1i32..=1 {
            for z in -1i32..=1 {
                let v = Vec3::new(x as f64, y as f64, z as f64);
                match x.abs() + y.abs() + z.abs() {
                    1 => axes.push(v),
                    2 => edges.push(v.normalized()),
                    3 => corners.push(v.normalized()),
                    _ => {}
                }
            }
        }
    }
    axes.into_iter().chain(edges).chain(corners).collect()
}

/// Index of the bin whose center has the largest dot product with `dir`;
/// ties go to the lowest index.
pub fn direction_bin(bins: &[Vec3], dir: Vec3) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, b) in bins.iter().enumerate() {
        let c = b.dot(dir);
        if c > best.0 {
            best = (c, i);
        }
    }
    best.1
}

/// Energy at the receiver by band, time bin and incidence direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    pub bin_width: f64,
    pub n_bins: usize,
    /// Unit vectors pointing from the receiver toward where energy came from.
    pub directions: Vec<Vec3>,
    /// Flat `[band][bin][direction]` array.
    pub data: Vec<f64>,
    pub rays_emitted: usize,
    pub seed: u64,
}

impl EnergyHistogram {
    pub fn zeros(bin_width: f64, n_bins: usize, directions: Vec<Vec3>) -> Self {
        let len = NUM_BANDS * n_bins * directions.len();
        EnergyHistogram {
            bin_width,
            n_bins,
            directions,
            data: vec![0.0; len],
            rays_emitted: 0,
            seed: 0,
        }
    }

    pub fn bands(&self) -> usize {
        NUM_BANDS
    }

    fn index(&self, band: usize, bin: usize, dir: usize) -> usize {
        (band * self.n_bins + bin) * self.directions.len() + dir
    }

    pub fn get(&self, band: usize, bin: usize, dir: usize) -> f64 {
        self.data[self.index(band, bin, dir)]
    }

    pub fn get_mut(&mut self, band: usize, bin: usize, dir: usize) -> &mut f64 {
        let i = self.index(band, bin, dir);
        &mut self.data[i]
    }

    /// Energy per time bin summed over directions.
    pub fn band_decay(&self, band: usize) -> Vec<f64> {
        let nd = self.directions.len();
        (0..self.n_bins)
            .map(|bin| {
                let start = self.index(band, bin, 0);
                self.data[start..start + nd].iter().sum()
            })
            .collect()
    }

    pub fn band_total(&self, band: usize) -> f64 {
        self.band_decay(band).iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sample-wise sum of two histograms with identical layout.
    pub fn add(&self, other: &EnergyHistogram) -> Result<EnergyHistogram> {
        if self.n_bins != other.n_bins
            || self.directions != other.directions
            || self.bin_width != other.bin_width
        {
            return Err(Error::InvalidArgument("histogram layouts differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }

    /// Rows `band,time_bin_s,direction_bin,energy` for every non-zero cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,time_bin_s,direction_bin,energy\n");
        for band in 0..NUM_BANDS {
            for bin in 0..self.n_bins {
                for dir in 0..self.directions.len() {
                    let e = self.get(band, bin, dir);
                    if e != 0.0 {
                        out.push_str(&format!("{band},{},{dir},{e}\n", bin as f64 * self.bin_width));
                    }
                }
            }
        }
        out
    }
}

/// Uniform draws consumed by one [`reflect`] call.
#[derive(Debug, Clone, Copy)]
pub struct ReflectionDraws {
    /// Diffuse when below the scattering coefficient.
    pub select: f64,
    pub u: f64,
    pub v: f64,
}

impl ReflectionDraws {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        ReflectionDraws {
            select: rng.gen(),
            u: rng.gen(),
            v: rng.gen(),
        }
    }
}

/// Vector-mixing reflection: specular mirror, or with probability
/// `scattering` a cosine-law (Lambert) direction about `normal`.
pub fn reflect(incoming: Vec3, normal: Vec3, scattering: f64, draws: ReflectionDraws) -> Vec3 {
    if draws.select < scattering {
        let (t, b) = orthonormal_basis(normal);
        let r = draws.u.sqrt();
        let phi = 2.0 * std::f64::consts::PI * draws.v;
        let cos_theta = (1.0 - draws.u).sqrt();
        (t * (r * phi.cos()) + b * (r * phi.sin()) + normal * cos_theta).normalized()
    } else {
        (incoming - normal * (2.0 * incoming.dot(normal))).normalized()
    }
}

struct Surface {
    a: Vec3,
    e1: Vec3,
    e2: Vec3,
    normal: Vec3,
    reflectance: Bands,
    scattering: f64,
}

impl Surface {
    fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        const EDGE_EPS: f64 = 1e-9;
        let p = dir.cross(self.e2);
        let det = self.e1.dot(p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - self.a;
        let u = s.dot(p) * inv;
        if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
            return None;
        }
        let q = s.cross(self.e1);
        let v = dir.dot(q) * inv;
        if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
            return None;
        }
        let t = self.e2.dot(q) * inv;
        (t > 1e-9).then_some(t)
    }
}

struct Hit {
    order: u32,
    bin: usize,
    dir: usize,
    energy: Bands,
}

struct Tracer<'a> {
    surfaces: Vec<Surface>,
    opts: &'a TraceOptions,
    source: Vec3,
    receiver: Vec3,
    speed: f64,
    air_db_per_m: Bands,
    directivity: &'a crate::scene::Directivity,
    bins: Vec<Vec3>,
    n_bins: usize,
    weight: f64,
}

impl Tracer<'_> {
    fn air_energy_factor(&self, band: usize, dist: f64) -> f64 {
        let a = self.air_db_per_m[band];
        if a == 0.0 {
            1.0
        } else {
            10f64.powf(-a * dist / 10.0)
        }
    }

    fn trace_ray(&self, index: usize) -> Result<Vec<Hit>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(index as u64);

        let z: f64 = 1.0 - 2.0 * rng.gen::<f64>();
        let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let rxy = (1.0 - z * z).max(0.0).sqrt();
        let mut dir = Vec3::new(rxy * phi.cos(), rxy * phi.sin(), z);

        let gain = self.directivity.gain(dir);
        let mut energy: Bands = std::array::from_fn(|b| gain[b] * gain[b]);
        let initial_max = energy.iter().cloned().fold(0.0, f64::max);
        if initial_max <= 0.0 {
            return Ok(Vec::new());
        }
        let floor = self.opts.energy_floor * initial_max;
        let r2 = self.opts.receiver_radius * self.opts.receiver_radius;
        let max_path = self.opts.max_time * self.speed;

        let mut hits = Vec::new();
        let mut pos = self.source;
        let mut path = 0.0;
        let mut order = 0u32;
        loop {
            let mut nearest: Option<(f64, usize)> = None;
            for (i, s) in self.surfaces.iter().enumerate() {
                if let Some(t) = s.intersect(pos, dir) {
                    if nearest.map_or(true, |(best, _)| t < best) {
                        nearest = Some((t, i));
                    }
                }
            }
            let (t_wall, surf) = nearest.ok_or(Error::RayEscaped {
                origin: pos,
                direction: dir,
            })?;

            // Receiver entry within this segment.
            let f = pos - self.receiver;
            let b = f.dot(dir);
            let disc = b * b - (f.norm_squared() - r2);
            if disc >= 0.0 {
                let t_enter = -b - disc.sqrt();
                if t_enter >= 0.0 && t_enter < t_wall && self.opts.keeps(order) {
                    let t_close = (-b).clamp(0.0, t_wall);
                    let dist = path + t_close;
                    if dist < max_path {
                        let bin = ((dist / self.speed) / self.opts.bin_width) as usize;
                        if bin < self.n_bins {
                            let recorded: Bands = std::array::from_fn(|k| {
                                energy[k] * self.air_energy_factor(k, dist) * self.weight
                            });
                            hits.push(Hit {
                                order,
                                bin,
                                dir: direction_bin(&self.bins, -dir),
                                energy: recorded,
                            });
                        }
                    }
                }
            }

            path += t_wall;
            if path >= max_path {
                break;
            }
            let s = &self.surfaces[surf];
            for (k, e) in energy.iter_mut().enumerate() {
                *e *= s.reflectance[k];
            }
            let alive = energy
                .iter()
                .enumerate()
                .any(|(k, e)| e * self.air_energy_factor(k, path) >= floor);
            if !alive {
                break;
            }
            // Nudge off the wall so rounding cannot leave the ray outside.
            pos = pos + dir * t_wall + s.normal * 1e-9;
            dir = reflect(dir, s.normal, s.scattering, ReflectionDraws::sample(&mut rng));
            order += 1;
        }
        Ok(hits)
    }
}

/// Traces `opts.n_rays` rays through `scene` and bins the receiver hits.
pub fn trace(scene: &Scene, opts: &TraceOptions) -> Result<EnergyHistogram> {
    if opts.n_rays == 0 {
        return Err(Error::InvalidArgument("n_rays must be at least 1".into()));
    }
    if !(opts.max_time > 0.0) || !(opts.bin_width > 0.0) || !(opts.receiver_radius > 0.0) {
        return Err(Error::InvalidArgument(
            "max_time, bin_width and receiver radius must be positive".into(),
        ));
    }
    if scene.source.position.distance(scene.receiver.position) <= opts.receiver_radius {
        return Err(Error::InvalidArgument(format!(
            "source lies inside the {} m receiver sphere",
            opts.receiver_radius
        )));
    }

    let mesh = scene.room.to_mesh();
    let mut surfaces = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let m = scene
            .material(&tri.material)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown material id `{}`", tri.material)))?;
        let [a, b, c] = tri.vertices;
        surfaces.push(Surface {
            a,
            e1: b - a,
            e2: c - a,
            normal: tri.normal(),
            reflectance: std::array::from_fn(|k| (1.0 - m.absorption[k]).max(0.0)),
            scattering: m.scattering.iter().sum::<f64>() / NUM_BANDS as f64,
        });
    }

    let n_bins = (opts.max_time / opts.bin_width).ceil() as usize;
    let bins = direction_bins();
    let tracer = Tracer {
        surfaces,
        opts,
        source: scene.source.position,
        receiver: scene.receiver.position,
        speed: scene.speed_of_sound,
        air_db_per_m: scene.air_absorption,
        directivity: &scene.source.directivity,
        bins: bins.clone(),
        n_bins,
        weight: 4.0 / (opts.n_rays as f64 * opts.receiver_radius * opts.receiver_radius),
    };

    let per_ray: Vec<Vec<Hit>> = (0..opts.n_rays)
        .into_par_iter()
        .map(|i| tracer.trace_ray(i))
        .collect::<Result<_>>()?;

    // Unreflected and reflected hits accumulate separately, so splitting a
    // run by `skip_direct` sums back to the full run bit for bit.
    let mut direct = EnergyHistogram::zeros(opts.bin_width, n_bins, bins);
    let mut reflected = direct.clone();
    for hit in per_ray.iter().flatten() {
        let target = if hit.order == 0 { &mut direct } else { &mut reflected };
        for (band, e) in hit.energy.iter().enumerate() {
            *target.get_mut(band, hit.bin, hit.dir) += e;
        }
    }
    let mut hist = reflected.add(&direct)?;
    hist.rays_emitted = opts.n_rays;
    hist.seed = opts.seed;
    Ok(hist)
}

/// Reverberation time from an energy-per-bin decay: Schroeder backward
/// integration, then a least-squares line through the -5 to -35 dB span
/// (-5 to -25 dB when the curve is too short), extrapolated to 60 dB.
pub fn fit_t60(decay: &[f64], bin_width: f64) -> Option<f64> {
    let total: f64 = decay.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut edc = vec![0.0; decay.len()];
    let mut acc = 0.0;
    for i in (0..decay.len()).rev() {
        acc += decay[i];
        edc[i] = acc;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).log10()).collect();
    for lower in [-35.0, -25.0] {
        let pts: Vec<(f64, f64)> = db
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= -5.0 && d >= lower && d.is_finite())
            .map(|(i, &d)| ((i as f64 + 0.5) * bin_width, d))
            .collect();
        if pts.len() < 3 {
            continue;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 {
            return Some(-60.0 / slope);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{preset_scene, Preset};

    fn draws(select: f64, u: f64, v: f64) -> ReflectionDraws {
        ReflectionDraws { select, u, v }
    }

    #[test]
    fn specular_mirror() {
        let inc = Vec3::new(-1.0, -1.0, 0.0).normalized();
        let out = reflect(inc, Vec3::Y, 0.0, draws(0.3, 0.2, 0.7));
        let expected = Vec3::new(-1.0, 1.0, 0.0).normalized();
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn reflection_stays_in_half_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Vec3::new(0.2, -0.5, 0.8).normalized();
        for _ in 0..10_000 {
            let inc = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                .normalized();
            let inc = if inc.dot(n) > 0.0 { -inc } else { inc };
            let s = rng.gen::<f64>();
            let out = reflect(inc, n, s, ReflectionDraws::sample(&mut rng));
            assert!(out.dot(n) >= 0.0);
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_bins_are_unit_and_distinct() {
        let bins = direction_bins();
        assert_eq!(bins.len(), 26);
        for (i, a) in bins.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert_eq!(direction_bin(&bins, *a), i);
        }
    }

    #[test]
    fn fully_absorbing_room_records_nothing_reflected() {
        let scene = preset_scene(Preset::Booth1).with_uniform_absorption(1.0);
        let opts = TraceOptions {
            n_rays: 5_000,
            skip_direct: true,
            max_time: 0.2,
            ..TraceOptions::default()
        };
        let h = trace(&scene, &opts).unwrap();
        assert!(h.data.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn free_field_calibration() {
        // Direct hits only: expected energy 1/r^2. The hit estimator assumes
        // r_d << r, so the receiver is moved 1.5 m away (bias below 1%).
        let mut scene = preset_scene(Preset::Anechoic);
        scene.receiver.position = scene.source.position + Vec3::new(0.0, 1.5, 0.0);
        let r = 1.5;
        let opts = TraceOptions {
            n_rays: 200_000,
            max_order: Some(0),
            max_time: 0.05,
            ..TraceOptions::default()
        };
        let h = trace(&scene, &opts).unwrap();
        let e = h.band_total(3);
        let expected = 1.0 / (r * r);
        assert!((e / expected - 1.0).abs() < 0.05, "{e} vs {expected}");
    }

    #[test]
    fn source_inside_receiver_sphere_is_rejected() {
        let mut scene = preset_scene(Preset::Booth1);
        scene.receiver.position = scene.source.position + Vec3::new(0.0, -0.01, 0.0);
        let opts = TraceOptions {
            n_rays: 10,
            ..TraceOptions::default()
        };
        assert!(matches!(trace(&scene, &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn open_mesh_reports_escape() {
        let mut scene = preset_scene(Preset::Booth1);
        let mut mesh = scene.room.to_mesh();
        mesh.triangles.truncate(10);
        scene.room = crate::scene::RoomGeometry::Mesh(mesh);
        let opts = TraceOptions {
            n_rays: 200,
            max_time: 0.2,
            ..TraceOptions::default()
        };
        assert!(matches!(trace(&scene, &opts), Err(Error::RayEscaped { .. })));
    }

    #[test]
    fn recorded_bins_within_max_time() {
        let scene = preset_scene(Preset::Booth1);
        let opts = TraceOptions {
            n_rays: 2_000,
            max_time: 0.0375,
            ..TraceOptions::default()
        };
        let h = trace(&scene, &opts).unwrap();
        assert_eq!(h.n_bins, 38);
        assert!(h.n_bins as f64 <= (opts.max_time / opts.bin_width).ceil());
    }

    #[test]
    fn fit_recovers_exponential() {
        // 60 dB per 0.5 s.
        let bw = 1e-3;
        let decay: Vec<f64> = (0..2000).map(|i| 10f64.powf(-12.0 * (i as f64 * bw))).collect();
        let t = fit_t60(&decay, bw).unwrap();
        assert!((t - 0.5).abs() < 1e-3, "{t}");
    }
}
