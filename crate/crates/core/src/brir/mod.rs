//! Binaural room impulse response synthesis.
//!
//! Deterministic arrivals become band-shaped impulses filtered by the HRTF of
//! their incidence direction. The ray-traced late field becomes Gaussian
//! noise, one stream per (band, direction bin), band-filtered and then scaled
//! bin by bin so that its energy matches the histogram exactly.

mod filterbank;
mod hrtf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bands::{upper_edge_hz, NUM_BANDS};
use crate::dsp::fft_convolve;
use crate::error::{Error, Result};
use crate::ism::{air_pressure_factor, Arrival};
use crate::math::Vec3;
use crate::raytrace::EnergyHistogram;
use crate::scene::{HrtfRef, ReceiverSpec, Scene};

pub use filterbank::{OctaveFilterbank, HALF_LEN as BAND_KERNEL_HALF_LEN};
pub use hrtf::{hrtf_lookup, FirPair, HrtfGrid, HrtfSet, ParametricHead};

/// Two-channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponsePair {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: u32,
}

impl ImpulseResponsePair {
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Self {
        ImpulseResponsePair {
            left,
            right,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        ImpulseResponsePair::new(vec![0.0; len], vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Squared sum over both ears.
    pub fn energy(&self) -> f64 {
        self.left.iter().chain(&self.right).map(|v| v * v).sum()
    }

    /// Adds `ear` pair into the response starting at sample `offset`, growing
    /// it if needed. Samples at negative positions are dropped.
    fn accumulate(&mut self, offset: isize, left: &[f64], right: &[f64]) {
        for (dst, src) in [(&mut self.left, left), (&mut self.right, right)] {
            let end = offset + src.len() as isize;
            if end > dst.len() as isize {
                dst.resize(end as usize, 0.0);
            }
            for (i, v) in src.iter().enumerate() {
                let pos = offset + i as isize;
                if pos >= 0 {
                    dst[pos as usize] += v;
                }
            }
        }
    }

    fn pad_to(&mut self, len: usize) {
        if self.left.len() < len {
            self.left.resize(len, 0.0);
            self.right.resize(len, 0.0);
        }
    }

    /// Sample-wise sum; the shorter response is zero-padded.
    pub fn add(&self, other: &ImpulseResponsePair) -> Result<ImpulseResponsePair> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, other.sample_rate));
        }
        let mut out = self.clone();
        out.accumulate(0, &other.left, &other.right);
        Ok(out)
    }
}

/// Head orientation used to express world directions in the head frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub look: Vec3,
    pub up: Vec3,
}

impl Orientation {
    pub fn to_head_frame(&self, dir: Vec3) -> Vec3 {
        let left = self.up.cross(self.look);
        Vec3::new(dir.dot(self.look), dir.dot(left), dir.dot(self.up))
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation {
            look: Vec3::X,
            up: Vec3::Z,
        }
    }
}

impl From<&ReceiverSpec> for Orientation {
    fn from(r: &ReceiverSpec) -> Self {
        Orientation {
            look: r.look,
            up: r.up,
        }
    }
}

/// Resolves a receiver's HRTF reference into a filter set.
pub fn load_hrtf(receiver: &ReceiverSpec, speed_of_sound: f64, sample_rate: u32) -> Result<HrtfSet> {
    match &receiver.hrtf {
        HrtfRef::Parametric { head_radius } => Ok(HrtfSet::Parametric(ParametricHead::new(
            *head_radius,
            speed_of_sound,
            sample_rate,
        ))),
        HrtfRef::GridFile(path) => Ok(HrtfSet::Grid(HrtfGrid::load(path)?)),
    }
}

/// The unobstructed source-to-receiver path.
pub fn direct_path_arrival(scene: &Scene) -> Result<Arrival> {
    let to_receiver = scene.receiver.position - scene.source.position;
    let dist = to_receiver.norm();
    if dist < 1e-6 {
        return Err(Error::CoincidentSourceReceiver { distance: dist });
    }
    let gain = scene.source.directivity.gain(to_receiver / dist);
    Ok(Arrival {
        delay: dist / scene.speed_of_sound,
        amplitude: std::array::from_fn(|b| {
            gain[b] / dist * air_pressure_factor(scene.air_absorption[b], dist)
        }),
        direction: -to_receiver / dist,
        order: 0,
    })
}

fn check_rates(hrtf: &HrtfSet, sample_rate: u32) -> Result<()> {
    let edge = upper_edge_hz(NUM_BANDS - 1);
    if (sample_rate as f64) / 2.0 <= edge {
        return Err(Error::NyquistViolation {
            sample_rate,
            band_edge_hz: edge,
        });
    }
    if hrtf.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch(hrtf.sample_rate(), sample_rate));
    }
    Ok(())
}

fn bin_slice(x: &mut [f64], bin: usize, bin_width: f64, sample_rate: u32) -> &mut [f64] {
    let len = x.len();
    let (start, end) = bin_span(bin, bin_width, sample_rate);
    &mut x[start.min(len)..end.min(len)]
}

/// Sample range covered by histogram bin `bin`.
fn bin_span(bin: usize, bin_width: f64, sample_rate: u32) -> (usize, usize) {
    let fs = sample_rate as f64;
    let start = (bin as f64 * bin_width * fs).round() as usize;
    let end = ((bin + 1) as f64 * bin_width * fs).round() as usize;
    (start, end)
}

/// Late-field component of each band, HRTF-filtered per direction bin.
///
/// Before HRTF filtering, the direction-summed carrier of band `b` holds
/// `kappa_b * E` in every time bin with histogram energy `E`, where `kappa_b`
/// is the band's white-noise energy gain ([`OctaveFilterbank::energy_gain`]).
/// Directions keep their relative energies within a bin.
/// The bands therefore add up to a broadband field whose band `b` share
/// equals the histogram's band energy.
pub fn late_field_bands(
    histogram: &EnergyHistogram,
    hrtf: &HrtfSet,
    orientation: &Orientation,
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<ImpulseResponsePair>> {
    check_rates(hrtf, sample_rate)?;
    let bank = OctaveFilterbank::new(sample_rate);
    let n_dirs = histogram.directions.len();
    let body_len = bin_span(histogram.n_bins, histogram.bin_width, sample_rate).0;
    let filters: Vec<FirPair> = histogram
        .directions
        .iter()
        .map(|d| hrtf_lookup(hrtf, orientation.to_head_frame(*d)))
        .collect();

    let cells: Vec<(usize, usize)> = (0..NUM_BANDS)
        .flat_map(|b| (0..n_dirs).map(move |d| (b, d)))
        .collect();
    // Band-limited noise per cell, scaled so each bin carries the cell's energy.
    let mut carriers: Vec<Option<Vec<f64>>> = cells
        .par_iter()
        .map(|&(band, dir)| {
            let energies: Vec<f64> = (0..histogram.n_bins).map(|t| histogram.get(band, t, dir)).collect();
            if energies.iter().all(|e| *e == 0.0) {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((band * n_dirs + dir) as u64 + 1);
            let pad = BAND_KERNEL_HALF_LEN;
            let noise: Vec<f64> = (0..body_len + 2 * pad)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let filtered = fft_convolve(&noise, &bank.kernels[band]);
            // Zero-phase alignment: drop the kernel's half length and the pad.
            let mut carrier: Vec<f64> = filtered[2 * pad..2 * pad + body_len].to_vec();
            for (t, e) in energies.iter().enumerate() {
                let seg = bin_slice(&mut carrier, t, histogram.bin_width, sample_rate);
                let have: f64 = seg.iter().map(|v| v * v).sum();
                let gain = if *e > 0.0 && have > 0.0 { (e / have).sqrt() } else { 0.0 };
                seg.iter_mut().for_each(|v| *v *= gain);
            }
            Some(carrier)
        })
        .collect();

    // Independent cells still interfere within a short bin. One gain per
    // (band, bin), applied to every direction, makes the summed pressure carry
    // exactly kappa_b times the bin's total energy.
    for band in 0..NUM_BANDS {
        let cell_range = band * n_dirs..(band + 1) * n_dirs;
        if carriers[cell_range.clone()].iter().all(Option::is_none) {
            continue;
        }
        let mut sum = vec![0.0; body_len];
        for c in carriers[cell_range.clone()].iter().flatten() {
            sum.iter_mut().zip(c).for_each(|(s, v)| *s += v);
        }
        for t in 0..histogram.n_bins {
            let want: f64 = (0..n_dirs).map(|d| histogram.get(band, t, d)).sum::<f64>() * bank.energy_gain[band];
            let have: f64 = bin_slice(&mut sum, t, histogram.bin_width, sample_rate).iter().map(|v| v * v).sum();
            let gain = if want > 0.0 && have > 0.0 { (want / have).sqrt() } else { 0.0 };
            for c in carriers[cell_range.clone()].iter_mut().flatten() {
                bin_slice(c, t, histogram.bin_width, sample_rate).iter_mut().for_each(|v| *v *= gain);
            }
        }
    }

    let rendered: Vec<Option<(usize, ImpulseResponsePair)>> = cells
        .par_iter()
        .zip(carriers.par_iter())
        .map(|(&(band, dir), carrier)| {
            let carrier = carrier.as_ref()?;
            let f = &filters[dir];
            let pair = ImpulseResponsePair::new(
                fft_convolve(carrier, &f.left),
                fft_convolve(carrier, &f.right),
                sample_rate,
            );
            Some((band, pair))
        })
        .collect();

    let mut bands = vec![ImpulseResponsePair::zeros(0, sample_rate); NUM_BANDS];
    for (band, pair) in rendered.into_iter().flatten() {
        bands[band].accumulate(0, &pair.left, &pair.right);
    }
    Ok(bands)
}

/// Renders arrivals and the late field into one binaural response.
///
/// The histogram must exclude the reflection orders already covered by
/// `arrivals`; pass `None` for a purely deterministic response.
pub fn synthesize_brir(
    arrivals: &[Arrival],
    histogram: Option<&EnergyHistogram>,
    hrtf: &HrtfSet,
    orientation: &Orientation,
    sample_rate: u32,
    seed: u64,
) -> Result<ImpulseResponsePair> {
    check_rates(hrtf, sample_rate)?;
    let fs = sample_rate as f64;
    let mut out = ImpulseResponsePair::zeros(1, sample_rate);

    if let Some(h) = histogram {
        for band in late_field_bands(h, hrtf, orientation, sample_rate, seed)? {
            out.accumulate(0, &band.left, &band.right);
        }
    }

    let bank = OctaveFilterbank::new(sample_rate);
    for a in arrivals {
        if !(a.delay >= 0.0) || a.amplitude.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("arrival with invalid delay or amplitude".into()));
        }
        let n0 = (a.delay * fs).round() as isize;
        let flat = a.amplitude.iter().all(|v| *v == a.amplitude[0]);
        // A flat spectrum is an exact impulse; otherwise shape with the bank.
        let (kernel, offset) = if flat {
            (vec![a.amplitude[0]], n0)
        } else {
            (bank.weighted_kernel(&a.amplitude), n0 - BAND_KERNEL_HALF_LEN as isize)
        };
        let f = hrtf_lookup(hrtf, orientation.to_head_frame(a.direction));
        let left = fft_convolve(&kernel, &f.left);
        let right = fft_convolve(&kernel, &f.right);
        out.accumulate(offset, &left, &right);
    }
    if let Some(h) = histogram {
        out.pad_to(bin_span(h.n_bins, h.bin_width, sample_rate).0);
    }
    Ok(out)
}
