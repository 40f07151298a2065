//! In-memory composition: scenes to responses, responses to signals, signals
//! to level statistics.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    boxplot_stats, gate_frames, jnd_verdict, quantile_sorted, select, BoxStats, JndVerdict,
    DEFAULT_GATE_DB, DEFAULT_JND_DB,
};
use crate::bands::NUM_BANDS;
use crate::brir::{direct_path_arrival, load_hrtf, synthesize_brir, ImpulseResponsePair, Orientation};
use crate::dsp::{convolve, delta_l_track, level_track, mix, snr_track, LevelTrack, Signal};
use crate::error::{Error, Result};
use crate::ism::ism_arrivals;
use crate::raytrace::{trace, EnergyHistogram, TraceOptions};
use crate::scene::{sabine_rt, RoomGeometry, Scene};

/// Response length bounds when derived from the Sabine estimate.
const MIN_AUTO_TIME: f64 = 0.1;
const MAX_AUTO_TIME: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub sample_rate: u32,
    pub n_rays: usize,
    pub seed: u64,
    /// Image-source order used for shoebox lab rooms.
    pub max_order: u32,
    /// Response length; `None` derives it from the room's Sabine time.
    pub max_time: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            sample_rate: crate::DEFAULT_SAMPLE_RATE,
            n_rays: 100_000,
            seed: 0,
            max_order: 2,
            max_time: None,
        }
    }
}

/// 1.5 times the longest band Sabine time, clamped to [0.1, 3] s.
pub fn auto_max_time(scene: &Scene) -> f64 {
    let mut longest: f64 = 0.0;
    for b in 0..NUM_BANDS {
        match sabine_rt(scene, b) {
            Ok(t) => longest = longest.max(t),
            Err(_) => return MAX_AUTO_TIME,
        }
    }
    (1.5 * longest).clamp(MIN_AUTO_TIME, MAX_AUTO_TIME)
}

fn trace_options(scene: &Scene, s: &SimulationSettings) -> TraceOptions {
    TraceOptions {
        n_rays: s.n_rays,
        seed: s.seed,
        max_time: s.max_time.unwrap_or_else(|| auto_max_time(scene)),
        ..TraceOptions::default()
    }
}

/// A synthesized response together with the histogram behind its late part.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub brir: ImpulseResponsePair,
    pub histogram: EnergyHistogram,
}

/// `h_v`: direct path plus every ray-traced reflection of the stage.
pub fn virtual_brir(stage: &Scene, s: &SimulationSettings) -> Result<Simulated> {
    let hrtf = load_hrtf(&stage.receiver, stage.speed_of_sound, s.sample_rate)?;
    let opts = TraceOptions {
        skip_direct: true,
        ..trace_options(stage, s)
    };
    let histogram = trace(stage, &opts)?;
    let direct = direct_path_arrival(stage)?;
    let brir = synthesize_brir(
        &[direct],
        Some(&histogram),
        &hrtf,
        &Orientation::from(&stage.receiver),
        s.sample_rate,
        s.seed,
    )?;
    Ok(Simulated { brir, histogram })
}

/// `h_u`: lab-room reflections without the direct path. Shoebox rooms get
/// exact image sources up to `max_order` and rays for the higher orders;
/// mesh rooms are ray traced alone.
pub fn residual_brir(lab: &Scene, s: &SimulationSettings) -> Result<Simulated> {
    let hrtf = load_hrtf(&lab.receiver, lab.speed_of_sound, s.sample_rate)?;
    let base = trace_options(lab, s);
    let (arrivals, opts) = match lab.room {
        RoomGeometry::Shoebox(_) => (
            ism_arrivals(lab, s.max_order, true)?,
            TraceOptions {
                skip_direct: true,
                skip_order_leq: Some(s.max_order),
                ..base
            },
        ),
        RoomGeometry::Mesh(_) => (
            Vec::new(),
            TraceOptions {
                skip_direct: true,
                ..base
            },
        ),
    };
    let histogram = trace(lab, &opts)?;
    let brir = synthesize_brir(
        &arrivals,
        Some(&histogram),
        &hrtf,
        &Orientation::from(&lab.receiver),
        s.sample_rate,
        s.seed.wrapping_add(1),
    )?;
    Ok(Simulated { brir, histogram })
}

/// Averages the channels of a multichannel input into one.
pub fn to_mono(x: &Signal) -> Signal {
    if x.num_channels() == 1 {
        return x.clone();
    }
    let n = x.num_channels() as f64;
    let samples = (0..x.len())
        .map(|i| x.channels.iter().map(|c| c[i]).sum::<f64>() / n)
        .collect();
    Signal::mono(samples, x.sample_rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Auralized {
    pub y_v: Signal,
    pub y_u: Signal,
    pub y_t: Signal,
}

/// `y_v = x * h_v`, `y_u = x * h_u`, `y_t = y_v + y_u`, all padded to one length.
pub fn auralize(x: &Signal, h_v: &ImpulseResponsePair, h_u: &ImpulseResponsePair) -> Result<Auralized> {
    let x = to_mono(x);
    let y_v = convolve(&x, h_v)?;
    let y_u = convolve(&x, h_u)?;
    let len = y_v.len().max(y_u.len());
    let y_v = y_v.padded(len);
    let y_u = y_u.padded(len);
    let y_t = mix(&y_v, &y_u)?;
    Ok(Auralized { y_v, y_u, y_t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub window: f64,
    pub hop: f64,
    pub gate_db: f64,
    pub jnd_db: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            window: 0.002,
            hop: 0.002,
            gate_db: DEFAULT_GATE_DB,
            jnd_db: DEFAULT_JND_DB,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub lv: LevelTrack,
    pub lu: LevelTrack,
    pub lt: LevelTrack,
    pub snr: LevelTrack,
    pub delta_l: LevelTrack,
    pub gate: Vec<bool>,
    pub stats: BoxStats,
    pub verdict: JndVerdict,
    /// Median SNR over the gated frames.
    pub snr_median: f64,
}

pub fn analyze(y_v: &Signal, y_u: &Signal, y_t: &Signal, s: &AnalysisSettings) -> Result<Analysis> {
    if y_v.len() != y_u.len() || y_v.len() != y_t.len() {
        return Err(Error::TrackMismatch(format!(
            "signal lengths differ: {}, {}, {}",
            y_v.len(),
            y_u.len(),
            y_t.len()
        )));
    }
    if y_v.sample_rate != y_u.sample_rate || y_v.sample_rate != y_t.sample_rate {
        return Err(Error::SampleRateMismatch(y_v.sample_rate, y_u.sample_rate));
    }
    let lv = level_track(y_v, s.window, s.hop)?;
    let lu = level_track(y_u, s.window, s.hop)?;
    let lt = level_track(y_t, s.window, s.hop)?;
    let snr = snr_track(&lv, &lu)?;
    let delta_l = delta_l_track(&lt, &lv)?;
    let gate = gate_frames(&lv, s.gate_db);
    let samples = select(&delta_l, &gate);
    if samples.is_empty() {
        return Err(Error::Empty("gated frames"));
    }
    let stats = boxplot_stats(&samples)?;
    let verdict = jnd_verdict(&stats, s.jnd_db);
    let mut snr_gated = select(&snr, &gate);
    snr_gated.sort_by(f64::total_cmp);
    let snr_median = quantile_sorted(&snr_gated, 0.5);
    Ok(Analysis {
        lv,
        lu,
        lt,
        snr,
        delta_l,
        gate,
        stats,
        verdict,
        snr_median,
    })
}
