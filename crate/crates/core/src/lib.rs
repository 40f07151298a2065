//! Geometric room acoustics and laboratory-validation toolkit.
//!
//! The crate synthesizes binaural impulse responses for a virtual stage
//! (`h_v`) and for the residual reflections of a physical laboratory room
//! (`h_u`), auralizes dry recordings through them, and measures how much the
//! residual sound raises the short-time level of what a musician hears.
//!
//! Module map:
//!
//! * [`scene`]: rooms, materials, source and receiver, presets, text format.
//! * [`ism`]: image-source early reflections for shoebox rooms.
//! * [`raytrace`]: stochastic energy ray tracing into a direction-resolved histogram.
//! * [`brir`]: HRTF lookup and binaural impulse response synthesis.
//! * [`dsp`]: convolution, mixing, short-time levels, SNR and level-difference tracks.
//! * [`analysis`]: frame gating, boxplot statistics and just-noticeable-difference verdicts.
//! * [`audio_io`]: WAV reading and writing.
//! * [`pipeline`]: in-memory composition of the above, used by the CLI.

pub mod analysis;
pub mod audio_io;
pub mod bands;
pub mod brir;
pub mod dsp;
mod error;
pub mod excerpt;
pub mod ism;
pub mod math;
pub mod pipeline;
pub mod raytrace;
pub mod scene;

pub use analysis::{boxplot_stats, gate_frames, jnd_verdict, BoxStats, Classification, JndVerdict};
pub use bands::{Bands, BAND_CENTERS_HZ, NUM_BANDS};
pub use brir::{
    direct_path_arrival, hrtf_lookup, synthesize_brir, HrtfSet, ImpulseResponsePair,
};
pub use dsp::{convolve, delta_l_track, level_track, mix, snr_track, LevelTrack, Signal};
pub use error::{Error, Result};
pub use ism::{image_sources, ism_arrivals, Arrival, ImageSource};
pub use math::Vec3;
pub use raytrace::{reflect, trace, EnergyHistogram, TraceOptions};
pub use scene::{
    preset_scene, sabine_rt, validate_scene, Material, Preset, ReceiverSpec, RoomGeometry, Scene,
    SourceSpec, ValidationReport,
};

/// Crate version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default simulation sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
