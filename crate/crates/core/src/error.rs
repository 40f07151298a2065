use std::path::PathBuf;

use crate::math::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown preset `{0}` (expected one of anechoic, booth1, booth2, stage_small, stage_large)")]
    UnknownPreset(String),

    #[error("reverberation time undefined: no surface absorbs in band {band}")]
    NoAbsorption { band: usize },

    #[error("operation requires a shoebox room")]
    NotShoebox,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ray escaped the room at ({}, {}, {}) heading ({}, {}, {})",
        .origin.x, .origin.y, .origin.z, .direction.x, .direction.y, .direction.z)]
    RayEscaped { origin: Vec3, direction: Vec3 },

    #[error("source and receiver coincide (distance {distance:e} m)")]
    CoincidentSourceReceiver { distance: f64 },

    #[error("sample rate {sample_rate} Hz cannot represent the {band_edge_hz:.0} Hz upper band edge")]
    NyquistViolation { sample_rate: u32, band_edge_hz: f64 },

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("track mismatch: {0}")]
    TrackMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("scene parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("HRTF grid file error: {0}")]
    HrtfFormat(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed WAV file: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWav(String),

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
