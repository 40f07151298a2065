//! Octave band set shared by materials, arrivals and histograms.

pub const NUM_BANDS: usize = 8;

/// Octave band center frequencies in Hz.
pub const BAND_CENTERS_HZ: [f64; NUM_BANDS] =
    [62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// One value per octave band.
pub type Bands = [f64; NUM_BANDS];

/// Lower edge of an octave band, `fc / sqrt(2)`.
pub fn lower_edge_hz(band: usize) -> f64 {
    BAND_CENTERS_HZ[band] / std::f64::consts::SQRT_2
}

/// Upper edge of an octave band, `fc * sqrt(2)`.
pub fn upper_edge_hz(band: usize) -> f64 {
    BAND_CENTERS_HZ[band] * std::f64::consts::SQRT_2
}
