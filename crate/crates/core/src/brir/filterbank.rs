//! Zero-phase octave filterbank whose bands sum to a unit impulse.

use crate::bands::{lower_edge_hz, upper_edge_hz, NUM_BANDS};

/// Half-length of each band kernel; kernels have `2 * HALF_LEN + 1` taps.
pub const HALF_LEN: usize = 256;

/// Band `b` is `LP(upper_b) - LP(lower_b)`, with the lowest band a plain
/// lowpass and the highest band `delta - LP(lower_7)`, so the kernels
/// telescope to a unit impulse.
#[derive(Debug, Clone)]
pub struct OctaveFilterbank {
    pub kernels: Vec<Vec<f64>>,
    /// `sum(g_b^2)`: energy gain of band `b` for white noise.
    pub energy_gain: [f64; NUM_BANDS],
}

fn blackman(n: usize, len: usize) -> f64 {
    let x = 2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64;
    0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

/// Windowed-sinc lowpass with unit DC gain.
fn lowpass(cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    let len = 2 * HALF_LEN + 1;
    let fc = cutoff_hz / sample_rate;
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let m = n as f64 - HALF_LEN as f64;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * m).sin() / (std::f64::consts::PI * m)
            };
            sinc * blackman(n, len)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

impl OctaveFilterbank {
    pub fn new(sample_rate: u32) -> Self {
        let fs = sample_rate as f64;
        let len = 2 * HALF_LEN + 1;
        let mut delta = vec![0.0; len];
        delta[HALF_LEN] = 1.0;

        let edges: Vec<Vec<f64>> = (1..NUM_BANDS).map(|b| lowpass(lower_edge_hz(b), fs)).collect();
        let mut kernels = Vec::with_capacity(NUM_BANDS);
        for b in 0..NUM_BANDS {
            let upper = if b + 1 < NUM_BANDS { &edges[b] } else { &delta };
            debug_assert!(b + 1 == NUM_BANDS || (upper_edge_hz(b) - lower_edge_hz(b + 1)).abs() < 1e-9);
            let k: Vec<f64> = if b == 0 {
                upper.clone()
            } else {
                upper.iter().zip(&edges[b - 1]).map(|(u, l)| u - l).collect()
            };
            kernels.push(k);
        }
        let energy_gain = std::array::from_fn(|b| kernels[b].iter().map(|v| v * v).sum());
        OctaveFilterbank { kernels, energy_gain }
    }

    /// `sum_b amplitude_b * g_b`, centered at index [`HALF_LEN`].
    pub fn weighted_kernel(&self, amplitude: &[f64; NUM_BANDS]) -> Vec<f64> {
        let mut k = vec![0.0; 2 * HALF_LEN + 1];
        for (b, a) in amplitude.iter().enumerate() {
            if *a != 0.0 {
                for (dst, g) in k.iter_mut().zip(&self.kernels[b]) {
                    *dst += a * g;
                }
            }
        }
        k
    }
}
