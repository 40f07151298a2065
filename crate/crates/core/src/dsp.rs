//! Convolution, mixing and short-time level tracks.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::brir::ImpulseResponsePair;
use crate::error::{Error, Result};

/// Clamp applied to short-time levels in dB.
pub const LEVEL_FLOOR_DB: f64 = -120.0;

/// One- or two-channel sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl Signal {
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Self {
        Signal {
            channels: vec![samples],
            sample_rate,
        }
    }

    pub fn stereo(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Self {
        Signal {
            channels: vec![left, right],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Zero-pads every channel to `len` samples.
    pub fn padded(&self, len: usize) -> Signal {
        let mut out = self.clone();
        for ch in &mut out.channels {
            if ch.len() < len {
                ch.resize(len, 0.0);
            }
        }
        out
    }

    pub fn scaled(&self, gain: f64) -> Signal {
        Signal {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "signals carry 1 or 2 channels, found {}",
                self.channels.len()
            )));
        }
        if self.channels.iter().any(|c| c.len() != self.len()) {
            return Err(Error::InvalidArgument("channel lengths differ".into()));
        }
        Ok(())
    }
}

impl From<&ImpulseResponsePair> for Signal {
    fn from(h: &ImpulseResponsePair) -> Self {
        Signal::stereo(h.left.clone(), h.right.clone(), h.sample_rate)
    }
}

/// Direct `O(n m)` convolution.
pub fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, h) in b.iter().enumerate() {
            out[i + j] += x * h;
        }
    }
    out
}

/// Full linear convolution; switches to FFT when both inputs are long.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 64 {
        return direct_convolve(a, b);
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let load = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (d, s) in buf.iter_mut().zip(x) {
            d.re = *s;
        }
        buf
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolves a mono signal with both channels of a binaural response.
pub fn convolve(x: &Signal, h: &ImpulseResponsePair) -> Result<Signal> {
    x.check()?;
    if x.sample_rate != h.sample_rate {
        return Err(Error::SampleRateMismatch(x.sample_rate, h.sample_rate));
    }
    if x.num_channels() != 1 {
        return Err(Error::InvalidArgument("the dry input must be mono".into()));
    }
    if x.is_empty() || h.is_empty() {
        return Err(Error::Empty("convolution input"));
    }
    let dry = &x.channels[0];
    let (left, right) = rayon::join(|| fft_convolve(dry, &h.left), || fft_convolve(dry, &h.right));
    Ok(Signal::stereo(left, right, x.sample_rate))
}

/// Sample-wise sum; the shorter input is zero-padded.
pub fn mix(a: &Signal, b: &Signal) -> Result<Signal> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::SampleRateMismatch(a.sample_rate, b.sample_rate));
    }
    if a.num_channels() != b.num_channels() {
        return Err(Error::InvalidArgument(format!(
            "channel count mismatch: {} vs {}",
            a.num_channels(),
            b.num_channels()
        )));
    }
    let len = a.len().max(b.len());
    let channels = a
        .channels
        .iter()
        .zip(&b.channels)
        .map(|(x, y)| {
            (0..len)
                .map(|i| x.get(i).copied().unwrap_or(0.0) + y.get(i).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    Ok(Signal {
        channels,
        sample_rate: a.sample_rate,
    })
}

/// Short-time levels in dB, one value per hop.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrack {
    pub values: Vec<f64>,
    /// Seconds between frame starts.
    pub hop: f64,
    /// Frame length in seconds.
    pub window: f64,
    /// Lower clamp; `-inf` for difference tracks, which are not clamped.
    pub floor_db: f64,
}

impl LevelTrack {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Start time of frame `i` in seconds.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.hop
    }

    /// CSV with header `t_s,value_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,value_db\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.time(i), v));
        }
        out
    }
}

/// Mean-square level over non-overlapping (by default) windows, pooled over
/// channels, in dB re full scale and clamped at [`LEVEL_FLOOR_DB`].
pub fn level_track(y: &Signal, window: f64, hop: f64) -> Result<LevelTrack> {
    y.check()?;
    if y.is_empty() {
        return Err(Error::Empty("level input"));
    }
    let fs = y.sample_rate as f64;
    let win = (window * fs).round() as usize;
    let step = (hop * fs).round() as usize;
    if win < 2 {
        return Err(Error::InvalidArgument(format!(
            "window of {window} s spans fewer than 2 samples"
        )));
    }
    if step < 1 {
        return Err(Error::InvalidArgument(format!("hop of {hop} s is shorter than a sample")));
    }

    let len = y.len();
    let n_frames = if len < win { 1 } else { (len - win) / step + 1 };
    let values = (0..n_frames)
        .map(|k| {
            let start = k * step;
            let end = (start + win).min(len);
            let count = ((end - start) * y.num_channels()) as f64;
            let power: f64 = y
                .channels
                .iter()
                .map(|c| c[start..end].iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / count;
            let db = 10.0 * power.log10();
            if db.is_finite() {
                db.max(LEVEL_FLOOR_DB)
            } else {
                LEVEL_FLOOR_DB
            }
        })
        .collect();
    Ok(LevelTrack {
        values,
        hop,
        window,
        floor_db: LEVEL_FLOOR_DB,
    })
}

fn difference(a: &LevelTrack, b: &LevelTrack) -> Result<LevelTrack> {
    if a.len() != b.len() {
        return Err(Error::TrackMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.hop != b.hop || a.window != b.window {
        return Err(Error::TrackMismatch(format!(
            "hop/window {}/{} vs {}/{}",
            a.hop, a.window, b.hop, b.window
        )));
    }
    Ok(LevelTrack {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        hop: a.hop,
        window: a.window,
        floor_db: f64::NEG_INFINITY,
    })
}

/// `L_v - L_u`.
pub fn snr_track(lv: &LevelTrack, lu: &LevelTrack) -> Result<LevelTrack> {
    difference(lv, lu)
}

/// `L_t - L_v`.
pub fn delta_l_track(lt: &LevelTrack, lv: &LevelTrack) -> Result<LevelTrack> {
    difference(lt, lv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn impulse(delay: usize, len: usize) -> ImpulseResponsePair {
        let mut h = vec![0.0; len];
        h[delay] = 1.0;
        ImpulseResponsePair::new(h.clone(), h, 48_000)
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn identity_and_shift() {
        let x = Signal::mono(noise(300, 1), 48_000);
        let y = convolve(&x, &impulse(0, 1)).unwrap();
        assert_eq!(y.channels[0], x.channels[0]);
        assert_eq!(y.channels[1], x.channels[0]);

        let y = convolve(&x, &impulse(7, 10)).unwrap();
        assert_eq!(y.len(), 309);
        assert!(y.channels[0][..7].iter().all(|v| *v == 0.0));
        assert_eq!(&y.channels[1][7..307], &x.channels[0][..]);
    }

    #[test]
    fn fft_matches_direct() {
        let a = noise(1000, 2);
        let b = noise(200, 3);
        let fast = fft_convolve(&a, &b);
        let slow = direct_convolve(&a, &b);
        let peak = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() <= 1e-6 * peak);
        }
    }

    #[test]
    fn sample_rate_mismatch() {
        let x = Signal::mono(vec![1.0; 10], 44_100);
        assert!(matches!(convolve(&x, &impulse(0, 4)), Err(Error::SampleRateMismatch(44_100, 48_000))));
        let y = Signal::mono(vec![1.0; 10], 48_000);
        assert!(matches!(mix(&x, &y), Err(Error::SampleRateMismatch(..))));
    }

    #[test]
    fn mix_identities() {
        let a = Signal::stereo(noise(50, 4), noise(50, 5), 48_000);
        let b = Signal::stereo(noise(80, 6), noise(80, 7), 48_000);
        let zeros = Signal::stereo(vec![0.0; 50], vec![0.0; 50], 48_000);
        assert_eq!(mix(&a, &zeros).unwrap(), a);
        let cancel = mix(&a, &a.scaled(-1.0)).unwrap();
        assert!(cancel.channels.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(mix(&a, &b).unwrap(), mix(&b, &a).unwrap());
        assert_eq!(mix(&a, &b).unwrap().len(), 80);
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let y = Signal::mono(vec![0.0; 960], 48_000);
        let t = level_track(&y, 0.002, 0.002).unwrap();
        assert_eq!(t.len(), 10);
        assert!(t.values.iter().all(|v| *v == LEVEL_FLOOR_DB));
    }

    #[test]
    fn full_scale_sine() {
        // 1 kHz at 48 kHz: 48 samples per cycle, two cycles per 2 ms frame.
        let y: Vec<f64> = (0..4800)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let t = level_track(&Signal::mono(y.clone(), 48_000), 0.002, 0.002).unwrap();
        for v in &t.values {
            assert!((v + 3.0103).abs() < 1e-3, "{v}");
        }
        let doubled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let t2 = level_track(&Signal::mono(doubled, 48_000), 0.002, 0.002).unwrap();
        for (a, b) in t.values.iter().zip(&t2.values) {
            assert!((b - a - 6.0206).abs() < 1e-3);
        }
    }

    #[test]
    fn level_is_channel_swap_invariant() {
        let l = noise(1000, 8);
        let r: Vec<f64> = noise(1000, 9).iter().map(|v| v * 0.1).collect();
        let a = level_track(&Signal::stereo(l.clone(), r.clone(), 48_000), 0.002, 0.002).unwrap();
        let b = level_track(&Signal::stereo(r, l, 48_000), 0.002, 0.002).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn level_errors() {
        let empty = Signal::mono(vec![], 48_000);
        assert!(matches!(level_track(&empty, 0.002, 0.002), Err(Error::Empty(_))));
        let y = Signal::mono(vec![1.0; 100], 48_000);
        assert!(level_track(&y, 1.0 / 48_000.0, 0.002).is_err());
    }

    #[test]
    fn snr_and_delta() {
        let mk = |v: Vec<f64>| LevelTrack {
            values: v,
            hop: 0.002,
            window: 0.002,
            floor_db: LEVEL_FLOOR_DB,
        };
        let lv = mk(vec![60.0, 50.0, -10.0]);
        let lu = mk(vec![40.0, 50.0, -20.0]);
        let snr = snr_track(&lv, &lu).unwrap();
        assert_eq!(snr.values, vec![20.0, 0.0, 10.0]);
        let rev = snr_track(&lu, &lv).unwrap();
        assert!(snr.values.iter().zip(&rev.values).all(|(a, b)| *a == -*b));
        assert!(snr_track(&lv, &lv).unwrap().values.iter().all(|v| *v == 0.0));
        let short = mk(vec![1.0]);
        assert!(matches!(delta_l_track(&lv, &short), Err(Error::TrackMismatch(_))));
        let mut other_hop = lu.clone();
        other_hop.hop = 0.004;
        assert!(matches!(snr_track(&lv, &other_hop), Err(Error::TrackMismatch(_))));
    }

    #[test]
    fn csv_export() {
        let t = LevelTrack {
            values: vec![-3.0, -120.0],
            hop: 0.002,
            window: 0.002,
            floor_db: LEVEL_FLOOR_DB,
        };
        assert_eq!(t.to_csv(), "t_s,value_db\n0,-3\n0.002,-120\n");
    }
}
