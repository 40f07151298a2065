//! Built-in synthetic stand-in for a dry instrument recording.
//!
//! A sequence of notes, each a band-limited pulse train: equal-amplitude
//! cosine harmonics of the note's fundamental up to 8 kHz, faded in and out
//! with 10 ms raised-cosine ramps. Each note carries a 5.5 Hz vibrato of
//! +-0.25 semitone with a random starting phase. Fundamentals are drawn from
//! the viola's range (C3 to A5) with a seeded ChaCha8 generator, so the
//! excerpt is fully determined by `(duration, sample_rate, seed)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::Signal;

pub const DEFAULT_DURATION_S: f64 = 6.0;
pub const DEFAULT_SEED: u64 = 2024;
pub const PEAK: f64 = 0.1;
pub const MAX_HARMONIC_HZ: f64 = 8000.0;
const RAMP_S: f64 = 0.01;
const VIBRATO_HZ: f64 = 5.5;
const VIBRATO_SEMITONES: f64 = 0.25;
const NOTE_LENGTHS_S: [f64; 4] = [0.2, 0.25, 0.25, 0.3];
/// MIDI notes C3 (48) through A5 (81).
const LOWEST_NOTE: u32 = 48;
const HIGHEST_NOTE: u32 = 81;

fn midi_to_hz(note: u32) -> f64 {
    440.0 * 2f64.powf((note as f64 - 69.0) / 12.0)
}

pub fn synthetic_excerpt(duration_s: f64, sample_rate: u32, seed: u64) -> Signal {
    let fs = sample_rate as f64;
    let total = (duration_s * fs).round() as usize;
    let mut out = vec![0.0; total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ramp = (RAMP_S * fs).round() as usize;
    let top = MAX_HARMONIC_HZ.min(0.45 * fs);

    let mut start = 0;
    while start < total {
        let len_s = NOTE_LENGTHS_S[rng.gen_range(0..NOTE_LENGTHS_S.len())];
        let f0 = midi_to_hz(rng.gen_range(LOWEST_NOTE..=HIGHEST_NOTE));
        let vib_phase = 2.0 * PI * rng.gen::<f64>();
        let len = ((len_s * fs).round() as usize).min(total - start);
        let f_max = f0 * 2f64.powf(VIBRATO_SEMITONES / 12.0);
        let harmonics = (top / f_max).floor() as usize;
        let mut phase = 0.0;
        for (i, dst) in out[start..start + len].iter_mut().enumerate() {
            let t = i as f64 / fs;
            let semis = VIBRATO_SEMITONES * (2.0 * PI * VIBRATO_HZ * t + vib_phase).sin();
            let mut v = 0.0;
            for k in 1..=harmonics {
                v += (k as f64 * phase).cos();
            }
            phase = (phase + 2.0 * PI * f0 * 2f64.powf(semis / 12.0) / fs) % (2.0 * PI);
            let edge = i.min(len - 1 - i);
            let env = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            *dst = v * env / harmonics as f64;
        }
        start += len;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    Signal::mono(out, sample_rate)
}
