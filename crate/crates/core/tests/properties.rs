use auralab::audio_io::{read_wav, write_wav, WavSpec};
use auralab::brir::{Orientation, ParametricHead};
use auralab::raytrace::ReflectionDraws;
use auralab::{
    boxplot_stats, convolve, delta_l_track, level_track, preset_scene, reflect, synthesize_brir,
    trace, Arrival, HrtfSet, ImpulseResponsePair, Preset, Signal, TraceOptions, Vec3, NUM_BANDS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: u32 = 48_000;

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

// Lambertian directions have cos^2(theta) uniform on [0, 1].
#[test]
fn diffuse_reflection_follows_cosine_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Vec3::new(1.0, 2.0, -0.5).normalized();
    let incoming = Vec3::new(-0.3, -1.0, 0.2).normalized();
    let n = 20_000;
    let mut c2: Vec<f64> = (0..n)
        .map(|_| {
            let out = reflect(incoming, normal, 1.0, ReflectionDraws::sample(&mut rng));
            assert!((out.norm() - 1.0).abs() < 1e-12);
            out.dot(normal).powi(2)
        })
        .collect();
    c2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = c2
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n as f64 - x).abs().max((x - i as f64 / n as f64).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn specular_fraction_is_one_minus_scattering() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Vec3::Z;
    let incoming = Vec3::new(0.6, 0.0, -0.8);
    let mirror = Vec3::new(0.6, 0.0, 0.8);
    let n = 20_000;
    let specular = (0..n)
        .filter(|_| reflect(incoming, normal, 0.3, ReflectionDraws::sample(&mut rng)).distance(mirror) < 1e-12)
        .count() as f64
        / n as f64;
    let sigma = (0.7 * 0.3 / n as f64).sqrt();
    assert!((specular - 0.7).abs() < 4.0 * sigma, "{specular}");
}

#[test]
fn direct_only_plus_reflected_is_full_trace() {
    let scene = preset_scene(Preset::Booth1);
    let base = TraceOptions {
        n_rays: 5_000,
        seed: 4,
        max_time: 0.2,
        ..TraceOptions::default()
    };
    let full = trace(&scene, &base).unwrap();
    let direct = trace(&scene, &TraceOptions { max_order: Some(0), ..base.clone() }).unwrap();
    let reflected = trace(&scene, &TraceOptions { skip_direct: true, ..base.clone() }).unwrap();
    let sum = direct.add(&reflected).unwrap();
    for b in 0..NUM_BANDS {
        let (a, s) = (full.band_total(b), sum.band_total(b));
        assert!((a - s).abs() <= 1e-12 * a, "band {b}: {a} vs {s}");
    }
    assert!(direct.total() > 0.0 && reflected.total() > 0.0);
}

#[test]
fn trace_and_synthesis_are_deterministic() {
    let scene = preset_scene(Preset::Booth2);
    let opts = TraceOptions {
        n_rays: 3_000,
        seed: 9,
        max_time: 0.1,
        ..TraceOptions::default()
    };
    let a = trace(&scene, &opts).unwrap();
    let b = trace(&scene, &opts).unwrap();
    assert_eq!(a, b);
    let hrtf = HrtfSet::identity(FS);
    let o = Orientation::default();
    let ha = synthesize_brir(&[], Some(&a), &hrtf, &o, FS, 3).unwrap();
    let hb = synthesize_brir(&[], Some(&b), &hrtf, &o, FS, 3).unwrap();
    assert_eq!(ha, hb);
    let hc = synthesize_brir(&[], Some(&b), &hrtf, &o, FS, 4).unwrap();
    assert_ne!(ha, hc);
}

#[test]
fn incoherent_sum_of_equal_powers_adds_three_db() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = FS as usize * 10;
    let a = noise(&mut rng, n);
    let b = noise(&mut rng, n);
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let lv = level_track(&Signal::mono(a, FS), 0.5, 0.5).unwrap();
    let lt = level_track(&Signal::mono(sum, FS), 0.5, 0.5).unwrap();
    let dl = delta_l_track(&lt, &lv).unwrap();
    for v in dl.values {
        assert!((v - 3.0103).abs() < 0.15, "{v}");
    }
}

fn arrival(delay: f64, gain: f64, dir: Vec3, tilt: f64) -> Arrival {
    Arrival {
        delay,
        amplitude: std::array::from_fn(|b| gain * (1.0 - tilt * b as f64 / 8.0)),
        direction: dir,
        order: 1,
    }
}

#[test]
fn brir_is_linear_in_arrivals() {
    let hrtf = HrtfSet::Parametric(ParametricHead::new(0.0875, 343.0, FS));
    let o = Orientation::default();
    let first = vec![arrival(0.003, 0.5, Vec3::X, 0.0), arrival(0.0071, 0.2, Vec3::Y, 0.5)];
    let second = vec![arrival(0.0123, -0.3, Vec3::new(0.0, -1.0, 1.0).normalized(), 0.3)];
    let both: Vec<Arrival> = first.iter().chain(&second).cloned().collect();
    let h1 = synthesize_brir(&first, None, &hrtf, &o, FS, 0).unwrap();
    let h2 = synthesize_brir(&second, None, &hrtf, &o, FS, 0).unwrap();
    let h = synthesize_brir(&both, None, &hrtf, &o, FS, 0).unwrap();
    let sum = h1.add(&h2).unwrap();
    for (x, y) in h.left.iter().zip(&sum.left).chain(h.right.iter().zip(&sum.right)) {
        assert!((x - y).abs() < 1e-12);
    }
    assert!(h.left.iter().chain(&h.right).all(|v| v.is_finite()));
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boxplot_ignores_order(mut v in prop::collection::vec(-50.0..50.0f64, 1..200), seed: u64) {
        let a = boxplot_stats(&v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..v.len()).rev() {
            v.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(a, boxplot_stats(&v).unwrap());
    }

    #[test]
    fn boxplot_shifts_with_data(v in prop::collection::vec(-50.0..50.0f64, 1..200), c in -100.0..100.0f64) {
        let a = boxplot_stats(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = boxplot_stats(&shifted).unwrap();
        prop_assert!(close(a.median + c, b.median));
        prop_assert!(close(a.q1 + c, b.q1) && close(a.q3 + c, b.q3));
        prop_assert!(close(a.iqr, b.iqr) || (a.iqr - b.iqr).abs() < 1e-9);
        prop_assert!(a.q1 <= a.median && a.median <= a.q3);
        prop_assert!(a.whisker_low <= a.q1 + 1e-12 && a.whisker_high >= a.q3 - 1e-12);
    }

    #[test]
    fn convolution_is_linear(seed: u64, ga in -2.0..2.0f64, gb in -2.0..2.0f64, n in 1usize..600, m in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1 = noise(&mut rng, n);
        let x2 = noise(&mut rng, n);
        let h = ImpulseResponsePair::new(noise(&mut rng, m), noise(&mut rng, m), FS);
        let mixed: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| ga * a + gb * b).collect();
        let y = convolve(&Signal::mono(mixed, FS), &h).unwrap();
        let y1 = convolve(&Signal::mono(x1, FS), &h).unwrap();
        let y2 = convolve(&Signal::mono(x2, FS), &h).unwrap();
        prop_assert_eq!(y.len(), n + m - 1);
        for c in 0..2 {
            for i in 0..y.len() {
                let want = ga * y1.channels[c][i] + gb * y2.channels[c][i];
                prop_assert!((y.channels[c][i] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn level_track_ignores_channel_order(seed: u64, n in 96usize..4000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = noise(&mut rng, n);
        let r: Vec<f64> = noise(&mut rng, n).iter().map(|v| 0.1 * v).collect();
        let a = level_track(&Signal::stereo(l.clone(), r.clone(), FS), 0.002, 0.002).unwrap();
        let b = level_track(&Signal::stereo(r, l, FS), 0.002, 0.002).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn float_wav_round_trips(samples in prop::collection::vec(-4.0..4.0f32, 0..500)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let sig = Signal::stereo(
            samples.iter().map(|v| *v as f64).collect(),
            samples.iter().rev().map(|v| *v as f64).collect(),
            FS,
        );
        let clipped = write_wav(&path, &sig, WavSpec::for_signal(&sig)).unwrap();
        prop_assert_eq!(clipped, samples.iter().filter(|v| v.abs() > 1.0).count() * 2);
        prop_assert_eq!(read_wav(&path).unwrap(), sig);
    }
}
