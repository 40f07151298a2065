//! The `simulate`, `auralize`, `analyze` and `pipeline` stages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use auralab::audio_io::{read_wav, write_wav, WavSpec};
use auralab::excerpt::{synthetic_excerpt, DEFAULT_DURATION_S};
use auralab::pipeline::{analyze, auralize, residual_brir, virtual_brir, Auralized};
use auralab::raytrace::TraceOptions;
use auralab::{ImpulseResponsePair, Signal};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::report::{boxplot_svg, levels_csv, Report, ReportEntry};

pub const CONFIG_STAGE: &str = "config validation";

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: anyhow::Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        if self.stage == CONFIG_STAGE {
            2
        } else {
            1
        }
    }
}

pub type StageResult<T> = Result<T, StageError>;

pub trait InStage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}

/// Writes files under the output directory and records their hashes.
pub struct Outputs {
    pub root: PathBuf,
    pub manifest: Manifest,
    /// Hashes of the files written by this run only.
    pub written: Manifest,
}

impl Outputs {
    pub fn open(root: &Path) -> anyhow::Result<Outputs> {
        Ok(Outputs {
            root: root.to_path_buf(),
            manifest: Manifest::load(root)?.unwrap_or_default(),
            written: Manifest::default(),
        })
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn record(&mut self, path: &Path) -> anyhow::Result<()> {
        let rel = self.rel(path);
        self.written.record(&self.root, &rel)?;
        self.manifest.files.insert(rel.clone(), self.written.files[&rel].clone());
        Ok(())
    }

    pub fn text(&mut self, path: &Path, text: &str) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record(path)
    }

    pub fn wav(&mut self, path: &Path, signal: &Signal) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let clipped = write_wav(path, signal, WavSpec::for_signal(signal))
            .with_context(|| format!("writing {}", path.display()))?;
        if clipped > 0 {
            eprintln!("warning: {} has {clipped} samples beyond full scale", self.rel(path));
        }
        self.record(path)
    }

    pub fn finish(&self) -> anyhow::Result<()> {
        self.manifest.save(&self.root)
    }
}

/// What a reader of the file would get back: float32 precision.
fn as_stored(s: &Signal) -> Signal {
    Signal {
        channels: s
            .channels
            .iter()
            .map(|c| c.iter().map(|v| *v as f32 as f64).collect())
            .collect(),
        sample_rate: s.sample_rate,
    }
}

fn pair_from_signal(s: Signal, path: &Path) -> anyhow::Result<ImpulseResponsePair> {
    match <[Vec<f64>; 2]>::try_from(s.channels) {
        Ok([left, right]) => Ok(ImpulseResponsePair::new(left, right, s.sample_rate)),
        Err(_) => Err(anyhow!("{} is not a two-channel response", path.display())),
    }
}

type PairKey = (String, String);

pub struct Responses {
    pub h_v: BTreeMap<String, ImpulseResponsePair>,
    pub h_u: BTreeMap<String, ImpulseResponsePair>,
}

fn provenance(cfg: &RunConfig) -> String {
    let scenes = |list: &[crate::config::NamedScene]| {
        list.iter()
            .map(|s| json!({ "name": s.name, "source": s.source }))
            .collect::<Vec<_>>()
    };
    let trace_defaults = TraceOptions::default();
    let input = match &cfg.input {
        Some(p) => json!({ "path": p.to_string_lossy() }),
        None => json!({
            "synthetic": {
                "generator": "band-limited pulse train with vibrato",
                "duration_s": DEFAULT_DURATION_S,
                "seed": cfg.excerpt_seed,
            }
        }),
    };
    let value = json!({
        "tool": "auralab",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": auralab::VERSION,
        "seed": cfg.sim.seed,
        "rays": cfg.sim.n_rays,
        "ism_order": cfg.sim.max_order,
        "max_time_s": cfg.sim.max_time,
        "sample_rate": cfg.sim.sample_rate,
        "receiver_radius_m": trace_defaults.receiver_radius,
        "histogram_bin_s": trace_defaults.bin_width,
        "stages": scenes(&cfg.stages),
        "labs": scenes(&cfg.labs),
        "input": input,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("json");
    text.push('\n');
    text
}

/// Synthesizes every stage's `h_v` and every lab's `h_u`.
pub fn simulate(cfg: &RunConfig, out: &mut Outputs, write: bool) -> StageResult<Responses> {
    let mut h_v = BTreeMap::new();
    for st in &cfg.stages {
        let sim = virtual_brir(&st.scene, &cfg.sim)
            .with_context(|| format!("virtual stage `{}`", st.name))
            .stage("simulate")?;
        h_v.insert(st.name.clone(), sim.brir);
    }
    let mut h_u = BTreeMap::new();
    for lab in &cfg.labs {
        let sim = residual_brir(&lab.scene, &cfg.sim)
            .with_context(|| format!("lab room `{}`", lab.name))
            .stage("simulate")?;
        h_u.insert(lab.name.clone(), sim.brir);
    }
    // Downstream stages see exactly what the files hold.
    let stored = |h: &ImpulseResponsePair| {
        let s = as_stored(&Signal::from(h));
        pair_from_signal(s, Path::new("")).expect("two channels")
    };
    let h_v: BTreeMap<_, _> = h_v.iter().map(|(k, h)| (k.clone(), stored(h))).collect();
    let h_u: BTreeMap<_, _> = h_u.iter().map(|(k, h)| (k.clone(), stored(h))).collect();

    if write {
        for st in &cfg.stages {
            for lab in &cfg.labs {
                let dir = cfg.pair_dir(st, lab);
                out.wav(&dir.join("h_v.wav"), &Signal::from(&h_v[&st.name]))
                    .stage("simulate")?;
                out.wav(&dir.join("h_u.wav"), &Signal::from(&h_u[&lab.name]))
                    .stage("simulate")?;
            }
        }
        let path = cfg.out.join("provenance.json");
        out.text(&path, &provenance(cfg)).stage("simulate")?;
    }
    Ok(Responses { h_v, h_u })
}

fn load_responses(cfg: &RunConfig) -> StageResult<BTreeMap<PairKey, (ImpulseResponsePair, ImpulseResponsePair)>> {
    let mut map = BTreeMap::new();
    for st in &cfg.stages {
        for lab in &cfg.labs {
            let dir = cfg.pair_dir(st, lab);
            let load = |name: &str| -> anyhow::Result<ImpulseResponsePair> {
                let path = dir.join(name);
                let s = read_wav(&path).with_context(|| format!("reading {}", path.display()))?;
                pair_from_signal(s, &path)
            };
            let pair = (load("h_v.wav").stage("auralize")?, load("h_u.wav").stage("auralize")?);
            map.insert((st.name.clone(), lab.name.clone()), pair);
        }
    }
    Ok(map)
}

pub fn input_signal(cfg: &RunConfig) -> StageResult<Signal> {
    match &cfg.input {
        Some(p) => read_wav(p)
            .with_context(|| format!("reading input {}", p.display()))
            .stage("auralize"),
        None => Ok(synthetic_excerpt(DEFAULT_DURATION_S, cfg.sim.sample_rate, cfg.excerpt_seed)),
    }
}

pub type Signals = BTreeMap<PairKey, Auralized>;

fn auralize_pairs(
    cfg: &RunConfig,
    out: &mut Outputs,
    responses: &BTreeMap<PairKey, (ImpulseResponsePair, ImpulseResponsePair)>,
    write: bool,
) -> StageResult<Signals> {
    let x = input_signal(cfg)?;
    let mut signals = BTreeMap::new();
    for st in &cfg.stages {
        for lab in &cfg.labs {
            let key = (st.name.clone(), lab.name.clone());
            let (h_v, h_u) = &responses[&key];
            let y = auralize(&x, h_v, h_u)
                .with_context(|| format!("auralizing {}__{}", st.name, lab.name))
                .stage("auralize")?;
            let y = Auralized {
                y_v: as_stored(&y.y_v),
                y_u: as_stored(&y.y_u),
                y_t: as_stored(&y.y_t),
            };
            if write {
                let dir = cfg.pair_dir(st, lab);
                out.wav(&dir.join("y_v.wav"), &y.y_v).stage("auralize")?;
                out.wav(&dir.join("y_u.wav"), &y.y_u).stage("auralize")?;
                out.wav(&dir.join("y_t.wav"), &y.y_t).stage("auralize")?;
            }
            signals.insert(key, y);
        }
    }
    Ok(signals)
}

/// Auralizes the responses previously written by `simulate`.
pub fn auralize_from_files(cfg: &RunConfig, out: &mut Outputs) -> StageResult<Signals> {
    let responses = load_responses(cfg)?;
    auralize_pairs(cfg, out, &responses, true)
}

pub fn load_signals(cfg: &RunConfig) -> StageResult<Signals> {
    let mut map = BTreeMap::new();
    for st in &cfg.stages {
        for lab in &cfg.labs {
            let dir = cfg.pair_dir(st, lab);
            let load = |name: &str| {
                let path = dir.join(name);
                read_wav(&path)
                    .with_context(|| format!("reading {}", path.display()))
                    .stage("analyze")
            };
            map.insert(
                (st.name.clone(), lab.name.clone()),
                Auralized {
                    y_v: load("y_v.wav")?,
                    y_u: load("y_u.wav")?,
                    y_t: load("y_t.wav")?,
                },
            );
        }
    }
    Ok(map)
}

pub fn analyze_pairs(cfg: &RunConfig, out: &mut Outputs, signals: &Signals) -> StageResult<Report> {
    let mut entries = Vec::new();
    for st in &cfg.stages {
        for lab in &cfg.labs {
            let y = &signals[&(st.name.clone(), lab.name.clone())];
            let a = analyze(&y.y_v, &y.y_u, &y.y_t, &cfg.analysis)
                .with_context(|| format!("analyzing {}__{}", st.name, lab.name))
                .stage("analyze")?;
            if cfg.emit.csv {
                let path = cfg.pair_dir(st, lab).join("levels.csv");
                out.text(&path, &levels_csv(&a)).stage("analyze")?;
            }
            entries.push(ReportEntry::new(&st.name, &lab.name, &a));
        }
    }
    let report = Report {
        settings: (&cfg.analysis).into(),
        entries,
    };
    if cfg.emit.json {
        let mut text = serde_json::to_string_pretty(&report).stage("analyze")?;
        text.push('\n');
        out.text(&cfg.out.join("report.json"), &text).stage("analyze")?;
    }
    if cfg.emit.svg {
        out.text(&cfg.out.join("boxplot.svg"), &boxplot_svg(&report))
            .stage("analyze")?;
    }
    Ok(report)
}

pub fn pipeline(cfg: &RunConfig, out: &mut Outputs) -> StageResult<Report> {
    let r = simulate(cfg, out, cfg.emit.wav)?;
    let mut responses = BTreeMap::new();
    for st in &cfg.stages {
        for lab in &cfg.labs {
            responses.insert(
                (st.name.clone(), lab.name.clone()),
                (r.h_v[&st.name].clone(), r.h_u[&lab.name].clone()),
            );
        }
    }
    let signals = auralize_pairs(cfg, out, &responses, cfg.emit.wav)?;
    analyze_pairs(cfg, out, &signals)
}

pub fn print_summary(report: &Report) {
    println!(
        "{:<14} {:<10} {:>10} {:>9} {:>9} {:>9}  verdict",
        "stage", "room", "median dB", "q1 dB", "q3 dB", "SNR dB"
    );
    for e in &report.entries {
        println!(
            "{:<14} {:<10} {:>10.3} {:>9.3} {:>9.3} {:>9.2}  {}",
            e.stage, e.room, e.median_db, e.q1_db, e.q3_db, e.snr_median_db, e.verdict
        );
    }
}
