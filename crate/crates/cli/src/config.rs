//! Run configuration: an optional `[run]` file section, then flag overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use auralab::pipeline::{AnalysisSettings, SimulationSettings};
use auralab::scene::{parse_scene, KvDocument};
use auralab::{preset_scene, validate_scene, Preset, Scene};

use crate::Cli;

/// Which artifact kinds `pipeline` and `analyze` write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub wav: bool,
    pub csv: bool,
    pub svg: bool,
    pub json: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit {
            wav: true,
            csv: true,
            svg: true,
            json: true,
        }
    }
}

impl FromStr for Emit {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut e = Emit {
            wav: false,
            csv: false,
            svg: false,
            json: false,
        };
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "wav" => e.wav = true,
                "csv" => e.csv = true,
                "svg" => e.svg = true,
                "json" => e.json = true,
                other => bail!("unknown --emit kind `{other}` (expected wav, csv, svg, json)"),
            }
        }
        Ok(e)
    }
}

/// A scene given either as a preset name or as a scene file.
#[derive(Debug, Clone)]
pub struct NamedScene {
    pub name: String,
    pub source: String,
    pub scene: Scene,
}

impl NamedScene {
    fn resolve(spec: &str) -> Result<NamedScene> {
        if let Ok(p) = spec.parse::<Preset>() {
            return Ok(NamedScene {
                name: p.name().to_string(),
                source: format!("preset:{}", p.name()),
                scene: preset_scene(p),
            });
        }
        let path = Path::new(spec);
        if !path.exists() {
            bail!("`{spec}` is neither a preset name nor an existing scene file");
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        let scene = parse_scene(&text).with_context(|| format!("parsing {spec}"))?;
        let report = validate_scene(&scene);
        if !report.is_valid() {
            bail!("scene {spec} is invalid:\n{report}");
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        Ok(NamedScene {
            name,
            source: spec.to_string(),
            scene,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub stages: Vec<NamedScene>,
    pub labs: Vec<NamedScene>,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub sim: SimulationSettings,
    pub analysis: AnalysisSettings,
    pub emit: Emit,
    pub excerpt_seed: u64,
}

impl RunConfig {
    pub fn pair_dir(&self, stage: &NamedScene, lab: &NamedScene) -> PathBuf {
        self.out.join(format!("{}__{}", stage.name, lab.name))
    }
}

/// Values as read from the file and the flags, before resolution.
#[derive(Debug, Default)]
struct Raw {
    stage: Option<String>,
    lab: Option<String>,
    input: Option<String>,
    out: Option<String>,
    sample_rate: Option<String>,
    rays: Option<String>,
    seed: Option<String>,
    order: Option<String>,
    max_time: Option<String>,
    window_ms: Option<String>,
    hop_ms: Option<String>,
    jnd_db: Option<String>,
    gate_db: Option<String>,
    emit: Option<String>,
    excerpt_seed: Option<String>,
}

fn read_file(path: &Path, raw: &mut Raw) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let doc = KvDocument::parse(&text)?;
    for section in &doc.sections {
        if !(section.name.is_empty() || section.name == "run") {
            bail!("config line {}: unknown section [{}]", section.line, section.name);
        }
        for (key, value, line) in &section.entries {
            let slot = match key.as_str() {
                "stage" | "scene_stage" => &mut raw.stage,
                "lab" | "scene_lab" => &mut raw.lab,
                "input" => &mut raw.input,
                "out" => &mut raw.out,
                "sample_rate" => &mut raw.sample_rate,
                "rays" => &mut raw.rays,
                "seed" => &mut raw.seed,
                "order" => &mut raw.order,
                "max_time" => &mut raw.max_time,
                "window_ms" => &mut raw.window_ms,
                "hop_ms" => &mut raw.hop_ms,
                "jnd_db" => &mut raw.jnd_db,
                "gate_db" => &mut raw.gate_db,
                "emit" => &mut raw.emit,
                "excerpt_seed" => &mut raw.excerpt_seed,
                other => bail!("config line {line}: unknown key `{other}`"),
            };
            // Paths in a config file are relative to the file.
            let value = if matches!(key.as_str(), "input" | "out") {
                resolve_relative(path, value)
            } else {
                value.clone()
            };
            *slot = Some(value);
        }
    }
    Ok(())
}

fn resolve_relative(config: &Path, value: &str) -> String {
    let p = Path::new(value);
    if p.is_absolute() {
        return value.to_string();
    }
    match config.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(p).to_string_lossy().into_owned(),
        _ => value.to_string(),
    }
}

fn parse<T: FromStr>(name: &str, v: &Option<String>, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match v {
        None => Ok(default),
        Some(s) => s
            .trim()
            .parse()
            .map_err(|e| anyhow!("invalid {name} `{s}`: {e}")),
    }
}

fn scene_list(spec: Option<&str>, defaults: &[Preset]) -> Result<Vec<NamedScene>> {
    let list: Vec<NamedScene> = match spec {
        None => defaults
            .iter()
            .map(|p| NamedScene::resolve(p.name()))
            .collect::<Result<_>>()?,
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(NamedScene::resolve)
            .collect::<Result<_>>()?,
    };
    if list.is_empty() {
        bail!("empty scene list");
    }
    for (i, a) in list.iter().enumerate() {
        if list[..i].iter().any(|b| b.name == a.name) {
            bail!("scene name `{}` appears twice", a.name);
        }
    }
    Ok(list)
}

pub fn load(cli: &Cli) -> Result<RunConfig> {
    let mut raw = Raw::default();
    if let Some(path) = &cli.config {
        if !path.exists() {
            bail!("config file {} does not exist", path.display());
        }
        read_file(path, &mut raw)?;
    }
    let o = &cli.overrides;
    let set = |slot: &mut Option<String>, v: &Option<String>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    set(&mut raw.stage, &o.scene_stage);
    set(&mut raw.lab, &o.scene_lab);
    set(&mut raw.input, &o.input.as_ref().map(|p| p.to_string_lossy().into_owned()));
    set(&mut raw.out, &o.out.as_ref().map(|p| p.to_string_lossy().into_owned()));
    set(&mut raw.sample_rate, &o.sample_rate.map(|v| v.to_string()));
    set(&mut raw.rays, &o.rays.map(|v| v.to_string()));
    set(&mut raw.seed, &o.seed.map(|v| v.to_string()));
    set(&mut raw.order, &o.order.map(|v| v.to_string()));
    set(&mut raw.max_time, &o.max_time.map(|v| v.to_string()));
    set(&mut raw.window_ms, &o.window_ms.map(|v| v.to_string()));
    set(&mut raw.hop_ms, &o.hop_ms.map(|v| v.to_string()));
    set(&mut raw.jnd_db, &o.jnd_db.map(|v| v.to_string()));
    set(&mut raw.gate_db, &o.gate_db.map(|v| v.to_string()));
    set(&mut raw.emit, &o.emit);
    set(&mut raw.excerpt_seed, &o.excerpt_seed.map(|v| v.to_string()));

    let sim_default = SimulationSettings::default();
    let sim = SimulationSettings {
        sample_rate: parse("sample_rate", &raw.sample_rate, sim_default.sample_rate)?,
        n_rays: parse("rays", &raw.rays, sim_default.n_rays)?,
        seed: parse("seed", &raw.seed, sim_default.seed)?,
        max_order: parse("order", &raw.order, sim_default.max_order)?,
        max_time: match &raw.max_time {
            None => None,
            Some(s) => Some(parse("max_time", &Some(s.clone()), 0.0)?),
        },
    };
    if sim.sample_rate == 0 {
        bail!("sample_rate must be positive");
    }
    if sim.n_rays == 0 {
        bail!("rays must be at least 1");
    }
    if let Some(t) = sim.max_time {
        if !(t > 0.0) {
            bail!("max_time must be positive");
        }
    }

    let window_ms: f64 = parse("window_ms", &raw.window_ms, 2.0)?;
    let hop_ms: f64 = parse("hop_ms", &raw.hop_ms, window_ms)?;
    if !(window_ms > 0.0) || !(hop_ms > 0.0) {
        bail!("window_ms and hop_ms must be positive");
    }
    let analysis = AnalysisSettings {
        window: window_ms / 1000.0,
        hop: hop_ms / 1000.0,
        jnd_db: parse("jnd_db", &raw.jnd_db, AnalysisSettings::default().jnd_db)?,
        gate_db: parse("gate_db", &raw.gate_db, AnalysisSettings::default().gate_db)?,
    };
    if !(analysis.jnd_db >= 0.0) || !(analysis.gate_db >= 0.0) {
        bail!("jnd_db and gate_db must be non-negative");
    }

    let input = raw.input.map(PathBuf::from);
    if let Some(p) = &input {
        if !p.is_file() {
            bail!("input file {} does not exist", p.display());
        }
    }
    let out = PathBuf::from(raw.out.unwrap_or_else(|| "out".to_string()));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("output directory {} is not writable", out.display()))?;
    let probe = out.join(".write_probe");
    std::fs::write(&probe, b"")
        .with_context(|| format!("output directory {} is not writable", out.display()))?;
    std::fs::remove_file(&probe)?;

    Ok(RunConfig {
        stages: scene_list(raw.stage.as_deref(), &Preset::STAGES)?,
        labs: scene_list(raw.lab.as_deref(), &Preset::LAB_ROOMS)?,
        input,
        out,
        sim,
        analysis,
        emit: match &raw.emit {
            None => Emit::default(),
            Some(s) => s.parse()?,
        },
        excerpt_seed: parse("excerpt_seed", &raw.excerpt_seed, auralab::excerpt::DEFAULT_SEED)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emit_parsing() {
        let e: Emit = "wav, json".parse().unwrap();
        assert!(e.wav && e.json && !e.csv && !e.svg);
        assert!("wav,mp3".parse::<Emit>().is_err());
    }

    #[test]
    fn scene_lists() {
        let l = scene_list(Some("booth1, anechoic"), &[]).unwrap();
        assert_eq!(l.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["booth1", "anechoic"]);
        assert!(scene_list(Some("booth1,booth1"), &[]).is_err());
        assert!(scene_list(Some("/no/such/scene.txt"), &[]).is_err());
        assert_eq!(scene_list(None, &Preset::STAGES).unwrap().len(), 2);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        assert_eq!(resolve_relative(Path::new("cfg/run.txt"), "x.wav"), "cfg/x.wav");
        assert_eq!(resolve_relative(Path::new("run.txt"), "x.wav"), "x.wav");
        assert_eq!(resolve_relative(Path::new("cfg/run.txt"), "/abs.wav"), "/abs.wav");
    }
}
