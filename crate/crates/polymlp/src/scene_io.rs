//! Scene file formats: JSON-lines (one scene per line) and CSV (one row
//! per sample with a JSON sidecar for per-scene metadata and events).
//! Floats are written as shortest decimal text that parses back to the
//! identical value, so write-then-read round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use polymlp_core::traj::{MotionState, Scene, SceneEvents, Trajectory};

use crate::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFormat {
    Jsonl,
    Csv,
}

impl SceneFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(SceneFormat::Jsonl),
            "csv" => Ok(SceneFormat::Csv),
            other => bail!("unknown scene format `{other}` (want jsonl or csv)"),
        }
    }

    /// Infers the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => Ok(SceneFormat::Jsonl),
            Some("csv") => Ok(SceneFormat::Csv),
            _ => bail!(
                "cannot infer scene format from {} (use a .jsonl/.csv extension or --format)",
                path.display()
            ),
        }
    }
}

/// Path of the metadata sidecar that accompanies a CSV scene file.
pub fn csv_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct EventsRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    transition_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transition_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heel_off: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heel_down: Option<f64>,
}

impl From<&SceneEvents> for EventsRecord {
    fn from(e: &SceneEvents) -> Self {
        Self {
            transition_start: e.transition_start,
            transition_end: e.transition_end,
            heel_off: e.heel_off,
            heel_down: e.heel_down,
        }
    }
}

impl From<&EventsRecord> for SceneEvents {
    fn from(r: &EventsRecord) -> Self {
        Self {
            transition_start: r.transition_start,
            transition_end: r.transition_end,
            heel_off: r.heel_off,
            heel_down: r.heel_down,
        }
    }
}

/// One scene as stored on a JSON line.
#[derive(Debug, Serialize, Deserialize)]
struct SceneRecord {
    scene_id: String,
    scene_class: String,
    sample_rate_hz: f64,
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    state: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<EventsRecord>,
}

/// Per-scene metadata for the CSV representation, keyed by scene id in
/// the sidecar file.
#[derive(Debug, Serialize, Deserialize)]
struct CsvSceneMeta {
    scene_class: String,
    sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<EventsRecord>,
}

fn record_of(scene: &Scene) -> SceneRecord {
    let traj = scene.trajectory();
    SceneRecord {
        scene_id: scene.scene_id().to_string(),
        scene_class: scene.scene_class().name().to_string(),
        sample_rate_hz: scene.sample_rate_hz(),
        t: traj.timestamps().to_vec(),
        x: traj.positions().iter().map(|p| p[0]).collect(),
        y: traj.positions().iter().map(|p| p[1]).collect(),
        state: scene.state_labels().iter().map(|s| s.name().to_string()).collect(),
        events: (!scene.events().is_empty()).then(|| scene.events().into()),
    }
}

fn scene_of(record: SceneRecord, origin: &str) -> Result<Scene> {
    let SceneRecord { scene_id, scene_class, sample_rate_hz, t, x, y, state, events } = record;
    let class = MotionState::parse(&scene_class).ok_or_else(|| {
        anyhow!("{origin}: scene `{scene_id}`: unknown scene class `{scene_class}`")
    })?;
    if x.len() != y.len() || x.len() != t.len() {
        bail!(
            "{origin}: scene `{scene_id}`: t/x/y lengths differ ({}/{}/{})",
            t.len(),
            x.len(),
            y.len()
        );
    }
    let positions: Vec<[f64; 2]> = x.into_iter().zip(y).map(|(a, b)| [a, b]).collect();
    let trajectory = Trajectory::new(t, positions)
        .map_err(|e| anyhow!("{origin}: scene `{scene_id}`: {e}"))?;
    let labels = state
        .iter()
        .map(|s| {
            MotionState::parse(s)
                .ok_or_else(|| anyhow!("{origin}: scene `{scene_id}`: unknown state `{s}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    let events = events.as_ref().map(SceneEvents::from).unwrap_or_default();
    Scene::new(scene_id.clone(), class, sample_rate_hz, trajectory, labels, events)
        .map_err(|e| anyhow!("{origin}: scene `{scene_id}`: {e}"))
}

pub fn save_scenes(path: &Path, scenes: &[Scene], format: SceneFormat) -> Result<()> {
    match format {
        SceneFormat::Jsonl => {
            let mut out = String::new();
            for scene in scenes {
                let line = serde_json::to_string(&record_of(scene))
                    .context("serialize scene record")?;
                out.push_str(&line);
                out.push('\n');
            }
            write_atomic(path, out.as_bytes())
        }
        SceneFormat::Csv => {
            let mut out = String::from("scene_id,t,x,y,state\n");
            let mut meta: BTreeMap<String, CsvSceneMeta> = BTreeMap::new();
            for scene in scenes {
                let traj = scene.trajectory();
                for ((t, p), label) in traj
                    .timestamps()
                    .iter()
                    .zip(traj.positions())
                    .zip(scene.state_labels())
                {
                    // `{}` prints the shortest decimal that parses back to
                    // the same f64, so the round trip is exact.
                    writeln!(out, "{},{},{},{},{}", scene.scene_id(), t, p[0], p[1], label.name())
                        .expect("write to string");
                }
                meta.insert(
                    scene.scene_id().to_string(),
                    CsvSceneMeta {
                        scene_class: scene.scene_class().name().to_string(),
                        sample_rate_hz: scene.sample_rate_hz(),
                        events: (!scene.events().is_empty()).then(|| scene.events().into()),
                    },
                );
            }
            write_atomic(path, out.as_bytes())?;
            let sidecar = serde_json::to_vec_pretty(&meta).context("serialize scene metadata")?;
            write_atomic(&csv_sidecar_path(path), &sidecar)
        }
    }
}

pub fn load_scenes(path: &Path, format: SceneFormat) -> Result<Vec<Scene>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read scene file {}", path.display()))?;
    match format {
        SceneFormat::Jsonl => {
            let mut scenes = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let origin = format!("{}:{}", path.display(), idx + 1);
                let record: SceneRecord = serde_json::from_str(line)
                    .with_context(|| format!("{origin}: malformed scene record"))?;
                scenes.push(scene_of(record, &origin)?);
            }
            Ok(scenes)
        }
        SceneFormat::Csv => load_csv(path, &text),
    }
}

fn load_csv(path: &Path, text: &str) -> Result<Vec<Scene>> {
    let sidecar = csv_sidecar_path(path);
    let meta_text = std::fs::read_to_string(&sidecar)
        .with_context(|| format!("read scene metadata sidecar {}", sidecar.display()))?;
    let meta: BTreeMap<String, CsvSceneMeta> = serde_json::from_str(&meta_text)
        .with_context(|| format!("parse {}", sidecar.display()))?;

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "scene_id,t,x,y,state" => {}
        Some((_, header)) => bail!(
            "{}:1: bad header `{header}` (want scene_id,t,x,y,state)",
            path.display()
        ),
        None => bail!("{}: empty scene file", path.display()),
    }

    // Group consecutive rows by scene id, in file order.
    struct Partial {
        id: String,
        t: Vec<f64>,
        x: Vec<f64>,
        y: Vec<f64>,
        state: Vec<String>,
    }
    let mut scenes = Vec::new();
    let mut current: Option<Partial> = None;
    let finish = |p: Partial, meta: &BTreeMap<String, CsvSceneMeta>| -> Result<Scene> {
        let m = meta.get(&p.id).ok_or_else(|| {
            anyhow!("{}: scene `{}` missing from metadata sidecar", sidecar.display(), p.id)
        })?;
        scene_of(
            SceneRecord {
                scene_id: p.id,
                scene_class: m.scene_class.clone(),
                sample_rate_hz: m.sample_rate_hz,
                t: p.t,
                x: p.x,
                y: p.y,
                state: p.state,
                events: m.events.clone(),
            },
            &path.display().to_string(),
        )
    };
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let origin = format!("{}:{}", path.display(), idx + 1);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("{origin}: expected 5 fields, got {}", fields.len());
        }
        let parse = |field: &str, what: &str| -> Result<f64> {
            field
                .parse::<f64>()
                .with_context(|| format!("{origin}: bad {what} `{field}`"))
        };
        let (id, t, x, y, state) = (
            fields[0],
            parse(fields[1], "t")?,
            parse(fields[2], "x")?,
            parse(fields[3], "y")?,
            fields[4],
        );
        match &mut current {
            Some(p) if p.id == id => {
                p.t.push(t);
                p.x.push(x);
                p.y.push(y);
                p.state.push(state.to_string());
            }
            _ => {
                if let Some(done) = current.take() {
                    scenes.push(finish(done, &meta)?);
                }
                current = Some(Partial {
                    id: id.to_string(),
                    t: vec![t],
                    x: vec![x],
                    y: vec![y],
                    state: vec![state.to_string()],
                });
            }
        }
    }
    if let Some(done) = current.take() {
        scenes.push(finish(done, &meta)?);
    }
    Ok(scenes)
}
