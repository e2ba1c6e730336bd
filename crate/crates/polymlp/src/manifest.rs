//! Pipeline manifest: one file naming the gating classifier, the four
//! per-state experts, and the gate source. Expert entries are either a
//! builtin expert name (`physical:starting`, `physical:stopping`,
//! `constant:position`, `constant:velocity`) or a path to a trained
//! predictor file; relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use polymlp_core::classifier::StateClassifier;
use polymlp_core::gated::{ExpertBank, LogisticKind, PredictionExpert};
use polymlp_core::traj::MotionState;

use crate::config::RunConfig;
use crate::model_io::{load_classifier, load_predictor, Thresholds};
use crate::write_atomic;

const FORMAT_VERSION: u32 = 1;

/// How the gate weights are produced during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateSource {
    /// Weights from the classifier posterior.
    Classifier,
    /// One-hot weights from the labeled state (upper-bound reference).
    GroundTruth,
}

impl GateSource {
    pub fn name(self) -> &'static str {
        match self {
            GateSource::Classifier => "classifier",
            GateSource::GroundTruth => "ground-truth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "classifier" => Ok(GateSource::Classifier),
            "ground-truth" => Ok(GateSource::GroundTruth),
            other => bail!("unknown gate source `{other}` (want classifier or ground-truth)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub format_version: u32,
    /// Path of the gating classifier model file.
    pub classifier: String,
    pub expert_waiting: String,
    pub expert_starting: String,
    pub expert_moving: String,
    pub expert_stopping: String,
    /// "classifier" or "ground-truth".
    pub gate: String,
}

impl PipelineManifest {
    pub fn new(
        classifier: impl Into<String>,
        experts: [String; 4],
        gate: GateSource,
    ) -> Self {
        let [expert_waiting, expert_starting, expert_moving, expert_stopping] = experts;
        Self {
            format_version: FORMAT_VERSION,
            classifier: classifier.into(),
            expert_waiting,
            expert_starting,
            expert_moving,
            expert_stopping,
            gate: gate.name().to_string(),
        }
    }

    pub fn expert_entry(&self, state: MotionState) -> &str {
        match state {
            MotionState::Waiting => &self.expert_waiting,
            MotionState::Starting => &self.expert_starting,
            MotionState::Moving => &self.expert_moving,
            MotionState::Stopping => &self.expert_stopping,
        }
    }

    pub fn gate_source(&self) -> Result<GateSource> {
        GateSource::parse(&self.gate)
    }
}

pub fn save_manifest(path: &Path, manifest: &PipelineManifest) -> Result<()> {
    let json = serde_json::to_vec_pretty(manifest).context("serialize manifest")?;
    write_atomic(path, &json)
}

pub fn load_manifest(path: &Path) -> Result<PipelineManifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read manifest {}", path.display()))?;
    let manifest: PipelineManifest = serde_json::from_str(&text)
        .with_context(|| format!("parse manifest {}", path.display()))?;
    if manifest.format_version != FORMAT_VERSION {
        bail!(
            "{}: unsupported manifest format version {} (this build reads {FORMAT_VERSION})",
            path.display(),
            manifest.format_version
        );
    }
    manifest.gate_source()?;
    Ok(manifest)
}

/// A manifest with every referenced model loaded and fingerprint-checked.
#[derive(Debug, Clone)]
pub struct ResolvedPipeline {
    pub classifier: StateClassifier,
    pub thresholds: Option<Thresholds>,
    pub bank: ExpertBank,
    pub gate: GateSource,
}

fn resolve_path(base: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_expert(entry: &str, cfg: &RunConfig, base: &Path) -> Result<PredictionExpert> {
    Ok(match entry {
        "physical:starting" => {
            PredictionExpert::Physical(LogisticKind::Starting, cfg.logistic_fit_config())
        }
        "physical:stopping" => {
            PredictionExpert::Physical(LogisticKind::Stopping, cfg.logistic_fit_config())
        }
        "constant:position" => PredictionExpert::ConstantPosition,
        "constant:velocity" => PredictionExpert::ConstantVelocity,
        path => {
            let file = resolve_path(base, path);
            let predictor = load_predictor(
                &file,
                &cfg.input_basis()?,
                &cfg.output_basis()?,
                &cfg.ego(),
            )?;
            PredictionExpert::Poly(predictor)
        }
    })
}

/// Loads the classifier and all four experts named by the manifest at
/// `path`, checking every fingerprint against the run configuration.
pub fn resolve_pipeline(path: &Path, cfg: &RunConfig) -> Result<ResolvedPipeline> {
    let manifest = load_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let (classifier, thresholds) = load_classifier(
        &resolve_path(&base, &manifest.classifier),
        &cfg.input_basis()?,
        &cfg.ego(),
    )?;
    let experts = MotionState::ALL
        .map(|state| resolve_expert(manifest.expert_entry(state), cfg, &base));
    let [w, s, m, p] = experts;
    let bank = ExpertBank::new([w?, s?, m?, p?], cfg.output_basis()?, cfg.ego())
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(ResolvedPipeline { classifier, thresholds, bank, gate: manifest.gate_source()? })
}

/// The physical-model expert lineup: hold position while waiting, logistic
/// ramp fits for the transient states, straight-line extrapolation while
/// moving.
pub fn physical_expert_entries() -> [String; 4] {
    [
        "constant:position".to_string(),
        "physical:starting".to_string(),
        "constant:velocity".to_string(),
        "physical:stopping".to_string(),
    ]
}
