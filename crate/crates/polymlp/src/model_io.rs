//! Versioned JSON container for trained networks. Each file records the
//! full topology, weights and normalizations plus a fingerprint of the
//! feature layout and ego-frame settings the network was trained with;
//! loading rejects files whose fingerprint differs from the configured
//! layout so a model can never be applied to features it was not built for.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use polymlp_core::classifier::{ClassifierMode, StateClassifier};
use polymlp_core::mlp::{Activation, MlpModel, Normalization};
use polymlp_core::polyfeat::BasisSet;
use polymlp_core::predictor::TrajPredictor;
use polymlp_core::traj::EgoConfig;

use crate::write_atomic;

const FORMAT_VERSION: u32 = 1;

/// Detection thresholds selected at training time, stored alongside the
/// classifier so downstream commands can reuse them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WindowMs {
    offset_ms: i64,
    length_ms: i64,
    degree: usize,
}

/// What the network's inputs (or outputs) were computed from. Window
/// bounds are stored in integer milliseconds so the comparison is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayoutFingerprint {
    sample_rate_hz: f64,
    dims: usize,
    side: String,
    windows: Vec<WindowMs>,
}

impl LayoutFingerprint {
    fn of(basis: &BasisSet) -> Self {
        let cfg = basis.config();
        Self {
            sample_rate_hz: 1.0 / basis.dt(),
            dims: cfg.dims(),
            side: cfg.side().to_string(),
            windows: cfg
                .windows()
                .iter()
                .map(|w| WindowMs {
                    offset_ms: (w.offset_s * 1000.0).round() as i64,
                    length_ms: (w.length_s * 1000.0).round() as i64,
                    degree: w.degree,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EgoPrint {
    alpha_lon: f64,
    alpha_lat: f64,
    heading_speed_floor: f64,
}

impl EgoPrint {
    fn of(ego: &EgoConfig) -> Self {
        Self {
            alpha_lon: ego.alpha_lon,
            alpha_lat: ego.alpha_lat,
            heading_speed_floor: ego.heading_speed_floor,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormRecord {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    /// "classifier" or "predictor".
    kind: String,
    /// Classifier output head ("four-class", "start", "stop").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<Thresholds>,
    ego: EgoPrint,
    input_layout: LayoutFingerprint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_layout: Option<LayoutFingerprint>,
    topology: Vec<usize>,
    hidden_activation: String,
    layers: Vec<LayerRecord>,
    input_norm: NormRecord,
    output_norm: NormRecord,
}

fn network_records(model: &MlpModel) -> (Vec<LayerRecord>, NormRecord, NormRecord) {
    let layers = model
        .layers()
        .iter()
        .map(|l| LayerRecord { weights: l.weights().to_vec(), biases: l.biases().to_vec() })
        .collect();
    let input_norm = NormRecord {
        mean: model.input_norm().mean().to_vec(),
        std: model.input_norm().std().to_vec(),
    };
    let output_norm = NormRecord {
        mean: model.output_norm().mean().to_vec(),
        std: model.output_norm().std().to_vec(),
    };
    (layers, input_norm, output_norm)
}

fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let json = serde_json::to_vec_pretty(file).context("serialize model file")?;
    write_atomic(path, &json)
}

fn read_model(path: &Path, expected_kind: &str) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read model file {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)
        .with_context(|| format!("parse model file {}", path.display()))?;
    if file.format_version != FORMAT_VERSION {
        bail!(
            "{}: unsupported model format version {} (this build reads {FORMAT_VERSION})",
            path.display(),
            file.format_version
        );
    }
    if file.kind != expected_kind {
        bail!("{}: model kind is `{}`, expected `{expected_kind}`", path.display(), file.kind);
    }
    Ok(file)
}

fn rebuild_network(file: &ModelFile, path: &Path) -> Result<MlpModel> {
    let activation = Activation::parse(&file.hidden_activation).ok_or_else(|| {
        anyhow::anyhow!("{}: unknown activation `{}`", path.display(), file.hidden_activation)
    })?;
    let layer_params = file
        .layers
        .iter()
        .map(|l| (l.weights.clone(), l.biases.clone()))
        .collect();
    let input_norm = Normalization::from_parts(file.input_norm.mean.clone(), file.input_norm.std.clone())
        .with_context(|| format!("{}: input normalization", path.display()))?;
    let output_norm =
        Normalization::from_parts(file.output_norm.mean.clone(), file.output_norm.std.clone())
            .with_context(|| format!("{}: output normalization", path.display()))?;
    MlpModel::from_parts(file.topology.clone(), activation, layer_params, input_norm, output_norm)
        .with_context(|| format!("{}: network shape is inconsistent", path.display()))
}

fn check_fingerprint(
    path: &Path,
    what: &str,
    stored: &LayoutFingerprint,
    expected: &LayoutFingerprint,
) -> Result<()> {
    if stored != expected {
        bail!(
            "fingerprint mismatch in {}: stored {what} layout {} does not match the configured layout {}",
            path.display(),
            serde_json::to_string(stored).unwrap_or_default(),
            serde_json::to_string(expected).unwrap_or_default()
        );
    }
    Ok(())
}

fn check_ego(path: &Path, stored: &EgoPrint, expected: &EgoPrint) -> Result<()> {
    if stored != expected {
        bail!(
            "fingerprint mismatch in {}: stored ego settings {:?} do not match the configured {:?}",
            path.display(),
            stored,
            expected
        );
    }
    Ok(())
}

pub fn save_classifier(
    path: &Path,
    classifier: &StateClassifier,
    thresholds: Option<Thresholds>,
) -> Result<()> {
    let (layers, input_norm, output_norm) = network_records(classifier.model());
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: "classifier".to_string(),
        mode: Some(classifier.mode().name().to_string()),
        thresholds,
        ego: EgoPrint::of(classifier.ego()),
        input_layout: LayoutFingerprint::of(classifier.features()),
        output_layout: None,
        topology: classifier.model().topology().to_vec(),
        hidden_activation: classifier.model().hidden_activation().name().to_string(),
        layers,
        input_norm,
        output_norm,
    };
    write_model(path, &file)
}

/// Loads a classifier and checks its fingerprint against the configured
/// feature layout and ego settings.
pub fn load_classifier(
    path: &Path,
    features: &BasisSet,
    ego: &EgoConfig,
) -> Result<(StateClassifier, Option<Thresholds>)> {
    let file = read_model(path, "classifier")?;
    check_fingerprint(path, "input", &file.input_layout, &LayoutFingerprint::of(features))?;
    check_ego(path, &file.ego, &EgoPrint::of(ego))?;
    let mode_name = file
        .mode
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("{}: classifier file lacks a mode", path.display()))?;
    let mode = ClassifierMode::parse(mode_name).ok_or_else(|| {
        anyhow::anyhow!("{}: unknown classifier mode `{mode_name}`", path.display())
    })?;
    let model = rebuild_network(&file, path)?;
    let classifier = StateClassifier::from_parts(model, features.clone(), *ego, mode)
        .with_context(|| format!("{}: classifier is inconsistent", path.display()))?;
    Ok((classifier, file.thresholds))
}

pub fn save_predictor(path: &Path, predictor: &TrajPredictor) -> Result<()> {
    let (layers, input_norm, output_norm) = network_records(predictor.model());
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: "predictor".to_string(),
        mode: None,
        thresholds: None,
        ego: EgoPrint::of(predictor.ego()),
        input_layout: LayoutFingerprint::of(predictor.input()),
        output_layout: Some(LayoutFingerprint::of(predictor.output())),
        topology: predictor.model().topology().to_vec(),
        hidden_activation: predictor.model().hidden_activation().name().to_string(),
        layers,
        input_norm,
        output_norm,
    };
    write_model(path, &file)
}

/// Loads a trajectory predictor and checks both layout fingerprints and
/// the ego settings.
pub fn load_predictor(
    path: &Path,
    input: &BasisSet,
    output: &BasisSet,
    ego: &EgoConfig,
) -> Result<TrajPredictor> {
    let file = read_model(path, "predictor")?;
    check_fingerprint(path, "input", &file.input_layout, &LayoutFingerprint::of(input))?;
    let stored_output = file
        .output_layout
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("{}: predictor file lacks an output layout", path.display()))?;
    check_fingerprint(path, "output", stored_output, &LayoutFingerprint::of(output))?;
    check_ego(path, &file.ego, &EgoPrint::of(ego))?;
    let model = rebuild_network(&file, path)?;
    TrajPredictor::from_parts(model, input.clone(), output.clone(), *ego)
        .with_context(|| format!("{}: predictor is inconsistent", path.display()))
}
