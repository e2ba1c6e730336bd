//! Motion-state classification: a four-state classifier with
//! pseudo-probability outputs, binary start/stop detectors built on the
//! summed positive-class probability, and accuracy-maximizing threshold
//! selection.
//!
//! Outputs are plain regression values trained against 0/1 targets; they
//! are clamped to [0, 1] at this consumer boundary and carry no transition
//! model or temporal smoothing.

use alloc::vec::Vec;

use crate::mlp::{train_rprop, Activation, MlpError, MlpModel, RpropConfig};
use crate::polyfeat::{extract_features, BasisSet, PolyConfig, PolyError};
use crate::traj::{
    ego_velocity, EgoConfig, MotionState, Scene, TrajError, VelocitySeries, DT_TOLERANCE,
    STATE_COUNT,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierError {
    NoScenes,
    /// Scenes disagree on the sampling interval.
    MixedSampleIntervals { dt_a: f64, dt_b: f64 },
    /// A motion state never occurs in the training labels.
    ClassAbsent { state: MotionState },
    /// A binary mode saw only one side of the split.
    BinarySideAbsent { positive: bool },
    NoLabeledFrames,
    /// The classifier's mode cannot produce the requested detection score.
    ModeMismatch,
    EmptyThresholdGrid,
    BadModel { what: &'static str },
    Traj(TrajError),
    Poly(PolyError),
    Mlp(MlpError),
}

impl core::fmt::Display for ClassifierError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ClassifierError::NoScenes => f.write_str("no training scenes"),
            ClassifierError::MixedSampleIntervals { dt_a, dt_b } => {
                write!(f, "scenes mix sample intervals {dt_a} s and {dt_b} s")
            }
            ClassifierError::ClassAbsent { state } => {
                write!(f, "state '{state}' is absent from the training labels")
            }
            ClassifierError::BinarySideAbsent { positive } => {
                let side = if *positive { "positive" } else { "negative" };
                write!(f, "binary training data has no {side} frames")
            }
            ClassifierError::NoLabeledFrames => {
                f.write_str("no frames with a complete input window")
            }
            ClassifierError::ModeMismatch => {
                f.write_str("classifier mode does not provide this detection score")
            }
            ClassifierError::EmptyThresholdGrid => f.write_str("threshold grid is empty"),
            ClassifierError::BadModel { what } => write!(f, "model mismatch: {what}"),
            ClassifierError::Traj(e) => write!(f, "trajectory: {e}"),
            ClassifierError::Poly(e) => write!(f, "features: {e}"),
            ClassifierError::Mlp(e) => write!(f, "network: {e}"),
        }
    }
}

impl core::error::Error for ClassifierError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            ClassifierError::Traj(e) => Some(e),
            ClassifierError::Poly(e) => Some(e),
            ClassifierError::Mlp(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TrajError> for ClassifierError {
    fn from(e: TrajError) -> Self {
        ClassifierError::Traj(e)
    }
}

impl From<PolyError> for ClassifierError {
    fn from(e: PolyError) -> Self {
        ClassifierError::Poly(e)
    }
}

impl From<MlpError> for ClassifierError {
    fn from(e: MlpError) -> Self {
        ClassifierError::Mlp(e)
    }
}

/// What the classifier was trained to separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierMode {
    /// One output per motion state, one-hot targets.
    FourClass,
    /// Single output: probability of having left Waiting.
    TwoClassStart,
    /// Single output: probability of stopping or stopped.
    TwoClassStop,
}

impl ClassifierMode {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierMode::FourClass => "four_class",
            ClassifierMode::TwoClassStart => "two_class_start",
            ClassifierMode::TwoClassStop => "two_class_stop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "four_class" => Some(ClassifierMode::FourClass),
            "two_class_start" => Some(ClassifierMode::TwoClassStart),
            "two_class_stop" => Some(ClassifierMode::TwoClassStop),
            _ => None,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            ClassifierMode::FourClass => STATE_COUNT,
            _ => 1,
        }
    }
}

/// Which transition a binary score detects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionSide {
    Start,
    Stop,
}

impl DetectionSide {
    /// Ground-truth positive under this side's binary relabeling: starting
    /// detection counts everything past Waiting as positive; stopping
    /// detection counts decelerating and stopped frames as positive.
    pub fn positive(self, label: MotionState) -> bool {
        match self {
            DetectionSide::Start => label != MotionState::Waiting,
            DetectionSide::Stop => {
                matches!(label, MotionState::Stopping | MotionState::Waiting)
            }
        }
    }
}

/// Clamped per-state pseudo-probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePosterior {
    probs: [f64; STATE_COUNT],
    normalized: bool,
}

impl StatePosterior {
    /// Clamps raw network outputs into [0, 1].
    pub fn from_raw(raw: [f64; STATE_COUNT]) -> Self {
        let mut probs = raw;
        for p in &mut probs {
            *p = p.clamp(0.0, 1.0);
        }
        Self { probs, normalized: false }
    }

    pub fn probs(&self) -> [f64; STATE_COUNT] {
        self.probs
    }

    pub fn get(&self, state: MotionState) -> f64 {
        self.probs[state.index()]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Most probable state; ties go to the earliest state in declaration
    /// order, so the result is deterministic.
    pub fn argmax(&self) -> MotionState {
        let mut best = 0;
        for i in 1..STATE_COUNT {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        MotionState::from_index(best).expect("index in range")
    }

    /// Rescales the components to sum to one (uniform when all are zero).
    /// Rescaling is monotone, so the argmax is unchanged.
    pub fn normalized(&self) -> StatePosterior {
        let sum: f64 = self.probs.iter().sum();
        let probs = if sum > 0.0 {
            let mut p = self.probs;
            for v in &mut p {
                *v /= sum;
            }
            p
        } else {
            [1.0 / STATE_COUNT as f64; STATE_COUNT]
        };
        StatePosterior { probs, normalized: true }
    }

    /// Summed probability of having left the waiting state.
    pub fn start_sum(&self) -> f64 {
        self.probs[MotionState::Starting.index()]
            + self.probs[MotionState::Moving.index()]
            + self.probs[MotionState::Stopping.index()]
    }

    /// Summed probability of stopping or being stopped.
    pub fn stop_sum(&self) -> f64 {
        self.probs[MotionState::Stopping.index()] + self.probs[MotionState::Waiting.index()]
    }

    pub fn detection_score(&self, side: DetectionSide) -> f64 {
        match side {
            DetectionSide::Start => self.start_sum(),
            DetectionSide::Stop => self.stop_sum(),
        }
    }
}

/// Positive iff the summed start probability reaches the threshold.
pub fn binarize_start(post: &StatePosterior, threshold: f64) -> bool {
    post.start_sum() >= threshold
}

/// Positive iff the summed stop probability reaches the threshold.
pub fn binarize_stop(post: &StatePosterior, threshold: f64) -> bool {
    post.stop_sum() >= threshold
}

/// Training knobs for a state classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Hidden layer widths (sigmoid); the in/out widths come from the
    /// feature layout and mode.
    pub hidden: Vec<usize>,
    pub features: PolyConfig,
    pub ego: EgoConfig,
    pub rprop: RpropConfig,
    /// Keep every `stride`-th timestep as a training pattern.
    pub stride: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: alloc::vec![20],
            features: PolyConfig::input_default(),
            ego: EgoConfig::default(),
            rprop: RpropConfig::default(),
            stride: 1,
        }
    }
}

/// A trained classifier bundled with everything needed to reproduce its
/// input features. Immutable; `classify` is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct StateClassifier {
    model: MlpModel,
    features: BasisSet,
    ego: EgoConfig,
    mode: ClassifierMode,
}

impl StateClassifier {
    /// Rebuilds a classifier from stored parts, checking that the network
    /// shape matches the feature layout and mode.
    pub fn from_parts(
        model: MlpModel,
        features: BasisSet,
        ego: EgoConfig,
        mode: ClassifierMode,
    ) -> Result<Self, ClassifierError> {
        if model.input_dim() != features.coeff_len() {
            return Err(ClassifierError::BadModel {
                what: "network input width != feature count",
            });
        }
        if model.output_dim() != mode.output_dim() {
            return Err(ClassifierError::BadModel {
                what: "network output width does not match mode",
            });
        }
        Ok(Self { model, features, ego, mode })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn features(&self) -> &BasisSet {
        &self.features
    }

    pub fn ego(&self) -> &EgoConfig {
        &self.ego
    }

    pub fn mode(&self) -> ClassifierMode {
        self.mode
    }

    /// Posterior at sample `now` of an ego-frame velocity series.
    ///
    /// Two-class models spread their single output s over the posterior so
    /// the matching sum recovers it exactly: the start detector reports
    /// (1-s, s, 0, 0), the stop detector (0, 0, 1-s, s).
    pub fn classify(
        &self,
        vel: &VelocitySeries,
        now: usize,
    ) -> Result<StatePosterior, ClassifierError> {
        let x = extract_features(vel, &self.features, now)?;
        let out = self.model.forward(&x)?;
        Ok(match self.mode {
            ClassifierMode::FourClass => {
                StatePosterior::from_raw([out[0], out[1], out[2], out[3]])
            }
            ClassifierMode::TwoClassStart => {
                let s = out[0].clamp(0.0, 1.0);
                StatePosterior { probs: [1.0 - s, s, 0.0, 0.0], normalized: false }
            }
            ClassifierMode::TwoClassStop => {
                let s = out[0].clamp(0.0, 1.0);
                StatePosterior { probs: [0.0, 0.0, 1.0 - s, s], normalized: false }
            }
        })
    }

    /// Posteriors for every timestep of a scene with a complete input
    /// window, as (sample index, posterior) pairs.
    pub fn classify_scene(
        &self,
        scene: &Scene,
    ) -> Result<Vec<(usize, StatePosterior)>, ClassifierError> {
        let (vel, _) = ego_velocity(scene.trajectory(), &self.ego)?;
        let first = self.features.past_samples();
        let mut out = Vec::with_capacity(scene.len().saturating_sub(first));
        for now in first..scene.len() {
            out.push((now, self.classify(&vel, now)?));
        }
        Ok(out)
    }

    /// Whether this classifier can produce the given detection score.
    pub fn supports(&self, side: DetectionSide) -> bool {
        matches!(
            (self.mode, side),
            (ClassifierMode::FourClass, _)
                | (ClassifierMode::TwoClassStart, DetectionSide::Start)
                | (ClassifierMode::TwoClassStop, DetectionSide::Stop)
        )
    }

    /// Per-frame (time, score) detection trace of a scene: the summed
    /// positive-class probability at every complete window.
    pub fn detection_trace(
        &self,
        scene: &Scene,
        side: DetectionSide,
    ) -> Result<(Vec<f64>, Vec<f64>), ClassifierError> {
        if !self.supports(side) {
            return Err(ClassifierError::ModeMismatch);
        }
        let posts = self.classify_scene(scene)?;
        let t = scene.trajectory().timestamps();
        let times = posts.iter().map(|(i, _)| t[*i]).collect();
        let scores = posts.iter().map(|(_, p)| p.detection_score(side)).collect();
        Ok((times, scores))
    }
}

/// Training result: the classifier plus selection diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTraining {
    pub classifier: StateClassifier,
    pub patterns: usize,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
}

fn common_dt(scenes: &[Scene]) -> Result<f64, ClassifierError> {
    let dt = scenes[0].dt();
    for scene in scenes {
        if (scene.dt() - dt).abs() > DT_TOLERANCE {
            return Err(ClassifierError::MixedSampleIntervals { dt_a: dt, dt_b: scene.dt() });
        }
    }
    Ok(dt)
}

/// Feature patterns with per-frame labels for every complete input window,
/// taking every `stride`-th timestep.
fn labeled_patterns(
    scenes: &[Scene],
    basis: &BasisSet,
    ego: &EgoConfig,
    stride: usize,
) -> Result<(Vec<Vec<f64>>, Vec<MotionState>), ClassifierError> {
    let stride = stride.max(1);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let first = basis.past_samples();
    for scene in scenes {
        let (vel, _) = ego_velocity(scene.trajectory(), ego)?;
        let mut now = first;
        while now < scene.len() {
            inputs.push(extract_features(&vel, basis, now)?);
            labels.push(scene.state_labels()[now]);
            now += stride;
        }
    }
    Ok((inputs, labels))
}

/// Trains a state classifier on labeled scenes: one pattern per timestep
/// with a complete input window, 0/1 targets (one-hot for four-class, the
/// binary split for two-class modes), sigmoid hidden layers.
pub fn train_classifier(
    scenes: &[Scene],
    config: &ClassifierConfig,
    mode: ClassifierMode,
) -> Result<ClassifierTraining, ClassifierError> {
    if scenes.is_empty() {
        return Err(ClassifierError::NoScenes);
    }
    let dt = common_dt(scenes)?;
    let basis = BasisSet::new(config.features.clone(), dt)?;
    let (inputs, labels) = labeled_patterns(scenes, &basis, &config.ego, config.stride)?;
    if inputs.is_empty() {
        return Err(ClassifierError::NoLabeledFrames);
    }

    let targets: Vec<Vec<f64>> = match mode {
        ClassifierMode::FourClass => {
            let mut seen = [false; STATE_COUNT];
            for &l in &labels {
                seen[l.index()] = true;
            }
            for state in MotionState::ALL {
                if !seen[state.index()] {
                    return Err(ClassifierError::ClassAbsent { state });
                }
            }
            labels
                .iter()
                .map(|&l| {
                    let mut t = alloc::vec![0.0; STATE_COUNT];
                    t[l.index()] = 1.0;
                    t
                })
                .collect()
        }
        ClassifierMode::TwoClassStart | ClassifierMode::TwoClassStop => {
            let side = if mode == ClassifierMode::TwoClassStart {
                DetectionSide::Start
            } else {
                DetectionSide::Stop
            };
            let flags: Vec<bool> = labels.iter().map(|&l| side.positive(l)).collect();
            if !flags.iter().any(|&p| p) {
                return Err(ClassifierError::BinarySideAbsent { positive: true });
            }
            if !flags.iter().any(|&p| !p) {
                return Err(ClassifierError::BinarySideAbsent { positive: false });
            }
            flags
                .iter()
                .map(|&p| alloc::vec![if p { 1.0 } else { 0.0 }])
                .collect()
        }
    };

    let mut layer_sizes = alloc::vec![basis.coeff_len()];
    layer_sizes.extend_from_slice(&config.hidden);
    layer_sizes.push(mode.output_dim());

    let outcome = train_rprop(&layer_sizes, Activation::Sigmoid, &inputs, &targets, &config.rprop)?;
    let classifier = StateClassifier {
        model: outcome.model,
        features: basis,
        ego: config.ego,
        mode,
    };
    Ok(ClassifierTraining {
        classifier,
        patterns: inputs.len(),
        best_epoch: outcome.best_epoch,
        best_validation_mse: outcome.best_validation_mse,
    })
}

/// A threshold pick with the training accuracy it achieved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Largest grid threshold maximizing frame accuracy of `score >= t`
/// against binary ground truth. Counting uses sorted scores, so the grid
/// cost is logarithmic per threshold; ties are exact integer comparisons.
pub fn select_threshold_from_scores(
    scores: &[f64],
    positive: &[bool],
    grid: &[f64],
) -> Result<ThresholdSelection, ClassifierError> {
    if grid.is_empty() {
        return Err(ClassifierError::EmptyThresholdGrid);
    }
    if scores.is_empty() || scores.len() != positive.len() {
        return Err(ClassifierError::NoLabeledFrames);
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // positives_at_or_above[i] = positives among sorted[i..].
    let mut positives_at_or_above = alloc::vec![0usize; n + 1];
    for i in (0..n).rev() {
        positives_at_or_above[i] =
            positives_at_or_above[i + 1] + usize::from(positive[order[i]]);
    }
    let total_positives = positives_at_or_above[0];

    let mut best_correct = 0usize;
    let mut best_threshold = grid[0];
    for &threshold in grid {
        let split = sorted_scores.partition_point(|&s| s < threshold);
        let predicted_positive_correct = positives_at_or_above[split];
        let predicted_negative_correct = split - (total_positives - positives_at_or_above[split]);
        let correct = predicted_positive_correct + predicted_negative_correct;
        // >= breaks ties toward the larger threshold (grid is scanned in
        // the caller's order; standard grids ascend).
        if correct >= best_correct {
            best_correct = correct;
            best_threshold = threshold;
        }
    }
    Ok(ThresholdSelection {
        threshold: best_threshold,
        accuracy: best_correct as f64 / n as f64,
    })
}

/// Accuracy-maximizing binarization threshold for a trained classifier on
/// labeled scenes, over the standard selection grid (step 0.001). Ground
/// truth comes from the per-frame labels under `side`'s binary split.
pub fn select_threshold(
    classifier: &StateClassifier,
    scenes: &[Scene],
    side: DetectionSide,
) -> Result<ThresholdSelection, ClassifierError> {
    if !classifier.supports(side) {
        return Err(ClassifierError::ModeMismatch);
    }
    if scenes.is_empty() {
        return Err(ClassifierError::NoScenes);
    }
    common_dt(scenes)?;
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for scene in scenes {
        let posts = classifier.classify_scene(scene)?;
        for (now, post) in posts {
            scores.push(post.detection_score(side));
            truth.push(side.positive(scene.state_labels()[now]));
        }
    }
    if scores.is_empty() {
        return Err(ClassifierError::NoLabeledFrames);
    }
    let grid = crate::metrics::threshold_grid(0.001);
    select_threshold_from_scores(&scores, &truth, &grid)
}
