//! Corpus-level orchestration: train/holdout splitting, forecast-error
//! accumulation per method, classifier evaluation, detection traces,
//! baseline grid tuning, misclassification injection, and the per-cycle
//! latency harness.

use anyhow::{anyhow, bail, Context, Result};

use polymlp_core::classifier::{
    select_threshold_from_scores, DetectionSide, StateClassifier, StatePosterior,
};
use polymlp_core::gated::{gated_predict, ExpertBank};
use polymlp_core::kalman::{CvKf, ImmConfig, ImmFilter, KfConfig};
use polymlp_core::metrics::{
    threshold_grid, AsaeeByClass, ConfusionMatrix, DetectionTrace, HorizonGrid,
};
use polymlp_core::predictor::{horizon_times, TrajPredictor};
use polymlp_core::traj::{
    derive_seed, ego_velocity, holdout_split, EgoConfig, EgoFrame, MotionState, Scene,
    VelocitySeries,
};

use crate::config::{RunConfig, ROLE_SPLIT};
use crate::manifest::GateSource;
use crate::model_io::Thresholds;
use crate::timing::{measure, TimingStats};

/// Deterministic train/holdout partition of a corpus. The split depends
/// only on the scene count, the holdout fraction, and the seed, so every
/// command working from the same configuration sees the same split.
pub fn split_corpus(scenes: &[Scene], cfg: &RunConfig) -> Result<(Vec<Scene>, Vec<Scene>)> {
    let (train_idx, holdout_idx) = holdout_split(
        scenes.len(),
        cfg.holdout_fraction,
        derive_seed(cfg.seed, ROLE_SPLIT),
    )?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| scenes[i].clone()).collect::<Vec<_>>();
    Ok((pick(&train_idx), pick(&holdout_idx)))
}

/// The scenes a training command learns from: the train side of the split
/// (everything when the holdout fraction is zero).
pub fn training_scenes(scenes: &[Scene], cfg: &RunConfig) -> Result<Vec<Scene>> {
    Ok(split_corpus(scenes, cfg)?.0)
}

/// The scenes evaluation reports on: the holdout side, or everything when
/// the holdout fraction is zero.
pub fn evaluation_scenes(scenes: &[Scene], cfg: &RunConfig) -> Result<Vec<Scene>> {
    let (_, holdout) = split_corpus(scenes, cfg)?;
    Ok(if holdout.is_empty() { scenes.to_vec() } else { holdout })
}

/// Shared geometry of one forecast evaluation: which sample indices get a
/// prediction and the horizon grid the errors are averaged on.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub grid: HorizonGrid,
    /// First eligible prediction index (complete input window).
    pub first: usize,
    /// Horizon length in samples.
    pub horizon: usize,
    pub stride: usize,
    pub ego: EgoConfig,
}

impl EvalContext {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let input = cfg.input_basis()?;
        let output = cfg.output_basis()?;
        let grid = HorizonGrid::new(horizon_times(&output))
            .map_err(|e| anyhow!("output_windows: {e}"))?;
        Ok(Self {
            grid,
            first: input.past_samples(),
            horizon: output.future_samples(),
            stride: cfg.eval_now_stride.max(1),
            ego: cfg.ego(),
        })
    }

    pub fn with_stride(&self, stride: usize) -> Self {
        Self { stride: stride.max(1), ..self.clone() }
    }

    fn eligible_nows(&self, scene_len: usize) -> impl Iterator<Item = usize> + '_ {
        (self.first..scene_len.saturating_sub(self.horizon)).step_by(self.stride)
    }
}

fn truth_slice(positions: &[[f64; 2]], now: usize, horizon: usize) -> &[[f64; 2]] {
    &positions[now + 1..now + 1 + horizon]
}

fn one_hot(state: MotionState) -> StatePosterior {
    let mut raw = [0.0; 4];
    raw[state.index()] = 1.0;
    StatePosterior::from_raw(raw)
}

/// Frame-deterministic misclassification injection: on moving-class scenes
/// a `fraction` of cycles (hashed from scene id and sample index, so every
/// expert bank sees the identical set) report a one-hot stopping posterior.
#[derive(Debug, Clone, Copy)]
pub struct Corruption {
    pub fraction: f64,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

impl Corruption {
    pub fn hits(&self, scene_id: &str, now: usize) -> bool {
        let mixed = derive_seed(fnv1a64(scene_id.as_bytes()), now as u64);
        ((mixed >> 11) as f64 / (1u64 << 53) as f64) < self.fraction
    }
}

/// Forecast error of the monolithic network over a corpus.
pub fn asaee_monolithic(
    scenes: &[Scene],
    predictor: &TrajPredictor,
    ctx: &EvalContext,
) -> Result<AsaeeByClass> {
    let mut asaee = AsaeeByClass::new(ctx.grid.clone());
    for scene in scenes {
        let (vel, frames) = ego_velocity(scene.trajectory(), &ctx.ego)
            .with_context(|| format!("scene `{}`", scene.scene_id()))?;
        let positions = scene.trajectory().positions();
        for now in ctx.eligible_nows(scene.len()) {
            let pred = predictor
                .predict(&vel, &frames[now], now)
                .with_context(|| format!("scene `{}` sample {now}", scene.scene_id()))?;
            asaee.add_prediction(
                scene.scene_class(),
                pred.positions(),
                truth_slice(positions, now, ctx.horizon),
            )?;
        }
    }
    Ok(asaee)
}

/// Forecast error of the gated two-stage pipeline. The gate posterior comes
/// from the classifier or from the labels (`GateSource`), optionally with
/// injected misclassifications on moving scenes.
pub fn asaee_gated(
    scenes: &[Scene],
    classifier: &StateClassifier,
    bank: &ExpertBank,
    gate: GateSource,
    corruption: Option<Corruption>,
    ctx: &EvalContext,
) -> Result<AsaeeByClass> {
    let mut asaee = AsaeeByClass::new(ctx.grid.clone());
    for scene in scenes {
        let (vel, frames) = ego_velocity(scene.trajectory(), &ctx.ego)
            .with_context(|| format!("scene `{}`", scene.scene_id()))?;
        let positions = scene.trajectory().positions();
        for now in ctx.eligible_nows(scene.len()) {
            let corrupted = corruption
                .map(|c| {
                    scene.scene_class() == MotionState::Moving && c.hits(scene.scene_id(), now)
                })
                .unwrap_or(false);
            let posterior = if corrupted {
                one_hot(MotionState::Stopping)
            } else {
                match gate {
                    GateSource::Classifier => classifier.classify(&vel, now)?,
                    GateSource::GroundTruth => one_hot(scene.state_labels()[now]),
                }
            };
            let outputs = bank.all_expert_outputs(&vel, now)?;
            let pred = gated_predict(&posterior, &outputs, bank.output(), &frames[now])
                .with_context(|| format!("scene `{}` sample {now}", scene.scene_id()))?;
            asaee.add_prediction(
                scene.scene_class(),
                pred.trajectory.positions(),
                truth_slice(positions, now, ctx.horizon),
            )?;
        }
    }
    Ok(asaee)
}

/// Forecast error of the constant-velocity Kalman baseline. The filter
/// walks every sample; predictions are emitted at the shared eligible
/// indices so all methods are scored on identical cycles.
pub fn asaee_cvkf(scenes: &[Scene], kf_cfg: &KfConfig, ctx: &EvalContext) -> Result<AsaeeByClass> {
    let mut asaee = AsaeeByClass::new(ctx.grid.clone());
    for scene in scenes {
        let mut kf = CvKf::new(kf_cfg)?;
        let positions = scene.trajectory().positions();
        let dt = scene.trajectory().dt();
        let n = scene.len();
        let mut eligible = ctx.eligible_nows(n).peekable();
        for (i, p) in positions.iter().enumerate() {
            kf.step(*p, dt)
                .with_context(|| format!("scene `{}` sample {i}", scene.scene_id()))?;
            if eligible.peek() == Some(&i) {
                eligible.next();
                if !kf.is_ready() {
                    bail!(
                        "scene `{}`: filter not ready at sample {i}; input window shorter than warmup",
                        scene.scene_id()
                    );
                }
                let pred = kf.predict_trajectory(ctx.grid.times())?;
                asaee.add_prediction(
                    scene.scene_class(),
                    &pred,
                    truth_slice(positions, i, ctx.horizon),
                )?;
            }
        }
    }
    Ok(asaee)
}

/// Confusion matrix of the classifier over every complete-window frame.
pub fn classification_confusion(
    scenes: &[Scene],
    classifier: &StateClassifier,
) -> Result<ConfusionMatrix> {
    let mut confusion = ConfusionMatrix::new();
    for scene in scenes {
        for (now, post) in classifier
            .classify_scene(scene)
            .with_context(|| format!("scene `{}`", scene.scene_id()))?
        {
            confusion.add(scene.state_labels()[now], post.argmax());
        }
    }
    Ok(confusion)
}

/// Detection traces of the classifier on the given scenes; the event is
/// the labeled transition start (scenes without one are excluded rows).
pub fn classifier_traces(
    scenes: &[Scene],
    classifier: &StateClassifier,
    side: DetectionSide,
) -> Result<Vec<DetectionTrace>> {
    scenes
        .iter()
        .map(|scene| {
            let (times, scores) = classifier
                .detection_trace(scene, side)
                .with_context(|| format!("scene `{}`", scene.scene_id()))?;
            Ok(DetectionTrace {
                times,
                scores,
                event_time: scene.events().transition_start,
            })
        })
        .collect()
}

/// Detection traces of the interacting-multiple-model filter: the score is
/// the moving-model probability (start side) or its complement (stop side).
pub fn imm_traces(
    scenes: &[Scene],
    imm_cfg: &ImmConfig,
    side: DetectionSide,
) -> Result<Vec<DetectionTrace>> {
    scenes
        .iter()
        .map(|scene| {
            let mut imm = ImmFilter::new(imm_cfg.clone())?;
            let dt = scene.trajectory().dt();
            let mut scores = Vec::with_capacity(scene.len());
            for (i, p) in scene.trajectory().positions().iter().enumerate() {
                imm.step(*p, dt)
                    .with_context(|| format!("scene `{}` sample {i}", scene.scene_id()))?;
                scores.push(match side {
                    DetectionSide::Start => imm.mu_cv(),
                    DetectionSide::Stop => 1.0 - imm.mu_cv(),
                });
            }
            Ok(DetectionTrace {
                times: scene.trajectory().timestamps().to_vec(),
                scores,
                event_time: scene.events().transition_start,
            })
        })
        .collect()
}

/// Mean posterior probability the filter assigns to the correct model:
/// the moving model on moving-labeled frames, the stationary model on
/// waiting-labeled frames (transition frames are skipped).
pub fn imm_mode_agreement(scenes: &[Scene], imm_cfg: &ImmConfig, stride: usize) -> Result<f64> {
    let stride = stride.max(1);
    let mut sum = 0.0;
    let mut count = 0u64;
    for scene in scenes {
        let mut imm = ImmFilter::new(imm_cfg.clone())?;
        let dt = scene.trajectory().dt();
        let labels = scene.state_labels();
        for (i, p) in scene.trajectory().positions().iter().enumerate() {
            imm.step(*p, dt)?;
            if i % stride != 0 {
                continue;
            }
            match labels[i] {
                MotionState::Moving => {
                    sum += imm.mu_cv();
                    count += 1;
                }
                MotionState::Waiting => {
                    sum += 1.0 - imm.mu_cv();
                    count += 1;
                }
                _ => {}
            }
        }
    }
    if count == 0 {
        bail!("no waiting- or moving-labeled frames to score the filter on");
    }
    Ok(sum / count as f64)
}

/// Grid-tunes the constant-velocity filter's process noise by pooled
/// forecast error on the given scenes (coarse stride).
pub fn tune_kf(scenes: &[Scene], cfg: &RunConfig, ctx: &EvalContext) -> Result<KfConfig> {
    let tune_ctx = ctx.with_stride(cfg.tune_now_stride);
    let mut best: Option<(f64, KfConfig)> = None;
    for q in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let candidate = KfConfig { q, ..cfg.kf_config() };
        let asaee = asaee_cvkf(scenes, &candidate, &tune_ctx)?;
        let score = asaee.pooled().asaee_cm_per_s()?;
        if best.as_ref().map(|(s, _)| score < *s).unwrap_or(true) {
            best = Some((score, candidate));
        }
    }
    Ok(best.expect("non-empty grid").1)
}

/// Grid-tunes the mode-transition diagonal and moving-model process noise
/// of the interacting-multiple-model filter by mode agreement.
pub fn tune_imm(scenes: &[Scene], cfg: &RunConfig) -> Result<ImmConfig> {
    let mut best: Option<(f64, ImmConfig)> = None;
    for stay in [0.99, 0.999, 0.9999] {
        for q_cv in [1.0, 2.0, 4.0] {
            let candidate = ImmConfig {
                q_cv,
                pi: [[stay, 1.0 - stay], [1.0 - stay, stay]],
                ..cfg.imm_config()
            };
            let score = imm_mode_agreement(scenes, &candidate, cfg.tune_now_stride)?;
            if best.as_ref().map(|(s, _)| score > *s).unwrap_or(true) {
                best = Some((score, candidate));
            }
        }
    }
    Ok(best.expect("non-empty grid").1)
}

/// Accuracy-maximizing detection threshold over the configured grid step.
pub fn select_side_threshold(
    scenes: &[Scene],
    classifier: &StateClassifier,
    side: DetectionSide,
    step: f64,
) -> Result<f64> {
    let mut scores = Vec::new();
    let mut positive = Vec::new();
    for scene in scenes {
        for (now, post) in classifier.classify_scene(scene)? {
            scores.push(post.detection_score(side));
            positive.push(side.positive(scene.state_labels()[now]));
        }
    }
    let grid = threshold_grid(step);
    Ok(select_threshold_from_scores(&scores, &positive, &grid)?.threshold)
}

/// Detection thresholds for every side the classifier supports.
pub fn select_thresholds(
    scenes: &[Scene],
    classifier: &StateClassifier,
    step: f64,
) -> Result<Thresholds> {
    let mut thresholds = Thresholds::default();
    if classifier.supports(DetectionSide::Start) {
        thresholds.start = Some(select_side_threshold(scenes, classifier, DetectionSide::Start, step)?);
    }
    if classifier.supports(DetectionSide::Stop) {
        thresholds.stop = Some(select_side_threshold(scenes, classifier, DetectionSide::Stop, step)?);
    }
    Ok(thresholds)
}

/// Scenes preprocessed for the latency harness, with the flattened list of
/// (scene, sample) cycles the workload will round-robin through.
pub struct TimingWorkload {
    prepared: Vec<(VelocitySeries, Vec<EgoFrame>)>,
    cycles: Vec<(usize, usize)>,
}

impl TimingWorkload {
    /// Ego-frame extraction happens once here, outside the timed region:
    /// the timed cycle is feature extraction, network inference, and
    /// reconstruction, matching the per-frame work of a deployed pipeline
    /// (velocity smoothing is an O(1) incremental update per frame).
    pub fn new(scenes: &[Scene], ctx: &EvalContext) -> Result<Self> {
        let mut prepared = Vec::with_capacity(scenes.len());
        let mut cycles = Vec::new();
        for (s, scene) in scenes.iter().enumerate() {
            let (vel, frames) = ego_velocity(scene.trajectory(), &ctx.ego)
                .with_context(|| format!("scene `{}`", scene.scene_id()))?;
            prepared.push((vel, frames));
            for now in ctx.eligible_nows(scene.len()) {
                cycles.push((s, now));
            }
        }
        if cycles.is_empty() {
            bail!("no scene is long enough for a complete input window plus horizon");
        }
        Ok(Self { prepared, cycles })
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }

    fn run_cycles(
        &self,
        warmup: usize,
        repetitions: usize,
        mut cycle: impl FnMut(&VelocitySeries, &[EgoFrame], usize) -> Result<()>,
    ) -> Result<TimingStats> {
        // Dry-run every distinct cycle once so the measured closure cannot
        // fail mid-flight.
        for &(s, now) in &self.cycles {
            let (vel, frames) = &self.prepared[s];
            cycle(vel, frames, now)?;
        }
        let mut i = 0usize;
        measure(warmup, repetitions, || {
            let (s, now) = self.cycles[i % self.cycles.len()];
            i += 1;
            let (vel, frames) = &self.prepared[s];
            cycle(vel, frames, now).expect("cycle succeeded in the dry run");
        })
    }

    /// Times the monolithic network: features, forward pass,
    /// reconstruction, back-transform.
    pub fn time_monolithic(
        &self,
        predictor: &TrajPredictor,
        warmup: usize,
        repetitions: usize,
    ) -> Result<TimingStats> {
        self.run_cycles(warmup, repetitions, |vel, frames, now| {
            let out = predictor.predict(vel, &frames[now], now)?;
            std::hint::black_box(out.positions().len());
            Ok(())
        })
    }

    /// Times the two-stage pipeline: classifier, all four experts, fusion,
    /// reconstruction, back-transform.
    pub fn time_two_stage(
        &self,
        classifier: &StateClassifier,
        bank: &ExpertBank,
        warmup: usize,
        repetitions: usize,
    ) -> Result<TimingStats> {
        self.run_cycles(warmup, repetitions, |vel, frames, now| {
            let posterior = classifier.classify(vel, now)?;
            let outputs = bank.all_expert_outputs(vel, now)?;
            let out = gated_predict(&posterior, &outputs, bank.output(), &frames[now])?;
            std::hint::black_box(out.trajectory.positions().len());
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polymlp_core::mlp::{Activation, MlpModel};
    use polymlp_core::synth::{generate_corpus, CorpusSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_corpus() -> Vec<Scene> {
        let spec = CorpusSpec { counts: [3, 3, 3, 3], ..CorpusSpec::default() };
        generate_corpus(&spec, 11).unwrap()
    }

    fn quick_config() -> RunConfig {
        RunConfig { eval_now_stride: 10, ..RunConfig::default() }
    }

    fn random_predictor(cfg: &RunConfig, seed: u64) -> TrajPredictor {
        let input = cfg.input_basis().unwrap();
        let output = cfg.output_basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MlpModel::new_random(
            &[input.coeff_len(), 8, output.coeff_len()],
            Activation::Sigmoid,
            &mut rng,
        )
        .unwrap();
        TrajPredictor::from_parts(model, input, output, cfg.ego()).unwrap()
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let scenes = small_corpus();
        let cfg = RunConfig::default();
        let (train_a, holdout_a) = split_corpus(&scenes, &cfg).unwrap();
        let (train_b, holdout_b) = split_corpus(&scenes, &cfg).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(holdout_a, holdout_b);
        assert_eq!(train_a.len() + holdout_a.len(), scenes.len());
        let mut ids: Vec<&str> = train_a
            .iter()
            .chain(&holdout_a)
            .map(|s| s.scene_id())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), scenes.len(), "no scene appears twice");
    }

    #[test]
    fn zero_holdout_evaluates_everything() {
        let scenes = small_corpus();
        let cfg = RunConfig { holdout_fraction: 0.0, ..RunConfig::default() };
        assert_eq!(training_scenes(&scenes, &cfg).unwrap().len(), scenes.len());
        assert_eq!(evaluation_scenes(&scenes, &cfg).unwrap().len(), scenes.len());
    }

    #[test]
    fn kalman_baseline_accumulates_on_every_class() {
        let scenes = small_corpus();
        let cfg = quick_config();
        let ctx = EvalContext::new(&cfg).unwrap();
        let asaee = asaee_cvkf(&scenes, &cfg.kf_config(), &ctx).unwrap();
        for state in MotionState::ALL {
            assert!(
                asaee.class_accumulator(state).prediction_count() > 0,
                "{state} got no predictions"
            );
        }
        assert!(asaee.pooled().asaee_cm_per_s().unwrap() > 0.0);
    }

    #[test]
    fn corruption_is_deterministic_and_rate_accurate() {
        let c = Corruption { fraction: 0.1 };
        let hits: Vec<bool> = (0..20_000).map(|now| c.hits("moving-0001", now)).collect();
        let again: Vec<bool> = (0..20_000).map(|now| c.hits("moving-0001", now)).collect();
        assert_eq!(hits, again);
        let rate = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        assert!((rate - 0.1).abs() < 0.01, "rate {rate}");
        let other: Vec<bool> = (0..20_000).map(|now| c.hits("moving-0002", now)).collect();
        assert_ne!(hits, other, "different scenes draw different frames");
    }

    #[test]
    fn ground_truth_gate_runs_and_scores_every_class() {
        let scenes = small_corpus();
        let cfg = quick_config();
        let ctx = EvalContext::new(&cfg).unwrap();
        let specific = polymlp_core::gated::train_specific_predictors(
            &scenes,
            &polymlp_core::predictor::PredictorConfig {
                rprop: polymlp_core::mlp::RpropConfig {
                    max_epochs: 3,
                    ..Default::default()
                },
                stride: 25,
                ..polymlp_core::gated::specific_default_config()
            },
        )
        .unwrap();
        let bank = specific.into_bank().unwrap();
        // Classifier is unused under a ground-truth gate; a random one keeps
        // the call signature honest.
        let features = cfg.input_basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model =
            MlpModel::new_random(&[features.coeff_len(), 6, 4], Activation::Sigmoid, &mut rng)
                .unwrap();
        let classifier = StateClassifier::from_parts(
            model,
            features,
            cfg.ego(),
            polymlp_core::classifier::ClassifierMode::FourClass,
        )
        .unwrap();
        let asaee = asaee_gated(
            &scenes,
            &classifier,
            &bank,
            GateSource::GroundTruth,
            None,
            &ctx,
        )
        .unwrap();
        assert!(asaee.pooled().prediction_count() > 0);
    }

    #[test]
    fn monolithic_and_kalman_share_cycle_counts() {
        let scenes = small_corpus();
        let cfg = quick_config();
        let ctx = EvalContext::new(&cfg).unwrap();
        let predictor = random_predictor(&cfg, 3);
        let a = asaee_monolithic(&scenes, &predictor, &ctx).unwrap();
        let b = asaee_cvkf(&scenes, &cfg.kf_config(), &ctx).unwrap();
        assert_eq!(
            a.pooled().prediction_count(),
            b.pooled().prediction_count(),
            "methods must be scored on identical cycles"
        );
    }

    #[test]
    fn timing_workload_counts_cycles() {
        let scenes = small_corpus();
        let cfg = quick_config();
        let ctx = EvalContext::new(&cfg).unwrap();
        let workload = TimingWorkload::new(&scenes, &ctx).unwrap();
        let expected: usize = scenes
            .iter()
            .map(|s| ctx.eligible_nows(s.len()).count())
            .sum();
        assert_eq!(workload.cycle_count(), expected);
        let predictor = random_predictor(&cfg, 4);
        let stats = workload.time_monolithic(&predictor, 2, 8).unwrap();
        assert_eq!(stats.repetitions, 8);
        assert!(stats.median_us > 0.0);
    }

    #[test]
    fn imm_agreement_is_a_probability() {
        let scenes = small_corpus();
        let cfg = quick_config();
        let score = imm_mode_agreement(&scenes, &cfg.imm_config(), 5).unwrap();
        assert!((0.0..=1.0).contains(&score), "{score}");
    }
}
