//! Monolithic trajectory prediction: velocity-window features in, future
//! ego-position polynomial coefficients out, reconstructed on a 125-step
//! 20 ms horizon and transformed back to global coordinates through the
//! ego frame at prediction time.

use alloc::vec::Vec;

use crate::mlp::{train_rprop, Activation, MlpError, MlpModel, Patterns, RpropConfig};
use crate::polyfeat::{extract_features, BasisSet, PolyConfig, PolyError};
use crate::traj::{
    ego_velocity, EgoConfig, EgoFrame, Scene, TrajError, VelocitySeries, DT_TOLERANCE,
};

/// Reach ceiling for the first-step plausibility check (m/s); well above
/// any pedestrian or cyclist the pipeline models.
pub const MAX_PLAUSIBLE_SPEED: f64 = 12.0;
/// Additive slack on the first-step reach check (m).
pub const FIRST_STEP_SLACK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    NoScenes,
    /// Scenes disagree on the sampling interval.
    MixedSampleIntervals { dt_a: f64, dt_b: f64 },
    /// No timestep had both a complete input window and a complete
    /// prediction horizon inside the scene.
    NoPatterns,
    BadModel { what: &'static str },
    EmptyTrajectory,
    LengthMismatch { expected: usize, got: usize },
    NonFinitePosition { step: usize },
    /// The first predicted step is further from the origin than any
    /// plausible road user could travel.
    ImplausibleFirstStep { displacement: f64, limit: f64 },
    BadHorizon,
    Traj(TrajError),
    Poly(PolyError),
    Mlp(MlpError),
}

impl core::fmt::Display for PredictError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PredictError::NoScenes => f.write_str("no training scenes"),
            PredictError::MixedSampleIntervals { dt_a, dt_b } => {
                write!(f, "scenes mix sample intervals {dt_a} s and {dt_b} s")
            }
            PredictError::NoPatterns => {
                f.write_str("no timestep offers complete input and output windows")
            }
            PredictError::BadModel { what } => write!(f, "model mismatch: {what}"),
            PredictError::EmptyTrajectory => f.write_str("predicted trajectory is empty"),
            PredictError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            PredictError::NonFinitePosition { step } => {
                write!(f, "non-finite predicted position at step {step}")
            }
            PredictError::ImplausibleFirstStep { displacement, limit } => {
                write!(f, "first step jumps {displacement} m (limit {limit} m)")
            }
            PredictError::BadHorizon => {
                f.write_str("horizon times must be finite, positive, increasing")
            }
            PredictError::Traj(e) => write!(f, "trajectory: {e}"),
            PredictError::Poly(e) => write!(f, "features: {e}"),
            PredictError::Mlp(e) => write!(f, "network: {e}"),
        }
    }
}

impl core::error::Error for PredictError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            PredictError::Traj(e) => Some(e),
            PredictError::Poly(e) => Some(e),
            PredictError::Mlp(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TrajError> for PredictError {
    fn from(e: TrajError) -> Self {
        PredictError::Traj(e)
    }
}

impl From<PolyError> for PredictError {
    fn from(e: PolyError) -> Self {
        PredictError::Poly(e)
    }
}

impl From<MlpError> for PredictError {
    fn from(e: MlpError) -> Self {
        PredictError::Mlp(e)
    }
}

/// A forecast over a fixed future horizon, in global coordinates, bundled
/// with the ego frame it was transformed through.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory {
    origin: EgoFrame,
    times: Vec<f64>,
    positions: Vec<[f64; 2]>,
}

impl PredictedTrajectory {
    /// Validates the horizon grid, finiteness, and that the first step is
    /// physically reachable from the origin.
    pub fn new(
        origin: EgoFrame,
        times: Vec<f64>,
        positions: Vec<[f64; 2]>,
    ) -> Result<Self, PredictError> {
        if times.is_empty() {
            return Err(PredictError::EmptyTrajectory);
        }
        if positions.len() != times.len() {
            return Err(PredictError::LengthMismatch {
                expected: times.len(),
                got: positions.len(),
            });
        }
        let increasing = times.windows(2).all(|w| w[1] > w[0]);
        if !increasing || !times.iter().all(|&t| t.is_finite() && t > 0.0) {
            return Err(PredictError::BadHorizon);
        }
        for (step, p) in positions.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(PredictError::NonFinitePosition { step });
            }
        }
        let dx = positions[0][0] - origin.origin[0];
        let dy = positions[0][1] - origin.origin[1];
        let displacement = crate::math::hypot(dx, dy);
        let limit = MAX_PLAUSIBLE_SPEED * times[0] + FIRST_STEP_SLACK;
        if displacement > limit {
            return Err(PredictError::ImplausibleFirstStep { displacement, limit });
        }
        Ok(Self { origin, times, positions })
    }

    pub fn origin(&self) -> &EgoFrame {
        &self.origin
    }

    /// Horizon times in seconds after the prediction sample.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> [f64; 2] {
        self.positions[self.positions.len() - 1]
    }

    /// Applies a rigid transform (for equivariance checks).
    pub fn rigid_transformed(&self, angle: f64, translation: [f64; 2]) -> PredictedTrajectory {
        let (s, c) = (crate::math::sin(angle), crate::math::cos(angle));
        let map = |p: [f64; 2]| {
            [
                c * p[0] - s * p[1] + translation[0],
                s * p[0] + c * p[1] + translation[1],
            ]
        };
        PredictedTrajectory {
            origin: EgoFrame {
                origin: map(self.origin.origin),
                heading: self.origin.heading + angle,
            },
            times: self.times.clone(),
            positions: self.positions.iter().map(|&p| map(p)).collect(),
        }
    }
}

/// Horizon sample times implied by an output window layout: one per future
/// sample, at the feature sampling interval.
pub fn horizon_times(output: &BasisSet) -> Vec<f64> {
    (1..=output.future_samples()).map(|i| i as f64 * output.dt()).collect()
}

/// Reconstructs ego-frame coefficients on the output horizon and maps the
/// result into global coordinates through `frame_now`.
pub fn reconstruct_prediction(
    coeffs: &[f64],
    output: &BasisSet,
    frame_now: &EgoFrame,
) -> Result<PredictedTrajectory, PredictError> {
    let times = horizon_times(output);
    let series = output.reconstruct(coeffs, &times)?;
    let positions: Vec<[f64; 2]> = series[0]
        .iter()
        .zip(&series[1])
        .map(|(&x, &y)| frame_now.to_global([x, y]))
        .collect();
    PredictedTrajectory::new(*frame_now, times, positions)
}

/// Largest distance between consecutive reconstructed positions that
/// straddle an output-window boundary. The polynomial pieces are fitted
/// independently, so this jump is the natural continuity diagnostic.
pub fn max_boundary_jump(prediction: &PredictedTrajectory, output: &BasisSet) -> f64 {
    let counts = output.window_sample_counts();
    let mut jump: f64 = 0.0;
    let mut last = 0usize;
    let p = prediction.positions();
    for n in &counts[..counts.len().saturating_sub(1)] {
        last += n;
        if last < p.len() {
            let a = p[last - 1];
            let b = p[last];
            jump = jump.max(crate::math::hypot(b[0] - a[0], b[1] - a[1]));
        }
    }
    jump
}

/// Straight-line extrapolation at the current smoothed ego velocity; the
/// degenerate reference predictor.
pub fn kinematic_baseline_predict(
    vel: &VelocitySeries,
    frame_now: &EgoFrame,
    now: usize,
    times: &[f64],
) -> Result<PredictedTrajectory, PredictError> {
    let v = [vel.v_lon[now], vel.v_lat[now]];
    let positions = times
        .iter()
        .map(|&t| frame_now.to_global([v[0] * t, v[1] * t]))
        .collect();
    PredictedTrajectory::new(*frame_now, times.to_vec(), positions)
}

/// A trained trajectory predictor with its feature layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajPredictor {
    model: MlpModel,
    input: BasisSet,
    output: BasisSet,
    ego: EgoConfig,
}

impl TrajPredictor {
    pub fn from_parts(
        model: MlpModel,
        input: BasisSet,
        output: BasisSet,
        ego: EgoConfig,
    ) -> Result<Self, PredictError> {
        if model.input_dim() != input.coeff_len() {
            return Err(PredictError::BadModel { what: "network input width != feature count" });
        }
        if model.output_dim() != output.coeff_len() {
            return Err(PredictError::BadModel {
                what: "network output width != output coefficient count",
            });
        }
        Ok(Self { model, input, output, ego })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn input(&self) -> &BasisSet {
        &self.input
    }

    pub fn output(&self) -> &BasisSet {
        &self.output
    }

    pub fn ego(&self) -> &EgoConfig {
        &self.ego
    }

    /// De-normalized output coefficients at sample `now`.
    pub fn coefficients(&self, vel: &VelocitySeries, now: usize) -> Result<Vec<f64>, PredictError> {
        let x = extract_features(vel, &self.input, now)?;
        Ok(self.model.forward(&x)?)
    }

    /// Full prediction: features, network, reconstruction, back-transform.
    pub fn predict(
        &self,
        vel: &VelocitySeries,
        frame_now: &EgoFrame,
        now: usize,
    ) -> Result<PredictedTrajectory, PredictError> {
        let coeffs = self.coefficients(vel, now)?;
        reconstruct_prediction(&coeffs, &self.output, frame_now)
    }
}

/// Training knobs for trajectory predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    /// Hidden layer widths (sigmoid).
    pub hidden: Vec<usize>,
    pub input: PolyConfig,
    pub output: PolyConfig,
    pub ego: EgoConfig,
    pub rprop: RpropConfig,
    /// Keep every `stride`-th timestep as a training pattern.
    pub stride: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            hidden: alloc::vec![40],
            input: PolyConfig::input_default(),
            output: PolyConfig::output_default(),
            ego: EgoConfig::default(),
            rprop: RpropConfig::default(),
            stride: 1,
        }
    }
}

/// Training result plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTraining {
    pub predictor: TrajPredictor,
    pub patterns: usize,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
}

fn common_dt(scenes: &[Scene]) -> Result<f64, PredictError> {
    let dt = scenes[0].dt();
    for scene in scenes {
        if (scene.dt() - dt).abs() > DT_TOLERANCE {
            return Err(PredictError::MixedSampleIntervals { dt_a: dt, dt_b: scene.dt() });
        }
    }
    Ok(dt)
}

/// Target coefficients at `now`: the future global positions mapped into
/// the ego frame at `now` and fitted window-by-window.
fn target_coefficients(
    scene: &Scene,
    frames: &[EgoFrame],
    output: &BasisSet,
    now: usize,
) -> Result<Vec<f64>, PolyError> {
    let horizon = output.future_samples();
    let p = scene.trajectory().positions();
    let frame = &frames[now];
    let mut ego_x = Vec::with_capacity(horizon + 1);
    let mut ego_y = Vec::with_capacity(horizon + 1);
    for &pos in &p[now..=now + horizon] {
        let e = frame.to_ego(pos);
        ego_x.push(e[0]);
        ego_y.push(e[1]);
    }
    output.fit_at(&[&ego_x, &ego_y], 0)
}

/// Feature/target pattern pairs for every timestep whose input window and
/// full prediction horizon both fit inside the scene.
fn prediction_patterns(
    scenes: &[Scene],
    input: &BasisSet,
    output: &BasisSet,
    ego: &EgoConfig,
    stride: usize,
) -> Result<(Patterns, Patterns), PredictError> {
    let stride = stride.max(1);
    let first = input.past_samples();
    let horizon = output.future_samples();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for scene in scenes {
        if scene.len() < first + horizon + 1 {
            continue;
        }
        let (vel, frames) = ego_velocity(scene.trajectory(), ego)?;
        let mut now = first;
        while now + horizon < scene.len() {
            inputs.push(extract_features(&vel, input, now)?);
            targets.push(target_coefficients(scene, &frames, output, now)?);
            now += stride;
        }
    }
    Ok((inputs, targets))
}

/// Trains the monolithic predictor: ego-velocity window features to
/// future ego-position coefficients, z-normalized per component.
pub fn train_predictor(
    scenes: &[Scene],
    config: &PredictorConfig,
) -> Result<PredictorTraining, PredictError> {
    if scenes.is_empty() {
        return Err(PredictError::NoScenes);
    }
    let dt = common_dt(scenes)?;
    let input = BasisSet::new(config.input.clone(), dt)?;
    let output = BasisSet::new(config.output.clone(), dt)?;
    let (inputs, targets) = prediction_patterns(scenes, &input, &output, &config.ego, config.stride)?;
    if inputs.is_empty() {
        return Err(PredictError::NoPatterns);
    }

    let mut layer_sizes = alloc::vec![input.coeff_len()];
    layer_sizes.extend_from_slice(&config.hidden);
    layer_sizes.push(output.coeff_len());

    let outcome = train_rprop(&layer_sizes, Activation::Sigmoid, &inputs, &targets, &config.rprop)?;
    Ok(PredictorTraining {
        predictor: TrajPredictor { model: outcome.model, input, output, ego: config.ego },
        patterns: inputs.len(),
        best_epoch: outcome.best_epoch,
        best_validation_mse: outcome.best_validation_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::{MotionState, SceneEvents, Trajectory};
    use alloc::string::ToString;
    use alloc::vec;

    fn frame(origin: [f64; 2], heading: f64) -> EgoFrame {
        EgoFrame { origin, heading }
    }

    fn const_vel(n: usize, v_lon: f64, v_lat: f64) -> VelocitySeries {
        VelocitySeries {
            v_lon: vec![v_lon; n],
            v_lat: vec![v_lat; n],
            speed: vec![crate::math::hypot(v_lon, v_lat); n],
        }
    }

    fn grid() -> Vec<f64> {
        (1..=125).map(|i| i as f64 * 0.02).collect()
    }

    #[test]
    fn kinematic_baseline_extrapolates_straight_lines() {
        let vel = const_vel(10, 1.0, 0.0);
        let p = kinematic_baseline_predict(&vel, &frame([0.0, 0.0], 0.0), 5, &grid()).unwrap();
        assert_eq!(p.len(), 125);
        let end = p.endpoint();
        assert!((end[0] - 2.5).abs() < 1e-12 && end[1].abs() < 1e-12, "{end:?}");

        let still = const_vel(10, 0.0, 0.0);
        let p = kinematic_baseline_predict(&still, &frame([3.0, -2.0], 1.0), 5, &grid()).unwrap();
        assert!(p.positions().iter().all(|&q| q == [3.0, -2.0]));
    }

    #[test]
    fn kinematic_baseline_rotates_with_the_frame() {
        use core::f64::consts::FRAC_PI_2;
        let vel = const_vel(10, 1.0, 1.0);
        let p = kinematic_baseline_predict(&vel, &frame([0.0, 0.0], FRAC_PI_2), 5, &grid())
            .unwrap();
        // Ego displacement (2.5, 2.5) rotated by pi/2 is (-2.5, 2.5).
        let end = p.endpoint();
        assert!((end[0] + 2.5).abs() < 1e-9 && (end[1] - 2.5).abs() < 1e-9, "{end:?}");
    }

    #[test]
    fn predicted_trajectory_rejects_garbage() {
        let f = frame([0.0, 0.0], 0.0);
        let times = grid();
        let mut positions = vec![[0.0, 0.0]; 125];
        positions[7] = [f64::NAN, 0.0];
        assert!(matches!(
            PredictedTrajectory::new(f, times.clone(), positions),
            Err(PredictError::NonFinitePosition { step: 7 })
        ));

        let teleport = vec![[9.0, 0.0]; 125];
        assert!(matches!(
            PredictedTrajectory::new(f, times.clone(), teleport),
            Err(PredictError::ImplausibleFirstStep { .. })
        ));

        assert!(matches!(
            PredictedTrajectory::new(f, Vec::new(), Vec::new()),
            Err(PredictError::EmptyTrajectory)
        ));
        assert!(matches!(
            PredictedTrajectory::new(f, times, vec![[0.0, 0.0]; 7]),
            Err(PredictError::LengthMismatch { .. })
        ));
    }

    /// Constant-speed walking scene along +x.
    fn walking_scene(id: &str, speed: f64, n: usize) -> Scene {
        let dt = 0.02;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let pos: Vec<[f64; 2]> = times.iter().map(|&t| [speed * t, 0.0]).collect();
        Scene::new(
            id.to_string(),
            MotionState::Moving,
            1.0 / dt,
            Trajectory::new(times, pos).unwrap(),
            vec![MotionState::Moving; n],
            SceneEvents::default(),
        )
        .unwrap()
    }

    fn standing_scene(id: &str, at: [f64; 2], n: usize) -> Scene {
        let dt = 0.02;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let pos: Vec<[f64; 2]> = times.iter().map(|_| at).collect();
        Scene::new(
            id.to_string(),
            MotionState::Waiting,
            1.0 / dt,
            Trajectory::new(times, pos).unwrap(),
            vec![MotionState::Waiting; n],
            SceneEvents::default(),
        )
        .unwrap()
    }

    fn fast_config(hidden: usize, epochs: usize) -> PredictorConfig {
        PredictorConfig {
            hidden: vec![hidden],
            rprop: RpropConfig {
                max_epochs: epochs,
                seed: 11,
                validation_fraction: 0.0,
                ..RpropConfig::default()
            },
            stride: 3,
            ..PredictorConfig::default()
        }
    }

    fn walking_corpus() -> Vec<Scene> {
        [0.8, 1.0, 1.2, 1.6, 1.8, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| walking_scene(&alloc::format!("walk-{i}"), v, 220))
            .collect()
    }

    #[test]
    fn pattern_count_respects_both_window_ends() {
        let scenes = vec![walking_scene("w", 1.4, 200)];
        let cfg = PredictorConfig { stride: 1, ..fast_config(4, 1) };
        let input = BasisSet::new(cfg.input.clone(), 0.02).unwrap();
        let output = BasisSet::new(cfg.output.clone(), 0.02).unwrap();
        let (inputs, targets) =
            prediction_patterns(&scenes, &input, &output, &cfg.ego, 1).unwrap();
        // now ranges over 50..=74: 50 past samples needed, 125 future.
        assert_eq!(inputs.len(), 25);
        assert_eq!(targets.len(), 25);
        assert_eq!(inputs[0].len(), 16);
        assert_eq!(targets[0].len(), 30);

        // A scene shorter than input + horizon + 1 yields nothing.
        let short = vec![walking_scene("s", 1.4, 170)];
        let (i2, _) = prediction_patterns(&short, &input, &output, &cfg.ego, 1).unwrap();
        assert!(i2.is_empty());
    }

    #[test]
    fn walking_model_extrapolates_held_out_speed() {
        let trained = train_predictor(&walking_corpus(), &fast_config(10, 150)).unwrap();
        let scene = walking_scene("test", 1.4, 200);
        let (vel, frames) = ego_velocity(scene.trajectory(), trained.predictor.ego()).unwrap();
        let now = 60;
        let p = trained.predictor.predict(&vel, &frames[now], now).unwrap();
        let start = scene.trajectory().positions()[now];
        let end = p.endpoint();
        let forward = end[0] - start[0];
        assert!((forward - 3.5).abs() < 0.5, "forward {forward}");
        assert!(end[1].abs() < 0.5, "lateral {}", end[1]);
        // Independently fitted window polynomials stay continuous once
        // the mapping is learned.
        assert!(max_boundary_jump(&p, trained.predictor.output()) < 0.25);
    }

    #[test]
    fn standing_model_stays_put() {
        let scenes: Vec<Scene> = (0..4)
            .map(|i| standing_scene(&alloc::format!("stand-{i}"), [i as f64, -1.0], 220))
            .collect();
        let trained = train_predictor(&scenes, &fast_config(6, 80)).unwrap();
        let scene = standing_scene("test", [2.5, 0.5], 200);
        let (vel, frames) = ego_velocity(scene.trajectory(), trained.predictor.ego()).unwrap();
        let p = trained.predictor.predict(&vel, &frames[60], 60).unwrap();
        let end = p.endpoint();
        let drift = crate::math::hypot(end[0] - 2.5, end[1] - 0.5);
        assert!(drift < 0.1, "drift {drift}");
    }

    #[test]
    fn prediction_is_equivariant_under_rigid_transforms() {
        let trained = train_predictor(&walking_corpus(), &fast_config(8, 100)).unwrap();
        let scene = walking_scene("test", 1.3, 200);
        let now = 70;

        let (vel, frames) = ego_velocity(scene.trajectory(), trained.predictor.ego()).unwrap();
        let base = trained.predictor.predict(&vel, &frames[now], now).unwrap();

        let angle = 0.8;
        let shift = [4.0, -7.0];
        let moved = scene.trajectory().rigid_transformed(angle, shift);
        let (vel_t, frames_t) = ego_velocity(&moved, trained.predictor.ego()).unwrap();
        let transformed = trained.predictor.predict(&vel_t, &frames_t[now], now).unwrap();

        let expected = base.rigid_transformed(angle, shift);
        for (a, b) in transformed.positions().iter().zip(expected.positions()) {
            assert!(
                crate::math::hypot(a[0] - b[0], a[1] - b[1]) < 1e-6,
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn fixed_seed_retrain_reproduces_identical_weights() {
        let corpus = walking_corpus();
        let a = train_predictor(&corpus, &fast_config(6, 40)).unwrap();
        let b = train_predictor(&corpus, &fast_config(6, 40)).unwrap();
        let pa = a.predictor.model().params();
        let pb = b.predictor.model().params();
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn training_needs_usable_patterns() {
        assert!(matches!(
            train_predictor(&[], &fast_config(4, 10)),
            Err(PredictError::NoScenes)
        ));
        let short = vec![walking_scene("s", 1.4, 100)];
        assert!(matches!(
            train_predictor(&short, &fast_config(4, 10)),
            Err(PredictError::NoPatterns)
        ));
    }

    #[test]
    fn boundary_jump_flags_discontinuous_coefficients() {
        let output = BasisSet::new(PolyConfig::output_default(), 0.02).unwrap();
        // Constant 0 in the first window, constant 1 in the second, for the
        // x dimension: a deliberate 1 m jump at the first boundary.
        let mut coeffs = vec![0.0; output.coeff_len()];
        // Window coefficient layout per dim: 5 windows x 3 coeffs. The
        // constant basis value is 1/sqrt(n), so coefficient sqrt(n) gives 1.
        let n = output.window_sample_counts()[1] as f64;
        coeffs[3] = crate::math::sqrt(n);
        let p = reconstruct_prediction(&coeffs, &output, &frame([0.0, 0.0], 0.0)).unwrap();
        let jump = max_boundary_jump(&p, &output);
        assert!((jump - 1.0).abs() < 1e-9, "jump {jump}");
    }

    #[test]
    fn from_parts_checks_shapes() {
        let trained = train_predictor(&walking_corpus(), &fast_config(4, 10)).unwrap();
        let p = trained.predictor;
        let err = TrajPredictor::from_parts(
            p.model().clone(),
            p.output().clone(), // swapped on purpose
            p.input().clone(),
            *p.ego(),
        )
        .unwrap_err();
        assert!(matches!(err, PredictError::BadModel { .. }));
    }
}
