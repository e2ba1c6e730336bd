//! Two-stage state-specific prediction: classifier posteriors gate four
//! per-state experts by a weighted sum of their output coefficients.
//! Experts are per-state trained networks, constant-position/velocity
//! extrapolators, or parameterized logistic speed-profile models for
//! speeding up and slowing down.
//!
//! Fusion happens in coefficient space; by linearity of the polynomial
//! reconstruction this equals fusing trajectories, but costs one
//! reconstruction instead of four.

use alloc::vec::Vec;

use crate::classifier::StatePosterior;
use crate::math;
use crate::polyfeat::{BasisSet, PolyError};
use crate::predictor::{
    kinematic_baseline_predict, reconstruct_prediction, train_predictor, PredictError,
    PredictedTrajectory, PredictorConfig, TrajPredictor,
};
use crate::traj::{EgoConfig, EgoFrame, MotionState, Scene, VelocitySeries, STATE_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub enum GatedError {
    /// A state has no training scenes (or none long enough for patterns).
    MissingClassScenes { state: MotionState },
    /// Experts disagree on output layout, ego settings, or input layout.
    ConfigMismatch { what: &'static str },
    CoefficientLengthMismatch { expected: usize, got: usize },
    Predict(PredictError),
    Poly(PolyError),
}

impl core::fmt::Display for GatedError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GatedError::MissingClassScenes { state } => {
                write!(f, "no usable training scenes for state '{state}'")
            }
            GatedError::ConfigMismatch { what } => write!(f, "expert mismatch: {what}"),
            GatedError::CoefficientLengthMismatch { expected, got } => {
                write!(f, "expected {expected} coefficients, got {got}")
            }
            GatedError::Predict(e) => write!(f, "prediction: {e}"),
            GatedError::Poly(e) => write!(f, "features: {e}"),
        }
    }
}

impl core::error::Error for GatedError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            GatedError::Predict(e) => Some(e),
            GatedError::Poly(e) => Some(e),
            _ => None,
        }
    }
}

impl From<PredictError> for GatedError {
    fn from(e: PredictError) -> Self {
        GatedError::Predict(e)
    }
}

impl From<PolyError> for GatedError {
    fn from(e: PolyError) -> Self {
        GatedError::Poly(e)
    }
}

/// Which transition a logistic speed profile models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogisticKind {
    /// Speed rises from 0 to a steady value.
    Starting,
    /// Speed falls from a steady value to 0.
    Stopping,
}

impl LogisticKind {
    pub fn name(self) -> &'static str {
        match self {
            LogisticKind::Starting => "starting",
            LogisticKind::Stopping => "stopping",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "starting" => Some(LogisticKind::Starting),
            "stopping" => Some(LogisticKind::Stopping),
            _ => None,
        }
    }
}

/// Numerically stable logistic function.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// A parameterized longitudinal speed profile
/// `v(t) = v_ss * sigma(+-(t - t0)/tau)`: rising for starting, falling for
/// stopping. Time 0 is the prediction sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticProfile {
    pub kind: LogisticKind,
    /// Steady-state speed (m/s).
    pub v_ss: f64,
    /// Transition time constant (s).
    pub tau: f64,
    /// Transition midpoint (s, relative to the prediction sample).
    pub t0: f64,
}

impl LogisticProfile {
    fn z(&self, t: f64) -> f64 {
        (t - self.t0) / self.tau
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        match self.kind {
            LogisticKind::Starting => self.v_ss * sigmoid(self.z(t)),
            LogisticKind::Stopping => self.v_ss * sigmoid(-self.z(t)),
        }
    }

    /// Longitudinal displacement from time 0 to `t`, by the exact
    /// antiderivative `tau * softplus(z)` of the logistic.
    pub fn displacement(&self, t: f64) -> f64 {
        let (z_t, z_0) = (self.z(t), self.z(0.0));
        match self.kind {
            LogisticKind::Starting => {
                self.v_ss * self.tau * (math::softplus(z_t) - math::softplus(z_0))
            }
            LogisticKind::Stopping => {
                self.v_ss * self.tau * (math::softplus(-z_0) - math::softplus(-z_t))
            }
        }
    }
}

/// Grid-search ranges for fitting a logistic profile to an observed speed
/// window. The midpoint may sit up to `t0_lead_s` past the prediction
/// sample (a transition about to happen) or anywhere inside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFitConfig {
    /// Observed window length before the prediction sample (s).
    pub window_s: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_steps: usize,
    /// How far past the prediction sample the midpoint may lie (s).
    pub t0_lead_s: f64,
    pub t0_step_s: f64,
    /// Steady-speed ceiling (m/s); fitted v_ss is clamped to [0, this].
    pub v_max: f64,
    /// Minimum observed samples for a fit; fewer falls back.
    pub min_samples: usize,
}

impl Default for LogisticFitConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            tau_min: 0.05,
            tau_max: 1.0,
            tau_steps: 16,
            t0_lead_s: 0.5,
            t0_step_s: 0.05,
            v_max: 10.0,
            min_samples: 5,
        }
    }
}

/// Least-squares logistic fit over (time, speed) observations by grid
/// search on (tau, t0) with the closed-form optimal v_ss per grid point.
/// Returns `None` when no grid point yields a finite fit.
pub fn fit_logistic(
    times: &[f64],
    speeds: &[f64],
    kind: LogisticKind,
    cfg: &LogisticFitConfig,
) -> Option<LogisticProfile> {
    if times.len() != speeds.len() || times.len() < cfg.min_samples {
        return None;
    }
    if !(cfg.tau_steps >= 1
        && cfg.tau_min > 0.0
        && cfg.tau_max >= cfg.tau_min
        && cfg.t0_step_s > 0.0)
    {
        return None;
    }
    let t_lo = times[0];
    let t_hi = times[times.len() - 1].max(0.0) + cfg.t0_lead_s;
    let t0_count = ((t_hi - t_lo) / cfg.t0_step_s) as usize + 1;

    let mut best: Option<(f64, LogisticProfile)> = None;
    for ti in 0..cfg.tau_steps {
        let tau = if cfg.tau_steps == 1 {
            cfg.tau_min
        } else {
            cfg.tau_min + (cfg.tau_max - cfg.tau_min) * ti as f64 / (cfg.tau_steps - 1) as f64
        };
        for t0i in 0..t0_count {
            let t0 = t_lo + t0i as f64 * cfg.t0_step_s;
            let candidate = LogisticProfile { kind, v_ss: 1.0, tau, t0 };
            let mut gg = 0.0;
            let mut gy = 0.0;
            for (&t, &y) in times.iter().zip(speeds) {
                let g = candidate.speed_at(t);
                gg += g * g;
                gy += g * y;
            }
            if gg.is_nan() || gg <= 1e-12 {
                continue;
            }
            let v_ss = (gy / gg).clamp(0.0, cfg.v_max);
            let profile = LogisticProfile { kind, v_ss, tau, t0 };
            let residual: f64 = times
                .iter()
                .zip(speeds)
                .map(|(&t, &y)| {
                    let d = y - profile.speed_at(t);
                    d * d
                })
                .sum();
            if !residual.is_finite() {
                continue;
            }
            match &best {
                Some((r, _)) if *r <= residual => {}
                _ => best = Some((residual, profile)),
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Fits a logistic profile to the smoothed longitudinal speed over the
/// past window ending at `now`.
pub fn fit_logistic_window(
    vel: &VelocitySeries,
    now: usize,
    dt: f64,
    kind: LogisticKind,
    cfg: &LogisticFitConfig,
) -> Option<LogisticProfile> {
    if now >= vel.len() || dt <= 0.0 {
        return None;
    }
    let span = (cfg.window_s / dt) as usize;
    let first = now.saturating_sub(span);
    let times: Vec<f64> = (first..=now).map(|k| (k as f64 - now as f64) * dt).collect();
    let speeds: Vec<f64> = vel.v_lon[first..=now].to_vec();
    fit_logistic(&times, &speeds, kind, cfg)
}

/// A physically-motivated prediction: logistic longitudinal speed profile
/// fitted to the observed window, integrated to positions, zero lateral
/// motion. Falls back to straight-line extrapolation when the fit fails
/// (`fallback` reports which happened).
pub struct PhysicalPrediction {
    pub trajectory: PredictedTrajectory,
    pub profile: Option<LogisticProfile>,
    pub fallback: bool,
}

pub fn physical_model_predict(
    kind: LogisticKind,
    vel: &VelocitySeries,
    frame_now: &EgoFrame,
    now: usize,
    dt: f64,
    cfg: &LogisticFitConfig,
    times: &[f64],
) -> Result<PhysicalPrediction, PredictError> {
    if let Some(profile) = fit_logistic_window(vel, now, dt, kind, cfg) {
        let positions: Vec<[f64; 2]> = times
            .iter()
            .map(|&t| frame_now.to_global([profile.displacement(t), 0.0]))
            .collect();
        if let Ok(trajectory) = PredictedTrajectory::new(*frame_now, times.to_vec(), positions) {
            return Ok(PhysicalPrediction { trajectory, profile: Some(profile), fallback: false });
        }
    }
    let trajectory = kinematic_baseline_predict(vel, frame_now, now, times)?;
    Ok(PhysicalPrediction { trajectory, profile: None, fallback: true })
}

/// One gating expert: how the prediction for one state is produced.
/// Only four exist per bank, so the variant size spread is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionExpert {
    /// A per-state trained network.
    Poly(TrajPredictor),
    /// Logistic speed-profile model refitted each cycle.
    Physical(LogisticKind, LogisticFitConfig),
    /// Stay exactly where the ego frame is.
    ConstantPosition,
    /// Straight-line extrapolation at the current ego velocity.
    ConstantVelocity,
}

impl PredictionExpert {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PredictionExpert::Poly(_) => "poly",
            PredictionExpert::Physical(LogisticKind::Starting, _) => "physical:starting",
            PredictionExpert::Physical(LogisticKind::Stopping, _) => "physical:stopping",
            PredictionExpert::ConstantPosition => "constant:position",
            PredictionExpert::ConstantVelocity => "constant:velocity",
        }
    }
}

/// Output of one expert for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertOutput {
    pub coefficients: Vec<f64>,
    /// True when a physical expert fell back to plain extrapolation.
    pub fallback: bool,
}

/// The four per-state experts plus the shared output layout they must all
/// produce coefficients for.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBank {
    experts: [PredictionExpert; STATE_COUNT],
    output: BasisSet,
    ego: EgoConfig,
}

impl ExpertBank {
    /// Validates that every network expert matches the shared output
    /// layout and ego settings.
    pub fn new(
        experts: [PredictionExpert; STATE_COUNT],
        output: BasisSet,
        ego: EgoConfig,
    ) -> Result<Self, GatedError> {
        for expert in &experts {
            if let PredictionExpert::Poly(p) = expert {
                if p.output() != &output {
                    return Err(GatedError::ConfigMismatch {
                        what: "network expert output layout differs from the shared layout",
                    });
                }
                if p.ego() != &ego {
                    return Err(GatedError::ConfigMismatch {
                        what: "network expert ego settings differ from the shared settings",
                    });
                }
            }
        }
        Ok(Self { experts, output, ego })
    }

    pub fn expert(&self, state: MotionState) -> &PredictionExpert {
        &self.experts[state.index()]
    }

    pub fn output(&self) -> &BasisSet {
        &self.output
    }

    pub fn ego(&self) -> &EgoConfig {
        &self.ego
    }

    /// Fits window coefficients to an analytically generated ego path
    /// sampled on the output grid (index 0 is the prediction sample).
    fn coefficients_of_path(
        &self,
        mut ego_x: impl FnMut(f64) -> f64,
        mut ego_y: impl FnMut(f64) -> f64,
    ) -> Result<Vec<f64>, PolyError> {
        let horizon = self.output.future_samples();
        let dt = self.output.dt();
        let mut xs = Vec::with_capacity(horizon + 1);
        let mut ys = Vec::with_capacity(horizon + 1);
        for j in 0..=horizon {
            let t = j as f64 * dt;
            xs.push(ego_x(t));
            ys.push(ego_y(t));
        }
        self.output.fit_at(&[&xs, &ys], 0)
    }

    /// This state's output coefficients for the cycle at `now`.
    pub fn expert_output(
        &self,
        state: MotionState,
        vel: &VelocitySeries,
        now: usize,
    ) -> Result<ExpertOutput, GatedError> {
        match &self.experts[state.index()] {
            PredictionExpert::Poly(p) => Ok(ExpertOutput {
                coefficients: p.coefficients(vel, now)?,
                fallback: false,
            }),
            PredictionExpert::ConstantPosition => Ok(ExpertOutput {
                coefficients: alloc::vec![0.0; self.output.coeff_len()],
                fallback: false,
            }),
            PredictionExpert::ConstantVelocity => {
                let v = [vel.v_lon[now], vel.v_lat[now]];
                let coefficients = self.coefficients_of_path(|t| v[0] * t, |t| v[1] * t)?;
                Ok(ExpertOutput { coefficients, fallback: false })
            }
            PredictionExpert::Physical(kind, cfg) => {
                match fit_logistic_window(vel, now, self.output.dt(), *kind, cfg) {
                    Some(profile) => {
                        let coefficients =
                            self.coefficients_of_path(|t| profile.displacement(t), |_| 0.0)?;
                        if coefficients.iter().all(|c| c.is_finite()) {
                            return Ok(ExpertOutput { coefficients, fallback: false });
                        }
                        let v = [vel.v_lon[now], vel.v_lat[now]];
                        let coefficients =
                            self.coefficients_of_path(|t| v[0] * t, |t| v[1] * t)?;
                        Ok(ExpertOutput { coefficients, fallback: true })
                    }
                    None => {
                        let v = [vel.v_lon[now], vel.v_lat[now]];
                        let coefficients =
                            self.coefficients_of_path(|t| v[0] * t, |t| v[1] * t)?;
                        Ok(ExpertOutput { coefficients, fallback: true })
                    }
                }
            }
        }
    }

    /// All four expert outputs for one cycle, state order.
    pub fn all_expert_outputs(
        &self,
        vel: &VelocitySeries,
        now: usize,
    ) -> Result<[ExpertOutput; STATE_COUNT], GatedError> {
        Ok([
            self.expert_output(MotionState::Waiting, vel, now)?,
            self.expert_output(MotionState::Starting, vel, now)?,
            self.expert_output(MotionState::Moving, vel, now)?,
            self.expert_output(MotionState::Stopping, vel, now)?,
        ])
    }
}

/// Gate weights derived from a posterior: clamped probabilities
/// renormalized to sum 1, with a uniform fallback when everything is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateWeights {
    pub weights: [f64; STATE_COUNT],
    /// True when the raw posterior was all-zero and uniform weights were
    /// substituted.
    pub uniform_fallback: bool,
}

pub fn gate_weights(posterior: &StatePosterior) -> GateWeights {
    let p = posterior.probs();
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        let mut weights = p;
        for w in &mut weights {
            *w /= sum;
        }
        GateWeights { weights, uniform_fallback: false }
    } else {
        GateWeights {
            weights: [1.0 / STATE_COUNT as f64; STATE_COUNT],
            uniform_fallback: true,
        }
    }
}

/// Convex combination of the expert coefficient vectors. A weight of
/// exactly 1 short-circuits to a verbatim copy of that expert's output,
/// making one-hot gating bit-identical to the expert itself.
pub fn fuse_coefficients(
    weights: &[f64; STATE_COUNT],
    expert_coeffs: [&[f64]; STATE_COUNT],
) -> Result<Vec<f64>, GatedError> {
    let len = expert_coeffs[0].len();
    for c in &expert_coeffs {
        if c.len() != len {
            return Err(GatedError::CoefficientLengthMismatch { expected: len, got: c.len() });
        }
    }
    if let Some(hot) = weights.iter().position(|&w| w == 1.0) {
        return Ok(expert_coeffs[hot].to_vec());
    }
    let mut fused = alloc::vec![0.0; len];
    for (w, coeffs) in weights.iter().zip(expert_coeffs) {
        if *w == 0.0 {
            continue;
        }
        for (f, c) in fused.iter_mut().zip(coeffs) {
            *f += w * c;
        }
    }
    Ok(fused)
}

/// A fused prediction with its gate bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedPrediction {
    pub trajectory: PredictedTrajectory,
    pub weights: [f64; STATE_COUNT],
    pub uniform_fallback: bool,
    /// Per-state physical-expert fallbacks this cycle.
    pub expert_fallbacks: [bool; STATE_COUNT],
}

/// Fuses per-state coefficient outputs under posterior-derived weights and
/// reconstructs the result through `frame_now`.
pub fn gated_predict(
    posterior: &StatePosterior,
    expert_outputs: &[ExpertOutput; STATE_COUNT],
    output: &BasisSet,
    frame_now: &EgoFrame,
) -> Result<GatedPrediction, GatedError> {
    let gate = gate_weights(posterior);
    let coeffs = fuse_coefficients(
        &gate.weights,
        [
            &expert_outputs[0].coefficients,
            &expert_outputs[1].coefficients,
            &expert_outputs[2].coefficients,
            &expert_outputs[3].coefficients,
        ],
    )?;
    let trajectory = reconstruct_prediction(&coeffs, output, frame_now)?;
    Ok(GatedPrediction {
        trajectory,
        weights: gate.weights,
        uniform_fallback: gate.uniform_fallback,
        expert_fallbacks: [
            expert_outputs[0].fallback,
            expert_outputs[1].fallback,
            expert_outputs[2].fallback,
            expert_outputs[3].fallback,
        ],
    })
}

/// Four predictors, each trained only on scenes of its motion state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificPredictors {
    predictors: [TrajPredictor; STATE_COUNT],
    pub pattern_counts: [usize; STATE_COUNT],
}

impl SpecificPredictors {
    pub fn get(&self, state: MotionState) -> &TrajPredictor {
        &self.predictors[state.index()]
    }

    /// Wraps the four predictors as a network-expert bank.
    pub fn into_bank(self) -> Result<ExpertBank, GatedError> {
        let output = self.predictors[0].output().clone();
        let ego = *self.predictors[0].ego();
        let [w, s, m, p] = self.predictors;
        ExpertBank::new(
            [
                PredictionExpert::Poly(w),
                PredictionExpert::Poly(s),
                PredictionExpert::Poly(m),
                PredictionExpert::Poly(p),
            ],
            output,
            ego,
        )
    }
}

/// Per-state hidden width default: specific predictors see a quarter of
/// the data and must stay cheap enough that running four of them beats
/// the latency budget.
pub fn specific_default_config() -> PredictorConfig {
    PredictorConfig { hidden: alloc::vec![20], ..PredictorConfig::default() }
}

/// Trains one predictor per motion state on the scenes of that class
/// (scene-level partition; all share `config`).
pub fn train_specific_predictors(
    scenes: &[Scene],
    config: &PredictorConfig,
) -> Result<SpecificPredictors, GatedError> {
    let mut trained: [Option<TrajPredictor>; STATE_COUNT] = [None, None, None, None];
    let mut pattern_counts = [0usize; STATE_COUNT];
    for state in MotionState::ALL {
        let class_scenes: Vec<Scene> = scenes
            .iter()
            .filter(|s| s.scene_class() == state)
            .cloned()
            .collect();
        if class_scenes.is_empty() {
            return Err(GatedError::MissingClassScenes { state });
        }
        match train_predictor(&class_scenes, config) {
            Ok(t) => {
                pattern_counts[state.index()] = t.patterns;
                trained[state.index()] = Some(t.predictor);
            }
            Err(PredictError::NoPatterns) => {
                return Err(GatedError::MissingClassScenes { state });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let [a, b, c, d] = trained;
    Ok(SpecificPredictors {
        predictors: [a.unwrap(), b.unwrap(), c.unwrap(), d.unwrap()],
        pattern_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::RpropConfig;
    use crate::traj::{ego_velocity, SceneEvents, Trajectory};
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn step_limit_profile_reaches_full_speed_displacement() {
        let p = LogisticProfile {
            kind: LogisticKind::Starting,
            v_ss: 1.4,
            tau: 1e-6,
            t0: 0.0,
        };
        assert!((p.displacement(2.5) - 3.5).abs() < 1e-6, "{}", p.displacement(2.5));
        assert!((p.speed_at(1.0) - 1.4).abs() < 1e-12);
        assert!(p.speed_at(-1.0).abs() < 1e-12);
    }

    #[test]
    fn stopping_profile_mirrors_to_zero() {
        let p = LogisticProfile {
            kind: LogisticKind::Stopping,
            v_ss: 1.4,
            tau: 1e-6,
            t0: 1.0,
        };
        // Full speed until t0 = 1 s, standstill after.
        assert!((p.displacement(2.5) - 1.4).abs() < 1e-6, "{}", p.displacement(2.5));
        assert!(p.speed_at(2.0).abs() < 1e-12);
        assert!((p.speed_at(0.5) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_a_known_starting_profile() {
        let truth = LogisticProfile {
            kind: LogisticKind::Starting,
            v_ss: 1.5,
            tau: 0.3,
            t0: -0.4,
        };
        let times: Vec<f64> = (0..=50).map(|k| -1.0 + k as f64 * 0.02).collect();
        let speeds: Vec<f64> = times.iter().map(|&t| truth.speed_at(t)).collect();
        let fit = fit_logistic(&times, &speeds, LogisticKind::Starting, &Default::default())
            .expect("fit succeeds");
        // Endpoint self-consistency: predicted displacement close to truth.
        let err = (fit.displacement(2.5) - truth.displacement(2.5)).abs();
        assert!(err < 0.2, "endpoint error {err}; fit {fit:?}");
    }

    #[test]
    fn saturated_window_behaves_like_constant_velocity() {
        let times: Vec<f64> = (0..=50).map(|k| -1.0 + k as f64 * 0.02).collect();
        let speeds = vec![1.4; times.len()];
        let fit = fit_logistic(&times, &speeds, LogisticKind::Starting, &Default::default())
            .expect("fit succeeds");
        let err = (fit.displacement(2.5) - 3.5).abs();
        assert!(err < 0.2, "endpoint error {err}; fit {fit:?}");
    }

    fn const_vel(n: usize, v_lon: f64, v_lat: f64) -> VelocitySeries {
        VelocitySeries {
            v_lon: vec![v_lon; n],
            v_lat: vec![v_lat; n],
            speed: vec![crate::math::hypot(v_lon, v_lat); n],
        }
    }

    #[test]
    fn physical_predict_falls_back_on_short_windows() {
        let vel = const_vel(100, 1.0, 0.0);
        let frame = EgoFrame { origin: [0.0, 0.0], heading: 0.0 };
        let times: Vec<f64> = (1..=125).map(|i| i as f64 * 0.02).collect();
        let out = physical_model_predict(
            LogisticKind::Starting,
            &vel,
            &frame,
            2, // only 3 observed samples
            0.02,
            &Default::default(),
            &times,
        )
        .unwrap();
        assert!(out.fallback);
        assert!(out.profile.is_none());
        // Fallback is the straight-line extrapolation.
        assert!((out.trajectory.endpoint()[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gate_weights_renormalize_and_handle_degenerate_posteriors() {
        let g = gate_weights(&StatePosterior::from_raw([0.2, 0.2, 0.4, 0.2]));
        assert!(!g.uniform_fallback);
        let sum: f64 = g.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((g.weights[2] - 0.4).abs() < 1e-12);

        let one_hot = gate_weights(&StatePosterior::from_raw([0.0, 1.0, 0.0, 0.0]));
        assert_eq!(one_hot.weights, [0.0, 1.0, 0.0, 0.0]);

        let zero = gate_weights(&StatePosterior::from_raw([0.0; 4]));
        assert!(zero.uniform_fallback);
        assert_eq!(zero.weights, [0.25; 4]);
    }

    #[test]
    fn one_hot_fusion_is_bit_identical_even_with_negative_zero() {
        let a = vec![1.0, -0.0, 3.5];
        let b = vec![9.0, 9.0, 9.0];
        let c = vec![0.0, 0.0, 0.0];
        let d = vec![-1.0, 2.0, 0.25];
        let fused =
            fuse_coefficients(&[0.0, 1.0, 0.0, 0.0], [&a, &b, &c, &d]).unwrap();
        for (f, x) in fused.iter().zip(&b) {
            assert_eq!(f.to_bits(), x.to_bits());
        }
        // The -0.0 case: routing through the hot index preserves the sign
        // bit that a sum would destroy.
        let fused = fuse_coefficients(&[1.0, 0.0, 0.0, 0.0], [&a, &b, &c, &d]).unwrap();
        assert_eq!(fused[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn even_fusion_is_the_elementwise_mean() {
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![3.0, 6.0, -1.0];
        let zeros = vec![0.0, 0.0, 0.0];
        let fused =
            fuse_coefficients(&[0.5, 0.5, 0.0, 0.0], [&a, &b, &zeros, &zeros]).unwrap();
        for (f, (x, y)) in fused.iter().zip(a.iter().zip(&b)) {
            assert!((f - (x + y) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_rejects_ragged_coefficients() {
        let a = vec![1.0, 2.0];
        let b = vec![1.0];
        assert!(matches!(
            fuse_coefficients(&[0.5, 0.5, 0.0, 0.0], [&a, &b, &a, &a]),
            Err(GatedError::CoefficientLengthMismatch { expected: 2, got: 1 })
        ));
    }

    fn scene(id: &str, class: MotionState, xs: Vec<f64>, labels: Vec<MotionState>) -> Scene {
        let dt = 0.02;
        let times: Vec<f64> = (0..xs.len()).map(|k| k as f64 * dt).collect();
        let pos: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        Scene::new(
            id.to_string(),
            class,
            1.0 / dt,
            Trajectory::new(times, pos).unwrap(),
            labels,
            SceneEvents::default(),
        )
        .unwrap()
    }

    fn standing(id: &str, at: f64, n: usize) -> Scene {
        scene(id, MotionState::Waiting, vec![at; n], vec![MotionState::Waiting; n])
    }

    fn walking(id: &str, v: f64, n: usize) -> Scene {
        let xs = (0..n).map(|k| v * k as f64 * 0.02).collect();
        scene(id, MotionState::Moving, xs, vec![MotionState::Moving; n])
    }

    /// Speed ramps from 0 to v between `on` and `off` seconds.
    fn ramp_up(id: &str, v: f64, on: f64, off: f64, n: usize) -> Scene {
        let a = v / (off - on);
        let xs = (0..n)
            .map(|k| {
                let t = k as f64 * 0.02;
                if t < on {
                    0.0
                } else if t < off {
                    0.5 * a * (t - on) * (t - on)
                } else {
                    0.5 * a * (off - on) * (off - on) + v * (t - off)
                }
            })
            .collect();
        let labels = (0..n)
            .map(|k| {
                let t = k as f64 * 0.02;
                if t < on {
                    MotionState::Waiting
                } else if t < off {
                    MotionState::Starting
                } else {
                    MotionState::Moving
                }
            })
            .collect();
        scene(id, MotionState::Starting, xs, labels)
    }

    fn ramp_down(id: &str, v: f64, on: f64, off: f64, n: usize) -> Scene {
        let a = v / (off - on);
        let xs = (0..n)
            .map(|k| {
                let t = k as f64 * 0.02;
                if t < on {
                    v * t
                } else if t < off {
                    v * on + v * (t - on) - 0.5 * a * (t - on) * (t - on)
                } else {
                    v * on + 0.5 * v * (off - on)
                }
            })
            .collect();
        let labels = (0..n)
            .map(|k| {
                let t = k as f64 * 0.02;
                if t < on {
                    MotionState::Moving
                } else if t < off {
                    MotionState::Stopping
                } else {
                    MotionState::Waiting
                }
            })
            .collect();
        scene(id, MotionState::Stopping, xs, labels)
    }

    fn tiny_corpus() -> Vec<Scene> {
        vec![
            standing("wait-0", 0.0, 300),
            standing("wait-1", 2.0, 300),
            walking("move-0", 1.2, 300),
            walking("move-1", 1.6, 300),
            ramp_up("start-0", 1.4, 2.4, 3.4, 300),
            ramp_up("start-1", 1.2, 2.0, 3.0, 300),
            ramp_down("stop-0", 1.4, 2.4, 3.4, 300),
            ramp_down("stop-1", 1.2, 2.0, 3.0, 300),
        ]
    }

    fn tiny_config() -> PredictorConfig {
        PredictorConfig {
            hidden: vec![8],
            rprop: RpropConfig {
                max_epochs: 90,
                seed: 5,
                validation_fraction: 0.0,
                ..RpropConfig::default()
            },
            stride: 4,
            ..PredictorConfig::default()
        }
    }

    #[test]
    fn specific_training_partitions_scenes_by_class() {
        let corpus = tiny_corpus();
        let specific = train_specific_predictors(&corpus, &tiny_config()).unwrap();
        assert!(specific.pattern_counts.iter().all(|&c| c > 0));

        // The waiting expert stays put; the starting expert moves forward
        // on the same pre-start standing input.
        let s = ramp_up("probe", 1.4, 2.2, 3.2, 300);
        let (vel, frames) = ego_velocity(s.trajectory(), &EgoConfig::default()).unwrap();
        let now = 80; // standing, transition 30 samples ahead
        let wait = specific.get(MotionState::Waiting).predict(&vel, &frames[now], now).unwrap();
        let start =
            specific.get(MotionState::Starting).predict(&vel, &frames[now], now).unwrap();
        let origin = s.trajectory().positions()[now];
        let wait_disp = (wait.endpoint()[0] - origin[0]).abs();
        let start_disp = start.endpoint()[0] - origin[0];
        assert!(wait_disp < 0.05, "waiting expert drifted {wait_disp}");
        assert!(start_disp > wait_disp, "start {start_disp} vs wait {wait_disp}");
    }

    #[test]
    fn missing_class_is_rejected() {
        let corpus: Vec<Scene> = tiny_corpus()
            .into_iter()
            .filter(|s| s.scene_class() != MotionState::Stopping)
            .collect();
        let err = train_specific_predictors(&corpus, &tiny_config()).unwrap_err();
        assert!(matches!(
            err,
            GatedError::MissingClassScenes { state: MotionState::Stopping }
        ));
    }

    #[test]
    fn one_hot_gating_equals_the_specific_predictor_bitwise() {
        let corpus = tiny_corpus();
        let specific = train_specific_predictors(&corpus, &tiny_config()).unwrap();
        let bank = specific.clone().into_bank().unwrap();

        let s = walking("probe", 1.5, 300);
        let (vel, frames) = ego_velocity(s.trajectory(), bank.ego()).unwrap();
        let now = 100;
        let direct = specific.get(MotionState::Moving).predict(&vel, &frames[now], now).unwrap();

        let outputs = bank.all_expert_outputs(&vel, now).unwrap();
        let one_hot = StatePosterior::from_raw([0.0, 0.0, 1.0, 0.0]);
        let gated = gated_predict(&one_hot, &outputs, bank.output(), &frames[now]).unwrap();

        assert_eq!(gated.weights, [0.0, 0.0, 1.0, 0.0]);
        for (a, b) in gated.trajectory.positions().iter().zip(direct.positions()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn constant_experts_produce_their_namesake_trajectories() {
        let output = BasisSet::new(crate::polyfeat::PolyConfig::output_default(), 0.02).unwrap();
        let bank = ExpertBank::new(
            [
                PredictionExpert::ConstantPosition,
                PredictionExpert::Physical(LogisticKind::Starting, Default::default()),
                PredictionExpert::ConstantVelocity,
                PredictionExpert::Physical(LogisticKind::Stopping, Default::default()),
            ],
            output.clone(),
            EgoConfig::default(),
        )
        .unwrap();
        let vel = const_vel(200, 1.0, 0.5);
        let frame = EgoFrame { origin: [3.0, -1.0], heading: 0.0 };
        let now = 150;

        let hold = bank.expert_output(MotionState::Waiting, &vel, now).unwrap();
        assert!(hold.coefficients.iter().all(|&c| c == 0.0));
        let gated = gated_predict(
            &StatePosterior::from_raw([1.0, 0.0, 0.0, 0.0]),
            &bank.all_expert_outputs(&vel, now).unwrap(),
            bank.output(),
            &frame,
        )
        .unwrap();
        assert!(gated
            .trajectory
            .positions()
            .iter()
            .all(|&p| crate::math::hypot(p[0] - 3.0, p[1] + 1.0) < 1e-9));

        // The constant-velocity expert reproduces the straight-line
        // extrapolation exactly (linear paths are inside the basis span).
        let times: Vec<f64> = (1..=output.future_samples())
            .map(|i| i as f64 * output.dt())
            .collect();
        let baseline = kinematic_baseline_predict(&vel, &frame, now, &times).unwrap();
        let cv = gated_predict(
            &StatePosterior::from_raw([0.0, 0.0, 1.0, 0.0]),
            &bank.all_expert_outputs(&vel, now).unwrap(),
            bank.output(),
            &frame,
        )
        .unwrap();
        for (a, b) in cv.trajectory.positions().iter().zip(baseline.positions()) {
            assert!(crate::math::hypot(a[0] - b[0], a[1] - b[1]) < 1e-9, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn bank_rejects_mismatched_expert_layouts() {
        let corpus = tiny_corpus();
        let specific = train_specific_predictors(&corpus, &tiny_config()).unwrap();
        let other_output =
            BasisSet::new(crate::polyfeat::PolyConfig::output_default(), 0.04).unwrap();
        let [w, s, m, p] = [
            PredictionExpert::Poly(specific.get(MotionState::Waiting).clone()),
            PredictionExpert::Poly(specific.get(MotionState::Starting).clone()),
            PredictionExpert::Poly(specific.get(MotionState::Moving).clone()),
            PredictionExpert::Poly(specific.get(MotionState::Stopping).clone()),
        ];
        let err = ExpertBank::new([w, s, m, p], other_output, EgoConfig::default()).unwrap_err();
        assert!(matches!(err, GatedError::ConfigMismatch { .. }));
    }
}
