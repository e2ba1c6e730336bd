//! Trajectory containers, ego-frame velocity extraction and rule-based
//! motion-state labeling.
//!
//! Observed trajectories are uniformly sampled 2D positions in a global
//! frame. Downstream stages work on body-frame (ego) velocities: the
//! longitudinal axis points along the smoothed direction of travel, the
//! lateral axis 90 degrees counter-clockwise from it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Absolute tolerance for uniform sample spacing, in seconds.
pub const DT_TOLERANCE: f64 = 1e-6;

/// Number of motion states.
pub const STATE_COUNT: usize = 4;

/// Motion state of a vulnerable road user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionState {
    Waiting,
    Starting,
    Moving,
    Stopping,
}

impl MotionState {
    pub const ALL: [MotionState; STATE_COUNT] = [
        MotionState::Waiting,
        MotionState::Starting,
        MotionState::Moving,
        MotionState::Stopping,
    ];

    pub fn index(self) -> usize {
        match self {
            MotionState::Waiting => 0,
            MotionState::Starting => 1,
            MotionState::Moving => 2,
            MotionState::Stopping => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionState::Waiting => "waiting",
            MotionState::Starting => "starting",
            MotionState::Moving => "moving",
            MotionState::Stopping => "stopping",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "waiting" | "Waiting" => Some(MotionState::Waiting),
            "starting" | "Starting" => Some(MotionState::Starting),
            "moving" | "Moving" => Some(MotionState::Moving),
            "stopping" | "Stopping" => Some(MotionState::Stopping),
            _ => None,
        }
    }

    /// Whether a label sequence may step from `self` to `next`.
    ///
    /// The state machine is a cycle: waiting <-> starting <-> moving <->
    /// stopping <-> waiting, plus self loops. Waiting <-> moving and
    /// starting <-> stopping are not reachable in one step.
    pub fn can_transition_to(self, next: MotionState) -> bool {
        use MotionState::*;
        if self == next {
            return true;
        }
        matches!(
            (self, next),
            (Waiting, Starting)
                | (Starting, Waiting)
                | (Starting, Moving)
                | (Moving, Starting)
                | (Moving, Stopping)
                | (Stopping, Moving)
                | (Stopping, Waiting)
                | (Waiting, Stopping)
        )
    }
}

impl core::fmt::Display for MotionState {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors from trajectory construction, preprocessing and labeling.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajError {
    TooShort { len: usize },
    LengthMismatch { timestamps: usize, values: usize },
    NonFinite { index: usize },
    NotIncreasing { index: usize },
    NonUniform { index: usize, dt: f64, nominal: f64 },
    AlphaOutOfRange { alpha: f64 },
    EmptySeries,
    BadSampleRate { stated: f64, derived: f64 },
    LabelLengthMismatch { labels: usize, samples: usize },
    InvalidTransition { index: usize, from: MotionState, to: MotionState },
    EventOutOfRange { name: &'static str, time: f64 },
    EventOrder { transition_start: f64, transition_end: f64 },
    EmptySceneId,
    BadFraction { fraction: f64 },
}

impl core::fmt::Display for TrajError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrajError::TooShort { len } => {
                write!(f, "trajectory needs at least 2 samples, got {len}")
            }
            TrajError::LengthMismatch { timestamps, values } => {
                write!(f, "{timestamps} timestamps but {values} values")
            }
            TrajError::NonFinite { index } => write!(f, "non-finite value at sample {index}"),
            TrajError::NotIncreasing { index } => {
                write!(f, "timestamps not strictly increasing at sample {index}")
            }
            TrajError::NonUniform { index, dt, nominal } => write!(
                f,
                "sample spacing {dt} s at index {index} deviates from nominal {nominal} s by more than {DT_TOLERANCE} s"
            ),
            TrajError::AlphaOutOfRange { alpha } => {
                write!(f, "smoothing alpha must lie in (0, 1], got {alpha}")
            }
            TrajError::EmptySeries => f.write_str("series is empty"),
            TrajError::BadSampleRate { stated, derived } => {
                write!(f, "stated sample rate {stated} Hz does not match spacing-derived {derived} Hz")
            }
            TrajError::LabelLengthMismatch { labels, samples } => {
                write!(f, "{labels} labels for {samples} samples")
            }
            TrajError::InvalidTransition { index, from, to } => {
                write!(f, "label sequence steps {from} -> {to} at sample {index}")
            }
            TrajError::EventOutOfRange { name, time } => {
                write!(f, "event {name} at {time} s lies outside the scene")
            }
            TrajError::EventOrder { transition_start, transition_end } => write!(
                f,
                "transition_start {transition_start} s not before transition_end {transition_end} s"
            ),
            TrajError::EmptySceneId => f.write_str("scene id is empty"),
            TrajError::BadFraction { fraction } => {
                write!(f, "fraction must lie in [0, 1], got {fraction}")
            }
        }
    }
}

impl core::error::Error for TrajError {}

/// Uniformly sampled 2D positions in a global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    positions: Vec<[f64; 2]>,
}

impl Trajectory {
    /// Validates length, finiteness, strict monotonicity and uniform
    /// spacing (within [`DT_TOLERANCE`]).
    pub fn new(timestamps: Vec<f64>, positions: Vec<[f64; 2]>) -> Result<Self, TrajError> {
        if timestamps.len() != positions.len() {
            return Err(TrajError::LengthMismatch {
                timestamps: timestamps.len(),
                values: positions.len(),
            });
        }
        if timestamps.len() < 2 {
            return Err(TrajError::TooShort { len: timestamps.len() });
        }
        for (i, (&t, p)) in timestamps.iter().zip(&positions).enumerate() {
            if !t.is_finite() || !p[0].is_finite() || !p[1].is_finite() {
                return Err(TrajError::NonFinite { index: i });
            }
        }
        let n = timestamps.len();
        let nominal = (timestamps[n - 1] - timestamps[0]) / (n - 1) as f64;
        for i in 1..n {
            let dt = timestamps[i] - timestamps[i - 1];
            if dt <= 0.0 {
                return Err(TrajError::NotIncreasing { index: i });
            }
            if math::abs(dt - nominal) > DT_TOLERANCE {
                return Err(TrajError::NonUniform { index: i, dt, nominal });
            }
        }
        Ok(Self { timestamps, positions })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor requires >= 2 samples
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Nominal sample spacing in seconds.
    pub fn dt(&self) -> f64 {
        let n = self.timestamps.len();
        (self.timestamps[n - 1] - self.timestamps[0]) / (n - 1) as f64
    }

    /// Applies a rigid transform (rotation by `angle`, then translation)
    /// to every position. Useful for invariance checks.
    pub fn rigid_transformed(&self, angle: f64, translation: [f64; 2]) -> Trajectory {
        let (s, c) = (math::sin(angle), math::cos(angle));
        let positions = self
            .positions
            .iter()
            .map(|p| {
                [
                    c * p[0] - s * p[1] + translation[0],
                    s * p[0] + c * p[1] + translation[1],
                ]
            })
            .collect();
        Trajectory { timestamps: self.timestamps.clone(), positions }
    }
}

/// Pose of the body frame at one sample: origin at the current position,
/// x axis along `heading` (radians in (-pi, pi], 0 while speed has never
/// reached the heading floor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoFrame {
    pub origin: [f64; 2],
    pub heading: f64,
}

impl EgoFrame {
    /// Global point -> ego coordinates.
    pub fn to_ego(&self, p: [f64; 2]) -> [f64; 2] {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        let (s, c) = (math::sin(self.heading), math::cos(self.heading));
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Ego point -> global coordinates.
    pub fn to_global(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = (math::sin(self.heading), math::cos(self.heading));
        [
            c * p[0] - s * p[1] + self.origin[0],
            s * p[0] + c * p[1] + self.origin[1],
        ]
    }

    /// Rotates a global direction vector into the ego frame (no translation).
    pub fn rotate_to_ego(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = (math::sin(self.heading), math::cos(self.heading));
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }
}

/// Body-frame velocities per sample.
///
/// `v_lon`/`v_lat` are exponentially smoothed; `speed` is the magnitude of
/// the raw backward-difference global velocity (used by the labeling rules,
/// which are defined on unsmoothed speed).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySeries {
    pub v_lon: Vec<f64>,
    pub v_lat: Vec<f64>,
    pub speed: Vec<f64>,
}

impl VelocitySeries {
    pub fn len(&self) -> usize {
        self.v_lon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_lon.is_empty()
    }
}

/// Exponential smoothing: `S_0 = y_0`, `S_k = alpha*y_k + (1-alpha)*S_{k-1}`.
///
/// `alpha` must lie in (0, 1]; `alpha = 1` returns the input unchanged.
pub fn smooth(series: &[f64], alpha: f64) -> Result<Vec<f64>, TrajError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TrajError::AlphaOutOfRange { alpha });
    }
    let first = match series.first() {
        Some(&y) => y,
        None => return Err(TrajError::EmptySeries),
    };
    let mut out = Vec::with_capacity(series.len());
    let mut state = first;
    out.push(state);
    for &y in &series[1..] {
        state = alpha * y + (1.0 - alpha) * state;
        out.push(state);
    }
    Ok(out)
}

/// Preprocessing parameters for [`ego_velocity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoConfig {
    /// Smoothing factor for the longitudinal velocity (also used for the
    /// heading filter).
    pub alpha_lon: f64,
    /// Smoothing factor for the lateral velocity.
    pub alpha_lat: f64,
    /// Below this smoothed speed (m/s) the heading holds its last value;
    /// a stationary body has no usable direction of travel.
    pub heading_speed_floor: f64,
}

impl Default for EgoConfig {
    fn default() -> Self {
        Self { alpha_lon: 0.3, alpha_lat: 0.3, heading_speed_floor: 0.15 }
    }
}

/// Backward-difference velocities rotated into the per-sample ego frame.
///
/// The first sample copies the second (no predecessor). Heading is the
/// direction of the smoothed global velocity, held at its last value while
/// the smoothed speed is under `heading_speed_floor`, and 0 until the floor
/// is first exceeded.
pub fn ego_velocity(
    traj: &Trajectory,
    cfg: &EgoConfig,
) -> Result<(VelocitySeries, Vec<EgoFrame>), TrajError> {
    if !(cfg.alpha_lon > 0.0 && cfg.alpha_lon <= 1.0) {
        return Err(TrajError::AlphaOutOfRange { alpha: cfg.alpha_lon });
    }
    if !(cfg.alpha_lat > 0.0 && cfg.alpha_lat <= 1.0) {
        return Err(TrajError::AlphaOutOfRange { alpha: cfg.alpha_lat });
    }
    let n = traj.len();
    let t = traj.timestamps();
    let p = traj.positions();

    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for i in 1..n {
        let dt = t[i] - t[i - 1];
        gx[i] = (p[i][0] - p[i - 1][0]) / dt;
        gy[i] = (p[i][1] - p[i - 1][1]) / dt;
    }
    gx[0] = gx[1];
    gy[0] = gy[1];

    let speed: Vec<f64> = gx.iter().zip(&gy).map(|(&x, &y)| math::hypot(x, y)).collect();

    // Heading from the smoothed global velocity; the longitudinal alpha
    // doubles as the heading filter constant.
    let sx = smooth(&gx, cfg.alpha_lon)?;
    let sy = smooth(&gy, cfg.alpha_lon)?;

    let mut frames = Vec::with_capacity(n);
    let mut heading = 0.0;
    let mut e_lon = vec![0.0; n];
    let mut e_lat = vec![0.0; n];
    for i in 0..n {
        if math::hypot(sx[i], sy[i]) >= cfg.heading_speed_floor {
            heading = math::atan2(sy[i], sx[i]);
            if heading == -core::f64::consts::PI {
                heading = core::f64::consts::PI;
            }
        }
        let frame = EgoFrame { origin: p[i], heading };
        let e = frame.rotate_to_ego([gx[i], gy[i]]);
        e_lon[i] = e[0];
        e_lat[i] = e[1];
        frames.push(frame);
    }

    let v_lon = smooth(&e_lon, cfg.alpha_lon)?;
    let v_lat = smooth(&e_lat, cfg.alpha_lat)?;
    Ok((VelocitySeries { v_lon, v_lat, speed }, frames))
}

/// Optional per-scene event timestamps (seconds, scene time base).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SceneEvents {
    pub transition_start: Option<f64>,
    pub transition_end: Option<f64>,
    /// Manual begin-of-motion marker when available (otherwise aliased to
    /// `transition_start`).
    pub heel_off: Option<f64>,
    /// Manual end-of-motion marker (otherwise aliased to `transition_end`).
    pub heel_down: Option<f64>,
}

impl SceneEvents {
    pub fn is_empty(&self) -> bool {
        self.transition_start.is_none()
            && self.transition_end.is_none()
            && self.heel_off.is_none()
            && self.heel_down.is_none()
    }

    /// Begin-of-motion reference for detection timing: `heel_off` when
    /// present, else `transition_start`.
    pub fn start_reference(&self) -> Option<f64> {
        self.heel_off.or(self.transition_start)
    }

    /// End-of-motion reference: `heel_down` when present, else
    /// `transition_end`.
    pub fn end_reference(&self) -> Option<f64> {
        self.heel_down.or(self.transition_end)
    }
}

/// A labeled recording of one road user.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scene_id: String,
    scene_class: MotionState,
    sample_rate_hz: f64,
    trajectory: Trajectory,
    state_labels: Vec<MotionState>,
    events: SceneEvents,
}

impl Scene {
    pub fn new(
        scene_id: String,
        scene_class: MotionState,
        sample_rate_hz: f64,
        trajectory: Trajectory,
        state_labels: Vec<MotionState>,
        events: SceneEvents,
    ) -> Result<Self, TrajError> {
        if scene_id.is_empty() {
            return Err(TrajError::EmptySceneId);
        }
        if state_labels.len() != trajectory.len() {
            return Err(TrajError::LabelLengthMismatch {
                labels: state_labels.len(),
                samples: trajectory.len(),
            });
        }
        let derived = 1.0 / trajectory.dt();
        if !sample_rate_hz.is_finite()
            || sample_rate_hz <= 0.0
            || math::abs(sample_rate_hz - derived) > 0.01 * derived
        {
            return Err(TrajError::BadSampleRate { stated: sample_rate_hz, derived });
        }
        for i in 1..state_labels.len() {
            if !state_labels[i - 1].can_transition_to(state_labels[i]) {
                return Err(TrajError::InvalidTransition {
                    index: i,
                    from: state_labels[i - 1],
                    to: state_labels[i],
                });
            }
        }
        let t = trajectory.timestamps();
        let (t0, t1) = (t[0], t[t.len() - 1]);
        let named = [
            ("transition_start", events.transition_start),
            ("transition_end", events.transition_end),
            ("heel_off", events.heel_off),
            ("heel_down", events.heel_down),
        ];
        for (name, time) in named {
            if let Some(time) = time {
                if !time.is_finite() || time < t0 - DT_TOLERANCE || time > t1 + DT_TOLERANCE {
                    return Err(TrajError::EventOutOfRange { name, time });
                }
            }
        }
        if let (Some(s), Some(e)) = (events.transition_start, events.transition_end) {
            if s >= e {
                return Err(TrajError::EventOrder { transition_start: s, transition_end: e });
            }
        }
        Ok(Self { scene_id, scene_class, sample_rate_hz, trajectory, state_labels, events })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn scene_class(&self) -> MotionState {
        self.scene_class
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn state_labels(&self) -> &[MotionState] {
        &self.state_labels
    }

    pub fn events(&self) -> &SceneEvents {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.trajectory.dt()
    }
}

/// Thresholds for the transition labeling rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// Speed above which motion begins / below which it has ended (m/s).
    pub start_speed_threshold: f64,
    /// A starting transition ends at the first local speed maximum after
    /// the speed exceeds this fraction of the steady-state speed (mirrored
    /// for stopping).
    pub steady_state_fraction: f64,
    /// Waiting phases must stay below this speed (m/s).
    pub waiting_speed_max: f64,
    /// Length of the window adjacent to the transition over which the
    /// steady-state speed is the median (seconds).
    pub steady_window_s: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            start_speed_threshold: 0.2,
            steady_state_fraction: 0.8,
            waiting_speed_max: 0.3,
            steady_window_s: 1.0,
        }
    }
}

/// Labels plus the transition interval detected by [`auto_label`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub states: Vec<MotionState>,
    pub events: SceneEvents,
}

fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Detected transition interval, as sample indices `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TransitionWindow {
    pub start: usize,
    pub end: usize,
}

/// Starting rule on a speed series: the transition begins at the first
/// sample strictly above the start threshold and ends at the first local
/// speed maximum after the speed reaches `steady_state_fraction` times the
/// steady-state speed (median over `steady_window_s` following the
/// transition; estimated by fixpoint iteration, two refinement passes).
pub(crate) fn starting_transition(
    speed: &[f64],
    dt: f64,
    cfg: &LabelConfig,
) -> Option<TransitionWindow> {
    let n = speed.len();
    let begin = speed.iter().position(|&s| s > cfg.start_speed_threshold)?;
    let steady_steps = ((cfg.steady_window_s / dt) as usize).max(1);

    let mut tail: Vec<f64> = speed[begin..].to_vec();
    let mut steady = median(&mut tail);
    let mut end = n - 1;
    for _ in 0..2 {
        let target = cfg.steady_state_fraction * steady;
        let reach = match (begin..n).find(|&k| speed[k] >= target) {
            Some(k) => k,
            None => n - 1,
        };
        end = (reach..n).find(|&k| k + 1 >= n || speed[k] >= speed[k + 1]).unwrap_or(n - 1);
        let hi = (end + 1 + steady_steps).min(n);
        if end + 1 >= hi {
            break;
        }
        let mut window: Vec<f64> = speed[end + 1..hi].to_vec();
        steady = median(&mut window);
    }
    Some(TransitionWindow { start: begin, end: end.max(begin) })
}

/// Stopping rule, the mirror of [`starting_transition`]: the transition
/// ends at the first sample strictly below the start threshold and begins
/// at the last local speed maximum before the speed falls under the steady
/// fraction of the preceding steady-state speed.
pub(crate) fn stopping_transition(
    speed: &[f64],
    dt: f64,
    cfg: &LabelConfig,
) -> Option<TransitionWindow> {
    let n = speed.len();
    let end = speed.iter().position(|&s| s < cfg.start_speed_threshold)?;
    if end == 0 {
        return Some(TransitionWindow { start: 0, end: 0 });
    }
    let steady_steps = ((cfg.steady_window_s / dt) as usize).max(1);

    let mut head: Vec<f64> = speed[..end].to_vec();
    let mut steady = median(&mut head);
    let mut start = 0;
    for _ in 0..2 {
        let target = cfg.steady_state_fraction * steady;
        let drop = (0..end).find(|&k| speed[k] < target).unwrap_or(end);
        // Last local maximum strictly before the drop.
        start = (0..drop)
            .rev()
            .find(|&k| {
                (k == 0 || speed[k] >= speed[k - 1]) && (k + 1 >= n || speed[k] >= speed[k + 1])
            })
            .unwrap_or(0);
        let lo = start.saturating_sub(steady_steps);
        if lo >= start {
            break;
        }
        let mut window: Vec<f64> = speed[lo..start].to_vec();
        steady = median(&mut window);
    }
    Some(TransitionWindow { start: start.min(end), end })
}

/// Magnitude of the backward-difference velocity (first sample copies the
/// second).
pub fn raw_speed(traj: &Trajectory) -> Vec<f64> {
    let n = traj.len();
    let t = traj.timestamps();
    let p = traj.positions();
    let mut speed = vec![0.0; n];
    for i in 1..n {
        let dt = t[i] - t[i - 1];
        speed[i] = math::hypot(p[i][0] - p[i - 1][0], p[i][1] - p[i - 1][1]) / dt;
    }
    speed[0] = speed[1];
    speed
}

pub(crate) fn labels_for_starting(n: usize, w: TransitionWindow) -> Vec<MotionState> {
    let mut states = vec![MotionState::Waiting; n];
    for s in states.iter_mut().take(w.end + 1).skip(w.start) {
        *s = MotionState::Starting;
    }
    for s in states.iter_mut().skip(w.end + 1) {
        *s = MotionState::Moving;
    }
    states
}

pub(crate) fn labels_for_stopping(n: usize, w: TransitionWindow) -> Vec<MotionState> {
    // The transition-end sample is already below the motion threshold, so
    // waiting starts there.
    let mut states = vec![MotionState::Moving; n];
    for s in states.iter_mut().take(w.end).skip(w.start) {
        *s = MotionState::Stopping;
    }
    for s in states.iter_mut().skip(w.end) {
        *s = MotionState::Waiting;
    }
    states
}

/// Rule-based labeling from the raw (unsmoothed) speed.
///
/// Dispatch: speed never above the start threshold -> all waiting; never
/// below -> all moving (both without events). Otherwise the first crossing
/// direction selects the starting or the stopping rule. Scenes with more
/// than one transition are out of scope.
pub fn auto_label(traj: &Trajectory, cfg: &LabelConfig) -> Result<LabelOutcome, TrajError> {
    let speed = raw_speed(traj);
    let dt = traj.dt();
    let n = speed.len();
    let t = traj.timestamps();

    let above = speed.iter().any(|&s| s > cfg.start_speed_threshold);
    let below = speed.iter().any(|&s| s < cfg.start_speed_threshold);
    let outcome = if !above {
        LabelOutcome { states: vec![MotionState::Waiting; n], events: SceneEvents::default() }
    } else if !below {
        LabelOutcome { states: vec![MotionState::Moving; n], events: SceneEvents::default() }
    } else if speed[0] <= cfg.start_speed_threshold {
        let w = starting_transition(&speed, dt, cfg).expect("crossing exists");
        LabelOutcome {
            states: labels_for_starting(n, w),
            events: SceneEvents {
                transition_start: Some(t[w.start]),
                transition_end: Some(t[w.end]),
                ..SceneEvents::default()
            },
        }
    } else {
        let w = stopping_transition(&speed, dt, cfg).expect("crossing exists");
        LabelOutcome {
            states: labels_for_stopping(n, w),
            events: SceneEvents {
                transition_start: Some(t[w.start]),
                transition_end: Some(t[w.end]),
                ..SceneEvents::default()
            },
        }
    };
    Ok(outcome)
}

/// Deterministic index partition: `(kept, held_out)` with
/// `round(n * holdout_fraction)` held out after a seeded shuffle.
pub fn holdout_split(
    n: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), TrajError> {
    if !(0.0..=1.0).contains(&holdout_fraction) || !holdout_fraction.is_finite() {
        return Err(TrajError::BadFraction { fraction: holdout_fraction });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let held = math::round(n as f64 * holdout_fraction) as usize;
    let held = held.min(n);
    let holdout = indices.split_off(n - held);
    Ok((indices, holdout))
}

/// Mixes a base seed with a stream tag (splitmix64 finalizer) so derived
/// generators are decorrelated but reproducible.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn line_traj(n: usize, dt: f64, vx: f64, vy: f64) -> Trajectory {
        let timestamps: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let positions: Vec<[f64; 2]> =
            (0..n).map(|k| [vx * k as f64 * dt, vy * k as f64 * dt]).collect();
        Trajectory::new(timestamps, positions).unwrap()
    }

    #[test]
    fn motion_state_round_trips_names_and_indices() {
        for (i, s) in MotionState::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(MotionState::from_index(i), Some(*s));
            assert_eq!(MotionState::parse(s.name()), Some(*s));
        }
        assert_eq!(MotionState::parse("strolling"), None);
    }

    #[test]
    fn transition_rules_match_the_state_machine() {
        use MotionState::*;
        // 4 self loops + 8 directed edges allowed, the other 4 forbidden.
        let mut allowed = 0;
        for a in MotionState::ALL {
            for b in MotionState::ALL {
                if a.can_transition_to(b) {
                    allowed += 1;
                }
            }
        }
        assert_eq!(allowed, 12);
        assert!(!Waiting.can_transition_to(Moving));
        assert!(!Moving.can_transition_to(Waiting));
        assert!(!Starting.can_transition_to(Stopping));
        assert!(!Stopping.can_transition_to(Starting));
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        let t = vec![0.0, 0.02, 0.04];
        assert_eq!(
            Trajectory::new(t.clone(), vec![[0.0, 0.0]; 2]).unwrap_err(),
            TrajError::LengthMismatch { timestamps: 3, values: 2 }
        );
        assert!(matches!(
            Trajectory::new(vec![0.0], vec![[0.0, 0.0]]).unwrap_err(),
            TrajError::TooShort { .. }
        ));
        assert!(matches!(
            Trajectory::new(vec![0.0, 0.0, 0.02], vec![[0.0, 0.0]; 3]).unwrap_err(),
            TrajError::NotIncreasing { .. }
        ));
        assert!(matches!(
            Trajectory::new(vec![0.0, 0.02, 0.06], vec![[0.0, 0.0]; 3]).unwrap_err(),
            TrajError::NonUniform { .. }
        ));
        assert!(matches!(
            Trajectory::new(vec![0.0, f64::NAN, 0.04], vec![[0.0, 0.0]; 3]).unwrap_err(),
            TrajError::NonFinite { .. }
        ));
    }

    #[test]
    fn smoothing_matches_direct_recursion() {
        // Independent oracle: the recursion written out verbatim.
        let mut rng_state = 0x1234_5678_u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) * 4.0 - 2.0
        };
        let series: Vec<f64> = (0..100).map(|_| next()).collect();
        let alpha = 0.3;
        let got = smooth(&series, alpha).unwrap();
        let mut expect = series[0];
        assert_eq!(got[0], expect);
        for k in 1..series.len() {
            expect = alpha * series[k] + (1.0 - alpha) * expect;
            assert!((got[k] - expect).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn smoothing_alpha_one_is_identity_and_constants_are_fixed_points() {
        let series = vec![3.0, -1.0, 2.5, 0.0];
        assert_eq!(smooth(&series, 1.0).unwrap(), series);
        let constant = vec![7.25; 40];
        for &alpha in &[0.05, 0.5, 1.0] {
            // Fixed point up to rounding: alpha*c + (1-alpha)*c re-rounds.
            for v in smooth(&constant, alpha).unwrap() {
                assert!((v - 7.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_rejects_bad_alpha_and_empty_input() {
        assert!(matches!(smooth(&[1.0], 0.0), Err(TrajError::AlphaOutOfRange { .. })));
        assert!(matches!(smooth(&[1.0], 1.5), Err(TrajError::AlphaOutOfRange { .. })));
        assert!(matches!(smooth(&[], 0.5), Err(TrajError::EmptySeries)));
    }

    #[test]
    fn smoothing_never_exceeds_input_range() {
        let series: Vec<f64> = (0..200).map(|k| math::sin(0.3 * k as f64) * 2.0).collect();
        let out = smooth(&series, 0.2).unwrap();
        let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &v in &out {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
#[allow(clippy::needless_range_loop)]
    fn straight_line_velocity_is_speed_lon_only() {
        let traj = line_traj(100, 0.02, 3.0, 4.0); // speed 5, heading atan2(4,3)
        let (vel, frames) = ego_velocity(&traj, &EgoConfig::default()).unwrap();
        for k in 2..traj.len() {
            assert!((vel.v_lon[k] - 5.0).abs() < 1e-9, "lon at {k}: {}", vel.v_lon[k]);
            assert!(vel.v_lat[k].abs() < 1e-9, "lat at {k}: {}", vel.v_lat[k]);
            assert!((vel.speed[k] - 5.0).abs() < 1e-9);
            assert!((frames[k].heading - math::atan2(4.0, 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_speed_is_preserved_within_differentiation_error() {
        // Constant-speed circle: radius 5 m, speed 1 m/s, 50 Hz.
        let (r, v, dt) = (5.0, 1.0, 0.02);
        let omega = v / r;
        let n = 500;
        let timestamps: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let positions: Vec<[f64; 2]> = timestamps
            .iter()
            .map(|&t| [r * math::cos(omega * t), r * math::sin(omega * t)])
            .collect();
        let traj = Trajectory::new(timestamps, positions).unwrap();
        let cfg = EgoConfig { alpha_lon: 1.0, alpha_lat: 1.0, heading_speed_floor: 0.15 };
        let (vel, _) = ego_velocity(&traj, &cfg).unwrap();
        // Chord shortening is the only error source at alpha = 1.
        let chord_speed = v * (omega * dt / 2.0).sin() / (omega * dt / 2.0);
        for k in 1..n {
            let mag = math::hypot(vel.v_lon[k], vel.v_lat[k]);
            assert!((mag - chord_speed).abs() < 1e-9, "k={k} mag={mag}");
            assert!((mag - v).abs() < 1e-5, "k={k} mag={mag}");
        }
    }

    #[test]
    fn heading_holds_below_floor_and_is_zero_when_never_exceeded() {
        let n = 50;
        let timestamps: Vec<f64> = (0..n).map(|k| k as f64 * 0.02).collect();
        // Micrometer jitter: speed stays far below the floor.
        let positions: Vec<[f64; 2]> =
            (0..n).map(|k| [1e-6 * (k % 2) as f64, 2.0]).collect();
        let traj = Trajectory::new(timestamps, positions).unwrap();
        let (_, frames) = ego_velocity(&traj, &EgoConfig::default()).unwrap();
        for f in &frames {
            assert_eq!(f.heading, 0.0);
        }

        // Moving then stopping: heading must persist through the stop.
        let m = 200;
        let timestamps: Vec<f64> = (0..m).map(|k| k as f64 * 0.02).collect();
        let positions: Vec<[f64; 2]> = (0..m)
            .map(|k| {
                let t = k as f64 * 0.02;
                let x = if t < 2.0 { -1.5 * t } else { -3.0 };
                [x, 0.0]
            })
            .collect();
        let traj = Trajectory::new(timestamps, positions).unwrap();
        let (_, frames) = ego_velocity(&traj, &EgoConfig::default()).unwrap();
        let pi = core::f64::consts::PI;
        assert!((frames[50].heading - pi).abs() < 1e-12, "moving heading");
        assert!((frames[m - 1].heading - pi).abs() < 1e-12, "held after stop");
    }

    #[test]
    fn ego_velocity_is_invariant_under_rigid_transforms() {
        let n = 300;
        let timestamps: Vec<f64> = (0..n).map(|k| k as f64 * 0.02).collect();
        let positions: Vec<[f64; 2]> = timestamps
            .iter()
            .map(|&t| [1.2 * t + 0.3 * math::sin(t), 0.4 * math::cos(1.3 * t)])
            .collect();
        let traj = Trajectory::new(timestamps, positions).unwrap();
        let cfg = EgoConfig::default();
        let (base, _) = ego_velocity(&traj, &cfg).unwrap();
        for (angle, shift) in [(0.7, [10.0, -3.0]), (-2.1, [0.0, 25.0]), (3.0, [-8.0, -8.0])] {
            let moved = traj.rigid_transformed(angle, shift);
            let (vel, _) = ego_velocity(&moved, &cfg).unwrap();
            for k in 0..n {
                assert!((vel.v_lon[k] - base.v_lon[k]).abs() < 1e-9, "lon k={k}");
                assert!((vel.v_lat[k] - base.v_lat[k]).abs() < 1e-9, "lat k={k}");
                assert!((vel.speed[k] - base.speed[k]).abs() < 1e-9, "speed k={k}");
            }
        }
    }

    #[test]
    fn ego_frame_round_trips_points() {
        let frame = EgoFrame { origin: [3.0, -2.0], heading: 1.1 };
        for p in [[0.0, 0.0], [5.0, 1.0], [-4.0, 7.5]] {
            let q = frame.to_global(frame.to_ego(p));
            assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
        }
    }

    fn ramp_speed_profile(n: usize, dt: f64, onset: f64, v_ss: f64, accel: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                if t < onset {
                    0.0
                } else {
                    (accel * (t - onset)).min(v_ss)
                }
            })
            .collect()
    }

    fn traj_from_speed(speed: &[f64], dt: f64) -> Trajectory {
        // Forward-integrate the speed so the backward difference of the
        // result reproduces interval means of the profile.
        let mut x = 0.0;
        let mut positions = vec![[0.0, 0.0]];
        for k in 1..speed.len() {
            x += 0.5 * (speed[k - 1] + speed[k]) * dt;
            positions.push([x, 0.0]);
        }
        let timestamps: Vec<f64> = (0..speed.len()).map(|k| k as f64 * dt).collect();
        Trajectory::new(timestamps, positions).unwrap()
    }

    #[test]
    fn auto_label_constant_speeds() {
        let standing = line_traj(100, 0.02, 0.0, 0.0);
        let out = auto_label(&standing, &LabelConfig::default()).unwrap();
        assert!(out.states.iter().all(|&s| s == MotionState::Waiting));
        assert!(out.events.is_empty());

        let walking = line_traj(100, 0.02, 1.5, 0.0);
        let out = auto_label(&walking, &LabelConfig::default()).unwrap();
        assert!(out.states.iter().all(|&s| s == MotionState::Moving));
        assert!(out.events.is_empty());
    }

    #[test]
    fn auto_label_recovers_a_known_ramp_onset() {
        // 0 -> 1.4 m/s linear ramp at 2 m/s^2 starting at t = 2.0 s.
        let (n, dt, onset, v_ss, accel) = (400, 0.02, 2.0, 1.4, 2.0);
        let speed = ramp_speed_profile(n, dt, onset, v_ss, accel);
        let traj = traj_from_speed(&speed, dt);
        let out = auto_label(&traj, &LabelConfig::default()).unwrap();
        // The 0.2 m/s crossing of the profile happens at onset + 0.1 s.
        let expected = onset + 0.2 / accel;
        let got = out.events.transition_start.expect("transition found");
        assert!(
            (got - expected).abs() <= dt + 1e-9,
            "transition_start {got} vs expected {expected}"
        );
        // End: ramp reaches steady 1.4 at onset + 0.7 s; first local max
        // at the plateau boundary.
        let end = out.events.transition_end.unwrap();
        assert!(
            (end - (onset + v_ss / accel)).abs() <= 2.0 * dt + 1e-9,
            "transition_end {end}"
        );
        // Label blocks in rule order.
        let si = (got / dt).round() as usize;
        let ei = (end / dt).round() as usize;
        assert!(out.states[..si].iter().all(|&s| s == MotionState::Waiting));
        assert!(out.states[si..=ei].iter().all(|&s| s == MotionState::Starting));
        assert!(out.states[ei + 1..].iter().all(|&s| s == MotionState::Moving));
    }

    #[test]
    fn auto_label_stopping_mirrors_starting() {
        let (n, dt, v_ss, accel) = (400, 0.02, 1.4, 2.0);
        let stop_begin = 3.0;
        let speed: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                (v_ss - accel * (t - stop_begin).max(0.0)).max(0.0)
            })
            .collect();
        let traj = traj_from_speed(&speed, dt);
        let out = auto_label(&traj, &LabelConfig::default()).unwrap();
        let start = out.events.transition_start.unwrap();
        let end = out.events.transition_end.unwrap();
        // Deceleration begins at 3.0 s (last local max) and the speed
        // falls below 0.2 m/s at 3.6 s.
        assert!((start - stop_begin).abs() <= 2.0 * dt + 1e-9, "start {start}");
        assert!((end - (stop_begin + (v_ss - 0.2) / accel)).abs() <= 2.0 * dt + 1e-9, "end {end}");
        let si = (start / dt).round() as usize;
        let ei = (end / dt).round() as usize;
        assert!(out.states[..si].iter().all(|&s| s == MotionState::Moving));
        assert!(out.states[si..ei].iter().all(|&s| s == MotionState::Stopping));
        assert!(out.states[ei..].iter().all(|&s| s == MotionState::Waiting));
    }

    #[test]
    fn auto_label_sequences_obey_the_state_machine() {
        for accel in [0.9, 1.6, 2.4] {
            let speed = ramp_speed_profile(350, 0.02, 1.5, 1.2, accel);
            let traj = traj_from_speed(&speed, 0.02);
            let out = auto_label(&traj, &LabelConfig::default()).unwrap();
            for k in 1..out.states.len() {
                assert!(
                    out.states[k - 1].can_transition_to(out.states[k]),
                    "step {k}: {} -> {}",
                    out.states[k - 1],
                    out.states[k]
                );
            }
        }
    }

    #[test]
    fn scene_validates_labels_rate_and_events() {
        let traj = line_traj(100, 0.02, 1.0, 0.0);
        let labels = vec![MotionState::Moving; 100];
        let ok = Scene::new(
            "walk_0".to_string(),
            MotionState::Moving,
            50.0,
            traj.clone(),
            labels.clone(),
            SceneEvents::default(),
        );
        assert!(ok.is_ok());

        let bad_rate = Scene::new(
            "walk_0".to_string(),
            MotionState::Moving,
            30.0,
            traj.clone(),
            labels.clone(),
            SceneEvents::default(),
        );
        assert!(matches!(bad_rate.unwrap_err(), TrajError::BadSampleRate { .. }));

        let mut jumpy = labels.clone();
        jumpy[50] = MotionState::Waiting; // moving -> waiting is illegal
        let bad_seq =
            Scene::new("walk_0".to_string(), MotionState::Moving, 50.0, traj.clone(), jumpy, SceneEvents::default());
        assert!(matches!(bad_seq.unwrap_err(), TrajError::InvalidTransition { .. }));

        let bad_event = Scene::new(
            "walk_0".to_string(),
            MotionState::Moving,
            50.0,
            traj.clone(),
            labels.clone(),
            SceneEvents { transition_start: Some(99.0), ..SceneEvents::default() },
        );
        assert!(matches!(bad_event.unwrap_err(), TrajError::EventOutOfRange { .. }));

        let bad_order = Scene::new(
            "walk_0".to_string(),
            MotionState::Moving,
            50.0,
            traj,
            labels,
            SceneEvents {
                transition_start: Some(1.0),
                transition_end: Some(0.5),
                ..SceneEvents::default()
            },
        );
        assert!(matches!(bad_order.unwrap_err(), TrajError::EventOrder { .. }));
    }

    #[test]
    fn holdout_split_is_deterministic_and_partitions() {
        let (a1, b1) = holdout_split(100, 0.3, 42).unwrap();
        let (a2, b2) = holdout_split(100, 0.3, 42).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(b1.len(), 30);
        let mut all: Vec<usize> = a1.iter().chain(&b1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let (a3, _) = holdout_split(100, 0.3, 43).unwrap();
        assert_ne!(a1, a3, "different seeds should shuffle differently");
    }

    #[test]
    fn derive_seed_separates_streams() {
        let s = derive_seed(42, 1);
        assert_ne!(s, derive_seed(42, 2));
        assert_ne!(s, derive_seed(43, 1));
        assert_eq!(s, derive_seed(42, 1));
    }

    #[test]
    fn errors_render_useful_messages() {
        let msg = format!("{}", TrajError::NonUniform { index: 3, dt: 0.03, nominal: 0.02 });
        assert!(msg.contains("index 3"));
        assert!(msg.contains("0.03"));
    }
}
