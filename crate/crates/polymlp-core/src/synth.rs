//! Deterministic synthetic scene generator: waiting, starting, moving,
//! and stopping scenes for pedestrians and cyclists, with ground-truth
//! events taken from the noiseless motion profile.
//!
//! Transition scenes draw their speed ramps from two families — the
//! logistic profile the physical prediction model assumes, and a
//! piecewise-constant-acceleration profile it does not — so learned models
//! are not benchmarked solely against their own prior. Positions are the
//! numerically exact integral of the velocity profile (5-point
//! Gauss-Legendre per sample step); labels and events come from the shared
//! rule-based labeling applied to the noiseless positions, and Gaussian
//! position noise is added afterwards.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::traj::{
    auto_label, derive_seed, LabelConfig, MotionState, Scene, Trajectory, TrajError, STATE_COUNT,
};

/// Speed at which a ramp is cut to exact standstill / exact steady hold
/// (m/s). Keeps transition rules well-posed on noiseless profiles.
const SPEED_CUT: f64 = 0.02;
/// Minimum standstill / steady lead-in before a transition (s); long
/// enough for a full observation window plus margin.
const LEAD_MIN_S: f64 = 1.5;
/// Minimum segment after a transition completes (s); enough substance for
/// the steady-state estimate of the labeling rules.
const TAIL_MIN_S: f64 = 1.2;

/// Probability that a moving scene contains one hesitation dip.
const HESITATION_PROB: f64 = 0.4;
/// Edge-to-center duration range of a hesitation dip (seconds).
const HESITATION_HALF_SPAN_S: (f64, f64) = (0.5, 1.1);
/// Fraction of nominal speed retained at the deepest point of a dip.
/// The floor stays several times the standstill cut, so the rider is
/// always genuinely moving even though the window evidence is ambiguous.
const HESITATION_FLOOR_FRAC: (f64, f64) = (0.10, 0.35);

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    BadSpec { what: &'static str },
    /// No duration in range can hold lead-in, ramp, and tail.
    InfeasibleSpec { needed_s: f64, max_s: f64 },
    Traj(TrajError),
}

impl core::fmt::Display for SynthError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SynthError::BadSpec { what } => write!(f, "bad corpus spec: {what}"),
            SynthError::InfeasibleSpec { needed_s, max_s } => write!(
                f,
                "duration range too short: transitions need up to {needed_s:.2} s, max is {max_s:.2} s"
            ),
            SynthError::Traj(e) => write!(f, "trajectory: {e}"),
        }
    }
}

impl core::error::Error for SynthError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            SynthError::Traj(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TrajError> for SynthError {
    fn from(e: TrajError) -> Self {
        SynthError::Traj(e)
    }
}

/// Corpus composition and kinematic ranges. All ranges are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    /// Scenes per class, indexed like `MotionState`.
    pub counts: [usize; STATE_COUNT],
    pub sample_rate_hz: f64,
    /// Scene duration range (s).
    pub duration_s: (f64, f64),
    /// Pedestrian steady-speed range (m/s).
    pub pedestrian_speed: (f64, f64),
    /// Cyclists scale pedestrian speed and acceleration by this factor.
    pub cyclist_multiplier: (f64, f64),
    /// Fraction of scenes that are cyclists.
    pub cyclist_fraction: f64,
    /// Initial heading range (rad).
    pub heading: (f64, f64),
    /// Moving scenes turn at up to this rate (rad/s).
    pub max_curvature: f64,
    /// Additive Gaussian position noise (m).
    pub position_noise_std: f64,
    /// Logistic ramp time-constant range (s).
    pub tau: (f64, f64),
    /// Constant-acceleration ramp range at pedestrian scale (m/s^2).
    pub accel: (f64, f64),
    /// Standstill sway speed amplitude per axis (m/s); the resulting speed
    /// must stay clearly under the motion threshold.
    pub standstill_jitter_speed: f64,
    /// Scene start positions are drawn from this square half-extent (m).
    pub origin_half_extent: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            counts: [150; STATE_COUNT],
            sample_rate_hz: 50.0,
            duration_s: (4.0, 10.0),
            pedestrian_speed: (1.0, 2.0),
            cyclist_multiplier: (2.0, 3.0),
            cyclist_fraction: 0.2,
            heading: (-core::f64::consts::PI, core::f64::consts::PI),
            max_curvature: 0.1,
            position_noise_std: 0.01,
            tau: (0.04, 0.09),
            accel: (1.5, 3.0),
            standstill_jitter_speed: 0.012,
            origin_half_extent: 10.0,
        }
    }
}

impl CorpusSpec {
    pub fn total_scenes(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Longest ramp any (family, speed) draw can produce (s).
    fn worst_ramp_span(&self) -> f64 {
        let v_max = self.pedestrian_speed.1 * self.cyclist_multiplier.1.max(1.0);
        let c = SPEED_CUT / v_max;
        let logistic = 2.0 * self.tau.1 * math::ln((1.0 - c) / c);
        // Cyclist speed and acceleration scale together, so the ramp time
        // is bounded by the pedestrian-scale ratio.
        let accel = self.pedestrian_speed.1 / self.accel.0;
        logistic.max(accel)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(SynthError::BadSpec { what: "sample rate must be positive" });
        }
        let ordered = |r: (f64, f64)| r.0 <= r.1 && r.0.is_finite() && r.1.is_finite();
        if !(ordered(self.duration_s) && self.duration_s.0 > 0.0) {
            return Err(SynthError::BadSpec { what: "duration range must be ordered, positive" });
        }
        if !(ordered(self.pedestrian_speed) && self.pedestrian_speed.0 > 0.3) {
            return Err(SynthError::BadSpec {
                what: "pedestrian speeds must be ordered and clearly above standstill",
            });
        }
        if !(ordered(self.cyclist_multiplier) && self.cyclist_multiplier.0 >= 1.0) {
            return Err(SynthError::BadSpec { what: "cyclist multiplier must be ordered, >= 1" });
        }
        if !(0.0..=1.0).contains(&self.cyclist_fraction) {
            return Err(SynthError::BadSpec { what: "cyclist fraction must be in [0, 1]" });
        }
        if !ordered(self.heading) {
            return Err(SynthError::BadSpec { what: "heading range must be ordered" });
        }
        if !(self.max_curvature >= 0.0 && self.max_curvature.is_finite()) {
            return Err(SynthError::BadSpec { what: "curvature must be >= 0" });
        }
        if !(self.position_noise_std >= 0.0 && self.position_noise_std.is_finite()) {
            return Err(SynthError::BadSpec { what: "noise sigma must be >= 0" });
        }
        if !(ordered(self.tau) && self.tau.0 > 0.0) {
            return Err(SynthError::BadSpec { what: "tau range must be ordered, positive" });
        }
        if !(ordered(self.accel) && self.accel.0 > 0.0) {
            return Err(SynthError::BadSpec { what: "acceleration range must be ordered, positive" });
        }
        // The spec ceiling is 0.3 m/s, but the sway magnitude (two axes)
        // must also stay under the motion threshold for clean labels.
        let sway_peak = self.standstill_jitter_speed * core::f64::consts::SQRT_2;
        if !(self.standstill_jitter_speed >= 0.0 && sway_peak < 0.18) {
            return Err(SynthError::BadSpec {
                what: "standstill jitter must keep speeds under the motion threshold",
            });
        }
        if !(self.origin_half_extent >= 0.0 && self.origin_half_extent.is_finite()) {
            return Err(SynthError::BadSpec { what: "origin extent must be >= 0" });
        }
        let needed = LEAD_MIN_S + self.worst_ramp_span() + TAIL_MIN_S;
        if (self.counts[MotionState::Starting.index()] > 0
            || self.counts[MotionState::Stopping.index()] > 0)
            && needed > self.duration_s.1
        {
            return Err(SynthError::InfeasibleSpec { needed_s: needed, max_s: self.duration_s.1 });
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    range.0 + rng.gen::<f64>() * (range.1 - range.0)
}

/// Standard normal via Box-Muller (one value per call).
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Small sinusoidal standstill sway in both axes.
#[derive(Debug, Clone, Copy)]
struct Sway {
    amp: [f64; 2],
    omega: [f64; 2],
    phase: [f64; 2],
}

impl Sway {
    fn draw(rng: &mut ChaCha8Rng, amplitude: f64) -> Self {
        let mut amp = [0.0; 2];
        let mut omega = [0.0; 2];
        let mut phase = [0.0; 2];
        for axis in 0..2 {
            amp[axis] = amplitude * uniform(rng, (0.6, 1.0));
            let period = uniform(rng, (2.2, 3.6));
            omega[axis] = 2.0 * core::f64::consts::PI / period;
            phase[axis] = uniform(rng, (0.0, 2.0 * core::f64::consts::PI));
        }
        Self { amp, omega, phase }
    }

    fn velocity(&self, t: f64) -> [f64; 2] {
        [
            self.amp[0] * math::sin(self.omega[0] * t + self.phase[0]),
            self.amp[1] * math::sin(self.omega[1] * t + self.phase[1]),
        ]
    }
}

/// Longitudinal ramp shape from standstill to `v_ss`.
#[derive(Debug, Clone, Copy)]
enum RampFamily {
    /// Logistic rise, cut to exact 0 below `SPEED_CUT` and held at exact
    /// `v_ss` once within `SPEED_CUT` of it (so the labeling rules see a
    /// true plateau).
    Logistic { tau: f64 },
    /// Constant acceleration from 0 to `v_ss`.
    ConstantAccel { accel: f64 },
}

impl RampFamily {
    fn tag(&self) -> &'static str {
        match self {
            RampFamily::Logistic { .. } => "log",
            RampFamily::ConstantAccel { .. } => "acc",
        }
    }

    /// Time from motion onset to reaching the steady hold (s).
    fn span(&self, v_ss: f64) -> f64 {
        match self {
            RampFamily::Logistic { tau } => {
                let c = SPEED_CUT / v_ss;
                2.0 * tau * math::ln((1.0 - c) / c)
            }
            RampFamily::ConstantAccel { accel } => v_ss / accel,
        }
    }

    /// Rising speed at `dt_on` seconds after motion onset, reaching
    /// exactly `v_ss` at `span` and exactly 0 at negative times.
    fn rising_speed(&self, dt_on: f64, v_ss: f64) -> f64 {
        if dt_on < 0.0 {
            return 0.0;
        }
        let span = self.span(v_ss);
        if dt_on >= span {
            return v_ss;
        }
        match self {
            RampFamily::Logistic { tau } => {
                let c = SPEED_CUT / v_ss;
                // Midpoint sits half a span after onset.
                let t0 = tau * math::ln((1.0 - c) / c);
                let z = (dt_on - t0) / tau;
                let s = if z >= 0.0 {
                    1.0 / (1.0 + math::exp(-z))
                } else {
                    let e = math::exp(z);
                    e / (1.0 + e)
                };
                v_ss * s
            }
            RampFamily::ConstantAccel { accel } => accel * dt_on,
        }
    }
}

/// The full noiseless motion plan of one scene.
struct MotionPlan {
    duration_s: f64,
    origin: [f64; 2],
    heading0: f64,
    /// Turn rate (rad/s), moving scenes only.
    curvature: f64,
    sway: Sway,
    kind: PlanKind,
}

/// A transient near-stop dip in cruise speed: the rider brakes toward a
/// floor fraction of nominal speed, then recovers. The floor never reaches
/// the standstill cut, so the true state stays "moving" throughout — but a
/// causal observer cannot tell the braking phase from a genuine stop onset.
struct Hesitation {
    /// Scene time of the deepest point of the dip.
    center_s: f64,
    /// Seconds from the dip edge to its center.
    half_span_s: f64,
    /// Fraction of nominal speed retained at the deepest point.
    floor_frac: f64,
}

impl Hesitation {
    /// Multiplicative speed factor at scene time `t`: 1 outside the dip,
    /// `floor_frac` at its center, joined by a raised-cosine bump (C^1 at
    /// both ends, so the speed profile stays smooth).
    fn factor(&self, t: f64) -> f64 {
        let u = math::abs(t - self.center_s) / self.half_span_s;
        if u >= 1.0 {
            1.0
        } else {
            let bump = 0.5 * (1.0 + math::cos(core::f64::consts::PI * u));
            1.0 - (1.0 - self.floor_frac) * bump
        }
    }
}

enum PlanKind {
    Standstill,
    Cruise {
        v_ss: f64,
        perturb_amp: f64,
        perturb_omega: f64,
        perturb_phase: f64,
        hesitation: Option<Hesitation>,
    },
    /// Standstill, then a ramp from `onset_s` to steady `v_ss`.
    SpeedUp { v_ss: f64, onset_s: f64, family: RampFamily },
    /// Steady `v_ss`, ramp-down mirrored at `onset_s`, then standstill.
    SlowDown { v_ss: f64, onset_s: f64, family: RampFamily },
}

impl MotionPlan {
    /// Instantaneous noiseless velocity (global frame) at scene time `t`.
    fn velocity(&self, t: f64) -> [f64; 2] {
        match &self.kind {
            PlanKind::Standstill => self.sway.velocity(t),
            PlanKind::Cruise { v_ss, perturb_amp, perturb_omega, perturb_phase, hesitation } => {
                let mut speed = v_ss + perturb_amp * math::sin(perturb_omega * t + perturb_phase);
                if let Some(h) = hesitation {
                    speed *= h.factor(t);
                }
                let heading = self.heading0 + self.curvature * t;
                [speed * math::cos(heading), speed * math::sin(heading)]
            }
            PlanKind::SpeedUp { v_ss, onset_s, family } => {
                let speed = family.rising_speed(t - onset_s, *v_ss);
                let mut v = [
                    speed * math::cos(self.heading0),
                    speed * math::sin(self.heading0),
                ];
                // Sway only while still standing.
                if t < *onset_s {
                    let s = self.sway.velocity(t);
                    v[0] += s[0];
                    v[1] += s[1];
                }
                v
            }
            PlanKind::SlowDown { v_ss, onset_s, family } => {
                let span = family.span(*v_ss);
                // Time-mirror of the rising ramp: full speed before onset.
                let speed = family.rising_speed(span - (t - onset_s), *v_ss);
                let mut v = [
                    speed * math::cos(self.heading0),
                    speed * math::sin(self.heading0),
                ];
                if t - onset_s >= span {
                    let s = self.sway.velocity(t);
                    v[0] += s[0];
                    v[1] += s[1];
                }
                v
            }
        }
    }
}

/// 5-point Gauss-Legendre nodes/weights on [0, 1].
const GL_NODES: [f64; 5] = [
    0.046_910_077_030_668_05,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_331_9,
];
const GL_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_44,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// Integrates a velocity field over [0, n*dt] on the sample grid.
fn integrate_positions(
    velocity: impl Fn(f64) -> [f64; 2],
    origin: [f64; 2],
    n: usize,
    dt: f64,
) -> Vec<[f64; 2]> {
    let mut positions = Vec::with_capacity(n);
    let mut p = origin;
    positions.push(p);
    for k in 1..n {
        let t_lo = (k - 1) as f64 * dt;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for (node, weight) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            let v = velocity(t_lo + node * dt);
            dx += weight * v[0];
            dy += weight * v[1];
        }
        p = [p[0] + dx * dt, p[1] + dy * dt];
        positions.push(p);
    }
    positions
}

fn class_prefix(state: MotionState) -> &'static str {
    match state {
        MotionState::Waiting => "waiting",
        MotionState::Starting => "starting",
        MotionState::Moving => "moving",
        MotionState::Stopping => "stopping",
    }
}

/// Draws one scene's motion plan. The draw order is fixed, so a given
/// (seed, scene index) always produces the same plan.
fn draw_plan(
    rng: &mut ChaCha8Rng,
    spec: &CorpusSpec,
    class: MotionState,
) -> Result<(MotionPlan, &'static str), SynthError> {
    let origin = [
        uniform(rng, (-spec.origin_half_extent, spec.origin_half_extent)),
        uniform(rng, (-spec.origin_half_extent, spec.origin_half_extent)),
    ];
    let heading0 = uniform(rng, spec.heading);
    let sway = Sway::draw(rng, spec.standstill_jitter_speed);

    let cyclist = rng.gen::<f64>() < spec.cyclist_fraction;
    let multiplier = if cyclist { uniform(rng, spec.cyclist_multiplier) } else { 1.0 };

    match class {
        MotionState::Waiting => {
            let duration_s = uniform(rng, spec.duration_s);
            Ok((
                MotionPlan {
                    duration_s,
                    origin,
                    heading0,
                    curvature: 0.0,
                    sway,
                    kind: PlanKind::Standstill,
                },
                "",
            ))
        }
        MotionState::Moving => {
            // Keep the perturbed speed inside the configured range: draw
            // the base speed off the edges and bound the ripple by the
            // remaining margin.
            let (lo, hi) = spec.pedestrian_speed;
            let margin = 0.10 * (hi - lo);
            let v_base = uniform(rng, (lo + margin, hi - margin));
            let perturb_amp = uniform(rng, (0.0, margin)) * multiplier;
            let v_ss = v_base * multiplier;
            let curvature = uniform(rng, (-spec.max_curvature, spec.max_curvature));
            let period = uniform(rng, (2.0, 4.0));
            let perturb_phase = uniform(rng, (0.0, 2.0 * core::f64::consts::PI));
            let duration_s = uniform(rng, spec.duration_s);
            // A share of riders brake to a crawl mid-scene and recover
            // without ever standing still, as happens when yielding or
            // checking traffic. Drawn before the placement test so scenes
            // too short for a dip consume the same random stream.
            let hesitate = rng.gen::<f64>() < HESITATION_PROB;
            let half_span_s = uniform(rng, HESITATION_HALF_SPAN_S);
            let floor_frac = uniform(rng, HESITATION_FLOOR_FRAC);
            let center_lo = LEAD_MIN_S + half_span_s;
            let center_hi = duration_s - TAIL_MIN_S - half_span_s;
            let hesitation = (hesitate && center_lo < center_hi).then(|| Hesitation {
                center_s: uniform(rng, (center_lo, center_hi)),
                half_span_s,
                floor_frac,
            });
            Ok((
                MotionPlan {
                    duration_s,
                    origin,
                    heading0,
                    curvature,
                    sway,
                    kind: PlanKind::Cruise {
                        v_ss,
                        perturb_amp,
                        perturb_omega: 2.0 * core::f64::consts::PI / period,
                        perturb_phase,
                        hesitation,
                    },
                },
                "",
            ))
        }
        MotionState::Starting | MotionState::Stopping => {
            let v_base = uniform(rng, spec.pedestrian_speed);
            let v_ss = v_base * multiplier;
            let family = if rng.gen::<f64>() < 0.5 {
                RampFamily::Logistic { tau: uniform(rng, spec.tau) }
            } else {
                // Acceleration scales with the speed multiplier so ramp
                // time stays at pedestrian scale.
                RampFamily::ConstantAccel { accel: uniform(rng, spec.accel) * multiplier }
            };
            let span = family.span(v_ss);
            let needed = LEAD_MIN_S + span + TAIL_MIN_S;
            if needed > spec.duration_s.1 {
                return Err(SynthError::InfeasibleSpec {
                    needed_s: needed,
                    max_s: spec.duration_s.1,
                });
            }
            let duration_s = uniform(rng, (spec.duration_s.0.max(needed), spec.duration_s.1));
            let slack = duration_s - needed;
            let lead = LEAD_MIN_S + uniform(rng, (0.0, slack));
            let kind = if class == MotionState::Starting {
                PlanKind::SpeedUp { v_ss, onset_s: lead, family }
            } else {
                PlanKind::SlowDown { v_ss, onset_s: lead, family }
            };
            Ok((
                MotionPlan { duration_s, origin, heading0, curvature: 0.0, sway, kind },
                family.tag(),
            ))
        }
    }
}

/// Generates the full corpus: `counts` scenes per class, grouped by class
/// in `MotionState` order, each built from an independent seed derived
/// from (`seed`, scene index). Labels and events come from the noiseless
/// positions via the shared labeling rules; noise is added afterwards.
pub fn generate_corpus(spec: &CorpusSpec, seed: u64) -> Result<Vec<Scene>, SynthError> {
    spec.validate()?;
    let dt = 1.0 / spec.sample_rate_hz;
    let label_cfg = LabelConfig::default();
    let mut scenes = Vec::with_capacity(spec.total_scenes());
    let mut scene_index = 0u64;
    for class in MotionState::ALL {
        for k in 0..spec.counts[class.index()] {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, scene_index));
            let (plan, family_tag) = draw_plan(&mut rng, spec, class)?;

            let n = math::round(plan.duration_s * spec.sample_rate_hz) as usize + 1;
            let clean = integrate_positions(|t| plan.velocity(t), plan.origin, n, dt);
            let timestamps: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();

            let clean_traj = Trajectory::new(timestamps.clone(), clean.clone())?;
            let outcome = auto_label(&clean_traj, &label_cfg)?;

            let positions = if spec.position_noise_std > 0.0 {
                clean
                    .into_iter()
                    .map(|p| {
                        [
                            p[0] + spec.position_noise_std * gauss(&mut rng),
                            p[1] + spec.position_noise_std * gauss(&mut rng),
                        ]
                    })
                    .collect()
            } else {
                clean
            };

            let mut id = format!("{}-{k:04}", class_prefix(class));
            if !family_tag.is_empty() {
                id.push('-');
                id.push_str(family_tag);
            }

            scenes.push(Scene::new(
                id,
                class,
                spec.sample_rate_hz,
                Trajectory::new(timestamps, positions)?,
                outcome.states,
                outcome.events,
            )?);
            scene_index += 1;
        }
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::raw_speed;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            counts: [3, 3, 3, 3],
            ..CorpusSpec::default()
        }
    }

    fn noiseless_spec() -> CorpusSpec {
        CorpusSpec { position_noise_std: 0.0, ..small_spec() }
    }

    #[test]
    fn same_seed_reproduces_the_corpus_exactly() {
        let spec = small_spec();
        let a = generate_corpus(&spec, 42).unwrap();
        let b = generate_corpus(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corpus_has_the_requested_composition() {
        let spec = small_spec();
        let scenes = generate_corpus(&spec, 7).unwrap();
        assert_eq!(scenes.len(), 12);
        for class in MotionState::ALL {
            let n = scenes.iter().filter(|s| s.scene_class() == class).count();
            assert_eq!(n, 3, "{class}");
        }
        let mut ids: Vec<&str> = scenes.iter().map(|s| s.scene_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 12, "scene ids must be unique");
        for scene in &scenes {
            let dur = scene.trajectory().timestamps().last().unwrap()
                - scene.trajectory().timestamps()[0];
            assert!((3.99..=10.01).contains(&dur), "duration {dur}");
            assert_eq!(scene.sample_rate_hz(), 50.0);
        }
    }

    #[test]
    fn noiseless_scenes_relabel_to_exactly_the_stored_truth() {
        let scenes = generate_corpus(&noiseless_spec(), 11).unwrap();
        for scene in &scenes {
            let outcome = auto_label(scene.trajectory(), &LabelConfig::default()).unwrap();
            assert_eq!(outcome.states, scene.state_labels(), "{}", scene.scene_id());
            assert_eq!(&outcome.events, scene.events(), "{}", scene.scene_id());
        }
    }

    #[test]
    fn transition_scenes_carry_events_and_steady_tails() {
        let scenes = generate_corpus(&noiseless_spec(), 3).unwrap();
        for scene in &scenes {
            match scene.scene_class() {
                MotionState::Starting | MotionState::Stopping => {
                    let start = scene.events().start_reference().expect("event");
                    let end = scene.events().end_reference().expect("event");
                    assert!(start < end, "{}", scene.scene_id());
                    // Both transition phases observable: some lead-in and
                    // some follow-up inside the scene.
                    let dur = *scene.trajectory().timestamps().last().unwrap();
                    assert!(start > 0.5 && end < dur - 0.5, "{}", scene.scene_id());
                }
                _ => assert!(scene.events().is_empty(), "{}", scene.scene_id()),
            }
        }
    }

    #[test]
    fn labels_follow_the_allowed_state_graph() {
        let scenes = generate_corpus(&small_spec(), 19).unwrap();
        for scene in &scenes {
            for pair in scene.state_labels().windows(2) {
                assert!(
                    pair[0].can_transition_to(pair[1]),
                    "{}: {} -> {}",
                    scene.scene_id(),
                    pair[0],
                    pair[1]
                );
            }
            // The scene class actually occurs in its labels.
            assert!(
                scene.state_labels().contains(&scene.scene_class()),
                "{}",
                scene.scene_id()
            );
        }
    }

    #[test]
    fn moving_scene_speeds_stay_inside_the_configured_range() {
        let spec = CorpusSpec {
            counts: [0, 0, 8, 0],
            cyclist_fraction: 0.0,
            position_noise_std: 0.0,
            ..CorpusSpec::default()
        };
        let scenes = generate_corpus(&spec, 5).unwrap();
        // Hesitation dips may undercut the configured floor, but never by
        // more than the dip floor fraction, and never anywhere near the
        // standstill cut: every moving frame stays genuinely in motion.
        let dip_floor = HESITATION_FLOOR_FRAC.0 * 0.99;
        let mut below_configured_floor = 0usize;
        for scene in &scenes {
            let speed = raw_speed(scene.trajectory());
            for (i, &s) in speed.iter().enumerate() {
                assert!(
                    (dip_floor..=2.01).contains(&s),
                    "{} sample {i}: speed {s}",
                    scene.scene_id()
                );
                assert!(s > 4.0 * SPEED_CUT, "never standstill-like: {s}");
                if s < 0.99 {
                    below_configured_floor += 1;
                }
            }
        }
        // Some scenes hesitate, so dips below the cruise range must occur.
        assert!(below_configured_floor > 0, "expected hesitation dips");
    }

    #[test]
    fn cyclists_scale_the_speed_range() {
        let spec = CorpusSpec {
            counts: [0, 0, 8, 0],
            cyclist_fraction: 1.0,
            position_noise_std: 0.0,
            ..CorpusSpec::default()
        };
        let scenes = generate_corpus(&spec, 5).unwrap();
        for scene in &scenes {
            let speed = raw_speed(scene.trajectory());
            let max = speed.iter().cloned().fold(0.0, f64::max);
            assert!((2.0..=6.01).contains(&max), "{}: {max}", scene.scene_id());
        }
    }

    #[test]
    fn standstill_jitter_stays_far_below_the_motion_threshold() {
        let spec = CorpusSpec {
            counts: [6, 0, 0, 0],
            position_noise_std: 0.0,
            ..CorpusSpec::default()
        };
        let scenes = generate_corpus(&spec, 23).unwrap();
        for scene in &scenes {
            let speed = raw_speed(scene.trajectory());
            let max = speed.iter().cloned().fold(0.0, f64::max);
            assert!(max < 0.1, "{}: {max}", scene.scene_id());
            assert!(max < 0.3, "spec ceiling");
        }
    }

    #[test]
    fn positions_integrate_the_profile_to_high_accuracy() {
        // Oracle: the closed-form logistic displacement from the physical
        // model matches the generator's quadrature on the same profile.
        let profile = crate::gated::LogisticProfile {
            kind: crate::gated::LogisticKind::Starting,
            v_ss: 1.7,
            tau: 0.33,
            t0: 2.0,
        };
        let n = 301;
        let dt = 0.02;
        let positions =
            integrate_positions(|t| [profile.speed_at(t), 0.0], [0.0, 0.0], n, dt);
        for (k, p) in positions.iter().enumerate() {
            let truth = profile.displacement(k as f64 * dt);
            assert!((p[0] - truth).abs() < 1e-9, "sample {k}: {} vs {truth}", p[0]);
        }

        // Independent composite-Simpson oracle on an oscillatory field.
        let field = |t: f64| [math::sin(1.3 * t), math::cos(0.7 * t) * 0.5];
        let positions = integrate_positions(field, [1.0, -1.0], 201, dt);
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let m = 4096;
            let h = (b - a) / m as f64;
            let mut sum = f(a) + f(b);
            for i in 1..m {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * f(a + i as f64 * h);
            }
            sum * h / 3.0
        };
        let end = 200.0 * dt;
        let sx = 1.0 + simpson(&|t| field(t)[0], 0.0, end);
        let sy = -1.0 + simpson(&|t| field(t)[1], 0.0, end);
        let last = positions[200];
        assert!((last[0] - sx).abs() < 1e-9, "{} vs {sx}", last[0]);
        assert!((last[1] - sy).abs() < 1e-9, "{} vs {sy}", last[1]);
    }

    #[test]
    fn noise_perturbs_positions_but_not_the_truth() {
        let clean_scenes = generate_corpus(&noiseless_spec(), 31).unwrap();
        let noisy_scenes = generate_corpus(&small_spec(), 31).unwrap();
        for (clean, noisy) in clean_scenes.iter().zip(&noisy_scenes) {
            assert_eq!(clean.scene_id(), noisy.scene_id());
            // Same profile draws: labels and events are identical.
            assert_eq!(clean.state_labels(), noisy.state_labels());
            assert_eq!(clean.events(), noisy.events());
            // But the stored positions differ by roughly the noise scale.
            let max_dev = clean
                .trajectory()
                .positions()
                .iter()
                .zip(noisy.trajectory().positions())
                .map(|(a, b)| math::hypot(a[0] - b[0], a[1] - b[1]))
                .fold(0.0, f64::max);
            assert!(max_dev > 1e-4, "{}: no noise applied", clean.scene_id());
            assert!(max_dev < 0.2, "{}: noise implausibly large {max_dev}", clean.scene_id());
        }
    }

    #[test]
    fn too_short_durations_are_rejected() {
        let spec = CorpusSpec {
            duration_s: (2.0, 2.5),
            ..small_spec()
        };
        assert!(matches!(
            generate_corpus(&spec, 1),
            Err(SynthError::InfeasibleSpec { .. })
        ));

        // Waiting/moving-only corpora do not need ramp room.
        let spec = CorpusSpec {
            counts: [2, 0, 2, 0],
            duration_s: (2.0, 2.5),
            ..CorpusSpec::default()
        };
        assert!(generate_corpus(&spec, 1).is_ok());
    }

    #[test]
    fn bad_specs_are_rejected_with_diagnostics() {
        let mut spec = small_spec();
        spec.standstill_jitter_speed = 0.2; // sway would cross the threshold
        assert!(matches!(generate_corpus(&spec, 1), Err(SynthError::BadSpec { .. })));

        let mut spec = small_spec();
        spec.pedestrian_speed = (2.0, 1.0);
        assert!(matches!(generate_corpus(&spec, 1), Err(SynthError::BadSpec { .. })));

        let mut spec = small_spec();
        spec.cyclist_fraction = 1.5;
        assert!(matches!(generate_corpus(&spec, 1), Err(SynthError::BadSpec { .. })));
    }

    #[test]
    fn starting_scenes_really_start_and_stopping_scenes_really_stop() {
        let scenes = generate_corpus(&noiseless_spec(), 59).unwrap();
        for scene in &scenes {
            let speed = raw_speed(scene.trajectory());
            match scene.scene_class() {
                MotionState::Starting => {
                    assert!(speed[1] < 0.1, "{} begins at rest", scene.scene_id());
                    assert!(
                        speed[speed.len() - 1] > 0.9,
                        "{} ends in motion",
                        scene.scene_id()
                    );
                }
                MotionState::Stopping => {
                    assert!(speed[1] > 0.9, "{} begins in motion", scene.scene_id());
                    assert!(
                        speed[speed.len() - 1] < 0.1,
                        "{} ends at rest",
                        scene.scene_id()
                    );
                }
                _ => {}
            }
        }
    }
}
