//! Kalman-filter baselines: a constant-velocity (CV) filter for trajectory
//! extrapolation and a constant-position/constant-velocity (CP/CV)
//! interacting-multiple-model (IMM) filter whose CV-model probability
//! separates standing from moving.
//!
//! Both filters consume raw measured positions — they do their own
//! filtering, so the exponential pre-smoothing used by the feature pipeline
//! is deliberately not applied here.

use alloc::vec::Vec;

use crate::math;
use crate::traj::MotionState;

const TWO_PI: f64 = core::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub enum KalmanError {
    BadConfig { what: &'static str },
    NonFiniteMeasurement,
    BadDt { dt: f64 },
    NotReady { updates: usize },
}

impl core::fmt::Display for KalmanError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KalmanError::BadConfig { what } => write!(f, "invalid filter config: {what}"),
            KalmanError::NonFiniteMeasurement => f.write_str("measurement is not finite"),
            KalmanError::BadDt { dt } => write!(f, "time step {dt} s is invalid"),
            KalmanError::NotReady { updates } => {
                write!(f, "filter needs at least 2 updates, has {updates}")
            }
        }
    }
}

impl core::error::Error for KalmanError {}

/// Constant-velocity filter parameters. `q` is the white-noise
/// acceleration intensity (m^2/s^3); `r_std` the position measurement
/// noise standard deviation (m); `init_velocity_var` the velocity variance
/// assumed when the first measurement initializes the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfConfig {
    pub q: f64,
    pub r_std: f64,
    pub init_velocity_var: f64,
}

impl Default for KfConfig {
    fn default() -> Self {
        Self { q: 0.5, r_std: 0.02, init_velocity_var: 25.0 }
    }
}

impl KfConfig {
    fn validate(&self) -> Result<(), KalmanError> {
        if !self.q.is_finite() || self.q < 0.0 {
            return Err(KalmanError::BadConfig { what: "q must be finite and >= 0" });
        }
        if !self.r_std.is_finite() || self.r_std <= 0.0 {
            return Err(KalmanError::BadConfig { what: "r_std must be finite and > 0" });
        }
        if !self.init_velocity_var.is_finite() || self.init_velocity_var < 0.0 {
            return Err(KalmanError::BadConfig {
                what: "init_velocity_var must be finite and >= 0",
            });
        }
        Ok(())
    }
}

fn check_measurement(z: [f64; 2]) -> Result<(), KalmanError> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KalmanError::NonFiniteMeasurement)
    }
}

fn check_dt(dt: f64) -> Result<(), KalmanError> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(KalmanError::BadDt { dt })
    }
}

/// Inverse and determinant of a symmetric positive 2x2 matrix.
fn inv2(s: [[f64; 2]; 2]) -> ([[f64; 2]; 2], f64) {
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let inv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    (inv, det)
}

/// Gaussian measurement likelihood for innovation `nu` with covariance `s`.
fn gaussian_likelihood(nu: [f64; 2], s: [[f64; 2]; 2]) -> f64 {
    let (si, det) = inv2(s);
    if !det.is_finite() || det <= 0.0 {
        return 0.0;
    }
    let quad = nu[0] * (si[0][0] * nu[0] + si[0][1] * nu[1])
        + nu[1] * (si[1][0] * nu[0] + si[1][1] * nu[1]);
    math::exp(-0.5 * quad) / (TWO_PI * math::sqrt(det))
}

/// Constant-velocity Kalman filter over state (x, y, vx, vy) with position
/// measurements. Covariance updates use the Joseph form and re-symmetrize,
/// keeping the matrix symmetric positive-definite over long runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CvKf {
    q: f64,
    r: f64,
    init_velocity_var: f64,
    x: [f64; 4],
    p: [[f64; 4]; 4],
    updates: usize,
}

impl CvKf {
    pub fn new(config: &KfConfig) -> Result<Self, KalmanError> {
        config.validate()?;
        Ok(Self {
            q: config.q,
            r: config.r_std * config.r_std,
            init_velocity_var: config.init_velocity_var,
            x: [0.0; 4],
            p: [[0.0; 4]; 4],
            updates: 0,
        })
    }

    /// State mean (x, y, vx, vy).
    pub fn state(&self) -> [f64; 4] {
        self.x
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.x[2], self.x[3]]
    }

    pub fn covariance(&self) -> [[f64; 4]; 4] {
        self.p
    }

    pub fn update_count(&self) -> usize {
        self.updates
    }

    /// Trajectory prediction needs a velocity estimate, which takes two
    /// position updates to form.
    pub fn is_ready(&self) -> bool {
        self.updates >= 2
    }

    /// One filter cycle: predict over `dt`, then fuse the measured
    /// position. The first call initializes the state instead.
    pub fn step(&mut self, measurement: [f64; 2], dt: f64) -> Result<(), KalmanError> {
        check_measurement(measurement)?;
        check_dt(dt)?;
        if self.updates == 0 {
            self.x = [measurement[0], measurement[1], 0.0, 0.0];
            self.p = [[0.0; 4]; 4];
            self.p[0][0] = self.r;
            self.p[1][1] = self.r;
            self.p[2][2] = self.init_velocity_var;
            self.p[3][3] = self.init_velocity_var;
            self.updates = 1;
            return Ok(());
        }
        self.predict(dt);
        self.update(measurement);
        self.updates += 1;
        Ok(())
    }

    fn predict(&mut self, dt: f64) {
        // x' = F x with F the CV transition.
        self.x[0] += dt * self.x[2];
        self.x[1] += dt * self.x[3];
        // P' = F P F^T + Q.
        let f = cv_transition(dt);
        self.p = mat4_mul(&mat4_mul(&f, &self.p), &mat4_transpose(&f));
        let (q3, q2, q1) = (
            self.q * dt * dt * dt / 3.0,
            self.q * dt * dt / 2.0,
            self.q * dt,
        );
        for (pos, vel) in [(0, 2), (1, 3)] {
            self.p[pos][pos] += q3;
            self.p[pos][vel] += q2;
            self.p[vel][pos] += q2;
            self.p[vel][vel] += q1;
        }
    }

    fn update(&mut self, z: [f64; 2]) {
        let _ = self.update_with_likelihood(z);
    }

    /// Measurement update returning the Gaussian innovation likelihood
    /// (used by the IMM mixing weights).
    fn update_with_likelihood(&mut self, z: [f64; 2]) -> f64 {
        // H picks the position block, so S = P[0..2][0..2] + R.
        let s = [
            [self.p[0][0] + self.r, self.p[0][1]],
            [self.p[1][0], self.p[1][1] + self.r],
        ];
        let nu = [z[0] - self.x[0], z[1] - self.x[1]];
        let likelihood = gaussian_likelihood(nu, s);
        let (si, _) = inv2(s);
        // K = P H^T S^{-1}: 4x2.
        let mut k = [[0.0; 2]; 4];
        for (row, krow) in k.iter_mut().enumerate() {
            for (col, kv) in krow.iter_mut().enumerate() {
                *kv = self.p[row][0] * si[0][col] + self.p[row][1] * si[1][col];
            }
        }
        for (row, krow) in k.iter().enumerate() {
            self.x[row] += krow[0] * nu[0] + krow[1] * nu[1];
        }
        // Joseph form: P = (I-KH) P (I-KH)^T + K R K^T.
        let mut ikh = [[0.0; 4]; 4];
        for (row, irow) in ikh.iter_mut().enumerate() {
            irow[row] = 1.0;
            irow[0] -= k[row][0];
            irow[1] -= k[row][1];
        }
        let mut p = mat4_mul(&mat4_mul(&ikh, &self.p), &mat4_transpose(&ikh));
        for row in 0..4 {
            for col in 0..4 {
                p[row][col] += self.r * (k[row][0] * k[col][0] + k[row][1] * k[col][1]);
            }
        }
        symmetrize4(&mut p);
        self.p = p;
        likelihood
    }

    /// Positions extrapolated linearly at the current velocity estimate,
    /// at the given offsets (seconds from the last update).
    pub fn predict_trajectory(&self, offsets_s: &[f64]) -> Result<Vec<[f64; 2]>, KalmanError> {
        if !self.is_ready() {
            return Err(KalmanError::NotReady { updates: self.updates });
        }
        if offsets_s.iter().any(|t| !t.is_finite()) {
            return Err(KalmanError::BadDt { dt: f64::NAN });
        }
        Ok(offsets_s
            .iter()
            .map(|&t| [self.x[0] + t * self.x[2], self.x[1] + t * self.x[3]])
            .collect())
    }
}

fn cv_transition(dt: f64) -> [[f64; 4]; 4] {
    let mut f = [[0.0; 4]; 4];
    for (row, frow) in f.iter_mut().enumerate() {
        frow[row] = 1.0;
    }
    f[0][2] = dt;
    f[1][3] = dt;
    f
}

fn mat4_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (row, orow) in out.iter_mut().enumerate() {
        for col in 0..4 {
            orow[col] = (0..4).map(|k| a[row][k] * b[k][col]).sum();
        }
    }
    out
}

fn mat4_transpose(a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (row, arow) in a.iter().enumerate() {
        for (col, v) in arow.iter().enumerate() {
            out[col][row] = *v;
        }
    }
    out
}

#[allow(clippy::needless_range_loop)] // triangular index pairs
fn symmetrize4(p: &mut [[f64; 4]; 4]) {
    for row in 0..4 {
        for col in row + 1..4 {
            let m = 0.5 * (p[row][col] + p[col][row]);
            p[row][col] = m;
            p[col][row] = m;
        }
    }
}

fn symmetrize2(p: &mut [[f64; 2]; 2]) {
    let m = 0.5 * (p[0][1] + p[1][0]);
    p[0][1] = m;
    p[1][0] = m;
}

/// Constant-position Kalman filter over (x, y): a random walk with
/// intensity `q_cp` (m^2/s) and direct position measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct CpKf {
    q: f64,
    r: f64,
    x: [f64; 2],
    p: [[f64; 2]; 2],
    updates: usize,
}

impl CpKf {
    pub fn new(q_cp: f64, r_std: f64) -> Result<Self, KalmanError> {
        if !q_cp.is_finite() || q_cp < 0.0 {
            return Err(KalmanError::BadConfig { what: "q_cp must be finite and >= 0" });
        }
        if !r_std.is_finite() || r_std <= 0.0 {
            return Err(KalmanError::BadConfig { what: "r_std must be finite and > 0" });
        }
        Ok(Self { q: q_cp, r: r_std * r_std, x: [0.0; 2], p: [[0.0; 2]; 2], updates: 0 })
    }

    pub fn state(&self) -> [f64; 2] {
        self.x
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.p
    }

    pub fn step(&mut self, measurement: [f64; 2], dt: f64) -> Result<(), KalmanError> {
        check_measurement(measurement)?;
        check_dt(dt)?;
        if self.updates == 0 {
            self.x = measurement;
            self.p = [[self.r, 0.0], [0.0, self.r]];
            self.updates = 1;
            return Ok(());
        }
        self.p[0][0] += self.q * dt;
        self.p[1][1] += self.q * dt;
        self.update_with_likelihood(measurement);
        self.updates += 1;
        Ok(())
    }

    fn update_with_likelihood(&mut self, z: [f64; 2]) -> f64 {
        let s = [
            [self.p[0][0] + self.r, self.p[0][1]],
            [self.p[1][0], self.p[1][1] + self.r],
        ];
        let nu = [z[0] - self.x[0], z[1] - self.x[1]];
        let likelihood = gaussian_likelihood(nu, s);
        let (si, _) = inv2(s);
        let mut k = [[0.0; 2]; 2];
        for (row, krow) in k.iter_mut().enumerate() {
            for (col, kv) in krow.iter_mut().enumerate() {
                *kv = self.p[row][0] * si[0][col] + self.p[row][1] * si[1][col];
            }
        }
        self.x[0] += k[0][0] * nu[0] + k[0][1] * nu[1];
        self.x[1] += k[1][0] * nu[0] + k[1][1] * nu[1];
        let ikh = [
            [1.0 - k[0][0], -k[0][1]],
            [-k[1][0], 1.0 - k[1][1]],
        ];
        // Joseph form in 2D.
        let mut p = [[0.0; 2]; 2];
        for row in 0..2 {
            for col in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += ikh[row][a] * self.p[a][b] * ikh[col][b];
                    }
                }
                acc += self.r * (k[row][0] * k[col][0] + k[row][1] * k[col][1]);
                p[row][col] = acc;
            }
        }
        symmetrize2(&mut p);
        self.p = p;
        likelihood
    }
}

/// IMM filter parameters. `pi` is the Markov model-transition matrix in
/// (CP, CV) order; `mixing_velocity_var` the velocity variance assigned to
/// the CP state when it is embedded into CV space for mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmConfig {
    pub q_cp: f64,
    pub q_cv: f64,
    pub r_std: f64,
    pub pi: [[f64; 2]; 2],
    pub priors: [f64; 2],
    pub init_velocity_var: f64,
    pub mixing_velocity_var: f64,
}

impl Default for ImmConfig {
    fn default() -> Self {
        Self {
            q_cp: 1e-4,
            q_cv: 2.0,
            r_std: 0.02,
            pi: [[0.99, 0.01], [0.01, 0.99]],
            priors: [0.5, 0.5],
            init_velocity_var: 25.0,
            mixing_velocity_var: 0.25,
        }
    }
}

impl ImmConfig {
    fn validate(&self) -> Result<(), KalmanError> {
        for row in &self.pi {
            let sum: f64 = row.iter().sum();
            if math::abs(sum - 1.0) > 1e-9 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(KalmanError::BadConfig { what: "pi rows must be probabilities summing to 1" });
            }
        }
        let psum: f64 = self.priors.iter().sum();
        if math::abs(psum - 1.0) > 1e-9 || self.priors.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(KalmanError::BadConfig { what: "priors must be probabilities summing to 1" });
        }
        if !self.mixing_velocity_var.is_finite() || self.mixing_velocity_var < 0.0 {
            return Err(KalmanError::BadConfig { what: "mixing_velocity_var must be >= 0" });
        }
        Ok(())
    }
}

/// Model indices within the IMM.
const CP: usize = 0;
const CV: usize = 1;

/// Interacting-multiple-model filter over a constant-position and a
/// constant-velocity hypothesis. The CV-model probability is the
/// standing-vs-moving evidence used by [`ImmFilter::classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImmFilter {
    config: ImmConfig,
    cp: CpKf,
    cv: CvKf,
    mu: [f64; 2],
    updates: usize,
    likelihood_resets: usize,
}

impl ImmFilter {
    pub fn new(config: ImmConfig) -> Result<Self, KalmanError> {
        config.validate()?;
        let cp = CpKf::new(config.q_cp, config.r_std)?;
        let cv = CvKf::new(&KfConfig {
            q: config.q_cv,
            r_std: config.r_std,
            init_velocity_var: config.init_velocity_var,
        })?;
        let mu = config.priors;
        Ok(Self { config, cp, cv, mu, updates: 0, likelihood_resets: 0 })
    }

    /// Model probabilities (CP, CV).
    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn mu_cv(&self) -> f64 {
        self.mu[CV]
    }

    pub fn cp(&self) -> &CpKf {
        &self.cp
    }

    pub fn cv(&self) -> &CvKf {
        &self.cv
    }

    /// How often a numerically zero total likelihood forced the model
    /// probabilities back to their priors.
    pub fn likelihood_resets(&self) -> usize {
        self.likelihood_resets
    }

    /// One IMM cycle: mix model-conditioned states, run both filters,
    /// reweigh the model probabilities by their measurement likelihoods.
    pub fn step(&mut self, measurement: [f64; 2], dt: f64) -> Result<(), KalmanError> {
        check_measurement(measurement)?;
        check_dt(dt)?;
        if self.updates == 0 {
            self.cp.step(measurement, dt)?;
            self.cv.step(measurement, dt)?;
            self.mu = self.config.priors;
            self.updates = 1;
            return Ok(());
        }

        // Mixing: c_j = sum_i pi[i][j] mu[i]; weights mu_{i|j}.
        let pi = &self.config.pi;
        let c = [
            pi[CP][CP] * self.mu[CP] + pi[CV][CP] * self.mu[CV],
            pi[CP][CV] * self.mu[CP] + pi[CV][CV] * self.mu[CV],
        ];
        // A model with zero inbound weight, or whose mixed state would be
        // entirely its own, keeps its state untouched — this makes the
        // single-model degenerate case run the plain filter bit-for-bit.
        let (mixed_cp, mixed_cv) = {
            let w_cp = if c[CP] > 0.0 {
                Some([pi[CP][CP] * self.mu[CP] / c[CP], pi[CV][CP] * self.mu[CV] / c[CP]])
            } else {
                None
            };
            let w_cv = if c[CV] > 0.0 {
                Some([pi[CP][CV] * self.mu[CP] / c[CV], pi[CV][CV] * self.mu[CV] / c[CV]])
            } else {
                None
            };
            let lifted = self.lift_cp();
            let mixed_cp = match w_cp {
                Some(w) if w[CP] != 1.0 => Some(self.mix_into_cp(w)),
                _ => None,
            };
            let mixed_cv = match w_cv {
                Some(w) if w[CV] != 1.0 => Some(Self::mix_into_cv(&lifted, &self.cv, w)),
                _ => None,
            };
            (mixed_cp, mixed_cv)
        };
        if let Some((x, p)) = mixed_cp {
            self.cp.x = x;
            self.cp.p = p;
        }
        if let Some((x, p)) = mixed_cv {
            self.cv.x = x;
            self.cv.p = p;
        }

        // Model-conditioned filter cycles.
        self.cp.p[0][0] += self.cp.q * dt;
        self.cp.p[1][1] += self.cp.q * dt;
        let l_cp = self.cp.update_with_likelihood(measurement);
        self.cp.updates += 1;
        self.cv.predict(dt);
        let l_cv = self.cv.update_with_likelihood(measurement);
        self.cv.updates += 1;

        // Model probability update.
        let weighted = [c[CP] * l_cp, c[CV] * l_cv];
        let total = weighted[0] + weighted[1];
        if total > 0.0 && total.is_finite() {
            self.mu = [weighted[0] / total, weighted[1] / total];
        } else {
            self.mu = self.config.priors;
            self.likelihood_resets += 1;
        }
        self.updates += 1;
        Ok(())
    }

    /// CP state embedded into CV space: zero velocity with the configured
    /// velocity variance.
    fn lift_cp(&self) -> ([f64; 4], [[f64; 4]; 4]) {
        let x = [self.cp.x[0], self.cp.x[1], 0.0, 0.0];
        let mut p = [[0.0; 4]; 4];
        for (dst, src) in p.iter_mut().zip(&self.cp.p) {
            dst[..2].copy_from_slice(src);
        }
        p[2][2] = self.config.mixing_velocity_var;
        p[3][3] = self.config.mixing_velocity_var;
        (x, p)
    }

    /// Moment-matched mixture of (lifted CP, CV) states with weights `w`,
    /// expressed in CV space.
    fn mix_into_cv(
        lifted_cp: &([f64; 4], [[f64; 4]; 4]),
        cv: &CvKf,
        w: [f64; 2],
    ) -> ([f64; 4], [[f64; 4]; 4]) {
        let parts = [(w[CP], &lifted_cp.0, &lifted_cp.1), (w[CV], &cv.x, &cv.p)];
        let mut x = [0.0; 4];
        for (wi, xi, _) in parts {
            for (acc, v) in x.iter_mut().zip(xi) {
                *acc += wi * v;
            }
        }
        let mut p = [[0.0; 4]; 4];
        for (wi, xi, pi) in parts {
            for row in 0..4 {
                for col in 0..4 {
                    let spread = (xi[row] - x[row]) * (xi[col] - x[col]);
                    p[row][col] += wi * (pi[row][col] + spread);
                }
            }
        }
        symmetrize4(&mut p);
        (x, p)
    }

    /// Moment-matched mixture expressed in CP space (positions only).
    fn mix_into_cp(&self, w: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let cv_pos = [self.cv.x[0], self.cv.x[1]];
        let cv_pp = [
            [self.cv.p[0][0], self.cv.p[0][1]],
            [self.cv.p[1][0], self.cv.p[1][1]],
        ];
        let parts = [(w[CP], self.cp.x, self.cp.p), (w[CV], cv_pos, cv_pp)];
        let mut x = [0.0; 2];
        for (wi, xi, _) in parts {
            x[0] += wi * xi[0];
            x[1] += wi * xi[1];
        }
        let mut p = [[0.0; 2]; 2];
        for (wi, xi, pi) in parts {
            for row in 0..2 {
                for col in 0..2 {
                    let spread = (xi[row] - x[row]) * (xi[col] - x[col]);
                    p[row][col] += wi * (pi[row][col] + spread);
                }
            }
        }
        symmetrize2(&mut p);
        (x, p)
    }

    /// Binary standing/moving decision from the CV-model probability.
    pub fn classify(&self, threshold_cv: f64) -> MotionState {
        if self.mu[CV] >= threshold_cv {
            MotionState::Moving
        } else {
            MotionState::Waiting
        }
    }
}
