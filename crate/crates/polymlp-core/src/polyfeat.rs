//! Sliding-window features on discrete orthonormal polynomial bases.
//!
//! A window covering `[offset, offset+length)` seconds relative to the
//! current sample is approximated by a least-squares polynomial. With an
//! orthonormal basis over the window's sample points the coefficients are
//! plain dot products, and they carry physical meaning (window mean, mean
//! slope, curvature, ...). Input features fit body-frame velocities over
//! past windows; prediction targets fit future ego positions over future
//! windows.
//!
//! Each window maps its time range affinely onto `u in [-1, 1]`; bases are
//! built by Gram-Schmidt with re-orthogonalization over the discrete sample
//! points. Coefficients therefore do not depend on the sample rate used to
//! fit them, and reconstruction can evaluate the window polynomials at any
//! query time.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Comparison slack (seconds) when assigning samples/queries to windows.
const TIME_EPS: f64 = 1e-9;

/// Residual norm below which a window's sample grid is degenerate.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PolyError {
    EmptyWindows,
    BadDims { dims: usize },
    BadDt { dt: f64 },
    BadWindow { index: usize },
    NotContiguous { index: usize },
    NotAnchored { side: WindowSide },
    DegreeTooHigh { degree: usize, samples: usize },
    DegenerateGrid,
    EmptySeries,
    SeriesLengthMismatch,
    DimCountMismatch { expected: usize, got: usize },
    PatternUnavailable { now: usize },
    CoeffLenMismatch { expected: usize, got: usize },
    QueryOutsideWindows { time: f64 },
}

impl core::fmt::Display for PolyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PolyError::EmptyWindows => f.write_str("window list is empty"),
            PolyError::BadDims { dims } => write!(f, "dimension count {dims} is invalid"),
            PolyError::BadDt { dt } => write!(f, "sample spacing {dt} s is invalid"),
            PolyError::BadWindow { index } => write!(f, "window {index} has invalid extent or degree"),
            PolyError::NotContiguous { index } => {
                write!(f, "window {index} does not start where the previous one ends")
            }
            PolyError::NotAnchored { side } => match side {
                WindowSide::Past => f.write_str("past windows must end at the current sample"),
                WindowSide::Future => f.write_str("future windows must begin at the current sample"),
            },
            PolyError::DegreeTooHigh { degree, samples } => {
                write!(f, "degree {degree} needs more than {samples} samples")
            }
            PolyError::DegenerateGrid => f.write_str("sample grid is degenerate"),
            PolyError::EmptySeries => f.write_str("series is empty"),
            PolyError::SeriesLengthMismatch => f.write_str("per-dimension series lengths differ"),
            PolyError::DimCountMismatch { expected, got } => {
                write!(f, "expected {expected} series dimensions, got {got}")
            }
            PolyError::PatternUnavailable { now } => {
                write!(f, "window samples around index {now} fall outside the series")
            }
            PolyError::CoeffLenMismatch { expected, got } => {
                write!(f, "expected {expected} coefficients, got {got}")
            }
            PolyError::QueryOutsideWindows { time } => {
                write!(f, "query time {time} s lies outside every window")
            }
        }
    }
}

impl core::error::Error for PolyError {}

/// Whether a window layout looks backward or forward from the current
/// sample. The side fixes boundary bucketing: past windows are
/// `[start, end)` with the last window closed (the current sample belongs
/// to the last window); future windows are `(start, end]`, i.e. boundary
/// times belong to the earlier window and the current sample is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSide {
    Past,
    Future,
}

impl core::fmt::Display for WindowSide {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            WindowSide::Past => "past",
            WindowSide::Future => "future",
        })
    }
}

/// One approximation window: `[offset, offset+length)` seconds relative to
/// the current sample, fitted with a polynomial of `degree`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub offset_s: f64,
    pub length_s: f64,
    pub degree: usize,
}

impl Window {
    pub fn end_s(&self) -> f64 {
        self.offset_s + self.length_s
    }
}

/// A validated window layout applied to `dims` parallel series.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyConfig {
    windows: Vec<Window>,
    dims: usize,
    side: WindowSide,
}

impl PolyConfig {
    /// Windows must be contiguous, non-overlapping, in time order, and
    /// anchored at the current sample (past layouts end at 0, future
    /// layouts begin at 0).
    pub fn new(windows: Vec<Window>, dims: usize, side: WindowSide) -> Result<Self, PolyError> {
        if windows.is_empty() {
            return Err(PolyError::EmptyWindows);
        }
        if dims == 0 {
            return Err(PolyError::BadDims { dims });
        }
        for (i, w) in windows.iter().enumerate() {
            let ok = w.offset_s.is_finite()
                && w.length_s.is_finite()
                && w.length_s > 0.0
                && w.degree <= 16;
            if !ok {
                return Err(PolyError::BadWindow { index: i });
            }
        }
        for i in 1..windows.len() {
            if math::abs(windows[i].offset_s - windows[i - 1].end_s()) > TIME_EPS {
                return Err(PolyError::NotContiguous { index: i });
            }
        }
        let anchored = match side {
            WindowSide::Past => math::abs(windows[windows.len() - 1].end_s()) <= TIME_EPS,
            WindowSide::Future => math::abs(windows[0].offset_s) <= TIME_EPS,
        };
        if !anchored {
            return Err(PolyError::NotAnchored { side });
        }
        Ok(Self { windows, dims, side })
    }

    /// Default input layout: two past velocity windows (800 ms then 200 ms,
    /// both cubic) ending at the current sample, on 2 dimensions
    /// (longitudinal, lateral) — 16 features.
    pub fn input_default() -> Self {
        Self::new(
            vec![
                Window { offset_s: -1.0, length_s: 0.8, degree: 3 },
                Window { offset_s: -0.2, length_s: 0.2, degree: 3 },
            ],
            2,
            WindowSide::Past,
        )
        .expect("default input layout is valid")
    }

    /// Default output layout: five consecutive 500 ms future windows,
    /// quadratic, on 2 dimensions (ego x, y) — 30 coefficients covering a
    /// 2.5 s horizon.
    pub fn output_default() -> Self {
        let windows = (0..5)
            .map(|w| Window { offset_s: 0.5 * w as f64, length_s: 0.5, degree: 2 })
            .collect();
        Self::new(windows, 2, WindowSide::Future).expect("default output layout is valid")
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn side(&self) -> WindowSide {
        self.side
    }

    /// Coefficients per dimension.
    pub fn coeffs_per_dim(&self) -> usize {
        self.windows.iter().map(|w| w.degree + 1).sum()
    }

    /// Total coefficient count over all dimensions.
    pub fn coeff_len(&self) -> usize {
        self.dims * self.coeffs_per_dim()
    }

    /// Seconds spanned by the layout.
    pub fn span_s(&self) -> f64 {
        self.windows[self.windows.len() - 1].end_s() - self.windows[0].offset_s
    }
}

/// Orthonormal polynomial basis rows over the symmetric equispaced grid
/// `u_s = -1 + 2s/(n-1)`: `degree+1` rows of `n` values with
/// `rows[i] . rows[j] = delta_ij`. Row 0 is the constant `1/sqrt(n)`, so
/// coefficient 0 of a fit is `sqrt(n)` times the window mean.
pub fn orth_basis(n_samples: usize, degree: usize) -> Result<Vec<Vec<f64>>, PolyError> {
    if n_samples <= degree {
        return Err(PolyError::DegreeTooHigh { degree, samples: n_samples });
    }
    let us = symmetric_grid(n_samples);
    orthonormal_rows(&us, degree).map(|(rows, _)| rows)
}

fn symmetric_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|s| -1.0 + 2.0 * s as f64 / (n - 1) as f64).collect()
}

/// Gram-Schmidt on the monomials `u^0..u^degree` over the discrete inner
/// product `sum_s f(u_s) g(u_s)`, with a second orthogonalization pass for
/// numerical hygiene. Returns the value rows and the matching monomial
/// coefficient rows (ascending powers of `u`).
#[allow(clippy::type_complexity)]
fn orthonormal_rows(
    us: &[f64],
    degree: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), PolyError> {
    let n = us.len();
    if n <= degree {
        return Err(PolyError::DegreeTooHigh { degree, samples: n });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    let mut mono: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);

    let mut power = vec![1.0; n];
    for j in 0..=degree {
        let mut v = power.clone();
        let mut m = vec![0.0; degree + 1];
        m[j] = 1.0;
        for _pass in 0..2 {
            for i in 0..j {
                let c: f64 = v.iter().zip(&rows[i]).map(|(a, b)| a * b).sum();
                for (vk, rk) in v.iter_mut().zip(&rows[i]) {
                    *vk -= c * rk;
                }
                for (mk, rk) in m.iter_mut().zip(&mono[i]) {
                    *mk -= c * rk;
                }
            }
        }
        let norm = math::sqrt(v.iter().map(|a| a * a).sum());
        if norm.is_nan() || norm <= DEGENERATE_NORM {
            return Err(PolyError::DegenerateGrid);
        }
        for vk in v.iter_mut() {
            *vk /= norm;
        }
        for mk in m.iter_mut() {
            *mk /= norm;
        }
        rows.push(v);
        mono.push(m);
        for (pk, &uk) in power.iter_mut().zip(us) {
            *pk *= uk;
        }
    }
    Ok((rows, mono))
}

/// Least-squares polynomial coefficients of one window's samples in the
/// orthonormal basis of [`orth_basis`]: `coeffs[j] = rows[j] . samples`.
pub fn fit_window(samples: &[f64], degree: usize) -> Result<Vec<f64>, PolyError> {
    if samples.is_empty() {
        return Err(PolyError::EmptySeries);
    }
    let rows = orth_basis(samples.len(), degree)?;
    Ok(rows
        .iter()
        .map(|row| row.iter().zip(samples).map(|(b, y)| b * y).sum())
        .collect())
}

/// One window's basis bound to a sample grid.
#[derive(Debug, Clone, PartialEq)]
struct WindowBasis {
    window: Window,
    /// Sample offsets relative to the current sample: `first_step ..
    /// first_step + n`.
    first_step: i64,
    n: usize,
    rows: Vec<Vec<f64>>,
    mono: Vec<Vec<f64>>,
}

impl WindowBasis {
    fn build(window: Window, dt: f64, side: WindowSide, is_last: bool) -> Result<Self, PolyError> {
        let start = window.offset_s;
        let end = window.end_s();
        let lo = math::floor(start / dt) as i64 - 2;
        let hi = math::ceil(end / dt) as i64 + 2;
        let mut steps: Vec<i64> = Vec::new();
        for r in lo..=hi {
            let t = r as f64 * dt;
            let inside = match side {
                WindowSide::Past => {
                    t >= start - TIME_EPS
                        && if is_last { t <= end + TIME_EPS } else { t < end - TIME_EPS }
                }
                WindowSide::Future => t > start + TIME_EPS && t <= end + TIME_EPS,
            };
            if inside {
                steps.push(r);
            }
        }
        let n = steps.len();
        if n <= window.degree {
            return Err(PolyError::DegreeTooHigh { degree: window.degree, samples: n });
        }
        let us: Vec<f64> = steps.iter().map(|&r| window_u(&window, r as f64 * dt)).collect();
        let (rows, mono) = orthonormal_rows(&us, window.degree)?;
        Ok(Self { window, first_step: steps[0], n, rows, mono })
    }

    /// Coefficients of the series samples around `now`, or
    /// `PatternUnavailable` when the window pokes outside the series.
    fn fit_at(&self, series: &[f64], now: usize) -> Result<Vec<f64>, PolyError> {
        let first = now as i64 + self.first_step;
        let last = first + self.n as i64 - 1;
        if first < 0 || last >= series.len() as i64 {
            return Err(PolyError::PatternUnavailable { now });
        }
        let window = &series[first as usize..=last as usize];
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().zip(window).map(|(b, y)| b * y).sum())
            .collect())
    }

    /// Evaluates the window polynomial (given its basis coefficients) at a
    /// time relative to the current sample.
    fn eval(&self, coeffs: &[f64], t_rel: f64) -> f64 {
        let u = window_u(&self.window, t_rel);
        let deg = self.window.degree;
        // Combine the basis polynomials, then one Horner pass.
        let mut combined = vec![0.0; deg + 1];
        for (c, m) in coeffs.iter().zip(&self.mono) {
            for (ck, mk) in combined.iter_mut().zip(m) {
                *ck += c * mk;
            }
        }
        let mut acc = combined[deg];
        for k in (0..deg).rev() {
            acc = acc * u + combined[k];
        }
        acc
    }
}

/// Maps a time relative to the current sample onto the window's `[-1, 1]`
/// abscissa.
fn window_u(window: &Window, t_rel: f64) -> f64 {
    2.0 * (t_rel - window.offset_s) / window.length_s - 1.0
}

/// A [`PolyConfig`] bound to a sample spacing: per-window bases ready for
/// fitting and evaluation. Immutable after construction and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    config: PolyConfig,
    dt: f64,
    windows: Vec<WindowBasis>,
}

impl BasisSet {
    pub fn new(config: PolyConfig, dt: f64) -> Result<Self, PolyError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(PolyError::BadDt { dt });
        }
        let last = config.windows.len() - 1;
        let windows = config
            .windows
            .iter()
            .enumerate()
            .map(|(i, &w)| WindowBasis::build(w, dt, config.side, i == last))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { config, dt, windows })
    }

    pub fn config(&self) -> &PolyConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn coeff_len(&self) -> usize {
        self.config.coeff_len()
    }

    /// Samples needed before (and including) the current one.
    pub fn past_samples(&self) -> usize {
        match self.config.side {
            WindowSide::Past => (-self.windows[0].first_step).max(0) as usize,
            WindowSide::Future => 0,
        }
    }

    /// Samples needed strictly after the current one.
    pub fn future_samples(&self) -> usize {
        match self.config.side {
            WindowSide::Past => 0,
            WindowSide::Future => {
                let last = &self.windows[self.windows.len() - 1];
                (last.first_step + last.n as i64 - 1).max(0) as usize
            }
        }
    }

    /// Per-window sample counts (diagnostics and tests).
    pub fn window_sample_counts(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.n).collect()
    }

    /// Fits every window of every dimension around sample `now`.
    /// Coefficient order: dimension-major, then window, then degree.
    pub fn fit_at(&self, series: &[&[f64]], now: usize) -> Result<Vec<f64>, PolyError> {
        if series.len() != self.config.dims {
            return Err(PolyError::DimCountMismatch {
                expected: self.config.dims,
                got: series.len(),
            });
        }
        if series[0].is_empty() {
            return Err(PolyError::EmptySeries);
        }
        let len0 = series[0].len();
        if series.iter().any(|s| s.len() != len0) {
            return Err(PolyError::SeriesLengthMismatch);
        }
        let mut out = Vec::with_capacity(self.coeff_len());
        for dim in series {
            for wb in &self.windows {
                out.extend(wb.fit_at(dim, now)?);
            }
        }
        Ok(out)
    }

    /// Evaluates the fitted piecewise polynomials at query times (seconds
    /// relative to the current sample). Boundary times belong to the
    /// earlier window. Returns one series per dimension.
    pub fn reconstruct(
        &self,
        coeffs: &[f64],
        query_times: &[f64],
    ) -> Result<Vec<Vec<f64>>, PolyError> {
        if coeffs.len() != self.coeff_len() {
            return Err(PolyError::CoeffLenMismatch {
                expected: self.coeff_len(),
                got: coeffs.len(),
            });
        }
        let per_dim = self.config.coeffs_per_dim();
        let mut out = vec![Vec::with_capacity(query_times.len()); self.config.dims];
        for &t in query_times {
            let w = self.locate_window(t).ok_or(PolyError::QueryOutsideWindows { time: t })?;
            let within: usize = self.windows[..w].iter().map(|b| b.window.degree + 1).sum();
            let span = self.windows[w].window.degree + 1;
            for (dim, series) in out.iter_mut().enumerate() {
                let lo = dim * per_dim + within;
                series.push(self.windows[w].eval(&coeffs[lo..lo + span], t));
            }
        }
        Ok(out)
    }

    fn locate_window(&self, t: f64) -> Option<usize> {
        let last = self.windows.len() - 1;
        self.windows.iter().enumerate().position(|(i, wb)| {
            let (start, end) = (wb.window.offset_s, wb.window.end_s());
            match self.config.side {
                WindowSide::Future => t > start + TIME_EPS && t <= end + TIME_EPS,
                WindowSide::Past => {
                    t >= start - TIME_EPS
                        && if i == last { t <= end + TIME_EPS } else { t < end - TIME_EPS }
                }
            }
        })
    }
}

/// Sliding-window features of a body-frame velocity series: the window
/// coefficients of `(v_lon, v_lat)` around sample `now`.
pub fn extract_features(
    vel: &crate::traj::VelocitySeries,
    set: &BasisSet,
    now: usize,
) -> Result<Vec<f64>, PolyError> {
    set.fit_at(&[&vel.v_lon, &vel.v_lat], now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.02;

    #[test]
    fn basis_rows_are_orthonormal() {
        for (n, degree) in [(5, 0), (11, 3), (25, 2), (40, 3), (64, 5)] {
            let rows = orth_basis(n, degree).unwrap();
            assert_eq!(rows.len(), degree + 1);
            for i in 0..rows.len() {
                for j in 0..rows.len() {
                    let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (dot - expect).abs() < 1e-10,
                        "n={n} deg={degree} <{i},{j}> = {dot}"
                    );
                }
            }
        }
    }

    #[test]
    fn degree_zero_row_is_inverse_sqrt_n() {
        let rows = orth_basis(5, 0).unwrap();
        let expect = 1.0 / 5.0_f64.sqrt();
        for &v in &rows[0] {
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_series_loads_only_coefficient_zero() {
        let coeffs = fit_window(&[3.25; 17], 3).unwrap();
        assert!((coeffs[0] - 3.25 * (17.0_f64).sqrt()).abs() < 1e-12);
        for &c in &coeffs[1..] {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn linear_series_has_no_curvature_coefficients() {
        let samples: Vec<f64> = (0..21).map(|k| 0.7 - 0.3 * k as f64).collect();
        let coeffs = fit_window(&samples, 3).unwrap();
        assert!(coeffs[1].abs() > 0.1, "slope must load coefficient 1");
        assert!(coeffs[2].abs() < 1e-10 && coeffs[3].abs() < 1e-10);
    }

    #[test]
    fn quadratic_is_reproduced_exactly() {
        // y = t^2 lies in the span of a degree-2 basis; the projection
        // must reproduce it at the sample points.
        let n = 25;
        let samples: Vec<f64> = (0..n).map(|k| {
            let t = k as f64 * DT;
            t * t
        }).collect();
        let rows = orth_basis(n, 2).unwrap();
        let coeffs: Vec<f64> = rows
            .iter()
            .map(|row| row.iter().zip(&samples).map(|(b, y)| b * y).sum())
            .collect();
        for s in 0..n {
            let recon: f64 = rows.iter().zip(&coeffs).map(|(row, c)| c * row[s]).sum();
            assert!((recon - samples[s]).abs() < 1e-10, "s={s}");
        }
    }

    /// Independent oracle: monomial normal equations solved by Gaussian
    /// elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
    fn normal_equation_values(us: &[f64], samples: &[f64], degree: usize) -> Vec<f64> {
        let m = degree + 1;
        let mut ata = vec![vec![0.0; m]; m];
        let mut aty = vec![0.0; m];
        for (&u, &y) in us.iter().zip(samples) {
            let mut pow = vec![1.0; m];
            for j in 1..m {
                pow[j] = pow[j - 1] * u;
            }
            for i in 0..m {
                aty[i] += pow[i] * y;
                for j in 0..m {
                    ata[i][j] += pow[i] * pow[j];
                }
            }
        }
        // Solve ata * beta = aty.
        let mut a = ata;
        let mut b = aty;
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..m {
                let f = a[row][col] / a[col][col];
                for k in col..m {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut beta = vec![0.0; m];
        for row in (0..m).rev() {
            let mut acc = b[row];
            for k in row + 1..m {
                acc -= a[row][k] * beta[k];
            }
            beta[row] = acc / a[row][row];
        }
        us.iter()
            .map(|&u| {
                let mut acc = beta[m - 1];
                for k in (0..m - 1).rev() {
                    acc = acc * u + beta[k];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fit_matches_normal_equations_on_random_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..1000 {
            let degree = rng.gen_range(0..=3usize);
            let n = rng.gen_range(degree + 2..=60);
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let rows = orth_basis(n, degree).unwrap();
            let coeffs: Vec<f64> = rows
                .iter()
                .map(|row| row.iter().zip(&samples).map(|(b, y)| b * y).sum())
                .collect();
            let mine: Vec<f64> = (0..n)
                .map(|s| rows.iter().zip(&coeffs).map(|(row, c)| c * row[s]).sum())
                .collect();
            let us = symmetric_grid(n);
            let oracle = normal_equation_values(&us, &samples, degree);
            let scale = samples.iter().fold(1.0_f64, |m, &y| m.max(y.abs()));
            for s in 0..n {
                assert!(
                    (mine[s] - oracle[s]).abs() <= 1e-9 * scale,
                    "case {case} n={n} deg={degree} s={s}: {} vs {}",
                    mine[s],
                    oracle[s]
                );
            }
        }
    }

    #[test]
    fn default_layouts_have_expected_shape() {
        let input = BasisSet::new(PolyConfig::input_default(), DT).unwrap();
        assert_eq!(input.window_sample_counts(), vec![40, 11]);
        assert_eq!(input.coeff_len(), 16);
        assert_eq!(input.past_samples(), 50);
        assert_eq!(input.future_samples(), 0);

        let output = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        assert_eq!(output.window_sample_counts(), vec![25; 5]);
        assert_eq!(output.coeff_len(), 30);
        assert_eq!(output.past_samples(), 0);
        assert_eq!(output.future_samples(), 125);
    }

    #[test]
    fn window_basis_values_match_standalone_basis() {
        // The value rows are invariant under affine abscissa changes, so
        // the window bases must agree with the symmetric-grid ones.
        let set = BasisSet::new(PolyConfig::input_default(), DT).unwrap();
        for wb in &set.windows {
            let reference = orth_basis(wb.n, wb.window.degree).unwrap();
            for (row, ref_row) in wb.rows.iter().zip(&reference) {
                for (a, b) in row.iter().zip(ref_row) {
                    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn config_rejects_gaps_overlaps_and_bad_anchors() {
        let gap = PolyConfig::new(
            vec![
                Window { offset_s: -1.0, length_s: 0.5, degree: 2 },
                Window { offset_s: -0.2, length_s: 0.2, degree: 2 },
            ],
            2,
            WindowSide::Past,
        );
        assert!(matches!(gap.unwrap_err(), PolyError::NotContiguous { index: 1 }));

        let unanchored = PolyConfig::new(
            vec![Window { offset_s: -1.0, length_s: 0.5, degree: 2 }],
            2,
            WindowSide::Past,
        );
        assert!(matches!(unanchored.unwrap_err(), PolyError::NotAnchored { .. }));

        let future_unanchored = PolyConfig::new(
            vec![Window { offset_s: 0.5, length_s: 0.5, degree: 2 }],
            2,
            WindowSide::Future,
        );
        assert!(matches!(future_unanchored.unwrap_err(), PolyError::NotAnchored { .. }));

        let zero_len = PolyConfig::new(
            vec![Window { offset_s: 0.0, length_s: 0.0, degree: 2 }],
            2,
            WindowSide::Future,
        );
        assert!(matches!(zero_len.unwrap_err(), PolyError::BadWindow { index: 0 }));
    }

    #[test]
    fn too_few_samples_for_degree_is_an_error() {
        assert!(matches!(
            orth_basis(3, 3).unwrap_err(),
            PolyError::DegreeTooHigh { degree: 3, samples: 3 }
        ));
        // 200 ms window at 5 Hz has a single sample: cannot carry degree 3.
        let err = BasisSet::new(PolyConfig::input_default(), 0.2).unwrap_err();
        assert!(matches!(err, PolyError::DegreeTooHigh { .. }));
    }

    #[test]
    fn incomplete_windows_report_pattern_unavailable() {
        let set = BasisSet::new(PolyConfig::input_default(), DT).unwrap();
        let series = vec![1.0; 300];
        let dims: Vec<&[f64]> = vec![&series, &series];
        assert!(matches!(
            set.fit_at(&dims, 49).unwrap_err(),
            PolyError::PatternUnavailable { now: 49 }
        ));
        assert!(set.fit_at(&dims, 50).is_ok());
        let out = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        assert!(out.fit_at(&dims, 299 - 125).is_ok());
        assert!(matches!(
            out.fit_at(&dims, 299 - 124).unwrap_err(),
            PolyError::PatternUnavailable { .. }
        ));
    }

    #[test]
    fn fit_then_reconstruct_round_trips_representable_data() {
        // A single global quadratic is representable in every output
        // window; fitting then evaluating at the sample points must be
        // exact.
        let out = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        let poly = |t: f64| 0.4 + 1.3 * t - 0.8 * t * t;
        let n = 200;
        let now = 10usize;
        let series_x: Vec<f64> = (0..n)
            .map(|k| poly((k as f64 - now as f64) * DT))
            .collect();
        let series_y: Vec<f64> = series_x.iter().map(|x| -0.5 * x + 2.0).collect();
        let coeffs = out.fit_at(&[&series_x, &series_y], now).unwrap();
        let query: Vec<f64> = (1..=125).map(|k| k as f64 * DT).collect();
        let recon = out.reconstruct(&coeffs, &query).unwrap();
        for (i, &t) in query.iter().enumerate() {
            let k = now + 1 + i;
            assert!(
                (recon[0][i] - series_x[k]).abs() < 1e-9,
                "x at t={t}: {} vs {}",
                recon[0][i],
                series_x[k]
            );
            assert!((recon[1][i] - series_y[k]).abs() < 1e-9, "y at t={t}");
        }
    }

    #[test]
    fn zero_coefficients_reconstruct_to_zero() {
        let out = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        let coeffs = vec![0.0; out.coeff_len()];
        let recon = out.reconstruct(&coeffs, &[0.02, 1.0, 2.5]).unwrap();
        for dim in recon {
            assert!(dim.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn boundary_queries_use_the_earlier_window() {
        let out = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        // Load only window 1 (indices 3..6 of each dim are window 2).
        let mut coeffs = vec![0.0; out.coeff_len()];
        coeffs[0] = 2.0; // dim 0, window 0, constant term
        let recon = out.reconstruct(&coeffs, &[0.5, 0.5 + 1e-6]).unwrap();
        assert!(recon[0][0].abs() > 0.1, "t=0.5 must evaluate in window 0");
        assert!(recon[0][1].abs() < 1e-9, "t=0.5+eps must evaluate in window 1");
    }

    #[test]
    fn queries_outside_the_horizon_are_errors() {
        let out = BasisSet::new(PolyConfig::output_default(), DT).unwrap();
        let coeffs = vec![0.0; out.coeff_len()];
        assert!(matches!(
            out.reconstruct(&coeffs, &[0.0]).unwrap_err(),
            PolyError::QueryOutsideWindows { .. }
        ));
        assert!(matches!(
            out.reconstruct(&coeffs, &[2.51]).unwrap_err(),
            PolyError::QueryOutsideWindows { .. }
        ));
    }

    #[test]
    fn coefficient_meaning_first_is_scaled_window_mean() {
        let set = BasisSet::new(PolyConfig::input_default(), DT).unwrap();
        let series: Vec<f64> = (0..100).map(|k| 0.01 * k as f64).collect();
        let dims: Vec<&[f64]> = vec![&series, &series];
        let coeffs = set.fit_at(&dims, 60).unwrap();
        // Window 0 covers samples 10..=49 (40 samples).
        let mean: f64 = series[10..50].iter().sum::<f64>() / 40.0;
        assert!((coeffs[0] - mean * 40.0_f64.sqrt()).abs() < 1e-12);
    }
}
