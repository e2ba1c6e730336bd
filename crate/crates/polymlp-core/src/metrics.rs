//! Evaluation metrics: trajectory error (ASAEE), frame-level
//! classification metrics, row-normalized confusion matrices, and the
//! scene-level early-detection threshold sweep.
//!
//! ASAEE ("average specific average Euclidean error") normalizes the mean
//! Euclidean error at each prediction horizon by that horizon and averages
//! over the grid, yielding cm/s. Constant error growth `AEE(t) = c*t`
//! therefore scores exactly `c`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::traj::{MotionState, STATE_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    EmptyInput,
    LengthMismatch { expected: usize, got: usize },
    NoPredictions,
    BadGrid,
    EmptyThresholds,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::EmptyInput => f.write_str("input is empty"),
            EvalError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            EvalError::NoPredictions => f.write_str("no complete prediction/ground-truth pairs"),
            EvalError::BadGrid => f.write_str("horizon grid must be finite, positive, increasing"),
            EvalError::EmptyThresholds => f.write_str("threshold grid is empty"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Prediction horizon grid (seconds ahead of the current sample).
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonGrid {
    times: Vec<f64>,
}

impl HorizonGrid {
    /// The evaluation default: 125 steps of 20 ms, 0.02 s ..= 2.50 s.
    pub fn standard() -> Self {
        Self { times: (1..=125).map(|i| i as f64 * 0.02).collect() }
    }

    pub fn new(times: Vec<f64>) -> Result<Self, EvalError> {
        if times.is_empty() {
            return Err(EvalError::BadGrid);
        }
        let increasing = times.windows(2).all(|w| w[1] > w[0]);
        if !increasing || !times.iter().all(|&t| t.is_finite() && t > 0.0) {
            return Err(EvalError::BadGrid);
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Streaming ASAEE: accumulates per-horizon Euclidean error sums over
/// predictions, then averages error/horizon over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AsaeeAccumulator {
    grid: HorizonGrid,
    error_sums: Vec<f64>,
    predictions: u64,
}

impl AsaeeAccumulator {
    pub fn new(grid: HorizonGrid) -> Self {
        let n = grid.len();
        Self { grid, error_sums: vec![0.0; n], predictions: 0 }
    }

    pub fn grid(&self) -> &HorizonGrid {
        &self.grid
    }

    pub fn prediction_count(&self) -> u64 {
        self.predictions
    }

    /// Adds one prediction given its per-horizon Euclidean errors.
    pub fn add_errors(&mut self, errors: &[f64]) -> Result<(), EvalError> {
        if errors.len() != self.error_sums.len() {
            return Err(EvalError::LengthMismatch {
                expected: self.error_sums.len(),
                got: errors.len(),
            });
        }
        for (sum, e) in self.error_sums.iter_mut().zip(errors) {
            *sum += e;
        }
        self.predictions += 1;
        Ok(())
    }

    /// Adds one prediction as predicted/true position pairs over the grid.
    pub fn add_prediction(
        &mut self,
        predicted: &[[f64; 2]],
        truth: &[[f64; 2]],
    ) -> Result<(), EvalError> {
        if predicted.len() != self.error_sums.len() {
            return Err(EvalError::LengthMismatch {
                expected: self.error_sums.len(),
                got: predicted.len(),
            });
        }
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch { expected: predicted.len(), got: truth.len() });
        }
        for ((sum, p), t) in self.error_sums.iter_mut().zip(predicted).zip(truth) {
            *sum += math::hypot(p[0] - t[0], p[1] - t[1]);
        }
        self.predictions += 1;
        Ok(())
    }

    /// Pools another accumulator over the same grid into this one.
    pub fn merge(&mut self, other: &AsaeeAccumulator) -> Result<(), EvalError> {
        if other.grid != self.grid {
            return Err(EvalError::BadGrid);
        }
        for (sum, o) in self.error_sums.iter_mut().zip(&other.error_sums) {
            *sum += o;
        }
        self.predictions += other.predictions;
        Ok(())
    }

    /// Mean Euclidean error per horizon (meters).
    pub fn aee(&self) -> Result<Vec<f64>, EvalError> {
        if self.predictions == 0 {
            return Err(EvalError::NoPredictions);
        }
        let n = self.predictions as f64;
        Ok(self.error_sums.iter().map(|s| s / n).collect())
    }

    /// The headline score in cm/s: mean over horizons of AEE(t)/t.
    pub fn asaee_cm_per_s(&self) -> Result<f64, EvalError> {
        let aee = self.aee()?;
        let sum: f64 = aee
            .iter()
            .zip(self.grid.times())
            .map(|(e, t)| e / t)
            .sum();
        Ok(100.0 * sum / self.grid.len() as f64)
    }
}

/// ASAEE bookkeeping split by scene class, plus the pooled total.
#[derive(Debug, Clone, PartialEq)]
pub struct AsaeeByClass {
    per_class: Vec<AsaeeAccumulator>,
    pooled: AsaeeAccumulator,
}

impl AsaeeByClass {
    pub fn new(grid: HorizonGrid) -> Self {
        let per_class = (0..STATE_COUNT).map(|_| AsaeeAccumulator::new(grid.clone())).collect();
        Self { per_class, pooled: AsaeeAccumulator::new(grid) }
    }

    pub fn add_prediction(
        &mut self,
        scene_class: MotionState,
        predicted: &[[f64; 2]],
        truth: &[[f64; 2]],
    ) -> Result<(), EvalError> {
        self.per_class[scene_class.index()].add_prediction(predicted, truth)?;
        self.pooled.add_prediction(predicted, truth)
    }

    pub fn class_accumulator(&self, scene_class: MotionState) -> &AsaeeAccumulator {
        &self.per_class[scene_class.index()]
    }

    pub fn class_asaee(&self, scene_class: MotionState) -> Result<f64, EvalError> {
        self.per_class[scene_class.index()].asaee_cm_per_s()
    }

    /// Unweighted mean over classes that received predictions (the "Mean"
    /// row of the results tables).
    pub fn class_mean(&self) -> Result<f64, EvalError> {
        let mut sum = 0.0;
        let mut n = 0;
        for acc in &self.per_class {
            if acc.prediction_count() > 0 {
                sum += acc.asaee_cm_per_s()?;
                n += 1;
            }
        }
        if n == 0 {
            return Err(EvalError::NoPredictions);
        }
        Ok(sum / n as f64)
    }

    pub fn pooled(&self) -> &AsaeeAccumulator {
        &self.pooled
    }
}

/// Binary frame-level counts and the derived accuracy/F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl FrameMetrics {
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.fp + self.fn_ + self.tn;
        if total == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            return 0.0;
        }
        self.tp as f64 / (self.tp + self.fp) as f64
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            return 0.0;
        }
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    /// `2PR/(P+R)`, 0 when undefined.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            return 0.0;
        }
        2.0 * p * r / (p + r)
    }
}

/// Binary frame metrics from boolean positives.
pub fn frame_metrics_binary(predicted: &[bool], truth: &[bool]) -> Result<FrameMetrics, EvalError> {
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch { expected: truth.len(), got: predicted.len() });
    }
    let mut m = FrameMetrics { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// Frame metrics of a state sequence against ground truth, with one state
/// designated positive.
pub fn frame_metrics(
    predicted: &[MotionState],
    truth: &[MotionState],
    positive: MotionState,
) -> Result<FrameMetrics, EvalError> {
    let p: Vec<bool> = predicted.iter().map(|&s| s == positive).collect();
    let t: Vec<bool> = truth.iter().map(|&s| s == positive).collect();
    frame_metrics_binary(&p, &t)
}

/// Frame-count confusion matrix over the four motion states, rows indexed
/// by ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfusionMatrix {
    counts: [[u64; STATE_COUNT]; STATE_COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, truth: MotionState, predicted: MotionState) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn add_sequence(
        &mut self,
        predicted: &[MotionState],
        truth: &[MotionState],
    ) -> Result<(), EvalError> {
        if predicted.len() != truth.len() {
            return Err(EvalError::LengthMismatch { expected: truth.len(), got: predicted.len() });
        }
        for (&p, &t) in predicted.iter().zip(truth) {
            self.add(t, p);
        }
        Ok(())
    }

    pub fn counts(&self) -> &[[u64; STATE_COUNT]; STATE_COUNT] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Overall frame accuracy (trace / total).
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        let total = self.total();
        if total == 0 {
            return Err(EvalError::EmptyInput);
        }
        let trace: u64 = (0..STATE_COUNT).map(|i| self.counts[i][i]).sum();
        Ok(trace as f64 / total as f64)
    }

    /// One row as percentages summing to 100, or `None` for a class with
    /// no ground-truth frames.
    pub fn row_percent(&self, truth: MotionState) -> Option<[f64; STATE_COUNT]> {
        let row = &self.counts[truth.index()];
        let total: u64 = row.iter().sum();
        if total == 0 {
            return None;
        }
        let mut out = [0.0; STATE_COUNT];
        for (o, &c) in out.iter_mut().zip(row) {
            *o = 100.0 * c as f64 / total as f64;
        }
        Some(out)
    }

    /// Diagonal entry of a row in percent (`None` for an empty row).
    pub fn diagonal_percent(&self, state: MotionState) -> Option<f64> {
        self.row_percent(state).map(|row| row[state.index()])
    }
}

/// One scene's classifier output for the early-detection protocol: the
/// per-frame positive-class score over time, and the labeled transition
/// event it should fire at (`None` excludes the scene from the sweep).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrace {
    pub times: Vec<f64>,
    pub scores: Vec<f64>,
    pub event_time: Option<f64>,
}

/// One row of the early-detection sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub excluded_scenes: usize,
    /// `None` when no scene produced a positive at this threshold.
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    /// Mean over true-positive scenes of (first positive - event) seconds.
    pub mean_detection_s: Option<f64>,
}

/// Scene-level early-detection sweep. Per threshold, a scene counts as a
/// false positive if any frame scores at/above the threshold strictly
/// before its event, as a true positive if the first such frame is at or
/// after the event, and as a false negative if no frame ever does. Mean
/// detection time averages only over true-positive scenes. True negatives
/// do not exist in this protocol, so accuracy is deliberately absent.
pub fn early_detection_sweep(
    scenes: &[DetectionTrace],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::EmptyThresholds);
    }
    if scenes.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for scene in scenes {
        if scene.times.len() != scene.scores.len() {
            return Err(EvalError::LengthMismatch {
                expected: scene.times.len(),
                got: scene.scores.len(),
            });
        }
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut row = SweepRow {
            threshold,
            true_positives: 0,
            false_positives: 0,
            false_negatives: 0,
            excluded_scenes: 0,
            precision: None,
            f1: None,
            mean_detection_s: None,
        };
        let mut delay_sum = 0.0;
        for scene in scenes {
            let Some(event) = scene.event_time else {
                row.excluded_scenes += 1;
                continue;
            };
            let first_positive = scene
                .times
                .iter()
                .zip(&scene.scores)
                .find(|(_, &s)| s >= threshold)
                .map(|(&t, _)| t);
            match first_positive {
                None => row.false_negatives += 1,
                Some(t) if t < event => row.false_positives += 1,
                Some(t) => {
                    row.true_positives += 1;
                    delay_sum += t - event;
                }
            }
        }
        let (tp, fp, fn_) = (row.true_positives, row.false_positives, row.false_negatives);
        if tp + fp > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            row.precision = Some(precision);
            let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            if precision + recall > 0.0 {
                row.f1 = Some(2.0 * precision * recall / (precision + recall));
            } else {
                row.f1 = Some(0.0);
            }
        }
        if tp > 0 {
            row.mean_detection_s = Some(delay_sum / tp as f64);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Evenly spaced threshold grid over [0, 1], inclusive of both ends.
pub fn threshold_grid(step: f64) -> Vec<f64> {
    let n = math::round(1.0 / step) as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}
