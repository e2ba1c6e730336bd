//! Report data model and renderers. Every evaluation result exists in two
//! forms: a structured value serialized to JSON, and a text rendering for
//! the terminal. Neither embeds timestamps or machine details, so repeated
//! runs with the same configuration and seed produce byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;

use polymlp_core::classifier::StatePosterior;
use polymlp_core::metrics::{AsaeeByClass, ConfusionMatrix, FrameMetrics, SweepRow};
use polymlp_core::predictor::PredictedTrajectory;
use polymlp_core::traj::MotionState;

use crate::timing::TimingStats;

/// Forecast error of one method on one scene class.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastRow {
    pub class: String,
    /// `None` when the class received no predictions.
    pub asaee_cm_per_s: Option<f64>,
    pub predictions: u64,
}

/// Forecast error of one method over the whole corpus.
#[derive(Debug, Clone, Serialize)]
pub struct MethodForecast {
    pub method: String,
    pub rows: Vec<ForecastRow>,
    /// Unweighted mean of the per-class scores.
    pub class_mean_cm_per_s: Option<f64>,
    /// Score of all predictions pooled regardless of class.
    pub pooled_cm_per_s: Option<f64>,
    pub predictions: u64,
}

impl MethodForecast {
    pub fn from_asaee(method: impl Into<String>, asaee: &AsaeeByClass) -> Self {
        let rows = MotionState::ALL
            .iter()
            .map(|&state| {
                let acc = asaee.class_accumulator(state);
                ForecastRow {
                    class: state.name().to_string(),
                    asaee_cm_per_s: acc.asaee_cm_per_s().ok(),
                    predictions: acc.prediction_count(),
                }
            })
            .collect();
        Self {
            method: method.into(),
            rows,
            class_mean_cm_per_s: asaee.class_mean().ok(),
            pooled_cm_per_s: asaee.pooled().asaee_cm_per_s().ok(),
            predictions: asaee.pooled().prediction_count(),
        }
    }

    pub fn class_value(&self, state: MotionState) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.class == state.name())
            .and_then(|r| r.asaee_cm_per_s)
    }
}

/// Relative change of one method against a baseline, per class.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub class: String,
    /// `(method - baseline) / baseline * 100`; negative is better.
    pub change_percent: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub method: String,
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn between(method: &MethodForecast, baseline: &MethodForecast) -> Self {
        let rows = MotionState::ALL
            .iter()
            .map(|&state| ComparisonRow {
                class: state.name().to_string(),
                change_percent: match (method.class_value(state), baseline.class_value(state)) {
                    (Some(a), Some(b)) if b > 0.0 => Some((a - b) / b * 100.0),
                    _ => None,
                },
            })
            .collect();
        Self { method: method.method.clone(), baseline: baseline.method.clone(), rows }
    }

    pub fn change_for(&self, state: MotionState) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.class == state.name())
            .and_then(|r| r.change_percent)
    }
}

/// Binary detection quality of one state, derived from the confusion matrix
/// (`predicted == state` against `truth == state`).
#[derive(Debug, Clone, Serialize)]
pub struct StateBinaryRow {
    pub state: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub frames: u64,
    pub accuracy: Option<f64>,
    /// counts[truth][predicted], state order.
    pub counts: [[u64; 4]; 4],
    /// Row-normalized percentages, `None` for empty rows.
    pub row_percent: Vec<Option<[f64; 4]>>,
    pub per_state: Vec<StateBinaryRow>,
}

/// Per-state binary counts carved out of a confusion matrix: one state is
/// the positive class, everything else negative.
pub fn binary_from_confusion(confusion: &ConfusionMatrix, state: MotionState) -> FrameMetrics {
    let c = confusion.counts();
    let s = state.index();
    let mut m = FrameMetrics { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (truth, row) in c.iter().enumerate() {
        for (pred, &n) in row.iter().enumerate() {
            match (truth == s, pred == s) {
                (true, true) => m.tp += n,
                (false, true) => m.fp += n,
                (true, false) => m.fn_ += n,
                (false, false) => m.tn += n,
            }
        }
    }
    m
}

impl ClassificationReport {
    pub fn from_confusion(confusion: &ConfusionMatrix) -> Self {
        let per_state = MotionState::ALL
            .iter()
            .map(|&state| {
                let m = binary_from_confusion(confusion, state);
                StateBinaryRow {
                    state: state.name().to_string(),
                    tp: m.tp,
                    fp: m.fp,
                    fn_: m.fn_,
                    tn: m.tn,
                    precision: m.precision(),
                    recall: m.recall(),
                    f1: m.f1(),
                }
            })
            .collect();
        Self {
            frames: confusion.total(),
            accuracy: confusion.accuracy().ok(),
            counts: *confusion.counts(),
            row_percent: MotionState::ALL.iter().map(|&s| confusion.row_percent(s)).collect(),
            per_state,
        }
    }
}

/// Everything `evaluate` produces.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EvaluationReport {
    pub scenes: usize,
    pub forecast: Vec<MethodForecast>,
    pub comparisons: Vec<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
}

fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    match value {
        Some(v) => format!("{v:.precision$}"),
        None => "-".to_string(),
    }
}

/// Text table of forecast errors: one row per method, one column per class
/// plus mean and pooled.
pub fn render_forecast_table(methods: &[MethodForecast]) -> String {
    let mut out = String::from("Forecast error (ASAEE, cm/s; lower is better)\n");
    let name_w = methods
        .iter()
        .map(|m| m.method.len())
        .chain(["method".len()])
        .max()
        .unwrap_or(6);
    writeln!(
        out,
        "{:name_w$}  {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "method", "waiting", "starting", "moving", "stopping", "mean", "pooled", "n"
    )
    .unwrap();
    for m in methods {
        writeln!(
            out,
            "{:name_w$}  {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            m.method,
            fmt_opt(m.class_value(MotionState::Waiting), 2),
            fmt_opt(m.class_value(MotionState::Starting), 2),
            fmt_opt(m.class_value(MotionState::Moving), 2),
            fmt_opt(m.class_value(MotionState::Stopping), 2),
            fmt_opt(m.class_mean_cm_per_s, 2),
            fmt_opt(m.pooled_cm_per_s, 2),
            m.predictions,
        )
        .unwrap();
    }
    out
}

pub fn render_comparisons(comparisons: &[Comparison]) -> String {
    let mut out = String::new();
    for c in comparisons {
        writeln!(out, "Change of {} vs {} (%; negative is better)", c.method, c.baseline).unwrap();
        for row in &c.rows {
            writeln!(out, "  {:<9} {}", row.class, fmt_opt(row.change_percent, 1)).unwrap();
        }
    }
    out
}

pub fn render_classification(report: &ClassificationReport) -> String {
    let mut out = String::new();
    writeln!(out, "State classification over {} frames", report.frames).unwrap();
    writeln!(out, "accuracy {}", fmt_opt(report.accuracy, 4)).unwrap();
    writeln!(out, "confusion (rows = truth, % of row)").unwrap();
    writeln!(
        out,
        "{:>9} {:>9} {:>9} {:>9} {:>9}",
        "", "waiting", "starting", "moving", "stopping"
    )
    .unwrap();
    for (state, percents) in MotionState::ALL.iter().zip(&report.row_percent) {
        match percents {
            Some(p) => writeln!(
                out,
                "{:>9} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                state.name(),
                p[0],
                p[1],
                p[2],
                p[3]
            )
            .unwrap(),
            None => writeln!(
                out,
                "{:>9} {:>9} {:>9} {:>9} {:>9}",
                state.name(),
                "-",
                "-",
                "-",
                "-"
            )
            .unwrap(),
        }
    }
    writeln!(out, "per-state detection (state vs rest)").unwrap();
    writeln!(
        out,
        "{:>9} {:>9} {:>9} {:>9}",
        "state", "precision", "recall", "f1"
    )
    .unwrap();
    for row in &report.per_state {
        writeln!(
            out,
            "{:>9} {:>9.4} {:>9.4} {:>9.4}",
            row.state, row.precision, row.recall, row.f1
        )
        .unwrap();
    }
    out
}

pub fn render_evaluation(report: &EvaluationReport) -> String {
    let mut out = format!("Evaluated {} scenes\n\n", report.scenes);
    if !report.forecast.is_empty() {
        out.push_str(&render_forecast_table(&report.forecast));
        out.push('\n');
    }
    if !report.comparisons.is_empty() {
        out.push_str(&render_comparisons(&report.comparisons));
        out.push('\n');
    }
    if let Some(classification) = &report.classification {
        out.push_str(&render_classification(classification));
    }
    out
}

/// Sweep table as CSV; `None` cells are left empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("threshold,tp,fp,fn,excluded,precision,f1,mean_detection_s\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.threshold,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            r.excluded_scenes,
            opt(r.precision),
            opt(r.f1),
            opt(r.mean_detection_s),
        )
        .unwrap();
    }
    out
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "threshold      tp    fp    fn  excl  precision        f1  mean_det_s\n",
    );
    for r in rows {
        writeln!(
            out,
            "{:>9.3} {:>7} {:>5} {:>5} {:>5} {:>10} {:>9} {:>11}",
            r.threshold,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            r.excluded_scenes,
            fmt_opt(r.precision, 4),
            fmt_opt(r.f1, 4),
            fmt_opt(r.mean_detection_s, 3),
        )
        .unwrap();
    }
    out
}

/// Latency statistics for the timed prediction variants.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TimingReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monolithic: Option<TimingStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<TimingStats>,
    /// two_stage median / monolithic median, when both ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_ratio: Option<f64>,
}

pub fn render_timing_report(report: &TimingReport) -> String {
    let mut out = String::new();
    if let Some(stats) = &report.monolithic {
        out.push_str(&crate::timing::render_timing("monolithic", stats));
    }
    if let Some(stats) = &report.two_stage {
        out.push_str(&crate::timing::render_timing("two-stage", stats));
    }
    if let Some(ratio) = report.median_ratio {
        writeln!(out, "two-stage / monolithic median ratio: {ratio:.2}").unwrap();
    }
    out
}

/// Header of the prediction dump.
pub const DUMP_HEADER: &str = "scene_id,t_now,t_pred,x,y\n";

/// Appends one prediction (all horizon points) to a dump. Values are
/// written in scientific notation with 9 significant digits, which is
/// enough to identify an f64 to ~1e-9 relative precision.
pub fn dump_prediction(
    out: &mut String,
    scene_id: &str,
    t_now: f64,
    prediction: &PredictedTrajectory,
) {
    for (t, p) in prediction.times().iter().zip(prediction.positions()) {
        writeln!(
            out,
            "{scene_id},{t_now:.8e},{t:.8e},{x:.8e},{y:.8e}",
            x = p[0],
            y = p[1]
        )
        .unwrap();
    }
}

/// Per-frame classifier output as CSV.
pub fn posterior_csv_header() -> &'static str {
    "scene_id,t,waiting,starting,moving,stopping,predicted,truth\n"
}

pub fn posterior_csv_row(
    out: &mut String,
    scene_id: &str,
    t: f64,
    posterior: &StatePosterior,
    truth: MotionState,
) {
    let p = posterior.probs();
    writeln!(
        out,
        "{scene_id},{t:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{},{}",
        p[0],
        p[1],
        p[2],
        p[3],
        posterior.argmax().name(),
        truth.name()
    )
    .unwrap();
}
