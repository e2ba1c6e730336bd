//! Flat key-value run configuration. One TOML file holds every tunable of
//! the toolchain; command-line `--set KEY=VALUE` pairs override file
//! values, and `polymlp config` prints every key with its default.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use polymlp_core::classifier::{ClassifierConfig, ClassifierMode};
use polymlp_core::gated::LogisticFitConfig;
use polymlp_core::kalman::{ImmConfig, KfConfig};
use polymlp_core::mlp::RpropConfig;
use polymlp_core::polyfeat::{BasisSet, PolyConfig, Window, WindowSide};
use polymlp_core::predictor::PredictorConfig;
use polymlp_core::synth::CorpusSpec;
use polymlp_core::traj::{derive_seed, EgoConfig};

/// Seed-derivation tags so each trained network gets its own weight
/// stream from `train_seed`.
const ROLE_CLASSIFIER: u64 = 1;
const ROLE_PREDICTOR: u64 = 2;
const ROLE_SPECIFIC: u64 = 3;
/// Tag for the train/holdout shuffle, decoupled from corpus generation.
pub const ROLE_SPLIT: u64 = 4;

/// Every run-configuration key. Field names are the file keys; all have
/// defaults, so an empty file (or none) is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Reproducibility.
    /// Corpus generation, train/holdout shuffle, and misclassification
    /// injection all derive from this seed.
    pub seed: u64,
    /// Network weight initialization derives from this seed (one stream
    /// per model role).
    pub train_seed: u64,
    pub holdout_fraction: f64,

    // Corpus composition.
    pub scenes_waiting: usize,
    pub scenes_starting: usize,
    pub scenes_moving: usize,
    pub scenes_stopping: usize,
    pub sample_rate_hz: f64,
    pub duration_min_s: f64,
    pub duration_max_s: f64,
    pub pedestrian_speed_min: f64,
    pub pedestrian_speed_max: f64,
    pub cyclist_multiplier_min: f64,
    pub cyclist_multiplier_max: f64,
    pub cyclist_fraction: f64,
    pub max_curvature: f64,
    pub position_noise_std: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub standstill_jitter_speed: f64,
    pub origin_half_extent_m: f64,

    // Approximation windows, written as `offset_ms:length_ms:degree`
    // triples separated by commas. Input windows are in the past (negative
    // offsets, ending at 0), output windows in the future (starting at 0).
    pub input_windows: String,
    pub output_windows: String,

    // Ego-frame extraction and smoothing.
    pub alpha_lon: f64,
    pub alpha_lat: f64,
    pub heading_speed_floor: f64,

    // Networks (hidden layers as comma-separated widths).
    pub classifier_hidden: String,
    pub classifier_stride: usize,
    pub classifier_mode: String,
    pub predictor_hidden: String,
    pub predictor_stride: usize,
    pub specific_hidden: String,
    pub specific_stride: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    /// Early-stopping patience in epochs; 0 disables it.
    pub patience: usize,

    // Constant-velocity Kalman baseline.
    pub kf_q: f64,
    pub kf_r_std: f64,
    pub kf_init_velocity_var: f64,

    // Interacting-multiple-model baseline.
    pub imm_q_cp: f64,
    pub imm_q_cv: f64,
    pub imm_r_std: f64,
    /// Diagonal of the mode-transition matrix (probability of staying).
    pub imm_pi_stay: f64,
    pub imm_init_velocity_var: f64,
    pub imm_mixing_velocity_var: f64,
    /// Moving-model probability above which the IMM reports motion.
    pub imm_cv_threshold: f64,
    /// Grid-tune the Kalman baselines on the training split before
    /// evaluating them.
    pub tune_baselines: bool,

    // Physical speed-profile experts (logistic ramp fit).
    pub phys_window_s: f64,
    pub phys_tau_min_s: f64,
    pub phys_tau_max_s: f64,
    pub phys_tau_steps: usize,
    pub phys_t0_lead_s: f64,
    pub phys_t0_step_s: f64,
    pub phys_v_max: f64,
    pub phys_min_samples: usize,

    // Evaluation.
    /// Evaluate a prediction every this many frames.
    pub eval_now_stride: usize,
    /// Frame stride while grid-tuning baselines (coarser than evaluation).
    pub tune_now_stride: usize,
    pub sweep_threshold_step: f64,
    pub selection_threshold_step: f64,

    // Timing.
    pub time_repetitions: usize,
    pub time_warmup: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            train_seed: 0,
            holdout_fraction: 0.3,

            scenes_waiting: 150,
            scenes_starting: 150,
            scenes_moving: 150,
            scenes_stopping: 150,
            sample_rate_hz: 50.0,
            duration_min_s: 4.0,
            duration_max_s: 10.0,
            pedestrian_speed_min: 1.0,
            pedestrian_speed_max: 2.0,
            cyclist_multiplier_min: 2.0,
            cyclist_multiplier_max: 3.0,
            cyclist_fraction: 0.2,
            max_curvature: 0.1,
            position_noise_std: 0.01,
            tau_min_s: 0.04,
            tau_max_s: 0.09,
            accel_min: 1.5,
            accel_max: 3.0,
            standstill_jitter_speed: 0.012,
            origin_half_extent_m: 10.0,

            input_windows: "-1000:800:3,-200:200:3".into(),
            output_windows: "0:500:2,500:500:2,1000:500:2,1500:500:2,2000:500:2".into(),

            alpha_lon: 0.3,
            alpha_lat: 0.3,
            heading_speed_floor: 0.15,

            classifier_hidden: "20".into(),
            classifier_stride: 2,
            classifier_mode: "four_class".into(),
            predictor_hidden: "40".into(),
            predictor_stride: 2,
            specific_hidden: "20".into(),
            specific_stride: 2,
            max_epochs: 300,
            validation_fraction: 0.3,
            patience: 0,

            kf_q: 0.5,
            kf_r_std: 0.01,
            kf_init_velocity_var: 25.0,

            imm_q_cp: 1e-4,
            imm_q_cv: 2.0,
            imm_r_std: 0.01,
            imm_pi_stay: 0.99,
            imm_init_velocity_var: 25.0,
            imm_mixing_velocity_var: 0.25,
            imm_cv_threshold: 0.5,
            tune_baselines: true,

            phys_window_s: 1.0,
            phys_tau_min_s: 0.03,
            phys_tau_max_s: 1.0,
            phys_tau_steps: 16,
            phys_t0_lead_s: 0.5,
            phys_t0_step_s: 0.05,
            phys_v_max: 10.0,
            phys_min_samples: 5,

            eval_now_stride: 1,
            tune_now_stride: 5,
            sweep_threshold_step: 0.01,
            selection_threshold_step: 0.001,

            time_repetitions: 500,
            time_warmup: 50,
        }
    }
}

/// Loads the configuration: file values (if a file is given) overridden by
/// `KEY=VALUE` pairs. Unknown keys are rejected by name.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("read configuration {}", p.display()))?;
            text.parse()
                .with_context(|| format!("parse configuration {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("--set needs KEY=VALUE, got `{item}`"))?;
        let key = key.trim();
        // Parse the value as a TOML literal; fall back to a plain string
        // so `--set classifier_mode=four-class` works unquoted.
        let parsed = match format!("v = {value}").parse::<toml::Table>() {
            Ok(t) => t["v"].clone(),
            Err(_) => toml::Value::String(value.to_string()),
        };
        table.insert(key.to_string(), parsed);
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| anyhow!("configuration: {e}"))?;
    config.validate()?;
    Ok(config)
}

/// The default configuration rendered as a TOML file (every key present).
pub fn default_config_toml() -> String {
    toml::to_string(&RunConfig::default()).expect("default configuration serializes")
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("{what}: `{part}` is not a width"))
        })
        .collect()
}

/// Parses `offset_ms:length_ms:degree` comma-separated window triples.
fn parse_windows(text: &str, what: &str) -> Result<Vec<Window>> {
    text.split(',')
        .map(|part| {
            let fields: Vec<&str> = part.trim().split(':').collect();
            if fields.len() != 3 {
                bail!("{what}: `{part}` is not offset_ms:length_ms:degree");
            }
            let offset_ms: i64 = fields[0]
                .parse()
                .with_context(|| format!("{what}: offset `{}`", fields[0]))?;
            let length_ms: i64 = fields[1]
                .parse()
                .with_context(|| format!("{what}: length `{}`", fields[1]))?;
            let degree: usize = fields[2]
                .parse()
                .with_context(|| format!("{what}: degree `{}`", fields[2]))?;
            Ok(Window {
                offset_s: offset_ms as f64 / 1000.0,
                length_s: length_ms as f64 / 1000.0,
                degree,
            })
        })
        .collect()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            bail!("holdout_fraction must be in [0, 1)");
        }
        if self.eval_now_stride == 0 || self.tune_now_stride == 0 {
            bail!("frame strides must be >= 1");
        }
        if !(self.sweep_threshold_step > 0.0 && self.sweep_threshold_step <= 1.0) {
            bail!("sweep_threshold_step must be in (0, 1]");
        }
        if !(self.selection_threshold_step > 0.0 && self.selection_threshold_step <= 1.0) {
            bail!("selection_threshold_step must be in (0, 1]");
        }
        // Window lists, hidden layers, and mode must parse; corpus and
        // filter parameters are validated by their consumers.
        self.input_config()?;
        self.output_config()?;
        self.mode()?;
        parse_usize_list(&self.classifier_hidden, "classifier_hidden")?;
        parse_usize_list(&self.predictor_hidden, "predictor_hidden")?;
        parse_usize_list(&self.specific_hidden, "specific_hidden")?;
        Ok(())
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            counts: [
                self.scenes_waiting,
                self.scenes_starting,
                self.scenes_moving,
                self.scenes_stopping,
            ],
            sample_rate_hz: self.sample_rate_hz,
            duration_s: (self.duration_min_s, self.duration_max_s),
            pedestrian_speed: (self.pedestrian_speed_min, self.pedestrian_speed_max),
            cyclist_multiplier: (self.cyclist_multiplier_min, self.cyclist_multiplier_max),
            cyclist_fraction: self.cyclist_fraction,
            heading: (-std::f64::consts::PI, std::f64::consts::PI),
            max_curvature: self.max_curvature,
            position_noise_std: self.position_noise_std,
            tau: (self.tau_min_s, self.tau_max_s),
            accel: (self.accel_min, self.accel_max),
            standstill_jitter_speed: self.standstill_jitter_speed,
            origin_half_extent: self.origin_half_extent_m,
        }
    }

    pub fn input_config(&self) -> Result<PolyConfig> {
        let windows = parse_windows(&self.input_windows, "input_windows")?;
        PolyConfig::new(windows, 2, WindowSide::Past)
            .map_err(|e| anyhow!("input_windows: {e}"))
    }

    pub fn output_config(&self) -> Result<PolyConfig> {
        let windows = parse_windows(&self.output_windows, "output_windows")?;
        PolyConfig::new(windows, 2, WindowSide::Future)
            .map_err(|e| anyhow!("output_windows: {e}"))
    }

    /// Nominal sample spacing in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn input_basis(&self) -> Result<BasisSet> {
        BasisSet::new(self.input_config()?, self.dt()).map_err(|e| anyhow!("input_windows: {e}"))
    }

    pub fn output_basis(&self) -> Result<BasisSet> {
        BasisSet::new(self.output_config()?, self.dt()).map_err(|e| anyhow!("output_windows: {e}"))
    }

    pub fn ego(&self) -> EgoConfig {
        EgoConfig {
            alpha_lon: self.alpha_lon,
            alpha_lat: self.alpha_lat,
            heading_speed_floor: self.heading_speed_floor,
        }
    }

    fn rprop(&self, role: u64) -> RpropConfig {
        RpropConfig {
            max_epochs: self.max_epochs,
            seed: derive_seed(self.train_seed, role),
            validation_fraction: self.validation_fraction,
            patience: (self.patience > 0).then_some(self.patience),
            ..RpropConfig::default()
        }
    }

    pub fn mode(&self) -> Result<ClassifierMode> {
        ClassifierMode::parse(&self.classifier_mode).ok_or_else(|| {
            anyhow!(
                "classifier_mode `{}` is not four_class | two_class_start | two_class_stop",
                self.classifier_mode
            )
        })
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        Ok(ClassifierConfig {
            hidden: parse_usize_list(&self.classifier_hidden, "classifier_hidden")?,
            features: self.input_config()?,
            ego: self.ego(),
            rprop: self.rprop(ROLE_CLASSIFIER),
            stride: self.classifier_stride.max(1),
        })
    }

    pub fn predictor_config(&self) -> Result<PredictorConfig> {
        Ok(PredictorConfig {
            hidden: parse_usize_list(&self.predictor_hidden, "predictor_hidden")?,
            input: self.input_config()?,
            output: self.output_config()?,
            ego: self.ego(),
            rprop: self.rprop(ROLE_PREDICTOR),
            stride: self.predictor_stride.max(1),
        })
    }

    pub fn specific_config(&self) -> Result<PredictorConfig> {
        Ok(PredictorConfig {
            hidden: parse_usize_list(&self.specific_hidden, "specific_hidden")?,
            input: self.input_config()?,
            output: self.output_config()?,
            ego: self.ego(),
            rprop: self.rprop(ROLE_SPECIFIC),
            stride: self.specific_stride.max(1),
        })
    }

    pub fn kf_config(&self) -> KfConfig {
        KfConfig {
            q: self.kf_q,
            r_std: self.kf_r_std,
            init_velocity_var: self.kf_init_velocity_var,
        }
    }

    pub fn imm_config(&self) -> ImmConfig {
        let stay = self.imm_pi_stay;
        ImmConfig {
            q_cp: self.imm_q_cp,
            q_cv: self.imm_q_cv,
            r_std: self.imm_r_std,
            pi: [[stay, 1.0 - stay], [1.0 - stay, stay]],
            priors: [0.5, 0.5],
            init_velocity_var: self.imm_init_velocity_var,
            mixing_velocity_var: self.imm_mixing_velocity_var,
        }
    }

    pub fn logistic_fit_config(&self) -> LogisticFitConfig {
        LogisticFitConfig {
            window_s: self.phys_window_s,
            tau_min: self.phys_tau_min_s,
            tau_max: self.phys_tau_max_s,
            tau_steps: self.phys_tau_steps,
            t0_lead_s: self.phys_t0_lead_s,
            t0_step_s: self.phys_t0_step_s,
            v_max: self.phys_v_max,
            min_samples: self.phys_min_samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_load_without_a_file() {
        let cfg = load_config(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.corpus_spec().total_scenes(), 600);
        assert_eq!(cfg.input_config().unwrap().coeff_len(), 16);
        assert_eq!(cfg.output_config().unwrap().coeff_len(), 30);
    }

    #[test]
    fn file_values_and_overrides_stack() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed = 7\nscenes_waiting = 5").unwrap();
        let cfg = load_config(
            Some(f.path()),
            &["scenes_waiting=9".into(), "classifier_mode=two_class_start".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenes_waiting, 9, "override beats file");
        assert_eq!(cfg.mode().unwrap(), ClassifierMode::TwoClassStart);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = load_config(None, &["no_such_key=1".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("no_such_key"), "{err:#}");
    }

    #[test]
    fn bad_window_syntax_is_rejected() {
        let err = load_config(None, &["input_windows=\"-1000:800\"".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("input_windows"), "{err:#}");
    }

    #[test]
    fn default_toml_round_trips() {
        let text = default_config_toml();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, RunConfig::default());
        // Every key is present in the dump (self-documenting).
        for key in ["seed", "input_windows", "kf_q", "imm_pi_stay", "time_repetitions"] {
            assert!(text.contains(key), "missing {key}");
        }
    }
}
