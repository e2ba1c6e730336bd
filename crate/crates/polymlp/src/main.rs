//! Command-line driver for the motion-state classification and trajectory
//! forecasting toolchain.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use polymlp::config::{default_config_toml, load_config, RunConfig};
use polymlp::manifest::{
    resolve_pipeline, save_manifest, GateSource, PipelineManifest, ResolvedPipeline,
};
use polymlp::model_io::{
    load_classifier, load_predictor, save_classifier, save_predictor,
};
use polymlp::pipeline::{
    asaee_cvkf, asaee_gated, asaee_monolithic, classification_confusion, classifier_traces,
    evaluation_scenes, imm_traces, select_thresholds, split_corpus, training_scenes, EvalContext,
    TimingWorkload,
};
use polymlp::report::{
    dump_prediction, posterior_csv_header, posterior_csv_row, render_classification,
    render_evaluation, render_sweep, render_timing_report, sweep_csv, ClassificationReport,
    Comparison, EvaluationReport, MethodForecast, TimingReport, DUMP_HEADER,
};
use polymlp::scene_io::{load_scenes, save_scenes, SceneFormat};
use polymlp::timing::render_timing;
use polymlp::write_atomic;

use polymlp_core::classifier::{train_classifier, DetectionSide};
use polymlp_core::gated::{gated_predict, train_specific_predictors, ExpertBank, LogisticKind, PredictionExpert};
use polymlp_core::kalman::CvKf;
use polymlp_core::metrics::{threshold_grid, early_detection_sweep, ConfusionMatrix};
use polymlp_core::predictor::{train_predictor, PredictedTrajectory};
use polymlp_core::synth::generate_corpus;
use polymlp_core::traj::{ego_velocity, EgoFrame, MotionState, Scene};

fn config_keys_help() -> String {
    format!(
        "Configuration keys and their defaults (set via file or --set KEY=VALUE):\n\n{}",
        default_config_toml()
    )
}

#[derive(Parser)]
#[command(
    name = "polymlp",
    about = "Motion-state classification and trajectory forecasting for vulnerable road users",
    after_help = "Run with --help to see every configuration key; `polymlp config` prints the effective configuration.",
    after_long_help = config_keys_help()
)]
struct Cli {
    /// Configuration file (TOML, flat keys; all keys optional).
    #[arg(short, long, global = true, env = "POLYMLP_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. --set seed=7.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictModeArg {
    /// One network mapping features to future-trajectory coefficients.
    Monolithic,
    /// Classifier-gated mixture of per-state experts (from a manifest).
    TwoStage,
    /// Constant-velocity Kalman filter baseline.
    CvKf,
    /// Classifier-gated physical speed-profile experts.
    Physmod,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Start,
    Stop,
}

impl SideArg {
    fn side(self) -> DetectionSide {
        match self {
            SideArg::Start => DetectionSide::Start,
            SideArg::Stop => DetectionSide::Stop,
        }
    }

    fn transition_class(self) -> MotionState {
        match self {
            SideArg::Start => MotionState::Starting,
            SideArg::Stop => MotionState::Stopping,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorArg {
    /// Network classifier detection scores.
    Classifier,
    /// Interacting-multiple-model filter mode probability.
    Imm,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration (defaults, file, overrides) as TOML.
    Config,
    /// Generate a synthetic labeled scene corpus.
    Synth {
        /// Output scene file (.jsonl or .csv).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// File format; inferred from the extension when omitted.
        #[arg(long)]
        format: Option<FormatArg>,
    },
    /// Train the motion-state classifier on the training split.
    TrainClassifier {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Output model file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Train the monolithic trajectory predictor on the training split.
    TrainPredictor {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Output model file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Train four state-specific predictors and write a pipeline manifest.
    TrainSpecific {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Directory for the four expert files and the manifest.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Trained classifier file to reference from the manifest.
        #[arg(long, value_name = "PATH")]
        classifier: PathBuf,
        /// Gate source recorded in the manifest.
        #[arg(long, default_value = "classifier", value_name = "SOURCE")]
        gate: String,
    },
    /// Write per-frame posteriors and print a classification summary.
    Classify {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Classifier model file.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Output CSV of per-frame posteriors.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Dump predicted trajectories for eligible frames.
    Predict {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        #[arg(long)]
        mode: PredictModeArg,
        /// Model file (predictor for monolithic, classifier for physmod).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Pipeline manifest (two-stage mode).
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Output dump file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Predict every Nth eligible frame (default: eval_now_stride).
        #[arg(long, value_name = "N")]
        every: Option<usize>,
        /// Restrict the dump to one scene id.
        #[arg(long, value_name = "ID")]
        scene: Option<String>,
    },
    /// Forecast-error and classification report on the evaluation split.
    Evaluate {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Monolithic predictor to evaluate.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Pipeline manifest for the two-stage evaluation.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Also write the structured report as JSON.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Early-detection threshold sweep over transition scenes.
    Sweep {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Classifier model file (classifier detector only).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long)]
        side: SideArg,
        #[arg(long, default_value = "classifier")]
        detector: DetectorArg,
        /// Output CSV table.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Also write the rows as JSON.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Measure per-cycle prediction latency.
    Time {
        #[arg(long, env = "POLYMLP_SCENES", value_name = "PATH")]
        scenes: PathBuf,
        /// Monolithic predictor to time.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Pipeline manifest to time as the two-stage pipeline.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Also write the statistics as JSON.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Config => {
            print!("{}", toml::to_string(&cfg).context("serialize configuration")?);
            Ok(())
        }
        Command::Synth { out, format } => cmd_synth(&cfg, &out, format),
        Command::TrainClassifier { scenes, out } => cmd_train_classifier(&cfg, &scenes, &out),
        Command::TrainPredictor { scenes, out } => cmd_train_predictor(&cfg, &scenes, &out),
        Command::TrainSpecific { scenes, out_dir, classifier, gate } => {
            cmd_train_specific(&cfg, &scenes, &out_dir, &classifier, &gate)
        }
        Command::Classify { scenes, model, out } => cmd_classify(&cfg, &scenes, &model, &out),
        Command::Predict { scenes, mode, model, manifest, out, every, scene } => {
            cmd_predict(&cfg, &scenes, mode, model.as_deref(), manifest.as_deref(), &out, every, scene.as_deref())
        }
        Command::Evaluate { scenes, model, manifest, json } => {
            cmd_evaluate(&cfg, &scenes, model.as_deref(), manifest.as_deref(), json.as_deref())
        }
        Command::Sweep { scenes, model, side, detector, out, json } => {
            cmd_sweep(&cfg, &scenes, model.as_deref(), side, detector, &out, json.as_deref())
        }
        Command::Time { scenes, model, manifest, json } => {
            cmd_time(&cfg, &scenes, model.as_deref(), manifest.as_deref(), json.as_deref())
        }
    }
}

fn scene_format(path: &Path, flag: Option<FormatArg>) -> Result<SceneFormat> {
    match flag {
        Some(FormatArg::Jsonl) => Ok(SceneFormat::Jsonl),
        Some(FormatArg::Csv) => Ok(SceneFormat::Csv),
        None => SceneFormat::from_path(path),
    }
}

fn load_corpus(path: &Path) -> Result<Vec<Scene>> {
    let scenes = load_scenes(path, SceneFormat::from_path(path)?)?;
    if scenes.is_empty() {
        bail!("{}: no scenes", path.display());
    }
    Ok(scenes)
}

fn cmd_synth(cfg: &RunConfig, out: &Path, format: Option<FormatArg>) -> Result<()> {
    let spec = cfg.corpus_spec();
    let scenes = generate_corpus(&spec, cfg.seed)?;
    save_scenes(out, &scenes, scene_format(out, format)?)?;
    let mut counts = [0usize; 4];
    for scene in &scenes {
        counts[scene.scene_class().index()] += 1;
    }
    println!(
        "wrote {} scenes to {} (waiting {}, starting {}, moving {}, stopping {})",
        scenes.len(),
        out.display(),
        counts[0],
        counts[1],
        counts[2],
        counts[3]
    );
    Ok(())
}

fn cmd_train_classifier(cfg: &RunConfig, scenes_path: &Path, out: &Path) -> Result<()> {
    let scenes = load_corpus(scenes_path)?;
    let train = training_scenes(&scenes, cfg)?;
    let training = train_classifier(&train, &cfg.classifier_config()?, cfg.mode()?)?;
    let thresholds =
        select_thresholds(&train, &training.classifier, cfg.selection_threshold_step)?;
    save_classifier(out, &training.classifier, Some(thresholds))?;
    println!(
        "trained {} classifier on {} scenes ({} patterns): best epoch {}, validation mse {:.6}",
        cfg.classifier_mode,
        train.len(),
        training.patterns,
        training.best_epoch,
        training.best_validation_mse
    );
    if let Some(t) = thresholds.start {
        println!("selected start-detection threshold {t}");
    }
    if let Some(t) = thresholds.stop {
        println!("selected stop-detection threshold {t}");
    }
    println!("saved {}", out.display());
    Ok(())
}

fn cmd_train_predictor(cfg: &RunConfig, scenes_path: &Path, out: &Path) -> Result<()> {
    let scenes = load_corpus(scenes_path)?;
    let train = training_scenes(&scenes, cfg)?;
    let training = train_predictor(&train, &cfg.predictor_config()?)?;
    save_predictor(out, &training.predictor)?;
    println!(
        "trained predictor on {} scenes ({} patterns): best epoch {}, validation mse {:.6}",
        train.len(),
        training.patterns,
        training.best_epoch,
        training.best_validation_mse
    );
    println!("saved {}", out.display());
    Ok(())
}

const EXPERT_FILES: [&str; 4] = [
    "expert_waiting.json",
    "expert_starting.json",
    "expert_moving.json",
    "expert_stopping.json",
];

fn cmd_train_specific(
    cfg: &RunConfig,
    scenes_path: &Path,
    out_dir: &Path,
    classifier: &Path,
    gate: &str,
) -> Result<()> {
    let gate = GateSource::parse(gate)?;
    // Check the classifier file before the long training run.
    load_classifier(classifier, &cfg.input_basis()?, &cfg.ego())?;
    let scenes = load_corpus(scenes_path)?;
    let train = training_scenes(&scenes, cfg)?;
    let specific = train_specific_predictors(&train, &cfg.specific_config()?)?;
    for (state, file) in MotionState::ALL.iter().zip(EXPERT_FILES) {
        save_predictor(&out_dir.join(file), specific.get(*state))?;
    }
    println!(
        "trained specific predictors on {} scenes (patterns: waiting {}, starting {}, moving {}, stopping {})",
        train.len(),
        specific.pattern_counts[0],
        specific.pattern_counts[1],
        specific.pattern_counts[2],
        specific.pattern_counts[3]
    );

    // Reference the classifier relative to the manifest when it already
    // lives in the output directory; otherwise by absolute path.
    let classifier_entry = match classifier.parent() {
        Some(parent) if parent == out_dir => classifier
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| anyhow!("{}: not a file path", classifier.display()))?,
        _ => std::fs::canonicalize(classifier)
            .with_context(|| format!("resolve {}", classifier.display()))?
            .to_string_lossy()
            .into_owned(),
    };
    let manifest = PipelineManifest::new(
        classifier_entry,
        EXPERT_FILES.map(|f| f.to_string()),
        gate,
    );
    let manifest_path = out_dir.join("pipeline.json");
    save_manifest(&manifest_path, &manifest)?;
    println!("saved {}", manifest_path.display());
    Ok(())
}

fn cmd_classify(cfg: &RunConfig, scenes_path: &Path, model: &Path, out: &Path) -> Result<()> {
    let scenes = load_corpus(scenes_path)?;
    let eval = evaluation_scenes(&scenes, cfg)?;
    let (classifier, _) = load_classifier(model, &cfg.input_basis()?, &cfg.ego())?;
    let mut rows = posterior_csv_header().to_string();
    let mut confusion = ConfusionMatrix::new();
    for scene in &eval {
        let t = scene.trajectory().timestamps();
        for (now, post) in classifier.classify_scene(scene)? {
            let truth = scene.state_labels()[now];
            posterior_csv_row(&mut rows, scene.scene_id(), t[now], &post, truth);
            confusion.add(truth, post.argmax());
        }
    }
    write_atomic(out, rows.as_bytes())?;
    println!("wrote per-frame posteriors for {} scenes to {}", eval.len(), out.display());
    print!(
        "{}",
        render_classification(&ClassificationReport::from_confusion(&confusion))
    );
    Ok(())
}

fn physical_bank(cfg: &RunConfig) -> Result<ExpertBank> {
    ExpertBank::new(
        [
            PredictionExpert::ConstantPosition,
            PredictionExpert::Physical(LogisticKind::Starting, cfg.logistic_fit_config()),
            PredictionExpert::ConstantVelocity,
            PredictionExpert::Physical(LogisticKind::Stopping, cfg.logistic_fit_config()),
        ],
        cfg.output_basis()?,
        cfg.ego(),
    )
    .map_err(|e| anyhow!("physical expert bank: {e}"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict(
    cfg: &RunConfig,
    scenes_path: &Path,
    mode: PredictModeArg,
    model: Option<&Path>,
    manifest: Option<&Path>,
    out: &Path,
    every: Option<usize>,
    scene_id: Option<&str>,
) -> Result<()> {
    let all = load_corpus(scenes_path)?;
    let scenes: Vec<Scene> = match scene_id {
        Some(id) => {
            let found: Vec<Scene> =
                all.iter().filter(|s| s.scene_id() == id).cloned().collect();
            if found.is_empty() {
                bail!("scene `{id}` not found in {}", scenes_path.display());
            }
            found
        }
        None => evaluation_scenes(&all, cfg)?,
    };
    let ctx = EvalContext::new(cfg)?.with_stride(every.unwrap_or(cfg.eval_now_stride));

    let mut dump = DUMP_HEADER.to_string();
    let mut predictions = 0usize;
    match mode {
        PredictModeArg::Monolithic => {
            let model = model.ok_or_else(|| anyhow!("--mode monolithic needs --model"))?;
            let predictor =
                load_predictor(model, &cfg.input_basis()?, &cfg.output_basis()?, &cfg.ego())?;
            for scene in &scenes {
                let (vel, frames) = ego_velocity(scene.trajectory(), &ctx.ego)?;
                let t = scene.trajectory().timestamps();
                for now in (ctx.first..scene.len().saturating_sub(ctx.horizon)).step_by(ctx.stride)
                {
                    let pred = predictor.predict(&vel, &frames[now], now)?;
                    dump_prediction(&mut dump, scene.scene_id(), t[now], &pred);
                    predictions += 1;
                }
            }
        }
        PredictModeArg::TwoStage | PredictModeArg::Physmod => {
            let (classifier, bank, gate) = match mode {
                PredictModeArg::TwoStage => {
                    let manifest =
                        manifest.ok_or_else(|| anyhow!("--mode two-stage needs --manifest"))?;
                    let ResolvedPipeline { classifier, bank, gate, .. } =
                        resolve_pipeline(manifest, cfg)?;
                    (classifier, bank, gate)
                }
                _ => {
                    let model = model
                        .ok_or_else(|| anyhow!("--mode physmod needs --model (a classifier)"))?;
                    let (classifier, _) =
                        load_classifier(model, &cfg.input_basis()?, &cfg.ego())?;
                    (classifier, physical_bank(cfg)?, GateSource::Classifier)
                }
            };
            for scene in &scenes {
                let (vel, frames) = ego_velocity(scene.trajectory(), &ctx.ego)?;
                let t = scene.trajectory().timestamps();
                for now in (ctx.first..scene.len().saturating_sub(ctx.horizon)).step_by(ctx.stride)
                {
                    let posterior = match gate {
                        GateSource::Classifier => classifier.classify(&vel, now)?,
                        GateSource::GroundTruth => {
                            let mut raw = [0.0; 4];
                            raw[scene.state_labels()[now].index()] = 1.0;
                            polymlp_core::classifier::StatePosterior::from_raw(raw)
                        }
                    };
                    let outputs = bank.all_expert_outputs(&vel, now)?;
                    let pred = gated_predict(&posterior, &outputs, bank.output(), &frames[now])?;
                    dump_prediction(&mut dump, scene.scene_id(), t[now], &pred.trajectory);
                    predictions += 1;
                }
            }
        }
        PredictModeArg::CvKf => {
            let kf_cfg = cfg.kf_config();
            for scene in &scenes {
                let mut kf = CvKf::new(&kf_cfg)?;
                let t = scene.trajectory().timestamps();
                let positions = scene.trajectory().positions();
                let dt = scene.trajectory().dt();
                let mut eligible = (ctx.first..scene.len().saturating_sub(ctx.horizon))
                    .step_by(ctx.stride)
                    .peekable();
                for (i, p) in positions.iter().enumerate() {
                    kf.step(*p, dt)?;
                    if eligible.peek() == Some(&i) {
                        eligible.next();
                        let points = kf.predict_trajectory(ctx.grid.times())?;
                        let state = kf.state();
                        let frame = EgoFrame { origin: [state[0], state[1]], heading: 0.0 };
                        let pred = PredictedTrajectory::new(
                            frame,
                            ctx.grid.times().to_vec(),
                            points,
                        )?;
                        dump_prediction(&mut dump, scene.scene_id(), t[i], &pred);
                        predictions += 1;
                    }
                }
            }
        }
    }
    write_atomic(out, dump.as_bytes())?;
    println!(
        "wrote {} predictions over {} scenes to {}",
        predictions,
        scenes.len(),
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(
    cfg: &RunConfig,
    scenes_path: &Path,
    model: Option<&Path>,
    manifest: Option<&Path>,
    json: Option<&Path>,
) -> Result<()> {
    let scenes = load_corpus(scenes_path)?;
    let (train, holdout) = split_corpus(&scenes, cfg)?;
    let eval = if holdout.is_empty() { scenes.clone() } else { holdout };
    let ctx = EvalContext::new(cfg)?;

    let kf_cfg = if cfg.tune_baselines && !train.is_empty() {
        let tuned = polymlp::pipeline::tune_kf(&train, cfg, &ctx)?;
        println!(
            "tuned constant-velocity filter on {} training scenes: q = {}",
            train.len(),
            tuned.q
        );
        tuned
    } else {
        cfg.kf_config()
    };

    let mut report = EvaluationReport {
        scenes: eval.len(),
        ..EvaluationReport::default()
    };
    let cvkf = MethodForecast::from_asaee("cv-kf", &asaee_cvkf(&eval, &kf_cfg, &ctx)?);
    report.forecast.push(cvkf.clone());

    if let Some(model) = model {
        let predictor =
            load_predictor(model, &cfg.input_basis()?, &cfg.output_basis()?, &cfg.ego())?;
        let mono =
            MethodForecast::from_asaee("monolithic", &asaee_monolithic(&eval, &predictor, &ctx)?);
        report.comparisons.push(Comparison::between(&mono, &cvkf));
        report.forecast.push(mono);
    }

    if let Some(manifest) = manifest {
        let resolved = resolve_pipeline(manifest, cfg)?;
        let two = MethodForecast::from_asaee(
            "two-stage",
            &asaee_gated(
                &eval,
                &resolved.classifier,
                &resolved.bank,
                GateSource::Classifier,
                None,
                &ctx,
            )?,
        );
        let oracle = MethodForecast::from_asaee(
            "two-stage-oracle",
            &asaee_gated(
                &eval,
                &resolved.classifier,
                &resolved.bank,
                GateSource::GroundTruth,
                None,
                &ctx,
            )?,
        );
        report.comparisons.push(Comparison::between(&two, &cvkf));
        report.forecast.push(two);
        report.forecast.push(oracle);
        let confusion = classification_confusion(&eval, &resolved.classifier)?;
        report.classification = Some(ClassificationReport::from_confusion(&confusion));
    }

    print!("{}", render_evaluation(&report));
    if let Some(json_path) = json {
        let body = serde_json::to_vec_pretty(&report).context("serialize report")?;
        write_atomic(json_path, &body)?;
        println!("wrote {}", json_path.display());
    }
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    scenes_path: &Path,
    model: Option<&Path>,
    side: SideArg,
    detector: DetectorArg,
    out: &Path,
    json: Option<&Path>,
) -> Result<()> {
    let scenes = load_corpus(scenes_path)?;
    let eval = evaluation_scenes(&scenes, cfg)?;
    let class = side.transition_class();
    let filtered: Vec<Scene> =
        eval.into_iter().filter(|s| s.scene_class() == class).collect();
    if filtered.is_empty() {
        bail!("no {}-class scenes in the evaluation split", class.name());
    }
    let traces = match detector {
        DetectorArg::Classifier => {
            let model =
                model.ok_or_else(|| anyhow!("--detector classifier needs --model"))?;
            let (classifier, _) = load_classifier(model, &cfg.input_basis()?, &cfg.ego())?;
            classifier_traces(&filtered, &classifier, side.side())?
        }
        DetectorArg::Imm => imm_traces(&filtered, &cfg.imm_config(), side.side())?,
    };
    let rows = early_detection_sweep(&traces, &threshold_grid(cfg.sweep_threshold_step))?;
    write_atomic(out, sweep_csv(&rows).as_bytes())?;
    println!(
        "swept {} thresholds over {} {}-class scenes; wrote {}",
        rows.len(),
        filtered.len(),
        class.name(),
        out.display()
    );
    let best = rows
        .iter()
        .filter(|r| r.f1.is_some())
        .max_by(|a, b| a.f1.partial_cmp(&b.f1).unwrap());
    if let Some(best) = best {
        print!("best by F1:\n{}", render_sweep(std::slice::from_ref(best)));
    }
    if let Some(json_path) = json {
        #[derive(serde::Serialize)]
        struct Row {
            threshold: f64,
            true_positives: usize,
            false_positives: usize,
            false_negatives: usize,
            excluded_scenes: usize,
            precision: Option<f64>,
            f1: Option<f64>,
            mean_detection_s: Option<f64>,
        }
        let rows_json: Vec<Row> = rows
            .iter()
            .map(|r| Row {
                threshold: r.threshold,
                true_positives: r.true_positives,
                false_positives: r.false_positives,
                false_negatives: r.false_negatives,
                excluded_scenes: r.excluded_scenes,
                precision: r.precision,
                f1: r.f1,
                mean_detection_s: r.mean_detection_s,
            })
            .collect();
        let body = serde_json::to_vec_pretty(&rows_json).context("serialize sweep")?;
        write_atomic(json_path, &body)?;
        println!("wrote {}", json_path.display());
    }
    Ok(())
}

fn cmd_time(
    cfg: &RunConfig,
    scenes_path: &Path,
    model: Option<&Path>,
    manifest: Option<&Path>,
    json: Option<&Path>,
) -> Result<()> {
    if model.is_none() && manifest.is_none() {
        bail!("time needs --model (monolithic) and/or --manifest (two-stage)");
    }
    let scenes = load_corpus(scenes_path)?;
    let eval = evaluation_scenes(&scenes, cfg)?;
    let ctx = EvalContext::new(cfg)?;
    let workload = TimingWorkload::new(&eval, &ctx)?;
    println!(
        "timing over {} cycles from {} scenes ({} warmup, {} repetitions)",
        workload.cycle_count(),
        eval.len(),
        cfg.time_warmup,
        cfg.time_repetitions
    );

    let mut report = TimingReport::default();
    if let Some(model) = model {
        let predictor =
            load_predictor(model, &cfg.input_basis()?, &cfg.output_basis()?, &cfg.ego())?;
        let stats = workload.time_monolithic(&predictor, cfg.time_warmup, cfg.time_repetitions)?;
        print!("{}", render_timing("monolithic", &stats));
        report.monolithic = Some(stats);
    }
    if let Some(manifest) = manifest {
        let resolved = resolve_pipeline(manifest, cfg)?;
        let stats = workload.time_two_stage(
            &resolved.classifier,
            &resolved.bank,
            cfg.time_warmup,
            cfg.time_repetitions,
        )?;
        print!("{}", render_timing("two-stage", &stats));
        report.two_stage = Some(stats);
    }
    if let (Some(mono), Some(two)) = (&report.monolithic, &report.two_stage) {
        report.median_ratio = Some(two.median_us / mono.median_us);
        println!(
            "two-stage / monolithic median ratio: {:.2}",
            report.median_ratio.unwrap()
        );
    }
    if let Some(json_path) = json {
        print!("{}", render_timing_report(&report));
        let body = serde_json::to_vec_pretty(&report).context("serialize timing")?;
        write_atomic(json_path, &body)?;
        println!("wrote {}", json_path.display());
    }
    Ok(())
}
