use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use photobot::abstraction::{evaluate_picture_model, render_abstract, train_picture_cnn};
use photobot::composition::{BaselineThresholds, HeuristicThresholds};
use photobot::face_quality::{evaluate_face_model, score_faces, train_face_ann, train_face_cnn};
use photobot::model::{split_dataset, IngestOptions, SplitRatios};
use photobot::pipeline::{evaluate, run_pipeline, PipelineConfig, Scorers};
use photobot::selection::SelectionConstraints;
use photobot::sim::{builtin_scenario, run_scenario, write_event_log, Scenario};
use photobot::stats::welch_t_test;
use photobot::synthetic::{face_feature_set, layout_pictures, threshold_pictures, ThresholdDataConfig};
use photobot::threshold_opt::{ga_optimize, grid_search_oracle, GaConfig, ThresholdKind, ThresholdSet};
use photobot::tinynet::{load_model, save_model, NetworkModel, Optimizer, TrainConfig};
use photobot::{BoundingBox, Dataset, PictureRecord};

use crate::config::{envelope, require, resolve, usage, write_json, write_run};

fn load_dataset(path: &Path, image_root: Option<&PathBuf>, keep_faceless: bool) -> Result<Dataset> {
    let opts = IngestOptions {
        keep_faceless,
        image_root: image_root.cloned(),
        ..Default::default()
    };
    let (dataset, _) =
        Dataset::read_jsonl(path, &opts).with_context(|| format!("reading dataset {}", path.display()))?;
    Ok(dataset)
}

fn load_net(path: &Path) -> Result<NetworkModel> {
    load_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn load_thresholds(path: &Path) -> Result<ThresholdSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading thresholds {}", path.display()))?;
    let set: ThresholdSet =
        serde_json::from_str(&text).with_context(|| format!("parsing thresholds {}", path.display()))?;
    set.validate().with_context(|| format!("thresholds {}", path.display()))?;
    Ok(set)
}

fn score_all(model: Option<&NetworkModel>, pictures: &mut [PictureRecord]) -> Result<()> {
    if let Some(model) = model {
        for p in pictures {
            score_faces(model, p).with_context(|| format!("scoring faces of {:?}", p.picture_id))?;
        }
    }
    Ok(())
}

fn ensure_nonempty(dataset: &Dataset, path: &Path) -> Result<()> {
    if dataset.is_empty() {
        bail!("dataset {} has no usable pictures", path.display());
    }
    Ok(())
}

// ------------------------------------------------------------------ ingest

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Raw detector output, one picture per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Cleaned dataset to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for relative face_image_path values (default: the input's directory).
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    /// Keep pictures that end up with no faces.
    #[arg(long)]
    pub keep_faceless: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let input = require(&args.input, "input")?;
    let out = require(&args.out, "out")?;
    let opts = IngestOptions {
        keep_faceless: args.keep_faceless,
        image_root: args.image_root.clone(),
        ..Default::default()
    };
    let (dataset, report) =
        Dataset::read_jsonl(input, &opts).with_context(|| format!("ingesting {}", input.display()))?;
    dataset.write_jsonl(out)?;
    println!(
        "kept {} of {} pictures ({} dropped, {} faces dropped)",
        report.records_kept,
        report.records_in,
        report.total_records_dropped(),
        report.total_faces_dropped()
    );
    write_run(out, "ingest", &args, serde_json::to_value(&report)?)
}

// ------------------------------------------------------------------ split

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory receiving train.jsonl, test.jsonl and validation.jsonl.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub train: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test: f64,
    #[arg(long, default_value_t = 0.1)]
    pub validation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn split(args: SplitArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let path = require(&args.dataset, "dataset")?;
    let out_dir = require(&args.out_dir, "out-dir")?;
    let ratios = SplitRatios::new(args.train, args.test, args.validation).map_err(|e| usage(e.to_string()))?;
    let dataset = load_dataset(path, args.image_root.as_ref(), true)?;
    let parts = split_dataset(&dataset, ratios, args.seed)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut sizes = BTreeMap::new();
    for (name, part) in [("train", &parts.train), ("test", &parts.test), ("validation", &parts.validation)] {
        part.write_jsonl(out_dir.join(format!("{name}.jsonl")))?;
        sizes.insert(name, part.len());
    }
    println!("train {} / test {} / validation {}", sizes["train"], sizes["test"], sizes["validation"]);
    write_run(&out_dir.join("split"), "split", &args, json!({ "sizes": sizes }))
}

// ------------------------------------------------------------------ training

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Momentum,
}

/// Training flags. Unset values take the per-network defaults of
/// [`TrainDefaults`].
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_enum, default_value_t = OptimizerName::Momentum)]
    pub optimizer: OptimizerName,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Seeds both weight initialisation and batch shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub struct TrainDefaults {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

pub const FACE_ANN_DEFAULTS: TrainDefaults = TrainDefaults {
    epochs: 200,
    batch_size: 64,
    learning_rate: 0.02,
    weight_decay: 0.01,
};

pub const FACE_CNN_DEFAULTS: TrainDefaults = TrainDefaults {
    epochs: 30,
    batch_size: 16,
    learning_rate: 0.01,
    weight_decay: 0.0,
};

pub const PICTURE_CNN_DEFAULTS: TrainDefaults = TrainDefaults {
    epochs: 4,
    batch_size: 16,
    learning_rate: 0.005,
    weight_decay: 0.0,
};

impl TrainArgs {
    /// Fills unset values so the recorded configuration is complete.
    fn fill(&mut self, d: &TrainDefaults) {
        self.epochs.get_or_insert(d.epochs);
        self.batch_size.get_or_insert(d.batch_size);
        self.learning_rate.get_or_insert(d.learning_rate);
        self.weight_decay.get_or_insert(d.weight_decay);
    }

    fn train_config(&mut self, d: &TrainDefaults) -> TrainConfig {
        self.fill(d);
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            optimizer: match self.optimizer {
                OptimizerName::Sgd => Optimizer::Sgd,
                OptimizerName::Momentum => Optimizer::Momentum { beta: self.momentum },
            },
            seed: self.seed,
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainFaceArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn train_summary(model: &NetworkModel, history: &[f64], training_accuracy: f64) -> serde_json::Value {
    json!({
        "architecture": model.metadata.architecture,
        "parameters": model.parameter_count(),
        "final_loss": history.last(),
        "loss_history": history,
        "training_accuracy": training_accuracy,
    })
}

pub fn train_face(args: TrainFaceArgs, cnn: bool) -> Result<()> {
    let config = args.config.clone();
    let mut args = resolve(args, config.as_deref())?;
    let path = require(&args.dataset, "dataset")?;
    let out = require(&args.out, "out")?;
    let dataset = load_dataset(path, args.image_root.as_ref(), false)?;
    let faces = dataset.records.iter().flat_map(|p| &p.faces);
    let cfg = args.train.train_config(if cnn { &FACE_CNN_DEFAULTS } else { &FACE_ANN_DEFAULTS });
    let (model, history) = if cnn {
        train_face_cnn(faces.clone(), args.train.seed, &cfg)?
    } else {
        train_face_ann(faces.clone(), args.train.seed, &cfg)?
    };
    let acc = if cnn {
        evaluate_face_model(&model, faces.filter(|f| f.face_image.is_some()))?
    } else {
        evaluate_face_model(&model, faces)?
    };
    save_model(&model, out)?;
    println!("wrote {} (final loss {:.4}, training accuracy {acc:.4})", out.display(), history.last().unwrap_or(&f64::NAN));
    let command = if cnn { "train-face-cnn" } else { "train-face-ann" };
    write_run(out, command, &args, train_summary(&model, &history, acc))
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainPictureArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Scores faces before rendering; otherwise stored scores are used.
    #[arg(long)]
    pub face_model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    /// Train on the pictures only, without their mirror images.
    #[arg(long)]
    #[serde(default)]
    pub no_mirror: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn train_picture(args: TrainPictureArgs) -> Result<()> {
    let config = args.config.clone();
    let mut args = resolve(args, config.as_deref())?;
    let path = require(&args.dataset, "dataset")?;
    let out = require(&args.out, "out")?;
    let mut dataset = load_dataset(path, args.image_root.as_ref(), false)?;
    let face_model = args.face_model.as_deref().map(load_net).transpose()?;
    score_all(face_model.as_ref(), &mut dataset.records)?;
    let cfg = args.train.train_config(&PICTURE_CNN_DEFAULTS);
    let (model, history) = train_picture_cnn(&dataset.records, args.train.seed, &cfg, !args.no_mirror)?;
    let acc = evaluate_picture_model(&model, &dataset.records)?;
    save_model(&model, out)?;
    println!("wrote {} (final loss {:.4}, training accuracy {acc:.4})", out.display(), history.last().unwrap_or(&f64::NAN));
    write_run(out, "train-picture-cnn", &args, train_summary(&model, &history, acc))
}

// ------------------------------------------------------------------ thresholds

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Baseline,
    Heuristic,
}

impl From<KindName> for ThresholdKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::Baseline => ThresholdKind::Baseline,
            KindName::Heuristic => ThresholdKind::Heuristic,
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindName::Baseline)]
    pub kind: KindName,
    /// Scores faces first; the heuristic needs face scores.
    #[arg(long)]
    pub face_model: Option<PathBuf>,
    /// Threshold file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-generation CSV (default: `<out>.curve.csv`).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = GaConfig::default().population_size)]
    pub population_size: usize,
    #[arg(long, default_value_t = GaConfig::default().generations)]
    pub generations: usize,
    #[arg(long, default_value_t = GaConfig::default().crossover_rate)]
    pub crossover_rate: f64,
    #[arg(long, default_value_t = GaConfig::default().mutation_rate)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = GaConfig::default().mutation_sigma)]
    pub mutation_sigma: f64,
    #[arg(long, default_value_t = GaConfig::default().elitism_count)]
    pub elitism_count: usize,
    #[arg(long, default_value_t = GaConfig::default().tournament_size)]
    pub tournament_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also run the exhaustive grid with this many steps per axis.
    #[arg(long)]
    pub grid_steps: Option<usize>,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn optimize(args: OptimizeArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let path = require(&args.dataset, "dataset")?;
    let out = require(&args.out, "out")?;
    let mut dataset = load_dataset(path, args.image_root.as_ref(), true)?;
    ensure_nonempty(&dataset, path)?;
    let face_model = args.face_model.as_deref().map(load_net).transpose()?;
    score_all(face_model.as_ref(), &mut dataset.records)?;
    let ga = GaConfig {
        population_size: args.population_size,
        generations: args.generations,
        crossover_rate: args.crossover_rate,
        mutation_rate: args.mutation_rate,
        mutation_sigma: args.mutation_sigma,
        elitism_count: args.elitism_count,
        tournament_size: args.tournament_size,
        seed: args.seed,
    };
    ga.validate().map_err(|e| usage(e.to_string()))?;
    let kind = args.kind.into();
    let report = ga_optimize(&dataset.records, kind, &ga)?;
    write_json(out, &report.best_thresholds)?;
    let curve = args.curve.clone().unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".curve.csv");
        PathBuf::from(name)
    });
    report.write_curve_csv(&curve)?;
    let grid = match args.grid_steps {
        Some(steps) => {
            let g = grid_search_oracle(&dataset.records, kind, steps).map_err(|e| match e {
                photobot::threshold_opt::OptError::Config(_) | photobot::threshold_opt::OptError::GridTooLarge { .. } => {
                    usage(e.to_string())
                }
                other => other.into(),
            })?;
            Some(json!({ "steps": steps, "best_accuracy": g.best_accuracy, "best_thresholds": g.best_thresholds }))
        }
        None => None,
    };
    println!("best training accuracy {:.4} after {} evaluations", report.best_accuracy, report.evaluations);
    write_run(
        out,
        "optimize-thresholds",
        &args,
        json!({
            "best_accuracy": report.best_accuracy,
            "evaluations": report.evaluations,
            "curve": curve,
            "grid": grid,
        }),
    )
}

// ------------------------------------------------------------------ evaluate / select

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct MethodArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Face quality model used to score faces (needed by heuristic and picture CNN
    /// unless the dataset already carries scores).
    #[arg(long)]
    pub face_model: Option<PathBuf>,
    /// Baseline threshold file.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Heuristic threshold file.
    #[arg(long)]
    pub heuristic: Option<PathBuf>,
    /// Picture CNN model.
    #[arg(long)]
    pub picture_cnn: Option<PathBuf>,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
}

struct Loaded {
    face_model: Option<NetworkModel>,
    baseline: Option<BaselineThresholds>,
    heuristic: Option<HeuristicThresholds>,
    picture_cnn: Option<NetworkModel>,
}

impl Loaded {
    fn new(m: &MethodArgs) -> Result<Self> {
        let baseline = match m.baseline.as_deref().map(load_thresholds).transpose()? {
            Some(ThresholdSet::Baseline(t)) => Some(t),
            Some(ThresholdSet::Heuristic(_)) => return Err(usage("--baseline points at heuristic thresholds")),
            None => None,
        };
        let heuristic = match m.heuristic.as_deref().map(load_thresholds).transpose()? {
            Some(ThresholdSet::Heuristic(t)) => Some(t),
            Some(ThresholdSet::Baseline(_)) => return Err(usage("--heuristic points at baseline thresholds")),
            None => None,
        };
        let loaded = Self {
            face_model: m.face_model.as_deref().map(load_net).transpose()?,
            baseline,
            heuristic,
            picture_cnn: m.picture_cnn.as_deref().map(load_net).transpose()?,
        };
        if loaded.baseline.is_none() && loaded.heuristic.is_none() && loaded.picture_cnn.is_none() {
            return Err(usage("give at least one of --baseline, --heuristic, --picture-cnn"));
        }
        Ok(loaded)
    }

    fn scorers(&self) -> Scorers<'_> {
        Scorers {
            face_model: self.face_model.as_ref(),
            baseline: self.baseline.as_ref(),
            heuristic: self.heuristic.as_ref(),
            picture_cnn: self.picture_cnn.as_ref(),
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub methods: MethodArgs,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let path = require(&args.methods.dataset, "dataset")?;
    let out = require(&args.out, "out")?;
    let loaded = Loaded::new(&args.methods)?;
    let dataset = load_dataset(path, args.methods.image_root.as_ref(), true)?;
    let report = evaluate(&dataset.records, &loaded.scorers())?;
    for m in &report.methods {
        println!(
            "{}: {}",
            m.method,
            m.overall.accuracy.map_or("n/a".to_owned(), |a| format!("{a:.4}"))
        );
    }
    write_json(out, &envelope("evaluate", &args, &report)?)?;
    write_run(out, "evaluate", &args, json!({ "pictures": report.pictures }))
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub methods: MethodArgs,
    /// Pictures per face-count category.
    #[arg(long, default_value_t = SelectionConstraints::default().per_category_quota)]
    pub quota: usize,
    #[arg(long, default_value_t = SelectionConstraints::default().total)]
    pub total: usize,
    /// Allow several picks from one burst.
    #[arg(long)]
    pub allow_same_burst: bool,
    /// Score only the original frames, not their crops.
    #[arg(long)]
    pub no_crops: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn select(args: SelectArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let path = require(&args.methods.dataset, "dataset")?;
    let out = require(&args.out, "out")?;
    let loaded = Loaded::new(&args.methods)?;
    let dataset = load_dataset(path, args.methods.image_root.as_ref(), true)?;
    let cfg = PipelineConfig {
        constraints: SelectionConstraints {
            per_category_quota: args.quota,
            one_per_burst: !args.allow_same_burst,
            total: args.total,
        },
        crops: !args.no_crops,
    };
    let report = run_pipeline(&dataset.records, &loaded.scorers(), &cfg)?;
    for m in &report.methods {
        let picks = report.entries.iter().filter(|e| e.method == m.method.to_string()).count();
        println!("{}: {picks} picks from {} candidates", m.method, m.candidates);
    }
    write_json(out, &envelope("select", &args, &report)?)?;
    write_run(out, "select", &args, json!({ "entries": report.entries.len() }))
}

// ------------------------------------------------------------------ simulate

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Built-in scenario name or a scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Event log (JSON Lines) to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let name = require(&args.scenario, "scenario")?;
    let out = require(&args.out, "out")?;
    let scenario = if Path::new(name).is_file() {
        Scenario::read(name).with_context(|| format!("reading scenario {name}"))?
    } else {
        builtin_scenario(name).map_err(|e| usage(format!("{e}; not a file either")))?
    };
    let outcome = run_scenario(&scenario)?;
    write_event_log(&outcome, out)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (_, e) in outcome.events() {
        let kind = serde_json::to_value(e)?["kind"].as_str().unwrap_or("?").to_owned();
        *counts.entry(kind).or_default() += 1;
    }
    println!(
        "{}: {} steps, finished {}, {} shutter events",
        scenario.name,
        outcome.records.len(),
        outcome.finished,
        outcome.shutter_count()
    );
    write_run(
        out,
        "simulate",
        &json!({ "scenario": args.scenario, "out": args.out, "resolved": scenario }),
        json!({ "steps": outcome.records.len(), "finished": outcome.finished, "events": counts }),
    )
}

// ------------------------------------------------------------------ render-abstract

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub face_model: Option<PathBuf>,
    /// Render only this picture.
    #[arg(long)]
    pub picture_id: Option<String>,
    /// Directory receiving `<picture_id>.pgm` files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// File-system safe version of a picture id.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn render(args: RenderArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let path = require(&args.dataset, "dataset")?;
    let out_dir = require(&args.out_dir, "out-dir")?;
    let mut dataset = load_dataset(path, args.image_root.as_ref(), false)?;
    if let Some(id) = &args.picture_id {
        dataset.records.retain(|p| &p.picture_id == id);
        if dataset.records.is_empty() {
            bail!("picture {id:?} not in {}", path.display());
        }
    }
    let face_model = args.face_model.as_deref().map(load_net).transpose()?;
    score_all(face_model.as_ref(), &mut dataset.records)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    for p in &dataset.records {
        let file = out_dir.join(format!("{}.pgm", file_stem(&p.picture_id)));
        render_abstract(p)?.write_pgm(&file)?;
        written.push(file);
    }
    println!("wrote {} images to {}", written.len(), out_dir.display());
    write_run(&out_dir.join("render-abstract"), "render-abstract", &args, json!({ "images": written }))
}

// ------------------------------------------------------------------ ttest

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TtestArgs {
    /// Ratings file for group A: a JSON array or numbers separated by
    /// whitespace or commas.
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Report file; the result is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn read_ratings(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading ratings {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing ratings {}", path.display()));
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: {t:?} is not a number", path.display())))
        .collect()
}

pub fn ttest(args: TtestArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let a = read_ratings(require(&args.a, "a")?)?;
    let b = read_ratings(require(&args.b, "b")?)?;
    let result = welch_t_test(&a, &b)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(out) = &args.out {
        write_json(out, &envelope("ttest", &args, &result)?)?;
        write_run(out, "ttest", &args, json!({ "t": result.t, "p_one_sided": result.p_one_sided }))?;
    }
    Ok(())
}

// ------------------------------------------------------------------ synth

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Pictures labeled by hidden baseline thresholds.
    ThresholdsBaseline,
    /// Pictures labeled by hidden heuristic thresholds.
    ThresholdsHeuristic,
    /// Single-face pictures with rule-labeled face features.
    Faces,
    /// Face layouts labeled by the layout rule.
    Layouts,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label-flip rate for `faces`.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let config = args.config.clone();
    let args = resolve(args, config.as_deref())?;
    let kind = *require(&args.kind, "kind")?;
    let out = require(&args.out, "out")?;
    if !(0.0..=1.0).contains(&args.noise) {
        return Err(usage(format!("--noise {} outside [0, 1]", args.noise)));
    }
    let records = match kind {
        SynthKind::ThresholdsBaseline => {
            threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Baseline, args.count, args.seed))
        }
        SynthKind::ThresholdsHeuristic => {
            threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Heuristic, args.count, args.seed))
        }
        SynthKind::Layouts => layout_pictures(args.count, args.seed),
        SynthKind::Faces => face_feature_set(args.count, args.noise, args.seed)
            .into_iter()
            .enumerate()
            .map(|(i, mut face)| {
                let side = face.bbox.width();
                face.bbox = BoundingBox::new(side, side, 2 * side, 2 * side).expect("positive box");
                PictureRecord {
                    picture_id: format!("face-{i:05}"),
                    burst_id: format!("burst-{:04}", i / 5),
                    width: 3 * side,
                    height: 3 * side,
                    faces: vec![face],
                    label: None,
                }
            })
            .collect(),
    };
    let dataset = Dataset::new(records, format!("synth:{kind:?}(seed={})", args.seed));
    dataset.write_jsonl(out)?;
    println!("wrote {} pictures to {}", dataset.len(), out.display());
    write_run(out, "synth", &args, json!({ "pictures": dataset.len() }))
}
