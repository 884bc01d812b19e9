//! Subcommand implementations.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use stylodetect::corpus::{
    build_task, corpus_hash, corpus_stats, load_corpus, normalize_text, Category, Klass, TaskName,
    TextSample, Variant,
};
use stylodetect::eval::histogram::{corpus_feature_values, write_histogram_csv};
use stylodetect::eval::text::union_selection;
use stylodetect::eval::{
    ablation_matrix, fold_tables, format_table, histogram, make_splits, task_seed, write_report_csv,
    write_summary_csv, EvalReport, Featurizer, TextTask,
};
use stylodetect::features::{
    assemble, read_feature_csv, write_feature_csv, FeatureRow, FeatureSchema, Providers, Selection,
};
use stylodetect::lm::SentenceScorer;
use stylodetect::ml::{default_grid, tune, ModelKind, SavedModel};
use stylodetect::textproc::structure_with;
use stylodetect::vectorize::SentenceEmbedder;

use crate::config::Settings;
use crate::pipeline::{percentile, Pipeline, PipelineFile, PIPELINE_VERSION};
use crate::providers::Services;
use crate::UsageError;

/// Provenance written to `<out>/run.json` by every command.
#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    params: BTreeMap<&'static str, Value>,
    settings: &'a Settings,
    corpus: Option<CorpusInfo>,
    lexicons: Option<BTreeMap<String, String>>,
    providers: Option<BTreeMap<String, String>>,
    schema: Option<String>,
}

#[derive(Serialize, Clone)]
struct CorpusInfo {
    path: PathBuf,
    samples: usize,
    sha256: String,
}

impl<'a> RunRecord<'a> {
    fn new(command: &'static str, settings: &'a Settings) -> Self {
        RunRecord {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            params: BTreeMap::new(),
            settings,
            corpus: None,
            lexicons: None,
            providers: None,
            schema: None,
        }
    }

    fn param(mut self, key: &'static str, value: impl Serialize) -> Self {
        self.params.insert(key, json!(value));
        self
    }

    fn services(mut self, services: &Services) -> Self {
        self.lexicons = Some(services.lexicons.hashes().clone());
        self.providers = Some(services.ids());
        self.schema = Some(services.text_providers().schema().id());
        self
    }

    fn write(&self) -> anyhow::Result<()> {
        let path = self.settings.out.join("run.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

struct Corpus {
    samples: Vec<TextSample>,
    info: CorpusInfo,
}

fn load(settings: &Settings, flag: Option<PathBuf>) -> anyhow::Result<Corpus> {
    let path = settings.corpus(flag)?;
    if !path.exists() {
        return Err(UsageError(format!("corpus {} does not exist", path.display())).into());
    }
    let samples = load_corpus(&path)?;
    let info = CorpusInfo {
        path,
        samples: samples.len(),
        sha256: corpus_hash(&samples),
    };
    Ok(Corpus { samples, info })
}

fn prepare_out(settings: &Settings) -> anyhow::Result<()> {
    fs::create_dir_all(&settings.out)
        .with_context(|| format!("cannot create output directory {}", settings.out.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn stats(settings: &Settings, corpus: Option<PathBuf>) -> anyhow::Result<()> {
    let corpus = load(settings, corpus)?;
    prepare_out(settings)?;
    let mut csv = Vec::new();
    corpus_stats(&corpus.samples)?.write_csv(&mut csv)?;
    write_file(&settings.out.join("stats.csv"), &csv)?;
    std::io::stdout().write_all(&csv)?;
    let mut run = RunRecord::new("stats", settings);
    run.corpus = Some(corpus.info);
    run.write()
}

pub struct FeaturizeArgs {
    pub corpus: Option<PathBuf>,
    pub task: Option<TaskName>,
    pub selection: Selection,
}

/// Feature matrix of a task (or the whole corpus, label 1 for any AI
/// class). Fitted components see every document, so the output is for
/// inspection, not for evaluation.
pub fn featurize(settings: &Settings, args: FeaturizeArgs) -> anyhow::Result<()> {
    let corpus = load(settings, args.corpus)?;
    let services = Services::build(settings)?;
    prepare_out(settings)?;
    let labeled: Vec<(TextSample, u8)> = match args.task {
        Some(t) => build_task(&corpus.samples, t)?
            .labeled()
            .into_iter()
            .map(|(s, l)| (s.clone(), l))
            .collect(),
        None => corpus
            .samples
            .iter()
            .map(|s| (s.clone(), u8::from(s.klass != Klass::Human)))
            .collect(),
    };
    let name = args.task.map_or("corpus", TaskName::as_str);
    let task = TextTask::new(name, labeled, services.text_providers(), args.selection.clone())?;
    let fitted = task.fit(task.ids())?;
    let vectors = task.vectors(&fitted)?;
    let rows: Vec<FeatureRow> = task
        .ids()
        .iter()
        .zip(task.labels())
        .zip(&vectors)
        .map(|((id, &label), v)| FeatureRow {
            id,
            label,
            values: &v.values,
        })
        .collect();
    let path = settings.out.join("features.csv");
    write_feature_csv(&path, task.schema(), &args.selection, &rows)?;
    eprintln!("wrote {} rows × {} columns to {}", rows.len(), task.schema().columns_for(&args.selection).len(), path.display());
    let mut run = RunRecord::new("featurize", settings)
        .param("task", args.task)
        .param("selection", &args.selection.name)
        .services(&services);
    run.corpus = Some(corpus.info);
    run.write()
}

pub struct TrainArgs {
    pub corpus: Option<PathBuf>,
    pub task: TaskName,
    pub classifier: ModelKind,
    pub selection: Selection,
    pub seed: u64,
    pub shared_split_seed: bool,
    pub name: Option<String>,
}

/// Tune on the first split's train/validation parts and persist the
/// chosen model with its fitted text components and training matrix.
pub fn train(settings: &Settings, args: TrainArgs) -> anyhow::Result<()> {
    let corpus = load(settings, args.corpus)?;
    let services = Services::build(settings)?;
    prepare_out(settings)?;
    let task = build_task(&corpus.samples, args.task)?;
    let tt = TextTask::from_task(&task, services.text_providers(), args.selection.clone())?;
    let split_seed = task_seed(args.seed, args.task, args.shared_split_seed);
    let plan = make_splits(&tt.labeled_ids(), split_seed)?;
    let fold = &plan.folds[0];
    let table = tt.fold_table(fold)?;
    let cols = tt.columns(&args.selection)?;
    let x = table.x.select_cols(&cols);
    let index: HashMap<&str, usize> = tt.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let rows = |ids: &[String]| -> Vec<usize> { ids.iter().map(|id| index[id.as_str()]).collect() };
    let (train_rows, val_rows) = (rows(&fold.train), rows(&fold.val));
    let labels = |r: &[usize]| -> Vec<u8> { r.iter().map(|&i| tt.labels()[i]).collect() };
    let (tx, ty) = (x.select_rows(&train_rows), labels(&train_rows));
    let (vx, vy) = (x.select_rows(&val_rows), labels(&val_rows));
    let tuned = tune((&tx, &ty), (&vx, &vy), &default_grid(args.classifier), fold.seed)?;

    let name = args
        .name
        .unwrap_or_else(|| format!("{}_{}", args.classifier.label().to_lowercase(), args.task));
    let out = &settings.out;
    let tfidf_file = match &table.fitted.tfidf {
        Some(m) => {
            let f = format!("{name}.tfidf.json");
            write_file(&out.join(&f), m.to_json()?.as_bytes())?;
            Some(f)
        }
        None => None,
    };
    let lm_file = match &table.fitted.lm {
        Some(lm) => {
            let f = format!("{name}.lm.json");
            write_file(&out.join(&f), lm.models()[0].to_json()?.as_bytes())?;
            Some(f)
        }
        None => None,
    };
    let features_file = format!("{name}.features.csv");
    let feature_rows: Vec<FeatureRow> = train_rows
        .iter()
        .enumerate()
        .map(|(r, &i)| FeatureRow {
            id: &tt.ids()[i],
            label: ty[r],
            values: tx.row(r),
        })
        .collect();
    write_feature_csv(&out.join(&features_file), tt.schema(), &args.selection, &feature_rows)?;
    let perplexity = services.ids()["perplexity"].clone();
    let file = PipelineFile {
        version: PIPELINE_VERSION,
        task: args.task,
        selection: args.selection.name.clone(),
        schema_id: tt.schema().id(),
        tfidf_dim: services.text_providers().tfidf_dim,
        embedding_dim: services.embedder.dim(),
        columns: tt.column_names(&args.selection),
        seed: args.seed,
        split_seed,
        perplexity,
        tfidf_file,
        lm_file,
        features_file,
        classifier: SavedModel::new(tuned.params, tuned.model),
    };
    let model_path = out.join(format!("{name}.json"));
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    write_file(&model_path, text.as_bytes())?;
    println!(
        "{} on {} [{}]: {} (val acc {:.4}, f1 {:.4}) -> {}",
        args.classifier,
        args.task,
        args.selection,
        tuned.params,
        tuned.val.acc,
        tuned.val.f1,
        model_path.display()
    );
    let mut run = RunRecord::new("train", settings)
        .param("task", args.task)
        .param("classifier", args.classifier)
        .param("selection", &args.selection.name)
        .param("seed", args.seed)
        .param("split_seed", split_seed)
        .param("model", &model_path)
        .services(&services);
    run.corpus = Some(corpus.info);
    run.write()
}

fn write_reports(settings: &Settings, reports: &[EvalReport]) -> anyhow::Result<()> {
    let out = &settings.out;
    let mut buf = Vec::new();
    write_report_csv(&mut buf, reports)?;
    write_file(&out.join("report.csv"), &buf)?;
    buf.clear();
    write_summary_csv(&mut buf, reports)?;
    write_file(&out.join("summary.csv"), &buf)?;
    let table = format_table(reports);
    write_file(&out.join("table.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn run_tasks(
    corpus: &Corpus,
    services: &Services,
    tasks: &[TaskName],
    selections: &[Selection],
    kinds: &[ModelKind],
    seed: u64,
    shared: bool,
) -> anyhow::Result<(Vec<EvalReport>, BTreeMap<String, u64>)> {
    let needed = union_selection(selections);
    let mut reports = Vec::new();
    let mut seeds = BTreeMap::new();
    for &name in tasks {
        let task = build_task(&corpus.samples, name)?;
        let tt = TextTask::from_task(&task, services.text_providers(), needed.clone())?;
        let split_seed = task_seed(seed, name, shared);
        seeds.insert(name.to_string(), split_seed);
        let plan = make_splits(&tt.labeled_ids(), split_seed)?;
        let tables = fold_tables(&tt, &plan).with_context(|| format!("featurizing {name}"))?;
        let cells = ablation_matrix(&tt, &plan, &tables, selections, kinds, &default_grid)
            .with_context(|| format!("evaluating {name}"))?;
        reports.extend(cells);
    }
    Ok((reports, seeds))
}

pub struct EvaluateArgs {
    pub corpus: Option<PathBuf>,
    pub task: TaskName,
    pub classifiers: Vec<ModelKind>,
    pub selection: Selection,
    pub seed: u64,
    pub shared_split_seed: bool,
}

pub fn evaluate(settings: &Settings, args: EvaluateArgs) -> anyhow::Result<()> {
    let corpus = load(settings, args.corpus.clone())?;
    let services = Services::build(settings)?;
    prepare_out(settings)?;
    let (reports, seeds) = run_tasks(
        &corpus,
        &services,
        &[args.task],
        std::slice::from_ref(&args.selection),
        &args.classifiers,
        args.seed,
        args.shared_split_seed,
    )?;
    write_reports(settings, &reports)?;
    let mut run = RunRecord::new("evaluate", settings)
        .param("task", args.task)
        .param("classifiers", &args.classifiers)
        .param("selection", &args.selection.name)
        .param("seed", args.seed)
        .param("shared_split_seed", args.shared_split_seed)
        .param("split_seeds", seeds)
        .services(&services);
    run.corpus = Some(corpus.info);
    run.write()
}

pub struct AblateArgs {
    pub corpus: Option<PathBuf>,
    pub tasks: Vec<TaskName>,
    pub seed: u64,
    pub shared_split_seed: bool,
}

pub fn ablate(settings: &Settings, args: AblateArgs) -> anyhow::Result<()> {
    let corpus = load(settings, args.corpus.clone())?;
    let services = Services::build(settings)?;
    prepare_out(settings)?;
    let (reports, seeds) = run_tasks(
        &corpus,
        &services,
        &args.tasks,
        &Selection::presets(),
        &ModelKind::ALL,
        args.seed,
        args.shared_split_seed,
    )?;
    write_reports(settings, &reports)?;
    let mut run = RunRecord::new("ablate", settings)
        .param("tasks", &args.tasks)
        .param("seed", args.seed)
        .param("shared_split_seed", args.shared_split_seed)
        .param("split_seeds", seeds)
        .services(&services);
    run.corpus = Some(corpus.info);
    run.write()
}

pub struct PredictArgs {
    pub file: PathBuf,
    pub model: PathBuf,
    pub title: Option<String>,
}

pub fn predict(settings: &Settings, args: PredictArgs) -> anyhow::Result<()> {
    if !args.file.is_file() {
        return Err(UsageError(format!("{} is not a file", args.file.display())).into());
    }
    if !args.model.is_file() {
        return Err(UsageError(format!("model {} does not exist", args.model.display())).into());
    }
    let pipeline = Pipeline::load(&args.model)?;
    let services = Services::build(settings)?;
    prepare_out(settings)?;
    let schema = FeatureSchema::new(pipeline.file.tfidf_dim, services.embedder.dim());
    if schema.id() != pipeline.file.schema_id {
        anyhow::bail!(
            "model was trained with feature schema {} but the configured providers give {}",
            pipeline.file.schema_id,
            schema.id()
        );
    }
    let raw = fs::read_to_string(&args.file)
        .with_context(|| format!("cannot read {}", args.file.display()))?;
    let stem = args
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let sample = TextSample {
        id: stem.clone(),
        // category, class and variant do not enter any feature
        category: Category::ALL[0],
        topic_title: args.title.clone().unwrap_or(stem),
        klass: Klass::Human,
        variant: Variant::None,
        body: normalize_text(&raw),
    };
    if sample.body.trim().is_empty() {
        return Err(UsageError(format!("{} is empty", args.file.display())).into());
    }
    let doc = structure_with(&sample.body, &services.lexicons)?;
    let scorer: Option<&dyn SentenceScorer> = match &pipeline.lm {
        Some(lm) => Some(lm as &dyn SentenceScorer),
        None => services.scorer.as_ref().map(|s| s as &dyn SentenceScorer),
    };
    let providers = Providers {
        lexicons: &services.lexicons,
        scorer,
        grammar: &services.grammar,
        feedback: Some(&services.feedback),
        impute_ai_feedback: services.impute_ai_feedback,
        tfidf: pipeline.tfidf.as_ref(),
        embedder: &services.embedder,
    };
    let fv = assemble(&sample, &doc, &providers, &schema, &pipeline.selection)?;
    let proba = pipeline.file.classifier.model.proba_row(&fv.values)?;
    let verdict = if proba > 0.5 { "AI" } else { "human" };

    let (_, labels, header, rows) = read_feature_csv(&pipeline.features)?;
    if header != pipeline.file.columns {
        anyhow::bail!("{} does not match the model's columns", pipeline.features.display());
    }
    let column: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    println!("verdict: {verdict}");
    println!("probability_ai: {proba:.4}");
    println!("{:<28} {:>14} {:>10} {:>10}", "feature", "value", "human_pct", "ai_pct");
    let mut report = Vec::new();
    for f in schema.selected(&pipeline.selection).filter(|f| f.arity == 1) {
        let c = column[f.name.as_str()];
        let class_values = |label: u8| -> Vec<f64> {
            rows.iter().zip(&labels).filter(|(_, &l)| l == label).map(|(r, _)| r[c]).collect()
        };
        let v = fv.values[c];
        let h = percentile(&class_values(0), v);
        let a = percentile(&class_values(1), v);
        let fmt = |p: Option<f64>| p.map_or_else(|| "-".to_string(), |p| format!("{p:.1}"));
        println!("{:<28} {:>14.4} {:>10} {:>10}", f.name, v, fmt(h), fmt(a));
        report.push(json!({"feature": f.name, "value": v, "human_percentile": h, "ai_percentile": a}));
    }
    RunRecord::new("predict", settings)
        .param("file", &args.file)
        .param("model", &args.model)
        .param("verdict", verdict)
        .param("probability_ai", proba)
        .param("features", report)
        .services(&services)
        .write()
}

pub struct HistArgs {
    pub corpus: Option<PathBuf>,
    pub feature: String,
    pub bins: usize,
}

pub fn hist(settings: &Settings, args: HistArgs) -> anyhow::Result<()> {
    if args.bins == 0 {
        return Err(UsageError("--bins must be at least 1".into()).into());
    }
    let corpus = load(settings, args.corpus.clone())?;
    let services = Services::build(settings)?;
    let providers = services.text_providers();
    if !providers.schema().features.iter().any(|f| f.name == args.feature && f.arity == 1) {
        return Err(UsageError(format!("unknown scalar feature `{}`", args.feature)).into());
    }
    prepare_out(settings)?;
    let values = corpus_feature_values(&corpus.samples, &args.feature, providers)?;
    let rows = histogram(&args.feature, &values, args.bins)?;
    let mut buf = Vec::new();
    write_histogram_csv(&mut buf, &rows)?;
    write_file(&settings.out.join(format!("hist_{}.csv", args.feature)), &buf)?;
    std::io::stdout().write_all(&buf)?;
    let mut run = RunRecord::new("hist", settings)
        .param("feature", &args.feature)
        .param("bins", args.bins)
        .services(&services);
    run.corpus = Some(corpus.info);
    run.write()
}
