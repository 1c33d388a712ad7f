//! Command-line pipeline: synthesise or prepare data, train, grid search,
//! evaluate with a token method, and plot attention.
//!
//! Every command writes a `run.json` [`RunManifest`] into its output
//! directory. All randomness in a command comes from one generator seeded by
//! `--seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, PrepareOptions, PreparedDataset, ResolvedPost, Split};
use crate::error::{Error, Result};
use crate::explainers::{self, ExplanationRecord, LimeConfig, Method};
use crate::metrics::{self, PredictionRecord, ReportOptions};
use crate::models::checkpoint;
use crate::models::{CellKind, HeadKind, Model};
use crate::plot::AttentionChart;
use crate::synthetic::{self, SynthConfig};
use crate::training::{self, HyperGrid, TrainConfig};

/// Environment variable consulted when `--data` is not given.
pub const DATA_ROOT_ENV: &str = "BIATT_DATA_ROOT";
pub const RUN_MANIFEST: &str = "run.json";
pub const EPOCH_LOG: &str = "epochs.csv";

#[derive(Debug, Parser)]
#[command(name = "biatt", version, about = "Attention-supervised BiRNN hate-speech classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic annotated corpus and matching word vectors.
    Synth(SynthArgs),
    /// Resolve labels and rationales, split, build the vocabulary and embeddings.
    Prepare(PrepareArgs),
    /// Train one model and save its checkpoint.
    Train(TrainArgs),
    /// Train every configuration of a grid and rank them by validation macro-F1.
    Grid(GridArgs),
    /// Score a checkpoint with a token method and write the metric report.
    Eval(EvalArgs),
    /// Chart ground-truth attention against two checkpoints for given posts.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub posts: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub embedding_dim: usize,
    /// Fraction of the lexicon written to the vectors file.
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Word vectors in `token v1 ... vD` text form; random rows when omitted.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub min_freq: usize,
    #[arg(long, default_value_t = data::DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 300)]
    pub embedding_dim: usize,
}

/// Flags that override fields of a JSON training config.
#[derive(Debug, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub head_kind: Option<HeadKind>,
    #[arg(long)]
    pub dropout_pre: Option<f64>,
    #[arg(long)]
    pub attention_hidden: Option<usize>,
    #[arg(long)]
    pub supervise_attention: Option<bool>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub train_embeddings: Option<bool>,
    #[arg(long)]
    pub dropout_embed: Option<f64>,
    #[arg(long)]
    pub dropout_fc: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v; })*
            };
        }
        set!(
            lambda => lambda,
            learning_rate => learning_rate,
            epochs => epochs,
            batch_size => batch_size,
            seed => seed,
            head_kind => head_kind,
            dropout_pre => dropout_pre,
            supervise_attention => supervise_attention,
            patience => patience,
            clip_norm => clip_norm,
            cell => encoder.cell,
            hidden_units => encoder.hidden_units,
            train_embeddings => encoder.train_embeddings,
            dropout_embed => encoder.dropout_embed,
            dropout_fc => encoder.dropout_fc,
        );
        if self.attention_hidden.is_some() {
            c.attention_hidden = self.attention_hidden;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training config; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prepared data directory (falls back to the data-root variable).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// JSON grid of value lists; the full default grid when omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Base training config that the grid values are applied to.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Train at most this many sampled configurations.
    #[arg(long)]
    pub max_configs: Option<usize>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Token method: attn, lime or shap.
    #[arg(long, default_value = "attn")]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Tokens selected for the discrete metrics.
    #[arg(long, default_value_t = explainers::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, default_value_t = 500)]
    pub lime_samples: usize,
    #[arg(long, default_value_t = 0.25)]
    pub kernel_width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ridge_alpha: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Evaluate only the first N posts of the split.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Average the precision-recall area per post instead of pooling tokens.
    #[arg(long)]
    pub auprc_per_post: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotFormat {
    Svg,
    Csv,
    Both,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub post_id: Vec<String>,
    /// Two checkpoint directories, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PlotFormat::Both)]
    pub format: PlotFormat,
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_secs: f64,
    /// SHA-256 of each output file, keyed by file name.
    pub artifact_hashes: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Run {
    command: &'static str,
    started: Instant,
    out: PathBuf,
    inputs: Vec<PathBuf>,
}

impl Run {
    fn start(command: &'static str, out: &Path, inputs: Vec<PathBuf>) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Run {
            command,
            started: Instant::now(),
            out: out.to_path_buf(),
            inputs,
        })
    }

    fn finish(self, config: impl Serialize, seed: u64) -> Result<RunManifest> {
        let mut names: Vec<PathBuf> = Vec::new();
        collect_files(&self.out, &self.out, &mut names)?;
        names.retain(|p| p != Path::new(RUN_MANIFEST));
        names.sort();
        let mut artifact_hashes = BTreeMap::new();
        for n in &names {
            artifact_hashes.insert(n.display().to_string(), sha256_file(&self.out.join(n))?);
        }
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::json(&self.out, e))?,
            seed,
            inputs: self.inputs,
            outputs: names.iter().map(|n| self.out.join(n)).collect(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            artifact_hashes,
        };
        let path = self.out.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("inside root").to_path_buf());
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// `--data` if given, else the data-root variable.
pub fn resolve_data_dir(flag: Option<&Path>) -> Result<PathBuf> {
    match flag {
        Some(p) => Ok(p.to_path_buf()),
        None => std::env::var_os(DATA_ROOT_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("no --data given and {DATA_ROOT_ENV} is not set"))),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Prepare(a) => cmd_prepare(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Grid(a) => cmd_grid(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Plot(a) => cmd_plot(&a).map(|_| ()),
    }
}

pub const SYNTH_DATASET: &str = "dataset.json";
pub const SYNTH_VECTORS: &str = "vectors.txt";

pub fn cmd_synth(a: &SynthArgs) -> Result<RunManifest> {
    let run = Run::start("synth", &a.out, Vec::new())?;
    let cfg = SynthConfig {
        posts: a.posts,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let posts = synthetic::generate(&cfg)?;
    data::write_dataset(&a.out.join(SYNTH_DATASET), &posts)?;
    synthetic::write_embeddings(&a.out.join(SYNTH_VECTORS), a.embedding_dim, a.coverage, a.seed)?;
    println!(
        "wrote {} posts and {}-d vectors to {}",
        posts.len(),
        a.embedding_dim,
        a.out.display()
    );
    run.finish(
        serde_json::json!({ "synth": cfg, "embedding_dim": a.embedding_dim, "coverage": a.coverage }),
        a.seed,
    )
}

pub fn cmd_prepare(a: &PrepareArgs) -> Result<RunManifest> {
    let mut inputs = vec![a.dataset.clone()];
    inputs.extend(a.embeddings.clone());
    let run = Run::start("prepare", &a.out, inputs)?;
    let opts = PrepareOptions {
        seed: a.seed,
        min_freq: a.min_freq,
        max_len: a.max_len,
        embedding_dim: a.embedding_dim,
        ..PrepareOptions::default()
    };
    let report = data::parse_dataset(&a.dataset)?;
    let (prepared, summary) = data::prepare(report, a.embeddings.as_deref(), &opts)?;
    prepared.save(&a.out)?;
    for r in &summary.rejected {
        eprintln!("rejected {}: {}", r.post_id, r.reason);
    }
    println!(
        "{} posts parsed, {} rejected, {} without a majority label, {} kept",
        summary.parsed,
        summary.rejected.len(),
        summary.undecided,
        prepared.posts.len()
    );
    println!(
        "split sizes: train {} / val {} / test {}; vocabulary {}; {} vectors matched",
        prepared.splits.train.len(),
        prepared.splits.val.len(),
        prepared.splits.test.len(),
        prepared.vocab.len(),
        summary.matched_embeddings
    );
    for (class, n) in &summary.class_counts {
        println!("class {class}: {n}");
    }
    for (community, n) in &summary.community_counts {
        println!("community {community}: {n}");
    }
    write_json(&a.out.join("summary.json"), &summary)?;
    run.finish(
        serde_json::json!({
            "min_freq": a.min_freq,
            "max_len": a.max_len,
            "embedding_dim": a.embedding_dim,
            "ratios": opts.ratios,
        }),
        a.seed,
    )
}

/// Config file (or defaults) with flag overrides, sized to the prepared data.
pub fn load_train_config(
    path: Option<&Path>,
    overrides: &TrainOverrides,
    prepared: &PreparedDataset,
) -> Result<TrainConfig> {
    let mut config = match path {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    overrides.apply(&mut config);
    config.encoder.embedding_dim = prepared.embeddings.dim;
    config.validate()?;
    Ok(config)
}

pub fn cmd_train(a: &TrainArgs) -> Result<RunManifest> {
    let data_dir = resolve_data_dir(a.data.as_deref())?;
    let prepared = PreparedDataset::load(&data_dir)?;
    let config = load_train_config(a.config.as_deref(), &a.overrides, &prepared)?;
    let mut inputs = vec![data_dir];
    inputs.extend(a.config.clone());
    let run = Run::start("train", &a.out, inputs)?;
    let outcome = training::train(
        &config,
        &prepared.split(Split::Train),
        &prepared.split(Split::Val),
        prepared.vocab.len(),
        Some(&prepared.embeddings),
    )?;
    checkpoint::save(&a.out, &outcome.model, config.seed, &prepared.vocab.content_hash())?;
    training::write_epoch_log(&a.out.join(EPOCH_LOG), &outcome.epochs)?;
    println!(
        "trained {} epochs; best validation macro-F1 {:.4} at epoch {}",
        outcome.epochs.len(),
        outcome.best_val_macro_f1,
        outcome.best_epoch
    );
    run.finish(&config, config.seed)
}

pub const GRID_RESULTS: &str = "grid.csv";

pub fn cmd_grid(a: &GridArgs) -> Result<RunManifest> {
    let data_dir = resolve_data_dir(a.data.as_deref())?;
    let prepared = PreparedDataset::load(&data_dir)?;
    let base = load_train_config(a.config.as_deref(), &a.overrides, &prepared)?;
    let mut grid: HyperGrid = match &a.grid {
        Some(p) => read_json(p)?,
        None => HyperGrid::default(),
    };
    if a.max_configs.is_some() {
        grid.max_configs = a.max_configs;
    }
    let mut inputs = vec![data_dir];
    inputs.extend(a.grid.clone());
    inputs.extend(a.config.clone());
    let run = Run::start("grid", &a.out, inputs)?;
    let rows = training::grid_search(
        &grid,
        &base,
        &prepared.split(Split::Train),
        &prepared.split(Split::Val),
        prepared.vocab.len(),
        Some(&prepared.embeddings),
    )?;
    let path = a.out.join(GRID_RESULTS);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "rank",
        "val_macro_f1",
        "best_epoch",
        "cell",
        "hidden_units",
        "train_embeddings",
        "dropout_embed",
        "dropout_fc",
        "dropout_pre",
        "learning_rate",
        "lambda",
    ])?;
    for r in &rows {
        let c = &r.config;
        w.write_record([
            r.rank.to_string(),
            format!("{:.6}", r.val_macro_f1),
            r.best_epoch.to_string(),
            c.encoder.cell.name().to_string(),
            c.encoder.hidden_units.to_string(),
            c.encoder.train_embeddings.to_string(),
            c.encoder.dropout_embed.to_string(),
            c.encoder.dropout_fc.to_string(),
            c.dropout_pre.to_string(),
            c.learning_rate.to_string(),
            c.lambda.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    if let Some(best) = rows.first() {
        println!(
            "{} configurations; best validation macro-F1 {:.4}",
            rows.len(),
            best.val_macro_f1
        );
    }
    run.finish(serde_json::json!({ "grid": grid, "base": base }), base.seed)
}

pub const PREDICTIONS: &str = "predictions.jsonl";
pub const EXPLANATIONS: &str = "explanations.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// Loads a checkpoint and checks that it was trained on this vocabulary.
pub fn load_checkpoint(dir: &Path, prepared: &PreparedDataset) -> Result<(Model<f32>, checkpoint::CheckpointManifest)> {
    let (model, manifest) = checkpoint::load(dir)?;
    let hash = prepared.vocab.content_hash();
    if manifest.vocab_hash != hash {
        return Err(Error::Contract(format!(
            "checkpoint {} was trained on vocabulary {}, data has {}",
            dir.display(),
            manifest.vocab_hash,
            hash
        )));
    }
    Ok((model, manifest))
}

/// Builds the evaluation record for one post. `Ok(None)` when the method
/// cannot handle the post (Shapley values on long posts).
pub fn evaluate_post(
    model: &Model<f32>,
    post: &ResolvedPost,
    method: Method,
    top_k: usize,
    lime: &LimeConfig,
) -> Result<Option<(PredictionRecord, ExplanationRecord)>> {
    let out = model.forward(&post.token_ids)?;
    let probs = out.probs();
    let predicted = out.predicted();
    let explanation = match method {
        Method::Attn => explainers::attention_explain(model, &post.token_ids)?,
        Method::Lime => explainers::lime_explain_class(model, &post.token_ids, predicted, lime)?,
        Method::Shap => match explainers::shap_exact(model, &post.token_ids, predicted) {
            Ok(e) => e,
            Err(Error::TooManyTokens { .. }) => return Ok(None),
            Err(e) => return Err(e),
        },
    }
    .with_selection(top_k)?;
    let selected = explanation.selected.clone().expect("selection attached");
    let faith = metrics::faithfulness(model, &post.token_ids, &selected)?;
    let record = PredictionRecord {
        post_id: post.post_id.clone(),
        class_probs: probs,
        predicted_label: data::Label::from_index(predicted).expect("class index"),
        gt_label: post.label,
        communities: post.communities.clone(),
        token_scores: explanation.token_scores.clone(),
        selected,
        gt_rationale: post.gt_rationale.clone(),
        gt_attention: post.gt_attention.clone(),
        comprehensiveness: Some(faith.comprehensiveness),
        sufficiency: Some(faith.sufficiency),
    };
    Ok(Some((record, ExplanationRecord::new(&post.post_id, &explanation))))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<RunManifest> {
    let data_dir = resolve_data_dir(a.data.as_deref())?;
    let prepared = PreparedDataset::load(&data_dir)?;
    let (model, manifest) = load_checkpoint(&a.checkpoint, &prepared)?;
    let run = Run::start("eval", &a.out, vec![data_dir, a.checkpoint.clone()])?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut posts = prepared.split(a.split.into());
    if let Some(n) = a.limit {
        posts.truncate(n);
    }
    let mut records = Vec::with_capacity(posts.len());
    let mut explanations = Vec::with_capacity(posts.len());
    let mut skipped = 0usize;
    for post in posts {
        let lime = LimeConfig {
            n_samples: a.lime_samples,
            kernel_width: a.kernel_width,
            ridge_alpha: a.ridge_alpha,
            seed: rng.gen(),
        };
        match evaluate_post(&model, post, a.method, a.top_k, &lime)? {
            Some((r, e)) => {
                records.push(r);
                explanations.push(e);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!(
            "warning: skipped {skipped} posts longer than {} tokens for exact Shapley values",
            explainers::MAX_SHAP_TOKENS
        );
    }
    let label = format!("{:?}[{}]", manifest.architecture, a.method.name());
    let opts = ReportOptions {
        auprc_per_post: a.auprc_per_post,
        ..ReportOptions::default()
    };
    let mut report = metrics::evaluate(&label, &records, &opts)?;
    report.skipped = skipped;
    data::write_jsonl(&a.out.join(PREDICTIONS), &records)?;
    data::write_jsonl(&a.out.join(EXPLANATIONS), &explanations)?;
    report.save_json(&a.out.join(REPORT_JSON))?;
    report.save_table(&a.out.join(REPORT_CSV))?;
    println!("{}", metrics::TABLE_COLUMNS.join(" | "));
    let cells: Vec<String> = report
        .table_row()
        .iter()
        .map(|v| v.map_or("-".to_string(), |x| format!("{x:.3}")))
        .collect();
    println!("{}", cells.join(" | "));
    run.finish(
        serde_json::json!({
            "method": a.method,
            "split": format!("{:?}", a.split),
            "top_k": a.top_k,
            "lime_samples": a.lime_samples,
            "kernel_width": a.kernel_width,
            "ridge_alpha": a.ridge_alpha,
            "limit": a.limit,
            "auprc_per_post": a.auprc_per_post,
        }),
        a.seed,
    )
}

fn checkpoint_label(m: &checkpoint::CheckpointManifest) -> String {
    match m.architecture {
        HeadKind::BiAtt => "BiAtt-BiRNN".to_string(),
        HeadKind::Matrix => "BiRNN-Attn".to_string(),
    }
}

/// Safe file stem for a post id.
fn file_stem(post_id: &str) -> String {
    post_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_plot(a: &PlotArgs) -> Result<RunManifest> {
    if a.checkpoints.len() != 2 {
        return Err(Error::Config(format!(
            "--checkpoints needs exactly two directories, got {}",
            a.checkpoints.len()
        )));
    }
    let data_dir = resolve_data_dir(a.data.as_deref())?;
    let prepared = PreparedDataset::load(&data_dir)?;
    let (model_a, man_a) = load_checkpoint(&a.checkpoints[0], &prepared)?;
    let (model_b, man_b) = load_checkpoint(&a.checkpoints[1], &prepared)?;
    let posts = a
        .post_id
        .iter()
        .map(|id| {
            prepared
                .get(id)
                .ok_or_else(|| Error::Lookup(format!("post {id:?} is not in the prepared data")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut inputs = vec![data_dir];
    inputs.extend(a.checkpoints.iter().cloned());
    let run = Run::start("plot", &a.out, inputs)?;
    let (mut label_a, mut label_b) = (checkpoint_label(&man_a), checkpoint_label(&man_b));
    if label_a == label_b {
        label_a.push_str(" (A)");
        label_b.push_str(" (B)");
    }
    for post in posts {
        let chart = AttentionChart {
            post_id: post.post_id.clone(),
            tokens: post.tokens.clone(),
            gt: post.gt_attention.clone(),
            model_a: model_a.forward(&post.token_ids)?.attention,
            model_b: model_b.forward(&post.token_ids)?.attention,
            label_a: label_a.clone(),
            label_b: label_b.clone(),
        };
        let stem = file_stem(&post.post_id);
        if matches!(a.format, PlotFormat::Svg | PlotFormat::Both) {
            chart.write_svg(&a.out.join(format!("{stem}.svg")))?;
        }
        if matches!(a.format, PlotFormat::Csv | PlotFormat::Both) {
            chart.write_csv(&a.out.join(format!("{stem}.csv")))?;
        }
    }
    run.finish(
        serde_json::json!({ "post_ids": a.post_id, "format": format!("{:?}", a.format) }),
        0,
    )
}
