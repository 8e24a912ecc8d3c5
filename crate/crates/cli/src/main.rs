//! Command-line front end for the preference-alignment pipeline.
//!
//! One subcommand per pipeline stage: pair generation, cluster-based
//! subsampling, policy training, reward-model training, benchmark
//! evaluation, response scoring, and the tuning grid. Machine-readable
//! results go to stdout, progress notes to stderr (`--quiet` silences
//! them), and every file written lands atomically. Exit codes: 0 on
//! success, 1 when inputs fail validation, 2 on I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prefalign::cluster::{
    self, kmeans, stratified_resample, ClusterError, RatioSpec, DEFAULT_K,
};
use prefalign::data::{write_atomic, DataError, Dataset};
use prefalign::eval::{eval_reward_model, score_dataset, CritiqueMode, EvalError};
use prefalign::pairs::{
    attach_margins, attach_vision_negatives, pair_records_to_jsonl, PairError, ScoreTable,
};
use prefalign::reward::{
    score_records_from_jsonl, score_records_to_jsonl, score_table, RewardError, RewardModelParams,
};
use prefalign::trainer::{
    extract_pairs, grid_search, history_to_jsonl, resume_policy, resume_reward, train_policy,
    train_reward, Checkpoint, CheckpointKind, MarginSource, TrainConfig, TrainError,
    DEFAULT_LR_GRID, DEFAULT_SFT_GRID,
};

#[derive(Parser)]
#[command(
    name = "prefalign",
    version,
    about = "Preference-alignment pipeline: pairs, sampling, training, evaluation",
    disable_help_subcommand = true
)]
struct Cli {
    /// Silence progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand ranked responses into comparison pairs with score margins
    GenPairs(GenPairsArgs),
    /// Cluster items by feature and draw a diverse or ratio-bound subsample
    ClusterSample(ClusterSampleArgs),
    /// Train a policy against a frozen reference with a preference objective
    TrainDpo(TrainDpoArgs),
    /// Train the critique-conditioned reward model
    TrainRm(TrainRmArgs),
    /// Evaluate a reward-model checkpoint on a ranked benchmark
    EvalRm(EvalRmArgs),
    /// Score every response of a dataset with a reward-model checkpoint
    Score(ScoreArgs),
    /// Sweep supervised weight x learning rate and report the best cell
    GridSearch(GridSearchArgs),
}

#[derive(Args)]
struct GenPairsArgs {
    /// Ranked-response dataset (JSONL)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Response scores (JSONL) supplying margins; omitted = all margins 0
    #[arg(long, value_name = "FILE")]
    rewards: Option<PathBuf>,
    /// Where to write the pair records (JSONL)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also attach perturbed-query negatives with this mixing coefficient
    #[arg(long, value_name = "ALPHA")]
    vision_alpha: Option<f64>,
    /// Token vocabulary size; inferred from the data when omitted
    #[arg(long, value_name = "N")]
    vocab_size: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleFormat {
    /// Selected items as dataset JSONL
    Lines,
    /// JSON summary with selected ids and cluster statistics
    Json,
}

#[derive(Args)]
struct ClusterSampleArgs {
    /// Input dataset (JSONL)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Number of clusters
    #[arg(long, default_value_t = DEFAULT_K, value_name = "N")]
    k: usize,
    /// Iteration cap for center refinement
    #[arg(long, default_value_t = 50, value_name = "N")]
    max_iters: usize,
    /// Draw this many items from every cluster
    #[arg(long, value_name = "N", conflicts_with_all = ["ratio", "total"])]
    per_cluster: Option<usize>,
    /// Category ratio spec, e.g. "Long=4,Short=5,MCQ=1"
    #[arg(long, value_name = "SPEC", requires = "total")]
    ratio: Option<String>,
    /// Total sample size for --ratio
    #[arg(long, value_name = "N", requires = "ratio")]
    total: Option<usize>,
    /// Output format
    #[arg(long, value_enum, default_value_t = SampleFormat::Lines)]
    format: SampleFormat,
    /// L2-normalize feature vectors before clustering
    #[arg(long)]
    normalize: bool,
    /// Sampling seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainDpoArgs {
    /// Training dataset (JSONL)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Config file (JSON object or KEY=VALUE pairs); defaults when omitted
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Response scores (JSONL) supplying pair margins
    #[arg(long, value_name = "FILE", conflicts_with = "rm")]
    rewards: Option<PathBuf>,
    /// Reward-model checkpoint that scores margins on the fly
    #[arg(long, value_name = "FILE")]
    rm: Option<PathBuf>,
    /// Override the config's objective (dpo, margin-dpo, vision-dpo)
    #[arg(long, value_name = "NAME")]
    objective: Option<String>,
    /// Where to write the final checkpoint
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Where to write the per-step training log (JSONL)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's step count (with --resume: the new target)
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Override the config's learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Continue from this checkpoint (its config applies) instead of fresh
    #[arg(long, value_name = "FILE", conflicts_with_all = ["config", "seed", "lr", "objective"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRmArgs {
    /// Training dataset with critique annotations (JSONL)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Config file (JSON object or KEY=VALUE pairs); defaults when omitted
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Train the scoring head alone, leaving the critique head untouched
    #[arg(long)]
    no_critique_task: bool,
    /// Where to write the final checkpoint
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Where to write the per-step training log (JSONL)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's step count (with --resume: the new target)
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Override the config's learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Continue from this checkpoint (its config applies) instead of fresh
    #[arg(long, value_name = "FILE", conflicts_with_all = ["config", "seed", "lr", "no_critique_task"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRmArgs {
    /// Benchmark dataset (JSONL)
    #[arg(long, value_name = "FILE")]
    bench: PathBuf,
    /// Reward-model checkpoint
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    /// Critique regime: inferred, gt, or none
    #[arg(long, default_value = "inferred")]
    mode: CritiqueMode,
    /// Emit a flat CSV table instead of the JSON report
    #[arg(long)]
    csv: bool,
    /// Cap on decoded critiques in inferred mode
    #[arg(long, default_value_t = 16, value_name = "N")]
    max_critique_len: usize,
    /// Write here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Dataset whose responses to score (JSONL)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Reward-model checkpoint
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    /// Critique regime: inferred, gt, or none
    #[arg(long, default_value = "inferred")]
    mode: CritiqueMode,
    /// Cap on decoded critiques in inferred mode
    #[arg(long, default_value_t = 16, value_name = "N")]
    max_critique_len: usize,
    /// Write here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridSearchArgs {
    /// Training dataset (JSONL)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Base config file; the grid overrides sft_weight and lr per cell
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Response scores (JSONL) supplying pair margins
    #[arg(long, value_name = "FILE", conflicts_with = "rm")]
    rewards: Option<PathBuf>,
    /// Reward-model checkpoint that scores margins on the fly
    #[arg(long, value_name = "FILE")]
    rm: Option<PathBuf>,
    /// Supervised-term weights to sweep
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SFT_GRID, value_name = "W,..")]
    sft_grid: Vec<f64>,
    /// Learning rates to sweep
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LR_GRID, value_name = "LR,..")]
    lr_grid: Vec<f64>,
    /// Fraction of pairs held out for the cell metric
    #[arg(long, default_value_t = 0.2, value_name = "F")]
    val_split: f64,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's per-cell step count
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Write the result here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Failures split by exit code: bad inputs exit 1, filesystem trouble
/// exits 2.
enum CliError {
    Validation(String),
    Io(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::Data(DataError::Io { .. }) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PairError> for CliError {
    fn from(e: PairError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        CliError::Validation(e.to_string())
    }
}

struct Logger {
    quiet: bool,
}

impl Logger {
    fn note(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let log = Logger { quiet: cli.quiet };
    let result = match cli.command {
        Command::GenPairs(args) => run_gen_pairs(args, &log),
        Command::ClusterSample(args) => run_cluster_sample(args, &log),
        Command::TrainDpo(args) => run_train_dpo(args, &log),
        Command::TrainRm(args) => run_train_rm(args, &log),
        Command::EvalRm(args) => run_eval_rm(args, &log),
        Command::Score(args) => run_score(args, &log),
        Command::GridSearch(args) => run_grid_search(args, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("failed to read {}: {e}", path.display())))
}

/// Writes to the file atomically, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => Ok(write_atomic(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_dataset(path: &Path, vocab_size: Option<usize>) -> Result<Dataset, CliError> {
    let dataset = match vocab_size {
        Some(v) => Dataset::load_with_vocab(path, v)?,
        None => Dataset::load(path)?,
    };
    Ok(dataset)
}

fn load_score_table(path: &Path) -> Result<ScoreTable, CliError> {
    let text = read_file(path)?;
    let records = score_records_from_jsonl(&text)?;
    Ok(score_table(&records))
}

fn load_reward_model(path: &Path) -> Result<RewardModelParams, CliError> {
    let checkpoint = Checkpoint::load(path)?;
    if checkpoint.kind != CheckpointKind::Reward {
        return Err(CliError::Validation(format!(
            "{} is a {} checkpoint, expected a reward checkpoint",
            path.display(),
            checkpoint.kind.as_str()
        )));
    }
    checkpoint.reward_model.ok_or_else(|| {
        CliError::Validation(format!(
            "{} holds no reward-model parameters",
            path.display()
        ))
    })
}

/// Owned margin inputs; borrows out as a [`MarginSource`].
enum Margins {
    None,
    Table(ScoreTable),
    Model(RewardModelParams),
}

impl Margins {
    fn load(
        rewards: Option<&Path>,
        rm: Option<&Path>,
        log: &Logger,
    ) -> Result<Margins, CliError> {
        match (rewards, rm) {
            (Some(path), _) => Ok(Margins::Table(load_score_table(path)?)),
            (None, Some(path)) => Ok(Margins::Model(load_reward_model(path)?)),
            (None, None) => {
                log.note("no reward scores supplied; all margins default to 0");
                Ok(Margins::None)
            }
        }
    }

    fn as_source(&self) -> MarginSource<'_> {
        match self {
            Margins::None => MarginSource::None,
            Margins::Table(table) => MarginSource::Table(table),
            Margins::Model(rm) => MarginSource::Model(rm),
        }
    }
}

fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    steps: Option<usize>,
    lr: Option<f64>,
) -> Result<TrainConfig, CliError> {
    let mut config = match path {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(steps) = steps {
        config.steps = steps;
    }
    if let Some(lr) = lr {
        config.lr = lr;
    }
    Ok(config)
}

fn run_gen_pairs(args: GenPairsArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.input, args.vocab_size)?;
    log.note(format!(
        "loaded {} items (vocab {}, {} features)",
        dataset.items().len(),
        dataset.vocab_size(),
        dataset.feature_dim()
    ));
    let mut pairs = extract_pairs(&dataset);
    if pairs.is_empty() {
        return Err(CliError::Validation(
            "dataset yields no comparison pairs".to_string(),
        ));
    }
    match &args.rewards {
        Some(path) => {
            let table = load_score_table(path)?;
            attach_margins(&mut pairs, &table)?;
        }
        None => log.note("no --rewards given; margins default to 0"),
    }
    let mut vision = false;
    if let Some(alpha) = args.vision_alpha {
        attach_vision_negatives(&mut pairs, alpha)?;
        vision = true;
    }
    write_atomic(&args.out, &pair_records_to_jsonl(&pairs))?;
    log.note(format!("wrote {} pairs to {}", pairs.len(), args.out.display()));
    println!(
        "{}",
        serde_json::json!({"pairs": pairs.len(), "vision": vision, "out": args.out})
    );
    Ok(())
}

fn l2_normalized(features: &[f64]) -> Vec<f64> {
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        features.iter().map(|x| x / norm).collect()
    } else {
        features.to_vec()
    }
}

fn run_cluster_sample(args: ClusterSampleArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.input, None)?;
    let items = dataset.items();
    log.note(format!("loaded {} items", items.len()));

    let mut inertia = None;
    let selected: Vec<usize> = match (args.per_cluster, &args.ratio) {
        (Some(per_cluster), None) => {
            let points: Vec<Vec<f64>> = items
                .iter()
                .map(|item| {
                    if args.normalize {
                        l2_normalized(&item.features)
                    } else {
                        item.features.clone()
                    }
                })
                .collect();
            let model = kmeans(&points, args.k, args.max_iters, args.seed)?;
            log.note(format!(
                "k-means: {} clusters, inertia {:.6} after {} iterations",
                args.k,
                model.inertia,
                model.inertia_trace.len()
            ));
            inertia = Some(model.inertia);
            cluster::cluster_sample(&model, per_cluster, args.seed)
        }
        (None, Some(ratio)) => {
            let spec: RatioSpec = ratio.parse()?;
            let categories: Vec<_> = items.iter().map(|item| item.category).collect();
            let total = args.total.expect("clap enforces --total with --ratio");
            stratified_resample(&categories, &spec, total, args.seed)?
        }
        _ => {
            return Err(CliError::Validation(
                "choose exactly one of --per-cluster or --ratio with --total".to_string(),
            ))
        }
    };
    log.note(format!("selected {} of {} items", selected.len(), items.len()));

    let text = match args.format {
        SampleFormat::Lines => {
            let subset: Vec<_> = selected.iter().map(|&i| items[i].clone()).collect();
            Dataset::from_items(subset, dataset.vocab_size())?.to_jsonl_string()
        }
        SampleFormat::Json => {
            let ids: Vec<&str> = selected.iter().map(|&i| items[i].id.as_str()).collect();
            let mut per_category = std::collections::BTreeMap::new();
            for &i in &selected {
                *per_category.entry(items[i].category.as_str()).or_insert(0u64) += 1;
            }
            let mut text = serde_json::to_string_pretty(&serde_json::json!({
                "n_selected": selected.len(),
                "selected_ids": ids,
                "per_category": per_category,
                "inertia": inertia,
            }))
            .expect("summary serializes");
            text.push('\n');
            text
        }
    };
    emit(args.out.as_deref(), &text)
}

fn summarize_run(history: &[prefalign::trainer::StepLog], out: &Path) -> String {
    serde_json::json!({
        "steps": history.len(),
        "final_loss": history.last().map(|log| log.loss),
        "checkpoint": out,
    })
    .to_string()
}

fn run_train_dpo(args: TrainDpoArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data, None)?;
    let margins = Margins::load(args.rewards.as_deref(), args.rm.as_deref(), log)?;
    let (config, run) = match &args.resume {
        Some(path) => {
            let mut checkpoint = Checkpoint::load(path)?;
            if let Some(steps) = args.steps {
                checkpoint.config.steps = steps;
            }
            log.note(format!(
                "resuming from step {} toward {}",
                checkpoint.step, checkpoint.config.steps
            ));
            let run = resume_policy(&dataset, &checkpoint, &margins.as_source())?;
            (checkpoint.config, run)
        }
        None => {
            let mut config =
                load_config(args.config.as_deref(), args.seed, args.steps, args.lr)?;
            if let Some(objective) = &args.objective {
                config.objective = objective.clone();
            }
            config.validate()?;
            log.note(format!(
                "training {} for {} steps (lr {}, seed {})",
                config.objective, config.steps, config.lr, config.seed
            ));
            let run = train_policy(&dataset, &config, &margins.as_source())?;
            (config, run)
        }
    };
    if let Some(path) = &args.log {
        write_atomic(path, &history_to_jsonl(&run.history))?;
    }
    Checkpoint::for_policy_run(&config, &run).save(&args.out)?;
    log.note(format!("checkpoint written to {}", args.out.display()));
    println!("{}", summarize_run(&run.history, &args.out));
    Ok(())
}

fn run_train_rm(args: TrainRmArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data, None)?;
    let (config, run) = match &args.resume {
        Some(path) => {
            let mut checkpoint = Checkpoint::load(path)?;
            if let Some(steps) = args.steps {
                checkpoint.config.steps = steps;
            }
            log.note(format!(
                "resuming from step {} toward {}",
                checkpoint.step, checkpoint.config.steps
            ));
            let run = resume_reward(&dataset, &checkpoint)?;
            (checkpoint.config, run)
        }
        None => {
            let mut config =
                load_config(args.config.as_deref(), args.seed, args.steps, args.lr)?;
            if args.no_critique_task {
                config.critique_task = false;
            }
            config.validate()?;
            log.note(format!(
                "training reward model for {} steps (critique task {}, lr {}, seed {})",
                config.steps,
                if config.critique_task { "on" } else { "off" },
                config.lr,
                config.seed
            ));
            let run = train_reward(&dataset, &config)?;
            (config, run)
        }
    };
    if let Some(path) = &args.log {
        write_atomic(path, &history_to_jsonl(&run.history))?;
    }
    Checkpoint::for_reward_run(&config, &run).save(&args.out)?;
    log.note(format!("checkpoint written to {}", args.out.display()));
    println!("{}", summarize_run(&run.history, &args.out));
    Ok(())
}

fn run_eval_rm(args: EvalRmArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.bench, None)?;
    let rm = load_reward_model(&args.ckpt)?;
    log.note(format!(
        "evaluating {} items in {} mode",
        dataset.items().len(),
        args.mode
    ));
    let report = eval_reward_model(&rm, &dataset, args.mode, args.max_critique_len)?;
    if !report.zero_pair_item_ids.is_empty() {
        log.note(format!(
            "{} items had no scorable pairs: {:?}",
            report.zero_pair_item_ids.len(),
            report.zero_pair_item_ids
        ));
    }
    let text = if args.csv {
        report.to_csv()
    } else {
        let mut text = report.to_json();
        text.push('\n');
        text
    };
    emit(args.out.as_deref(), &text)
}

fn run_score(args: ScoreArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data, None)?;
    let rm = load_reward_model(&args.ckpt)?;
    let records = score_dataset(&rm, &dataset, args.mode, args.max_critique_len)?;
    log.note(format!(
        "scored {} responses across {} items in {} mode",
        records.len(),
        dataset.items().len(),
        args.mode
    ));
    emit(args.out.as_deref(), &score_records_to_jsonl(&records))
}

fn run_grid_search(args: GridSearchArgs, log: &Logger) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data, None)?;
    let config = load_config(args.config.as_deref(), args.seed, args.steps, None)?;
    config.validate()?;
    let margins = Margins::load(args.rewards.as_deref(), args.rm.as_deref(), log)?;
    log.note(format!(
        "sweeping {} x {} cells of {} steps each",
        args.sft_grid.len(),
        args.lr_grid.len(),
        config.steps
    ));
    let result = grid_search(
        &dataset,
        &config,
        &args.sft_grid,
        &args.lr_grid,
        args.val_split,
        &margins.as_source(),
    )?;
    log.note(format!(
        "best cell: sft_weight {}, lr {}, metric {}",
        result.best.sft_weight, result.best.lr, result.best.metric
    ));
    let mut text = serde_json::to_string_pretty(&result).expect("grid result serializes");
    text.push('\n');
    emit(args.out.as_deref(), &text)
}
