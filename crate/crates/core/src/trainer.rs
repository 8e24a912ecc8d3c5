//! Deterministic training loops, checkpoints, and the tuning grid.
//!
//! Training here is plain gradient descent with a batch schedule that is a
//! pure function of the step index: with `n` pairs and batch size `b`
//! there are `ceil(n/b)` chunks per epoch, step `s` takes chunk `s mod
//! ceil(n/b)` of epoch `s div ceil(n/b)`, and each epoch's permutation is
//! drawn from the run seed on its own generator stream (stream `1+epoch`;
//! stream 0 belongs to parameter initialization). Margins are attached
//! once up front. Together this makes a run a pure function of `(data,
//! config)` — and resuming from a checkpoint at step `k` bit-identical to
//! having never stopped, because nothing about the schedule depends on
//! mutable generator state.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{write_atomic, DataError, Dataset};
use crate::eval::{implicit_reward_accuracy, score_dataset, CritiqueMode, EvalError};
use crate::objective::{
    build_objective, combined_loss_parts, AlignmentObjective, LossError, ObjectiveConfig,
};
use crate::pairs::{
    all_pairs, attach_margins, attach_vision_negatives, ComparisonPair, PairError, ScoreTable,
};
use crate::policy::{freeze_reference, FrozenPolicy, PolicyParams, INIT_STD};
use crate::reward::{
    pair_examples, plain_batch_loss, score_table, total_loss, RewardError, RewardModelParams,
    RewardPairExample,
};
use crate::scaling::ScalingConfig;

/// Supervised-term weights swept by default.
pub const DEFAULT_SFT_GRID: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];
/// Learning rates swept by default.
pub const DEFAULT_LR_GRID: [f64; 5] = [1e-7, 5e-7, 1e-6, 5e-6, 1e-5];

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config field {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("dataset yields no training pairs")]
    NoPairs,
    #[error("non-finite loss at step {step}; aborting before corrupting parameters")]
    NonFiniteLoss { step: usize },
    #[error("tuning grid is empty")]
    EmptyGrid,
    #[error("validation fraction must lie strictly between 0 and 1, got {fraction}")]
    InvalidSplit { fraction: f64 },
    #[error("validation split leaves no {side} pairs")]
    EmptySplit { side: &'static str },
    #[error("checkpoint is a {found} checkpoint, expected {expected}")]
    WrongKind {
        expected: &'static str,
        found: String,
    },
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    BadVersion { found: u32, expected: u32 },
    #[error("checkpoint is missing its {what}")]
    Incomplete { what: &'static str },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {source}")]
    Format {
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn default_beta_ori() -> f64 {
    0.1
}
fn default_w() -> f64 {
    0.5
}
fn default_k() -> f64 {
    0.5
}
fn default_lambda() -> f64 {
    0.0
}
fn default_beta_vision() -> f64 {
    0.1
}
fn default_sft_weight() -> f64 {
    0.0
}
fn default_lr() -> f64 {
    1e-5
}
fn default_batch_size() -> usize {
    32
}
fn default_steps() -> usize {
    500
}
fn default_seed() -> u64 {
    0
}
fn default_shuffle() -> bool {
    true
}
fn default_objective() -> String {
    "margin-dpo".to_string()
}
fn default_mixup_alpha() -> f64 {
    0.5
}
fn default_critique_task() -> bool {
    true
}
fn default_max_critique_len() -> usize {
    16
}

/// Everything a run depends on besides the dataset. Unknown keys in a
/// config file are rejected rather than silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Base inverse temperature of the preference losses.
    #[serde(default = "default_beta_ori")]
    pub beta_ori: f64,
    /// Margin-scaling headroom: `β` saturates at `(1+w)·beta_ori`.
    #[serde(default = "default_w")]
    pub w: f64,
    /// Margin-scaling rate.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Weight of the perturbed-query term (vision-dpo only).
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Fixed temperature of the perturbed-query term.
    #[serde(default = "default_beta_vision")]
    pub beta_vision: f64,
    /// Weight of the supervised term on preferred responses.
    #[serde(default = "default_sft_weight")]
    pub sft_weight: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
    /// Which registered alignment objective drives policy training.
    #[serde(default = "default_objective")]
    pub objective: String,
    /// Mixing coefficient for perturbed-query construction.
    #[serde(default = "default_mixup_alpha")]
    pub mixup_alpha: f64,
    /// Reward training: couple the critique head into the loss.
    #[serde(default = "default_critique_task")]
    pub critique_task: bool,
    /// Cap on decoded critiques (margin-from-model and inference).
    #[serde(default = "default_max_critique_len")]
    pub max_critique_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is the default")
    }
}

impl TrainConfig {
    pub fn scaling(&self) -> ScalingConfig {
        ScalingConfig {
            beta_ori: self.beta_ori,
            w: self.w,
            k: self.k,
        }
    }

    pub fn objective_config(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            scaling: self.scaling(),
            lambda: self.lambda,
            beta_vision: self.beta_vision,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &str, reason: String| TrainError::Config {
            field: field.to_string(),
            reason,
        };
        self.scaling()
            .validate()
            .map_err(|e| bad("beta_ori/w/k", e.to_string()))?;
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(bad("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        if !self.beta_vision.is_finite() || self.beta_vision <= 0.0 {
            return Err(bad(
                "beta_vision",
                format!("must be positive, got {}", self.beta_vision),
            ));
        }
        if !self.sft_weight.is_finite() || self.sft_weight < 0.0 {
            return Err(bad(
                "sft_weight",
                format!("must be non-negative, got {}", self.sft_weight),
            ));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(bad("lr", format!("must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "must be at least 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.mixup_alpha) {
            return Err(bad(
                "mixup_alpha",
                format!("must lie in [0, 1], got {}", self.mixup_alpha),
            ));
        }
        if self.max_critique_len == 0 {
            return Err(bad("max_critique_len", "must be at least 1".to_string()));
        }
        if crate::objective::registered_objectives()
            .iter()
            .all(|&n| n != self.objective)
        {
            return Err(bad(
                "objective",
                format!(
                    "unknown objective {:?}; registered: {:?}",
                    self.objective,
                    crate::objective::registered_objectives()
                ),
            ));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, TrainError> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|source| TrainError::Format { source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `key=value` pairs separated by commas, e.g.
    /// `lr=1e-4,steps=100,objective=vision-dpo`.
    pub fn from_key_value_str(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part.split_once('=').ok_or_else(|| TrainError::Config {
                field: part.to_string(),
                reason: "expected KEY=VALUE".to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |reason: String| TrainError::Config {
                field: key.to_string(),
                reason,
            };
            match key {
                "beta_ori" => cfg.beta_ori = value.parse().map_err(|e| bad(format!("{e}")))?,
                "w" => cfg.w = value.parse().map_err(|e| bad(format!("{e}")))?,
                "k" => cfg.k = value.parse().map_err(|e| bad(format!("{e}")))?,
                "lambda" => cfg.lambda = value.parse().map_err(|e| bad(format!("{e}")))?,
                "beta_vision" => {
                    cfg.beta_vision = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "sft_weight" => cfg.sft_weight = value.parse().map_err(|e| bad(format!("{e}")))?,
                "lr" => cfg.lr = value.parse().map_err(|e| bad(format!("{e}")))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|e| bad(format!("{e}")))?,
                "steps" => cfg.steps = value.parse().map_err(|e| bad(format!("{e}")))?,
                "seed" => cfg.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
                "shuffle" => cfg.shuffle = value.parse().map_err(|e| bad(format!("{e}")))?,
                "objective" => cfg.objective = value.to_string(),
                "mixup_alpha" => {
                    cfg.mixup_alpha = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "critique_task" => {
                    cfg.critique_task = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "max_critique_len" => {
                    cfg.max_critique_len = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                other => {
                    return Err(TrainError::Config {
                        field: other.to_string(),
                        reason: "unknown config key".to_string(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file: JSON when the content starts with `{`,
    /// `key=value` lines otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if text.trim_start().starts_with('{') {
            Self::from_json_str(&text)
        } else {
            Self::from_key_value_str(text.trim())
        }
    }
}

/// One training step's record. For reward-model runs the same shape is
/// reused with `dpo_term` holding the pairwise scoring term, `sft_term`
/// the critique term, and both `beta_*` fields 0 (no preference
/// temperature is involved there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub dpo_term: f64,
    pub sft_term: f64,
    pub beta_mean: f64,
    pub beta_max: f64,
}

/// Canonical JSONL rendering of a training history, one step per line.
pub fn history_to_jsonl(history: &[StepLog]) -> String {
    let mut out = String::new();
    for log in history {
        out.push_str(&serde_json::to_string(log).expect("step logs serialize"));
        out.push('\n');
    }
    out
}

/// Where pair margins come from.
pub enum MarginSource<'a> {
    /// No margins: every `δ` is 0, so margin scaling sits at its floor.
    None,
    /// Margins looked up in a precomputed score table.
    Table(&'a ScoreTable),
    /// Margins from a reward model scoring the dataset (inferred
    /// critiques).
    Model(&'a RewardModelParams),
}

/// A finished policy run: final parameters, the frozen reference they were
/// trained against, and the per-step history.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub policy: PolicyParams,
    pub reference: FrozenPolicy,
    pub history: Vec<StepLog>,
}

/// A finished reward-model run.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRun {
    pub reward_model: RewardModelParams,
    pub history: Vec<StepLog>,
}

/// The indices of step `s`'s batch: chunk `s mod ceil(n/b)` of the epoch
/// permutation for epoch `s div ceil(n/b)`. Pure in all arguments.
fn batch_indices(n: usize, batch_size: usize, shuffle: bool, seed: u64, step: usize) -> Vec<usize> {
    let chunks = n.div_ceil(batch_size);
    let epoch = step / chunks;
    let chunk = step % chunks;
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + epoch as u64);
        order.shuffle(&mut rng);
    }
    let start = chunk * batch_size;
    let end = (start + batch_size).min(n);
    order[start..end].to_vec()
}

/// Extracts every comparison pair of the dataset, in item order.
pub fn extract_pairs(dataset: &Dataset) -> Vec<ComparisonPair> {
    dataset
        .items()
        .iter()
        .flat_map(|item| all_pairs(item).pairs)
        .collect()
}

fn attach_margin_source(
    pairs: &mut [ComparisonPair],
    dataset: &Dataset,
    config: &TrainConfig,
    margins: &MarginSource<'_>,
) -> Result<(), TrainError> {
    match margins {
        MarginSource::None => Ok(()),
        MarginSource::Table(table) => Ok(attach_margins(pairs, table)?),
        MarginSource::Model(rm) => {
            let records =
                score_dataset(rm, dataset, CritiqueMode::Inferred, config.max_critique_len)?;
            let table = score_table(&records);
            Ok(attach_margins(pairs, &table)?)
        }
    }
}

/// Builds the training pair list: extraction, margin attachment, and — for
/// the perturbed-query objective with `lambda > 0` — perturbed-query
/// attachment.
pub fn prepare_pairs(
    dataset: &Dataset,
    config: &TrainConfig,
    margins: &MarginSource<'_>,
) -> Result<Vec<ComparisonPair>, TrainError> {
    let mut pairs = extract_pairs(dataset);
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    attach_margin_source(&mut pairs, dataset, config, margins)?;
    if config.objective == "vision-dpo" && config.lambda > 0.0 {
        attach_vision_negatives(&mut pairs, config.mixup_alpha)?;
    }
    Ok(pairs)
}

fn run_policy_loop(
    pairs: &[ComparisonPair],
    config: &TrainConfig,
    objective: &dyn AlignmentObjective,
    mut policy: PolicyParams,
    reference: FrozenPolicy,
    start_step: usize,
    mut history: Vec<StepLog>,
) -> Result<PolicyRun, TrainError> {
    for step in start_step..config.steps {
        let indices = batch_indices(pairs.len(), config.batch_size, config.shuffle, config.seed, step);
        let batch: Vec<ComparisonPair> = indices.iter().map(|&i| pairs[i].clone()).collect();
        let (report, dpo_term, sft_term) =
            combined_loss_parts(&policy, &reference, objective, &batch, config.sft_weight)?;
        if !report.value.is_finite() || !report.grad.all_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }
        let beta_mean =
            report.per_pair.iter().map(|p| p.beta).sum::<f64>() / report.per_pair.len() as f64;
        let beta_max = report
            .per_pair
            .iter()
            .map(|p| p.beta)
            .fold(f64::NEG_INFINITY, f64::max);
        history.push(StepLog {
            step,
            loss: report.value,
            dpo_term,
            sft_term,
            beta_mean,
            beta_max,
        });
        policy.apply_step(&report.grad, config.lr);
    }
    Ok(PolicyRun {
        policy,
        reference,
        history,
    })
}

/// Trains a policy from scratch against a frozen copy of its own
/// initialization. A pure function of `(dataset, config, margins)`.
pub fn train_policy(
    dataset: &Dataset,
    config: &TrainConfig,
    margins: &MarginSource<'_>,
) -> Result<PolicyRun, TrainError> {
    config.validate()?;
    let pairs = prepare_pairs(dataset, config, margins)?;
    let objective = build_objective(&config.objective, &config.objective_config())?;
    let policy = PolicyParams::random_init(
        dataset.vocab_size(),
        dataset.feature_dim(),
        INIT_STD,
        config.seed,
    );
    let reference = freeze_reference(&policy);
    run_policy_loop(&pairs, config, objective.as_ref(), policy, reference, 0, Vec::new())
}

fn run_reward_loop(
    examples: &[RewardPairExample],
    config: &TrainConfig,
    mut rm: RewardModelParams,
    start_step: usize,
    mut history: Vec<StepLog>,
) -> Result<RewardRun, TrainError> {
    for step in start_step..config.steps {
        let indices =
            batch_indices(examples.len(), config.batch_size, config.shuffle, config.seed, step);
        let batch: Vec<RewardPairExample> =
            indices.iter().map(|&i| examples[i].clone()).collect();
        let report = if config.critique_task {
            total_loss(&rm, &batch)?
        } else {
            plain_batch_loss(&rm, &batch)?
        };
        if !report.value.is_finite() || !report.grad.all_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }
        history.push(StepLog {
            step,
            loss: report.value,
            dpo_term: report.scoring_term,
            sft_term: report.critique_term,
            beta_mean: 0.0,
            beta_max: 0.0,
        });
        rm.apply_step(&report.grad, config.lr);
    }
    Ok(RewardRun {
        reward_model: rm,
        history,
    })
}

/// Trains the reward model on every annotated comparison of the dataset.
/// With `critique_task` off, the critique head is never updated.
pub fn train_reward(dataset: &Dataset, config: &TrainConfig) -> Result<RewardRun, TrainError> {
    config.validate()?;
    let mut examples = Vec::new();
    for item in dataset.items() {
        examples.extend(pair_examples(item)?);
    }
    if examples.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let rm = RewardModelParams::random_init(
        dataset.vocab_size(),
        dataset.feature_dim(),
        INIT_STD,
        config.seed,
    );
    run_reward_loop(&examples, config, rm, 0, Vec::new())
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckpointKind {
    Policy,
    Reward,
}

impl CheckpointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckpointKind::Policy => "policy",
            CheckpointKind::Reward => "reward",
        }
    }
}

/// A restartable snapshot of a run. `rng_state` records the master seed;
/// every random choice of a run is re-derivable from `(seed, step)`, so no
/// raw generator state needs to survive. Saving, loading, and saving again
/// produces byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: CheckpointKind,
    pub config: TrainConfig,
    /// Steps completed so far.
    pub step: usize,
    pub rng_state: u64,
    pub policy: Option<PolicyParams>,
    pub reference: Option<FrozenPolicy>,
    pub reward_model: Option<RewardModelParams>,
    pub history: Vec<StepLog>,
}

impl Checkpoint {
    pub fn for_policy_run(config: &TrainConfig, run: &PolicyRun) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            kind: CheckpointKind::Policy,
            config: config.clone(),
            step: run.history.len(),
            rng_state: config.seed,
            policy: Some(run.policy.clone()),
            reference: Some(run.reference.clone()),
            reward_model: None,
            history: run.history.clone(),
        }
    }

    pub fn for_reward_run(config: &TrainConfig, run: &RewardRun) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            kind: CheckpointKind::Reward,
            config: config.clone(),
            step: run.history.len(),
            rng_state: config.seed,
            policy: None,
            reference: None,
            reward_model: Some(run.reward_model.clone()),
            history: run.history.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let mut text =
            serde_json::to_string_pretty(self).map_err(|source| TrainError::Format { source })?;
        text.push('\n');
        write_atomic(path, &text).map_err(|e| match e {
            DataError::Io { path, source } => TrainError::Io { path, source },
            other => TrainError::Data(other),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let checkpoint: Checkpoint =
            serde_json::from_str(&text).map_err(|source| TrainError::Format { source })?;
        if checkpoint.format_version != CHECKPOINT_VERSION {
            return Err(TrainError::BadVersion {
                found: checkpoint.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(checkpoint)
    }
}

/// Continues a policy run to `checkpoint.config.steps` (extend the target
/// by raising that field before calling). Bit-identical to a run that
/// never stopped, given the same dataset and margin source.
pub fn resume_policy(
    dataset: &Dataset,
    checkpoint: &Checkpoint,
    margins: &MarginSource<'_>,
) -> Result<PolicyRun, TrainError> {
    if checkpoint.kind != CheckpointKind::Policy {
        return Err(TrainError::WrongKind {
            expected: "policy",
            found: checkpoint.kind.as_str().to_string(),
        });
    }
    let config = &checkpoint.config;
    config.validate()?;
    let policy = checkpoint
        .policy
        .clone()
        .ok_or(TrainError::Incomplete { what: "policy parameters" })?;
    let reference = checkpoint
        .reference
        .clone()
        .ok_or(TrainError::Incomplete { what: "reference policy" })?;
    let pairs = prepare_pairs(dataset, config, margins)?;
    let objective = build_objective(&config.objective, &config.objective_config())?;
    run_policy_loop(
        &pairs,
        config,
        objective.as_ref(),
        policy,
        reference,
        checkpoint.step,
        checkpoint.history.clone(),
    )
}

/// Continues a reward-model run to `checkpoint.config.steps`.
pub fn resume_reward(dataset: &Dataset, checkpoint: &Checkpoint) -> Result<RewardRun, TrainError> {
    if checkpoint.kind != CheckpointKind::Reward {
        return Err(TrainError::WrongKind {
            expected: "reward",
            found: checkpoint.kind.as_str().to_string(),
        });
    }
    let config = &checkpoint.config;
    config.validate()?;
    let rm = checkpoint
        .reward_model
        .clone()
        .ok_or(TrainError::Incomplete { what: "reward-model parameters" })?;
    let mut examples = Vec::new();
    for item in dataset.items() {
        examples.extend(pair_examples(item)?);
    }
    if examples.is_empty() {
        return Err(TrainError::NoPairs);
    }
    run_reward_loop(&examples, config, rm, checkpoint.step, checkpoint.history.clone())
}

/// One cell of the tuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub sft_weight: f64,
    pub lr: f64,
    /// Held-out implicit preference accuracy of the trained policy.
    pub metric: f64,
}

/// A swept grid with its winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub cells: Vec<GridCell>,
    pub best: GridCell,
}

// Generator stream for the train/validation split; epoch streams are
// 1+epoch, so the top of the range cannot collide in any feasible run.
const SPLIT_STREAM: u64 = u64::MAX;

/// Sweeps `sft_weight × lr`, training each cell from the same seed on a
/// shared train split and scoring held-out implicit preference accuracy.
/// The best cell is the highest metric; exact ties prefer the smaller
/// `sft_weight`, then the smaller `lr`.
pub fn grid_search(
    dataset: &Dataset,
    base: &TrainConfig,
    sft_grid: &[f64],
    lr_grid: &[f64],
    val_fraction: f64,
    margins: &MarginSource<'_>,
) -> Result<GridSearchResult, TrainError> {
    base.validate()?;
    if sft_grid.is_empty() || lr_grid.is_empty() {
        return Err(TrainError::EmptyGrid);
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(TrainError::InvalidSplit {
            fraction: val_fraction,
        });
    }
    let pairs = prepare_pairs(dataset, base, margins)?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    rng.set_stream(SPLIT_STREAM);
    order.shuffle(&mut rng);
    let val_count = ((pairs.len() as f64) * val_fraction).round() as usize;
    if val_count == 0 {
        return Err(TrainError::EmptySplit { side: "validation" });
    }
    if val_count >= pairs.len() {
        return Err(TrainError::EmptySplit { side: "training" });
    }
    let val_pairs: Vec<ComparisonPair> =
        order[..val_count].iter().map(|&i| pairs[i].clone()).collect();
    let train_pairs: Vec<ComparisonPair> =
        order[val_count..].iter().map(|&i| pairs[i].clone()).collect();

    let mut cells = Vec::with_capacity(sft_grid.len() * lr_grid.len());
    for &sft_weight in sft_grid {
        for &lr in lr_grid {
            let mut config = base.clone();
            config.sft_weight = sft_weight;
            config.lr = lr;
            config.validate()?;
            let objective = build_objective(&config.objective, &config.objective_config())?;
            let policy = PolicyParams::random_init(
                dataset.vocab_size(),
                dataset.feature_dim(),
                INIT_STD,
                config.seed,
            );
            let reference = freeze_reference(&policy);
            let run = run_policy_loop(
                &train_pairs,
                &config,
                objective.as_ref(),
                policy,
                reference,
                0,
                Vec::new(),
            )?;
            let metric = implicit_reward_accuracy(&run.policy, &run.reference, &val_pairs)?;
            cells.push(GridCell {
                sft_weight,
                lr,
                metric,
            });
        }
    }
    let best = *cells
        .iter()
        .reduce(|best, cell| {
            let better = cell.metric > best.metric
                || (cell.metric == best.metric
                    && (cell.sft_weight < best.sft_weight
                        || (cell.sft_weight == best.sft_weight && cell.lr < best.lr)));
            if better {
                cell
            } else {
                best
            }
        })
        .expect("grid has at least one cell");
    Ok(GridSearchResult { cells, best })
}
