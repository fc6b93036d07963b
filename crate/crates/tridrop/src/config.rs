//! Experiment settings.
//!
//! Every subcommand resolves its settings in three layers: built-in defaults,
//! then an optional JSON config file, then command-line flags. The JSON keys
//! are the flag names with `_` in place of `-`; grouped settings (`data`,
//! `train`) are nested objects.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tridrop_core::train::{ScheduleConfig, TrainConfig};
use tridrop_core::MaskMode;

use crate::error::{CliError, Result};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

fn is_false(b: &bool) -> bool {
    !*b
}

/// Overlays `top` onto `base`; objects merge key by key, nulls in `top` are skipped.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ if v.is_null() => {}
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Defaults, then the config file, then the flags.
pub fn resolve<S, F>(config: Option<&Path>, flags: &F) -> Result<S>
where
    S: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let to_config = |e: serde_json::Error| CliError::Config(e.to_string());
    let mut value = serde_json::to_value(S::default()).map_err(to_config)?;
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !file.is_object() {
            return Err(CliError::Config(format!(
                "{}: config must be a JSON object",
                path.display()
            )));
        }
        // Explicit nulls in the file clear optional settings.
        merge_file(&mut value, file);
    }
    overlay(&mut value, serde_json::to_value(flags).map_err(to_config)?);
    serde_json::from_value(value).map_err(to_config)
}

fn merge_file(base: &mut Value, file: Value) {
    match (base, file) {
        (Value::Object(b), Value::Object(f)) => {
            for (k, v) in f {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_file(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, f) => *b = f,
    }
}

/// SHA-256 of the command name and the resolved settings, as lowercase hex.
pub fn config_hash<S: Serialize>(command: &str, settings: &S) -> String {
    let json = serde_json::to_string(settings).expect("settings serialize");
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(json.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_mask_mode(name: &str) -> Result<MaskMode> {
    MaskMode::from_name(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown mask mode {name:?} (expected deterministic or random)"
        ))
    })
}

// ---------------------------------------------------------------- data

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    /// Directory holding the four standard MNIST files.
    pub mnist_dir: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Use only the first N training examples.
    pub train_limit: Option<usize>,
    /// Use only the first N test examples.
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct DataArgs {
    /// Directory holding the four standard MNIST IDX files
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Training images (IDX)
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Training labels (IDX)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Test images (IDX)
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    /// Test labels (IDX)
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Use only the first N training examples
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test examples
    #[arg(long)]
    pub test_limit: Option<usize>,
}

/// Resolved locations of the four MNIST files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl DataSettings {
    pub fn files(&self) -> Result<MnistFiles> {
        let pick = |explicit: &Option<PathBuf>, standard: &str, flag: &str| {
            explicit
                .clone()
                .or_else(|| self.mnist_dir.as_ref().map(|d| d.join(standard)))
                .ok_or_else(|| {
                    CliError::Config(format!("no MNIST location: pass --{flag} or --mnist-dir"))
                })
        };
        Ok(MnistFiles {
            train_images: pick(&self.images, TRAIN_IMAGES, "images")?,
            train_labels: pick(&self.labels, TRAIN_LABELS, "labels")?,
            test_images: pick(&self.test_images, TEST_IMAGES, "test-images")?,
            test_labels: pick(&self.test_labels, TEST_LABELS, "test-labels")?,
        })
    }
}

// ---------------------------------------------------------------- training

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Plateau,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    /// Upper bound on epochs.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    /// Divisor applied at each decay.
    pub decay_factor: f64,
    /// Plateau window in epochs.
    pub patience: usize,
    /// Relative improvement the plateau window must show.
    pub min_improvement: f64,
    pub max_decays: usize,
    /// Step schedule period in epochs.
    pub step_period: usize,
    pub mask_mode: String,
    pub seed: u64,
}

impl TrainSettings {
    /// Adam at 0.005 with the plateau schedule, batch 1024.
    pub fn autoencoder() -> Self {
        Self {
            epochs: 15,
            batch_size: 1024,
            lr: 0.005,
            schedule: ScheduleKind::Plateau,
            decay_factor: 10.0,
            patience: 15,
            min_improvement: 0.02,
            max_decays: 5,
            step_period: 80,
            mask_mode: "deterministic".into(),
            seed: 1,
        }
    }

    pub fn classifier() -> Self {
        Self {
            epochs: 10,
            batch_size: 512,
            lr: 0.001,
            schedule: ScheduleKind::Constant,
            ..Self::autoencoder()
        }
    }

    /// 240 epochs, batch 1024, 0.01 divided by 10 every 80 epochs.
    pub fn student() -> Self {
        Self {
            epochs: 240,
            batch_size: 1024,
            lr: 0.01,
            schedule: ScheduleKind::Step,
            ..Self::autoencoder()
        }
    }

    pub fn to_config(&self) -> Result<TrainConfig> {
        if self.batch_size == 0 {
            return Err(CliError::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !(self.decay_factor > 0.0) {
            return Err(CliError::Config(
                "learning rate and decay factor must be positive".into(),
            ));
        }
        let schedule = match self.schedule {
            ScheduleKind::Constant => ScheduleConfig::Constant,
            ScheduleKind::Plateau => ScheduleConfig::Plateau {
                factor: self.decay_factor,
                patience: self.patience,
                min_rel_improvement: self.min_improvement,
                max_decays: self.max_decays,
            },
            ScheduleKind::Step => ScheduleConfig::Step {
                period: self.step_period,
                factor: self.decay_factor,
            },
        };
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            schedule,
            seed: self.seed,
            mask_mode: parse_mask_mode(&self.mask_mode)?,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct TrainArgs {
    /// Maximum number of epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size
    #[arg(long = "batch", alias = "batch-size")]
    pub batch_size: Option<usize>,
    /// Initial Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning-rate schedule
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Divisor applied at each learning-rate decay
    #[arg(long)]
    pub decay_factor: Option<f64>,
    /// Plateau window in epochs
    #[arg(long)]
    pub patience: Option<usize>,
    /// Relative improvement required within the plateau window
    #[arg(long)]
    pub min_improvement: Option<f64>,
    /// Decays before a plateau schedule stops training
    #[arg(long)]
    pub max_decays: Option<usize>,
    /// Period of the step schedule in epochs
    #[arg(long)]
    pub step_period: Option<usize>,
    /// Mask construction: deterministic or random
    #[arg(long)]
    pub mask_mode: Option<String>,
    /// Seed for initialization, shuffling and masks
    #[arg(long)]
    pub seed: Option<u64>,
}

// ---------------------------------------------------------------- train-ae

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TdPlacement {
    /// Triangular Dropout on the latent layer.
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeSettings {
    pub data: DataSettings,
    pub train: TrainSettings,
    pub latent: usize,
    pub hidden: usize,
    pub td: TdPlacement,
    /// Train without Triangular Dropout.
    pub plain: bool,
    /// Plain baseline with this latent size (overrides `latent`).
    pub plain_width: Option<usize>,
    pub out_dir: PathBuf,
    /// Stem of the output files; derived from the variant when unset.
    pub name: Option<String>,
}

impl Default for AeSettings {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            train: TrainSettings::autoencoder(),
            latent: 32,
            hidden: 256,
            td: TdPlacement::Latent,
            plain: false,
            plain_width: None,
            out_dir: "runs".into(),
            name: None,
        }
    }
}

impl AeSettings {
    pub fn is_plain(&self) -> bool {
        self.plain || self.plain_width.is_some()
    }

    pub fn latent_size(&self) -> usize {
        self.plain_width.unwrap_or(self.latent)
    }

    pub fn file_stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            if self.is_plain() {
                format!("ae_plain_z{}", self.latent_size())
            } else {
                format!("ae_td_z{}", self.latent_size())
            }
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct AeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Latent size z
    #[arg(long)]
    pub latent: Option<usize>,
    /// Width of the encoder and decoder hidden layers
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Where Triangular Dropout goes
    #[arg(long, value_enum)]
    pub td: Option<TdPlacement>,
    /// Train a plain autoencoder without Triangular Dropout
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub plain: bool,
    /// Train a plain autoencoder with latent size k
    #[arg(long, value_name = "K")]
    pub plain_width: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stem of the output file names
    #[arg(long)]
    pub name: Option<String>,
}

// ---------------------------------------------------------------- train-clf

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfSettings {
    pub data: DataSettings,
    pub train: TrainSettings,
    pub hidden: usize,
    /// Train one classifier per batch size instead of `train.batch_size`.
    pub batch_sweep: Option<Vec<usize>>,
    pub out_dir: PathBuf,
    pub name: Option<String>,
}

impl Default for ClfSettings {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            train: TrainSettings::classifier(),
            hidden: 256,
            batch_sweep: None,
            out_dir: "runs".into(),
            name: None,
        }
    }
}

impl ClfSettings {
    pub fn file_stem(&self, batch: usize) -> String {
        match &self.name {
            Some(n) if self.batch_sweep.is_none() => n.clone(),
            Some(n) => format!("{n}_b{batch}"),
            None => format!("clf_h{}_b{batch}", self.hidden),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct ClfArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Width h of both Triangular Dropout layers
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Train one classifier per listed batch size, e.g. 64,128,256,512
    #[arg(long, value_delimiter = ',')]
    pub batch_sweep: Option<Vec<usize>>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stem of the output file names
    #[arg(long)]
    pub name: Option<String>,
}

// ---------------------------------------------------------------- capacity-sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySettings {
    pub data: DataSettings,
    pub train: TrainSettings,
    /// Latent sizes to train.
    pub available_widths: Vec<usize>,
    /// Each model is evaluated at widths `1..=min(eval_max_width, n)`.
    pub eval_max_width: usize,
    pub hidden: usize,
    pub out_dir: PathBuf,
}

impl Default for CapacitySettings {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            train: TrainSettings::autoencoder(),
            available_widths: vec![4, 8, 16, 32, 64, 128, 256, 512],
            eval_max_width: 32,
            hidden: 256,
            out_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Latent sizes to train, e.g. 4,8,16,32
    #[arg(long, value_delimiter = ',')]
    pub available_widths: Option<Vec<usize>>,
    /// Largest evaluation width
    #[arg(long)]
    pub eval_max_width: Option<usize>,
    /// Width of the encoder and decoder hidden layers
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

// ---------------------------------------------------------------- distill

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StudentVariant {
    /// Only the middle hidden layer uses Triangular Dropout.
    Middle,
    /// Every hidden layer uses Triangular Dropout.
    All,
}

impl StudentVariant {
    pub fn name(self) -> &'static str {
        match self {
            StudentVariant::Middle => "middle",
            StudentVariant::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSettings {
    pub train: TrainSettings,
    pub variant: StudentVariant,
    /// Width of each of the three hidden layers.
    pub hidden: usize,
    /// Imitation pairs kept after down-sampling.
    pub samples: usize,
    /// Probability of executing a random action while collecting.
    pub noise_prob: f64,
    /// Seed of the expert rollouts.
    pub data_seed: u64,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    pub out_dir: PathBuf,
    pub name: Option<String>,
}

impl Default for DistillSettings {
    fn default() -> Self {
        Self {
            train: TrainSettings::student(),
            variant: StudentVariant::Middle,
            hidden: 48,
            samples: 100_000,
            noise_prob: 0.1,
            data_seed: 11,
            eval_episodes: 100,
            eval_seed: 2024,
            out_dir: "runs".into(),
            name: None,
        }
    }
}

impl DistillSettings {
    pub fn file_stem(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("student_{}_h{}", self.variant.name(), self.hidden))
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Which hidden layers use Triangular Dropout
    #[arg(long, value_enum)]
    pub variant: Option<StudentVariant>,
    /// Width of each hidden layer
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Number of imitation pairs
    #[arg(long)]
    pub samples: Option<usize>,
    /// Probability of a random executed action during collection
    #[arg(long)]
    pub noise_prob: Option<f64>,
    /// Seed of the expert rollouts
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Evaluation episodes per width
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Seed of the evaluation start states
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stem of the output file names
    #[arg(long)]
    pub name: Option<String>,
}

// ---------------------------------------------------------------- ablate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricChoice {
    /// Pick from the model's loss.
    Auto,
    Bce,
    Accuracy,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSettings {
    pub model: Option<PathBuf>,
    /// `all`, or a list such as `1,2,4` or `1-32`.
    pub widths: String,
    pub data: DataSettings,
    pub metric: MetricChoice,
    /// Allow models without Triangular Dropout by converting one layer.
    pub force: bool,
    /// Layer converted by `force`; defaults to the narrowest hidden layer.
    pub force_layer: Option<usize>,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// CSV destination; stdout when unset.
    pub out: Option<PathBuf>,
}

impl Default for AblateSettings {
    fn default() -> Self {
        Self {
            model: None,
            widths: "all".into(),
            data: DataSettings::default(),
            metric: MetricChoice::Auto,
            force: false,
            force_layer: None,
            eval_episodes: 100,
            eval_seed: 2024,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct AblateArgs {
    /// Model file to evaluate
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Widths: all, a list (1,2,4) or a range (1-32)
    #[arg(long)]
    pub widths: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Metric to report
    #[arg(long, value_enum)]
    pub metric: Option<MetricChoice>,
    /// Ablate a model without Triangular Dropout layers
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub force: bool,
    /// Layer to ablate with --force
    #[arg(long)]
    pub force_layer: Option<usize>,
    /// Evaluation episodes for control models
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Seed of the evaluation start states for control models
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

// ---------------------------------------------------------------- prune

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSettings {
    pub model: Option<PathBuf>,
    /// One width per Triangular Dropout layer, or a single width for all.
    pub widths: Vec<usize>,
    pub out: Option<PathBuf>,
    /// Random inputs used for the equivalence check.
    pub samples: usize,
    pub seed: u64,
}

impl Default for PruneSettings {
    fn default() -> Self {
        Self {
            model: None,
            widths: Vec::new(),
            out: None,
            samples: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct PruneArgs {
    /// Model file to prune
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Widths, one per Triangular Dropout layer or one for all
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Destination of the pruned model
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random inputs for the equivalence check
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the random inputs
    #[arg(long)]
    pub seed: Option<u64>,
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSettings {
    pub seed: u64,
    pub eps: f64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self { seed: 0, eps: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct GradcheckArgs {
    /// Seed for weights and inputs
    #[arg(long)]
    pub seed: Option<u64>,
    /// Central-difference step
    #[arg(long)]
    pub eps: Option<f64>,
}

// ---------------------------------------------------------------- param-count

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamCountSettings {
    pub vgg_width: Option<usize>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct ParamCountArgs {
    /// Hidden width of the VGG19 classifier head
    #[arg(long)]
    pub vgg_width: Option<usize>,
    /// Model file to count
    #[arg(long)]
    pub model: Option<PathBuf>,
}
