//! Training, sweeps, pruning and checks behind the CLI subcommands.
//!
//! The `run_*` functions resolve files, write artifacts and return the text
//! printed on stdout. The functions they are built from take in-memory data
//! so several experiments can share one loaded dataset.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tridrop_core::control::{self, EnvParams, ModelPolicy, WidthSearch};
use tridrop_core::gradcheck::{gradcheck, GradcheckReport};
use tridrop_core::train::{accuracy, evaluate_loss, train, EpochLog, TrainReport};
use tridrop_core::{
    one_hot, vgg_classifier_param_count, ActivationKind, Dataset, Layer, LayerKind, LossKind,
    MaskMode, Matrix, Model, ModelSpec, ParamCountReport, Rng, TriangularMask,
};
use tridrop_core::sweep::WidthSweep;

use crate::config::{
    config_hash, AblateSettings, AeSettings, CapacitySettings, ClfSettings, DataSettings,
    DistillSettings, GradcheckSettings, MetricChoice, ParamCountSettings, PruneSettings,
    StudentVariant, TrainSettings,
};
use crate::error::{CliError, Result};
use crate::idx::{load_idx_images, load_idx_labels};
use crate::model_file::{load_model, save_model};
use crate::report::{AblationReport, AblationRow, Metric};

pub const MNIST_CLASSES: usize = 10;
/// Largest masked-versus-pruned output gap tolerated by `prune`.
pub const EQUIVALENCE_TOLERANCE: f32 = 1e-6;
/// Rows per forward pass when evaluating large datasets.
const EVAL_CHUNK: usize = 2000;

// ---------------------------------------------------------------- data

/// The four MNIST arrays, with pixels in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train_images: Matrix,
    pub train_labels: Vec<u8>,
    pub test_images: Matrix,
    pub test_labels: Vec<u8>,
}

fn limit(images: Matrix, labels: Vec<u8>, n: Option<usize>, what: &str) -> Result<(Matrix, Vec<u8>)> {
    if images.rows() != labels.len() {
        return Err(CliError::Config(format!(
            "{what}: {} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= MNIST_CLASSES) {
        return Err(CliError::Core(tridrop_core::Error::Data(format!(
            "{what}: label {bad} is not a digit"
        ))));
    }
    Ok(match n {
        Some(n) if n < labels.len() => (images.leading_rows(n), labels[..n].to_vec()),
        _ => (images, labels),
    })
}

impl Mnist {
    pub fn load(data: &DataSettings) -> Result<Self> {
        let files = data.files()?;
        let (train_images, train_labels) = limit(
            load_idx_images(&files.train_images)?,
            load_idx_labels(&files.train_labels)?,
            data.train_limit,
            "training set",
        )?;
        let (test_images, test_labels) = limit(
            load_idx_images(&files.test_images)?,
            load_idx_labels(&files.test_labels)?,
            data.test_limit,
            "test set",
        )?;
        Ok(Self {
            train_images,
            train_labels,
            test_images,
            test_labels,
        })
    }

    /// Inputs and targets are both the images.
    pub fn autoencoder_train(&self) -> Result<Dataset> {
        let images = self.train_images.clone();
        Ok(Dataset::new("mnist-train", images.clone(), images)?)
    }

    pub fn autoencoder_test(&self) -> Result<Dataset> {
        let images = self.test_images.clone();
        Ok(Dataset::new("mnist-test", images.clone(), images)?)
    }

    pub fn classifier_train(&self) -> Result<Dataset> {
        Ok(Dataset::new(
            "mnist-train",
            self.train_images.clone(),
            one_hot(&self.train_labels, MNIST_CLASSES)?,
        )?)
    }

    pub fn classifier_test(&self) -> Result<Dataset> {
        Ok(Dataset::new(
            "mnist-test",
            self.test_images.clone(),
            one_hot(&self.test_labels, MNIST_CLASSES)?,
        )?)
    }
}

// ---------------------------------------------------------------- training

/// A trained model with its per-epoch history.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub report: TrainReport,
}

/// Trains with `settings`, recording the mask mode on every Triangular Dropout layer.
pub fn fit(
    model: &mut Model,
    data: &Dataset,
    settings: &TrainSettings,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    let cfg = settings.to_config()?;
    for layer in model.layers_mut() {
        if let Layer::TriDrop(t) = layer {
            t.mode = cfg.mask_mode;
        }
    }
    Ok(train(model, data, &cfg, on_epoch)?)
}

/// Plain-text training log: a comment line, then one line per epoch.
pub fn training_log(comment: &str, report: &TrainReport) -> String {
    let mut s = format!("# {comment}\n");
    for e in &report.epochs {
        let _ = writeln!(s, "epoch {} loss {} lr {}", e.epoch, e.loss, e.lr);
    }
    if report.stopped_by_schedule {
        s.push_str("stopped: learning-rate schedule exhausted\n");
    }
    s
}

fn print_epoch(tag: &str) -> impl FnMut(&EpochLog) + '_ {
    move |e| eprintln!("[{tag}] epoch {} loss {:.6} lr {}", e.epoch, e.loss, e.lr)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------- autoencoder

/// `input -> hidden (relu) -> latent (identity) -> hidden (relu) -> input (sigmoid)`.
pub fn autoencoder_spec(input: usize, hidden: usize, latent: usize, td: bool, seed: u64) -> ModelSpec {
    let kind = if td { LayerKind::TriDrop } else { LayerKind::Dense };
    let name = if td {
        format!("ae_td_z{latent}")
    } else {
        format!("ae_plain_z{latent}")
    };
    ModelSpec::new(&name, input, LossKind::BinaryCrossEntropy)
        .with_seed(seed)
        .layer(LayerKind::Dense, hidden, ActivationKind::Relu)
        .layer(kind, latent, ActivationKind::Identity)
        .layer(LayerKind::Dense, hidden, ActivationKind::Relu)
        .layer(LayerKind::Dense, input, ActivationKind::Sigmoid)
}

pub fn train_autoencoder(
    s: &AeSettings,
    data: &Dataset,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<Trained> {
    let spec = autoencoder_spec(
        data.inputs.cols(),
        s.hidden,
        s.latent_size(),
        !s.is_plain(),
        s.train.seed,
    );
    let mut model = Model::from_spec(&spec)?;
    model.name = s.file_stem();
    model.provenance = format!("train-ae config_sha256={}", config_hash("train-ae", s));
    let report = fit(&mut model, data, &s.train, on_epoch)?;
    Ok(Trained { model, report })
}

pub fn run_train_ae(s: &AeSettings) -> Result<String> {
    let mnist = Mnist::load(&s.data)?;
    let stem = s.file_stem();
    let trained = train_autoencoder(s, &mnist.autoencoder_train()?, print_epoch(&stem))?;
    let test_bce = evaluate_loss(&trained.model, &mnist.autoencoder_test()?, EVAL_CHUNK)?;
    ensure_dir(&s.out_dir)?;
    let model_path = s.out_dir.join(format!("{stem}.tdrp"));
    save_model(&trained.model, &model_path)?;
    let mut log = training_log(
        &format!("train-ae config_sha256={} seed={}", config_hash("train-ae", s), s.train.seed),
        &trained.report,
    );
    let _ = writeln!(log, "test_bce {test_bce}");
    write_text(&s.out_dir.join(format!("{stem}.log")), &log)?;
    Ok(format!(
        "model: {}\nepochs: {}\ntest_bce: {test_bce}\n",
        model_path.display(),
        trained.report.epochs.len()
    ))
}

// ---------------------------------------------------------------- classifier

/// `input -> h (TD, relu) -> h (TD, relu) -> 10 logits`.
pub fn classifier_spec(input: usize, hidden: usize, seed: u64) -> ModelSpec {
    ModelSpec::new(&format!("clf_h{hidden}"), input, LossKind::SoftmaxCrossEntropy)
        .with_seed(seed)
        .layer(LayerKind::TriDrop, hidden, ActivationKind::Relu)
        .layer(LayerKind::TriDrop, hidden, ActivationKind::Relu)
        .layer(LayerKind::Dense, MNIST_CLASSES, ActivationKind::Identity)
}

pub fn train_classifier(
    s: &ClfSettings,
    batch: usize,
    data: &Dataset,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<Trained> {
    let spec = classifier_spec(data.inputs.cols(), s.hidden, s.train.seed);
    let mut model = Model::from_spec(&spec)?;
    model.name = s.file_stem(batch);
    model.provenance = format!(
        "train-clf batch={batch} config_sha256={}",
        config_hash("train-clf", s)
    );
    let mut train = s.train.clone();
    train.batch_size = batch;
    let report = fit(&mut model, data, &train, on_epoch)?;
    Ok(Trained { model, report })
}

pub fn run_train_clf(s: &ClfSettings) -> Result<String> {
    let mnist = Mnist::load(&s.data)?;
    let train_set = mnist.classifier_train()?;
    let hash = config_hash("train-clf", s);
    let batches = s.batch_sweep.clone().unwrap_or_else(|| vec![s.train.batch_size]);
    ensure_dir(&s.out_dir)?;
    let mut out = String::new();
    for &batch in &batches {
        let stem = s.file_stem(batch);
        let trained = train_classifier(s, batch, &train_set, print_epoch(&stem))?;
        let model_path = s.out_dir.join(format!("{stem}.tdrp"));
        save_model(&trained.model, &model_path)?;
        let widths = (1..=s.hidden).collect::<Vec<_>>();
        let rows = accuracy_sweep(&trained.model, &mnist.test_images, &mnist.test_labels, &widths)?;
        let full = rows.last().map_or(f64::NAN, |r| r.metric);
        let mut log = training_log(
            &format!("train-clf batch={batch} config_sha256={hash} seed={}", s.train.seed),
            &trained.report,
        );
        let _ = writeln!(log, "test_accuracy {full}");
        write_text(&s.out_dir.join(format!("{stem}.log")), &log)?;
        AblationReport::new(Metric::Accuracy, rows)?
            .with_provenance("model", model_path.display())
            .with_provenance("seed", s.train.seed)
            .with_provenance("config_sha256", &hash)
            .write(&s.out_dir.join(format!("{stem}.csv")))?;
        let _ = writeln!(out, "model: {} test_accuracy: {full}", model_path.display());
    }
    Ok(out)
}

// ---------------------------------------------------------------- width sweeps

/// One width per Triangular Dropout layer: `k`, capped at each layer's size.
pub fn uniform_widths(model: &Model, k: usize) -> Result<Vec<usize>> {
    let full = model.tridrop_widths();
    let max = full.iter().copied().max().unwrap_or(0);
    if k == 0 || k > max {
        return Err(CliError::Core(tridrop_core::Error::Range {
            what: "width",
            value: k,
            min: 1,
            max,
        }));
    }
    Ok(full.into_iter().map(|n| k.min(n)).collect())
}

/// Parses `all`, `a,b,c`, `a-b` or mixtures such as `1-4,8,16`.
pub fn parse_widths(text: &str, max: usize) -> Result<Vec<usize>> {
    let bad = || CliError::Config(format!("cannot parse widths {text:?}"));
    let mut out = Vec::new();
    if text.trim() == "all" {
        out.extend(1..=max);
    } else {
        for part in text.split(',') {
            let part = part.trim();
            match part.split_once('-') {
                Some((a, b)) => {
                    let a: usize = a.trim().parse().map_err(|_| bad())?;
                    let b: usize = b.trim().parse().map_err(|_| bad())?;
                    out.extend(a..=b);
                }
                None => out.push(part.parse().map_err(|_| bad())?),
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(bad());
    }
    if out[0] == 0 || *out.last().unwrap() > max {
        return Err(CliError::Core(tridrop_core::Error::Range {
            what: "width",
            value: if out[0] == 0 { 0 } else { *out.last().unwrap() },
            min: 1,
            max,
        }));
    }
    Ok(out)
}

fn pruned_params(model: &Model, widths: &[usize]) -> Result<usize> {
    Ok(model.prune(widths)?.param_count())
}

/// Mean per-pixel BCE of the reconstruction at each width.
pub fn reconstruction_sweep(model: &Model, images: &Matrix, widths: &[usize]) -> Result<Vec<AblationRow>> {
    let sweep = WidthSweep::new(model, images)?;
    widths
        .iter()
        .map(|&k| {
            let w = uniform_widths(model, k)?;
            let out = sweep.output(&w)?;
            let loss = LossKind::BinaryCrossEntropy.loss(&out, images)? as f64;
            Ok(AblationRow {
                width: k,
                metric: loss,
                params: pruned_params(model, &w)?,
            })
        })
        .collect()
}

/// Test accuracy at each width.
pub fn accuracy_sweep(
    model: &Model,
    images: &Matrix,
    labels: &[u8],
    widths: &[usize],
) -> Result<Vec<AblationRow>> {
    let targets = one_hot(labels, model.output_dim())?;
    let sweep = WidthSweep::new(model, images)?;
    widths
        .iter()
        .map(|&k| {
            let w = uniform_widths(model, k)?;
            Ok(AblationRow {
                width: k,
                metric: accuracy(&sweep.output(&w)?, &targets),
                params: pruned_params(model, &w)?,
            })
        })
        .collect()
}

/// Normalized control score at each width, on the same starts for every width.
pub fn score_sweep(model: &Model, widths: &[usize], episodes: usize, seed: u64) -> Result<Vec<AblationRow>> {
    let p = EnvParams::default();
    widths
        .iter()
        .map(|&k| {
            let w = uniform_widths(model, k)?;
            let policy = ModelPolicy {
                model,
                widths: Some(w.clone()),
            };
            let perf = control::evaluate_policy(&policy, episodes, seed, &p)?;
            Ok(AblationRow {
                width: k,
                metric: perf.score,
                params: pruned_params(model, &w)?,
            })
        })
        .collect()
}

pub fn metric_for(model: &Model, choice: MetricChoice) -> Result<Metric> {
    Ok(match choice {
        MetricChoice::Bce => Metric::Bce,
        MetricChoice::Accuracy => Metric::Accuracy,
        MetricChoice::Score => Metric::Score,
        MetricChoice::Auto => match model.loss {
            LossKind::BinaryCrossEntropy => Metric::Bce,
            LossKind::SoftmaxCrossEntropy => Metric::Accuracy,
            LossKind::MeanSquaredError => Metric::Score,
        },
    })
}

/// The narrowest layer other than the output layer; the first on ties.
pub fn bottleneck_layer(model: &Model) -> Option<usize> {
    let hidden = &model.layers()[..model.layers().len() - 1];
    hidden
        .iter()
        .enumerate()
        .min_by_key(|(i, l)| (l.params().out_dim(), *i))
        .map(|(i, _)| i)
}

/// Makes `model` ablatable: unchanged if it has Triangular Dropout layers,
/// otherwise (with `force`) one dense layer is converted.
pub fn prepare_for_ablation(model: &mut Model, force: bool, layer: Option<usize>) -> Result<()> {
    if !model.tridrop_indices().is_empty() {
        return Ok(());
    }
    if !force {
        return Err(CliError::Config(
            "model has no Triangular Dropout layer; pass --force to ablate it anyway".into(),
        ));
    }
    let idx = match layer {
        Some(i) => i,
        None => bottleneck_layer(model)
            .ok_or_else(|| CliError::Config("a single-layer model cannot be ablated".into()))?,
    };
    if idx + 1 >= model.layers().len() {
        return Err(CliError::Config(format!(
            "layer {idx} is the output layer or does not exist"
        )));
    }
    model.convert_to_tridrop(idx)?;
    Ok(())
}

/// Evaluates `model` at `widths` with the chosen metric. MNIST is required
/// for the image metrics and ignored for the control score.
pub fn ablate(
    model: &Model,
    metric: Metric,
    widths: &[usize],
    mnist: Option<&Mnist>,
    episodes: usize,
    eval_seed: u64,
) -> Result<AblationReport> {
    let need = || CliError::Config("this metric needs MNIST test data".into());
    let rows = match metric {
        Metric::Bce => reconstruction_sweep(model, &mnist.ok_or_else(need)?.test_images, widths)?,
        Metric::Accuracy => {
            let m = mnist.ok_or_else(need)?;
            accuracy_sweep(model, &m.test_images, &m.test_labels, widths)?
        }
        Metric::Score => {
            if model.input_dim() != 2 || model.output_dim() != 1 {
                return Err(CliError::Config(
                    "the control score needs a model mapping (x, v) to one action".into(),
                ));
            }
            score_sweep(model, widths, episodes, eval_seed)?
        }
    };
    AblationReport::new(metric, rows)
}

fn load_test_only(data: &DataSettings) -> Result<Mnist> {
    let files = data.files()?;
    let (test_images, test_labels) = limit(
        load_idx_images(&files.test_images)?,
        load_idx_labels(&files.test_labels)?,
        data.test_limit,
        "test set",
    )?;
    Ok(Mnist {
        train_images: Matrix::zeros(0, test_images.cols()),
        train_labels: Vec::new(),
        test_images,
        test_labels,
    })
}

fn required(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

pub fn run_ablate(s: &AblateSettings) -> Result<String> {
    let path = required(&s.model, "model")?;
    let mut model = load_model(&path)?;
    prepare_for_ablation(&mut model, s.force, s.force_layer)?;
    let max = model.tridrop_widths().into_iter().max().unwrap_or(0);
    let widths = parse_widths(&s.widths, max)?;
    let metric = metric_for(&model, s.metric)?;
    let mnist = match metric {
        Metric::Score => None,
        _ => Some(load_test_only(&s.data)?),
    };
    let report = ablate(&model, metric, &widths, mnist.as_ref(), s.eval_episodes, s.eval_seed)?
        .with_provenance("model", path.display())
        .with_provenance("seed", s.eval_seed)
        .with_provenance("config_sha256", config_hash("ablate", s));
    match &s.out {
        Some(out) => {
            report.write(out)?;
            Ok(format!("wrote {} rows to {}\n", report.rows.len(), out.display()))
        }
        None => Ok(report.to_csv()),
    }
}

// ---------------------------------------------------------------- capacity sweep

/// Autoencoder settings for one model of a capacity sweep.
pub fn capacity_member(s: &CapacitySettings, available: usize) -> AeSettings {
    AeSettings {
        data: s.data.clone(),
        train: s.train.clone(),
        latent: available,
        hidden: s.hidden,
        plain: false,
        plain_width: None,
        out_dir: s.out_dir.clone(),
        name: Some(format!("capacity_n{available}")),
        ..AeSettings::default()
    }
}

/// Combined sweep CSV: `available_width,width,metric,params`.
pub fn capacity_csv(comment: &str, entries: &[(usize, AblationReport)]) -> String {
    let mut s = format!("# provenance: metric=bce {comment}\navailable_width,width,metric,params\n");
    for (n, report) in entries {
        for r in &report.rows {
            let _ = writeln!(s, "{n},{},{},{}", r.width, r.metric, r.params);
        }
    }
    s
}

pub fn run_capacity_sweep(s: &CapacitySettings) -> Result<String> {
    if s.available_widths.is_empty() || s.eval_max_width == 0 {
        return Err(CliError::Config("capacity sweep needs widths to train and evaluate".into()));
    }
    let mnist = Mnist::load(&s.data)?;
    let train_set = mnist.autoencoder_train()?;
    let hash = config_hash("capacity-sweep", s);
    ensure_dir(&s.out_dir)?;
    let mut entries = Vec::new();
    let mut out = String::new();
    for &n in &s.available_widths {
        let member = capacity_member(s, n);
        let stem = member.file_stem();
        let trained = train_autoencoder(&member, &train_set, print_epoch(&stem))?;
        let model_path = s.out_dir.join(format!("{stem}.tdrp"));
        save_model(&trained.model, &model_path)?;
        write_text(
            &s.out_dir.join(format!("{stem}.log")),
            &training_log(&format!("capacity-sweep n={n} config_sha256={hash}"), &trained.report),
        )?;
        let widths: Vec<usize> = (1..=s.eval_max_width.min(n)).collect();
        let report = AblationReport::new(
            Metric::Bce,
            reconstruction_sweep(&trained.model, &mnist.test_images, &widths)?,
        )?
        .with_provenance("model", model_path.display())
        .with_provenance("seed", s.train.seed)
        .with_provenance("config_sha256", &hash);
        let csv = s.out_dir.join(format!("{stem}.csv"));
        report.write(&csv)?;
        let _ = writeln!(out, "n={n}: {}", csv.display());
        entries.push((n, report));
    }
    let combined = s.out_dir.join("capacity_combined.csv");
    write_text(
        &combined,
        &capacity_csv(&format!("seed={} config_sha256={hash}", s.train.seed), &entries),
    )?;
    let _ = writeln!(out, "combined: {}", combined.display());
    Ok(out)
}

// ---------------------------------------------------------------- distillation

/// `(x, v) -> h -> h -> h -> action`, tanh hidden units, linear output.
pub fn student_spec(hidden: usize, variant: StudentVariant, seed: u64) -> ModelSpec {
    let (outer, middle) = match variant {
        StudentVariant::Middle => (LayerKind::Dense, LayerKind::TriDrop),
        StudentVariant::All => (LayerKind::TriDrop, LayerKind::TriDrop),
    };
    ModelSpec::new(
        &format!("student_{}_h{hidden}", variant.name()),
        2,
        LossKind::MeanSquaredError,
    )
    .with_seed(seed)
    .layer(outer, hidden, ActivationKind::Tanh)
    .layer(middle, hidden, ActivationKind::Tanh)
    .layer(outer, hidden, ActivationKind::Tanh)
    .layer(LayerKind::Dense, 1, ActivationKind::Identity)
}

#[derive(Debug, Clone)]
pub struct Distilled {
    pub trained: Trained,
    /// Normalized score at widths `1..=hidden`.
    pub report: AblationReport,
    pub search: WidthSearch,
}

impl Distilled {
    pub fn full_width_score(&self) -> f64 {
        self.report.rows.last().map_or(f64::NAN, |r| r.metric)
    }
}

pub fn distill(s: &DistillSettings, on_epoch: impl FnMut(&EpochLog)) -> Result<Distilled> {
    let p = EnvParams::default();
    let data = control::collect_imitation_dataset(s.samples, s.noise_prob, s.data_seed, &p)?;
    let mut model = Model::from_spec(&student_spec(s.hidden, s.variant, s.train.seed))?;
    model.name = s.file_stem();
    model.provenance = format!("distill config_sha256={}", config_hash("distill", s));
    let report = fit(&mut model, &data, &s.train, on_epoch)?;
    let widths: Vec<usize> = (1..=s.hidden).collect();
    let rows = score_sweep(&model, &widths, s.eval_episodes, s.eval_seed)?;
    let scores: Vec<f64> = rows.iter().map(|r| r.metric).collect();
    let search = control::min_width_at_90(&scores);
    Ok(Distilled {
        trained: Trained { model, report },
        report: AblationReport::new(Metric::Score, rows)?,
        search,
    })
}

pub fn run_distill(s: &DistillSettings) -> Result<String> {
    let stem = s.file_stem();
    let hash = config_hash("distill", s);
    let d = distill(s, print_epoch(&stem))?;
    ensure_dir(&s.out_dir)?;
    let model_path = s.out_dir.join(format!("{stem}.tdrp"));
    save_model(&d.trained.model, &model_path)?;
    let mut log = training_log(
        &format!("distill config_sha256={hash} seed={}", s.train.seed),
        &d.trained.report,
    );
    let _ = writeln!(
        log,
        "min_width_at_90 {} found {}",
        d.search.width, d.search.found
    );
    write_text(&s.out_dir.join(format!("{stem}.log")), &log)?;
    let report = d
        .report
        .clone()
        .with_provenance("model", model_path.display())
        .with_provenance("seed", s.eval_seed)
        .with_provenance("config_sha256", &hash);
    report.write(&s.out_dir.join(format!("{stem}.csv")))?;
    Ok(format!(
        "model: {}\nfull_width_score: {}\nmin_width_at_90: {}{}\n",
        model_path.display(),
        d.full_width_score(),
        d.search.width,
        if d.search.found { "" } else { " (threshold not reached)" }
    ))
}

// ---------------------------------------------------------------- pruning

#[derive(Debug, Clone)]
pub struct Pruned {
    pub model: Model,
    /// Largest `|masked - pruned|` over the random inputs.
    pub gap: f32,
    pub params_before: usize,
    pub params_after: usize,
}

/// Expands a single width to every Triangular Dropout layer.
pub fn expand_widths(model: &Model, widths: &[usize]) -> Result<Vec<usize>> {
    let n = model.tridrop_indices().len();
    match widths.len() {
        1 if n > 1 => uniform_widths(model, widths[0]),
        _ => Ok(widths.to_vec()),
    }
}

/// Prunes and checks the result against width masking on `samples` random
/// inputs drawn from `[0, 1]`.
pub fn prune_checked(model: &Model, widths: &[usize], samples: usize, seed: u64) -> Result<Pruned> {
    let widths = expand_widths(model, widths)?;
    let pruned = model.prune(&widths)?;
    let mut rng = Rng::new(seed);
    let x = Matrix::from_fn(samples, model.input_dim(), |_, _| rng.uniform_f32(0.0, 1.0));
    let gap = model
        .forward_at_widths(&x, &widths)?
        .max_abs_diff(&pruned.forward(&x)?)?;
    if !(gap <= EQUIVALENCE_TOLERANCE) {
        return Err(CliError::Equivalence(format!(
            "pruned output differs from masked output by {gap:e} (tolerance {EQUIVALENCE_TOLERANCE:e})"
        )));
    }
    Ok(Pruned {
        params_before: model.param_count(),
        params_after: pruned.param_count(),
        model: pruned,
        gap,
    })
}

pub fn run_prune(s: &PruneSettings) -> Result<String> {
    let path = required(&s.model, "model")?;
    let out = required(&s.out, "out")?;
    if s.widths.is_empty() {
        return Err(CliError::Config("--widths is required".into()));
    }
    let model = load_model(&path)?;
    let p = prune_checked(&model, &s.widths, s.samples, s.seed)?;
    save_model(&p.model, &out)?;
    Ok(format!(
        "{}max_abs_gap: {:e} over {} inputs\nparams before: {}\nparams after: {}\nwrote {}\n",
        p.model.summarize(),
        p.gap,
        s.samples,
        p.params_before,
        p.params_after,
        out.display()
    ))
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub tolerance: f64,
    pub report: GradcheckReport,
}

impl CatalogEntry {
    pub fn passed(&self) -> bool {
        self.report.checked > 0 && self.report.max_error < self.tolerance
    }
}

/// Relative error tolerated for purely linear models.
pub const LINEAR_TOLERANCE: f64 = 1e-6;
pub const NONLINEAR_TOLERANCE: f64 = 1e-3;

struct Case {
    name: String,
    spec: ModelSpec,
    batch: usize,
    mask_mode: MaskMode,
    tolerance: f64,
}

fn output_layer(loss: LossKind) -> (usize, ActivationKind) {
    match loss {
        LossKind::BinaryCrossEntropy => (2, ActivationKind::Sigmoid),
        LossKind::MeanSquaredError => (2, ActivationKind::Identity),
        LossKind::SoftmaxCrossEntropy => (3, ActivationKind::Identity),
    }
}

fn catalog_cases(seed: u64) -> Vec<Case> {
    let mut cases = Vec::new();
    let linear = |name: &str, spec: ModelSpec, batch: usize| Case {
        name: name.into(),
        spec,
        batch,
        mask_mode: MaskMode::DeterministicPrefix,
        tolerance: LINEAR_TOLERANCE,
    };
    cases.push(linear(
        "linear dense, mse",
        ModelSpec::new("lin", 4, LossKind::MeanSquaredError)
            .with_seed(seed)
            .layer(LayerKind::Dense, 3, ActivationKind::Identity),
        5,
    ));
    cases.push(linear(
        "linear tridrop, mse",
        ModelSpec::new("lin-td", 4, LossKind::MeanSquaredError)
            .with_seed(seed)
            .layer(LayerKind::TriDrop, 6, ActivationKind::Identity)
            .layer(LayerKind::Dense, 2, ActivationKind::Identity),
        6,
    ));
    for kind in [LayerKind::Dense, LayerKind::TriDrop] {
        for act in ActivationKind::ALL {
            for loss in LossKind::ALL {
                let (out, out_act) = output_layer(loss);
                cases.push(Case {
                    name: format!("{} {}, {}", kind.name(), act.name(), loss.name()),
                    spec: ModelSpec::new("combo", 3, loss)
                        .with_seed(seed)
                        .layer(kind, 5, act)
                        .layer(LayerKind::Dense, out, out_act),
                    batch: 4,
                    mask_mode: MaskMode::DeterministicPrefix,
                    tolerance: NONLINEAR_TOLERANCE,
                });
            }
        }
    }
    for (label, batch, width) in [("B<n", 3, 8), ("B==n", 6, 6), ("B>n", 10, 4)] {
        cases.push(Case {
            name: format!("tridrop regime {label} (B={batch}, n={width})"),
            spec: ModelSpec::new("regime", 3, LossKind::MeanSquaredError)
                .with_seed(seed)
                .layer(LayerKind::TriDrop, width, ActivationKind::Tanh)
                .layer(LayerKind::Dense, 2, ActivationKind::Identity),
            batch,
            mask_mode: MaskMode::DeterministicPrefix,
            tolerance: NONLINEAR_TOLERANCE,
        });
    }
    cases.push(Case {
        name: "tridrop random-prefix mask".into(),
        spec: ModelSpec::new("random", 3, LossKind::MeanSquaredError)
            .with_seed(seed)
            .layer(LayerKind::TriDrop, 6, ActivationKind::Sigmoid)
            .layer(LayerKind::Dense, 2, ActivationKind::Identity),
        batch: 7,
        mask_mode: MaskMode::RandomPrefix,
        tolerance: NONLINEAR_TOLERANCE,
    });
    cases.push(Case {
        name: "stacked tridrop classifier".into(),
        spec: ModelSpec::new("stacked", 4, LossKind::SoftmaxCrossEntropy)
            .with_seed(seed)
            .layer(LayerKind::TriDrop, 6, ActivationKind::Relu)
            .layer(LayerKind::TriDrop, 5, ActivationKind::Tanh)
            .layer(LayerKind::Dense, 3, ActivationKind::Identity),
        batch: 4,
        mask_mode: MaskMode::DeterministicPrefix,
        tolerance: NONLINEAR_TOLERANCE,
    });
    cases
}

fn case_batch(case: &Case, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
    let x = Matrix::from_fn(case.batch, case.spec.input_dim, |_, _| rng.uniform_f32(-1.0, 1.0));
    let out = case.spec.output_dim();
    let y = match case.spec.loss {
        LossKind::MeanSquaredError => Matrix::from_fn(case.batch, out, |_, _| rng.uniform_f32(-1.0, 1.0)),
        LossKind::BinaryCrossEntropy => Matrix::from_fn(case.batch, out, |_, _| rng.uniform_f32(0.0, 1.0)),
        LossKind::SoftmaxCrossEntropy => {
            let labels: Vec<u8> = (0..case.batch).map(|_| rng.int_inclusive(0, out - 1) as u8).collect();
            one_hot(&labels, out)?
        }
    };
    Ok((x, y))
}

/// Runs the finite-difference check over every layer kind, activation and
/// loss, plus each mask regime.
pub fn gradcheck_catalog(s: &GradcheckSettings) -> Result<Vec<CatalogEntry>> {
    let mut rng = Rng::with_stream(s.seed, 7);
    catalog_cases(s.seed)
        .into_iter()
        .map(|case| {
            let model = Model::from_spec(&case.spec)?;
            let (x, y) = case_batch(&case, &mut rng)?;
            let masks = model
                .tridrop_widths()
                .into_iter()
                .map(|n| TriangularMask::build(case.batch, n, case.mask_mode, &mut rng))
                .collect::<tridrop_core::Result<Vec<_>>>()?;
            let report = gradcheck(&model, &x, &y, case.spec.loss, &masks, s.eps)?;
            Ok(CatalogEntry {
                name: case.name,
                tolerance: case.tolerance,
                report,
            })
        })
        .collect()
}

pub fn format_catalog(entries: &[CatalogEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        let worst = e
            .report
            .worst
            .map_or("-".to_string(), |(l, o)| format!("layer {l} param {o}"));
        let _ = writeln!(
            s,
            "{} {:<44} max_rel_err {:.3e} (tol {:.0e}) checked {} kink-skipped {} worst {}",
            if e.passed() { "PASS" } else { "FAIL" },
            e.name,
            e.report.max_error,
            e.tolerance,
            e.report.checked,
            e.report.skipped_at_kink,
            worst
        );
    }
    s
}

pub fn run_gradcheck(s: &GradcheckSettings) -> Result<String> {
    let entries = gradcheck_catalog(s)?;
    let text = format_catalog(&entries);
    let failed: Vec<&CatalogEntry> = entries.iter().filter(|e| !e.passed()).collect();
    if let Some(first) = failed.first() {
        print!("{text}");
        return Err(CliError::Numeric(format!(
            "{} gradient check(s) failed; first: {} with error {:e} at {:?}",
            failed.len(),
            first.name,
            first.report.max_error,
            first.report.worst
        )));
    }
    Ok(text)
}

// ---------------------------------------------------------------- param-count

pub fn run_param_count(s: &ParamCountSettings) -> Result<String> {
    match (s.vgg_width, &s.model) {
        (Some(w), None) => {
            if w == 0 || w > tridrop_core::params::VGG_HIDDEN {
                return Err(CliError::Core(tridrop_core::Error::Range {
                    what: "vgg width",
                    value: w,
                    min: 1,
                    max: tridrop_core::params::VGG_HIDDEN,
                }));
            }
            let r = ParamCountReport::for_vgg_width(w);
            debug_assert_eq!(r.total, vgg_classifier_param_count(w));
            Ok(format!(
                "width: {w}\nparams: {}\nreduction: {:.1}%\n",
                r.total,
                r.reduction_percent()
            ))
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            Ok(model.summarize())
        }
        _ => Err(CliError::Config(
            "pass exactly one of --vgg-width or --model".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_lists() {
        assert_eq!(parse_widths("all", 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_widths("1-3,8, 5", 8).unwrap(), vec![1, 2, 3, 5, 8]);
        assert!(parse_widths("9", 8).is_err());
        assert!(parse_widths("0", 8).is_err());
        assert!(parse_widths("x", 8).is_err());
    }

    #[test]
    fn uniform_widths_cap_each_layer() {
        let spec = ModelSpec::new("m", 3, LossKind::MeanSquaredError)
            .layer(LayerKind::TriDrop, 6, ActivationKind::Relu)
            .layer(LayerKind::TriDrop, 4, ActivationKind::Relu)
            .layer(LayerKind::Dense, 1, ActivationKind::Identity);
        let m = Model::from_spec(&spec).unwrap();
        assert_eq!(uniform_widths(&m, 5).unwrap(), vec![5, 4]);
        assert!(uniform_widths(&m, 7).is_err());
        assert_eq!(expand_widths(&m, &[2]).unwrap(), vec![2, 2]);
    }

    #[test]
    fn forcing_picks_the_bottleneck() {
        let spec = autoencoder_spec(10, 8, 3, false, 0);
        let mut m = Model::from_spec(&spec).unwrap();
        assert!(prepare_for_ablation(&mut m, false, None).is_err());
        prepare_for_ablation(&mut m, true, None).unwrap();
        assert_eq!(m.tridrop_indices(), vec![1]);
        let mut m = Model::from_spec(&spec).unwrap();
        assert!(prepare_for_ablation(&mut m, true, Some(3)).is_err());
    }

    #[test]
    fn catalog_covers_regimes_and_passes() {
        let entries = gradcheck_catalog(&GradcheckSettings::default()).unwrap();
        assert_eq!(entries.len(), 2 + 2 * 4 * 3 + 3 + 2);
        for e in &entries {
            assert!(e.passed(), "{}", format_catalog(std::slice::from_ref(e)));
        }
        for regime in ["B<n", "B==n", "B>n"] {
            assert!(entries.iter().any(|e| e.name.contains(regime)));
        }
    }

    #[test]
    fn prune_check_reports_counts() {
        let spec = autoencoder_spec(12, 8, 6, true, 3);
        let m = Model::from_spec(&spec).unwrap();
        let p = prune_checked(&m, &[2], 64, 1).unwrap();
        assert!(p.gap <= EQUIVALENCE_TOLERANCE);
        assert_eq!(p.params_before, spec.param_count());
        assert_eq!(
            p.params_after,
            autoencoder_spec(12, 8, 2, false, 3).param_count()
        );
    }

    #[test]
    fn vgg_param_count_text() {
        let s = ParamCountSettings {
            vgg_width: Some(512),
            model: None,
        };
        let out = run_param_count(&s).unwrap();
        assert!(out.contains("params: 13621224"));
        assert!(out.contains("reduction: 89.0%"));
        assert!(run_param_count(&ParamCountSettings::default()).is_err());
    }
}
