//! Mini-batch training with Adam and per-epoch learning-rate schedules.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::data::{argmax_rows, BatchIterator, Dataset};
use crate::error::{Error, Result};
use crate::mask::{MaskMode, TriangularMask};
use crate::matrix::Matrix;
use crate::model::Model;
use crate::optim::AdamState;
use crate::rng::Rng;
use crate::schedule::{PlateauScheduler, StepScheduler};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleConfig {
    Constant,
    Plateau {
        factor: f64,
        patience: usize,
        min_rel_improvement: f64,
        max_decays: usize,
    },
    Step {
        period: usize,
        factor: f64,
    },
}

impl ScheduleConfig {
    /// Divide by 10 after 15 epochs without a 2% improvement, at most 5 times.
    pub fn plateau_default() -> Self {
        ScheduleConfig::Plateau {
            factor: 10.0,
            patience: 15,
            min_rel_improvement: 0.02,
            max_decays: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Upper bound on epochs; a plateau schedule may stop earlier.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleConfig,
    pub seed: u64,
    pub mask_mode: MaskMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the batch losses.
    pub loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub stopped_by_schedule: bool,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

enum Scheduler {
    Constant(f64),
    Plateau(PlateauScheduler),
    Step(StepScheduler),
}

impl Scheduler {
    fn new(lr: f64, cfg: ScheduleConfig) -> Self {
        match cfg {
            ScheduleConfig::Constant => Scheduler::Constant(lr),
            ScheduleConfig::Plateau {
                factor,
                patience,
                min_rel_improvement,
                max_decays,
            } => Scheduler::Plateau(
                PlateauScheduler::new(lr)
                    .with_factor(factor)
                    .with_patience(patience)
                    .with_min_rel_improvement(min_rel_improvement)
                    .with_max_decays(max_decays),
            ),
            ScheduleConfig::Step { period, factor } => {
                Scheduler::Step(StepScheduler::new(lr, period).with_factor(factor))
            }
        }
    }

    fn lr(&self) -> f64 {
        match self {
            Scheduler::Constant(lr) => *lr,
            Scheduler::Plateau(s) => s.lr(),
            Scheduler::Step(s) => s.lr(),
        }
    }

    /// Returns whether to stop.
    fn end_epoch(&mut self, loss: f64) -> bool {
        match self {
            Scheduler::Constant(_) => false,
            Scheduler::Plateau(s) => s.update(loss).1,
            Scheduler::Step(s) => {
                s.end_epoch();
                false
            }
        }
    }
}

/// Trains `model` in place. Shuffling and random masks are drawn from
/// independent streams of `cfg.seed`. Models with Triangular Dropout layers
/// drop the final short batch so every mask has exactly `batch_size` rows.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    if cfg.batch_size == 0 || cfg.lr <= 0.0 {
        return Err(Error::Config(format!(
            "batch size {} and learning rate {} must be positive",
            cfg.batch_size, cfg.lr
        )));
    }
    if data.inputs.cols() != model.input_dim() || data.targets.cols() != model.output_dim() {
        return Err(Error::Dimension {
            op: "train",
            left: (data.inputs.cols(), data.targets.cols()),
            right: (model.input_dim(), model.output_dim()),
        });
    }
    let td_widths = model.tridrop_widths();
    let drop_last = !td_widths.is_empty();
    if drop_last && data.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "{} examples cannot fill one batch of {}",
            data.len(),
            cfg.batch_size
        )));
    }
    let mut batches = BatchIterator::new(data, cfg.batch_size, true, drop_last, cfg.seed)?;
    let mut mask_rng = Rng::with_stream(cfg.seed, 1);
    let mut mask_cache: BTreeMap<(usize, usize), TriangularMask> = BTreeMap::new();
    let mut adam = AdamState::<f32>::new(&model.param_sizes());
    let mut scheduler = Scheduler::new(cfg.lr, cfg.schedule);
    let mut logs = Vec::new();
    let mut stopped = false;

    for epoch in 1..=cfg.epochs {
        let lr = scheduler.lr();
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (x, y) in batches.epoch() {
            let rows = x.rows();
            let masks = td_widths
                .iter()
                .map(|&n| match cfg.mask_mode {
                    MaskMode::DeterministicPrefix => match mask_cache.get(&(rows, n)) {
                        Some(m) => Ok(m.clone()),
                        None => {
                            let m = TriangularMask::deterministic(rows, n)?;
                            mask_cache.insert((rows, n), m.clone());
                            Ok(m)
                        }
                    },
                    MaskMode::RandomPrefix => TriangularMask::random(rows, n, &mut mask_rng),
                })
                .collect::<Result<Vec<_>>>()?;
            let (pred, cache) = model.forward_train(&x, &masks)?;
            let (loss, grad) = model
                .loss
                .loss_and_grad(&pred, &y)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
            let grads = model.backward(&cache, &grad)?;
            adam.step(&mut model.param_slices_mut(), &grads.slices(), lr)?;
            total += loss as f64;
            count += 1;
        }
        let loss = total / count.max(1) as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss diverged at epoch {epoch}")));
        }
        let log = EpochLog { epoch, loss, lr };
        on_epoch(&log);
        logs.push(log);
        if scheduler.end_epoch(loss) {
            stopped = true;
            break;
        }
    }
    Ok(TrainReport {
        epochs: logs,
        stopped_by_schedule: stopped,
    })
}

/// Mean loss of `model` (at its configured eval widths) over `data`, in chunks.
pub fn evaluate_loss(model: &Model, data: &Dataset, chunk: usize) -> Result<f64> {
    let chunk = chunk.max(1);
    let mut total = 0.0f64;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let x = data.inputs.row_range(start, end);
        let y = data.targets.row_range(start, end);
        let pred = model.forward(&x)?;
        total += model.loss.loss(&pred, &y)? as f64 * (end - start) as f64;
        start = end;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Fraction of rows whose argmax matches the one-hot target.
pub fn accuracy(logits: &Matrix, targets: &Matrix) -> f64 {
    let hits = argmax_rows(logits)
        .into_iter()
        .zip(argmax_rows(targets))
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / logits.rows().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::loss::LossKind;
    use crate::model::{LayerKind, ModelSpec};

    fn regression_data(n: usize) -> Dataset {
        let mut rng = Rng::new(0);
        let x = Matrix::from_fn(n, 3, |_, _| rng.uniform_f32(-1.0, 1.0));
        let y = Matrix::from_fn(n, 1, |r, _| {
            0.5 * x.get(r, 0) - 0.3 * x.get(r, 1) + 0.1 * x.get(r, 2)
        });
        Dataset::new("lin", x, y).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            lr: 0.01,
            schedule: ScheduleConfig::Constant,
            seed: 1,
            mask_mode: MaskMode::DeterministicPrefix,
        }
    }

    #[test]
    fn learns_linear_map() {
        let data = regression_data(256);
        let spec = ModelSpec::new("lin", 3, LossKind::MeanSquaredError).layer(
            LayerKind::Dense,
            1,
            ActivationKind::Identity,
        );
        let mut m = Model::from_spec(&spec).unwrap();
        let before = evaluate_loss(&m, &data, 64).unwrap();
        let report = train(&mut m, &data, &cfg(100), |_| {}).unwrap();
        let after = evaluate_loss(&m, &data, 64).unwrap();
        assert_eq!(report.epochs.len(), 100);
        assert!(after < before * 0.01, "{before} -> {after}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = regression_data(100);
        let spec = ModelSpec::new("td", 3, LossKind::MeanSquaredError)
            .with_seed(4)
            .layer(LayerKind::TriDrop, 6, ActivationKind::Tanh)
            .layer(LayerKind::Dense, 1, ActivationKind::Identity);
        let run = |mode| {
            let mut m = Model::from_spec(&spec).unwrap();
            let mut c = cfg(5);
            c.mask_mode = mode;
            let r = train(&mut m, &data, &c, |_| {}).unwrap();
            (m.flat_params(), r)
        };
        assert_eq!(run(MaskMode::DeterministicPrefix), run(MaskMode::DeterministicPrefix));
        assert_eq!(run(MaskMode::RandomPrefix), run(MaskMode::RandomPrefix));
    }

    #[test]
    fn rejects_bad_shapes_and_config() {
        let data = regression_data(10);
        let spec = ModelSpec::new("x", 2, LossKind::MeanSquaredError).layer(
            LayerKind::Dense,
            1,
            ActivationKind::Identity,
        );
        let mut m = Model::from_spec(&spec).unwrap();
        assert!(train(&mut m, &data, &cfg(1), |_| {}).is_err());
        let spec = ModelSpec::new("td", 3, LossKind::MeanSquaredError)
            .layer(LayerKind::TriDrop, 4, ActivationKind::Relu)
            .layer(LayerKind::Dense, 1, ActivationKind::Identity);
        let mut m = Model::from_spec(&spec).unwrap();
        let mut c = cfg(1);
        c.batch_size = 32;
        assert!(matches!(train(&mut m, &data, &c, |_| {}), Err(Error::Config(_))));
    }

    #[test]
    fn accuracy_counts_matches() {
        let logits = Matrix::new(2, 2, alloc::vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let t = Matrix::new(2, 2, alloc::vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(accuracy(&logits, &t), 0.5);
    }
}
