//! Learning-rate schedules driven by per-epoch calls.

use alloc::vec::Vec;

/// Divides the learning rate when the epoch loss stops improving.
///
/// After each epoch the loss is appended to a history that is cleared on every
/// decay. Once the history holds more than `patience` entries, the best loss in
/// the trailing `patience` epochs is compared against the best loss before that
/// window; if it is not lower by at least `min_rel_improvement` (relative), the
/// rate is divided by `factor`. When `max_decays` decays have already been
/// applied, a further plateau raises the stop flag instead.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    min_rel_improvement: f64,
    max_decays: usize,
    decays: usize,
    history: Vec<f64>,
    stopped: bool,
}

impl PlateauScheduler {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            factor: 10.0,
            patience: 15,
            min_rel_improvement: 0.02,
            max_decays: 5,
            decays: 0,
            history: Vec::new(),
            stopped: false,
        }
    }

    pub fn with_factor(mut self, factor: f64) -> Self {
        self.factor = factor;
        self
    }

    pub fn with_patience(mut self, patience: usize) -> Self {
        self.patience = patience.max(1);
        self
    }

    pub fn with_min_rel_improvement(mut self, frac: f64) -> Self {
        self.min_rel_improvement = frac;
        self
    }

    pub fn with_max_decays(mut self, max_decays: usize) -> Self {
        self.max_decays = max_decays;
        self
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn decays(&self) -> usize {
        self.decays
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    /// Records one epoch's mean loss; returns the rate for the next epoch and
    /// whether training should stop.
    pub fn update(&mut self, epoch_loss: f64) -> (f64, bool) {
        if self.stopped {
            return (self.lr, true);
        }
        self.history.push(epoch_loss);
        let n = self.history.len();
        if n > self.patience {
            let split = n - self.patience;
            let best_before = min(&self.history[..split]);
            let best_window = min(&self.history[split..]);
            if best_window > best_before * (1.0 - self.min_rel_improvement) {
                if self.decays >= self.max_decays {
                    self.stopped = true;
                } else {
                    self.lr /= self.factor;
                    self.decays += 1;
                    self.history.clear();
                }
            }
        }
        (self.lr, self.stopped)
    }
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Divides the rate by `factor` every `period` epochs.
#[derive(Debug, Clone)]
pub struct StepScheduler {
    lr: f64,
    factor: f64,
    period: usize,
    epoch: usize,
}

impl StepScheduler {
    pub fn new(lr: f64, period: usize) -> Self {
        Self {
            lr,
            factor: 10.0,
            period: period.max(1),
            epoch: 0,
        }
    }

    pub fn with_factor(mut self, factor: f64) -> Self {
        self.factor = factor;
        self
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Marks an epoch as finished; returns the rate for the next one.
    pub fn end_epoch(&mut self) -> f64 {
        self.epoch += 1;
        if self.epoch % self.period == 0 {
            self.lr /= self.factor;
        }
        self.lr
    }
}
