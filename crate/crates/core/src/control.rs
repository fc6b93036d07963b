//! A point-mass regulation task with an analytic expert.
//!
//! The state is position and velocity of a unit mass driven by a bounded
//! force. The expert is a saturated PD law; students imitate it from recorded
//! `(state, action)` pairs and are scored by the ratio of the expert's mean
//! episode cost to their own.

use alloc::format;
use alloc::vec::Vec;


use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Model;
use crate::rng::Rng;

pub const EXPERT_POSITION_GAIN: f64 = 1.0;
pub const EXPERT_VELOCITY_GAIN: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    pub dt: f64,
    pub horizon: usize,
    pub action_bound: f64,
    /// Starts draw `x0 ~ U(-x0_range, x0_range)`.
    pub x0_range: f64,
    /// Starts draw `v0 ~ U(-v0_range, v0_range)`.
    pub v0_range: f64,
    pub position_weight: f64,
    pub velocity_weight: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 200,
            action_bound: 1.0,
            x0_range: 2.0,
            v0_range: 1.0,
            position_weight: 1.0,
            velocity_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvState {
    pub x: f64,
    pub v: f64,
}

impl EnvState {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }
}

/// Explicit Euler step with the action clamped to the bound.
pub fn env_step(s: EnvState, action: f64, p: &EnvParams) -> EnvState {
    let a = action.clamp(-p.action_bound, p.action_bound);
    EnvState {
        x: s.x + p.dt * s.v,
        v: s.v + p.dt * a,
    }
}

pub fn step_cost(s: EnvState, p: &EnvParams) -> f64 {
    (p.position_weight * s.x * s.x + p.velocity_weight * s.v * s.v) * p.dt
}

/// `clamp(-1.0 x - 0.8 v, -1, 1)`.
pub fn expert_action(s: EnvState) -> f64 {
    (-EXPERT_POSITION_GAIN * s.x - EXPERT_VELOCITY_GAIN * s.v).clamp(-1.0, 1.0)
}

pub fn sample_start(rng: &mut Rng, p: &EnvParams) -> EnvState {
    EnvState {
        x: rng.uniform_f64(-p.x0_range, p.x0_range),
        v: rng.uniform_f64(-p.v0_range, p.v0_range),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// State and the action recorded for it.
    pub steps: Vec<(EnvState, f64)>,
    pub cost: f64,
}

/// Runs the expert from `start`. With probability `noise_prob` per step a
/// uniform random action is executed, while the expert's action for that
/// state is what gets recorded.
pub fn expert_rollout(start: EnvState, noise_prob: f64, rng: &mut Rng, p: &EnvParams) -> Rollout {
    let mut s = start;
    let mut steps = Vec::with_capacity(p.horizon);
    let mut cost = 0.0;
    for _ in 0..p.horizon {
        let target = expert_action(s);
        let executed = if rng.bernoulli(noise_prob) {
            rng.uniform_f64(-p.action_bound, p.action_bound)
        } else {
            target
        };
        steps.push((s, target));
        cost += step_cost(s, p);
        s = env_step(s, executed, p);
    }
    Rollout { steps, cost }
}

/// Pools noisy expert episodes and uniformly down-samples to `n` pairs.
/// Inputs are `(x, v)`, targets the expert action.
pub fn collect_imitation_dataset(
    n: usize,
    noise_prob: f64,
    seed: u64,
    p: &EnvParams,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("imitation dataset needs n >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    // Pool twice the requested size so the down-selection is a real subsample.
    let episodes = (2 * n).div_ceil(p.horizon.max(1));
    let mut pool: Vec<(EnvState, f64)> = Vec::with_capacity(episodes * p.horizon);
    for _ in 0..episodes {
        let start = sample_start(&mut rng, p);
        pool.extend(expert_rollout(start, noise_prob, &mut rng, p).steps);
    }
    // Partial Fisher-Yates: the first n slots become a uniform sample.
    for i in 0..n {
        let j = rng.int_inclusive(i, pool.len() - 1);
        pool.swap(i, j);
    }
    pool.truncate(n);
    let inputs = Matrix::from_fn(n, 2, |r, c| {
        let s = pool[r].0;
        (if c == 0 { s.x } else { s.v }) as f32
    });
    let targets = Matrix::from_fn(n, 1, |r, _| pool[r].1 as f32);
    let mut data = Dataset::new("point-mass-imitation", inputs, targets)?;
    data.provenance = format!("expert rollouts, noise_prob={noise_prob}, seed={seed}");
    Ok(data)
}

/// Maps a batch of states to actions.
pub trait Policy {
    fn act(&self, states: &[EnvState]) -> Result<Vec<f64>>;
}

/// Stateless policy given by a function of the state.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(EnvState) -> f64> Policy for FnPolicy<F> {
    fn act(&self, states: &[EnvState]) -> Result<Vec<f64>> {
        Ok(states.iter().map(|&s| (self.0)(s)).collect())
    }
}

pub struct ExpertPolicy;

impl Policy for ExpertPolicy {
    fn act(&self, states: &[EnvState]) -> Result<Vec<f64>> {
        Ok(states.iter().map(|&s| expert_action(s)).collect())
    }
}

/// A network with inputs `(x, v)` and one output, optionally run at fixed
/// Triangular Dropout widths.
pub struct ModelPolicy<'m> {
    pub model: &'m Model,
    pub widths: Option<Vec<usize>>,
}

impl Policy for ModelPolicy<'_> {
    fn act(&self, states: &[EnvState]) -> Result<Vec<f64>> {
        let x = Matrix::from_fn(states.len(), 2, |r, c| {
            (if c == 0 { states[r].x } else { states[r].v }) as f32
        });
        let y = match &self.widths {
            Some(w) => self.model.forward_at_widths(&x, w)?,
            None => self.model.forward(&x)?,
        };
        Ok((0..y.rows()).map(|r| y.get(r, 0) as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfReport {
    pub episodes: usize,
    pub mean_cost: f64,
    pub expert_mean_cost: f64,
    /// `expert_mean_cost / mean_cost`; 1.0 is expert parity.
    pub score: f64,
}

fn mean_cost(policy: &dyn Policy, starts: &[EnvState], p: &EnvParams) -> Result<f64> {
    let mut states = starts.to_vec();
    let mut costs = alloc::vec![0.0f64; starts.len()];
    for step in 0..p.horizon {
        let actions = policy.act(&states)?;
        if actions.len() != states.len() {
            return Err(Error::Numeric(format!(
                "policy returned {} actions for {} states",
                actions.len(),
                states.len()
            )));
        }
        for (ep, ((s, c), &a)) in states.iter_mut().zip(&mut costs).zip(&actions).enumerate() {
            if !a.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite action in episode {ep} at step {step}"
                )));
            }
            *c += step_cost(*s, p);
            *s = env_step(*s, a, p);
        }
    }
    Ok(costs.iter().sum::<f64>() / starts.len() as f64)
}

/// Mean episode cost over `episodes` seeded starts, normalized by the expert
/// on the same starts. The starts depend only on `seed`, so reports for
/// different widths are paired.
pub fn evaluate_policy(
    policy: &dyn Policy,
    episodes: usize,
    seed: u64,
    p: &EnvParams,
) -> Result<PerfReport> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut rng = Rng::new(seed);
    let starts: Vec<EnvState> = (0..episodes).map(|_| sample_start(&mut rng, p)).collect();
    let expert = mean_cost(&ExpertPolicy, &starts, p)?;
    let policy_cost = mean_cost(policy, &starts, p)?;
    Ok(PerfReport {
        episodes,
        mean_cost: policy_cost,
        expert_mean_cost: expert,
        score: expert / policy_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthSearch {
    pub width: usize,
    /// False when no width reached the threshold and `width` is the full width.
    pub found: bool,
}

/// Smallest width whose score is at least `threshold`. `scores[k - 1]` is the
/// score at width `k`.
pub fn min_width_at(scores: &[f64], threshold: f64) -> WidthSearch {
    match scores.iter().position(|&s| s >= threshold) {
        Some(i) => WidthSearch {
            width: i + 1,
            found: true,
        },
        None => WidthSearch {
            width: scores.len(),
            found: false,
        },
    }
}

/// [`min_width_at`] with the 90% performance threshold.
pub fn min_width_at_90(scores: &[f64]) -> WidthSearch {
    min_width_at(scores, 0.9)
}
