//! Baseline adaptive orchestrator: observe, fuzzify, score each nearby
//! device from the Q-table and pick a reliable one; learn from results.

pub mod fuzzy;
pub mod observation;
pub mod qtable;
pub mod reward;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DeviceId, DeviceState, Task, TaskType};

pub use fuzzy::{fuzzify, BatteryLevel, FuzzyConfig, FuzzyObservation, Level};
pub use observation::{build_observation, BatteryFeature, Observation};
pub use qtable::{Action, QEntry, QTable};
pub use reward::{reward, RewardWeights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error("device {0} cannot host offloaded tasks")]
    NotACandidate(DeviceId),
    #[error("q-table line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningParams {
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Reliability cutoff, measured from the reward of an on-time success
    /// that lands exactly on the deadline.
    pub theta: f64,
    /// States seen fewer times than this are treated as reliable.
    pub warmup_visits: u64,
    /// When nothing is reliable, still try a random candidate with
    /// probability epsilon so that a state judged unreliable can recover.
    pub probe_unreliable: bool,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self { alpha: 0.1, epsilon_start: 0.3, epsilon_end: 0.02, theta: 0.0, warmup_visits: 3, probe_unreliable: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reliability {
    pub reliable: bool,
    pub score: f64,
}

/// A device is reliable for a task when its learned Assign value is at
/// least `theta + (1 - w)`, the value of a just-in-time success under
/// penalty weight `w`. With `w = 1` this is a plain `q >= theta` test.
pub fn classify_reliability(
    table: &QTable,
    state: &FuzzyObservation,
    weight: f64,
    params: &LearningParams,
) -> Reliability {
    let e = table.get(state, Action::Assign);
    let cutoff = params.theta + (1.0 - weight);
    Reliability { reliable: e.visits < params.warmup_visits || e.q >= cutoff, score: e.q }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub device: DeviceId,
    pub state: FuzzyObservation,
    /// ms
    pub expected_exec: f64,
    pub score: f64,
    pub reliable: bool,
}

/// Epsilon-greedy over reliable candidates. Greedy picks the highest score,
/// then the shortest expected execution, then the lowest device id.
pub fn select_device<'a, R: Rng + ?Sized>(
    candidates: &'a [Candidate],
    epsilon: f64,
    rng: &mut R,
) -> Option<&'a Candidate> {
    let reliable: Vec<&Candidate> = candidates.iter().filter(|c| c.reliable).collect();
    if reliable.is_empty() {
        return None;
    }
    if rng.random::<f64>() < epsilon {
        return Some(reliable[rng.random_range(0..reliable.len())]);
    }
    reliable.into_iter().reduce(|best, c| {
        let better = c.score > best.score
            || (c.score == best.score
                && (c.expected_exec < best.expected_exec
                    || (c.expected_exec == best.expected_exec && c.device < best.device)));
        if better {
            c
        } else {
            best
        }
    })
}

/// With probability `epsilon`, any candidate at all, reliable or not.
pub fn probe_candidate<'a, R: Rng + ?Sized>(
    candidates: &'a [Candidate],
    epsilon: f64,
    rng: &mut R,
) -> Option<&'a Candidate> {
    if candidates.is_empty() || rng.random::<f64>() >= epsilon {
        return None;
    }
    Some(&candidates[rng.random_range(0..candidates.len())])
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    pub table: QTable,
    pub params: LearningParams,
    pub fuzzy: FuzzyConfig,
    pub weights: RewardWeights,
    /// ms over which epsilon is annealed.
    pub horizon: f64,
}

impl Orchestrator {
    pub fn new(params: LearningParams, fuzzy: FuzzyConfig, weights: RewardWeights, horizon: f64) -> Self {
        Self { table: QTable::new(), params, fuzzy, weights, horizon }
    }

    /// Linear anneal from `epsilon_start` to `epsilon_end` over the horizon.
    pub fn epsilon_at(&self, now: f64) -> f64 {
        let p = if self.horizon > 0.0 { (now / self.horizon).clamp(0.0, 1.0) } else { 1.0 };
        self.params.epsilon_start + (self.params.epsilon_end - self.params.epsilon_start) * p
    }

    /// Scores every device that can take the task. Devices that are not
    /// valid candidates are skipped.
    pub fn assess<'a>(&self, task: &Task, devices: impl IntoIterator<Item = &'a DeviceState>) -> Vec<Candidate> {
        let weight = self.weights.weight(task.task_type);
        devices
            .into_iter()
            .filter_map(|d| {
                let obs = build_observation(task, d).ok()?;
                let state = fuzzify(&obs, &self.fuzzy);
                let rel = classify_reliability(&self.table, &state, weight, &self.params);
                Some(Candidate {
                    device: d.id,
                    state,
                    expected_exec: obs.resource.expected_exec,
                    score: rel.score,
                    reliable: rel.reliable,
                })
            })
            .collect()
    }

    /// Feeds one task result back into the table. Returns the reward used.
    pub fn learn(
        &mut self,
        state: &FuzzyObservation,
        success: bool,
        task_type: TaskType,
        delay: f64,
        latency_budget: f64,
    ) -> f64 {
        let r = reward(success, task_type, delay, latency_budget, &self.weights);
        self.table.update(state, Action::Assign, r, self.params.alpha);
        r
    }
}
