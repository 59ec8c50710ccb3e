use serde::{Deserialize, Serialize};

use crate::model::TaskType;

/// Penalty weight per task type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub hrt: f64,
    pub srt: f64,
    pub nrt: f64,
}

impl RewardWeights {
    /// Heavier penalties for late or failed real-time work.
    pub const SHAPED: RewardWeights = RewardWeights { hrt: 3.0, srt: 1.5, nrt: 1.0 };
    pub const UNSHAPED: RewardWeights = RewardWeights { hrt: 1.0, srt: 1.0, nrt: 1.0 };

    pub fn weight(&self, task_type: TaskType) -> f64 {
        match task_type {
            TaskType::Hrt => self.hrt,
            TaskType::Srt => self.srt,
            TaskType::Nrt => self.nrt,
        }
    }

    pub fn max(&self) -> f64 {
        self.hrt.max(self.srt).max(self.nrt)
    }
}

/// Delay relative to the latency budget.
pub fn delay_penalty(delay: f64, latency_budget: f64) -> f64 {
    delay / latency_budget
}

/// `R_s - w * D_p` with `R_s` 1 for success and 0 for failure.
pub fn reward(success: bool, task_type: TaskType, delay: f64, latency_budget: f64, weights: &RewardWeights) -> f64 {
    let rs = if success { 1.0 } else { 0.0 };
    rs - weights.weight(task_type) * delay_penalty(delay, latency_budget)
}
