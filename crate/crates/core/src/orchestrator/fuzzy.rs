//! Triangular membership functions mapping crisp features to three levels.

use serde::{Deserialize, Serialize};

use crate::model::TaskType;

use super::observation::{BatteryFeature, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Level::Low, Level::Medium, Level::High].into_iter().find(|l| l.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BatteryLevel {
    Low,
    Medium,
    High,
    Mains,
}

impl BatteryLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            BatteryLevel::Low => "low",
            BatteryLevel::Medium => "medium",
            BatteryLevel::High => "high",
            BatteryLevel::Mains => "mains",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [BatteryLevel::Low, BatteryLevel::Medium, BatteryLevel::High, BatteryLevel::Mains]
            .into_iter()
            .find(|l| l.as_str() == s)
    }
}

impl From<Level> for BatteryLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Low => BatteryLevel::Low,
            Level::Medium => BatteryLevel::Medium,
            Level::High => BatteryLevel::High,
        }
    }
}

/// The discretised state the Q-table is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuzzyObservation {
    pub load: Level,
    pub exec_ratio: Level,
    pub battery: BatteryLevel,
    pub task_type: TaskType,
    pub task_mobile: bool,
    pub resource_mobile: bool,
}

/// Three overlapping triangles peaking at `peaks[0..3]`; the outer two are
/// shoulders that stay at 1 beyond their peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularSet {
    pub peaks: [f64; 3],
}

impl TriangularSet {
    pub fn memberships(&self, x: f64) -> [f64; 3] {
        let [a, b, c] = self.peaks;
        let low = if x <= a {
            1.0
        } else if x < b {
            (b - x) / (b - a)
        } else {
            0.0
        };
        let medium = if x <= a || x >= c {
            0.0
        } else if x <= b {
            (x - a) / (b - a)
        } else {
            (c - x) / (c - b)
        };
        let high = if x <= b {
            0.0
        } else if x < c {
            (x - b) / (c - b)
        } else {
            1.0
        };
        [low, medium, high]
    }

    /// Highest membership wins; ties go to the lower level.
    pub fn level(&self, x: f64) -> Level {
        let m = self.memberships(x);
        let mut best = 0;
        for i in 1..3 {
            if m[i] > m[best] {
                best = i;
            }
        }
        [Level::Low, Level::Medium, Level::High][best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyConfig {
    pub load: TriangularSet,
    pub exec_ratio: TriangularSet,
    pub battery: TriangularSet,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            load: TriangularSet { peaks: [0.0, 1.0, 2.0] },
            exec_ratio: TriangularSet { peaks: [0.0, 0.5, 1.0] },
            battery: TriangularSet { peaks: [0.2, 0.5, 1.0] },
        }
    }
}

pub fn fuzzify(obs: &Observation, cfg: &FuzzyConfig) -> FuzzyObservation {
    let battery = match obs.resource.battery {
        BatteryFeature::Mains => BatteryLevel::Mains,
        BatteryFeature::Fraction(f) => cfg.battery.level(f).into(),
    };
    FuzzyObservation {
        load: cfg.load.level(obs.resource.load),
        exec_ratio: cfg.exec_ratio.level(obs.exec_ratio()),
        battery,
        task_type: obs.task.task_type,
        task_mobile: obs.task.generator_mobile,
        resource_mobile: obs.resource.mobile,
    }
}
