//! Tabular action values keyed by fuzzy state.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::TaskType;

use super::fuzzy::{BatteryLevel, FuzzyObservation, Level};
use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Assign,
    Reject,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Assign => "assign",
            Action::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QEntry {
    pub q: f64,
    pub visits: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: BTreeMap<(FuzzyObservation, Action), QEntry>,
}

pub const HEADER: &str = "load\texec_ratio\tbattery\ttask_type\ttask_mobile\tresource_mobile\taction\tq\tvisits";

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Unseen pairs read as `(0.0, 0)`.
    pub fn get(&self, state: &FuzzyObservation, action: Action) -> QEntry {
        self.entries.get(&(*state, action)).copied().unwrap_or_default()
    }

    /// `q <- q + alpha * (r - q)`; returns the new value.
    pub fn update(&mut self, state: &FuzzyObservation, action: Action, reward: f64, alpha: f64) -> f64 {
        let e = self.entries.entry((*state, action)).or_default();
        e.q += alpha * (reward - e.q);
        e.visits += 1;
        e.q
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(FuzzyObservation, Action), &QEntry)> {
        self.entries.iter()
    }

    /// Tab-separated table, one row per (state, action), sorted by key.
    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for ((s, a), e) in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.load.as_str(),
                s.exec_ratio.as_str(),
                s.battery.as_str(),
                s.task_type,
                s.task_mobile,
                s.resource_mobile,
                a.as_str(),
                e.q,
                e.visits
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OrchestratorError> {
        let mut table = QTable::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if n == 0 {
                if line.trim() != HEADER {
                    return Err(OrchestratorError::Parse { line: line_no, msg: "unexpected header".into() });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| OrchestratorError::Parse { line: line_no, msg: msg.to_string() };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 9 {
                return Err(err("expected 9 tab-separated fields"));
            }
            let flag = |s: &str| s.parse::<bool>().map_err(|_| err("bad boolean"));
            let state = FuzzyObservation {
                load: Level::parse(f[0]).ok_or_else(|| err("bad load level"))?,
                exec_ratio: Level::parse(f[1]).ok_or_else(|| err("bad exec_ratio level"))?,
                battery: BatteryLevel::parse(f[2]).ok_or_else(|| err("bad battery level"))?,
                task_type: TaskType::parse(f[3]).ok_or_else(|| err("bad task type"))?,
                task_mobile: flag(f[4])?,
                resource_mobile: flag(f[5])?,
            };
            let action = match f[6] {
                "assign" => Action::Assign,
                "reject" => Action::Reject,
                _ => return Err(err("bad action")),
            };
            let q: f64 = f[7].parse().map_err(|_| err("bad q value"))?;
            let visits: u64 = f[8].parse().map_err(|_| err("bad visit count"))?;
            table.entries.insert((state, action), QEntry { q, visits });
        }
        Ok(table)
    }
}
