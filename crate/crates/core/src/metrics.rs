//! Per-run tallies folded from trace records, cross-run summaries and CSV
//! output.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::model::{FailureReason, ReallocReason, TaskId, TaskType};
use crate::trace::{Outcome, TraceEvent, TraceRecord};

pub const CSV_HEADER: [&str; 16] = [
    "scenario",
    "policy",
    "seed",
    "task_type",
    "generated",
    "succeeded",
    "failed_deadline",
    "failed_mobility",
    "failed_incompatible",
    "failed_no_resources",
    "failed_dead_device",
    "realloc_mobility",
    "realloc_incompatible",
    "realloc_power",
    "avg_delay_ms",
    "success_rate",
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of runs")]
    NoRuns,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which mechanism a success is credited to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    Baseline,
    Priority,
    Reallocation,
    DelayPenaltyShaping,
    EdgeServerFallback,
}

impl Attribution {
    pub const ALL: [Attribution; 5] = [
        Attribution::Baseline,
        Attribution::Priority,
        Attribution::Reallocation,
        Attribution::DelayPenaltyShaping,
        Attribution::EdgeServerFallback,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Attribution::Baseline => "baseline",
            Attribution::Priority => "priority",
            Attribution::Reallocation => "reallocation",
            Attribution::DelayPenaltyShaping => "delay_penalty_shaping",
            Attribution::EdgeServerFallback => "edge_server_fallback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

/// The special handling a task received on its way to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuccessPath {
    /// Sent straight to the edge server because no device would take it.
    pub fallback: bool,
    pub reallocated: bool,
    /// Overtook queued work or paused a running task on arrival.
    pub jumped: bool,
}

pub fn attribute_success(task_type: TaskType, path: &SuccessPath) -> Attribution {
    if path.fallback {
        Attribution::EdgeServerFallback
    } else if path.reallocated {
        Attribution::Reallocation
    } else if task_type == TaskType::Hrt && path.jumped {
        Attribution::Priority
    } else {
        Attribution::Baseline
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TypeMetrics {
    pub generated: u64,
    pub succeeded: u64,
    /// Indexed by `FailureReason::index`.
    pub failed: [u64; 5],
    /// Indexed by `ReallocReason::index`.
    pub reallocated: [u64; 3],
    /// ms, summed over all counted tasks.
    pub network_time: f64,
    pub execution_time: f64,
    pub waiting_time: f64,
    /// Successes per tag, indexed by `Attribution::index`.
    pub attribution: [u64; 5],
}

impl TypeMetrics {
    pub fn failed_total(&self) -> u64 {
        self.failed.iter().sum()
    }

    pub fn failed_by(&self, reason: FailureReason) -> u64 {
        self.failed[reason.index()]
    }

    pub fn reallocated_by(&self, reason: ReallocReason) -> u64 {
        self.reallocated[reason.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub per_type: [TypeMetrics; 3],
}

impl RunMetrics {
    pub fn from_trace<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> Self {
        let mut m = Self::default();
        for r in records {
            m.record(r);
        }
        m
    }

    pub fn get(&self, t: TaskType) -> &TypeMetrics {
        &self.per_type[t.index()]
    }

    pub fn record(&mut self, rec: &TraceRecord) {
        match &rec.event {
            TraceEvent::Generated { task_type } => self.per_type[task_type.index()].generated += 1,
            TraceEvent::Excluded { task_type } => self.per_type[task_type.index()].generated -= 1,
            TraceEvent::Realloc { task_type, reason, .. } => {
                self.per_type[task_type.index()].reallocated[reason.index()] += 1
            }
            TraceEvent::Finished { task_type, outcome, network, waiting, execution } => {
                let m = &mut self.per_type[task_type.index()];
                m.network_time += network;
                m.waiting_time += waiting;
                m.execution_time += execution;
                match outcome {
                    Outcome::Succeeded(tag) => {
                        m.succeeded += 1;
                        m.attribution[tag.index()] += 1;
                    }
                    Outcome::Failed(r) => m.failed[r.index()] += 1,
                }
            }
            _ => {}
        }
    }

    /// Successes per tag summed over task types.
    pub fn attribution_totals(&self) -> [u64; 5] {
        let mut out = [0; 5];
        for m in &self.per_type {
            for (o, a) in out.iter_mut().zip(m.attribution) {
                *o += a;
            }
        }
        out
    }
}

/// Absent when nothing of that type was generated.
pub fn success_rate(m: &RunMetrics, t: TaskType) -> Option<f64> {
    let tm = m.get(t);
    (tm.generated > 0).then(|| tm.succeeded as f64 / tm.generated as f64)
}

/// Total network, execution and waiting time over generated tasks, ms.
pub fn average_delay(m: &RunMetrics, t: TaskType) -> Option<f64> {
    let tm = m.get(t);
    (tm.generated > 0).then(|| (tm.network_time + tm.execution_time + tm.waiting_time) / tm.generated as f64)
}

/// Re-tags Baseline successes of a shaped run that failed in the matching
/// unshaped run as DelayPenaltyShaping. Tasks are matched by id.
pub fn retag_shaping(shaped: &[TraceRecord], unshaped: &[TraceRecord]) -> Vec<TraceRecord> {
    let ok_unshaped: BTreeSet<TaskId> = unshaped
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Finished { outcome: Outcome::Succeeded(_), .. }))
        .filter_map(|r| r.task)
        .collect();
    shaped
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let TraceEvent::Finished { outcome: outcome @ Outcome::Succeeded(Attribution::Baseline), .. } =
                &mut r.event
            {
                if r.task.is_some_and(|id| !ok_unshaped.contains(&id)) {
                    *outcome = Outcome::Succeeded(Attribution::DelayPenaltyShaping);
                }
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_dev =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Stat { n, mean, std_dev, min, max })
    }
}

/// Cross-run statistics keyed by task type, then metric name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub per_type: BTreeMap<&'static str, BTreeMap<String, Stat>>,
}

impl Summary {
    pub fn stat(&self, t: TaskType, metric: &str) -> Option<&Stat> {
        self.per_type.get(t.as_str())?.get(metric)
    }
}

fn metric_values(m: &RunMetrics, t: TaskType) -> Vec<(String, Option<f64>)> {
    let tm = m.get(t);
    let mut v = vec![
        ("generated".to_string(), Some(tm.generated as f64)),
        ("succeeded".to_string(), Some(tm.succeeded as f64)),
    ];
    for r in FailureReason::ALL {
        v.push((format!("failed_{}", r.as_str()), Some(tm.failed_by(r) as f64)));
    }
    for r in ReallocReason::ALL {
        v.push((format!("realloc_{}", r.as_str()), Some(tm.reallocated_by(r) as f64)));
    }
    for a in Attribution::ALL {
        v.push((format!("success_{}", a.as_str()), Some(tm.attribution[a.index()] as f64)));
    }
    v.push(("avg_delay_ms".to_string(), average_delay(m, t)));
    v.push(("success_rate".to_string(), success_rate(m, t)));
    v
}

/// Mean, sample standard deviation, min and max of every metric across
/// runs. Runs where a metric is absent are left out of that metric.
pub fn aggregate(runs: &[RunMetrics]) -> Result<Summary, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let mut per_type = BTreeMap::new();
    for t in TaskType::ALL {
        let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for m in runs {
            for (name, val) in metric_values(m, t) {
                let col = cols.entry(name).or_default();
                if let Some(v) = val {
                    col.push(v);
                }
            }
        }
        let stats = cols.into_iter().filter_map(|(k, v)| Stat::of(&v).map(|s| (k, s))).collect();
        per_type.insert(t.as_str(), stats);
    }
    Ok(Summary { runs: runs.len(), per_type })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per task type; absent metrics are left empty.
pub fn csv_rows(scenario: &str, policy: &str, seed: u64, m: &RunMetrics) -> Vec<Vec<String>> {
    TaskType::ALL
        .into_iter()
        .map(|t| {
            let tm = m.get(t);
            let mut row = vec![scenario.to_string(), policy.to_string(), seed.to_string(), t.as_str().to_string()];
            row.push(tm.generated.to_string());
            row.push(tm.succeeded.to_string());
            row.extend(tm.failed.iter().map(u64::to_string));
            row.extend(tm.reallocated.iter().map(u64::to_string));
            row.push(fmt_opt(average_delay(m, t)));
            row.push(fmt_opt(success_rate(m, t)));
            row
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[Vec<String>]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
