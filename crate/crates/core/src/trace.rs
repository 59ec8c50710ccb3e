//! Event trace: one tab-separated line per record, enough to replay the
//! per-host queue state and rebuild the run's metrics.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::metrics::Attribution;
use crate::model::{FailureReason, Host, ReallocReason, TaskId, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteKind {
    Device,
    Server,
    Fail,
}

impl RouteKind {
    fn as_str(self) -> &'static str {
        match self {
            RouteKind::Device => "device",
            RouteKind::Server => "server",
            RouteKind::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Succeeded(Attribution),
    Failed(FailureReason),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Generated {
        task_type: TaskType,
    },
    /// Routing decision; `host` is the target (absent for `Fail`).
    Routed {
        task_type: TaskType,
        decision: RouteKind,
        reliable: usize,
        server_reachable: bool,
    },
    Enqueued {
        task_type: TaskType,
        overtaken: usize,
    },
    Started {
        task_type: TaskType,
        core: usize,
        resumed: bool,
    },
    Paused {
        task_type: TaskType,
        core: usize,
        remaining: f64,
    },
    ExecDone {
        task_type: TaskType,
        core: usize,
    },
    /// Left a host's queue or core without finishing there.
    Removed {
        task_type: TaskType,
    },
    /// `host` is where the task was taken from.
    Realloc {
        task_type: TaskType,
        reason: ReallocReason,
        to: Option<Host>,
    },
    Blacklisted,
    Dead,
    Departed,
    Arrived,
    Finished {
        task_type: TaskType,
        outcome: Outcome,
        network: f64,
        waiting: f64,
        execution: f64,
    },
    /// In flight at the horizon and not yet late: dropped from the tallies.
    Excluded {
        task_type: TaskType,
    },
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Generated { .. } => "generated",
            TraceEvent::Routed { .. } => "routed",
            TraceEvent::Enqueued { .. } => "enqueued",
            TraceEvent::Started { .. } => "started",
            TraceEvent::Paused { .. } => "paused",
            TraceEvent::ExecDone { .. } => "exec_done",
            TraceEvent::Removed { .. } => "removed",
            TraceEvent::Realloc { .. } => "realloc",
            TraceEvent::Blacklisted => "blacklisted",
            TraceEvent::Dead => "dead",
            TraceEvent::Departed => "departed",
            TraceEvent::Arrived => "arrived",
            TraceEvent::Finished { .. } => "finished",
            TraceEvent::Excluded { .. } => "excluded",
        }
    }

    pub fn task_type(&self) -> Option<TaskType> {
        match self {
            TraceEvent::Generated { task_type }
            | TraceEvent::Routed { task_type, .. }
            | TraceEvent::Enqueued { task_type, .. }
            | TraceEvent::Started { task_type, .. }
            | TraceEvent::Paused { task_type, .. }
            | TraceEvent::ExecDone { task_type, .. }
            | TraceEvent::Removed { task_type }
            | TraceEvent::Realloc { task_type, .. }
            | TraceEvent::Finished { task_type, .. }
            | TraceEvent::Excluded { task_type } => Some(*task_type),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Sequence number of the event whose handler emitted this record.
    pub seq: u64,
    /// ms
    pub at: f64,
    pub task: Option<TaskId>,
    pub host: Option<Host>,
    pub event: TraceEvent,
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}\t{}\t", self.seq, self.at, opt(&self.task), opt(&self.host), self.event.name())?;
        match &self.event {
            TraceEvent::Generated { task_type }
            | TraceEvent::Removed { task_type }
            | TraceEvent::Excluded { task_type } => {
                write!(f, "{task_type}")
            }
            TraceEvent::Routed { task_type, decision, reliable, server_reachable } => {
                write!(f, "{task_type} {} {reliable} {server_reachable}", decision.as_str())
            }
            TraceEvent::Enqueued { task_type, overtaken } => write!(f, "{task_type} {overtaken}"),
            TraceEvent::Started { task_type, core, resumed } => write!(f, "{task_type} {core} {resumed}"),
            TraceEvent::Paused { task_type, core, remaining } => write!(f, "{task_type} {core} {remaining}"),
            TraceEvent::ExecDone { task_type, core } => write!(f, "{task_type} {core}"),
            TraceEvent::Realloc { task_type, reason, to } => write!(f, "{task_type} {} {}", reason.as_str(), opt(to)),
            TraceEvent::Blacklisted | TraceEvent::Dead | TraceEvent::Departed | TraceEvent::Arrived => Ok(()),
            TraceEvent::Finished { task_type, outcome, network, waiting, execution } => {
                let o = match outcome {
                    Outcome::Succeeded(a) => format!("ok {}", a.as_str()),
                    Outcome::Failed(r) => format!("fail {}", r.as_str()),
                };
                write!(f, "{task_type} {o} {network} {waiting} {execution}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad trace line: {0}")]
pub struct TraceParseError(pub String);

fn parse_host(s: &str) -> Result<Option<Host>, TraceParseError> {
    match s {
        "-" => Ok(None),
        "server" => Ok(Some(Host::EdgeServer)),
        n => n.parse().map(|d| Some(Host::Device(d))).map_err(|_| TraceParseError(format!("host `{n}`"))),
    }
}

impl FromStr for TraceRecord {
    type Err = TraceParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = || TraceParseError(line.to_string());
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let seq = cols[0].parse().map_err(|_| bad())?;
        let at = cols[1].parse().map_err(|_| bad())?;
        let task = match cols[2] {
            "-" => None,
            t => Some(t.parse().map_err(|_| bad())?),
        };
        let host = parse_host(cols[3])?;
        let d: Vec<&str> = cols[5].split(' ').filter(|s| !s.is_empty()).collect();
        let ty = |i: usize| d.get(i).and_then(|s| TaskType::parse(s)).ok_or_else(bad);
        let num = |i: usize| d.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        let int = |i: usize| d.get(i).and_then(|s| s.parse::<usize>().ok()).ok_or_else(bad);
        let flag = |i: usize| d.get(i).and_then(|s| s.parse::<bool>().ok()).ok_or_else(bad);
        let event = match cols[4] {
            "generated" => TraceEvent::Generated { task_type: ty(0)? },
            "routed" => TraceEvent::Routed {
                task_type: ty(0)?,
                decision: match d.get(1) {
                    Some(&"device") => RouteKind::Device,
                    Some(&"server") => RouteKind::Server,
                    Some(&"fail") => RouteKind::Fail,
                    _ => return Err(bad()),
                },
                reliable: int(2)?,
                server_reachable: flag(3)?,
            },
            "enqueued" => TraceEvent::Enqueued { task_type: ty(0)?, overtaken: int(1)? },
            "started" => TraceEvent::Started { task_type: ty(0)?, core: int(1)?, resumed: flag(2)? },
            "paused" => TraceEvent::Paused { task_type: ty(0)?, core: int(1)?, remaining: num(2)? },
            "exec_done" => TraceEvent::ExecDone { task_type: ty(0)?, core: int(1)? },
            "removed" => TraceEvent::Removed { task_type: ty(0)? },
            "realloc" => TraceEvent::Realloc {
                task_type: ty(0)?,
                reason: d.get(1).and_then(|s| ReallocReason::parse(s)).ok_or_else(bad)?,
                to: parse_host(d.get(2).ok_or_else(bad)?)?,
            },
            "blacklisted" => TraceEvent::Blacklisted,
            "dead" => TraceEvent::Dead,
            "departed" => TraceEvent::Departed,
            "arrived" => TraceEvent::Arrived,
            "finished" => {
                let outcome = match (d.get(1), d.get(2)) {
                    (Some(&"ok"), Some(a)) => Outcome::Succeeded(Attribution::parse(a).ok_or_else(bad)?),
                    (Some(&"fail"), Some(r)) => Outcome::Failed(FailureReason::parse(r).ok_or_else(bad)?),
                    _ => return Err(bad()),
                };
                TraceEvent::Finished {
                    task_type: ty(0)?,
                    outcome,
                    network: num(3)?,
                    waiting: num(4)?,
                    execution: num(5)?,
                }
            }
            "excluded" => TraceEvent::Excluded { task_type: ty(0)? },
            _ => return Err(bad()),
        };
        Ok(TraceRecord { seq, at, task, host, event })
    }
}

pub const HEADER: &str = "seq\tat_ms\ttask\thost\tkind\tdetail";

/// Where a run's records go.
pub enum TraceSink {
    Off,
    Collect(Vec<TraceRecord>),
    /// Text lines, header first.
    Stream(Box<dyn Write + Send>),
    /// Handed to a callback as they are emitted.
    Visit(Box<dyn FnMut(&TraceRecord) + Send>),
}

impl TraceSink {
    pub fn collect() -> Self {
        TraceSink::Collect(Vec::new())
    }

    pub fn stream(mut out: Box<dyn Write + Send>) -> io::Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(TraceSink::Stream(out))
    }

    pub fn push(&mut self, rec: TraceRecord) -> io::Result<()> {
        match self {
            TraceSink::Off => Ok(()),
            TraceSink::Collect(v) => {
                v.push(rec);
                Ok(())
            }
            TraceSink::Stream(w) => writeln!(w, "{rec}"),
            TraceSink::Visit(f) => {
                f(&rec);
                Ok(())
            }
        }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        match self {
            TraceSink::Stream(w) => w.flush(),
            _ => Ok(()),
        }
    }

    pub fn into_records(self) -> Option<Vec<TraceRecord>> {
        match self {
            TraceSink::Collect(v) => Some(v),
            _ => None,
        }
    }
}

pub fn to_text(records: &[TraceRecord]) -> String {
    let mut s = format!("{HEADER}\n");
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_text(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(str::parse).collect()
}
