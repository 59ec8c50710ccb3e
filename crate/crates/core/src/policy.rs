//! The robust layer on top of the baseline orchestrator: edge-server
//! fallback, HRT-first queueing with NRT preemption, SRT reallocation after
//! non-latency failures, and low-battery evacuation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::exec::{self, QueueDiscipline};
use crate::model::{self, DeviceSpec, DeviceState, FailureReason, Host, ReallocReason, TaskId, TaskType};
use crate::orchestrator::{probe_candidate, select_device, Candidate, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "adworch")]
    AdWOrch,
    #[serde(rename = "r-adworch")]
    RAdWOrch,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::AdWOrch => "adworch",
            PolicyKind::RAdWOrch => "r-adworch",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adworch" | "baseline" => Ok(PolicyKind::AdWOrch),
            "r-adworch" | "robust" => Ok(PolicyKind::RAdWOrch),
            other => Err(format!("unknown policy `{other}` (expected adworch or r-adworch)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// HRT-first queueing and NRT preemption.
    Priority,
    /// SRT retry on the edge server after a non-latency failure.
    Reallocation,
    /// Blacklist and evacuate devices below the battery threshold.
    LowBattery,
    /// Per-type penalty weights in the reward.
    DelayShaping,
    /// Send HRT/SRT to the edge server when no device is reliable.
    EdgeFallback,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Priority,
        Mechanism::Reallocation,
        Mechanism::LowBattery,
        Mechanism::DelayShaping,
        Mechanism::EdgeFallback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Priority => "priority",
            Mechanism::Reallocation => "reallocation",
            Mechanism::LowBattery => "low_battery",
            Mechanism::DelayShaping => "delay_shaping",
            Mechanism::EdgeFallback => "edge_fallback",
        }
    }
}

impl FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mechanism::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown mechanism `{s}`"))
    }
}

/// Which robust mechanisms are switched on for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mechanisms {
    pub priority: bool,
    pub reallocation: bool,
    pub low_battery: bool,
    pub delay_shaping: bool,
    pub edge_fallback: bool,
}

impl Mechanisms {
    pub const NONE: Mechanisms = Mechanisms {
        priority: false,
        reallocation: false,
        low_battery: false,
        delay_shaping: false,
        edge_fallback: false,
    };
    pub const ALL: Mechanisms =
        Mechanisms { priority: true, reallocation: true, low_battery: true, delay_shaping: true, edge_fallback: true };

    pub fn for_policy(kind: PolicyKind) -> Self {
        match kind {
            PolicyKind::AdWOrch => Self::NONE,
            PolicyKind::RAdWOrch => Self::ALL,
        }
    }

    pub fn enabled(&self, m: Mechanism) -> bool {
        match m {
            Mechanism::Priority => self.priority,
            Mechanism::Reallocation => self.reallocation,
            Mechanism::LowBattery => self.low_battery,
            Mechanism::DelayShaping => self.delay_shaping,
            Mechanism::EdgeFallback => self.edge_fallback,
        }
    }

    pub fn set(&mut self, m: Mechanism, on: bool) {
        match m {
            Mechanism::Priority => self.priority = on,
            Mechanism::Reallocation => self.reallocation = on,
            Mechanism::LowBattery => self.low_battery = on,
            Mechanism::DelayShaping => self.delay_shaping = on,
            Mechanism::EdgeFallback => self.edge_fallback = on,
        }
    }

    pub fn without(mut self, ablated: &[Mechanism]) -> Self {
        for m in ablated {
            self.set(*m, false);
        }
        self
    }

    pub fn discipline(&self) -> QueueDiscipline {
        if self.priority {
            QueueDiscipline::HrtFirst
        } else {
            QueueDiscipline::Fifo
        }
    }

    pub fn weights(&self) -> RewardWeights {
        if self.delay_shaping {
            RewardWeights::SHAPED
        } else {
            RewardWeights::UNSHAPED
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingDecision {
    OffloadTo(model::DeviceId),
    SendToEdgeServer,
    FailNow(FailureReason),
}

/// Runs the orchestrator's device selection and falls back per task type
/// when nothing reliable is nearby. With `probe` set, a task with no
/// reliable candidate is sent to a random one with probability `epsilon`
/// before falling back. Returns the chosen candidate alongside the decision
/// so the caller can credit the right state later.
pub fn route_task<R: Rng + ?Sized>(
    task_type: TaskType,
    candidates: &[Candidate],
    epsilon: f64,
    probe: bool,
    server_reachable: bool,
    mech: &Mechanisms,
    rng: &mut R,
) -> (RoutingDecision, Option<Candidate>) {
    let picked = select_device(candidates, epsilon, rng).or_else(|| {
        if probe {
            probe_candidate(candidates, epsilon, rng)
        } else {
            None
        }
    });
    if let Some(c) = picked {
        return (RoutingDecision::OffloadTo(c.device), Some(*c));
    }
    (fallback(task_type, server_reachable, mech), None)
}

/// What happens to a task when no device will take it.
pub fn fallback(task_type: TaskType, server_reachable: bool, mech: &Mechanisms) -> RoutingDecision {
    if mech.edge_fallback && task_type != TaskType::Nrt && server_reachable {
        RoutingDecision::SendToEdgeServer
    } else {
        RoutingDecision::FailNow(FailureReason::NoAvailableResources)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReallocationRecord {
    pub task: TaskId,
    pub task_type: TaskType,
    pub from: Host,
    /// `None` when rerouting found no taker and the task failed.
    pub to: Option<Host>,
    pub reason: ReallocReason,
    pub at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureOutcome {
    Reallocate { to: Host, reason: ReallocReason },
    FinalFailure(FailureReason),
}

/// SRT tasks that fail for reasons other than latency get one more try on
/// the edge server; everything else is final.
pub fn on_task_failed(
    task_type: TaskType,
    reason: FailureReason,
    realloc_count: u32,
    server_reachable: bool,
    mech: &Mechanisms,
    cap: u32,
) -> FailureOutcome {
    match ReallocReason::from_failure(reason) {
        Some(r) if mech.reallocation && task_type == TaskType::Srt && server_reachable && realloc_count < cap => {
            FailureOutcome::Reallocate { to: Host::EdgeServer, reason: r }
        }
        _ => FailureOutcome::FinalFailure(reason),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowBatteryAction {
    /// Queued or paused non-HRT tasks pulled off the device, in queue order.
    pub reallocate: Vec<(TaskId, TaskType)>,
    pub blacklisted: bool,
}

/// Called once when a device's battery drops below the threshold. Running
/// tasks and every HRT task stay; the rest leave and the device is closed
/// to new offloads.
pub fn on_low_battery(device: &mut DeviceState, mech: &Mechanisms) -> LowBatteryAction {
    if !mech.low_battery {
        return LowBatteryAction { reallocate: Vec::new(), blacklisted: false };
    }
    device.blacklisted = true;
    let reallocate = exec::drain_queue(device, |ty| ty != TaskType::Hrt);
    LowBatteryAction { reallocate, blacklisted: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Queue,
    Reallocate(ReallocReason),
}

/// Offload requests that reach a device already below the threshold:
/// HRT is still queued, everything else moves on.
pub fn admit_offload(device: &DeviceState, task_type: TaskType, mech: &Mechanisms) -> Admission {
    if mech.low_battery && device.blacklisted && task_type != TaskType::Hrt {
        Admission::Reallocate(ReallocReason::InsufficientPower)
    } else {
        Admission::Queue
    }
}

/// Service time in ms on the edge server.
pub fn edge_server_service(task_size: f64, server: &DeviceSpec) -> f64 {
    model::expected_execution_time(task_size, server.cpu_rate).expect("edge server computes") * 1000.0
}
