//! Entities shared by every part of the simulator: tasks, devices, units and
//! the two closed-form state features (current load, expected execution time).

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Table-style compute rates are quoted in GIPS; sizes are in MI.
/// 1 GIPS executes 1000 MI per second.
pub const MI_PER_SEC_PER_GIPS: f64 = 1000.0;

pub type TaskId = u64;
pub type DeviceId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("device has no cpu cores and cannot host tasks")]
    InvalidDevice,
    #[error("device has no compute rate")]
    NonComputingDevice,
    #[error("task size must be positive, got {0}")]
    InvalidTaskSize(f64),
    #[error("illegal task status transition {from} -> {to}")]
    IllegalTransition { from: TaskStatus, to: TaskStatus },
}

/// Ratio of tasks waiting on a device to its core count.
pub fn current_load(queue_length: usize, cpu_cores: u32) -> Result<f64, ModelError> {
    if cpu_cores == 0 {
        return Err(ModelError::InvalidDevice);
    }
    Ok(queue_length as f64 / cpu_cores as f64)
}

/// Seconds needed to execute `task_size` MI on a host running at `device_rate` MI/s.
pub fn expected_execution_time(task_size: f64, device_rate: f64) -> Result<f64, ModelError> {
    if device_rate <= 0.0 {
        return Err(ModelError::NonComputingDevice);
    }
    if task_size <= 0.0 {
        return Err(ModelError::InvalidTaskSize(task_size));
    }
    Ok(task_size / device_rate)
}

/// Inclusive: finishing exactly at the budget counts as met.
pub fn is_deadline_met(completed_at: f64, generated_at: f64, latency_budget: f64) -> bool {
    completed_at - generated_at <= latency_budget
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TaskType {
    Hrt,
    Srt,
    Nrt,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [TaskType::Hrt, TaskType::Srt, TaskType::Nrt];

    /// Higher is more urgent.
    pub fn priority(self) -> u8 {
        match self {
            TaskType::Hrt => 2,
            TaskType::Srt => 1,
            TaskType::Nrt => 0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            TaskType::Hrt => 0,
            TaskType::Srt => 1,
            TaskType::Nrt => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Hrt => "HRT",
            TaskType::Srt => "SRT",
            TaskType::Nrt => "NRT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "HRT" => Some(TaskType::Hrt),
            "SRT" => Some(TaskType::Srt),
            "NRT" => Some(TaskType::Nrt),
            _ => None,
        }
    }
}

impl PartialOrd for TaskType {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TaskType {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority().cmp(&other.priority())
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureReason {
    DeadlineMissed,
    Mobility,
    IncompatibleHardwareSoftware,
    NoAvailableResources,
    DeadDevice,
}

impl FailureReason {
    pub const ALL: [FailureReason; 5] = [
        FailureReason::DeadlineMissed,
        FailureReason::Mobility,
        FailureReason::IncompatibleHardwareSoftware,
        FailureReason::NoAvailableResources,
        FailureReason::DeadDevice,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::DeadlineMissed => "deadline",
            FailureReason::Mobility => "mobility",
            FailureReason::IncompatibleHardwareSoftware => "incompatible",
            FailureReason::NoAvailableResources => "no_resources",
            FailureReason::DeadDevice => "dead_device",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a task was moved off its assigned host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReallocReason {
    Mobility,
    IncompatibleHardwareSoftware,
    InsufficientPower,
}

impl ReallocReason {
    pub const ALL: [ReallocReason; 3] =
        [ReallocReason::Mobility, ReallocReason::IncompatibleHardwareSoftware, ReallocReason::InsufficientPower];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReallocReason::Mobility => "mobility",
            ReallocReason::IncompatibleHardwareSoftware => "incompatible",
            ReallocReason::InsufficientPower => "power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// Failure reasons that qualify a soft real-time task for a second attempt.
    /// A dead host is an energy problem, so it is booked as insufficient power.
    pub fn from_failure(reason: FailureReason) -> Option<Self> {
        match reason {
            FailureReason::Mobility => Some(ReallocReason::Mobility),
            FailureReason::DeadDevice => Some(ReallocReason::InsufficientPower),
            FailureReason::IncompatibleHardwareSoftware => Some(ReallocReason::IncompatibleHardwareSoftware),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskStatus {
    Pending,
    Queued,
    Executing,
    Paused,
    Succeeded,
    Failed(FailureReason),
    Reallocated(ReallocReason),
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Succeeded | TaskStatus::Failed(_))
    }

    pub fn can_transition_to(self, to: TaskStatus) -> bool {
        use TaskStatus::*;
        match (self, to) {
            (Succeeded, _) | (Failed(_), _) => false,
            (Pending, Queued | Failed(_) | Reallocated(_)) => true,
            (Queued, Executing | Failed(_) | Reallocated(_)) => true,
            // A failed attempt that is recovered elsewhere leaves via Reallocated.
            (Executing, Succeeded | Failed(_) | Paused | Reallocated(_)) => true,
            (Paused, Queued) => true,
            (Reallocated(_), Pending) => true,
            _ => false,
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskStatus::Pending => f.write_str("pending"),
            TaskStatus::Queued => f.write_str("queued"),
            TaskStatus::Executing => f.write_str("executing"),
            TaskStatus::Paused => f.write_str("paused"),
            TaskStatus::Succeeded => f.write_str("succeeded"),
            TaskStatus::Failed(r) => write!(f, "failed({r})"),
            TaskStatus::Reallocated(r) => write!(f, "reallocated({})", r.as_str()),
        }
    }
}

/// Where a task's time is currently being spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Network,
    Waiting,
    Executing,
}

/// Anything that can host a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Host {
    Device(DeviceId),
    EdgeServer,
}

impl fmt::Display for Host {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Host::Device(d) => write!(f, "{d}"),
            Host::EdgeServer => f.write_str("server"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: TaskId,
    pub task_type: TaskType,
    /// MI
    pub size: f64,
    /// ms
    pub latency_budget: f64,
    pub generated_at: f64,
    pub generator: DeviceId,
    pub generator_mobile: bool,
    /// Capability tag the executing host must provide.
    pub required_scope: u8,
    pub request_mb: f64,
    pub result_mb: f64,
    pub assigned_to: Option<Host>,
    status: TaskStatus,
    pub network_time: f64,
    pub waiting_time: f64,
    pub execution_time: f64,
    phase: Phase,
    phase_since: f64,
    /// Service still owed on the current host, ms. Reset when the task moves.
    pub remaining_service: Option<f64>,
    pub realloc_count: u32,
}

impl Task {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: TaskId,
        task_type: TaskType,
        size: f64,
        latency_budget: f64,
        generated_at: f64,
        generator: DeviceId,
        generator_mobile: bool,
        required_scope: u8,
    ) -> Self {
        Self {
            id,
            task_type,
            size,
            latency_budget,
            generated_at,
            generator,
            generator_mobile,
            required_scope,
            request_mb: 0.0,
            result_mb: 0.0,
            assigned_to: None,
            status: TaskStatus::Pending,
            network_time: 0.0,
            waiting_time: 0.0,
            execution_time: 0.0,
            phase: Phase::Idle,
            phase_since: generated_at,
            remaining_service: None,
            realloc_count: 0,
        }
    }

    pub fn status(&self) -> TaskStatus {
        self.status
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_status(&mut self, to: TaskStatus) -> Result<(), ModelError> {
        if !self.status.can_transition_to(to) {
            return Err(ModelError::IllegalTransition { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    /// Closes the running phase at `now`, charging its duration to the
    /// matching delay bucket, and starts `next`.
    pub fn enter_phase(&mut self, now: f64, next: Phase) {
        let elapsed = now - self.phase_since;
        match self.phase {
            Phase::Idle => {}
            Phase::Network => self.network_time += elapsed,
            Phase::Waiting => self.waiting_time += elapsed,
            Phase::Executing => self.execution_time += elapsed,
        }
        self.phase = next;
        self.phase_since = now;
    }

    pub fn total_delay(&self) -> f64 {
        self.network_time + self.waiting_time + self.execution_time
    }

    pub fn is_deadline_met(&self, now: f64) -> bool {
        is_deadline_met(now, self.generated_at, self.latency_budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Laptop,
    Smartphone,
    Gateway,
    StationarySensor,
    MobileSensor,
    EdgeServer,
}

impl DeviceKind {
    /// Population kinds in table order (the edge server is not part of the mix).
    pub const POPULATION: [DeviceKind; 5] = [
        DeviceKind::Laptop,
        DeviceKind::Smartphone,
        DeviceKind::Gateway,
        DeviceKind::StationarySensor,
        DeviceKind::MobileSensor,
    ];

    pub fn is_computing(self) -> bool {
        matches!(self, DeviceKind::Laptop | DeviceKind::Smartphone | DeviceKind::Gateway | DeviceKind::EdgeServer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Laptop => "laptop",
            DeviceKind::Smartphone => "smartphone",
            DeviceKind::Gateway => "gateway",
            DeviceKind::StationarySensor => "stationary_sensor",
            DeviceKind::MobileSensor => "mobile_sensor",
            DeviceKind::EdgeServer => "edge_server",
        }
    }
}

/// Bit set of hardware/software capability tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ScopeSet(pub u32);

impl ScopeSet {
    pub fn all(universe: u8) -> Self {
        ScopeSet(if universe >= 32 { u32::MAX } else { (1u32 << universe) - 1 })
    }

    pub fn contains(self, tag: u8) -> bool {
        tag < 32 && self.0 & (1 << tag) != 0
    }

    pub fn insert(&mut self, tag: u8) {
        self.0 |= 1 << tag;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub kind: DeviceKind,
    pub generates_tasks: bool,
    pub mobile: bool,
    /// m/s
    pub speed: f64,
    pub battery_powered: bool,
    /// Wh
    pub battery_capacity: f64,
    /// W
    pub idle_power: f64,
    /// W
    pub max_power: f64,
    /// MI/s, per core
    pub cpu_rate: f64,
    pub cpu_cores: u32,
    pub scopes: ScopeSet,
}

impl DeviceSpec {
    /// Reference device profiles. Sensors have no power figures and draw
    /// nothing unless configured otherwise.
    pub fn reference(kind: DeviceKind) -> Self {
        let gips = |g: f64| g * MI_PER_SEC_PER_GIPS;
        let base = DeviceSpec {
            kind,
            generates_tasks: false,
            mobile: false,
            speed: 0.0,
            battery_powered: false,
            battery_capacity: 0.0,
            idle_power: 0.0,
            max_power: 0.0,
            cpu_rate: 0.0,
            cpu_cores: 0,
            scopes: ScopeSet::default(),
        };
        match kind {
            DeviceKind::Laptop => DeviceSpec {
                battery_powered: true,
                battery_capacity: 56.2,
                idle_power: 1.7,
                max_power: 23.6,
                cpu_rate: gips(110.0),
                cpu_cores: 8,
                ..base
            },
            DeviceKind::Smartphone => DeviceSpec {
                generates_tasks: true,
                mobile: true,
                speed: 1.4,
                battery_powered: true,
                battery_capacity: 18.75,
                idle_power: 0.2,
                max_power: 5.0,
                cpu_rate: gips(25.0),
                cpu_cores: 8,
                ..base
            },
            DeviceKind::Gateway => {
                DeviceSpec { idle_power: 3.8, max_power: 5.5, cpu_rate: gips(16.0), cpu_cores: 4, ..base }
            }
            DeviceKind::StationarySensor => DeviceSpec { generates_tasks: true, ..base },
            DeviceKind::MobileSensor => DeviceSpec {
                generates_tasks: true,
                mobile: true,
                speed: 1.4,
                battery_powered: true,
                battery_capacity: 10.0,
                ..base
            },
            DeviceKind::EdgeServer => DeviceSpec { cpu_rate: gips(400.0), cpu_cores: 16, ..base },
        }
    }

    pub fn is_computing(&self) -> bool {
        self.kind.is_computing() && self.cpu_rate > 0.0 && self.cpu_cores > 0
    }
}

/// A running task on one core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreSlot {
    pub task: TaskId,
    pub task_type: TaskType,
    pub started_at: f64,
    /// Service owed when this slice started, ms.
    pub service_at_start: f64,
    /// Bumped on every slice so stale completion events can be ignored.
    pub epoch: u64,
}

impl CoreSlot {
    pub fn remaining_at(&self, now: f64) -> f64 {
        (self.service_at_start - (now - self.started_at)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct DeviceState {
    pub id: DeviceId,
    pub spec: DeviceSpec,
    pub position: (f64, f64),
    pub waypoint: Option<(f64, f64)>,
    /// Wh
    pub battery_remaining: f64,
    /// Tasks waiting for a core, front is served next.
    pub exec_queue: VecDeque<(TaskId, TaskType)>,
    pub executing: Vec<Option<CoreSlot>>,
    /// Tasks assigned here that are still on the wire.
    pub inbound: usize,
    pub present: bool,
    pub blacklisted: bool,
    pub dead: bool,
    /// Time the battery was last settled, ms.
    pub energy_settled_at: f64,
}

impl DeviceState {
    pub fn new(id: DeviceId, spec: DeviceSpec, position: (f64, f64)) -> Self {
        let cores = spec.cpu_cores as usize;
        let battery = spec.battery_capacity;
        Self {
            id,
            spec,
            position,
            waypoint: None,
            battery_remaining: battery,
            exec_queue: VecDeque::new(),
            executing: vec![None; cores],
            inbound: 0,
            present: true,
            blacklisted: false,
            dead: false,
            energy_settled_at: 0.0,
        }
    }

    pub fn busy_cores(&self) -> usize {
        self.executing.iter().filter(|s| s.is_some()).count()
    }

    pub fn busy_fraction(&self) -> f64 {
        if self.executing.is_empty() {
            0.0
        } else {
            self.busy_cores() as f64 / self.executing.len() as f64
        }
    }

    /// Waiting work as seen by the orchestrator: queued plus in transit.
    pub fn queue_length(&self) -> usize {
        self.exec_queue.len() + self.inbound
    }

    pub fn battery_fraction(&self) -> Option<f64> {
        if self.spec.battery_powered && self.spec.battery_capacity > 0.0 {
            Some((self.battery_remaining / self.spec.battery_capacity).clamp(0.0, 1.0))
        } else {
            None
        }
    }

    pub fn distance_to(&self, other: (f64, f64)) -> f64 {
        let dx = self.position.0 - other.0;
        let dy = self.position.1 - other.1;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn holds(&self, task: TaskId) -> bool {
        self.exec_queue.iter().any(|(t, _)| *t == task) || self.executing.iter().flatten().any(|s| s.task == task)
    }
}
