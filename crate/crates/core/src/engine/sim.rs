//! The event loop: task generation, routing, transfer, execution, result
//! return, mobility and battery, with the policy hooks wired in.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::energy::{drain_battery, EnergyModel};
use super::event::{EventKind, EventQueue};
use super::exec;
use super::mobility::{step_mobility, MobilityModel};
use super::network::{transfer_time, Link, NetworkModel};
use super::workload::{first_arrival, interarrival, make_task, AppProfile, ArrivalProcess};
use super::SimError;
use crate::metrics::{attribute_success, RunMetrics, SuccessPath};
use crate::model::{
    DeviceId, DeviceSpec, DeviceState, FailureReason, Host, Phase, ReallocReason, Task, TaskId, TaskStatus, TaskType,
};
use crate::orchestrator::{Candidate, FuzzyConfig, FuzzyObservation, LearningParams, Orchestrator, QTable};
use crate::policy::{self, FailureOutcome, Mechanisms, ReallocationRecord, RoutingDecision};
use crate::trace::{Outcome, RouteKind, TraceEvent, TraceRecord, TraceSink};

const STREAM_WORKLOAD: u64 = 1;
const STREAM_MOBILITY: u64 = 2;
const STREAM_NETWORK: u64 = 3;
const STREAM_POLICY: u64 = 4;

/// What happens to tasks still in flight when the clock reaches the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    /// Late tasks fail with DeadlineMissed; the rest are dropped from the tallies.
    #[default]
    ExcludeUnexpired,
    /// Every in-flight task fails with DeadlineMissed.
    FailAll,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// ms
    pub duration: f64,
    /// Tasks per minute for each generator, indexed by `TaskType::index`.
    pub rates_per_min: [f64; 3],
    pub profiles: [AppProfile; 3],
    pub arrival: ArrivalProcess,
    pub network: NetworkModel,
    pub mobility: MobilityModel,
    pub energy: EnergyModel,
    pub learning: LearningParams,
    pub fuzzy: FuzzyConfig,
    pub mechanisms: Mechanisms,
    pub server: DeviceSpec,
    pub realloc_cap: u32,
    /// Metres from the generator within which devices count as nearby.
    pub reach_radius: Option<f64>,
    pub horizon_policy: HorizonPolicy,
    /// Number of distinct capability tags tasks can require.
    pub scope_universe: u8,
}

#[derive(Debug, Clone)]
struct TaskEntry {
    task: Task,
    /// State to credit when the current device attempt ends.
    credit: Option<FuzzyObservation>,
    path: SuccessPath,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Option<Vec<TraceRecord>>,
    pub reallocations: Vec<ReallocationRecord>,
    pub qtable: QTable,
    pub devices: Vec<DeviceState>,
}

pub struct Simulation {
    cfg: SimConfig,
    events: EventQueue,
    now: f64,
    seq: u64,
    devices: Vec<DeviceState>,
    server: DeviceState,
    tasks: BTreeMap<TaskId, TaskEntry>,
    orch: Orchestrator,
    low_noted: Vec<bool>,
    dead_noted: Vec<bool>,
    rng_workload: ChaCha8Rng,
    rng_mobility: ChaCha8Rng,
    rng_network: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    metrics: RunMetrics,
    trace: TraceSink,
    trace_error: Option<std::io::Error>,
    reallocations: Vec<ReallocationRecord>,
    next_task: TaskId,
    epochs: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn host_state<'a>(devices: &'a mut [DeviceState], server: &'a mut DeviceState, host: Host) -> &'a mut DeviceState {
    match host {
        Host::Device(d) => &mut devices[d],
        Host::EdgeServer => server,
    }
}

impl Simulation {
    pub fn new(cfg: SimConfig, devices: Vec<DeviceState>, seed: u64, trace: TraceSink) -> Self {
        let n = devices.len();
        let server = DeviceState::new(n, cfg.server.clone(), (0.0, 0.0));
        let orch = Orchestrator::new(cfg.learning, cfg.fuzzy, cfg.mechanisms.weights(), cfg.duration);
        Self {
            events: EventQueue::new(),
            now: 0.0,
            seq: 0,
            devices,
            server,
            tasks: BTreeMap::new(),
            orch,
            low_noted: vec![false; n],
            dead_noted: vec![false; n],
            rng_workload: stream(seed, STREAM_WORKLOAD),
            rng_mobility: stream(seed, STREAM_MOBILITY),
            rng_network: stream(seed, STREAM_NETWORK),
            rng_policy: stream(seed, STREAM_POLICY),
            metrics: RunMetrics::default(),
            trace,
            trace_error: None,
            reallocations: Vec::new(),
            next_task: 0,
            epochs: 0,
            cfg,
        }
    }

    /// Starts learning from an existing table instead of an empty one.
    pub fn with_qtable(mut self, table: QTable) -> Self {
        self.orch.table = table;
        self
    }

    pub fn run(mut self) -> Result<RunOutput, SimError> {
        self.schedule_initial()?;
        while let Some(at) = self.events.peek_time() {
            if at > self.cfg.duration {
                break;
            }
            let ev = self.events.pop().expect("peeked");
            self.now = ev.at;
            self.seq = ev.seq;
            self.handle(ev.kind)?;
        }
        self.close_horizon()?;
        if let Err(e) = self.trace.flush() {
            self.trace_error.get_or_insert(e);
        }
        if let Some(e) = self.trace_error {
            return Err(SimError::Trace(e.to_string()));
        }
        Ok(RunOutput {
            metrics: self.metrics,
            trace: self.trace.into_records(),
            reallocations: self.reallocations,
            qtable: self.orch.table,
            devices: self.devices,
        })
    }

    fn schedule_initial(&mut self) -> Result<(), SimError> {
        for d in 0..self.devices.len() {
            if !self.devices[d].spec.generates_tasks {
                continue;
            }
            for ty in TaskType::ALL {
                let rate = self.cfg.rates_per_min[ty.index()];
                if rate <= 0.0 {
                    continue;
                }
                let at = first_arrival(self.cfg.arrival, rate, &mut self.rng_workload);
                if at < self.cfg.duration {
                    self.events.schedule(at, EventKind::TaskGenerated { generator: d, task_type: ty })?;
                }
            }
        }
        self.events.schedule(self.cfg.mobility.tick_interval, EventKind::DeviceMoved)?;
        self.events.schedule(self.cfg.energy.tick_interval, EventKind::BatteryTick)?;
        Ok(())
    }

    fn handle(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::TaskGenerated { generator, task_type } => self.on_generate(generator, task_type),
            EventKind::TransferComplete { task, to } => self.on_transfer(task, to),
            EventKind::ExecutionComplete { host, core, task, epoch } => self.on_exec_complete(host, core, task, epoch),
            EventKind::ResultReturned { task, from } => self.on_result(task, from),
            EventKind::DeviceMoved => self.on_mobility_tick(),
            EventKind::BatteryTick => self.on_battery_tick(),
            EventKind::DeviceDeparted { device } => {
                self.devices[device].present = false;
                self.emit(None, Some(Host::Device(device)), TraceEvent::Departed);
                Ok(())
            }
            EventKind::DeviceArrived { device } => {
                self.devices[device].present = true;
                self.emit(None, Some(Host::Device(device)), TraceEvent::Arrived);
                Ok(())
            }
        }
    }

    fn emit(&mut self, task: Option<TaskId>, host: Option<Host>, event: TraceEvent) {
        let rec = TraceRecord { seq: self.seq, at: self.now, task, host, event };
        self.metrics.record(&rec);
        if self.trace_error.is_none() {
            if let Err(e) = self.trace.push(rec) {
                self.trace_error = Some(e);
            }
        }
    }

    fn server_reachable(&self, generator: DeviceId) -> bool {
        let g = &self.devices[generator];
        g.present && !g.dead && self.cfg.network.reaches_main(generator)
    }

    fn within_reach(&self, a: DeviceId, b: DeviceId) -> bool {
        self.cfg.reach_radius.is_none_or(|r| self.devices[a].distance_to(self.devices[b].position) <= r)
    }

    fn is_offload_target(&self, d: &DeviceState, generator: DeviceId) -> bool {
        d.id != generator
            && d.spec.is_computing()
            && d.present
            && !d.dead
            && !(self.cfg.mechanisms.low_battery && d.blacklisted)
            && self.within_reach(d.id, generator)
    }

    fn on_generate(&mut self, generator: DeviceId, ty: TaskType) -> Result<(), SimError> {
        let rate = self.cfg.rates_per_min[ty.index()];
        let next = self.now + interarrival(self.cfg.arrival, rate, &mut self.rng_workload);
        if next < self.cfg.duration {
            self.events.schedule(next, EventKind::TaskGenerated { generator, task_type: ty })?;
        }
        let scope = self.rng_workload.random_range(0..self.cfg.scope_universe.max(1));
        let g = &self.devices[generator];
        if !g.present || g.dead {
            return Ok(());
        }
        let id = self.next_task;
        self.next_task += 1;
        let task = make_task(id, ty, &self.cfg.profiles[ty.index()], self.now, generator, g.spec.mobile, scope);
        self.tasks.insert(id, TaskEntry { task, credit: None, path: SuccessPath::default() });
        self.emit(Some(id), Some(Host::Device(generator)), TraceEvent::Generated { task_type: ty });
        let (decision, chosen) = self.decide(id);
        self.act(id, decision, chosen)
    }

    /// Runs the routing policy for a task sitting with its generator.
    fn decide(&mut self, id: TaskId) -> ((RoutingDecision, usize, bool), Option<Candidate>) {
        let task = &self.tasks[&id].task;
        let generator = task.generator;
        let reachable = self.server_reachable(generator);
        let candidates = self.orch.assess(task, self.devices.iter().filter(|d| self.is_offload_target(d, generator)));
        let reliable = candidates.iter().filter(|c| c.reliable).count();
        let eps = self.orch.epsilon_at(self.now);
        let (decision, chosen) = policy::route_task(
            task.task_type,
            &candidates,
            eps,
            self.cfg.learning.probe_unreliable,
            reachable,
            &self.cfg.mechanisms,
            &mut self.rng_policy,
        );
        ((decision, reliable, reachable), chosen)
    }

    fn act(
        &mut self,
        id: TaskId,
        (decision, reliable, server_reachable): (RoutingDecision, usize, bool),
        chosen: Option<Candidate>,
    ) -> Result<(), SimError> {
        let task_type = self.tasks[&id].task.task_type;
        let (kind, host) = match decision {
            RoutingDecision::OffloadTo(d) => (RouteKind::Device, Some(Host::Device(d))),
            RoutingDecision::SendToEdgeServer => (RouteKind::Server, Some(Host::EdgeServer)),
            RoutingDecision::FailNow(_) => (RouteKind::Fail, None),
        };
        self.emit(Some(id), host, TraceEvent::Routed { task_type, decision: kind, reliable, server_reachable });
        match decision {
            RoutingDecision::OffloadTo(d) => {
                self.entry(id).credit = chosen.map(|c| c.state);
                self.send(id, Host::Device(d))
            }
            RoutingDecision::SendToEdgeServer => {
                self.entry(id).path.fallback = true;
                self.send(id, Host::EdgeServer)
            }
            RoutingDecision::FailNow(reason) => self.finish(id, Outcome::Failed(reason)),
        }
    }

    fn entry(&mut self, id: TaskId) -> &mut TaskEntry {
        self.tasks.get_mut(&id).expect("live task")
    }

    /// Ships the request from the generator to `to`.
    fn send(&mut self, id: TaskId, to: Host) -> Result<(), SimError> {
        let now = self.now;
        let entry = self.tasks.get_mut(&id).expect("live task");
        entry.task.enter_phase(now, Phase::Network);
        entry.task.assigned_to = Some(to);
        entry.task.remaining_service = None;
        let link = match to {
            Host::Device(_) => Link::Internal,
            Host::EdgeServer => Link::Main,
        };
        let dt =
            transfer_time(entry.task.request_mb, link, entry.task.generator, &self.cfg.network, &mut self.rng_network)?;
        if let Host::Device(d) = to {
            self.devices[d].inbound += 1;
        }
        self.events.schedule(now + dt, EventKind::TransferComplete { task: id, to })?;
        Ok(())
    }

    fn on_transfer(&mut self, id: TaskId, to: Host) -> Result<(), SimError> {
        if let Host::Device(d) = to {
            self.devices[d].inbound = self.devices[d].inbound.saturating_sub(1);
            self.settle(d)?;
        }
        let Some(entry) = self.tasks.get(&id) else { return Ok(()) };
        let (task_type, scope) = (entry.task.task_type, entry.task.required_scope);
        if let Host::Device(d) = to {
            let dev = &self.devices[d];
            let failure = if !dev.present {
                Some(FailureReason::Mobility)
            } else if dev.dead {
                Some(FailureReason::DeadDevice)
            } else if !dev.spec.scopes.contains(scope) {
                Some(FailureReason::IncompatibleHardwareSoftware)
            } else {
                None
            };
            if let Some(reason) = failure {
                return self.attempt_failed(id, to, reason);
            }
            if let policy::Admission::Reallocate(reason) = policy::admit_offload(dev, task_type, &self.cfg.mechanisms) {
                return self.evict(id, to, reason);
            }
        }
        self.enqueue(id, to)
    }

    fn enqueue(&mut self, id: TaskId, host: Host) -> Result<(), SimError> {
        let now = self.now;
        let discipline = self.cfg.mechanisms.discipline();
        let entry = self.tasks.get_mut(&id).expect("live task");
        entry.task.set_status(TaskStatus::Queued)?;
        entry.task.enter_phase(now, Phase::Waiting);
        let task_type = entry.task.task_type;
        let adm = exec::admit(host_state(&mut self.devices, &mut self.server, host), id, task_type, discipline, now);
        if task_type == TaskType::Hrt && (adm.overtaken > 0 || adm.preempted.is_some()) {
            entry.path.jumped = true;
        }
        self.emit(Some(id), Some(host), TraceEvent::Enqueued { task_type, overtaken: adm.overtaken });
        let mut evicted = None;
        if let Some(p) = adm.preempted {
            let victim = self.entry(p.task);
            victim.task.set_status(TaskStatus::Paused)?;
            victim.task.set_status(TaskStatus::Queued)?;
            victim.task.enter_phase(now, Phase::Waiting);
            victim.task.remaining_service = Some(p.remaining);
            let vt = victim.task.task_type;
            self.emit(
                Some(p.task),
                Some(host),
                TraceEvent::Paused { task_type: vt, core: p.core, remaining: p.remaining },
            );
            if let Host::Device(d) = host {
                if self.cfg.mechanisms.low_battery && self.devices[d].blacklisted {
                    evicted = Some((p.task, vt));
                }
            }
        }
        self.dispatch(host)?;
        if let Some((victim, vt)) = evicted {
            if let Host::Device(d) = host {
                exec::remove_queued(&mut self.devices[d], victim);
            }
            self.emit(Some(victim), Some(host), TraceEvent::Removed { task_type: vt });
            self.evict(victim, host, ReallocReason::InsufficientPower)?;
        }
        Ok(())
    }

    /// Starts queued work on any idle cores of `host`.
    fn dispatch(&mut self, host: Host) -> Result<(), SimError> {
        let now = self.now;
        let dev = host_state(&mut self.devices, &mut self.server, host);
        if dev.dead {
            return Ok(());
        }
        let rate = dev.spec.cpu_rate;
        let tasks = &self.tasks;
        let started = exec::execute_slice(
            dev,
            now,
            |t| {
                let task = &tasks[&t].task;
                task.remaining_service.unwrap_or(task.size / rate * 1000.0)
            },
            &mut self.epochs,
        );
        for s in started {
            let entry = self.tasks.get_mut(&s.task).expect("live task");
            entry.task.set_status(TaskStatus::Executing)?;
            entry.task.enter_phase(now, Phase::Executing);
            let resumed = entry.task.remaining_service.take().is_some();
            self.emit(Some(s.task), Some(host), TraceEvent::Started { task_type: s.task_type, core: s.core, resumed });
            self.events.schedule(
                now + s.service,
                EventKind::ExecutionComplete { host, core: s.core, task: s.task, epoch: s.epoch },
            )?;
        }
        Ok(())
    }

    fn on_exec_complete(&mut self, host: Host, core: usize, id: TaskId, epoch: u64) -> Result<(), SimError> {
        if let Host::Device(d) = host {
            self.settle(d)?;
        }
        if !exec::complete(host_state(&mut self.devices, &mut self.server, host), core, id, epoch) {
            return Ok(());
        }
        let task = &self.tasks[&id].task;
        let (task_type, generator, result_mb) = (task.task_type, task.generator, task.result_mb);
        self.emit(Some(id), Some(host), TraceEvent::ExecDone { task_type, core });
        if let Host::Device(d) = host {
            if !self.devices[d].present || !self.within_reach(d, generator) {
                self.attempt_failed(id, host, FailureReason::Mobility)?;
                return self.dispatch(host);
            }
        }
        let now = self.now;
        self.entry(id).task.enter_phase(now, Phase::Network);
        let dt = match host {
            Host::Device(d) => transfer_time(result_mb, Link::Internal, d, &self.cfg.network, &mut self.rng_network)?,
            Host::EdgeServer => {
                transfer_time(result_mb, Link::Main, generator, &self.cfg.network, &mut self.rng_network)?
            }
        };
        self.events.schedule(now + dt, EventKind::ResultReturned { task: id, from: host })?;
        self.dispatch(host)
    }

    fn on_result(&mut self, id: TaskId, from: Host) -> Result<(), SimError> {
        let Some(entry) = self.tasks.get(&id) else { return Ok(()) };
        let g = &self.devices[entry.task.generator];
        let failure = if g.dead {
            Some(FailureReason::DeadDevice)
        } else if !g.present {
            Some(FailureReason::Mobility)
        } else if !entry.task.is_deadline_met(self.now) {
            Some(FailureReason::DeadlineMissed)
        } else {
            None
        };
        match failure {
            Some(reason) => self.attempt_failed(id, from, reason),
            None => {
                self.learn(id, true);
                let path = self.tasks[&id].path;
                let tag = attribute_success(self.tasks[&id].task.task_type, &path);
                self.finish(id, Outcome::Succeeded(tag))
            }
        }
    }

    /// Credits the device that handled the current attempt.
    fn learn(&mut self, id: TaskId, success: bool) {
        let now = self.now;
        let entry = self.tasks.get_mut(&id).expect("live task");
        if let Some(state) = entry.credit.take() {
            let t = &entry.task;
            self.orch.learn(&state, success, t.task_type, now - t.generated_at, t.latency_budget);
        }
    }

    fn attempt_failed(&mut self, id: TaskId, from: Host, reason: FailureReason) -> Result<(), SimError> {
        self.learn(id, false);
        let task = &self.tasks[&id].task;
        let outcome = policy::on_task_failed(
            task.task_type,
            reason,
            task.realloc_count,
            self.server_reachable(task.generator),
            &self.cfg.mechanisms,
            self.cfg.realloc_cap,
        );
        match outcome {
            FailureOutcome::Reallocate { to, reason } => {
                self.mark_reallocated(id, from, Some(to), reason)?;
                self.send(id, to)
            }
            FailureOutcome::FinalFailure(r) => self.finish(id, Outcome::Failed(r)),
        }
    }

    /// Moves a task off a low-battery device and routes it afresh.
    fn evict(&mut self, id: TaskId, from: Host, reason: ReallocReason) -> Result<(), SimError> {
        self.learn(id, false);
        let ((decision, reliable, reachable), chosen) = if self.tasks[&id].task.realloc_count >= self.cfg.realloc_cap {
            ((RoutingDecision::FailNow(FailureReason::NoAvailableResources), 0, false), None)
        } else {
            self.decide(id)
        };
        let to = match decision {
            RoutingDecision::OffloadTo(d) => Some(Host::Device(d)),
            RoutingDecision::SendToEdgeServer => Some(Host::EdgeServer),
            RoutingDecision::FailNow(_) => None,
        };
        if to.is_some() {
            self.mark_reallocated(id, from, to, reason)?;
        } else {
            let task_type = self.tasks[&id].task.task_type;
            self.emit(Some(id), Some(from), TraceEvent::Realloc { task_type, reason, to: None });
            self.reallocations.push(ReallocationRecord { task: id, task_type, from, to: None, reason, at: self.now });
        }
        self.act(id, (decision, reliable, reachable), chosen)
    }

    fn mark_reallocated(
        &mut self,
        id: TaskId,
        from: Host,
        to: Option<Host>,
        reason: ReallocReason,
    ) -> Result<(), SimError> {
        let now = self.now;
        let entry = self.entry(id);
        entry.task.set_status(TaskStatus::Reallocated(reason))?;
        entry.task.set_status(TaskStatus::Pending)?;
        entry.task.realloc_count += 1;
        entry.path.reallocated = true;
        let task_type = entry.task.task_type;
        self.emit(Some(id), Some(from), TraceEvent::Realloc { task_type, reason, to });
        self.reallocations.push(ReallocationRecord { task: id, task_type, from, to, reason, at: now });
        Ok(())
    }

    fn finish(&mut self, id: TaskId, outcome: Outcome) -> Result<(), SimError> {
        let now = self.now;
        let mut entry = self.tasks.remove(&id).expect("live task");
        let t = &mut entry.task;
        t.enter_phase(now, Phase::Idle);
        t.set_status(match outcome {
            Outcome::Succeeded(_) => TaskStatus::Succeeded,
            Outcome::Failed(r) => TaskStatus::Failed(r),
        })?;
        let event = TraceEvent::Finished {
            task_type: t.task_type,
            outcome,
            network: t.network_time,
            waiting: t.waiting_time,
            execution: t.execution_time,
        };
        self.emit(Some(id), t.assigned_to, event);
        Ok(())
    }

    /// Brings a device's battery up to the current time and fires the
    /// low-battery and dead-device hooks on the first crossing.
    fn settle(&mut self, d: DeviceId) -> Result<(), SimError> {
        let now = self.now;
        let dev = &mut self.devices[d];
        if !dev.spec.battery_powered {
            dev.energy_settled_at = now;
            return Ok(());
        }
        let dt = now - dev.energy_settled_at;
        if dt > 0.0 && !dev.dead {
            *dev = drain_battery(dev, dt);
        }
        dev.energy_settled_at = now;
        let below = dev.battery_remaining < self.cfg.energy.threshold(dev);
        if below && !self.low_noted[d] {
            self.low_noted[d] = true;
            self.low_battery(d)?;
        }
        if self.devices[d].dead && !self.dead_noted[d] {
            self.dead_noted[d] = true;
            self.device_died(d)?;
        }
        Ok(())
    }

    fn low_battery(&mut self, d: DeviceId) -> Result<(), SimError> {
        let action = policy::on_low_battery(&mut self.devices[d], &self.cfg.mechanisms);
        if !action.blacklisted {
            return Ok(());
        }
        let host = Host::Device(d);
        self.emit(None, Some(host), TraceEvent::Blacklisted);
        for (id, task_type) in action.reallocate {
            self.emit(Some(id), Some(host), TraceEvent::Removed { task_type });
            self.evict(id, host, ReallocReason::InsufficientPower)?;
        }
        Ok(())
    }

    fn device_died(&mut self, d: DeviceId) -> Result<(), SimError> {
        let host = Host::Device(d);
        self.emit(None, Some(host), TraceEvent::Dead);
        let dev = &mut self.devices[d];
        let mut lost: Vec<(TaskId, TaskType)> =
            exec::clear_cores(dev).into_iter().map(|s| (s.task, s.task_type)).collect();
        lost.extend(exec::drain_queue(dev, |_| true));
        for (id, task_type) in lost {
            self.emit(Some(id), Some(host), TraceEvent::Removed { task_type });
            self.attempt_failed(id, host, FailureReason::DeadDevice)?;
        }
        Ok(())
    }

    fn on_mobility_tick(&mut self) -> Result<(), SimError> {
        let dt = self.cfg.mobility.tick_interval;
        for d in 0..self.devices.len() {
            if !self.devices[d].spec.mobile {
                continue;
            }
            let was_present = self.devices[d].present;
            let mut next = step_mobility(&self.devices[d], dt, &self.cfg.mobility, &mut self.rng_mobility);
            let changed = next.present != was_present;
            next.present = was_present;
            self.devices[d] = next;
            if changed {
                let kind = if was_present {
                    EventKind::DeviceDeparted { device: d }
                } else {
                    EventKind::DeviceArrived { device: d }
                };
                self.events.schedule(self.now, kind)?;
            }
        }
        let next = self.now + dt;
        if next <= self.cfg.duration {
            self.events.schedule(next, EventKind::DeviceMoved)?;
        }
        Ok(())
    }

    fn on_battery_tick(&mut self) -> Result<(), SimError> {
        for d in 0..self.devices.len() {
            self.settle(d)?;
        }
        let next = self.now + self.cfg.energy.tick_interval;
        if next <= self.cfg.duration {
            self.events.schedule(next, EventKind::BatteryTick)?;
        }
        Ok(())
    }

    fn close_horizon(&mut self) -> Result<(), SimError> {
        self.now = self.cfg.duration;
        self.seq = self.events.next_seq();
        let ids: Vec<TaskId> = self.tasks.keys().copied().collect();
        for id in ids {
            let task = &self.tasks[&id].task;
            let late = !task.is_deadline_met(self.now);
            if late || self.cfg.horizon_policy == HorizonPolicy::FailAll {
                self.finish(id, Outcome::Failed(FailureReason::DeadlineMissed))?;
            } else {
                let task_type = task.task_type;
                let host = task.assigned_to;
                self.tasks.remove(&id);
                self.emit(Some(id), host, TraceEvent::Excluded { task_type });
            }
        }
        Ok(())
    }
}
