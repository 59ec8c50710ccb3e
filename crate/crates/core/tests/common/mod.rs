//! Trace checkers shared by the integration and acceptance tests. Each one
//! consumes records in emission order and reports violations.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use pecsim::model::TaskId;
use pecsim::trace::{RouteKind, TraceEvent};
use pecsim::{Host, ReallocReason, ScenarioConfig, TaskType, TraceRecord, TraceSink};

/// Queue and core contents of every host, rebuilt from the trace.
#[derive(Default)]
pub struct HostReplay {
    pub queued: HashMap<Host, BTreeMap<TaskId, TaskType>>,
    pub running: HashMap<Host, BTreeMap<TaskId, TaskType>>,
}

impl HostReplay {
    pub fn apply(&mut self, rec: &TraceRecord) {
        let (Some(id), Some(host)) = (rec.task, rec.host) else { return };
        let Some(ty) = rec.event.task_type() else { return };
        match rec.event {
            TraceEvent::Enqueued { .. } => {
                self.queued.entry(host).or_default().insert(id, ty);
            }
            TraceEvent::Started { .. } => {
                self.queued.entry(host).or_default().remove(&id);
                self.running.entry(host).or_default().insert(id, ty);
            }
            TraceEvent::Paused { .. } => {
                self.running.entry(host).or_default().remove(&id);
                self.queued.entry(host).or_default().insert(id, ty);
            }
            TraceEvent::ExecDone { .. } | TraceEvent::Removed { .. } => {
                self.queued.entry(host).or_default().remove(&id);
                self.running.entry(host).or_default().remove(&id);
            }
            _ => {}
        }
    }

    pub fn queued_on(&self, host: Host) -> impl Iterator<Item = (TaskId, TaskType)> + '_ {
        self.queued.get(&host).into_iter().flatten().map(|(k, v)| (*k, *v))
    }

    pub fn running_on(&self, host: Host) -> impl Iterator<Item = (TaskId, TaskType)> + '_ {
        self.running.get(&host).into_iter().flatten().map(|(k, v)| (*k, *v))
    }
}

/// No NRT runs while an HRT waits on the same host, checked after every
/// event; every NRT pause ends in a resume or a reallocation.
pub struct PriorityCheck {
    replay: HostReplay,
    seq: Option<u64>,
    touched: HashSet<Host>,
    horizon: f64,
    paused: HashSet<TaskId>,
    pub pauses: u64,
    pub resumed: u64,
    pub reallocated: u64,
    /// Still paused when the run ended.
    pub open_at_horizon: u64,
    pub violations: Vec<String>,
}

impl PriorityCheck {
    pub fn new(horizon_ms: f64) -> Self {
        Self {
            replay: HostReplay::default(),
            seq: None,
            touched: HashSet::new(),
            horizon: horizon_ms,
            paused: HashSet::new(),
            pauses: 0,
            resumed: 0,
            reallocated: 0,
            open_at_horizon: 0,
            violations: Vec::new(),
        }
    }

    fn check_touched(&mut self) {
        for host in self.touched.drain() {
            let hrt_waiting = self.replay.queued_on(host).find(|(_, t)| *t == TaskType::Hrt);
            let nrt_running = self.replay.running_on(host).find(|(_, t)| *t == TaskType::Nrt);
            if let (Some((h, _)), Some((n, _))) = (hrt_waiting, nrt_running) {
                self.violations.push(format!("after seq {:?}: NRT {n} runs on {host} while HRT {h} waits", self.seq));
            }
        }
    }

    pub fn observe(&mut self, rec: &TraceRecord) {
        if self.seq != Some(rec.seq) {
            self.check_touched();
            self.seq = Some(rec.seq);
        }
        self.replay.apply(rec);
        if let Some(h) = rec.host {
            self.touched.insert(h);
        }
        let Some(id) = rec.task else { return };
        match rec.event {
            TraceEvent::Paused { task_type, .. } => {
                if task_type != TaskType::Nrt {
                    self.violations.push(format!("{task_type} task {id} was paused"));
                }
                self.pauses += 1;
                self.paused.insert(id);
            }
            TraceEvent::Started { resumed: true, .. } => {
                if self.paused.remove(&id) {
                    self.resumed += 1;
                }
            }
            TraceEvent::Realloc { .. } => {
                if self.paused.remove(&id) {
                    self.reallocated += 1;
                }
            }
            TraceEvent::Finished { .. } | TraceEvent::Excluded { .. } => {
                if self.paused.remove(&id) {
                    if rec.at >= self.horizon {
                        self.open_at_horizon += 1;
                    } else {
                        self.violations.push(format!("paused task {id} ended at {} without resuming", rec.at));
                    }
                }
            }
            _ => {}
        }
    }

    pub fn finish(&mut self) {
        self.check_touched();
        for id in self.paused.drain() {
            self.violations.push(format!("paused task {id} never resolved"));
        }
    }
}

/// Once a device is blacklisted it gets no new work, its queued non-HRT
/// leave with reason power in the same step, and the HRT already on it run.
#[derive(Default)]
pub struct LowBatteryCheck {
    replay: HostReplay,
    horizon: f64,
    seq: Option<u64>,
    blacklisted: HashSet<Host>,
    dead: HashSet<Host>,
    /// Non-HRT that must be moved off, by host.
    owed: HashMap<Host, HashSet<TaskId>>,
    /// HRT present at blacklisting that have not run yet, with their host.
    hrt_pending: HashMap<TaskId, Host>,
    pub blacklist_events: u64,
    pub evacuated: u64,
    pub hrt_kept: u64,
    pub hrt_ran: u64,
    pub hrt_cut_short: u64,
    pub violations: Vec<String>,
}

impl LowBatteryCheck {
    pub fn new(horizon_ms: f64) -> Self {
        Self { horizon: horizon_ms, ..Default::default() }
    }

    fn close_step(&mut self) {
        for (host, ids) in self.owed.drain() {
            for id in ids {
                self.violations.push(format!("task {id} left queued on blacklisted {host}"));
            }
        }
    }

    pub fn observe(&mut self, rec: &TraceRecord) {
        if self.seq != Some(rec.seq) {
            self.close_step();
            self.seq = Some(rec.seq);
        }
        match (&rec.event, rec.host, rec.task) {
            (TraceEvent::Blacklisted, Some(host), _) => {
                self.blacklist_events += 1;
                self.blacklisted.insert(host);
                let owed: HashSet<TaskId> =
                    self.replay.queued_on(host).filter(|(_, t)| *t != TaskType::Hrt).map(|(id, _)| id).collect();
                self.owed.insert(host, owed);
                let hrt: Vec<TaskId> = self
                    .replay
                    .queued_on(host)
                    .chain(self.replay.running_on(host))
                    .filter(|(_, t)| *t == TaskType::Hrt)
                    .map(|(id, _)| id)
                    .collect();
                self.hrt_kept += hrt.len() as u64;
                self.hrt_pending.extend(hrt.into_iter().map(|id| (id, host)));
            }
            (TraceEvent::Dead, Some(host), _) => {
                self.dead.insert(host);
            }
            (TraceEvent::Routed { decision: RouteKind::Device, .. }, Some(host), Some(id))
                if self.blacklisted.contains(&host) =>
            {
                self.violations.push(format!("task {id} routed to blacklisted {host} at {}", rec.at));
            }
            (TraceEvent::Realloc { to: Some(to), .. }, _, Some(id)) if self.blacklisted.contains(to) => {
                self.violations.push(format!("task {id} reallocated to blacklisted {to}"));
            }
            (TraceEvent::Enqueued { task_type, .. }, Some(host), Some(id))
                if *task_type != TaskType::Hrt && self.blacklisted.contains(&host) =>
            {
                self.violations.push(format!("{task_type} task {id} enqueued on blacklisted {host}"));
            }
            (TraceEvent::Realloc { reason, .. }, Some(host), Some(id)) => {
                if let Some(owed) = self.owed.get_mut(&host) {
                    if owed.remove(&id) {
                        if *reason == ReallocReason::InsufficientPower {
                            self.evacuated += 1;
                        } else {
                            self.violations.push(format!("task {id} evacuated with reason {}", reason.as_str()));
                        }
                    }
                }
            }
            (TraceEvent::Started { .. } | TraceEvent::ExecDone { .. }, Some(host), Some(id)) => {
                if self.hrt_pending.get(&id) == Some(&host) {
                    self.hrt_pending.remove(&id);
                    self.hrt_ran += 1;
                }
            }
            (TraceEvent::Finished { .. } | TraceEvent::Excluded { .. }, _, Some(id)) => {
                if let Some(host) = self.hrt_pending.remove(&id) {
                    if rec.at >= self.horizon || self.dead.contains(&host) {
                        self.hrt_cut_short += 1;
                    } else {
                        self.violations.push(format!("HRT {id} on blacklisted {host} ended without running"));
                    }
                }
            }
            _ => {}
        }
        self.replay.apply(rec);
    }

    pub fn finish(&mut self) {
        self.close_step();
        for (id, host) in self.hrt_pending.drain() {
            self.violations.push(format!("HRT {id} on blacklisted {host} never ran"));
        }
    }
}

/// NRT never reaches the edge server. Under the robust policy an HRT/SRT
/// is only failed at routing when the server is unreachable or the task
/// has used up its reallocations.
pub struct RoutingCheck {
    robust: bool,
    capped: HashSet<TaskId>,
    pub server_routes: u64,
    pub violations: Vec<String>,
}

impl RoutingCheck {
    pub fn new(robust: bool) -> Self {
        Self { robust, capped: HashSet::new(), server_routes: 0, violations: Vec::new() }
    }

    pub fn observe(&mut self, rec: &TraceRecord) {
        let Some(id) = rec.task else { return };
        let nrt = rec.event.task_type() == Some(TaskType::Nrt);
        match &rec.event {
            TraceEvent::Routed { decision, server_reachable, .. } => {
                if *decision == RouteKind::Server {
                    self.server_routes += 1;
                    if nrt {
                        self.violations.push(format!("NRT {id} routed to the server"));
                    }
                }
                if self.robust
                    && !nrt
                    && *decision == RouteKind::Fail
                    && *server_reachable
                    && !self.capped.contains(&id)
                {
                    self.violations.push(format!("task {id} failed at routing with the server reachable"));
                }
                self.capped.remove(&id);
            }
            TraceEvent::Realloc { to, .. } => {
                if nrt && *to == Some(Host::EdgeServer) {
                    self.violations.push(format!("NRT {id} reallocated to the server"));
                }
                if to.is_none() {
                    self.capped.insert(id);
                }
            }
            TraceEvent::Enqueued { .. } | TraceEvent::Started { .. } if nrt && rec.host == Some(Host::EdgeServer) => {
                self.violations.push(format!("NRT {id} reached the server"));
            }
            _ => {}
        }
    }
}

/// Every generated task ends exactly once; realloc records are counted by
/// reason for comparison with the metrics.
#[derive(Default)]
pub struct ConservationCheck {
    open: HashSet<TaskId>,
    pub generated: [u64; 3],
    pub excluded: [u64; 3],
    pub finished: [u64; 3],
    pub realloc: [u64; 3],
    pub violations: Vec<String>,
}

impl ConservationCheck {
    pub fn observe(&mut self, rec: &TraceRecord) {
        let (Some(id), Some(ty)) = (rec.task, rec.event.task_type()) else { return };
        match &rec.event {
            TraceEvent::Generated { .. } => {
                self.generated[ty.index()] += 1;
                if !self.open.insert(id) {
                    self.violations.push(format!("task {id} generated twice"));
                }
            }
            TraceEvent::Finished { .. } | TraceEvent::Excluded { .. } => {
                if matches!(rec.event, TraceEvent::Excluded { .. }) {
                    self.excluded[ty.index()] += 1;
                } else {
                    self.finished[ty.index()] += 1;
                }
                if !self.open.remove(&id) {
                    self.violations.push(format!("task {id} ended twice or was never generated"));
                }
            }
            TraceEvent::Realloc { reason, .. } => self.realloc[reason.index()] += 1,
            _ => {
                if !self.open.contains(&id) {
                    self.violations.push(format!("{} for task {id} outside its lifetime", rec.event.name()));
                }
            }
        }
    }

    pub fn finish(&mut self) {
        for id in self.open.drain() {
            self.violations.push(format!("task {id} never ended"));
        }
    }
}

/// All checkers fed from one run.
pub struct Checks {
    pub priority: PriorityCheck,
    pub low_battery: LowBatteryCheck,
    pub routing: RoutingCheck,
    pub conservation: ConservationCheck,
}

impl Checks {
    pub fn new(cfg: &ScenarioConfig, robust: bool) -> Self {
        Self {
            priority: PriorityCheck::new(cfg.duration_ms()),
            low_battery: LowBatteryCheck::new(cfg.duration_ms()),
            routing: RoutingCheck::new(robust),
            conservation: ConservationCheck::default(),
        }
    }

    pub fn observe(&mut self, rec: &TraceRecord) {
        self.priority.observe(rec);
        self.low_battery.observe(rec);
        self.routing.observe(rec);
        self.conservation.observe(rec);
    }

    pub fn finish(&mut self) {
        self.priority.finish();
        self.low_battery.finish();
        self.conservation.finish();
    }

    /// A sink feeding these checks, and the handle to read them back.
    pub fn sink(self) -> (TraceSink, Arc<Mutex<Checks>>) {
        let shared = Arc::new(Mutex::new(self));
        let inner = Arc::clone(&shared);
        (TraceSink::Visit(Box::new(move |r| inner.lock().unwrap().observe(r))), shared)
    }
}

pub fn first_few(v: &[String]) -> String {
    v.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
}

/// Runs one seed with every checker attached.
pub fn run_checked(
    cfg: &ScenarioConfig,
    mechanisms: pecsim::Mechanisms,
    robust: bool,
    seed: u64,
) -> (pecsim::RunOutput, Checks) {
    let (trace, shared) = Checks::new(cfg, robust).sink();
    let out = pecsim::run(cfg, mechanisms, seed, pecsim::RunOptions { trace, qtable: None }).expect("run completes");
    let mut checks = Arc::try_unwrap(shared).ok().expect("sink dropped with the simulation").into_inner().unwrap();
    checks.finish();
    (out, checks)
}

pub struct LearningOutcome {
    /// Share of decisions whose greedy pick, taken just before deciding,
    /// was the good device.
    pub greedy_share: f64,
    /// Share of the second half of the decisions, exploration included,
    /// that went to the good device.
    pub late_share: f64,
    /// First decision after which the greedy pick stayed on the good device.
    pub settled_at: Option<usize>,
    pub greedy_good_at_end: bool,
    /// Greedy pick before any learning.
    pub greedy_good_untrained: bool,
}

/// Two candidates: a laptop that always fails and a slower smartphone that
/// always succeeds. Untrained, the tie-break favours the laptop.
pub fn two_device_world(seed: u64, decisions: usize) -> LearningOutcome {
    use pecsim::model::{DeviceKind, DeviceSpec, DeviceState, Task};
    use pecsim::orchestrator::{select_device, FuzzyConfig, LearningParams, Orchestrator};
    use pecsim::policy::route_task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mech = pecsim::Mechanisms::for_policy(pecsim::PolicyKind::RAdWOrch);
    let mut orch =
        Orchestrator::new(LearningParams::default(), FuzzyConfig::default(), mech.weights(), decisions as f64);
    let bad = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Laptop), (0.0, 0.0));
    let good = DeviceState::new(1, DeviceSpec::reference(DeviceKind::Smartphone), (0.0, 0.0));
    let task = Task::new(0, TaskType::Srt, 5000.0, 500.0, 0.0, 2, false, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let untrained = orch.assess(&task, [&bad, &good]);
    let greedy_good_untrained = select_device(&untrained, 0.0, &mut rng).map(|c| c.device) == Some(good.id);
    let mut late_good = 0usize;
    let mut greedy_hits = 0usize;
    let mut settled_at = None;
    let mut greedy_good = greedy_good_untrained;
    for i in 1..=decisions {
        greedy_hits += usize::from(greedy_good);
        let cands = orch.assess(&task, [&bad, &good]);
        let eps = orch.epsilon_at(i as f64 - 1.0);
        let (_, chosen) = route_task(TaskType::Srt, &cands, eps, orch.params.probe_unreliable, true, &mech, &mut rng);
        if let Some(c) = chosen {
            let success = c.device == good.id;
            orch.learn(&c.state, success, TaskType::Srt, 250.0, 500.0);
            if success && i > decisions / 2 {
                late_good += 1;
            }
        }
        let cands = orch.assess(&task, [&bad, &good]);
        greedy_good = select_device(&cands, 0.0, &mut rng).map(|c| c.device) == Some(good.id);
        match (greedy_good, settled_at) {
            (true, None) => settled_at = Some(i),
            (false, _) => settled_at = None,
            _ => {}
        }
    }
    LearningOutcome {
        greedy_share: greedy_hits as f64 / decisions as f64,
        late_share: late_good as f64 / (decisions - decisions / 2) as f64,
        settled_at,
        greedy_good_at_end: greedy_good,
        greedy_good_untrained,
    }
}
