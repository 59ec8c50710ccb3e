mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use common::{first_few, run_checked, HostReplay};
use pecsim::engine::{EventKind, EventQueue};
use pecsim::model::{current_load, expected_execution_time, FailureReason, ReallocReason, Task, TaskStatus};
use pecsim::orchestrator::{reward, select_device, BatteryLevel, Candidate, FuzzyObservation, Level, RewardWeights};
use pecsim::trace::{Outcome, TraceEvent};
use pecsim::{Host, Mechanism, Mechanisms, PolicyKind, ScenarioConfig, TaskType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn status(i: u8) -> TaskStatus {
    match i % 7 {
        0 => TaskStatus::Pending,
        1 => TaskStatus::Queued,
        2 => TaskStatus::Executing,
        3 => TaskStatus::Paused,
        4 => TaskStatus::Succeeded,
        5 => TaskStatus::Failed(FailureReason::Mobility),
        _ => TaskStatus::Reallocated(ReallocReason::InsufficientPower),
    }
}

/// The legal moves, written out by hand.
fn legal(from: TaskStatus, to: TaskStatus) -> bool {
    use TaskStatus::*;
    matches!(
        (from, to),
        (Pending, Queued)
            | (Pending, Failed(_))
            | (Pending, Reallocated(_))
            | (Queued, Executing)
            | (Queued, Failed(_))
            | (Queued, Reallocated(_))
            | (Executing, Succeeded)
            | (Executing, Failed(_))
            | (Executing, Paused)
            | (Executing, Reallocated(_))
            | (Paused, Queued)
            | (Reallocated(_), Pending)
    )
}

fn fuzzy(i: usize) -> FuzzyObservation {
    let levels = [Level::Low, Level::Medium, Level::High];
    FuzzyObservation {
        load: levels[i % 3],
        exec_ratio: levels[(i / 3) % 3],
        battery: BatteryLevel::High,
        task_type: TaskType::Srt,
        task_mobile: false,
        resource_mobile: i.is_multiple_of(2),
    }
}

proptest! {
    #[test]
    fn status_walks_only_take_legal_edges(steps in proptest::collection::vec(0u8..7, 1..40)) {
        let mut task = Task::new(0, TaskType::Srt, 5000.0, 500.0, 0.0, 0, false, 0);
        for s in steps {
            let to = status(s);
            let from = task.status();
            let ok = task.set_status(to).is_ok();
            prop_assert_eq!(ok, legal(from, to), "{:?} -> {:?}", from, to);
            prop_assert_eq!(task.status(), if ok { to } else { from });
        }
    }

    #[test]
    fn load_and_exec_time_scale_linearly(q in 0usize..10_000, cores in 1u32..64, size in 0.1f64..1e6, rate in 1.0f64..1e6) {
        let l1 = current_load(q, cores).unwrap();
        let l2 = current_load(2 * q, cores).unwrap();
        prop_assert!((l2 - 2.0 * l1).abs() <= 1e-12 * l2.abs().max(1.0));
        let e1 = expected_execution_time(size, rate).unwrap();
        let e2 = expected_execution_time(2.0 * size, rate).unwrap();
        prop_assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e2);
        prop_assert_eq!(expected_execution_time(size, rate).unwrap(), e1);
    }

    #[test]
    fn reward_falls_with_delay_and_weights_order(d in 0.0f64..1e4, extra in 1e-3f64..1e3, budget in 1.0f64..1e4, success: bool) {
        let w = RewardWeights::SHAPED;
        for t in TaskType::ALL {
            prop_assert!(reward(success, t, d + extra, budget, &w) < reward(success, t, d, budget, &w));
        }
        if d > 0.0 {
            let r = |t| reward(success, t, d, budget, &w);
            prop_assert!(r(TaskType::Hrt) < r(TaskType::Srt));
            prop_assert!(r(TaskType::Srt) < r(TaskType::Nrt));
        }
    }

    #[test]
    fn greedy_choice_ignores_positive_rescaling(
        scores in proptest::collection::vec(-5.0f64..5.0, 1..8),
        k in 0.01f64..100.0,
    ) {
        let cands: Vec<Candidate> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Candidate { device: i, state: fuzzy(i), expected_exec: 1.0 + i as f64, score: s, reliable: true })
            .collect();
        let scaled: Vec<Candidate> = cands.iter().map(|c| Candidate { score: c.score * k, ..*c }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = select_device(&cands, 0.0, &mut rng).map(|c| c.device);
        let b = select_device(&scaled, 0.0, &mut rng).map(|c| c.device);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn events_pop_in_time_then_schedule_order(times in proptest::collection::vec(0u32..50, 1..100)) {
        let mut q = EventQueue::new();
        for t in &times {
            q.schedule(*t as f64, EventKind::BatteryTick).unwrap();
        }
        let mut last = (f64::NEG_INFINITY, 0u64);
        while let Some(e) = q.pop() {
            prop_assert!(e.at > last.0 || (e.at == last.0 && e.seq > last.1));
            last = (e.at, e.seq);
        }
    }
}

prop_compose! {
    fn scenario()(
        devices in 3usize..14,
        minutes in 0.2f64..1.0,
        emergency: bool,
        low in 0.0f64..0.3,
        span in 0.0f64..0.05,
        fluctuation: bool,
        radius in proptest::option::of(50.0f64..400.0),
        fail_all: bool,
    ) -> ScenarioConfig {
        let mut cfg = ScenarioConfig { device_count: devices, duration_min: minutes, emergency, ..ScenarioConfig::default() };
        cfg.energy.initial_battery = [low, (low + span).min(1.0)];
        cfg.network.fluctuation = fluctuation;
        cfg.reach_radius_m = radius;
        if fail_all {
            cfg.horizon_policy = pecsim::engine::HorizonPolicy::FailAll;
        }
        cfg
    }
}

fn mechanisms() -> impl Strategy<Value = (Mechanisms, bool)> {
    (any::<bool>(), proptest::collection::vec(0usize..5, 0..3)).prop_map(|(robust, off)| {
        let kind = if robust { PolicyKind::RAdWOrch } else { PolicyKind::AdWOrch };
        let ablated: Vec<Mechanism> = off.into_iter().map(|i| Mechanism::ALL[i]).collect();
        (Mechanisms::for_policy(kind).without(&ablated), robust && ablated.is_empty())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn random_scenarios_keep_run_invariants(cfg in scenario(), (mech, full) in mechanisms(), seed in 0u64..1000) {
        let (out, c) = run_checked(&cfg, mech, full, seed);
        prop_assert!(c.conservation.violations.is_empty(), "{}", first_few(&c.conservation.violations));
        prop_assert!(c.routing.violations.is_empty(), "{}", first_few(&c.routing.violations));
        if mech.priority {
            prop_assert!(c.priority.violations.is_empty(), "{}", first_few(&c.priority.violations));
        } else {
            prop_assert_eq!(c.priority.pauses, 0);
        }
        if mech.low_battery {
            prop_assert!(c.low_battery.violations.is_empty(), "{}", first_few(&c.low_battery.violations));
        }
        for t in TaskType::ALL {
            let m = out.metrics.get(t);
            prop_assert_eq!(m.generated, m.succeeded + m.failed_total());
            if let Some(r) = pecsim::success_rate(&out.metrics, t) {
                prop_assert!((0.0..=1.0).contains(&r));
            }
            if let Some(d) = pecsim::average_delay(&out.metrics, t) {
                prop_assert!(d >= 0.0);
            }
            let tags: u64 = m.attribution.iter().sum();
            prop_assert_eq!(tags, m.succeeded);
        }
        for r in &out.reallocations {
            prop_assert!(out.reallocations.iter().filter(|x| x.task == r.task).count() as u32 <= cfg.realloc_cap);
        }
        for d in &out.devices {
            if d.spec.battery_powered {
                prop_assert!(d.battery_remaining >= 0.0 && d.battery_remaining <= d.spec.battery_capacity);
            }
            if d.blacklisted {
                prop_assert!(d.battery_remaining < cfg.energy.threshold_fraction * d.spec.battery_capacity);
            }
        }
    }

    #[test]
    fn traces_decompose_delay_and_respect_cores(cfg in scenario(), (mech, _) in mechanisms(), seed in 0u64..1000) {
        let out = pecsim::run(&cfg, mech, seed, pecsim::RunOptions::traced()).unwrap();
        let trace = out.trace.unwrap();
        let cores: HashMap<Host, usize> = out
            .devices
            .iter()
            .map(|d| (Host::Device(d.id), d.spec.cpu_cores as usize))
            .chain([(Host::EdgeServer, cfg.server.cores as usize)])
            .collect();
        let rate = |h: Host| match h {
            Host::Device(d) => out.devices[d].spec.cpu_rate,
            Host::EdgeServer => cfg.server.cpu_gips * 1000.0,
        };
        let mut replay = HostReplay::default();
        let mut born = HashMap::new();
        let mut moved = std::collections::HashSet::new();
        let mut last_at = 0.0;
        let mut battery_low = HashMap::new();
        for r in &trace {
            prop_assert!(r.at >= last_at);
            last_at = r.at;
            replay.apply(r);
            if let Some(h) = r.host {
                prop_assert!(replay.running_on(h).count() <= cores[&h]);
            }
            match r.event {
                TraceEvent::Generated { .. } => {
                    born.insert(r.task.unwrap(), r.at);
                }
                TraceEvent::Realloc { .. } => {
                    moved.insert(r.task.unwrap());
                }
                TraceEvent::Blacklisted => {
                    battery_low.insert(r.host.unwrap(), r.at);
                }
                TraceEvent::Finished { task_type, outcome, network, waiting, execution } => {
                    let id = r.task.unwrap();
                    let delay = r.at - born[&id];
                    prop_assert!((network + waiting + execution - delay).abs() <= 1e-9 * delay.max(1.0));
                    if let (Outcome::Succeeded(_), false, Some(h)) = (outcome, moved.contains(&id), r.host) {
                        // paused or not, a task runs for exactly its service time
                        let size = [cfg.apps.hrt, cfg.apps.srt, cfg.apps.nrt][task_type.index()].size_mi;
                        let service = size / rate(h) * 1000.0;
                        prop_assert!((execution - service).abs() <= 1e-9 * service, "{} vs {}", execution, service);
                    }
                }
                _ => {}
            }
        }
    }
}
