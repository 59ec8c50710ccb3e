//! Task arrivals and per-type application profiles.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::model::{DeviceId, Task, TaskId, TaskType};

const KB_TO_MEGABIT: f64 = 8.0 / 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppProfile {
    pub latency_ms: f64,
    pub size_mi: f64,
    /// Input data shipped to the executing host.
    pub request_kb: f64,
    /// Result shipped back to the generator.
    pub result_kb: f64,
}

impl AppProfile {
    pub fn reference(task_type: TaskType) -> Self {
        match task_type {
            TaskType::Hrt => AppProfile { latency_ms: 15.0, size_mi: 200.0, request_kb: 10.0, result_kb: 1.0 },
            TaskType::Srt => AppProfile { latency_ms: 500.0, size_mi: 5000.0, request_kb: 100.0, result_kb: 10.0 },
            TaskType::Nrt => AppProfile { latency_ms: 30000.0, size_mi: 10000.0, request_kb: 500.0, result_kb: 10.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    #[default]
    Poisson,
    Periodic,
}

/// Gap to the next arrival in ms for a stream of `rate_per_min` tasks/minute.
pub fn interarrival<R: Rng + ?Sized>(process: ArrivalProcess, rate_per_min: f64, rng: &mut R) -> f64 {
    let mean = 60_000.0 / rate_per_min;
    match process {
        ArrivalProcess::Poisson => Exp::new(1.0 / mean).expect("positive rate").sample(rng),
        ArrivalProcess::Periodic => mean,
    }
}

/// Offset of the first arrival. Periodic streams get a random phase so that
/// generators do not fire in lockstep.
pub fn first_arrival<R: Rng + ?Sized>(process: ArrivalProcess, rate_per_min: f64, rng: &mut R) -> f64 {
    match process {
        ArrivalProcess::Poisson => interarrival(process, rate_per_min, rng),
        ArrivalProcess::Periodic => rng.random::<f64>() * 60_000.0 / rate_per_min,
    }
}

pub fn make_task(
    id: TaskId,
    task_type: TaskType,
    profile: &AppProfile,
    now: f64,
    generator: DeviceId,
    generator_mobile: bool,
    required_scope: u8,
) -> Task {
    let mut t =
        Task::new(id, task_type, profile.size_mi, profile.latency_ms, now, generator, generator_mobile, required_scope);
    t.request_mb = profile.request_kb * KB_TO_MEGABIT;
    t.result_mb = profile.result_kb * KB_TO_MEGABIT;
    t
}

/// All tasks one generator emits over `[0, horizon)` ms, one independent
/// stream per task type. The simulator draws the same streams lazily.
pub fn generate_tasks<R: Rng + ?Sized>(
    rates_per_min: [f64; 3],
    profiles: &[AppProfile; 3],
    process: ArrivalProcess,
    generator: DeviceId,
    horizon: f64,
    scope_universe: u8,
    rng: &mut R,
) -> Vec<Task> {
    let mut out = Vec::new();
    for ty in TaskType::ALL {
        let rate = rates_per_min[ty.index()];
        if rate <= 0.0 {
            continue;
        }
        let mut t = first_arrival(process, rate, rng);
        while t < horizon {
            let scope = rng.random_range(0..scope_universe.max(1));
            out.push(make_task(out.len() as u64, ty, &profiles[ty.index()], t, generator, false, scope));
            t += interarrival(process, rate, rng);
        }
    }
    out.sort_by(|a, b| a.generated_at.total_cmp(&b.generated_at));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profiles() -> [AppProfile; 3] {
        TaskType::ALL.map(AppProfile::reference)
    }

    #[test]
    fn reference_profiles() {
        let hrt = AppProfile::reference(TaskType::Hrt);
        assert_eq!((hrt.latency_ms, hrt.size_mi), (15.0, 200.0));
        let nrt = AppProfile::reference(TaskType::Nrt);
        assert_eq!((nrt.latency_ms, nrt.size_mi), (30000.0, 10000.0));
    }

    #[test]
    fn generated_tasks_carry_profile_and_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tasks = generate_tasks([60.0, 0.0, 0.0], &profiles(), ArrivalProcess::Poisson, 4, 60_000.0, 3, &mut rng);
        assert!(!tasks.is_empty());
        for t in &tasks {
            assert_eq!(t.task_type, TaskType::Hrt);
            assert_eq!(t.size, 200.0);
            assert_eq!(t.latency_budget, 15.0);
            assert_eq!(t.generator, 4);
            assert!(t.generated_at < 60_000.0);
            assert!(t.required_scope < 3);
        }
    }

    #[test]
    fn periodic_count_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tasks =
            generate_tasks([0.0, 10.0, 0.0], &profiles(), ArrivalProcess::Periodic, 0, 30.0 * 60_000.0, 3, &mut rng);
        assert_eq!(tasks.len(), 300);
    }
}
