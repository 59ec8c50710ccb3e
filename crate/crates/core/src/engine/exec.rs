//! Per-host queueing and core assignment.
//!
//! Two disciplines exist: plain FIFO, and HRT-first where hard real-time
//! tasks overtake everything else and may pause a running NRT task.

use crate::model::{CoreSlot, DeviceState, TaskId, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueDiscipline {
    Fifo,
    HrtFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preempted {
    pub task: TaskId,
    pub core: usize,
    /// Service still owed, ms.
    pub remaining: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Admission {
    /// Number of queued non-HRT tasks the new task was placed ahead of.
    pub overtaken: usize,
    pub preempted: Option<Preempted>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Started {
    pub core: usize,
    pub task: TaskId,
    pub task_type: TaskType,
    /// ms of service this slice will take.
    pub service: f64,
    pub epoch: u64,
}

pub fn free_core(dev: &DeviceState) -> Option<usize> {
    dev.executing.iter().position(|s| s.is_none())
}

fn first_non_hrt(dev: &DeviceState) -> usize {
    dev.exec_queue.iter().position(|(_, ty)| *ty != TaskType::Hrt).unwrap_or(dev.exec_queue.len())
}

/// Puts a task in the queue and, under HRT-first, pauses an NRT task when an
/// HRT task finds every core busy. The paused task goes back to the head of
/// the non-HRT part of the queue.
pub fn admit(
    dev: &mut DeviceState,
    task: TaskId,
    task_type: TaskType,
    discipline: QueueDiscipline,
    now: f64,
) -> Admission {
    let mut out = Admission::default();
    if discipline == QueueDiscipline::Fifo || task_type != TaskType::Hrt {
        dev.exec_queue.push_back((task, task_type));
        return out;
    }
    let at = first_non_hrt(dev);
    out.overtaken = dev.exec_queue.len() - at;
    dev.exec_queue.insert(at, (task, task_type));
    if free_core(dev).is_none() {
        if let Some(core) = preemption_victim(dev, now) {
            let slot = dev.executing[core].take().expect("victim core is occupied");
            let remaining = slot.remaining_at(now);
            let head = first_non_hrt(dev);
            dev.exec_queue.insert(head, (slot.task, slot.task_type));
            out.preempted = Some(Preempted { task: slot.task, core, remaining });
        }
    }
    out
}

/// The running NRT task with the most service left; lowest core on ties.
pub fn preemption_victim(dev: &DeviceState, now: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (core, slot) in dev.executing.iter().enumerate() {
        let Some(slot) = slot else { continue };
        if slot.task_type != TaskType::Nrt {
            continue;
        }
        let rem = slot.remaining_at(now);
        if best.is_none_or(|(_, b)| rem > b) {
            best = Some((core, rem));
        }
    }
    best.map(|(c, _)| c)
}

/// Fills idle cores from the queue front. `service_of` gives the service a
/// task still needs (fresh tasks: the full expected execution time).
pub fn execute_slice(
    dev: &mut DeviceState,
    now: f64,
    mut service_of: impl FnMut(TaskId) -> f64,
    epochs: &mut u64,
) -> Vec<Started> {
    let mut started = Vec::new();
    while let Some(core) = free_core(dev) {
        let Some((task, task_type)) = dev.exec_queue.pop_front() else { break };
        let service = service_of(task);
        *epochs += 1;
        dev.executing[core] =
            Some(CoreSlot { task, task_type, started_at: now, service_at_start: service, epoch: *epochs });
        started.push(Started { core, task, task_type, service, epoch: *epochs });
    }
    started
}

/// Frees the core if it still runs the slice identified by `epoch`.
pub fn complete(dev: &mut DeviceState, core: usize, task: TaskId, epoch: u64) -> bool {
    match dev.executing.get(core).copied().flatten() {
        Some(slot) if slot.task == task && slot.epoch == epoch => {
            dev.executing[core] = None;
            true
        }
        _ => false,
    }
}

pub fn remove_queued(dev: &mut DeviceState, task: TaskId) -> bool {
    match dev.exec_queue.iter().position(|(t, _)| *t == task) {
        Some(i) => {
            dev.exec_queue.remove(i);
            true
        }
        None => false,
    }
}

/// Removes and returns every queued task matching `pred`, in queue order.
pub fn drain_queue(dev: &mut DeviceState, mut pred: impl FnMut(TaskType) -> bool) -> Vec<(TaskId, TaskType)> {
    let mut taken = Vec::new();
    dev.exec_queue.retain(|&(t, ty)| {
        if pred(ty) {
            taken.push((t, ty));
            false
        } else {
            true
        }
    });
    taken
}

pub fn clear_cores(dev: &mut DeviceState) -> Vec<CoreSlot> {
    dev.executing.iter_mut().filter_map(|s| s.take()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeviceKind, DeviceSpec};

    fn device(cores: u32) -> DeviceState {
        let mut spec = DeviceSpec::reference(DeviceKind::Laptop);
        spec.cpu_cores = cores;
        DeviceState::new(0, spec, (0.0, 0.0))
    }

    fn run(dev: &mut DeviceState, now: f64, service: f64, epochs: &mut u64) -> Vec<Started> {
        execute_slice(dev, now, |_| service, epochs)
    }

    fn queue(dev: &DeviceState) -> Vec<TaskId> {
        dev.exec_queue.iter().map(|(t, _)| *t).collect()
    }

    #[test]
    fn hrt_goes_ahead_of_queued_work() {
        let mut d = device(1);
        let mut e = 0;
        admit(&mut d, 9, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        run(&mut d, 0.0, 100.0, &mut e);
        admit(&mut d, 1, TaskType::Srt, QueueDiscipline::HrtFirst, 0.0);
        admit(&mut d, 2, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        // core busy with SRT this time so nothing is paused
        d.executing[0].as_mut().unwrap().task_type = TaskType::Srt;
        let a = admit(&mut d, 3, TaskType::Hrt, QueueDiscipline::HrtFirst, 0.0);
        assert_eq!(queue(&d), vec![3, 1, 2]);
        assert_eq!(a.overtaken, 2);
        assert!(a.preempted.is_none());
    }

    #[test]
    fn hrt_pauses_running_nrt_on_single_core() {
        let mut d = device(1);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        run(&mut d, 0.0, 5000.0, &mut e);
        let a = admit(&mut d, 2, TaskType::Hrt, QueueDiscipline::HrtFirst, 2000.0);
        let p = a.preempted.unwrap();
        assert_eq!(p.task, 1);
        assert!((p.remaining - 3000.0).abs() < 1e-9);
        let s = run(&mut d, 2000.0, 1.8, &mut e);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].task, 2);
        assert_eq!(queue(&d), vec![1]);
    }

    #[test]
    fn hrt_waits_behind_running_hrt() {
        let mut d = device(2);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Hrt, QueueDiscipline::HrtFirst, 0.0);
        admit(&mut d, 2, TaskType::Hrt, QueueDiscipline::HrtFirst, 0.0);
        run(&mut d, 0.0, 5.0, &mut e);
        admit(&mut d, 7, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        let a = admit(&mut d, 3, TaskType::Hrt, QueueDiscipline::HrtFirst, 1.0);
        assert!(a.preempted.is_none());
        assert_eq!(queue(&d), vec![3, 7]);
    }

    #[test]
    fn srt_starts_on_idle_core_and_never_preempts() {
        let mut d = device(4);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        admit(&mut d, 2, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        run(&mut d, 0.0, 10.0, &mut e);
        let a = admit(&mut d, 3, TaskType::Srt, QueueDiscipline::HrtFirst, 0.0);
        assert!(a.preempted.is_none());
        let s = run(&mut d, 0.0, 10.0, &mut e);
        assert_eq!(s[0].task, 3);

        let mut one = device(1);
        admit(&mut one, 1, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        run(&mut one, 0.0, 10.0, &mut e);
        assert!(admit(&mut one, 2, TaskType::Srt, QueueDiscipline::HrtFirst, 0.0).preempted.is_none());
    }

    #[test]
    fn victim_is_nrt_with_most_remaining() {
        let mut d = device(3);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        execute_slice(&mut d, 0.0, |_| 100.0, &mut e);
        admit(&mut d, 2, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        execute_slice(&mut d, 0.0, |_| 300.0, &mut e);
        admit(&mut d, 3, TaskType::Srt, QueueDiscipline::HrtFirst, 0.0);
        execute_slice(&mut d, 0.0, |_| 900.0, &mut e);
        let a = admit(&mut d, 4, TaskType::Hrt, QueueDiscipline::HrtFirst, 10.0);
        assert_eq!(a.preempted.unwrap().task, 2);
    }

    #[test]
    fn fifo_never_reorders_or_pauses() {
        let mut d = device(1);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Nrt, QueueDiscipline::Fifo, 0.0);
        run(&mut d, 0.0, 100.0, &mut e);
        admit(&mut d, 2, TaskType::Srt, QueueDiscipline::Fifo, 0.0);
        let a = admit(&mut d, 3, TaskType::Hrt, QueueDiscipline::Fifo, 0.0);
        assert_eq!(a, Admission::default());
        assert_eq!(queue(&d), vec![2, 3]);
    }

    #[test]
    fn stale_completion_is_ignored() {
        let mut d = device(1);
        let mut e = 0;
        admit(&mut d, 1, TaskType::Nrt, QueueDiscipline::HrtFirst, 0.0);
        let s = run(&mut d, 0.0, 100.0, &mut e);
        admit(&mut d, 2, TaskType::Hrt, QueueDiscipline::HrtFirst, 10.0);
        let s2 = run(&mut d, 10.0, 1.0, &mut e);
        assert!(!complete(&mut d, 0, 1, s[0].epoch));
        assert!(complete(&mut d, 0, 2, s2[0].epoch));
    }
}
