use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{DeviceId, Host, TaskId, TaskType};

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    TaskGenerated {
        generator: DeviceId,
        task_type: TaskType,
    },
    TransferComplete {
        task: TaskId,
        to: Host,
    },
    ExecutionComplete {
        host: Host,
        core: usize,
        task: TaskId,
        epoch: u64,
    },
    /// Advances every mobile device by one mobility tick.
    DeviceMoved,
    /// Settles every battery and fires low-battery and dead-device handling.
    BatteryTick,
    DeviceDeparted {
        device: DeviceId,
    },
    DeviceArrived {
        device: DeviceId,
    },
    ResultReturned {
        task: TaskId,
        from: Host,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TaskGenerated { .. } => "task_generated",
            EventKind::TransferComplete { .. } => "transfer_complete",
            EventKind::ExecutionComplete { .. } => "execution_complete",
            EventKind::DeviceMoved => "device_moved",
            EventKind::BatteryTick => "battery_tick",
            EventKind::DeviceDeparted { .. } => "device_departed",
            EventKind::DeviceArrived { .. } => "device_arrived",
            EventKind::ResultReturned { .. } => "result_returned",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// ms
    pub at: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the earliest (at, seq) pops first.
        other.at.total_cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Simulation clock plus pending events, dequeued in `(at, seq)` order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: f64, kind: EventKind) -> Result<u64, SimError> {
        if !at.is_finite() || at < self.now {
            return Err(SimError::EventInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { at, seq, kind });
        Ok(seq)
    }

    /// Sequence number the next scheduled event will get.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.at)
    }

    /// Pops the next event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        self.now = ev.at;
        Some(ev)
    }
}
