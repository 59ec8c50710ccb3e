use crate::model::{self, DeviceState, Task, TaskType};

use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatteryFeature {
    Fraction(f64),
    /// Mains-powered, effectively unlimited.
    Mains,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskFeatures {
    /// ms
    pub latency_budget: f64,
    /// MI
    pub size: f64,
    pub generator_mobile: bool,
    pub task_type: TaskType,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceFeatures {
    /// Tasks waiting for a core.
    pub queue_length: usize,
    pub cpu_cores: u32,
    /// queue_length / cpu_cores
    pub load: f64,
    /// MI/s
    pub cpu_rate: f64,
    /// ms
    pub expected_exec: f64,
    pub mobile: bool,
    pub battery: BatteryFeature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub task: TaskFeatures,
    pub resource: ResourceFeatures,
}

impl Observation {
    /// Expected execution time as a share of the latency budget.
    pub fn exec_ratio(&self) -> f64 {
        self.resource.expected_exec / self.task.latency_budget
    }
}

pub fn build_observation(task: &Task, device: &DeviceState) -> Result<Observation, OrchestratorError> {
    if !device.spec.is_computing() || !device.present || device.dead {
        return Err(OrchestratorError::NotACandidate(device.id));
    }
    let queue_length = device.queue_length();
    let load = model::current_load(queue_length, device.spec.cpu_cores)
        .map_err(|_| OrchestratorError::NotACandidate(device.id))?;
    let exec_s = model::expected_execution_time(task.size, device.spec.cpu_rate)
        .map_err(|_| OrchestratorError::NotACandidate(device.id))?;
    let battery = match device.battery_fraction() {
        Some(f) => BatteryFeature::Fraction(f),
        None => BatteryFeature::Mains,
    };
    Ok(Observation {
        task: TaskFeatures {
            latency_budget: task.latency_budget,
            size: task.size,
            generator_mobile: task.generator_mobile,
            task_type: task.task_type,
        },
        resource: ResourceFeatures {
            queue_length,
            cpu_cores: device.spec.cpu_cores,
            load,
            cpu_rate: device.spec.cpu_rate,
            expected_exec: exec_s * 1000.0,
            mobile: device.spec.mobile,
            battery,
        },
    })
}
