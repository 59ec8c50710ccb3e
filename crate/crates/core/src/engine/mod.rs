//! Discrete-event kernel and the physical models it drives.

pub mod energy;
pub mod event;
pub mod exec;
pub mod mobility;
pub mod network;
pub mod sim;
pub mod workload;

use thiserror::Error;

use crate::model::{DeviceId, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("event scheduled at {at} ms but the clock is at {now} ms")]
    EventInPast { at: f64, now: f64 },
    #[error("device {device} is cut off from the main network")]
    Unreachable { device: DeviceId },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("writing trace: {0}")]
    Trace(String),
}

pub use event::{Event, EventKind, EventQueue};
pub use sim::{HorizonPolicy, RunOutput, SimConfig, Simulation};
