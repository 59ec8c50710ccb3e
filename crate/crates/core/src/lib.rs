//! Discrete-event simulator for task orchestration across nearby edge
//! devices, with a Q-learning baseline orchestrator and a robust variant.

pub mod engine;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod policy;
pub mod runner;
pub mod scenario;
pub mod trace;

pub use engine::{RunOutput, SimError};
pub use metrics::{aggregate, average_delay, success_rate, Attribution, RunMetrics, Summary};
pub use model::{FailureReason, Host, ReallocReason, TaskType};
pub use policy::{Mechanism, Mechanisms, PolicyKind};
pub use runner::{run, run_shaping_ab, RunOptions};
pub use scenario::{ConfigError, ScenarioConfig};
pub use trace::{TraceRecord, TraceSink};
