//! One simulation run from a scenario, plus the shaped-vs-unshaped replay
//! used to credit the delay penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{RunOutput, SimError, Simulation};
use crate::metrics::{retag_shaping, RunMetrics};
use crate::orchestrator::QTable;
use crate::policy::Mechanisms;
use crate::scenario::{build_population, emergency_partition, ScenarioConfig};
use crate::trace::TraceSink;

pub struct RunOptions {
    pub trace: TraceSink,
    /// Start from this table instead of an empty one.
    pub qtable: Option<QTable>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { trace: TraceSink::Off, qtable: None }
    }
}

impl RunOptions {
    pub fn traced() -> Self {
        Self { trace: TraceSink::collect(), qtable: None }
    }
}

/// Runs one seed. The population, partition and workload depend only on
/// the scenario and seed, so different mechanism sets see the same world.
pub fn run(cfg: &ScenarioConfig, mechanisms: Mechanisms, seed: u64, opts: RunOptions) -> Result<RunOutput, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = build_population(cfg, &mut rng);
    let partition = if cfg.emergency { emergency_partition(devices.len(), &mut rng) } else { Default::default() };
    let mut sim = Simulation::new(cfg.sim_config(mechanisms, partition), devices, seed, opts.trace);
    if let Some(t) = opts.qtable {
        sim = sim.with_qtable(t);
    }
    sim.run()
}

/// Runs the seed with and without delay shaping and re-tags the shaped
/// run's successes that the unshaped run lost. The returned output is the
/// shaped run with its metrics rebuilt from the re-tagged trace, which is
/// kept only if `keep_trace` is set.
pub fn run_shaping_ab(
    cfg: &ScenarioConfig,
    mechanisms: Mechanisms,
    seed: u64,
    qtable: Option<QTable>,
    keep_trace: bool,
) -> Result<RunOutput, SimError> {
    let traced = || RunOptions { trace: TraceSink::collect(), qtable: qtable.clone() };
    let mut shaped = run(cfg, Mechanisms { delay_shaping: true, ..mechanisms }, seed, traced())?;
    let unshaped = run(cfg, Mechanisms { delay_shaping: false, ..mechanisms }, seed, traced())?;
    let retagged =
        retag_shaping(shaped.trace.as_deref().unwrap_or_default(), unshaped.trace.as_deref().unwrap_or_default());
    shaped.metrics = RunMetrics::from_trace(&retagged);
    shaped.trace = keep_trace.then_some(retagged);
    Ok(shaped)
}
