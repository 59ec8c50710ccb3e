use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use rayon::prelude::*;
use serde_json::{json, Value};

use pecsim::metrics::{csv_rows, write_csv};
use pecsim::orchestrator::QTable;
use pecsim::policy::{Mechanism, Mechanisms, PolicyKind};
use pecsim::{aggregate, run, run_shaping_ab, RunMetrics, RunOptions, ScenarioConfig, TaskType, TraceSink};

/// Runs edge-orchestration scenarios and writes per-seed CSVs, a summary
/// and the resolved config to the output directory.
#[derive(Debug, Parser)]
#[command(name = "pecsim", version)]
struct Args {
    /// TOML scenario file; omitted keys take their defaults.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    /// Override the device count.
    #[arg(long)]
    devices: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Simulated minutes.
    #[arg(long)]
    duration: Option<f64>,
    /// Cut half of the devices off the main network.
    #[arg(long)]
    emergency: bool,
    /// Write one event trace per run.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated mechanisms to switch off:
    /// priority, reallocation, low_battery, delay_shaping, edge_fallback.
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism)]
    ablate: Vec<Mechanism>,
    /// Warm-start every run from this Q-table.
    #[arg(long)]
    qtable_in: Option<PathBuf>,
    /// Write each run's final Q-table to the output directory.
    #[arg(long)]
    qtable_out: bool,
    /// Credit delay shaping by replaying each seed without it.
    #[arg(long)]
    shaping_ab: bool,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse()
}

fn resolve(args: &Args) -> Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(p) = args.policy {
        cfg.policy = p.as_str().to_string();
    }
    if let Some(n) = args.devices {
        cfg.device_count = n;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(d) = args.duration {
        cfg.duration_min = d;
    }
    if args.emergency {
        cfg.emergency = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Finished {
    seed: u64,
    metrics: RunMetrics,
    elapsed_s: f64,
}

fn run_seed(cfg: &ScenarioConfig, mech: Mechanisms, seed: u64, args: &Args, warm: Option<&QTable>) -> Result<Finished> {
    let policy = cfg.policy_kind()?;
    let stem = format!("{}_{}_seed{}", cfg.label(), policy, seed);
    let start = Instant::now();
    let out = if args.shaping_ab {
        let out = run_shaping_ab(cfg, mech, seed, warm.cloned(), args.trace)?;
        if let Some(records) = &out.trace {
            let path = args.out.join(format!("{stem}.trace.tsv"));
            fs::write(&path, pecsim::trace::to_text(records)).with_context(|| format!("writing {}", path.display()))?;
        }
        out
    } else {
        let trace = if args.trace {
            let path = args.out.join(format!("{stem}.trace.tsv"));
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            TraceSink::stream(Box::new(BufWriter::new(file)))?
        } else {
            TraceSink::Off
        };
        run(cfg, mech, seed, RunOptions { trace, qtable: warm.cloned() })?
    };
    let csv_path = args.out.join(format!("{stem}.csv"));
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(BufWriter::new(file), &csv_rows(&cfg.label(), policy.as_str(), seed, &out.metrics))?;
    if args.qtable_out {
        let path = args.out.join(format!("{stem}.qtable.tsv"));
        fs::write(&path, out.qtable.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Finished { seed, metrics: out.metrics, elapsed_s: start.elapsed().as_secs_f64() })
}

fn summary_json(cfg: &ScenarioConfig, mech: Mechanisms, args: &Args, runs: &[Finished]) -> Result<Value> {
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let summary = aggregate(&metrics)?;
    let enabled: Vec<&str> = Mechanism::ALL.into_iter().filter(|m| mech.enabled(*m)).map(Mechanism::as_str).collect();
    let attribution: Vec<Value> = runs
        .iter()
        .map(|r| {
            let totals = r.metrics.attribution_totals();
            let tags: serde_json::Map<String, Value> = pecsim::metrics::Attribution::ALL
                .into_iter()
                .map(|a| (a.as_str().to_string(), json!(totals[a.index()])))
                .collect();
            json!({ "seed": r.seed, "successes_by_tag": tags })
        })
        .collect();
    Ok(json!({
        "scenario": cfg.label(),
        "policy": cfg.policy,
        "mechanisms": enabled,
        "ablated": args.ablate.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "shaping_ab": args.shaping_ab,
        "device_count": cfg.device_count,
        "duration_min": cfg.duration_min,
        "seeds": cfg.seeds,
        "wall_time_s": runs.iter().map(|r| json!({ "seed": r.seed, "seconds": r.elapsed_s })).collect::<Vec<_>>(),
        "attribution": attribution,
        "summary": summary,
    }))
}

fn execute(args: &Args) -> Result<()> {
    let cfg = resolve(args)?;
    let mech = Mechanisms::for_policy(cfg.policy_kind()?).without(&args.ablate);
    let warm = match &args.qtable_in {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(QTable::from_text(&text).with_context(|| format!("in {}", path.display()))?)
        }
        None => None,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_snapshot(&args.out, &cfg)?;

    let results: Vec<(u64, Result<Finished>)> =
        cfg.seeds.par_iter().map(|&seed| (seed, run_seed(&cfg, mech, seed, args, warm.as_ref()))).collect();

    let mut runs = Vec::new();
    let mut failed = 0;
    for (seed, r) in results {
        match r {
            Ok(f) => {
                log::info!("seed {seed} done in {:.1}s", f.elapsed_s);
                runs.push(f);
            }
            Err(e) => {
                eprintln!("seed {seed} failed: {e:#}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} runs failed", cfg.seeds.len());
    }

    let summary = summary_json(&cfg, mech, args, &runs)?;
    let path = args.out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    print_table(&cfg, &runs);
    Ok(())
}

fn write_snapshot(out: &Path, cfg: &ScenarioConfig) -> Result<()> {
    let path = out.join("config.toml");
    fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn print_table(cfg: &ScenarioConfig, runs: &[Finished]) {
    println!("{} {} over {} seed(s)", cfg.label(), cfg.policy, runs.len());
    println!("{:<4} {:>12} {:>12} {:>14}", "type", "generated", "success", "avg_delay_ms");
    for t in TaskType::ALL {
        let generated: u64 = runs.iter().map(|r| r.metrics.get(t).generated).sum();
        let succeeded: u64 = runs.iter().map(|r| r.metrics.get(t).succeeded).sum();
        let delays: Vec<f64> = runs.iter().filter_map(|r| pecsim::average_delay(&r.metrics, t)).collect();
        let rate = if generated > 0 { format!("{:.4}", succeeded as f64 / generated as f64) } else { "-".into() };
        let delay = if delays.is_empty() {
            "-".into()
        } else {
            format!("{:.3}", delays.iter().sum::<f64>() / delays.len() as f64)
        };
        println!("{:<4} {:>12} {:>12} {:>14}", t, generated, rate, delay);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
