//! Scenario files: TOML, fully defaulted, validated with key paths, plus the
//! device population they describe.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::energy::EnergyModel;
use crate::engine::mobility::{random_point, MobilityModel};
use crate::engine::network::NetworkModel;
use crate::engine::workload::{AppProfile, ArrivalProcess};
use crate::engine::{HorizonPolicy, SimConfig};
use crate::model::{DeviceKind, DeviceSpec, DeviceState, ScopeSet, TaskType, MI_PER_SEC_PER_GIPS};
use crate::orchestrator::{FuzzyConfig, LearningParams};
use crate::policy::{Mechanisms, PolicyKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), msg: msg.into() }
}

/// How the per-type arrival rates are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Rates are for the whole system, split evenly over generating devices.
    SystemWide,
    /// Every generating device emits the full rate.
    #[default]
    PerDevice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceMix {
    pub laptop: f64,
    pub smartphone: f64,
    pub gateway: f64,
    pub stationary_sensor: f64,
    pub mobile_sensor: f64,
}

impl Default for DeviceMix {
    fn default() -> Self {
        Self { laptop: 0.11, smartphone: 0.18, gateway: 0.11, stationary_sensor: 0.28, mobile_sensor: 0.32 }
    }
}

impl DeviceMix {
    /// Fractions in population row order.
    pub fn fractions(&self) -> [f64; 5] {
        [self.laptop, self.smartphone, self.gateway, self.stationary_sensor, self.mobile_sensor]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub hrt: f64,
    pub srt: f64,
    pub nrt: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { hrt: 135.0, srt: 135.0, nrt: 270.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Apps {
    pub hrt: AppProfile,
    pub srt: AppProfile,
    pub nrt: AppProfile,
}

impl Default for Apps {
    fn default() -> Self {
        Self {
            hrt: AppProfile::reference(TaskType::Hrt),
            srt: AppProfile::reference(TaskType::Srt),
            nrt: AppProfile::reference(TaskType::Nrt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub internal_bandwidth_mbps: f64,
    pub main_bandwidth_mbps: f64,
    pub internal_latency_ms: f64,
    pub main_latency_ms: f64,
    pub fluctuation: bool,
    pub fluctuation_range: [f64; 2],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let n = NetworkModel::default();
        Self {
            internal_bandwidth_mbps: n.internal_bandwidth,
            main_bandwidth_mbps: n.main_bandwidth,
            internal_latency_ms: n.internal_base_latency,
            main_latency_ms: n.main_base_latency,
            fluctuation: true,
            fluctuation_range: [0.5, 1.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    pub area_m: [f64; 2],
    pub tick_ms: f64,
    pub departure_probability: f64,
    pub arrival_probability: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        let m = MobilityModel::default();
        Self {
            area_m: [m.area.0, m.area.1],
            tick_ms: m.tick_interval,
            departure_probability: m.departure_probability,
            arrival_probability: m.arrival_probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub threshold_fraction: f64,
    pub tick_ms: f64,
    pub mobile_sensor_battery_wh: f64,
    /// Each battery starts at a uniform fraction of capacity in this range.
    pub initial_battery: [f64; 2],
}

impl Default for EnergyConfig {
    fn default() -> Self {
        let e = EnergyModel::default();
        Self {
            threshold_fraction: e.threshold_fraction,
            tick_ms: e.tick_interval,
            mobile_sensor_battery_wh: DeviceSpec::reference(DeviceKind::MobileSensor).battery_capacity,
            initial_battery: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    /// Per core.
    pub cpu_gips: f64,
    pub cores: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let s = DeviceSpec::reference(DeviceKind::EdgeServer);
        Self { cpu_gips: s.cpu_rate / MI_PER_SEC_PER_GIPS, cores: s.cpu_cores }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScopeConfig {
    /// Distinct capability tags; each task needs one.
    pub universe: u8,
    /// Chance a computing device supports any given tag.
    pub coverage: f64,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        Self { universe: 3, coverage: 0.85 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub device_count: usize,
    pub duration_min: f64,
    pub seeds: Vec<u64>,
    pub policy: String,
    pub emergency: bool,
    pub rate_mode: RateMode,
    pub arrival: ArrivalProcess,
    pub horizon_policy: HorizonPolicy,
    pub realloc_cap: u32,
    /// Metres; absent means every device on the internal network is nearby.
    pub reach_radius_m: Option<f64>,
    pub device_mix: DeviceMix,
    pub rates: Rates,
    pub apps: Apps,
    pub network: NetworkConfig,
    pub mobility: MobilityConfig,
    pub energy: EnergyConfig,
    pub server: ServerConfig,
    pub scopes: ScopeConfig,
    pub learning: LearningParams,
    pub fuzzy: FuzzyConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: None,
            device_count: 50,
            duration_min: 30.0,
            seeds: vec![1, 2, 3, 4, 5],
            policy: PolicyKind::RAdWOrch.as_str().to_string(),
            emergency: false,
            rate_mode: RateMode::default(),
            arrival: ArrivalProcess::default(),
            horizon_policy: HorizonPolicy::default(),
            realloc_cap: 3,
            reach_radius_m: None,
            device_mix: DeviceMix::default(),
            rates: Rates::default(),
            apps: Apps::default(),
            network: NetworkConfig::default(),
            mobility: MobilityConfig::default(),
            energy: EnergyConfig::default(),
            server: ServerConfig::default(),
            scopes: ScopeConfig::default(),
            learning: LearningParams::default(),
            fuzzy: FuzzyConfig::default(),
        }
    }
}

fn check(cond: bool, path: &str, msg: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(path, msg))
    }
}

fn non_negative(v: f64, path: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v >= 0.0, path, &format!("must be a non-negative number, got {v}"))
}

fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v > 0.0, path, &format!("must be positive, got {v}"))
}

fn probability(v: f64, path: &str) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), path, &format!("must lie in [0, 1], got {v}"))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("devices-{}", self.device_count))
    }

    pub fn policy_kind(&self) -> Result<PolicyKind, ConfigError> {
        self.policy
            .parse()
            .map_err(|_| invalid("policy", format!("unknown policy `{}`, expected adworch or r-adworch", self.policy)))
    }

    pub fn duration_ms(&self) -> f64 {
        self.duration_min * 60_000.0
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy_kind()?;
        check(self.device_count >= 2, "device_count", "must be at least 2")?;
        positive(self.duration_min, "duration_min")?;
        check(!self.seeds.is_empty(), "seeds", "must list at least one seed")?;
        let mix = self.device_mix.fractions();
        for (v, k) in mix.iter().zip(DeviceKind::POPULATION) {
            non_negative(*v, &format!("device_mix.{}", k.as_str()))?;
        }
        let sum: f64 = mix.iter().sum();
        check((sum - 1.0).abs() <= 1e-9, "device_mix", &format!("fractions sum to {sum}, expected 1"))?;
        non_negative(self.rates.hrt, "rates.hrt")?;
        non_negative(self.rates.srt, "rates.srt")?;
        non_negative(self.rates.nrt, "rates.nrt")?;
        for (name, app) in [("hrt", &self.apps.hrt), ("srt", &self.apps.srt), ("nrt", &self.apps.nrt)] {
            positive(app.latency_ms, &format!("apps.{name}.latency_ms"))?;
            positive(app.size_mi, &format!("apps.{name}.size_mi"))?;
            non_negative(app.request_kb, &format!("apps.{name}.request_kb"))?;
            non_negative(app.result_kb, &format!("apps.{name}.result_kb"))?;
        }
        let n = &self.network;
        positive(n.internal_bandwidth_mbps, "network.internal_bandwidth_mbps")?;
        positive(n.main_bandwidth_mbps, "network.main_bandwidth_mbps")?;
        non_negative(n.internal_latency_ms, "network.internal_latency_ms")?;
        non_negative(n.main_latency_ms, "network.main_latency_ms")?;
        let [lo, hi] = n.fluctuation_range;
        check(lo > 0.0 && lo <= hi, "network.fluctuation_range", "must satisfy 0 < low <= high")?;
        positive(self.mobility.area_m[0], "mobility.area_m")?;
        positive(self.mobility.area_m[1], "mobility.area_m")?;
        positive(self.mobility.tick_ms, "mobility.tick_ms")?;
        probability(self.mobility.departure_probability, "mobility.departure_probability")?;
        probability(self.mobility.arrival_probability, "mobility.arrival_probability")?;
        let e = &self.energy;
        check(
            e.threshold_fraction > 0.0 && e.threshold_fraction < 1.0,
            "energy.threshold_fraction",
            "must lie strictly between 0 and 1",
        )?;
        positive(e.tick_ms, "energy.tick_ms")?;
        positive(e.mobile_sensor_battery_wh, "energy.mobile_sensor_battery_wh")?;
        let [b0, b1] = e.initial_battery;
        check(0.0 < b0 && b0 <= b1 && b1 <= 1.0, "energy.initial_battery", "must satisfy 0 < low <= high <= 1")?;
        positive(self.server.cpu_gips, "server.cpu_gips")?;
        check(self.server.cores > 0, "server.cores", "must be at least 1")?;
        check(self.scopes.universe > 0 && self.scopes.universe <= 32, "scopes.universe", "must be 1..=32")?;
        probability(self.scopes.coverage, "scopes.coverage")?;
        if let Some(r) = self.reach_radius_m {
            positive(r, "reach_radius_m")?;
        }
        let l = &self.learning;
        check(l.alpha > 0.0 && l.alpha <= 1.0, "learning.alpha", "must lie in (0, 1]")?;
        probability(l.epsilon_start, "learning.epsilon_start")?;
        probability(l.epsilon_end, "learning.epsilon_end")?;
        for (set, name) in
            [(&self.fuzzy.load, "load"), (&self.fuzzy.exec_ratio, "exec_ratio"), (&self.fuzzy.battery, "battery")]
        {
            let p = set.peaks;
            check(p[0] < p[1] && p[1] < p[2], &format!("fuzzy.{name}.peaks"), "must be strictly increasing")?;
        }
        Ok(())
    }

    /// Devices per kind, in population row order.
    pub fn population_counts(&self) -> [usize; 5] {
        largest_remainder(&self.device_mix.fractions(), self.device_count)
    }

    /// Tasks per minute per generating device, by task type.
    pub fn rates_per_generator(&self) -> [f64; 3] {
        let r = [self.rates.hrt, self.rates.srt, self.rates.nrt];
        match self.rate_mode {
            RateMode::PerDevice => r,
            RateMode::SystemWide => {
                let generators: usize = self
                    .population_counts()
                    .iter()
                    .zip(DeviceKind::POPULATION)
                    .filter(|(_, k)| DeviceSpec::reference(*k).generates_tasks)
                    .map(|(c, _)| c)
                    .sum();
                if generators == 0 {
                    [0.0; 3]
                } else {
                    r.map(|x| x / generators as f64)
                }
            }
        }
    }

    pub fn sim_config(&self, mechanisms: Mechanisms, partition: BTreeSet<usize>) -> SimConfig {
        let n = &self.network;
        let mut server = DeviceSpec::reference(DeviceKind::EdgeServer);
        server.cpu_rate = self.server.cpu_gips * MI_PER_SEC_PER_GIPS;
        server.cpu_cores = self.server.cores;
        server.scopes = ScopeSet::all(self.scopes.universe);
        SimConfig {
            duration: self.duration_ms(),
            rates_per_min: self.rates_per_generator(),
            profiles: [self.apps.hrt, self.apps.srt, self.apps.nrt],
            arrival: self.arrival,
            network: NetworkModel {
                internal_bandwidth: n.internal_bandwidth_mbps,
                main_bandwidth: n.main_bandwidth_mbps,
                internal_base_latency: n.internal_latency_ms,
                main_base_latency: n.main_latency_ms,
                fluctuation: n.fluctuation.then_some((n.fluctuation_range[0], n.fluctuation_range[1])),
                main_network_partition: partition,
            },
            mobility: MobilityModel {
                area: (self.mobility.area_m[0], self.mobility.area_m[1]),
                tick_interval: self.mobility.tick_ms,
                departure_probability: self.mobility.departure_probability,
                arrival_probability: self.mobility.arrival_probability,
            },
            energy: EnergyModel {
                threshold_fraction: self.energy.threshold_fraction,
                tick_interval: self.energy.tick_ms,
            },
            learning: self.learning,
            fuzzy: self.fuzzy,
            mechanisms,
            server,
            realloc_cap: self.realloc_cap,
            reach_radius: self.reach_radius_m,
            horizon_policy: self.horizon_policy,
            scope_universe: self.scopes.universe,
        }
    }
}

/// Splits `total` over `fractions` by largest remainder; ties go to the
/// earlier entry.
pub fn largest_remainder(fractions: &[f64; 5], total: usize) -> [usize; 5] {
    let quotas = fractions.map(|f| f * total as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..5).collect();
    // Remainders are compared after rounding away float noise so that
    // 0.11 * 50 and 0.11 * 50 tie exactly.
    let rem = |i: usize| ((quotas[i] - quotas[i].floor()) * 1e9).round() as i64;
    order.sort_by(|&a, &b| rem(b).cmp(&rem(a)).then(a.cmp(&b)));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Builds the devices for one run. Positions, capability tags and starting
/// charge come from `rng`.
pub fn build_population<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<DeviceState> {
    let area = (cfg.mobility.area_m[0], cfg.mobility.area_m[1]);
    let [b0, b1] = cfg.energy.initial_battery;
    let mut devices = Vec::with_capacity(cfg.device_count);
    for (kind, count) in DeviceKind::POPULATION.into_iter().zip(cfg.population_counts()) {
        for _ in 0..count {
            let mut spec = DeviceSpec::reference(kind);
            if kind == DeviceKind::MobileSensor {
                spec.battery_capacity = cfg.energy.mobile_sensor_battery_wh;
            }
            if spec.is_computing() {
                for tag in 0..cfg.scopes.universe {
                    if rng.random_bool(cfg.scopes.coverage) {
                        spec.scopes.insert(tag);
                    }
                }
                if spec.scopes.is_empty() {
                    spec.scopes.insert(rng.random_range(0..cfg.scopes.universe));
                }
            }
            let mut dev = DeviceState::new(devices.len(), spec, random_point(area, rng));
            if dev.spec.mobile {
                dev.waypoint = Some(random_point(area, rng));
            }
            if dev.spec.battery_powered {
                let f = if b1 > b0 { rng.random_range(b0..=b1) } else { b0 };
                dev.battery_remaining = dev.spec.battery_capacity * f;
            }
            devices.push(dev);
        }
    }
    devices
}

/// A random half of the devices, cut from the main network in emergencies.
pub fn emergency_partition<R: Rng + ?Sized>(device_count: usize, rng: &mut R) -> BTreeSet<usize> {
    let mut ids: Vec<usize> = (0..device_count).collect();
    ids.shuffle(rng);
    ids.into_iter().take(device_count / 2).collect()
}
