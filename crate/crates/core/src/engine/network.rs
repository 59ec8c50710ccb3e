//! Two-tier link model: the internal device network and the main network
//! that leads to the edge server.

use std::collections::BTreeSet;

use rand::Rng;

use crate::model::DeviceId;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Internal,
    Main,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    /// Mbps
    pub internal_bandwidth: f64,
    /// Mbps
    pub main_bandwidth: f64,
    /// ms
    pub internal_base_latency: f64,
    /// ms
    pub main_base_latency: f64,
    /// Bandwidth multiplier range, sampled uniformly per transfer.
    pub fluctuation: Option<(f64, f64)>,
    /// Devices cut off from the main network.
    pub main_network_partition: BTreeSet<DeviceId>,
}

impl Default for NetworkModel {
    fn default() -> Self {
        Self {
            internal_bandwidth: 100.0,
            main_bandwidth: 50.0,
            internal_base_latency: 2.0,
            main_base_latency: 10.0,
            fluctuation: Some((0.5, 1.5)),
            main_network_partition: BTreeSet::new(),
        }
    }
}

impl NetworkModel {
    pub fn reaches_main(&self, device: DeviceId) -> bool {
        !self.main_network_partition.contains(&device)
    }
}

/// Time in ms to move `payload_mb` megabits over `link` for `sender`.
pub fn transfer_time<R: Rng + ?Sized>(
    payload_mb: f64,
    link: Link,
    sender: DeviceId,
    network: &NetworkModel,
    rng: &mut R,
) -> Result<f64, SimError> {
    let (bandwidth, base) = match link {
        Link::Internal => (network.internal_bandwidth, network.internal_base_latency),
        Link::Main => {
            if !network.reaches_main(sender) {
                return Err(SimError::Unreachable { device: sender });
            }
            (network.main_bandwidth, network.main_base_latency)
        }
    };
    if payload_mb <= 0.0 {
        return Ok(base);
    }
    let multiplier = match network.fluctuation {
        Some((lo, hi)) if hi > lo => rng.random_range(lo..=hi),
        Some((lo, _)) => lo,
        None => 1.0,
    };
    Ok(base + payload_mb / (bandwidth * multiplier) * 1000.0)
}
