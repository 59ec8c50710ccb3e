use crate::model::DeviceState;

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Fraction of capacity below which a device stops taking new work.
    pub threshold_fraction: f64,
    /// ms
    pub tick_interval: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { threshold_fraction: 0.2, tick_interval: 1000.0 }
    }
}

impl EnergyModel {
    /// Wh
    pub fn threshold(&self, device: &DeviceState) -> f64 {
        self.threshold_fraction * device.spec.battery_capacity
    }
}

/// Watts drawn at the device's current core occupancy.
pub fn power_draw(device: &DeviceState) -> f64 {
    let spec = &device.spec;
    spec.idle_power + (spec.max_power - spec.idle_power) * device.busy_fraction()
}

/// Drains `dt` ms of consumption. Mains-powered devices are returned unchanged;
/// a battery that reaches zero marks the device dead.
pub fn drain_battery(device: &DeviceState, dt: f64) -> DeviceState {
    let mut next = device.clone();
    if !device.spec.battery_powered || device.dead {
        return next;
    }
    let consumed = power_draw(device) * dt / MS_PER_HOUR;
    next.battery_remaining = (device.battery_remaining - consumed).max(0.0);
    if next.battery_remaining <= 0.0 {
        next.dead = true;
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoreSlot, DeviceKind, DeviceSpec, TaskType};

    fn occupy(d: &mut DeviceState, n: usize) {
        for (i, slot) in d.executing.iter_mut().take(n).enumerate() {
            *slot = Some(CoreSlot {
                task: i as u64,
                task_type: TaskType::Nrt,
                started_at: 0.0,
                service_at_start: 1.0,
                epoch: 0,
            });
        }
    }

    #[test]
    fn idle_laptop_hour() {
        let d = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Laptop), (0.0, 0.0));
        let next = drain_battery(&d, MS_PER_HOUR);
        assert!((d.battery_remaining - next.battery_remaining - 1.7).abs() < 1e-12);
    }

    #[test]
    fn busy_laptop_hour() {
        let mut d = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Laptop), (0.0, 0.0));
        occupy(&mut d, 8);
        let next = drain_battery(&d, MS_PER_HOUR);
        assert!((d.battery_remaining - next.battery_remaining - 23.6).abs() < 1e-12);
    }

    #[test]
    fn busy_smartphone_dies_after_3_75_hours() {
        let mut d = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Smartphone), (0.0, 0.0));
        occupy(&mut d, 8);
        let almost = drain_battery(&d, 3.74 * MS_PER_HOUR);
        assert!(!almost.dead);
        let dead = drain_battery(&d, 3.75 * MS_PER_HOUR);
        assert!(dead.dead);
        assert_eq!(dead.battery_remaining, 0.0);
    }

    #[test]
    fn half_busy_draw_interpolates() {
        let mut d = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Smartphone), (0.0, 0.0));
        occupy(&mut d, 4);
        assert!((power_draw(&d) - (0.2 + 4.8 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn gateway_has_no_battery() {
        let d = DeviceState::new(0, DeviceSpec::reference(DeviceKind::Gateway), (0.0, 0.0));
        let next = drain_battery(&d, MS_PER_HOUR);
        assert_eq!(next.battery_remaining, d.battery_remaining);
        assert!(!next.dead);
    }
}
