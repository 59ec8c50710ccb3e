//! Random-waypoint movement with occasional departures from the area.

use rand::Rng;

use crate::model::DeviceState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityModel {
    /// meters
    pub area: (f64, f64),
    /// ms
    pub tick_interval: f64,
    /// Per tick, for a present mobile device.
    pub departure_probability: f64,
    /// Per tick, for a departed device.
    pub arrival_probability: f64,
}

impl Default for MobilityModel {
    fn default() -> Self {
        Self { area: (200.0, 200.0), tick_interval: 1000.0, departure_probability: 0.001, arrival_probability: 0.001 }
    }
}

pub fn random_point<R: Rng + ?Sized>(area: (f64, f64), rng: &mut R) -> (f64, f64) {
    (rng.random::<f64>() * area.0, rng.random::<f64>() * area.1)
}

/// Advances one device by `dt` ms. Stationary devices come back unchanged.
pub fn step_mobility<R: Rng + ?Sized>(
    device: &DeviceState,
    dt: f64,
    model: &MobilityModel,
    rng: &mut R,
) -> DeviceState {
    let mut next = device.clone();
    if !device.spec.mobile {
        return next;
    }
    if !device.present {
        if rng.random_bool(model.arrival_probability) {
            next.present = true;
            next.position = random_point(model.area, rng);
            next.waypoint = Some(random_point(model.area, rng));
        }
        return next;
    }
    if rng.random_bool(model.departure_probability) {
        next.present = false;
        next.waypoint = None;
        return next;
    }
    let mut budget = device.spec.speed * dt / 1000.0;
    let mut target = match device.waypoint {
        Some(w) => w,
        None => random_point(model.area, rng),
    };
    // Walk through as many waypoints as this tick's distance covers.
    loop {
        let d = next.distance_to(target);
        if d > budget {
            let f = budget / d;
            next.position.0 += (target.0 - next.position.0) * f;
            next.position.1 += (target.1 - next.position.1) * f;
            break;
        }
        next.position = target;
        budget -= d;
        target = random_point(model.area, rng);
        if budget <= 0.0 {
            break;
        }
    }
    next.waypoint = Some(target);
    next
}
