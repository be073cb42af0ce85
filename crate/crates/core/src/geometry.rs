//! Positions, link angles, UAV mobility and the user arrival/departure lifecycle.
//!
//! Mobility is a discrete-time 3D Gauss-Markov process: the velocity is an AR(1)
//! process around a mean velocity, positions integrate the velocity and reflect
//! off the horizontal borders of the service area. Altitude is clamped to the
//! UAV flight band.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Rectangular service area `[0, x_extent] x [0, y_extent]` with a UAV altitude band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceArea {
    pub x_extent: f64,
    pub y_extent: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for ServiceArea {
    fn default() -> Self {
        Self {
            x_extent: 3000.0,
            y_extent: 3000.0,
            z_min: 100.0,
            z_max: 300.0,
        }
    }
}

impl ServiceArea {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_extent > 0.0) {
            return Err(Error::config("area.x_extent", "must be > 0"));
        }
        if !(self.y_extent > 0.0) {
            return Err(Error::config("area.y_extent", "must be > 0"));
        }
        if !(self.z_min < self.z_max) {
            return Err(Error::config("area.z_min", "must be below area.z_max"));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..=self.x_extent).contains(&p.x)
            && (0.0..=self.y_extent).contains(&p.y)
            && (self.z_min..=self.z_max).contains(&p.z)
    }

    /// Uniform point inside the area, altitude uniform in the flight band.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        Vec3::new(
            rng.random::<f64>() * self.x_extent,
            rng.random::<f64>() * self.y_extent,
            self.z_min + rng.random::<f64>() * (self.z_max - self.z_min),
        )
    }
}

/// One aerial user slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: u64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub active: bool,
    /// Information bits per transmission.
    pub bits_b: u32,
    /// Channel uses per transmission.
    pub blocklength_n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub mean_velocity: Vec3,
    /// Velocity memory in `[0, 1]`; 1 keeps the velocity, 0 resets it to the mean each step.
    pub memory_a: f64,
    /// Stationary standard deviation of each velocity component (m/s).
    pub sigma: f64,
    /// Step duration (s).
    pub dt: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            mean_velocity: Vec3::ZERO,
            memory_a: 0.98,
            sigma: 10.0,
            dt: 0.1,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.memory_a) {
            return Err(Error::config("mobility.memory_a", "must lie in [0, 1]"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config("mobility.sigma", "must be >= 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("mobility.dt", "must be > 0"));
        }
        Ok(())
    }
}

/// Fold `value` back into `[0, extent]`, returning whether an odd number of
/// reflections happened (the velocity component flips sign).
fn reflect(mut value: f64, extent: f64) -> (f64, bool) {
    let mut flipped = false;
    // Large steps may cross the area more than once.
    while value < 0.0 || value > extent {
        if value < 0.0 {
            value = -value;
        } else {
            value = 2.0 * extent - value;
        }
        flipped = !flipped;
    }
    (value, flipped)
}

/// Advance one user by one Gauss-Markov step.
pub fn step_mobility<R: Rng + ?Sized>(
    user: &UserState,
    params: &MobilityParams,
    area: &ServiceArea,
    rng: &mut R,
) -> UserState {
    let a = params.memory_a;
    let noise_scale = params.sigma * (1.0 - a * a).max(0.0).sqrt();
    let mut draw = || -> f64 {
        if noise_scale == 0.0 {
            0.0
        } else {
            noise_scale * rng.sample::<f64, _>(StandardNormal)
        }
    };
    let mean = params.mean_velocity;
    let mut v = Vec3::new(
        a * user.velocity.x + (1.0 - a) * mean.x + draw(),
        a * user.velocity.y + (1.0 - a) * mean.y + draw(),
        a * user.velocity.z + (1.0 - a) * mean.z + draw(),
    );
    let mut p = user.position + v * params.dt;

    let (x, fx) = reflect(p.x, area.x_extent);
    let (y, fy) = reflect(p.y, area.y_extent);
    p.x = x;
    p.y = y;
    if fx {
        v.x = -v.x;
    }
    if fy {
        v.y = -v.y;
    }
    if p.z < area.z_min {
        p.z = area.z_min;
        v.z = v.z.abs();
    } else if p.z > area.z_max {
        p.z = area.z_max;
        v.z = -v.z.abs();
    }

    UserState {
        position: p,
        velocity: v,
        ..user.clone()
    }
}

/// Geometry of one AP to user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Polar angle from the AP's +z axis toward the user.
    pub theta: f64,
    /// Azimuth, `atan2(dy, dx)`.
    pub phi: f64,
    pub d3d: f64,
    pub d2d: f64,
}

pub fn angles_to(ap_position: Vec3, user_position: Vec3) -> Result<LinkGeometry> {
    let d = user_position - ap_position;
    let d3d = d.norm();
    if d3d == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let d2d = d.horizontal_norm();
    Ok(LinkGeometry {
        theta: d2d.atan2(d.z),
        phi: d.y.atan2(d.x),
        d3d,
        d2d,
    })
}

/// Traffic attached to every newly spawned user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub bits_b: u32,
    pub blocklength_n: u32,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            bits_b: 256,
            blocklength_n: 400,
        }
    }
}

/// What changed in one lifecycle step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LifecycleEvents {
    /// Slots whose user left this step.
    pub departed: Vec<usize>,
    /// Slot filled by a newly arrived user, if any.
    pub arrived: Option<usize>,
    /// An arrival was drawn but every slot was occupied.
    pub dropped_arrival: bool,
}

/// Apply departures, then at most one arrival, to a fixed set of user slots.
///
/// Surviving users are left untouched. A new user occupies the first inactive
/// slot, is placed uniformly in the area and starts at the mean velocity.
pub fn user_lifecycle<R: Rng + ?Sized>(
    users: &mut [UserState],
    arrival_prob: f64,
    departure_prob: f64,
    area: &ServiceArea,
    mobility: &MobilityParams,
    traffic: &TrafficParams,
    next_id: &mut u64,
    rng: &mut R,
) -> LifecycleEvents {
    let mut events = LifecycleEvents::default();
    for (slot, user) in users.iter_mut().enumerate() {
        if user.active && departure_prob > 0.0 && rng.random::<f64>() < departure_prob {
            user.active = false;
            events.departed.push(slot);
        }
    }
    if arrival_prob > 0.0 && rng.random::<f64>() < arrival_prob {
        match users.iter().position(|u| !u.active) {
            Some(slot) => {
                users[slot] = UserState {
                    id: *next_id,
                    position: area.sample_point(rng),
                    velocity: mobility.mean_velocity,
                    active: true,
                    bits_b: traffic.bits_b,
                    blocklength_n: traffic.blocklength_n,
                };
                *next_id += 1;
                events.arrived = Some(slot);
            }
            None => events.dropped_arrival = true,
        }
    }
    events
}
