//! Fan wind: steady mean flow plus Ornstein-Uhlenbeck gusts, turned into
//! quadratic drag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attitude::{cross, norm3, Quaternion};
use crate::error::{Error, Result};

pub const KNOT_TO_MPS: f64 = 0.514444;
pub const AIR_DENSITY: f64 = 1.225;
pub const DEFAULT_DRAG_AREA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindSpec {
    pub speed_knots: f64,
    /// Unit vector pointing to where the wind comes from, world frame.
    /// `[1, 0, 0]` is a head-on fan in front of the nose.
    pub direction: [f64; 3],
    /// m/s, per axis.
    pub gust_std: f64,
    /// s
    pub gust_correlation_time: f64,
    /// Drag coefficient times reference area, m².
    pub drag_area: f64,
}

impl Default for WindSpec {
    fn default() -> Self {
        Self {
            speed_knots: 0.0,
            direction: [1.0, 0.0, 0.0],
            gust_std: 0.0,
            gust_correlation_time: 1.0,
            drag_area: DEFAULT_DRAG_AREA,
        }
    }
}

impl WindSpec {
    pub fn calm() -> Self {
        Self::default()
    }

    pub fn mean_speed(&self) -> f64 {
        self.speed_knots * KNOT_TO_MPS
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_knots >= 0.0) || !self.speed_knots.is_finite() {
            return Err(Error::param(
                "wind.speed_knots",
                "must be finite and non-negative",
            ));
        }
        if !(self.gust_std >= 0.0) {
            return Err(Error::param("wind.gust_std", "must be non-negative"));
        }
        if !(self.gust_correlation_time > 0.0) {
            return Err(Error::param(
                "wind.gust_correlation_time",
                "must be positive",
            ));
        }
        if !(self.drag_area >= 0.0) {
            return Err(Error::param("wind.drag_area", "must be non-negative"));
        }
        let n = norm3(self.direction);
        if !((n - 1.0).abs() < 1e-6) {
            return Err(Error::param(
                "wind.direction",
                format!("must be a unit vector, norm is {n}"),
            ));
        }
        Ok(())
    }
}

/// Drag force on the airframe for an air velocity `v` (world frame, m/s).
pub fn drag_force(v: [f64; 3], drag_area: f64) -> [f64; 3] {
    let speed = norm3(v);
    v.map(|c| 0.5 * AIR_DENSITY * drag_area * speed * c)
}

/// Stateful wind source. Each call to [`WindModel::sample`] advances the gust
/// process by one step.
#[derive(Debug, Clone)]
pub struct WindModel {
    pub spec: WindSpec,
    gust: [f64; 3],
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindSample {
    /// Air velocity, world frame, m/s.
    pub velocity: [f64; 3],
    pub speed: f64,
    /// World frame, N.
    pub force: [f64; 3],
}

impl WindModel {
    pub fn new(spec: WindSpec, seed: u64) -> Self {
        Self {
            spec,
            gust: [0.0; 3],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gust(&self) -> [f64; 3] {
        self.gust
    }

    /// Advance the gusts by `dt` and return the resulting flow and force.
    pub fn sample(&mut self, dt: f64) -> WindSample {
        let s = self.spec;
        if s.gust_std > 0.0 {
            let decay = (-dt / s.gust_correlation_time).exp();
            let kick = s.gust_std * (1.0 - decay * decay).sqrt();
            for g in &mut self.gust {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                *g = *g * decay + kick * n;
            }
        } else {
            self.gust = [0.0; 3];
        }
        let mean = s.mean_speed();
        let velocity: [f64; 3] = std::array::from_fn(|i| -s.direction[i] * mean + self.gust[i]);
        WindSample {
            velocity,
            speed: norm3(velocity),
            force: drag_force(velocity, s.drag_area),
        }
    }
}

/// Torque about the rig pivot from a force striking `lever` metres above it.
/// The world force is resolved into body axes first.
pub fn pivot_torque(force_world: [f64; 3], attitude: Quaternion, lever: f64) -> [f64; 3] {
    let f = attitude.inverse_rotate(force_world);
    // NED: "above" is −z
    cross([0.0, 0.0, -lever], f)
}
