//! Simulated IMU and the two attitude estimators: a complementary filter and a
//! quaternion fusion filter with proportional tilt correction.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attitude::{
    self, cross, dot3, euler_to_quat, integrate_gyro, norm3, quat_to_euler, quat_to_gravity,
    wrap_angle, EulerAngles, Quaternion,
};
use crate::dynamics::{Accelerations, BicopterParams, RigidBodyState};
use crate::error::{Error, Result};

/// Accelerometer frames below this specific-force norm carry no usable tilt.
pub const MIN_TILT_NORM_G: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuSample {
    /// Specific force in g; a level sensor at rest reads `(0, 0, +1)`.
    pub accel: [f64; 3],
    /// Body angular rate, deg/s.
    pub gyro: [f64; 3],
    /// Seconds.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// g
    pub accel_std: f64,
    /// deg/s
    pub gyro_std: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub seed: u64,
    /// Full-scale accelerometer range, ±g.
    pub accel_range: f64,
    /// Full-scale gyro range, ±deg/s.
    pub gyro_range: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            accel_std: 0.02,
            gyro_std: 0.3,
            accel_bias: [0.0; 3],
            gyro_bias: [0.0; 3],
            seed: 0,
            accel_range: 2.0,
            gyro_range: 250.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            accel_std: 0.0,
            gyro_std: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_std >= 0.0) || !(self.gyro_std >= 0.0) {
            return Err(Error::param(
                "noise",
                "standard deviations must be non-negative",
            ));
        }
        if !(self.accel_range > 0.0) || !(self.gyro_range > 0.0) {
            return Err(Error::param("noise", "sensor ranges must be positive"));
        }
        Ok(())
    }
}

/// Synthetic six-axis IMU with Gaussian noise, constant bias and full-scale clipping.
#[derive(Debug, Clone)]
pub struct SimulatedImu {
    noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl SimulatedImu {
    pub fn new(noise: NoiseModel) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            noise,
        }
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn gaussian(&mut self, std: f64) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        std * n
    }

    /// Sample the sensor at the given truth state and translational acceleration.
    pub fn sample(
        &mut self,
        state: &RigidBodyState,
        acc: &Accelerations,
        params: &BicopterParams,
        t: f64,
    ) -> ImuSample {
        let q = euler_to_quat(state.attitude);
        let g = params.gravity;
        let world = [
            -acc.linear[0] / g,
            -acc.linear[1] / g,
            1.0 - acc.linear[2] / g,
        ];
        let ideal_accel = q.inverse_rotate(world);
        let ideal_gyro = state.body_rates().map(f64::to_degrees);

        let nm = self.noise;
        let mut accel = [0.0; 3];
        let mut gyro = [0.0; 3];
        for i in 0..3 {
            let a = ideal_accel[i] + nm.accel_bias[i] + self.gaussian(nm.accel_std);
            accel[i] = a.clamp(-nm.accel_range, nm.accel_range);
        }
        for i in 0..3 {
            let w = ideal_gyro[i] + nm.gyro_bias[i] + self.gaussian(nm.gyro_std);
            gyro[i] = w.clamp(-nm.gyro_range, nm.gyro_range);
        }
        ImuSample { accel, gyro, t }
    }
}

/// Smoothing factor `α = ΔT / (RC + ΔT)` with `RC = 1 / (2π f_c)`.
pub fn alpha_from_cutoff(cutoff_hz: f64, dt: f64) -> Result<f64> {
    if !(cutoff_hz > 0.0) {
        return Err(Error::param(
            "cutoff_hz",
            format!("must be positive, got {cutoff_hz}"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let rc = 1.0 / (2.0 * PI * cutoff_hz);
    Ok(dt / (rc + dt))
}

/// `y_i = α x_i + (1 − α) y_{i−1}`
pub fn lpf_step(x: f64, prev_y: f64, alpha: f64) -> f64 {
    alpha * x + (1.0 - alpha) * prev_y
}

/// `y_i = α y_{i−1} + α (x_i − x_{i−1})`
pub fn hpf_step(x: f64, prev_x: f64, prev_y: f64, alpha: f64) -> f64 {
    alpha * prev_y + alpha * (x - prev_x)
}

/// Low-pass filter with its memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LowPass {
    pub alpha: f64,
    pub y: f64,
}

impl LowPass {
    pub fn update(&mut self, x: f64) -> f64 {
        self.y = lpf_step(x, self.y, self.alpha);
        self.y
    }
}

/// High-pass filter with its memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HighPass {
    pub alpha: f64,
    pub x: f64,
    pub y: f64,
}

impl HighPass {
    pub fn update(&mut self, x: f64) -> f64 {
        self.y = hpf_step(x, self.x, self.y, self.alpha);
        self.x = x;
        self.y
    }
}

/// Roll and pitch (rad) of the gravity direction seen by the accelerometer.
pub fn accel_to_angles(accel: [f64; 3]) -> Result<(f64, f64)> {
    let n = norm3(accel);
    if !(n > MIN_TILT_NORM_G) {
        return Err(Error::UnreliableTilt(n));
    }
    let [ax, ay, az] = accel;
    let roll = ay.atan2(az);
    let pitch = (-ax).atan2(ay.hypot(az));
    Ok((roll, pitch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub cutoff_hz: f64,
    /// Sampling period, s.
    pub dt: f64,
    /// Accelerometer weight.
    pub alpha: f64,
}

impl FilterConfig {
    pub fn new(cutoff_hz: f64, dt: f64) -> Result<Self> {
        Ok(Self {
            cutoff_hz,
            dt,
            alpha: alpha_from_cutoff(cutoff_hz, dt)?,
        })
    }

    /// Override the smoothing factor directly (`cutoff_hz` is left as NaN).
    pub fn with_alpha(alpha: f64, dt: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param(
                "alpha",
                format!("must lie in [0, 1], got {alpha}"),
            ));
        }
        Ok(Self {
            cutoff_hz: f64::NAN,
            dt,
            alpha,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Fused attitude, rad.
    pub angles: EulerAngles,
    /// Attitude held by the quaternion fusion filter.
    pub quaternion: Quaternion,
}

impl EstimatorState {
    pub fn new(initial: EulerAngles) -> Self {
        Self {
            angles: initial,
            quaternion: euler_to_quat(initial),
        }
    }
}

impl Default for EstimatorState {
    fn default() -> Self {
        Self::new(EulerAngles::default())
    }
}

/// Complementary filter: the gyro path is integrated and weighted by `1 − α`,
/// the accelerometer tilt by `α`. Yaw has no absolute reference and is
/// gyro-integrated only.
pub fn cf_update(state: &EstimatorState, sample: &ImuSample, cfg: &FilterConfig) -> EstimatorState {
    let a = cfg.alpha;
    let [p, q, r] = sample.gyro.map(f64::to_radians);
    let predicted_roll = state.angles.roll + p * cfg.dt;
    let predicted_pitch = state.angles.pitch + q * cfg.dt;
    let (roll, pitch) = match accel_to_angles(sample.accel) {
        Ok((acc_roll, acc_pitch)) => (
            (1.0 - a) * predicted_roll + a * acc_roll,
            (1.0 - a) * predicted_pitch + a * acc_pitch,
        ),
        Err(_) => (predicted_roll, predicted_pitch),
    };
    let angles = EulerAngles::new(
        wrap_angle(roll),
        pitch,
        wrap_angle(state.angles.yaw + r * cfg.dt),
    );
    EstimatorState {
        angles,
        quaternion: euler_to_quat(angles),
    }
}

/// Quaternion fusion: propagate with the gyro, then rotate the predicted
/// gravity direction a fraction `gain` of the way toward the measured one.
pub fn quat_fuse_update(
    state: &EstimatorState,
    sample: &ImuSample,
    gain: f64,
    dt: f64,
) -> EstimatorState {
    let omega = sample.gyro.map(f64::to_radians);
    let mut q = integrate_gyro(state.quaternion, omega, dt);

    let an = norm3(sample.accel);
    if gain > 0.0 && an > MIN_TILT_NORM_G {
        let measured = sample.accel.map(|v| v / an);
        if let Ok(predicted) = quat_to_gravity(q) {
            let predicted = predicted.as_array();
            let axis = cross(measured, predicted);
            let angle = dot3(measured, predicted).clamp(-1.0, 1.0).acos();
            if angle > 0.0 {
                let correction = Quaternion::from_axis_angle(axis, gain * angle);
                q = attitude::normalize(q * correction).unwrap_or(q);
            }
        }
    }

    let angles = quat_to_euler(q).map(|d| d.angles).unwrap_or(state.angles);
    EstimatorState {
        angles,
        quaternion: q,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    #[default]
    Cf,
    Quaternion,
    /// Feed the controller the true attitude.
    Truth,
}

/// Estimator selected per scenario, with its configuration bundled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub filter: FilterConfig,
    pub fusion_gain: f64,
    pub state: EstimatorState,
}

impl Estimator {
    pub fn new(
        kind: EstimatorKind,
        filter: FilterConfig,
        fusion_gain: f64,
        initial: EulerAngles,
    ) -> Self {
        Self {
            kind,
            filter,
            fusion_gain,
            state: EstimatorState::new(initial),
        }
    }

    pub fn update(&mut self, sample: &ImuSample, truth: &EulerAngles) -> EulerAngles {
        self.state = match self.kind {
            EstimatorKind::Cf => cf_update(&self.state, sample, &self.filter),
            EstimatorKind::Quaternion => {
                quat_fuse_update(&self.state, sample, self.fusion_gain, self.filter.dt)
            }
            EstimatorKind::Truth => EstimatorState::new(*truth),
        };
        self.state.angles
    }
}
