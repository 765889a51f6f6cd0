//! Rigid-body plant of the twin-rotor tilt-servo vehicle.
//!
//! World frame is NED (z down), so a positive collective thrust `u1` opposes
//! gravity in `z̈ = g − cφcθ·u1/m − sθ·u3/m`. Positive tilt `γ` leans a rotor's
//! thrust toward +x.

use std::f64::consts::FRAC_PI_4;
use std::ops::{BitOr, BitOrAssign};

use serde::{Deserialize, Serialize};

use crate::attitude::{wrap_angle, EulerAngles};
use crate::error::{Error, Result};
use crate::integrate::rk4_step;

/// Control period of the reference flight controller, seconds.
pub const DEFAULT_DT: f64 = 0.0028;

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BicopterParams {
    /// kg
    pub mass: f64,
    /// m/s²
    pub gravity: f64,
    /// Vertical distance between the centre of gravity and the rotor plane, m.
    pub rotor_height: f64,
    /// Horizontal distance between the centre of gravity and each rotor, m.
    pub arm_length: f64,
    /// Maps squared rotor speed to thrust.
    pub thrust_coefficient: f64,
    /// kg·m²
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

impl Default for BicopterParams {
    fn default() -> Self {
        Self {
            mass: 0.725,
            gravity: 9.81,
            rotor_height: 0.042,
            arm_length: 0.225,
            thrust_coefficient: 0.1222,
            ixx: 0.116e-3,
            iyy: 0.0408e-3,
            izz: 0.105e-3,
        }
    }
}

impl BicopterParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("rotor_height", self.rotor_height),
            ("arm_length", self.arm_length),
            ("thrust_coefficient", self.thrust_coefficient),
            ("ixx", self.ixx),
            ("iyy", self.iyy),
            ("izz", self.izz),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Weight, N.
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Rotor speed at which two untilted rotors carry the weight.
    pub fn hover_omega(&self) -> f64 {
        (self.weight() / (2.0 * self.thrust_coefficient)).sqrt()
    }
}

/// Hard actuator bounds.
///
/// `omega_max` is expressed in the same rotor-speed unit as the thrust
/// coefficient: with the default coefficient, 10 gives 12.2 N per rotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorLimits {
    pub omega_max: f64,
    /// Radians.
    pub tilt_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            omega_max: 10.0,
            tilt_max: FRAC_PI_4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub omega_r: f64,
    pub omega_l: f64,
    /// Radians, positive leans thrust toward +x.
    pub tilt_r: f64,
    pub tilt_l: f64,
}

impl ActuatorCommand {
    pub fn hover(p: &BicopterParams) -> Self {
        let w = p.hover_omega();
        Self {
            omega_r: w,
            omega_l: w,
            tilt_r: 0.0,
            tilt_l: 0.0,
        }
    }
}

/// Aggregated inputs: collective thrust, roll differential, pitch tilt force and
/// yaw differential tilt, all in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlVector {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyForces {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub thrust_r: f64,
    pub thrust_l: f64,
}

/// Saturation bit set shared by allocation, mixer and actuators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SaturationFlags(pub u8);

impl SaturationFlags {
    pub const NONE: Self = Self(0);
    pub const THROTTLE_R: Self = Self(1);
    pub const THROTTLE_L: Self = Self(1 << 1);
    pub const SERVO_R: Self = Self(1 << 2);
    pub const SERVO_L: Self = Self(1 << 3);
    /// Allocation asked for more than 90° of tilt on some side.
    pub const ALLOCATION: Self = Self(1 << 4);
    pub const INTEGRATOR: Self = Self(1 << 5);

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl BitOr for SaturationFlags {
    type Output = Self;
    fn bitor(self, rhs: Self) -> Self {
        Self(self.0 | rhs.0)
    }
}

impl BitOrAssign for SaturationFlags {
    fn bitor_assign(&mut self, rhs: Self) {
        self.0 |= rhs.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Gimballed rig: rotation only, translation pinned to zero.
    #[default]
    Testbed,
    Freeflight,
}

/// Full simulation truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// NED position, m.
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub attitude: EulerAngles,
    /// Euler angle rates (φ̇, θ̇, ψ̇), rad/s.
    pub rates: [f64; 3],
}

impl RigidBodyState {
    pub fn at_attitude(attitude: EulerAngles) -> Self {
        Self {
            attitude,
            ..Self::default()
        }
    }

    fn to_array(self) -> [f64; 12] {
        let a = self.attitude;
        [
            self.position[0],
            self.position[1],
            self.position[2],
            self.velocity[0],
            self.velocity[1],
            self.velocity[2],
            a.roll,
            a.pitch,
            a.yaw,
            self.rates[0],
            self.rates[1],
            self.rates[2],
        ]
    }

    fn from_array(v: [f64; 12]) -> Self {
        Self {
            position: [v[0], v[1], v[2]],
            velocity: [v[3], v[4], v[5]],
            attitude: EulerAngles::new(v[6], v[7], v[8]),
            rates: [v[9], v[10], v[11]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Body angular velocity (p, q, r) from the Euler rates.
    pub fn body_rates(&self) -> [f64; 3] {
        let (sr, cr) = self.attitude.roll.sin_cos();
        let (sp, cp) = self.attitude.pitch.sin_cos();
        let [dr, dp, dy] = self.rates;
        [
            dr - dy * sp,
            dp * cr + dy * cp * sr,
            -dp * sr + dy * cp * cr,
        ]
    }
}

/// Second derivatives produced by the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accelerations {
    /// ẍ, ÿ, z̈ in m/s².
    pub linear: [f64; 3],
    /// φ̈, θ̈, ψ̈ in rad/s².
    pub angular: [f64; 3],
}

/// External loads from the environment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    /// World-frame force, N.
    pub force: [f64; 3],
    /// Torque about the roll, pitch and yaw axes, N·m.
    pub torque: [f64; 3],
}

pub fn control_vector(cmd: &ActuatorCommand, p: &BicopterParams) -> ControlVector {
    let ct = p.thrust_coefficient;
    let wr = cmd.omega_r * cmd.omega_r;
    let wl = cmd.omega_l * cmd.omega_l;
    let (sr, cr) = cmd.tilt_r.sin_cos();
    let (sl, cl) = cmd.tilt_l.sin_cos();
    ControlVector {
        u1: ct * (wr * cr + wl * cl),
        u2: ct * (wr * cr - wl * cl),
        u3: ct * (wr * sr + wl * sl),
        u4: ct * (wr * sr - wl * sl),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub command: ActuatorCommand,
    pub saturation: SaturationFlags,
}

/// Invert [`control_vector`]: per side, `(u1 ± u2, u3 ± u4)` is twice the rotor
/// force vector, giving its tilt by `atan2` and its magnitude by the norm.
pub fn allocate(u: &ControlVector, p: &BicopterParams, limits: &ActuatorLimits) -> Allocation {
    let ct = p.thrust_coefficient;
    let side = |vertical: f64, horizontal: f64| {
        let tilt = horizontal.atan2(vertical);
        let omega_sq = vertical.hypot(horizontal) / (2.0 * ct);
        (tilt, omega_sq.sqrt())
    };
    let (tilt_r, omega_r) = side(u.u1 + u.u2, u.u3 + u.u4);
    let (tilt_l, omega_l) = side(u.u1 - u.u2, u.u3 - u.u4);

    let mut flags = SaturationFlags::NONE;
    if u.u1 + u.u2 < 0.0 || u.u1 - u.u2 < 0.0 {
        flags |= SaturationFlags::ALLOCATION;
    }
    let (command, sat) = saturate(
        &ActuatorCommand {
            omega_r,
            omega_l,
            tilt_r,
            tilt_l,
        },
        limits,
    );
    Allocation {
        command,
        saturation: flags | sat,
    }
}

pub fn saturate(
    cmd: &ActuatorCommand,
    limits: &ActuatorLimits,
) -> (ActuatorCommand, SaturationFlags) {
    let mut flags = SaturationFlags::NONE;
    let mut clamp = |v: f64, lo: f64, hi: f64, flag: SaturationFlags| {
        if v < lo || v > hi {
            flags |= flag;
        }
        v.clamp(lo, hi)
    };
    let out = ActuatorCommand {
        omega_r: clamp(
            cmd.omega_r,
            0.0,
            limits.omega_max,
            SaturationFlags::THROTTLE_R,
        ),
        omega_l: clamp(
            cmd.omega_l,
            0.0,
            limits.omega_max,
            SaturationFlags::THROTTLE_L,
        ),
        tilt_r: clamp(
            cmd.tilt_r,
            -limits.tilt_max,
            limits.tilt_max,
            SaturationFlags::SERVO_R,
        ),
        tilt_l: clamp(
            cmd.tilt_l,
            -limits.tilt_max,
            limits.tilt_max,
            SaturationFlags::SERVO_L,
        ),
    };
    (out, flags)
}

pub fn body_forces(cmd: &ActuatorCommand, p: &BicopterParams) -> BodyForces {
    let thrust_r = p.thrust_coefficient * cmd.omega_r * cmd.omega_r;
    let thrust_l = p.thrust_coefficient * cmd.omega_l * cmd.omega_l;
    BodyForces {
        fx: thrust_r * cmd.tilt_r.sin() + thrust_l * cmd.tilt_l.sin(),
        fy: 0.0,
        fz: thrust_r * cmd.tilt_r.cos() + thrust_l * cmd.tilt_l.cos(),
        thrust_r,
        thrust_l,
    }
}

pub fn accelerations(s: &RigidBodyState, u: &ControlVector, p: &BicopterParams) -> Accelerations {
    accelerations_with(s, u, p, &Disturbance::default())
}

/// Equations of motion with external loads added: force enters as `F/m` on the
/// translational axes, torque as `τ/I` on each rotational axis.
pub fn accelerations_with(
    s: &RigidBodyState,
    u: &ControlVector,
    p: &BicopterParams,
    d: &Disturbance,
) -> Accelerations {
    let m = p.mass;
    let (sphi, cphi) = s.attitude.roll.sin_cos();
    let (stheta, ctheta) = s.attitude.pitch.sin_cos();
    let (spsi, cpsi) = s.attitude.yaw.sin_cos();

    let xdd = -(sphi * spsi + cphi * stheta * cpsi) * u.u1 / m - ctheta * cpsi / m * u.u3;
    let ydd = -(-sphi * cpsi + cphi * stheta * spsi) * u.u1 / m + ctheta * spsi / m * u.u3;
    let zdd = p.gravity - (cphi * ctheta) * u.u1 / m - stheta / m * u.u3;

    Accelerations {
        linear: [
            xdd + d.force[0] / m,
            ydd + d.force[1] / m,
            zdd + d.force[2] / m,
        ],
        angular: [
            p.arm_length / p.ixx * u.u2 + d.torque[0] / p.ixx,
            p.rotor_height / p.iyy * u.u3 + d.torque[1] / p.iyy,
            p.arm_length / p.izz * u.u4 + d.torque[2] / p.izz,
        ],
    }
}

fn derivative(
    x: &[f64; 12],
    u: &ControlVector,
    p: &BicopterParams,
    d: &Disturbance,
    mode: Mode,
) -> [f64; 12] {
    let s = RigidBodyState::from_array(*x);
    let a = accelerations_with(&s, u, p, d);
    let mut out = [0.0; 12];
    if mode == Mode::Freeflight {
        out[..3].copy_from_slice(&x[3..6]);
        out[3..6].copy_from_slice(&a.linear);
    }
    out[6..9].copy_from_slice(&x[9..12]);
    out[9..12].copy_from_slice(&a.angular);
    out
}

/// One classical RK4 step of length `dt` with the actuator command held.
///
/// In testbed mode translation is pinned to zero. Roll and yaw are wrapped to
/// `(−π, π]` after the step.
pub fn step(
    s: &RigidBodyState,
    cmd: &ActuatorCommand,
    p: &BicopterParams,
    dt: f64,
    mode: Mode,
    disturbance: &Disturbance,
) -> Result<RigidBodyState> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let u = control_vector(cmd, p);
    let next = rk4_step(&s.to_array(), dt, |x| {
        derivative(x, &u, p, disturbance, mode)
    });

    let mut out = RigidBodyState::from_array(next);
    if !out.is_finite() {
        return Err(Error::NonFiniteState);
    }
    if mode == Mode::Testbed {
        out.position = [0.0; 3];
        out.velocity = [0.0; 3];
    }
    out.attitude.roll = wrap_angle(out.attitude.roll);
    out.attitude.yaw = wrap_angle(out.attitude.yaw);
    Ok(out)
}

/// First-order lag on rotor speed and servo tilt, discretized exactly for a
/// command held over each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagConfig {
    pub enabled: bool,
    /// Rotor speed time constant, s.
    pub omega_tau: f64,
    /// Servo time constant, s.
    pub tilt_tau: f64,
}

impl Default for LagConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            omega_tau: 0.050,
            tilt_tau: 0.030,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLag {
    config: LagConfig,
    current: ActuatorCommand,
}

impl ActuatorLag {
    pub fn new(config: LagConfig, initial: ActuatorCommand) -> Self {
        Self {
            config,
            current: initial,
        }
    }

    pub fn current(&self) -> ActuatorCommand {
        self.current
    }

    pub fn update(&mut self, cmd: &ActuatorCommand, dt: f64) -> ActuatorCommand {
        if !self.config.enabled {
            self.current = *cmd;
            return self.current;
        }
        let blend = |tau: f64| {
            if tau > 0.0 {
                1.0 - (-dt / tau).exp()
            } else {
                1.0
            }
        };
        let (kw, kg) = (blend(self.config.omega_tau), blend(self.config.tilt_tau));
        let c = &mut self.current;
        c.omega_r += kw * (cmd.omega_r - c.omega_r);
        c.omega_l += kw * (cmd.omega_l - c.omega_l);
        c.tilt_r += kg * (cmd.tilt_r - c.tilt_r);
        c.tilt_l += kg * (cmd.tilt_l - c.tilt_l);
        self.current
    }
}
