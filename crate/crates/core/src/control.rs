//! Discrete PID attitude/altitude control and the bicopter mixer.
//!
//! Attitude controllers work on errors in degrees so the tabulated gain sets
//! keep their meaning; [`OutputScale`] converts controller units into throttle
//! fractions (roll) and servo radians (pitch, yaw) ahead of the mixer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attitude::{wrap_angle, EulerAngles};
use crate::dynamics::{
    ActuatorCommand, ActuatorLimits, BicopterParams, SaturationFlags, DEFAULT_DT,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Roll,
    Pitch,
    Yaw,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Roll, Axis::Pitch, Axis::Yaw];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Roll => "roll",
            Axis::Pitch => "pitch",
            Axis::Yaw => "yaw",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roll" => Ok(Axis::Roll),
            "pitch" => Ok(Axis::Pitch),
            "yaw" => Ok(Axis::Yaw),
            other => Err(Error::param(
                "axis",
                format!("expected roll|pitch|yaw, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| *g >= 0.0 && g.is_finite())
        {
            Ok(())
        } else {
            Err(Error::param(
                "gains",
                format!("must be finite and non-negative, got {self:?}"),
            ))
        }
    }
}

/// One gain triple per attitude axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    pub roll: PidGains,
    pub pitch: PidGains,
    pub yaw: PidGains,
}

impl GainSet {
    /// Gains refined on the gimballed test rig.
    pub const TESTBED: GainSet = GainSet {
        roll: PidGains::new(3.3, 0.030, 23.0),
        pitch: PidGains::new(3.3, 0.030, 23.0),
        yaw: PidGains::new(6.8, 0.045, 0.0),
    };

    /// Gains refined in indoor free flight.
    pub const FLIGHT: GainSet = GainSet {
        roll: PidGains::new(1.3, 0.030, 20.0),
        pitch: PidGains::new(1.3, 0.108, 12.0),
        yaw: PidGains::new(0.1, 0.010, 16.0),
    };

    pub fn preset(name: &str) -> Result<GainSet> {
        match name {
            "testbed" => Ok(Self::TESTBED),
            "flight" => Ok(Self::FLIGHT),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn axis(&self, axis: Axis) -> &PidGains {
        match axis {
            Axis::Roll => &self.roll,
            Axis::Pitch => &self.pitch,
            Axis::Yaw => &self.yaw,
        }
    }

    pub fn axis_mut(&mut self, axis: Axis) -> &mut PidGains {
        match axis {
            Axis::Roll => &mut self.roll,
            Axis::Pitch => &mut self.pitch,
            Axis::Yaw => &mut self.yaw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.roll.validate()?;
        self.pitch.validate()?;
        self.yaw.validate()
    }
}

/// Discrete PID memory: running error sum, previous error and sampling period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub error_sum: f64,
    pub prev_error: f64,
    pub period: f64,
}

impl PidState {
    pub fn new(period: f64) -> Self {
        Self {
            error_sum: 0.0,
            prev_error: 0.0,
            period,
        }
    }

    pub fn reset(&mut self) {
        self.error_sum = 0.0;
        self.prev_error = 0.0;
    }
}

impl Default for PidState {
    fn default() -> Self {
        Self::new(DEFAULT_DT)
    }
}

/// `u(k) = Kp e(k) + Ki T Σe + Kd (e(k) − e(k−1)) / T`, updating the memories.
pub fn pid_step(error: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    let t = state.period;
    state.error_sum += error;
    let u = gains.kp * error
        + gains.ki * t * state.error_sum
        + gains.kd * (error - state.prev_error) / t;
    state.prev_error = error;
    u
}

/// `e = measured − reference`; the yaw error is wrapped so that headings either
/// side of ±180° differ by the short way round.
pub fn attitude_error(measured: f64, reference: f64, axis: Axis) -> f64 {
    let e = measured - reference;
    match axis {
        Axis::Yaw => wrap_angle(e),
        _ => e,
    }
}

/// PID with the extras the simulation loop needs: an integral clamp and an
/// optional derivative-on-measurement path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
    /// Bound on `|Ki T Σe|` in output units.
    pub integral_limit: Option<f64>,
    pub derivative_on_measurement: bool,
    prev_measurement: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains, period: f64) -> Self {
        Self {
            gains,
            state: PidState::new(period),
            integral_limit: None,
            derivative_on_measurement: false,
            prev_measurement: None,
        }
    }

    pub fn with_integral_limit(mut self, limit: Option<f64>) -> Self {
        self.integral_limit = limit;
        self
    }

    pub fn reset(&mut self) {
        self.state.reset();
        self.prev_measurement = None;
    }

    /// Returns the output and whether the integral clamp engaged.
    pub fn update(&mut self, error: f64, measured: f64) -> (f64, bool) {
        let t = self.state.period;
        let g = self.gains;
        self.state.error_sum += error;

        let mut clamped = false;
        if let Some(limit) = self.integral_limit {
            let scale = g.ki * t;
            if scale > 0.0 && (scale * self.state.error_sum).abs() > limit {
                self.state.error_sum = limit.copysign(self.state.error_sum) / scale;
                clamped = true;
            }
        }

        let derivative = if self.derivative_on_measurement {
            let d = self.prev_measurement.map_or(0.0, |prev| measured - prev);
            g.kd * d / t
        } else {
            g.kd * (error - self.state.prev_error) / t
        };
        let u = g.kp * error + g.ki * t * self.state.error_sum + derivative;
        self.state.prev_error = error;
        self.prev_measurement = Some(measured);
        (u, clamped)
    }
}

fn degree_loop(
    measured: f64,
    reference: f64,
    axis: Axis,
    gains: &PidGains,
    state: &mut PidState,
) -> f64 {
    let e = attitude_error(measured, reference, axis).to_degrees();
    pid_step(e, gains, state)
}

/// Roll channel: angles in radians, output in controller units (degree-scaled).
pub fn roll_loop(measured: f64, reference: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    degree_loop(measured, reference, Axis::Roll, gains, state)
}

pub fn pitch_loop(measured: f64, reference: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    degree_loop(measured, reference, Axis::Pitch, gains, state)
}

pub fn yaw_loop(measured: f64, reference: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    degree_loop(measured, reference, Axis::Yaw, gains, state)
}

/// Altitude hold on NED `z` (m). Returns a throttle correction; always zero on
/// the test rig.
pub fn altitude_loop(
    measured_z: f64,
    reference_z: f64,
    gains: &PidGains,
    state: &mut PidState,
    enabled: bool,
) -> f64 {
    if !enabled {
        return 0.0;
    }
    // z grows downward: being below the target is a positive error and asks for more thrust
    pid_step(measured_z - reference_z, gains, state)
}

/// Controller-unit to actuator-unit conversion applied before the mixer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputScale {
    /// Throttle fraction per roll controller unit.
    pub roll: f64,
    /// Servo radians per pitch controller unit.
    pub pitch: f64,
    /// Servo radians per yaw controller unit.
    pub yaw: f64,
}

impl Default for OutputScale {
    fn default() -> Self {
        Self {
            roll: 7.0e-7,
            pitch: 5.0e-6,
            yaw: 2.0e-7,
        }
    }
}

impl OutputScale {
    pub fn axis(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Roll => self.roll,
            Axis::Pitch => self.pitch,
            Axis::Yaw => self.yaw,
        }
    }
}

/// References and operating point for one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    /// Radians.
    pub attitude: EulerAngles,
    /// NED z reference, m.
    pub altitude: f64,
    /// Normalized collective throttle.
    pub throttle_base: f64,
    /// Neutral servo angle, rad.
    pub center_servo: f64,
}

/// Per-channel corrections already in actuator units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisOutputs {
    /// Throttle fraction.
    pub roll: f64,
    /// Servo radians.
    pub pitch: f64,
    /// Servo radians.
    pub yaw: f64,
    /// Throttle fraction.
    pub altitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MixerOutput {
    pub throttle_r: f64,
    pub throttle_l: f64,
    /// Servo angle, rad; positive leans the rotor backward.
    pub servo_r: f64,
    pub servo_l: f64,
    pub saturation: SaturationFlags,
}

/// Roll splits collective throttle antisymmetrically, pitch offsets both servos
/// about the centre, yaw offsets them differentially.
pub fn mixer(out: &AxisOutputs, sp: &Setpoints, tilt_max: f64) -> MixerOutput {
    let base = sp.throttle_base + out.altitude;
    let raw = [
        base - out.roll,
        base + out.roll,
        sp.center_servo + out.pitch + out.yaw,
        sp.center_servo + out.pitch - out.yaw,
    ];
    let bounds = [
        (0.0, 1.0),
        (0.0, 1.0),
        (-tilt_max, tilt_max),
        (-tilt_max, tilt_max),
    ];
    let flags = [
        SaturationFlags::THROTTLE_R,
        SaturationFlags::THROTTLE_L,
        SaturationFlags::SERVO_R,
        SaturationFlags::SERVO_L,
    ];
    let mut saturation = SaturationFlags::NONE;
    let mut v = [0.0; 4];
    for i in 0..4 {
        let (lo, hi) = bounds[i];
        if raw[i] < lo || raw[i] > hi {
            saturation |= flags[i];
        }
        v[i] = raw[i].clamp(lo, hi);
    }
    MixerOutput {
        throttle_r: v[0],
        throttle_l: v[1],
        servo_r: v[2],
        servo_l: v[3],
        saturation,
    }
}

/// Linear throttle to rotor speed map.
pub fn throttle_to_omega(throttle: f64, omega_max: f64) -> f64 {
    throttle.clamp(0.0, 1.0) * omega_max
}

/// Throttle at which two untilted rotors carry the weight.
pub fn hover_throttle(p: &BicopterParams, limits: &ActuatorLimits) -> f64 {
    p.hover_omega() / limits.omega_max
}

/// Servo angles lean the rotor backward when positive, which is negative tilt
/// in the plant's convention.
pub fn servo_to_tilt(servo: f64) -> f64 {
    -servo
}

pub fn mixer_to_command(m: &MixerOutput, limits: &ActuatorLimits) -> ActuatorCommand {
    ActuatorCommand {
        omega_r: throttle_to_omega(m.throttle_r, limits.omega_max),
        omega_l: throttle_to_omega(m.throttle_l, limits.omega_max),
        tilt_r: servo_to_tilt(m.servo_r),
        tilt_l: servo_to_tilt(m.servo_l),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::control_vector;
    use approx::assert_abs_diff_eq;

    const T: f64 = DEFAULT_DT;

    fn neutral(base: f64) -> Setpoints {
        Setpoints {
            attitude: EulerAngles::default(),
            altitude: 0.0,
            throttle_base: base,
            center_servo: 0.0,
        }
    }

    #[test]
    fn presets_match_tables() {
        assert_eq!(
            GainSet::preset("testbed").unwrap().yaw,
            PidGains::new(6.8, 0.045, 0.0)
        );
        assert_eq!(
            GainSet::preset("flight").unwrap().pitch,
            PidGains::new(1.3, 0.108, 12.0)
        );
        assert!(GainSet::preset("nope").is_err());
        assert!(PidGains::new(-1.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn attitude_error_examples() {
        let d = f64::to_radians;
        assert_abs_diff_eq!(
            attitude_error(d(5.0), 0.0, Axis::Roll).to_degrees(),
            5.0,
            epsilon = 1e-12
        );
        assert_eq!(attitude_error(0.3, 0.3, Axis::Pitch), 0.0);
        let e = attitude_error(d(179.0), d(-179.0), Axis::Yaw).to_degrees();
        assert_abs_diff_eq!(e, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn pid_examples() {
        let mut s = PidState::new(T);
        assert_eq!(pid_step(2.0, &PidGains::new(1.0, 0.0, 0.0), &mut s), 2.0);

        let g = PidGains::new(0.0, 0.030, 0.0);
        let mut s = PidState::new(T);
        let mut u = 0.0;
        for _ in 0..10 {
            u = pid_step(1.0, &g, &mut s);
        }
        assert_abs_diff_eq!(u, 8.4e-4, epsilon = 1e-15);

        let g = PidGains::new(0.0, 0.0, 23.0);
        let mut s = PidState::new(T);
        assert_abs_diff_eq!(pid_step(1.0, &g, &mut s), 8214.285714285714, epsilon = 1e-9);
        assert_eq!(pid_step(1.0, &g, &mut s), 0.0);
    }

    #[test]
    fn reset_zeroes_memories() {
        let mut s = PidState::new(T);
        pid_step(3.0, &GainSet::TESTBED.roll, &mut s);
        s.reset();
        assert_eq!((s.error_sum, s.prev_error, s.period), (0.0, 0.0, T));
    }

    #[test]
    fn roll_loop_first_tick_from_rest() {
        let g = GainSet::TESTBED.roll;
        let mut s = PidState::new(T);
        let u = roll_loop(5f64.to_radians(), 0.0, &g, &mut s);
        let by_hand = 3.3 * 5.0 + 0.030 * 0.0028 * 5.0 + (23.0 / 0.0028) * 5.0;
        assert_abs_diff_eq!(u, by_hand, epsilon = 1e-8);
        let mut s = PidState::new(T);
        assert_eq!(yaw_loop(0.0, 0.0, &GainSet::TESTBED.yaw, &mut s), 0.0);
    }

    #[test]
    fn altitude_examples() {
        let g = PidGains::new(0.5, 0.0, 0.0);
        let mut s = PidState::new(T);
        assert_eq!(altitude_loop(2.0, 2.0, &g, &mut s, true), 0.0);
        assert_eq!(altitude_loop(1.0, 0.0, &g, &mut s, true), 0.5);
        assert_eq!(altitude_loop(5.0, 0.0, &g, &mut s, false), 0.0);
    }

    #[test]
    fn mixer_examples() {
        let tilt_max = ActuatorLimits::default().tilt_max;
        let m = mixer(&AxisOutputs::default(), &neutral(0.5), tilt_max);
        assert_eq!(
            (m.throttle_r, m.throttle_l, m.servo_r, m.servo_l),
            (0.5, 0.5, 0.0, 0.0)
        );

        let m = mixer(
            &AxisOutputs {
                roll: 0.1,
                ..Default::default()
            },
            &neutral(0.5),
            tilt_max,
        );
        assert_abs_diff_eq!(m.throttle_r, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.throttle_l, 0.6, epsilon = 1e-15);

        let m = mixer(
            &AxisOutputs {
                yaw: 0.1,
                ..Default::default()
            },
            &neutral(0.5),
            tilt_max,
        );
        assert_eq!((m.servo_r, m.servo_l), (0.1, -0.1));
        let limits = ActuatorLimits::default();
        let u = control_vector(&mixer_to_command(&m, &limits), &BicopterParams::default());
        assert_eq!(u.u3, 0.0);
        assert!(u.u4 != 0.0);
    }

    #[test]
    fn mixer_saturates_with_flags() {
        let m = mixer(
            &AxisOutputs {
                roll: 0.8,
                pitch: 2.0,
                ..Default::default()
            },
            &neutral(0.5),
            0.5,
        );
        assert_eq!((m.throttle_r, m.throttle_l), (0.0, 1.0));
        assert_eq!((m.servo_r, m.servo_l), (0.5, 0.5));
        for f in [
            SaturationFlags::THROTTLE_R,
            SaturationFlags::THROTTLE_L,
            SaturationFlags::SERVO_R,
            SaturationFlags::SERVO_L,
        ] {
            assert!(m.saturation.contains(f));
        }
    }

    #[test]
    fn throttle_map() {
        assert_eq!(throttle_to_omega(0.0, 10.0), 0.0);
        assert_eq!(throttle_to_omega(1.0, 10.0), 10.0);
        let p = BicopterParams::default();
        let limits = ActuatorLimits::default();
        let w = throttle_to_omega(hover_throttle(&p, &limits), limits.omega_max);
        assert_abs_diff_eq!(
            2.0 * p.thrust_coefficient * w * w,
            p.weight(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn controller_matches_pid_step_without_extras() {
        let g = GainSet::TESTBED.roll;
        let mut c = PidController::new(g, T);
        let mut s = PidState::new(T);
        for k in 0..100 {
            let e = (k as f64 * 0.37).sin();
            assert_eq!(c.update(e, e).0, pid_step(e, &g, &mut s));
        }
    }

    #[test]
    fn derivative_on_measurement_skips_setpoint_kick() {
        let g = PidGains::new(0.0, 0.0, 1.0);
        let mut c = PidController::new(g, T);
        c.derivative_on_measurement = true;
        // measurement constant at 0, reference steps: error jumps but output stays 0
        assert_eq!(c.update(0.0, 0.0).0, 0.0);
        assert_eq!(c.update(-5.0, 0.0).0, 0.0);
    }
}
