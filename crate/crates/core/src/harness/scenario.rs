//! Scenario files: a strict, versioned JSON description of one experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::EulerAngles;
use crate::control::{Axis, GainSet, OutputScale, PidGains};
use crate::dynamics::{ActuatorLimits, BicopterParams, LagConfig, Mode, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::harness::telemetry::RmseWindow;
use crate::harness::wind::WindSpec;
use crate::sensing::{EstimatorKind, NoiseModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Gain table by name (`testbed`, `flight`) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainsSpec {
    Preset(String),
    Explicit(GainSet),
}

impl GainsSpec {
    pub fn resolve(&self) -> Result<GainSet> {
        match self {
            GainsSpec::Preset(name) => GainSet::preset(name),
            GainsSpec::Explicit(g) => {
                g.validate()?;
                Ok(*g)
            }
        }
    }
}

/// Setpoint schedule entry; holds until the next entry's `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetpointEntry {
    pub t: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// Height above the start point, m (NED z reference is its negative).
    pub altitude_m: f64,
}

impl SetpointEntry {
    pub fn attitude(&self) -> EulerAngles {
        EulerAngles::from_degrees(self.roll_deg, self.pitch_deg, self.yaw_deg)
    }

    pub fn axis_deg(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Roll => self.roll_deg,
            Axis::Pitch => self.pitch_deg,
            Axis::Yaw => self.yaw_deg,
        }
    }

    pub fn set_axis_deg(&mut self, axis: Axis, deg: f64) {
        match axis {
            Axis::Roll => self.roll_deg = deg,
            Axis::Pitch => self.pitch_deg = deg,
            Axis::Yaw => self.yaw_deg = deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// deg/s
    pub rates_dps: [f64; 3],
    pub altitude_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    /// Gravity-correction gain of the quaternion estimator.
    pub fusion_gain: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            cutoff_hz: 5.0,
            fusion_gain: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorSpec {
    pub omega_max: f64,
    pub tilt_max_deg: f64,
    pub lag: LagConfig,
}

impl Default for ActuatorSpec {
    fn default() -> Self {
        let l = ActuatorLimits::default();
        Self {
            omega_max: l.omega_max,
            tilt_max_deg: l.tilt_max.to_degrees(),
            lag: LagConfig::default(),
        }
    }
}

impl ActuatorSpec {
    pub fn limits(&self) -> ActuatorLimits {
        ActuatorLimits {
            omega_max: self.omega_max,
            tilt_max: self.tilt_max_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    pub output_scale: OutputScale,
    /// Integral clamp as a fraction of each channel's actuator span; `null` disables it.
    pub windup_fraction: Option<f64>,
    pub derivative_on_measurement: bool,
    /// Collective throttle; hover throttle when absent.
    pub throttle_base: Option<f64>,
    pub center_servo_deg: f64,
    /// Used in free flight only; error in metres, output in throttle fraction.
    pub altitude_gains: PidGains,
    /// Clear integrator and derivative memory when gains change live.
    pub reset_on_gain_change: bool,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            output_scale: OutputScale::default(),
            windup_fraction: Some(0.25),
            derivative_on_measurement: false,
            throttle_base: None,
            center_servo_deg: 0.0,
            altitude_gains: PidGains::new(0.1, 0.02, 0.1),
            reset_on_gain_change: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_gains")]
    pub gains: GainsSpec,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub wind: WindSpec,
    #[serde(default = "default_schedule")]
    pub setpoints: Vec<SetpointEntry>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: BicopterParams,
    #[serde(default)]
    pub actuators: ActuatorSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub rmse_window: RmseWindow,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_gains() -> GainsSpec {
    GainsSpec::Preset("testbed".into())
}

fn default_schedule() -> Vec<SetpointEntry> {
    vec![SetpointEntry::default()]
}

impl Scenario {
    /// Level hover on the rig: no wind, default noise, testbed gains.
    pub fn new(mode: Mode, duration: f64) -> Self {
        Self {
            version: SCHEMA_VERSION,
            name: None,
            mode,
            duration,
            dt: DEFAULT_DT,
            gains: default_gains(),
            estimator: EstimatorKind::default(),
            filter: FilterSpec::default(),
            wind: WindSpec::default(),
            setpoints: default_schedule(),
            noise: NoiseModel::default(),
            initial: InitialState::default(),
            seed: 0,
            params: BicopterParams::default(),
            actuators: ActuatorSpec::default(),
            controller: ControllerSpec::default(),
            rmse_window: RmseWindow::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of ticks, `duration / dt` rounded to the nearest integer.
    pub fn ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported version {}, expected {SCHEMA_VERSION}",
                self.version
            ));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt > 0.0) || self.dt > self.duration {
            return bad(format!("dt must be in (0, duration], got {}", self.dt));
        }
        if self.setpoints.is_empty() {
            return bad("setpoint schedule is empty".into());
        }
        if self.setpoints.windows(2).any(|w| w[1].t < w[0].t) {
            return bad("setpoint times must be non-decreasing".into());
        }
        if self.setpoints.iter().any(|s| !s.t.is_finite()) {
            return bad("setpoint times must be finite".into());
        }
        if !(self.filter.cutoff_hz > 0.0) || !(self.filter.fusion_gain >= 0.0) {
            return bad("filter cutoff must be positive and fusion gain non-negative".into());
        }
        if !(self.actuators.omega_max > 0.0) || !(self.actuators.tilt_max_deg > 0.0) {
            return bad("actuator limits must be positive".into());
        }
        if let Some(f) = self.controller.windup_fraction {
            if !(f >= 0.0) {
                return bad(format!("windup_fraction must be non-negative, got {f}"));
            }
        }
        let i = &self.initial;
        let initial = [
            i.roll_deg,
            i.pitch_deg,
            i.yaw_deg,
            i.altitude_m,
            i.rates_dps[0],
            i.rates_dps[1],
            i.rates_dps[2],
        ];
        if initial.iter().any(|v| !v.is_finite()) {
            return bad("initial state must be finite".into());
        }
        if i.pitch_deg.abs() >= 90.0 {
            return bad(format!(
                "initial pitch must lie inside (-90, 90) degrees, got {}",
                i.pitch_deg
            ));
        }
        self.gains.resolve()?;
        self.controller.altitude_gains.validate()?;
        self.wind.validate()?;
        self.noise.validate()?;
        self.params.validate()?;
        Ok(())
    }

    /// Schedule entry active at time `t`.
    pub fn setpoint_at(&self, t: f64) -> SetpointEntry {
        let idx = self.setpoints.partition_point(|s| s.t <= t);
        self.setpoints[idx.saturating_sub(1)]
    }
}

/// Built-in scenarios.
pub const PRESET_NAMES: [&str; 4] = [
    "testbed-8kn",
    "testbed-9kn",
    "testbed-10kn",
    "flight-indoor",
];

/// Drag area used by the fan presets. The airframe default of 0.02 m² would
/// put several hundred rad/s² of pitch disturbance on the rig.
pub const PRESET_DRAG_AREA: f64 = 7.0e-5;
/// Gust spread relative to the mean fan speed.
pub const PRESET_TURBULENCE: f64 = 0.15;
pub const PRESET_GUST_TIME: f64 = 1.5;

pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "testbed-8kn" => "rig, 28 s, 8 kn head-on fan, testbed gains",
        "testbed-9kn" => "rig, 28 s, 9 kn head-on fan, testbed gains",
        "testbed-10kn" => "rig, 28 s, 10 kn head-on fan, testbed gains",
        "flight-indoor" => "free flight, 28 s, still air, flight gains",
        _ => return None,
    })
}

fn fan(knots: f64) -> WindSpec {
    WindSpec {
        speed_knots: knots,
        gust_std: PRESET_TURBULENCE * knots * crate::harness::wind::KNOT_TO_MPS,
        gust_correlation_time: PRESET_GUST_TIME,
        drag_area: PRESET_DRAG_AREA,
        ..WindSpec::default()
    }
}

pub fn preset(name: &str) -> Result<Scenario> {
    let mut s = Scenario::new(Mode::Testbed, 28.0);
    s.name = Some(name.to_string());
    s.seed = 1;
    match name {
        "testbed-8kn" => s.wind = fan(8.0),
        "testbed-9kn" => s.wind = fan(9.0),
        "testbed-10kn" => s.wind = fan(10.0),
        "flight-indoor" => {
            s.mode = Mode::Freeflight;
            s.gains = GainsSpec::Preset("flight".into());
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_span_28_seconds() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.ticks(), 10_000, "{name}");
            assert!(preset_description(name).is_some());
        }
        assert!(matches!(
            preset("testbed-11kn"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = preset("testbed-9kn").unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::from_json(r#"{"version": 1, "duration": 1.0}"#).unwrap();
        assert_eq!(s.dt, DEFAULT_DT);
        assert_eq!(s.mode, Mode::Testbed);
        assert_eq!(s.gains.resolve().unwrap(), GainSet::TESTBED);
        assert_eq!(s.ticks(), 357);
    }

    #[test]
    fn explicit_gains_parse() {
        let text = r#"{"version": 1, "duration": 1.0, "gains": {
            "roll": {"kp": 1, "ki": 0, "kd": 2},
            "pitch": {"kp": 1, "ki": 0, "kd": 2},
            "yaw": {"kp": 1, "ki": 0, "kd": 0}}}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(
            s.gains.resolve().unwrap().roll,
            PidGains::new(1.0, 0.0, 2.0)
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"version": 2, "duration": 1.0}"#,
            r#"{"version": 1, "duration": 0.0}"#,
            r#"{"version": 1, "duration": 1.0, "colour": "red"}"#,
            r#"{"version": 1, "duration": 1.0, "gains": "aggressive"}"#,
            r#"{"version": 1, "duration": 1.0, "setpoints": [{"t": 1.0}, {"t": 0.5}]}"#,
            r#"{"version": 1, "duration": 1.0, "wind": {"speed_knots": -3}}"#,
            r#"{"version": 1, "duration": 1.0, "estimator": "kalman"}"#,
        ];
        for c in cases {
            let err = Scenario::from_json(c).unwrap_err();
            assert!(err.is_config_error(), "{c}: {err}");
        }
    }

    #[test]
    fn schedule_lookup_holds_last_entry() {
        let mut s = Scenario::new(Mode::Testbed, 10.0);
        s.setpoints = vec![
            SetpointEntry {
                t: 0.0,
                ..Default::default()
            },
            SetpointEntry {
                t: 2.0,
                roll_deg: 5.0,
                ..Default::default()
            },
            SetpointEntry {
                t: 4.0,
                roll_deg: -5.0,
                ..Default::default()
            },
        ];
        assert_eq!(s.setpoint_at(1.9).roll_deg, 0.0);
        assert_eq!(s.setpoint_at(2.0).roll_deg, 5.0);
        assert_eq!(s.setpoint_at(9.0).roll_deg, -5.0);
    }
}
