//! The closed-loop simulation: sensors, estimator, controllers, mixer,
//! actuators, wind and plant, advanced one control tick at a time.

use serde::{Deserialize, Serialize};

use crate::attitude::{euler_to_quat, EulerAngles};
use crate::control::{
    attitude_error, hover_throttle, mixer, mixer_to_command, Axis, AxisOutputs, GainSet,
    PidController, PidGains, Setpoints,
};
use crate::dynamics::{
    accelerations_with, control_vector, saturate, step, Accelerations, ActuatorCommand,
    ActuatorLag, ActuatorLimits, BicopterParams, Disturbance, Mode, RigidBodyState,
    SaturationFlags,
};
use crate::error::{Error, Result};
use crate::harness::scenario::{Scenario, SetpointEntry};
use crate::harness::telemetry::{RmseReport, TelemetryRecord};
use crate::harness::wind::{pivot_torque, WindModel};
use crate::sensing::{Estimator, FilterConfig, SimulatedImu};

const IMU_STREAM: u64 = 0x1;
const WIND_STREAM: u64 = 0x2;

/// Independent RNG seed for one consumer of the scenario seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Live overrides of the scheduled setpoints, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SetpointOverride {
    pub roll: Option<f64>,
    pub pitch: Option<f64>,
    pub yaw: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    params: BicopterParams,
    limits: ActuatorLimits,
    mode: Mode,
    dt: f64,
    state: RigidBodyState,
    last_acc: Accelerations,
    lag: ActuatorLag,
    imu: SimulatedImu,
    estimator: Estimator,
    wind: WindModel,
    gains: GainSet,
    pids: [PidController; 3],
    altitude: PidController,
    overrides: SetpointOverride,
    throttle_base: f64,
    tick: u64,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let s = scenario;
        let params = s.params;
        let limits = s.actuators.limits();
        let dt = s.dt;
        let gains = s.gains.resolve()?;

        let init = &s.initial;
        let attitude = EulerAngles::from_degrees(init.roll_deg, init.pitch_deg, init.yaw_deg);
        let mut state = RigidBodyState::at_attitude(attitude);
        state.rates = init.rates_dps.map(f64::to_radians);
        if s.mode == Mode::Freeflight {
            state.position[2] = -init.altitude_m;
        }

        let hover = hover_throttle(&params, &limits);
        let throttle_base = s.controller.throttle_base.unwrap_or(hover);
        if !(0.0..=1.0).contains(&throttle_base) {
            return Err(Error::Scenario(format!(
                "throttle base {throttle_base:.3} is outside [0, 1]; raise actuators.omega_max"
            )));
        }

        let filter = FilterConfig::new(s.filter.cutoff_hz, dt)?;
        let mut noise = s.noise;
        noise.seed = stream_seed(s.seed ^ noise.seed, IMU_STREAM);

        let scale = s.controller.output_scale;
        let tilt_span = 2.0 * limits.tilt_max;
        let clamp_for = |axis: Axis| {
            let span = if axis == Axis::Roll { 1.0 } else { tilt_span };
            let k = scale.axis(axis);
            match s.controller.windup_fraction {
                Some(f) if k > 0.0 => Some(f * span / k),
                _ => None,
            }
        };
        let pid = |axis: Axis| {
            let mut c =
                PidController::new(*gains.axis(axis), dt).with_integral_limit(clamp_for(axis));
            c.derivative_on_measurement = s.controller.derivative_on_measurement;
            c
        };
        let mut altitude = PidController::new(s.controller.altitude_gains, dt)
            .with_integral_limit(s.controller.windup_fraction);
        altitude.derivative_on_measurement = s.controller.derivative_on_measurement;

        // start with the rotors spinning at the operating point
        let start = mixer_to_command(
            &mixer(
                &AxisOutputs::default(),
                &Self::setpoints(s, throttle_base, 0.0, &SetpointOverride::default()),
                limits.tilt_max,
            ),
            &limits,
        );
        let u = control_vector(&start, &params);
        let mut last_acc = accelerations_with(&state, &u, &params, &Disturbance::default());
        if s.mode == Mode::Testbed {
            last_acc.linear = [0.0; 3];
        }

        Ok(Self {
            scenario: s.clone(),
            params,
            limits,
            mode: s.mode,
            dt,
            state,
            last_acc,
            lag: ActuatorLag::new(s.actuators.lag, start),
            imu: SimulatedImu::new(noise),
            estimator: Estimator::new(s.estimator, filter, s.filter.fusion_gain, attitude),
            wind: WindModel::new(s.wind, stream_seed(s.seed, WIND_STREAM)),
            gains,
            pids: [pid(Axis::Roll), pid(Axis::Pitch), pid(Axis::Yaw)],
            altitude,
            overrides: SetpointOverride::default(),
            throttle_base,
            tick: 0,
        })
    }

    fn setpoints(s: &Scenario, throttle_base: f64, t: f64, ov: &SetpointOverride) -> Setpoints {
        let mut e: SetpointEntry = s.setpoint_at(t);
        if let Some(v) = ov.roll {
            e.roll_deg = v;
        }
        if let Some(v) = ov.pitch {
            e.pitch_deg = v;
        }
        if let Some(v) = ov.yaw {
            e.yaw_deg = v;
        }
        Setpoints {
            attitude: e.attitude(),
            altitude: -e.altitude_m,
            throttle_base,
            center_servo: s.controller.center_servo_deg.to_radians(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Index of the next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn gains(&self) -> GainSet {
        self.gains
    }

    pub fn wind_knots(&self) -> f64 {
        self.wind.spec.speed_knots
    }

    pub fn overrides(&self) -> SetpointOverride {
        self.overrides
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.scenario.ticks()
    }

    pub fn set_gains(&mut self, axis: Axis, gains: PidGains) -> Result<()> {
        gains.validate()?;
        *self.gains.axis_mut(axis) = gains;
        let pid = &mut self.pids[axis as usize];
        pid.gains = gains;
        if self.scenario.controller.reset_on_gain_change {
            pid.reset();
        }
        Ok(())
    }

    pub fn set_wind_knots(&mut self, knots: f64) -> Result<()> {
        if !(knots >= 0.0) || !knots.is_finite() {
            return Err(Error::param(
                "knots",
                format!("must be finite and non-negative, got {knots}"),
            ));
        }
        self.wind.spec.speed_knots = knots;
        Ok(())
    }

    pub fn set_setpoint(&mut self, axis: Axis, deg: f64) -> Result<()> {
        if !deg.is_finite() {
            return Err(Error::param("deg", "must be finite"));
        }
        let slot = match axis {
            Axis::Roll => &mut self.overrides.roll,
            Axis::Pitch => &mut self.overrides.pitch,
            Axis::Yaw => &mut self.overrides.yaw,
        };
        *slot = Some(deg);
        Ok(())
    }

    /// Advance one control tick and return its telemetry row.
    ///
    /// The row holds the truth at the start of the tick together with the
    /// estimate, commands and wind computed during it.
    pub fn step(&mut self) -> Result<TelemetryRecord> {
        let k = self.tick;
        let t = k as f64 * self.dt;
        let sp = Self::setpoints(&self.scenario, self.throttle_base, t, &self.overrides);
        let truth = self.state.attitude;

        let sample = self
            .imu
            .sample(&self.state, &self.last_acc, &self.params, t);
        let est = self.estimator.update(&sample, &truth);

        let scale = self.scenario.controller.output_scale;
        let mut raw = [0.0; 3];
        let mut integrator_clamped = false;
        let measured = [est.roll, est.pitch, est.yaw];
        let reference = [sp.attitude.roll, sp.attitude.pitch, sp.attitude.yaw];
        for axis in Axis::ALL {
            let i = axis as usize;
            let e = attitude_error(measured[i], reference[i], axis).to_degrees();
            let (u, clamped) = self.pids[i].update(e, measured[i].to_degrees());
            raw[i] = u;
            integrator_clamped |= clamped;
        }
        let u_alt = if self.mode == Mode::Freeflight {
            let z = self.state.position[2];
            let (u, clamped) = self.altitude.update(z - sp.altitude, z);
            integrator_clamped |= clamped;
            u
        } else {
            0.0
        };

        let outputs = AxisOutputs {
            roll: raw[0] * scale.roll,
            pitch: raw[1] * scale.pitch,
            yaw: raw[2] * scale.yaw,
            altitude: u_alt,
        };
        let mixed = mixer(&outputs, &sp, self.limits.tilt_max);
        let (cmd, sat) = saturate(&mixer_to_command(&mixed, &self.limits), &self.limits);
        let mut flags: SaturationFlags = mixed.saturation | sat;
        if integrator_clamped {
            flags |= SaturationFlags::INTEGRATOR;
        }
        let applied: ActuatorCommand = self.lag.update(&cmd, self.dt);

        let wind = self.wind.sample(self.dt);
        let disturbance = match self.mode {
            Mode::Testbed => Disturbance {
                force: [0.0; 3],
                torque: pivot_torque(wind.force, euler_to_quat(truth), self.params.rotor_height),
            },
            Mode::Freeflight => Disturbance {
                force: wind.force,
                torque: [0.0; 3],
            },
        };

        let next = step(
            &self.state,
            &applied,
            &self.params,
            self.dt,
            self.mode,
            &disturbance,
        )
        .map_err(|_| Error::Diverged { tick: k })?;
        let u = control_vector(&applied, &self.params);
        self.last_acc = accelerations_with(&next, &u, &self.params, &disturbance);
        if self.mode == Mode::Testbed {
            // the gimbal holds the pivot still, so the sensor only feels gravity
            self.last_acc.linear = [0.0; 3];
        }

        let truth_deg = truth.to_degrees();
        let est_deg = est.to_degrees();
        let sp_deg = sp.attitude.to_degrees();
        let record = TelemetryRecord {
            k,
            t,
            phi_true: truth_deg[0],
            theta_true: truth_deg[1],
            psi_true: truth_deg[2],
            phi_est: est_deg[0],
            theta_est: est_deg[1],
            psi_est: est_deg[2],
            phi_sp: sp_deg[0],
            theta_sp: sp_deg[1],
            psi_sp: sp_deg[2],
            u_roll: raw[0],
            u_pitch: raw[1],
            u_yaw: raw[2],
            u_alt,
            thr_r: mixed.throttle_r,
            thr_l: mixed.throttle_l,
            srv_r: mixed.servo_r.to_degrees(),
            srv_l: mixed.servo_l.to_degrees(),
            wind_mps: wind.speed,
            sat_flags: flags,
            position: self.state.position,
        };
        self.state = next;
        self.tick += 1;
        Ok(record)
    }
}

/// Everything a batch run produced. On divergence `records` holds the ticks
/// completed before the failure.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub report: Option<RmseReport>,
    pub diverged_at: Option<u64>,
}

/// Run a scenario to completion. Only configuration problems are returned as
/// errors; divergence is reported in the output.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    let mut sim = Simulation::new(scenario)?;
    let n = scenario.ticks();
    let mut records = Vec::with_capacity(n as usize);
    let mut diverged_at = None;
    while !sim.is_finished() {
        match sim.step() {
            Ok(r) => records.push(r),
            Err(Error::Diverged { tick }) => {
                diverged_at = Some(tick);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let report = RmseReport::from_records(
        &records,
        scenario.rmse_window,
        scenario.name.clone(),
        scenario.seed,
    )
    .ok();
    Ok(RunOutput {
        records,
        report,
        diverged_at,
    })
}
