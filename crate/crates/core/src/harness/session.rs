//! Live session state machine and the JSON message protocol spoken over the
//! serve channel. Transport lives elsewhere; this module only decides what a
//! command does and what a frame contains.

use serde::{Deserialize, Serialize};

use crate::control::{Axis, GainSet, PidGains};
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harness::sim::Simulation;
use crate::harness::telemetry::TelemetryRecord;

pub const DEFAULT_DECIMATION: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetGains {
        axis: Axis,
        kp: f64,
        ki: f64,
        kd: f64,
    },
    SetWind {
        knots: f64,
    },
    SetSetpoint {
        axis: Axis,
        deg: f64,
    },
    Pause,
    Resume,
    Reset,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetGains { .. } => "set_gains",
            Command::SetWind { .. } => "set_wind",
            Command::SetSetpoint { .. } => "set_setpoint",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Reset => "reset",
        }
    }
}

/// Inbound message: a command plus an optional client correlation id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub command: Command,
}

impl ClientMessage {
    pub fn new(command: Command) -> Self {
        Self { id: None, command }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Snapshot broadcast to every subscriber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    /// Ticks completed so far.
    pub tick: u64,
    pub paused: bool,
    pub gains: GainSet,
    pub wind_knots: f64,
    /// Latest row; absent before the first tick.
    pub record: Option<TelemetryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ServerMessage {
    Telemetry(TelemetryFrame),
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        command: String,
        /// Tick index that was next to run when the command was dequeued.
        received_tick: u64,
        /// First tick computed with the command applied.
        effect_tick: u64,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// One simulation plus pause state and frame decimation.
#[derive(Debug, Clone)]
pub struct Session {
    scenario: Scenario,
    sim: Simulation,
    paused: bool,
    decimation: u32,
    last: Option<TelemetryRecord>,
}

impl Session {
    pub fn new(scenario: Scenario, decimation: u32) -> Result<Self> {
        if decimation == 0 {
            return Err(Error::param("decimation", "must be at least 1"));
        }
        let sim = Simulation::new(&scenario)?;
        Ok(Self {
            scenario,
            sim,
            paused: false,
            decimation,
            last: None,
        })
    }

    pub fn tick(&self) -> u64 {
        self.sim.tick()
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn frame(&self) -> TelemetryFrame {
        TelemetryFrame {
            tick: self.sim.tick(),
            paused: self.paused,
            gains: self.sim.gains(),
            wind_knots: self.sim.wind_knots(),
            record: self.last,
        }
    }

    /// Apply a command between ticks and build its reply.
    pub fn apply(&mut self, msg: ClientMessage) -> ServerMessage {
        let received_tick = self.sim.tick();
        let id = msg.id;
        let outcome = match msg.command {
            Command::SetGains { axis, kp, ki, kd } => {
                self.sim.set_gains(axis, PidGains::new(kp, ki, kd))
            }
            Command::SetWind { knots } => self.sim.set_wind_knots(knots),
            Command::SetSetpoint { axis, deg } => self.sim.set_setpoint(axis, deg),
            Command::Pause => {
                self.paused = true;
                Ok(())
            }
            Command::Resume => {
                self.paused = false;
                Ok(())
            }
            Command::Reset => self.reset(),
        };
        match outcome {
            Ok(()) => ServerMessage::Ack {
                id,
                command: msg.command.name().to_string(),
                received_tick,
                effect_tick: self.sim.tick(),
            },
            Err(e) => ServerMessage::Error {
                id,
                message: e.to_string(),
            },
        }
    }

    fn reset(&mut self) -> Result<()> {
        self.sim = Simulation::new(&self.scenario)?;
        self.last = None;
        Ok(())
    }

    /// Run one tick unless paused. Returns a frame when the tick lands on the
    /// decimation grid. A diverged session pauses itself and reports the error.
    pub fn advance(&mut self) -> Result<Option<TelemetryFrame>> {
        if self.paused {
            return Ok(None);
        }
        match self.sim.step() {
            Ok(r) => {
                self.last = Some(r);
                Ok(self
                    .sim
                    .tick()
                    .is_multiple_of(self.decimation as u64)
                    .then(|| self.frame()))
            }
            Err(e) => {
                self.paused = true;
                Err(e)
            }
        }
    }
}
