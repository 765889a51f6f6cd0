//! Software-in-the-loop simulation of a tilt-rotor bicopter: attitude maths,
//! rigid-body dynamics, IMU simulation and fusion, PID control with a
//! throttle/servo mixer, pole-placement tuning and a scenario harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attitude;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod integrate;
pub mod sensing;
pub mod tuning;

pub use error::{Error, Result};
