//! PD gain synthesis by pole placement on the per-axis double integrator
//! `Θ(s)/U(s) = b/s²`.
//!
//! With `u = Kp e + Kd ė` the closed loop is
//! `(b Kd s + b Kp) / (s² + b Kd s + b Kp)`, so matching a desired
//! `s² + c₁ s + c₀` gives `Kd = c₁/b` and `Kp = c₀/b`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::Axis;
use crate::dynamics::BicopterParams;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleIntegratorPlant {
    /// rad/s² per unit input.
    pub gain: f64,
}

impl DoubleIntegratorPlant {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::param(
                "plant gain",
                format!("must be positive, got {gain}"),
            ));
        }
        Ok(Self { gain })
    }

    /// State-space `(A, B)` with `x₁ = angle`, `x₂ = rate`.
    pub fn state_space(&self) -> ([[f64; 2]; 2], [f64; 2]) {
        ([[0.0, 1.0], [0.0, 0.0]], [0.0, self.gain])
    }
}

/// Roll `L/Ixx`, pitch `h/Iyy`, yaw `L/Izz`.
pub fn plant_from_params(p: &BicopterParams, axis: Axis) -> Result<DoubleIntegratorPlant> {
    p.validate()?;
    let gain = match axis {
        Axis::Roll => p.arm_length / p.ixx,
        Axis::Pitch => p.rotor_height / p.iyy,
        Axis::Yaw => p.arm_length / p.izz,
    };
    DoubleIntegratorPlant::new(gain)
}

/// Target closed-loop characteristic polynomial `s² + c₁ s + c₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesiredCharacteristic {
    /// `c₁ = 2ζωₙ`, `c₀ = ωₙ²`.
    Damping {
        zeta: f64,
        omega_n: f64,
    },
    Coefficients {
        c1: f64,
        c0: f64,
    },
}

impl DesiredCharacteristic {
    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            DesiredCharacteristic::Damping { zeta, omega_n } => {
                (2.0 * zeta * omega_n, omega_n * omega_n)
            }
            DesiredCharacteristic::Coefficients { c1, c0 } => (c1, c0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DesiredCharacteristic::Damping { zeta, omega_n } = *self {
            if !(zeta > 0.0) || !(omega_n > 0.0) {
                return Err(Error::param(
                    "characteristic",
                    "zeta and omega_n must be positive",
                ));
            }
        }
        let (c1, c0) = self.coefficients();
        if !(c1 > 0.0 && c0 > 0.0 && c1.is_finite() && c0.is_finite()) {
            return Err(Error::Unstable { c1, c0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

pub fn gains_from_characteristic(
    plant: &DoubleIntegratorPlant,
    want: &DesiredCharacteristic,
) -> Result<PdGains> {
    want.validate()?;
    let (c1, c0) = want.coefficients();
    Ok(PdGains {
        kp: c0 / plant.gain,
        kd: c1 / plant.gain,
    })
}

/// Closed-loop characteristic coefficients `(c₁, c₀)` read off the CLTF denominator.
pub fn char_poly_from_gains(plant: &DoubleIntegratorPlant, kp: f64, kd: f64) -> (f64, f64) {
    (plant.gain * kd, plant.gain * kp)
}

/// The same polynomial reached through state feedback `u = −[K₁ K₂] x`:
/// `det(sI − (A − BK)) = s² − tr(A−BK) s + det(A−BK)`.
pub fn char_poly_state_feedback(plant: &DoubleIntegratorPlant, k1: f64, k2: f64) -> (f64, f64) {
    let (a, b) = plant.state_space();
    let closed = [
        [a[0][0] - b[0] * k1, a[0][1] - b[0] * k2],
        [a[1][0] - b[1] * k1, a[1][1] - b[1] * k2],
    ];
    let trace = closed[0][0] + closed[1][1];
    let det = closed[0][0] * closed[1][1] - closed[0][1] * closed[1][0];
    (-trace, det)
}

/// Roots of `s² + c₁ s + c₀`, the root of larger magnitude first for real pairs.
pub fn poles(c1: f64, c0: f64) -> [Complex64; 2] {
    let disc = c1 * c1 - 4.0 * c0;
    if disc >= 0.0 {
        // cancellation-free form: q = −(c₁ + sign(c₁)√Δ)/2, roots q and c₀/q
        let sq = disc.sqrt();
        let q = -0.5 * (c1 + sq.copysign(if c1 == 0.0 { 1.0 } else { c1 }));
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q, 0.0), Complex64::new(c0 / q, 0.0)]
    } else {
        let re = -c1 / 2.0;
        let im = (-disc).sqrt() / 2.0;
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn ensure_hurwitz(c1: f64, c0: f64) -> Result<()> {
    if c1 > 0.0 && c0 > 0.0 {
        Ok(())
    } else {
        Err(Error::Unstable { c1, c0 })
    }
}

fn sample_times(duration: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::param(
            "dt",
            "duration must be non-negative and dt positive",
        ));
    }
    let n = (duration / dt).round() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

/// Unit-step response of the closed loop including its zero at `−Kp/Kd`,
/// evaluated by partial fractions. Returns `(t, y)` pairs at `t = k·dt`.
pub fn cltf_step_response(
    plant: &DoubleIntegratorPlant,
    kp: f64,
    kd: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let (c1, c0) = char_poly_from_gains(plant, kp, kd);
    ensure_hurwitz(c1, c0)?;
    let [p1, p2] = poles(c1, c0);
    let numerator = |s: Complex64| s * c1 + c0;

    let response: Box<dyn Fn(f64) -> f64> = if (p1 - p2).norm() <= 1e-9 * p1.norm().max(1.0) {
        // double root p: y = 1 + (−1 + (N(p)/p) t) e^{pt}
        let p = p1.re;
        let c = (c1 * p + c0) / p;
        Box::new(move |t| 1.0 + (-1.0 + c * t) * (p * t).exp())
    } else {
        // simple poles: y = 1 + Σ N(pᵢ) / (pᵢ (pᵢ − pⱼ)) e^{pᵢ t}
        let r1 = numerator(p1) / (p1 * (p1 - p2));
        let r2 = numerator(p2) / (p2 * (p2 - p1));
        Box::new(move |t| 1.0 + (r1 * (p1 * t).exp() + r2 * (p2 * t).exp()).re)
    };
    Ok(sample_times(duration, dt)?
        .into_iter()
        .map(|t| (t, response(t)))
        .collect())
}

/// Time-domain counterpart of [`cltf_step_response`]: RK4 on
/// `ẍ = b (Kp (1 − x) − Kd ẋ)`, started with the rate kick `ẋ(0⁺) = b Kd` that
/// the derivative of the reference step injects.
pub fn simulate_step_response(
    plant: &DoubleIntegratorPlant,
    kp: f64,
    kd: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let b = plant.gain;
    let times = sample_times(duration, dt)?;
    let mut x = [0.0, b * kd];
    let mut out = Vec::with_capacity(times.len());
    out.push((0.0, 0.0));
    for &t in &times[1..] {
        x = rk4_step(&x, dt, |s| [s[1], b * (kp * (1.0 - s[0]) - kd * s[1])]);
        out.push((t, x[0]));
    }
    Ok(out)
}

/// Everything the `tune` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub axis: Axis,
    pub plant_gain: f64,
    pub c1: f64,
    pub c0: f64,
    pub kp: f64,
    pub kd: f64,
    /// `[re, im]` pairs.
    pub poles: [[f64; 2]; 2],
}

pub fn tune(p: &BicopterParams, axis: Axis, want: &DesiredCharacteristic) -> Result<TuneResult> {
    let plant = plant_from_params(p, axis)?;
    let gains = gains_from_characteristic(&plant, want)?;
    let (c1, c0) = want.coefficients();
    let roots = poles(c1, c0);
    Ok(TuneResult {
        axis,
        plant_gain: plant.gain,
        c1,
        c0,
        kp: gains.kp,
        kd: gains.kd,
        poles: roots.map(|r| [r.re, r.im]),
    })
}

impl fmt::Display for TuneResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "axis={} b={:.4} c1={} c0={}",
            self.axis, self.plant_gain, self.c1, self.c0
        )?;
        writeln!(f, "K_p={:.4} K_d={:.4}", self.kp, self.kd)?;
        let pole = |[re, im]: [f64; 2]| {
            if im == 0.0 {
                format!("{re:.4}")
            } else {
                format!("{re:.4}{im:+.4}j")
            }
        };
        write!(f, "poles={} {}", pole(self.poles[0]), pole(self.poles[1]))
    }
}
