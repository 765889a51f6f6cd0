//! Acceptance gate. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bicopter_core::attitude::{
    euler_to_quat, quat_to_euler, quat_to_gravity, wrap_angle, EulerAngles, Quaternion,
};
use bicopter_core::control::{pid_step, Axis, GainSet, PidGains, PidState};
use bicopter_core::dynamics::{
    accelerations, allocate, control_vector, step, ActuatorCommand, ActuatorLimits, BicopterParams,
    ControlVector, Disturbance, Mode, RigidBodyState, DEFAULT_DT,
};
use bicopter_core::harness::telemetry::csv_string;
use bicopter_core::harness::{preset, run_scenario, Scenario, PRESET_NAMES};
use bicopter_core::sensing::{
    accel_to_angles, alpha_from_cutoff, cf_update, EstimatorState, FilterConfig, HighPass,
    ImuSample, LowPass,
};
use bicopter_core::tuning::{
    cltf_step_response, plant_from_params, poles, simulate_step_response, tune,
    DesiredCharacteristic,
};
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pole_placement() -> Outcome {
    let start = Instant::now();
    let want = DesiredCharacteristic::Coefficients {
        c1: 331.0,
        c0: 1950.0,
    };
    let r = tune(&BicopterParams::default(), Axis::Roll, &want).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let printed = r.to_string();
    check(
        (r.kp - 1.0053).abs() <= 1e-3
            && (r.kd - 0.1706).abs() <= 1e-3
            && printed.contains("K_p=1.0053 K_d=0.1706")
            && elapsed < Duration::from_secs(1),
        format!("K_p={:.6} K_d={:.6} in {elapsed:?}", r.kp, r.kd),
    )
}

fn plant_gains() -> Outcome {
    let p = BicopterParams::default();
    let b = |axis| {
        plant_from_params(&p, axis)
            .map(|pl| pl.gain)
            .map_err(|e| e.to_string())
    };
    let (roll, pitch, yaw) = (b(Axis::Roll)?, b(Axis::Pitch)?, b(Axis::Yaw)?);
    check(
        (roll - 1939.7).abs() <= 0.5
            && (pitch - 1029.4).abs() <= 0.5
            && (yaw - 2142.9).abs() <= 0.5,
        format!("roll {roll:.3} pitch {pitch:.3} yaw {yaw:.3}"),
    )
}

fn pole_check() -> Outcome {
    let [p1, p2] = poles(331.0, 1950.0);
    let exact = p1.re == -325.0 && p2.re == -6.0 && p1.im == 0.0 && p2.im == 0.0;

    let r = tune(
        &BicopterParams::default(),
        Axis::Roll,
        &DesiredCharacteristic::Coefficients {
            c1: 331.0,
            c0: 1950.0,
        },
    )
    .map_err(|e| e.to_string())?;
    let plant =
        plant_from_params(&BicopterParams::default(), Axis::Roll).map_err(|e| e.to_string())?;
    let analytic =
        cltf_step_response(&plant, r.kp, r.kd, 1.0, DEFAULT_DT).map_err(|e| e.to_string())?;
    let simulated =
        simulate_step_response(&plant, r.kp, r.kd, 1.0, DEFAULT_DT).map_err(|e| e.to_string())?;
    let (worst, at) = analytic
        .iter()
        .zip(&simulated)
        .map(|((t, a), (_, s))| ((a - s).abs(), *t))
        .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    check(
        exact && worst <= 1e-3,
        format!(
            "poles {} and {}; max |RK4 − CLTF| = {worst:.3e} at t = {at:.4} s (limit 1e-3)",
            p1.re, p2.re
        ),
    )
}

fn hover() -> Outcome {
    let p = BicopterParams::default();
    let u = ControlVector {
        u1: p.mass * p.gravity,
        u2: 0.0,
        u3: 0.0,
        u4: 0.0,
    };
    let a = accelerations(&RigidBodyState::default(), &u, &p);
    let worst_acc = a
        .linear
        .iter()
        .chain(&a.angular)
        .map(|v| v.abs())
        .fold(0.0, f64::max);

    let cmd = ActuatorCommand::hover(&p);
    let u1 = control_vector(&cmd, &p).u1;
    let mut s = RigidBodyState::default();
    for _ in 0..1000 {
        s = step(
            &s,
            &cmd,
            &p,
            DEFAULT_DT,
            Mode::Freeflight,
            &Disturbance::default(),
        )
        .map_err(|e| e.to_string())?;
    }
    let a = s.attitude;
    let drift = s
        .position
        .iter()
        .chain(&s.velocity)
        .chain(&[a.roll, a.pitch, a.yaw])
        .chain(&s.rates)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    check(
        (u.u1 - 7.11225).abs() < 1e-12
            && (u1 - 7.11225).abs() < 1e-9
            && worst_acc < 1e-12
            && drift < 1e-9,
        format!(
            "u1 = {:.5} N, max |accel| = {worst_acc:.1e}, 1000-tick drift = {drift:.1e}",
            u.u1
        ),
    )
}

/// Gravity and ZYX angles straight from the rotation matrix.
fn matrix_oracle(q: &Quaternion) -> ([f64; 3], [f64; 3]) {
    let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q.w, q.x, q.y, q.z));
    let r: Matrix3<f64> = *uq.to_rotation_matrix().matrix();
    let g = r.transpose() * Vector3::new(0.0, 0.0, 1.0);
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    ([g.x, g.y, g.z], [roll, pitch, yaw])
}

fn quaternion_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_g, mut worst_e, mut worst_rt, mut compared) = (0.0f64, 0.0f64, 0.0f64, 0);
    for _ in 0..1000 {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let q = Quaternion {
            w: v[0] / n,
            x: v[1] / n,
            y: v[2] / n,
            z: v[3] / n,
        };
        let (g_ref, e_ref) = matrix_oracle(&q);
        let g = quat_to_gravity(q).map_err(|e| e.to_string())?.as_array();
        for i in 0..3 {
            worst_g = worst_g.max((g[i] - g_ref[i]).abs());
        }
        if e_ref[1].abs() > 85f64.to_radians() {
            continue;
        }
        compared += 1;
        let e = quat_to_euler(q).map_err(|e| e.to_string())?.angles;
        for (got, want) in [e.roll, e.pitch, e.yaw].iter().zip(e_ref) {
            worst_e = worst_e.max(wrap_angle(got - want).abs());
        }
        let back = euler_to_quat(e);
        let same = (back.w - q.w)
            .abs()
            .max((back.x - q.x).abs())
            .max((back.y - q.y).abs())
            .max((back.z - q.z).abs());
        let flip = (back.w + q.w)
            .abs()
            .max((back.x + q.x).abs())
            .max((back.y + q.y).abs())
            .max((back.z + q.z).abs());
        let again = quat_to_euler(back).map_err(|e| e.to_string())?.angles;
        let angle_rt = [
            again.roll - e.roll,
            again.pitch - e.pitch,
            again.yaw - e.yaw,
        ]
        .iter()
        .map(|d| wrap_angle(*d).abs())
        .fold(0.0, f64::max);
        worst_rt = worst_rt.max(same.min(flip)).max(angle_rt);
    }
    check(
        worst_g < 1e-9 && worst_e < 1e-9 && worst_rt < 1e-9,
        format!("gravity {worst_g:.1e}, euler {worst_e:.1e} ({compared} compared), round trip {worst_rt:.1e}"),
    )
}

fn filters() -> Outcome {
    // 1 / (2π·5) = 0.0318309886…; 0.0028 / (0.0318309886 + 0.0028) = 0.0808524…
    const ALPHA_ORACLE: f64 = 0.080852442;
    const ALPHA_QUOTED: f64 = 0.080854;
    let alpha = alpha_from_cutoff(5.0, DEFAULT_DT).map_err(|e| e.to_string())?;

    let mut lp = LowPass { alpha, y: 0.0 };
    let mut hp = HighPass {
        alpha: 1.0 - alpha,
        x: 0.0,
        y: 0.0,
    };
    let (mut lpo, mut hpo) = (0.0, 0.0);
    for _ in 0..1000 {
        lpo = lp.update(2.5);
        hpo = hp.update(2.5);
    }

    let prev = EstimatorState::new(EulerAngles::new(0.1, -0.2, 0.3));
    let sample = ImuSample {
        accel: [0.2, -0.3, 0.9],
        gyro: [10.0, -20.0, 5.0],
        t: 0.0,
    };
    let (acc_roll, acc_pitch) = accel_to_angles(sample.accel).map_err(|e| e.to_string())?;
    let all_accel = cf_update(
        &prev,
        &sample,
        &FilterConfig::with_alpha(1.0, DEFAULT_DT).map_err(|e| e.to_string())?,
    );
    let all_gyro = cf_update(
        &prev,
        &sample,
        &FilterConfig::with_alpha(0.0, DEFAULT_DT).map_err(|e| e.to_string())?,
    );
    let collapse = all_accel.angles.roll == acc_roll
        && all_accel.angles.pitch == acc_pitch
        && all_gyro.angles.roll == 0.1 + 10f64.to_radians() * DEFAULT_DT
        && all_gyro.angles.pitch == -0.2 + (-20f64).to_radians() * DEFAULT_DT;

    let ok = (alpha - ALPHA_ORACLE).abs() <= 1e-6
        && (lpo - 2.5f64).abs() < 1e-12
        && hpo.abs() < 1e-12
        && collapse;
    check(
        ok,
        format!(
            "alpha {alpha:.9} (recomputed 0.080852442; quoted 0.080854 is off by {:.1e}), LPF {lpo:.12}, HPF {hpo:.1e}, CF collapse {collapse}",
            (alpha - ALPHA_QUOTED).abs()
        ),
    )
}

fn pid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let g = PidGains::new(
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..50.0),
        );
        let t = rng.random_range(0.0005..0.02);
        let mut state = PidState::new(t);
        let (mut sum, mut prev) = (0.0f64, 0.0f64);
        for _ in 0..rng.random_range(1..60) {
            let e: f64 = rng.random_range(-30.0..30.0);
            let got = pid_step(e, &g, &mut state);
            sum += e;
            let want = g.kp * e + g.ki * t * sum + g.kd * (e - prev) / t;
            prev = e;
            if got.to_bits() != want.to_bits() {
                mismatches += 1;
            }
        }
    }

    // u(t) = Kp sin ωt + Ki (1 − cos ωt)/ω + Kd ω cos ωt for e = sin ωt
    let g = GainSet::TESTBED.roll;
    let w = 2.0 * PI;
    let worst = |t: f64| {
        let mut state = PidState::new(t);
        let n = (2.0 / t).round() as usize;
        (0..=n)
            .map(|k| {
                let tk = k as f64 * t;
                let u = pid_step((w * tk).sin(), &g, &mut state);
                let exact = g.kp * (w * tk).sin()
                    + g.ki * (1.0 - (w * tk).cos()) / w
                    + g.kd * w * (w * tk).cos();
                (u - exact).abs()
            })
            .skip(1)
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(0.010), worst(0.001));
    let ratio = coarse / fine;
    check(
        mismatches == 0 && (8.0..=12.0).contains(&ratio),
        format!("{mismatches} mismatches over 10^4 sequences; error T=10ms {coarse:.4e}, T=1ms {fine:.4e}, ratio {ratio:.3}"),
    )
}

fn allocation_inverse() -> Outcome {
    let p = BicopterParams::default();
    let limits = ActuatorLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut saturated = 0;
    for _ in 0..1000 {
        let cmd = ActuatorCommand {
            omega_r: rng.random_range(0.5..9.5),
            omega_l: rng.random_range(0.5..9.5),
            tilt_r: rng.random_range(-0.75..0.75),
            tilt_l: rng.random_range(-0.75..0.75),
        };
        let a = allocate(&control_vector(&cmd, &p), &p, &limits);
        if !a.saturation.is_empty() {
            saturated += 1;
        }
        let c = a.command;
        for d in [
            c.omega_r - cmd.omega_r,
            c.omega_l - cmd.omega_l,
            c.tilt_r - cmd.tilt_r,
            c.tilt_l - cmd.tilt_l,
        ] {
            worst = worst.max(d.abs());
        }
    }
    check(
        saturated == 0 && worst < 1e-9,
        format!("max deviation {worst:.1e}, {saturated} saturated"),
    )
}

fn wind_trend() -> Outcome {
    let mut rows = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut peak = 0.0f64;
    let mut ten_knot_ticks = 0;
    let mut diverged = false;
    for name in ["testbed-8kn", "testbed-9kn", "testbed-10kn"] {
        let s = preset(name).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let out = run_scenario(&s).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        diverged |= out.diverged_at.is_some();
        for r in &out.records {
            peak = peak
                .max(r.phi_true.abs())
                .max(r.theta_true.abs())
                .max(r.psi_true.abs());
        }
        if name == "testbed-10kn" {
            ten_knot_ticks = out.records.len();
        }
        rows.push(out.report.ok_or("no report")?.rmse_deg);
    }
    let increasing = rows[0].roll < rows[1].roll
        && rows[1].roll < rows[2].roll
        && rows[0].pitch < rows[1].pitch
        && rows[1].pitch < rows[2].pitch;
    check(
        increasing && peak < 15.0 && !diverged && ten_knot_ticks == 10_000 && slowest < Duration::from_secs(10),
        format!(
            "roll {:.3} < {:.3} < {:.3}, pitch {:.3} < {:.3} < {:.3}, peak {peak:.2} deg, 10 kn ticks {ten_knot_ticks}, slowest run {slowest:?}",
            rows[0].roll, rows[1].roll, rows[2].roll, rows[0].pitch, rows[1].pitch, rows[2].pitch
        ),
    )
}

fn stabilization() -> Outcome {
    let mut s = Scenario::new(Mode::Testbed, 28.0);
    s.initial.roll_deg = 10.0;
    s.seed = 1;
    let out = run_scenario(&s).map_err(|e| e.to_string())?;
    let last_out = out
        .records
        .iter()
        .rposition(|r| r.phi_true.abs() >= 1.0)
        .ok_or("never outside 1 deg")?;
    let inside = out
        .records
        .get(last_out + 1)
        .ok_or("never settles inside 1 deg")?;
    let after = out.records[last_out + 1..]
        .iter()
        .map(|r| r.phi_true.abs())
        .fold(0.0, f64::max);
    check(
        inside.t <= 5.0 && out.diverged_at.is_none(),
        format!(
            "inside 1 deg for good from {:.3} s, max |phi| afterwards {after:.3} deg",
            inside.t
        ),
    )
}

fn determinism() -> Outcome {
    let mut detail = Vec::new();
    for name in PRESET_NAMES {
        let s = preset(name).map_err(|e| e.to_string())?;
        let a = csv_string(&run_scenario(&s).map_err(|e| e.to_string())?.records);
        let b = csv_string(&run_scenario(&s).map_err(|e| e.to_string())?.records);
        if a != b {
            return Err(format!("{name}: CSVs differ"));
        }
        detail.push(format!("{name} {} bytes", a.len()));
    }
    Ok(format!("byte-identical: {}", detail.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("pole placement", pole_placement),
        ("plant gains", plant_gains),
        ("poles and step response", pole_check),
        ("hover equilibrium", hover),
        ("quaternion oracle", quaternion_oracle),
        ("filters", filters),
        ("discrete PID", pid_oracle),
        ("allocation inverse", allocation_inverse),
        ("wind trend", wind_trend),
        ("stabilization", stabilization),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
