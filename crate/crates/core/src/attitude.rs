//! Quaternion and Euler-angle algebra.
//!
//! Quaternions are stored scalar-first `(w, x, y, z)`. Euler angles follow the
//! aerospace ZYX (yaw, pitch, roll) sequence, so a body attitude is
//! `R = Rz(yaw) * Ry(pitch) * Rx(roll)` mapping body vectors into the world
//! (NED) frame.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from `±π/2` pitch below which the Euler decomposition is flagged
/// as gimbal locked.
pub const GIMBAL_LOCK_EPS: f64 = 1e-6;

/// Tolerance on `|‖q‖² − 1|` accepted by operations that require a unit quaternion.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis`. The axis need not be unit length;
    /// a zero axis yields the identity.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let k = s / n;
        Self::new(c, axis[0] * k, axis[1] * k, axis[2] * k)
    }

    pub fn norm_squared(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_unit(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= UNIT_NORM_TOL
    }

    fn ensure_unit(&self) -> Result<()> {
        if self.is_unit() {
            Ok(())
        } else {
            Err(Error::NonUnitQuaternion(self.norm()))
        }
    }

    /// Body-to-world rotation matrix, row major.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Rotate a body-frame vector into the world frame.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        mat_vec(&self.rotation_matrix(), v)
    }

    /// Rotate a world-frame vector into the body frame.
    pub fn inverse_rotate(&self, v: [f64; 3]) -> [f64; 3] {
        mat_t_vec(&self.rotation_matrix(), v)
    }

    /// Angle of the relative rotation between two unit quaternions, ignoring the
    /// double cover.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let d = self.dot(other).abs().min(1.0);
        2.0 * d.acos()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }
}

/// Result of [`quat_to_euler`]; `gimbal_lock` is raised when pitch sits within
/// [`GIMBAL_LOCK_EPS`] of `±π/2`, in which case roll is pinned to zero and the
/// whole heading is carried by yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub angles: EulerAngles,
    pub gimbal_lock: bool,
}

/// Unit gravity direction expressed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GravityVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

pub fn normalize(q: Quaternion) -> Result<Quaternion> {
    let n = q.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateQuaternion);
    }
    Ok(Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n))
}

/// Body-frame direction of gravity, `Rᵀ·(0, 0, 1)`.
pub fn quat_to_gravity(q: Quaternion) -> Result<GravityVector> {
    q.ensure_unit()?;
    let Quaternion { w, x, y, z } = q;
    Ok(GravityVector {
        x: 2.0 * (x * z - w * y),
        y: 2.0 * (w * x + y * z),
        z: w * w - x * x - y * y + z * z,
    })
}

/// ZYX decomposition of a unit quaternion.
pub fn quat_to_euler(q: Quaternion) -> Result<EulerDecomposition> {
    q.ensure_unit()?;
    let Quaternion { w, x, y, z } = q;

    let sin_pitch = (2.0 * (w * y - x * z)).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();

    if FRAC_PI_2 - pitch.abs() < GIMBAL_LOCK_EPS {
        // Only yaw - roll (or yaw + roll) is observable; fold everything into yaw.
        let r01 = 2.0 * (x * y - w * z);
        let r11 = 1.0 - 2.0 * (x * x + z * z);
        let yaw = (-r01).atan2(r11);
        return Ok(EulerDecomposition {
            angles: EulerAngles::new(0.0, pitch, wrap_angle(yaw)),
            gimbal_lock: true,
        });
    }

    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    Ok(EulerDecomposition {
        angles: EulerAngles::new(wrap_angle(roll), pitch, wrap_angle(yaw)),
        gimbal_lock: false,
    })
}

pub fn euler_to_quat(e: EulerAngles) -> Quaternion {
    let (sr, cr) = (e.roll / 2.0).sin_cos();
    let (sp, cp) = (e.pitch / 2.0).sin_cos();
    let (sy, cy) = (e.yaw / 2.0).sin_cos();
    Quaternion::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
}

/// Advance `q` by body rates `omega` (rad/s) held constant over `dt`, using the
/// exact axis-angle increment, then renormalize.
pub fn integrate_gyro(q: Quaternion, omega: [f64; 3], dt: f64) -> Quaternion {
    let rate = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if rate == 0.0 || dt == 0.0 {
        return q;
    }
    let delta = Quaternion::from_axis_angle(omega, rate * dt);
    normalize(q * delta).unwrap_or(q)
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn mat_t_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(Quaternion::IDENTITY).unwrap(),
            Quaternion::IDENTITY
        );
        assert_eq!(
            normalize(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap(),
            Quaternion::IDENTITY
        );
        let q = normalize(Quaternion::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(q, Quaternion::new(0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn normalize_rejects_zero() {
        let err = normalize(Quaternion::new(0.0, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(err.to_string().contains("degenerate quaternion"));
    }

    #[test]
    fn gravity_examples() {
        let g = quat_to_gravity(Quaternion::IDENTITY).unwrap();
        assert_eq!(g.as_array(), [0.0, 0.0, 1.0]);

        let pitch_up = Quaternion::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0);
        let g = quat_to_gravity(pitch_up).unwrap();
        assert_abs_diff_eq!(g.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.z, 0.0, epsilon = 1e-12);

        let roll = Quaternion::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0);
        let g = quat_to_gravity(roll).unwrap();
        assert_abs_diff_eq!(g.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gravity_rejects_non_unit() {
        assert!(quat_to_gravity(Quaternion::new(2.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn euler_examples() {
        let d = quat_to_euler(Quaternion::IDENTITY).unwrap();
        assert_eq!(d.angles, EulerAngles::default());
        assert!(!d.gimbal_lock);

        let yaw90 = Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2);
        let e = quat_to_euler(yaw90).unwrap().angles.to_degrees();
        assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[2], 90.0, epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_is_flagged_not_fatal() {
        let q = euler_to_quat(EulerAngles::new(0.3, FRAC_PI_2, 0.5));
        let d = quat_to_euler(q).unwrap();
        assert!(d.gimbal_lock);
        assert_eq!(d.angles.roll, 0.0);
        // yaw absorbs yaw - roll at +90° pitch
        assert_abs_diff_eq!(d.angles.yaw, 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(euler_to_quat(d.angles).angle_to(&q), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn euler_to_quat_examples() {
        assert_eq!(euler_to_quat(EulerAngles::default()), Quaternion::IDENTITY);
        let q = euler_to_quat(EulerAngles::new(PI, 0.0, 0.0));
        assert_abs_diff_eq!(q.w, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-15);
        assert_eq!((q.y, q.z), (0.0, 0.0));
    }

    #[test]
    fn gyro_integration_examples() {
        let q = euler_to_quat(EulerAngles::new(0.1, 0.2, 0.3));
        assert_eq!(integrate_gyro(q, [0.0; 3], 0.01), q);

        let q = integrate_gyro(Quaternion::IDENTITY, [FRAC_PI_2, 0.0, 0.0], 1.0);
        assert_abs_diff_eq!(q.w, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(q.x, FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(1.5 * PI), -FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-7.0 * PI), PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
    }
}
