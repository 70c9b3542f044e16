//! Reference frames, quaternion attitude kinematics and the airspeed/wind
//! relation.
//!
//! Positions live in the North-East-Down (NED) inertial frame. Velocities
//! and angular rates live in the airship body frame (x forward, y right,
//! z down). Attitude is a unit quaternion mapping body vectors into NED.
//! Yaw is measured from North, positive toward East, and wrapped to
//! `(-π, π]`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::StateError;

/// Largest accepted deviation of `‖q‖` from 1 before a kinematic call is
/// rejected.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Integration steps longer than this are rejected.
pub const MAX_STEP_S: f64 = 1.0;

/// Three-component vector. Components are named after the NED axes; when a
/// `Vec3` carries a body-frame quantity, `n`/`e`/`d` read as x/y/z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub n: f64,
    pub e: f64,
    pub d: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { n: 0.0, e: 0.0, d: 0.0 };

    pub const fn new(n: f64, e: f64, d: f64) -> Self {
        Self { n, e, d }
    }

    /// Horizontal vector with zero down component.
    pub const fn planar(n: f64, e: f64) -> Self {
        Self { n, e, d: 0.0 }
    }

    /// The (N, E) part with the down component dropped.
    pub fn horizontal(self) -> Self {
        Self::planar(self.n, self.e)
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.n * other.n + self.e * other.e + self.d * other.d
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Norm of the (N, E) part only.
    pub fn planar_norm(self) -> f64 {
        self.n.hypot(self.e)
    }

    /// Componentwise product.
    pub fn hadamard(self, other: Vec3) -> Vec3 {
        Vec3::new(self.n * other.n, self.e * other.e, self.d * other.d)
    }

    pub fn is_finite(self) -> bool {
        self.n.is_finite() && self.e.is_finite() && self.d.is_finite()
    }

    /// Rescales the vector so its norm does not exceed `max`.
    pub fn clamp_norm(self, max: f64) -> Vec3 {
        let norm = self.norm();
        if norm > max && norm > 0.0 {
            self * (max / norm)
        } else {
            self
        }
    }

    /// Four-quadrant bearing of the horizontal part, measured from North
    /// toward East.
    pub fn bearing(self) -> f64 {
        wrap_angle(self.e.atan2(self.n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.n + rhs.n, self.e + rhs.e, self.d + rhs.d)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.n - rhs.n, self.e - rhs.e, self.d - rhs.d)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.n * rhs, self.e * rhs, self.d * rhs)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, rhs: f64) -> Vec3 {
        Vec3::new(self.n / rhs, self.e / rhs, self.d / rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.n, -self.e, -self.d)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, Add::add)
    }
}

/// Hamilton quaternion `w + xi + yj + zk`. Also used to carry quaternion
/// derivatives, which are not unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation by `yaw` about the down axis.
    pub fn from_yaw(yaw: f64) -> Self {
        let half = 0.5 * yaw;
        Self::new(half.cos(), 0.0, 0.0, half.sin())
    }

    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Quaternion {
        let n = self.norm();
        Quaternion::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn product(self, rhs: Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates a body-frame vector into the inertial frame.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let p = Quaternion::new(0.0, v.n, v.e, v.d);
        let r = self.product(p).product(self.conjugate());
        Vec3::new(r.x, r.y, r.z)
    }

    /// Rotates an inertial-frame vector into the body frame.
    pub fn rotate_inverse(self, v: Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    fn scaled(self, k: f64) -> Quaternion {
        Quaternion::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }

    fn plus(self, other: Quaternion) -> Quaternion {
        Quaternion::new(self.w + other.w, self.x + other.x, self.y + other.y, self.z + other.z)
    }

    fn check_unit(self) -> Result<(), StateError> {
        let deviation = (self.norm() - 1.0).abs();
        if deviation > UNIT_NORM_TOLERANCE || !deviation.is_finite() {
            return Err(StateError::NonUnitQuaternion { deviation });
        }
        Ok(())
    }
}

/// Position in NED plus attitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub attitude: Quaternion,
}

impl Pose {
    pub fn new(position: Vec3, attitude: Quaternion) -> Self {
        Self { position, attitude }
    }

    /// Level pose at `position` heading `yaw`.
    pub fn from_yaw(position: Vec3, yaw: f64) -> Self {
        Self::new(position, Quaternion::from_yaw(yaw))
    }
}

/// Body-frame linear velocity (u, v, w) in m/s and angular rate (p, q, r)
/// in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl BodyVelocity {
    pub const fn new(u: f64, v: f64, w: f64, p: f64, q: f64, r: f64) -> Self {
        Self { u, v, w, p, q, r }
    }

    pub fn linear(&self) -> Vec3 {
        Vec3::new(self.u, self.v, self.w)
    }

    pub fn angular(&self) -> Vec3 {
        Vec3::new(self.p, self.q, self.r)
    }
}

/// Wind expressed in the body frame. The angular part of the wind 6-vector
/// is identically zero and therefore not stored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindState {
    pub u_w: f64,
    pub v_w: f64,
    pub w_w: f64,
}

impl WindState {
    pub const CALM: WindState = WindState { u_w: 0.0, v_w: 0.0, w_w: 0.0 };

    /// Rotates a constant inertial wind vector into the body frame of an
    /// airship with the given attitude.
    pub fn from_inertial(wind_ned: Vec3, attitude: Quaternion) -> Self {
        let b = attitude.rotate_inverse(wind_ned);
        Self { u_w: b.n, v_w: b.e, w_w: b.d }
    }

    pub fn linear(&self) -> Vec3 {
        Vec3::new(self.u_w, self.v_w, self.w_w)
    }

    /// The full 6-vector `[u_w v_w w_w 0 0 0]`.
    pub fn as_body_velocity(&self) -> BodyVelocity {
        BodyVelocity::new(self.u_w, self.v_w, self.w_w, 0.0, 0.0, 0.0)
    }
}

/// Time derivative of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRate {
    pub position: Vec3,
    pub attitude: Quaternion,
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Quaternion derivative `½ q ⊗ (0, ω)` for body angular rate `omega`.
pub fn quaternion_rate(q: Quaternion, omega: Vec3) -> Result<Quaternion, StateError> {
    q.check_unit()?;
    Ok(q.product(Quaternion::new(0.0, omega.n, omega.e, omega.d)).scaled(0.5))
}

/// Pose derivative: body linear velocity rotated into NED, attitude rate
/// from [`quaternion_rate`].
pub fn pose_rate(pose: &Pose, x: &BodyVelocity) -> Result<PoseRate, StateError> {
    let attitude = quaternion_rate(pose.attitude, x.angular())?;
    Ok(PoseRate { position: pose.attitude.rotate(x.linear()), attitude })
}

/// One explicit Euler step of the pose kinematics followed by quaternion
/// renormalization.
pub fn integrate_pose(pose: &Pose, x: &BodyVelocity, dt: f64) -> Result<Pose, StateError> {
    if !(dt > 0.0 && dt <= MAX_STEP_S) {
        return Err(StateError::StepOutOfRange { dt });
    }
    let rate = pose_rate(pose, x)?;
    Ok(Pose { position: pose.position + rate.position * dt, attitude: pose.attitude.plus(rate.attitude.scaled(dt)).normalized() })
}

/// Airspeed vector `x_a = x - x_w`. Angular components pass through.
pub fn relative_airspeed(x: &BodyVelocity, wind: &WindState) -> BodyVelocity {
    BodyVelocity { u: x.u - wind.u_w, v: x.v - wind.v_w, w: x.w - wind.w_w, ..*x }
}

/// Yaw angle of the pose in `(-π, π]`.
pub fn yaw_of(pose: &Pose) -> f64 {
    let q = pose.attitude;
    let siny = 2.0 * (q.w * q.z + q.x * q.y);
    let cosy = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
    wrap_angle(siny.atan2(cosy))
}
