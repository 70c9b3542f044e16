//! Pseudo-kinematic airship plant.
//!
//! A unicycle with first-order lags flying at a fixed altitude. Surge
//! airspeed and yaw rate relax toward the commanded references. There is no
//! lateral actuation: the body-lateral ground velocity relaxes toward the
//! lateral wind component, so lateral airspeed (and sideslip) only appears
//! while the airship turns or the wind changes relative to the hull.
//! Ground velocity is airspeed plus wind.

use serde::{Deserialize, Serialize};

use crate::error::StateError;
use crate::state::{integrate_pose, relative_airspeed, BodyVelocity, Pose, WindState};

/// Upper end of the airspeed envelope covered by the trim table, m/s.
pub const ENVELOPE_MAX_AIRSPEED: f64 = 15.0;

/// Surge airspeed and yaw-rate references.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub u_ref: f64,
    pub r_ref: f64,
}

impl VelocityCommand {
    pub fn new(u_ref: f64, r_ref: f64) -> Self {
        Self { u_ref, r_ref }
    }

    /// The airspeed reference 6-vector `[u_ref 0 0 0 0 r_ref]`.
    pub fn as_body_velocity(&self) -> BodyVelocity {
        BodyVelocity::new(self.u_ref, 0.0, 0.0, 0.0, 0.0, self.r_ref)
    }

    pub fn is_within(&self, params: &VehicleParams) -> bool {
        (0.0..=params.v_max).contains(&self.u_ref) && self.r_ref.abs() <= params.r_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Surge airspeed lag, s.
    #[serde(rename = "tau_u_s")]
    pub tau_u: f64,
    /// Yaw-rate lag, s.
    #[serde(rename = "tau_r_s")]
    pub tau_r: f64,
    /// Lateral drift lag, s.
    #[serde(rename = "tau_v_s")]
    pub tau_v: f64,
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
    #[serde(rename = "r_max_radps")]
    pub r_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { tau_u: 4.0, tau_r: 2.0, tau_v: 3.0, v_max: ENVELOPE_MAX_AIRSPEED, r_max: 0.2 }
    }
}

impl VehicleParams {
    /// Returns the name of the first violated constraint.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        for (name, value) in [("tau_u_s", self.tau_u), ("tau_r_s", self.tau_r), ("tau_v_s", self.tau_v)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err((name, format!("must be positive, got {value}")));
            }
        }
        if !(self.v_max > 0.0 && self.v_max <= ENVELOPE_MAX_AIRSPEED) {
            return Err(("v_max_mps", format!("must lie in (0, 15], got {}", self.v_max)));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(("r_max_radps", format!("must be positive, got {}", self.r_max)));
        }
        Ok(())
    }
}

/// Kinematic state of one airship.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirshipState {
    pub id: usize,
    pub pose: Pose,
    /// Ground-relative velocity in the body frame.
    pub velocity: BodyVelocity,
    /// Surge airspeed `u_a`.
    pub airspeed_u: f64,
    /// Last command applied.
    pub commanded: VelocityCommand,
}

impl AirshipState {
    /// Airship at rest (relative to the air) at `pose`.
    pub fn at_rest(id: usize, pose: Pose) -> Self {
        Self { id, pose, velocity: BodyVelocity::default(), airspeed_u: 0.0, commanded: VelocityCommand::default() }
    }

    /// Airship flying straight and level at surge airspeed `u` with no
    /// lateral drift.
    pub fn cruising(id: usize, pose: Pose, u: f64, wind: &WindState) -> Self {
        Self {
            id,
            pose,
            velocity: BodyVelocity::new(u + wind.u_w, wind.v_w, wind.w_w, 0.0, 0.0, 0.0),
            airspeed_u: u,
            commanded: VelocityCommand::new(u, 0.0),
        }
    }

    /// Sideslip angle `atan2(v_a, u_a)`.
    pub fn sideslip(&self, wind: &WindState) -> f64 {
        let xa = relative_airspeed(&self.velocity, wind);
        if xa.u == 0.0 && xa.v == 0.0 {
            0.0
        } else {
            xa.v.atan2(xa.u)
        }
    }
}

fn relax(value: f64, target: f64, tau: f64, dt: f64) -> f64 {
    // explicit Euler, stable because dt <= 1 and callers keep tau >= dt
    value + (dt / tau).min(1.0) * (target - value)
}

/// Advances one airship by `dt`.
///
/// `wind` is the wind expressed in the body frame at the current attitude.
/// Altitude is held: the down coordinate of the pose never changes.
pub fn step_vehicle(
    state: &AirshipState,
    cmd: &VelocityCommand,
    wind: &WindState,
    params: &VehicleParams,
    dt: f64,
) -> Result<AirshipState, StateError> {
    let u_ref = cmd.u_ref.clamp(0.0, params.v_max);
    let r_ref = cmd.r_ref.clamp(-params.r_max, params.r_max);

    let mut u_a = relax(state.airspeed_u, u_ref, params.tau_u, dt).clamp(0.0, params.v_max);
    let r = relax(state.velocity.r, r_ref, params.tau_r, dt).clamp(-params.r_max, params.r_max);
    let v_ground = relax(state.velocity.v, wind.v_w, params.tau_v, dt);

    let mut v_a = (v_ground - wind.v_w).clamp(-params.v_max, params.v_max);
    let budget = (params.v_max * params.v_max - v_a * v_a).max(0.0).sqrt();
    if u_a > budget {
        u_a = budget;
    }
    if v_a.abs() > params.v_max {
        v_a = v_a.signum() * params.v_max;
    }

    // vertical airspeed is zero: altitude hold absorbs vertical wind
    let velocity = BodyVelocity::new(u_a + wind.u_w, v_a + wind.v_w, wind.w_w, 0.0, 0.0, r);
    let mut pose = integrate_pose(&state.pose, &velocity, dt)?;
    pose.position.d = state.pose.position.d;

    let next = AirshipState { id: state.id, pose, velocity, airspeed_u: u_a, commanded: VelocityCommand::new(u_ref, r_ref) };
    debug_assert!(true_airspeed(&next, wind) <= params.v_max + 1e-9);
    debug_assert!(next.velocity.r.abs() <= params.r_max);
    Ok(next)
}

/// True airspeed `‖v_a‖`.
pub fn true_airspeed(state: &AirshipState, wind: &WindState) -> f64 {
    relative_airspeed(&state.velocity, wind).linear().norm()
}
