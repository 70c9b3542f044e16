//! Leader/follower kinematic guidance.
//!
//! The guidance layer expresses the position of a goal relative to the
//! airship in polar form: distance error `rho`, bearing error `zeta` and
//! goal-heading alignment error `epsilon`. A linear state feedback turns
//! these into surge-airspeed and yaw-rate references. Linearizing the polar
//! kinematics around the goal gives the closed loop
//!
//! ```text
//! d/dt [rho zeta eps] = [[-k_rho, 0, 0], [0, -(k_zeta - k_rho), -k_eps], [0, -k_rho, 0]] [rho zeta eps]
//! ```
//!
//! which is Hurwitz exactly when `k_rho > 0`, `k_eps < 0` and
//! `k_zeta > k_rho`. Followers add a feedforward term equal to the speed of
//! their moving slot.
//!
//! The same law drives all operating modes: waypoint flight, hovering (the
//! goal is a point the airship holds while facing into the wind) and ground
//! target tracking (cruise toward the target, hover whenever inside the
//! hover radius).

use serde::{Deserialize, Serialize};

use crate::error::GuidanceError;
use crate::state::{wrap_angle, yaw_of, Pose, Vec3};
use crate::vehicle::{VehicleParams, VelocityCommand};

/// Below this planar distance the bearing to the goal is undefined.
pub const MIN_BEARING_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarErrors {
    pub rho: f64,
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceGains {
    #[serde(rename = "k_rho_per_s")]
    pub k_rho: f64,
    #[serde(rename = "k_zeta_per_s")]
    pub k_zeta: f64,
    #[serde(rename = "k_epsilon_per_s")]
    pub k_epsilon: f64,
    pub k_ff: f64,
}

impl Default for GuidanceGains {
    fn default() -> Self {
        Self { k_rho: 0.1, k_zeta: 0.4, k_epsilon: -0.01, k_ff: 1.0 }
    }
}

impl GuidanceGains {
    pub fn new(k_rho: f64, k_zeta: f64, k_epsilon: f64, k_ff: f64) -> Self {
        Self { k_rho, k_zeta, k_epsilon, k_ff }
    }

    pub fn ensure_stable(&self) -> Result<(), GuidanceError> {
        if validate_gains(self) {
            Ok(())
        } else {
            Err(GuidanceError::UnstableGains { k_rho: self.k_rho, k_zeta: self.k_zeta, k_epsilon: self.k_epsilon })
        }
    }
}

/// Position a follower keeps relative to its leader.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationSlot {
    /// Desired distance to the leader, m.
    pub rho_d: f64,
    /// Desired bearing of the leader seen from the follower, relative to
    /// the leader heading. Zero places the follower directly behind.
    pub zeta_d: f64,
    pub leader_id: usize,
}

impl FormationSlot {
    pub fn new(rho_d: f64, zeta_d: f64, leader_id: usize) -> Self {
        Self { rho_d, zeta_d, leader_id }
    }

    /// Slot used when steering straight onto a point.
    pub fn on_point() -> Self {
        Self::new(0.0, 0.0, 0)
    }
}

/// Low-level tracking lags designed for one trim airspeed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimGains {
    #[serde(rename = "tau_u_s")]
    pub tau_u: f64,
    #[serde(rename = "tau_r_s")]
    pub tau_r: f64,
}

/// Trim airspeeds and the gain record designed at each of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimTable {
    #[serde(rename = "airspeeds_mps")]
    pub airspeeds: Vec<f64>,
    pub gains: Vec<TrimGains>,
}

/// Number of trim points in the default table.
pub const DEFAULT_TRIM_POINTS: usize = 74;

impl Default for TrimTable {
    /// 74 trim points evenly spaced over [0.3, 15] m/s. Lags shrink as
    /// airspeed (and control authority) grows.
    fn default() -> Self {
        let n = DEFAULT_TRIM_POINTS;
        let (lo, hi) = (0.3, 15.0);
        let airspeeds: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let gains = airspeeds
            .iter()
            .map(|&v| {
                let s = (v - lo) / (hi - lo);
                TrimGains { tau_u: 5.0 - 2.0 * s, tau_r: 3.0 - 1.5 * s }
            })
            .collect();
        Self { airspeeds, gains }
    }
}

impl TrimTable {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        if self.airspeeds.is_empty() {
            return Err(GuidanceError::EmptyTrimTable);
        }
        if self.airspeeds.len() != self.gains.len() {
            return Err(GuidanceError::InvalidTrimTable(format!(
                "{} airspeeds but {} gain records",
                self.airspeeds.len(),
                self.gains.len()
            )));
        }
        if self.airspeeds.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(GuidanceError::InvalidTrimTable("airspeeds must be strictly increasing".into()));
        }
        if self.gains.iter().any(|g| !(g.tau_u > 0.0 && g.tau_r > 0.0)) {
            return Err(GuidanceError::InvalidTrimTable("lags must be positive".into()));
        }
        Ok(())
    }
}

/// Polar errors of an airship with respect to a goal.
///
/// `goal_heading` is the heading the goal frame moves with (the leader's
/// yaw for followers). `slot` offsets the goal by the desired distance and
/// bearing; use [`FormationSlot::on_point`] to steer straight onto the goal.
pub fn polar_errors(airship: &Pose, goal_position: Vec3, goal_heading: f64, slot: &FormationSlot) -> Result<PolarErrors, GuidanceError> {
    let delta = goal_position - airship.position;
    let distance = delta.planar_norm();
    if distance < MIN_BEARING_DISTANCE {
        return Err(GuidanceError::BearingUndefined { distance });
    }
    let psi = yaw_of(airship);
    let zeta = wrap_angle(-psi + delta.e.atan2(delta.n) - slot.zeta_d);
    let epsilon = wrap_angle(-psi - zeta + goal_heading);
    Ok(PolarErrors { rho: distance - slot.rho_d, zeta, epsilon })
}

/// State feedback with speed feedforward, saturated to the vehicle limits.
pub fn sfkc_command(
    errors: &PolarErrors,
    gains: &GuidanceGains,
    v_ff: f64,
    limits: &VehicleParams,
) -> Result<VelocityCommand, GuidanceError> {
    gains.ensure_stable()?;
    let u_ref = (gains.k_rho * errors.rho + gains.k_ff * v_ff).clamp(0.0, limits.v_max);
    let r_ref = (gains.k_zeta * errors.zeta + gains.k_epsilon * errors.epsilon).clamp(-limits.r_max, limits.r_max);
    Ok(VelocityCommand::new(u_ref, r_ref))
}

/// Linearized closed-loop dynamic matrix, row major.
pub fn closed_loop_matrix(gains: &GuidanceGains) -> [[f64; 3]; 3] {
    let GuidanceGains { k_rho, k_zeta, k_epsilon, .. } = *gains;
    [[-k_rho, 0.0, 0.0], [0.0, -(k_zeta - k_rho), -k_epsilon], [0.0, -k_rho, 0.0]]
}

/// Eigenvalues of [`closed_loop_matrix`] as `(re, im)` pairs.
///
/// The matrix is block diagonal: `-k_rho` plus the roots of
/// `λ² + (k_zeta - k_rho) λ - k_epsilon k_rho`.
pub fn closed_loop_eigenvalues(gains: &GuidanceGains) -> [(f64, f64); 3] {
    let b = gains.k_zeta - gains.k_rho;
    let c = -gains.k_epsilon * gains.k_rho;
    let disc = b * b - 4.0 * c;
    let pair = if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let q = -0.5 * (b + b.signum() * s);
        if q == 0.0 {
            [(0.0, 0.0), (-b, 0.0)]
        } else {
            [(q, 0.0), (c / q, 0.0)]
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        [(-0.5 * b, im), (-0.5 * b, -im)]
    };
    [(-gains.k_rho, 0.0), pair[0], pair[1]]
}

/// True iff the gains satisfy the three strict stability inequalities.
pub fn validate_gains(gains: &GuidanceGains) -> bool {
    gains.k_rho > 0.0 && gains.k_epsilon < 0.0 && gains.k_zeta > gains.k_rho
}

/// Equilibrium point a follower seeks: the leader position offset by the
/// slot distance along `leader heading + zeta_d`, pointing backward.
pub fn follower_goal(leader: &Pose, slot: &FormationSlot) -> Vec3 {
    let angle = yaw_of(leader) + slot.zeta_d;
    let p = leader.position;
    Vec3::new(p.n - slot.rho_d * angle.cos(), p.e - slot.rho_d * angle.sin(), p.d)
}

/// Speed of a moving goal from two consecutive samples.
pub fn feedforward_speed(y_ref_now: Vec3, y_ref_prev: Vec3, ts: f64) -> Result<f64, GuidanceError> {
    if ts.is_nan() || ts <= 0.0 {
        return Err(GuidanceError::SamplingTime(ts));
    }
    Ok((y_ref_now - y_ref_prev).planar_norm() / ts)
}

/// Picks the trim point closest to `u_ref`. Ties go to the lower index.
pub fn trim_minimization(u_ref: f64, table: &TrimTable) -> Result<(usize, TrimGains), GuidanceError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in table.airspeeds.iter().enumerate() {
        let gap = (u_ref - v).abs();
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((i, gap));
        }
    }
    let (index, _) = best.ok_or(GuidanceError::EmptyTrimTable)?;
    Ok((index, table.gains[index]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cruise,
    Hover,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cruise => "cruise",
            Mode::Hover => "hover",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cruise" => Ok(Mode::Cruise),
            "hover" => Ok(Mode::Hover),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Reference selected by [`guidance_mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeReference {
    /// Fly toward the goal; SFKC on the goal point.
    Cruise { bearing: f64 },
    /// Hold position facing `heading`.
    Hover { heading: f64 },
}

/// Walk-stop-walk mode selection. Cruise outside `hover_radius`, hover
/// inside it with the nose into the wind (or the current heading in calm
/// air). No hysteresis.
pub fn guidance_mode(airship: &Pose, goal: Vec3, hover_radius: f64, wind_ned: Vec3) -> (Mode, ModeReference) {
    let delta = goal - airship.position;
    if delta.planar_norm() > hover_radius {
        (Mode::Cruise, ModeReference::Cruise { bearing: delta.bearing() })
    } else {
        let heading = if wind_ned.planar_norm() > 0.0 { wrap_angle((-wind_ned.e).atan2(-wind_ned.n)) } else { yaw_of(airship) };
        (Mode::Hover, ModeReference::Hover { heading })
    }
}
