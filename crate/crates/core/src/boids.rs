//! Reynolds flocking: repulsion, velocity mimicking and attraction combined
//! by a weighted average with an inertia term.
//!
//! Every rule reads the previous tick only, so a swarm step is a pure map
//! over agents and runs through [`Exec`].

use serde::{Deserialize, Serialize};

use crate::error::SwarmError;
use crate::exec::Exec;
use crate::state::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoidState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl BoidState {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        Self { position, velocity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoidsParams {
    /// Inertia weight in [0, 1].
    pub delta: f64,
    pub k_r: f64,
    pub k_m: f64,
    pub k_a: f64,
    /// Repulsion radius, m.
    #[serde(rename = "d_lim_m")]
    pub d_lim: f64,
    /// Speed clamp, m/s.
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
}

impl Default for BoidsParams {
    fn default() -> Self {
        Self { delta: 0.6, k_r: 2.0, k_m: 0.5, k_a: 0.5, d_lim: 15.0, v_max: 8.0 }
    }
}

impl BoidsParams {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(("delta", format!("must lie in [0, 1], got {}", self.delta)));
        }
        for (name, k) in [("k_r", self.k_r), ("k_m", self.k_m), ("k_a", self.k_a)] {
            if !(k >= 0.0 && k.is_finite()) {
                return Err((name, format!("must be non-negative, got {k}")));
            }
        }
        if !(self.d_lim > 0.0 && self.d_lim.is_finite()) {
            return Err(("d_lim_m", format!("must be positive, got {}", self.d_lim)));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(("v_max_mps", format!("must be positive, got {}", self.v_max)));
        }
        Ok(())
    }
}

/// Short-range repulsion from every member within `d_lim` of `i`.
///
/// The neighbour set includes `i` itself, so the divisor `N' - 1` counts
/// the true neighbours. With no neighbour the result is zero.
pub fn repulsion_velocity(i: usize, positions: &[Vec3], d_lim: f64) -> Vec3 {
    let p = positions[i];
    let (sum, count) = positions
        .iter()
        .enumerate()
        .filter(|&(j, q)| j != i && (p - *q).norm() <= d_lim)
        .fold((Vec3::ZERO, 0usize), |(s, c), (_, q)| (s + (p - *q), c + 1));
    if count == 0 {
        Vec3::ZERO
    } else {
        sum / count as f64
    }
}

/// Mean velocity of every other member.
pub fn mimic_velocity(i: usize, velocities: &[Vec3]) -> Result<Vec3, SwarmError> {
    mean_of_others(i, velocities)
}

/// Offset from `i` to the centroid of every other member.
pub fn attraction_velocity(i: usize, positions: &[Vec3]) -> Result<Vec3, SwarmError> {
    Ok(mean_of_others(i, positions)? - positions[i])
}

fn mean_of_others(i: usize, values: &[Vec3]) -> Result<Vec3, SwarmError> {
    let n = values.len();
    if n < 2 {
        return Err(SwarmError::SwarmTooSmall(n));
    }
    let sum: Vec3 = values.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).sum();
    Ok(sum / (n - 1) as f64)
}

/// Rule velocities for one agent, weighted and blended with its previous
/// velocity, then clamped to `v_max`.
fn blend(previous: Vec3, v_r: Vec3, v_m: Vec3, v_a: Vec3, params: &BoidsParams) -> Vec3 {
    let rules = v_r * params.k_r + v_m * params.k_m + v_a * params.k_a;
    (previous * params.delta + rules * (1.0 - params.delta)).clamp_norm(params.v_max)
}

/// New velocity of agent `i` from the swarm state of the previous tick.
pub fn boids_update(i: usize, states: &[BoidState], params: &BoidsParams) -> Result<Vec3, SwarmError> {
    let positions: Vec<Vec3> = states.iter().map(|s| s.position).collect();
    let velocities: Vec<Vec3> = states.iter().map(|s| s.velocity).collect();
    let v_r = repulsion_velocity(i, &positions, params.d_lim);
    let v_m = mimic_velocity(i, &velocities)?;
    let v_a = attraction_velocity(i, &positions)?;
    Ok(blend(states[i].velocity, v_r, v_m, v_a, params))
}

/// Synchronous swarm step. A waypoint, when given, joins the attraction and
/// repulsion sums as a motionless fictional member; it does not take part
/// in mimicking.
pub fn boids_step_swarm(states: &[BoidState], params: &BoidsParams, waypoint: Option<Vec3>, dt: f64) -> Result<Vec<BoidState>, SwarmError> {
    boids_step_swarm_with(states, params, waypoint, dt, Exec::default())
}

/// [`boids_step_swarm`] with an explicit execution policy.
pub fn boids_step_swarm_with(
    states: &[BoidState],
    params: &BoidsParams,
    waypoint: Option<Vec3>,
    dt: f64,
    exec: Exec,
) -> Result<Vec<BoidState>, SwarmError> {
    if states.len() < 2 {
        return Err(SwarmError::SwarmTooSmall(states.len()));
    }
    let velocities: Vec<Vec3> = states.iter().map(|s| s.velocity).collect();
    let mut positions: Vec<Vec3> = states.iter().map(|s| s.position).collect();
    positions.extend(waypoint);

    Ok(exec.map(states.len(), |i| {
        let v_r = repulsion_velocity(i, &positions, params.d_lim);
        // N >= 2 checked above
        let v_m = mean_of_others(i, &velocities).unwrap_or_default();
        let v_a = mean_of_others(i, &positions).unwrap_or_default() - positions[i];
        let v = blend(states[i].velocity, v_r, v_m, v_a, params);
        BoidState::new(states[i].position + v * dt, v)
    }))
}
