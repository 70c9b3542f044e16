//! Robotic particle swarm optimization.
//!
//! Robots are the particles. Each robot scores its position with a fitness
//! that rewards closeness to the target and a compact swarm (low social
//! entropy), remembers the best position it has visited, and steers by the
//! PSO velocity rule toward its personal best, the swarm's best personal
//! best and away from nearby robots.
//!
//! The target may move, so stored personal bests are re-scored every step
//! before being compared with the current fitness. A personal best keeps
//! the swarm entropy that was measured when it was recorded; re-scoring
//! only re-evaluates the distance term.

use serde::{Deserialize, Serialize};

use crate::entropy::total_entropy_with;
use crate::error::SwarmError;
use crate::exec::Exec;
use crate::rng::Substreams;
use crate::state::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub best_position: Vec3,
    pub best_fitness: f64,
    /// Swarm entropy when `best_position` was recorded, bit·m.
    pub best_entropy: f64,
}

impl ParticleState {
    /// Robot at rest whose personal best is its starting position with no
    /// recorded entropy. An infinite entropy scores below any real
    /// measurement, so the first evaluation always replaces it.
    pub fn at(position: Vec3) -> Self {
        Self { position, velocity: Vec3::ZERO, best_position: position, best_fitness: 0.0, best_entropy: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpsoParams {
    /// Inertia weights per axis.
    pub a: Vec3,
    /// Cognitive (personal best) weights per axis.
    pub b1: Vec3,
    /// Social (swarm best) weights per axis.
    pub b2: Vec3,
    /// Obstacle repulsion weights per axis.
    pub b3: Vec3,
    pub k_s: f64,
    pub k_d: f64,
    /// Width of the entropy Gaussian, bit·m.
    #[serde(rename = "r_s_bit_m")]
    pub r_s: f64,
    /// Width of the distance Gaussian, m.
    #[serde(rename = "r_d_m")]
    pub r_d: f64,
    #[serde(rename = "collision_threshold_m")]
    pub collision_threshold: f64,
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
}

impl Default for RpsoParams {
    fn default() -> Self {
        let planar = |k: f64| Vec3::new(k, k, 0.0);
        Self {
            a: planar(0.7),
            b1: planar(1.4),
            b2: planar(1.4),
            b3: planar(1.0),
            k_s: 1.0,
            k_d: 1.0,
            r_s: 50.0,
            r_d: 50.0,
            collision_threshold: 10.0,
            v_max: 8.0,
        }
    }
}

impl RpsoParams {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        for (name, w) in [("a", self.a), ("b1", self.b1), ("b2", self.b2), ("b3", self.b3)] {
            if !w.is_finite() {
                return Err((name, "must be finite".into()));
            }
        }
        if !(self.k_s >= 0.0 && self.k_d >= 0.0) {
            return Err(("k_s", format!("k_s and k_d must be non-negative, got {} and {}", self.k_s, self.k_d)));
        }
        if (self.k_s + self.k_d).is_nan() || self.k_s + self.k_d <= 0.0 {
            return Err(("k_d", "k_s and k_d cannot both be zero".into()));
        }
        for (name, v) in
            [("r_s_bit_m", self.r_s), ("r_d_m", self.r_d), ("collision_threshold_m", self.collision_threshold), ("v_max_mps", self.v_max)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Source of the three uniform draws `r1, r2, r3` used by one robot in one
/// step.
pub trait UniformDraws: Sync {
    fn draws(&self, robot: usize, step: u64) -> [f64; 3];
}

impl UniformDraws for Substreams {
    fn draws(&self, robot: usize, step: u64) -> [f64; 3] {
        self.uniforms::<3>(robot as u64, step)
    }
}

/// The same draws for every robot and step.
#[derive(Debug, Clone, Copy)]
pub struct PinnedDraws(pub [f64; 3]);

impl UniformDraws for PinnedDraws {
    fn draws(&self, _robot: usize, _step: u64) -> [f64; 3] {
        self.0
    }
}

pub fn distance_to_target(position: Vec3, target: Vec3) -> f64 {
    (position - target).norm()
}

/// `γ_S² + γ_d²` with Gaussian `γ`s. Larger is better.
pub fn fitness(distance: f64, entropy: f64, params: &RpsoParams) -> f64 {
    let gamma_s = params.k_s * (-entropy * entropy / (2.0 * params.r_s * params.r_s)).exp();
    let gamma_d = params.k_d * (-distance * distance / (2.0 * params.r_d * params.r_d)).exp();
    gamma_s * gamma_s + gamma_d * gamma_d
}

/// Point whose offset from robot `i` points away from every robot closer
/// than `threshold`. Equals the robot's own position when nobody is near.
pub fn obstacle_repulsion_point(i: usize, positions: &[Vec3], threshold: f64) -> Vec3 {
    let p = positions[i];
    let (sum, count) = positions
        .iter()
        .enumerate()
        .filter(|&(j, q)| j != i && (p - *q).planar_norm() <= threshold)
        .fold((Vec3::ZERO, 0usize), |(s, c), (_, q)| (s + (p - *q), c + 1));
    p + sum / count.max(1) as f64
}

/// PSO velocity rule, clamped to `v_max`.
pub fn rpso_velocity_update(
    particle: &ParticleState,
    neighbourhood_best: Vec3,
    obstacle_point: Vec3,
    params: &RpsoParams,
    draws: [f64; 3],
) -> Vec3 {
    let x = particle.position;
    let [r1, r2, r3] = draws;
    let v = params.a.hadamard(particle.velocity)
        + params.b1.hadamard(particle.best_position - x) * r1
        + params.b2.hadamard(neighbourhood_best - x) * r2
        + params.b3.hadamard(obstacle_point - x) * r3;
    v.clamp_norm(params.v_max)
}

/// What one RPSO step observed.
#[derive(Debug, Clone, PartialEq)]
pub struct RpsoStep {
    pub swarm: Vec<ParticleState>,
    /// Swarm entropy at the evaluation instant.
    pub entropy: f64,
    /// Current fitness of each robot before moving.
    pub fitness: Vec<f64>,
    /// Index of the robot whose personal best led the swarm.
    pub leader: usize,
}

/// One step of the dynamic-environment RPSO loop: re-score personal bests
/// against the current target, score current positions, update personal
/// bests, pick the swarm best (ties to the lowest index), then move every
/// robot by the velocity rule.
pub fn rpso_step<D: UniformDraws>(
    swarm: &[ParticleState],
    target: Vec3,
    params: &RpsoParams,
    draws: &D,
    step: u64,
    dt: f64,
) -> Result<RpsoStep, SwarmError> {
    rpso_step_with(swarm, target, params, draws, step, dt, Exec::default())
}

pub fn rpso_step_with<D: UniformDraws>(
    swarm: &[ParticleState],
    target: Vec3,
    params: &RpsoParams,
    draws: &D,
    step: u64,
    dt: f64,
    exec: Exec,
) -> Result<RpsoStep, SwarmError> {
    if swarm.len() < 2 {
        return Err(SwarmError::SwarmTooSmall(swarm.len()));
    }
    let positions: Vec<Vec3> = swarm.iter().map(|p| p.position).collect();
    let entropy = total_entropy_with(&positions, exec).s;

    let scored: Vec<(ParticleState, f64)> = exec.map_slice(swarm, |p| {
        let mut next = *p;
        next.best_fitness = fitness(distance_to_target(p.best_position, target), p.best_entropy, params);
        let current = fitness(distance_to_target(p.position, target), entropy, params);
        if current >= next.best_fitness {
            next.best_fitness = current;
            next.best_position = p.position;
            next.best_entropy = entropy;
        }
        (next, current)
    });

    let mut leader = 0;
    for (k, (p, _)) in scored.iter().enumerate() {
        if p.best_fitness > scored[leader].0.best_fitness {
            leader = k;
        }
    }
    let swarm_best = scored[leader].0.best_position;

    let moved = exec.map(scored.len(), |i| {
        let p = scored[i].0;
        let obstacle = obstacle_repulsion_point(i, &positions, params.collision_threshold);
        let v = rpso_velocity_update(&p, swarm_best, obstacle, params, draws.draws(i, step));
        ParticleState { position: p.position + v * dt, velocity: v, ..p }
    });

    Ok(RpsoStep { swarm: moved, entropy, fitness: scored.iter().map(|(_, f)| *f).collect(), leader })
}
