//! Mission orchestration: waypoint sequences with hover points, moving
//! targets, formation presets and the goal each controller is fed.

use std::f64::consts::{FRAC_PI_4, TAU};

use crate::guidance::{follower_goal, FormationSlot, Mode};
use crate::rng::{Substreams, TARGET_STREAM};
use crate::state::{wrap_angle, yaw_of, Pose, Vec3};

/// Slack when comparing an accumulated hover timer with its duration.
const TIMER_EPSILON_S: f64 = 1e-9;
/// Upper bound on target speed, m/s.
pub const MAX_TARGET_SPEED: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
    pub hover: bool,
    /// Arrival circle radius, m.
    pub radius: f64,
    /// Time to spend inside the circle before moving on, s.
    pub hover_duration: f64,
}

impl Waypoint {
    pub fn pass_through(position: Vec3, radius: f64) -> Self {
        Self { position, hover: false, radius, hover_duration: 0.0 }
    }

    pub fn hover(position: Vec3, radius: f64, duration: f64) -> Self {
        Self { position, hover: true, radius, hover_duration: duration }
    }

    pub fn contains(&self, point: Vec3) -> bool {
        (point - self.position).planar_norm() <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetModel {
    /// Constant-speed travel along a polyline, parked at its last vertex.
    Scripted { path: Vec<Vec3>, speed: f64 },
    /// Constant-speed travel whose turn rate is redrawn uniformly in
    /// `[-max_turn_rate, max_turn_rate]` at the start of every segment.
    RandomWalk { start: Vec3, heading: f64, speed: f64, max_turn_rate: f64, segment: f64 },
}

impl TargetModel {
    pub fn speed(&self) -> f64 {
        match self {
            TargetModel::Scripted { speed, .. } | TargetModel::RandomWalk { speed, .. } => *speed,
        }
    }
}

/// Random-walk segments precomputed up to a horizon, so that a whole run
/// looks positions up without replaying the walk from the start.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrack {
    model: TargetModel,
    /// Start time, position, heading and turn rate of each segment.
    segments: Vec<(f64, Vec3, f64, f64)>,
}

impl TargetTrack {
    pub fn new(model: &TargetModel, streams: &Substreams, horizon: f64) -> Self {
        let mut segments = Vec::new();
        if let TargetModel::RandomWalk { start, heading, speed, max_turn_rate, segment } = *model {
            let (mut position, mut psi, mut t0) = (start, heading, 0.0);
            let mut k = 0u64;
            loop {
                let [u] = streams.uniforms::<1>(TARGET_STREAM, k);
                let omega = (2.0 * u - 1.0) * max_turn_rate;
                segments.push((t0, position, psi, omega));
                if t0 + segment > horizon {
                    break;
                }
                position = arc_end(position, psi, speed, omega, segment);
                psi = wrap_angle(psi + omega * segment);
                t0 = (k + 1) as f64 * segment;
                k += 1;
            }
        }
        Self { model: model.clone(), segments }
    }

    /// Position and ground velocity at time `t`. Past the horizon the last
    /// segment's turn rate is kept.
    pub fn state(&self, t: f64) -> (Vec3, Vec3) {
        match &self.model {
            TargetModel::Scripted { path, speed } => scripted_state(path, *speed, t),
            TargetModel::RandomWalk { speed, .. } => {
                let k = self.segments.partition_point(|s| s.0 <= t).max(1) - 1;
                let (t0, p, psi, omega) = self.segments[k];
                let tau = (t - t0).max(0.0);
                let heading = psi + omega * tau;
                (arc_end(p, psi, *speed, omega, tau), Vec3::planar(speed * heading.cos(), speed * heading.sin()))
            }
        }
    }
}

/// Position and ground velocity of the target at time `t`.
pub fn target_state(model: &TargetModel, t: f64, streams: &Substreams) -> (Vec3, Vec3) {
    TargetTrack::new(model, streams, t).state(t)
}

pub fn target_position(model: &TargetModel, t: f64, streams: &Substreams) -> Vec3 {
    target_state(model, t, streams).0
}

pub fn target_velocity(model: &TargetModel, t: f64, streams: &Substreams) -> Vec3 {
    target_state(model, t, streams).1
}

fn arc_end(p: Vec3, psi: f64, speed: f64, omega: f64, tau: f64) -> Vec3 {
    if omega.abs() < 1e-12 {
        return p + Vec3::planar(psi.cos(), psi.sin()) * (speed * tau);
    }
    let r = speed / omega;
    let end = psi + omega * tau;
    p + Vec3::planar(r * (end.sin() - psi.sin()), -r * (end.cos() - psi.cos()))
}

fn scripted_state(path: &[Vec3], speed: f64, t: f64) -> (Vec3, Vec3) {
    let Some(&first) = path.first() else {
        return (Vec3::ZERO, Vec3::ZERO);
    };
    let mut left = speed * t;
    for leg in path.windows(2) {
        let delta = leg[1] - leg[0];
        let length = delta.norm();
        if length == 0.0 {
            continue;
        }
        let direction = delta / length;
        if left < length {
            return (leg[0] + direction * left, direction * speed);
        }
        left -= length;
    }
    (*path.last().unwrap_or(&first), Vec3::ZERO)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionState {
    /// Index of the active waypoint; equals the waypoint count once the
    /// mission is complete.
    pub index: usize,
    /// Cumulative time spent inside the active waypoint's circle, s.
    pub dwell: f64,
    pub modes: Vec<Mode>,
}

impl MissionState {
    pub fn new(airships: usize) -> Self {
        Self { index: 0, dwell: 0.0, modes: vec![Mode::Cruise; airships] }
    }

    pub fn is_complete(&self, waypoints: &[Waypoint]) -> bool {
        self.index >= waypoints.len()
    }
}

/// Moves the mission on once the tracked point has spent long enough
/// inside the active waypoint's circle. Time outside the circle does not
/// reset the timer.
pub fn advance_waypoint(mission: &MissionState, tracked: Vec3, waypoints: &[Waypoint], dt: f64) -> MissionState {
    let mut next = mission.clone();
    let Some(wp) = waypoints.get(mission.index) else {
        return next;
    };
    if !wp.contains(tracked) {
        return next;
    }
    let hold = if wp.hover { wp.hover_duration } else { 0.0 };
    if hold > 0.0 {
        next.dwell += dt;
    }
    if next.dwell + TIMER_EPSILON_S >= hold {
        next.index += 1;
        next.dwell = 0.0;
    }
    next
}

/// Formation geometry: which airship leads and where every other one sits.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub leader: usize,
    /// Slot of each airship; `None` for the leader.
    pub slots: Vec<Option<FormationSlot>>,
}

impl Formation {
    /// Leader in front, followers alternating right and left at growing
    /// distances along the two arms of a V.
    pub fn v(airships: usize, spacing: f64) -> Self {
        let slots = (0..airships)
            .map(|i| {
                (i > 0).then(|| {
                    let rank = i.div_ceil(2) as f64;
                    let side = if i % 2 == 1 { 1.0 } else { -1.0 };
                    FormationSlot::new(spacing * rank, side * FRAC_PI_4, 0)
                })
            })
            .collect();
        Self { leader: 0, slots }
    }

    /// Leader at the centre, followers evenly spaced on a ring. With seven
    /// airships this is a hexagon.
    pub fn hexagon(airships: usize, radius: f64) -> Self {
        let step = TAU / airships.saturating_sub(1).max(1) as f64;
        let slots = (0..airships).map(|i| (i > 0).then(|| FormationSlot::new(radius, wrap_angle(step * (i - 1) as f64), 0))).collect();
        Self { leader: 0, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    Formation,
    Boids,
    Rpso,
}

/// What one controller should pursue this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Formation leader: fly to the point.
    Point(Vec3),
    /// Formation follower: track the slot point, which moves with the
    /// leader whose heading is `heading`.
    Slot { point: Vec3, heading: f64 },
    /// Boids: the point joins the swarm as a motionless member.
    FictionalMember(Vec3),
    /// RPSO: the point feeds the distance term of the fitness.
    Target(Vec3),
    /// Nothing left to do.
    Idle,
}

/// Goal of airship `id`. `active` is the active waypoint or current target
/// position, `None` once the mission is complete.
pub fn goal_for(approach: Approach, id: usize, formation: Option<&Formation>, active: Option<Vec3>, poses: &[Pose]) -> Goal {
    match approach {
        Approach::Formation => {
            let slot = formation.and_then(|f| f.slots.get(id).copied().flatten());
            match (slot, active) {
                (Some(slot), _) => {
                    let leader = &poses[slot.leader_id];
                    Goal::Slot { point: follower_goal(leader, &slot), heading: yaw_of(leader) }
                }
                (None, Some(point)) => Goal::Point(point),
                (None, None) => Goal::Idle,
            }
        }
        Approach::Boids => active.map_or(Goal::Idle, Goal::FictionalMember),
        Approach::Rpso => active.map_or(Goal::Idle, Goal::Target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn walk(seed: u64) -> (TargetModel, Substreams) {
        let model =
            TargetModel::RandomWalk { start: Vec3::planar(10.0, -5.0), heading: 0.4, speed: 7.15, max_turn_rate: 0.1, segment: 1.0 };
        (model, Substreams::new(seed))
    }

    #[test]
    fn zero_speed_target_is_still() {
        let s = Substreams::new(1);
        let scripted = TargetModel::Scripted { path: vec![Vec3::planar(3.0, 4.0), Vec3::planar(100.0, 0.0)], speed: 0.0 };
        let still = TargetModel::RandomWalk { start: Vec3::planar(3.0, 4.0), heading: 1.0, speed: 0.0, max_turn_rate: 0.2, segment: 1.0 };
        for t in [0.0, 1.5, 100.0] {
            assert_eq!(target_position(&scripted, t, &s), Vec3::planar(3.0, 4.0));
            assert_eq!(target_position(&still, t, &s), Vec3::planar(3.0, 4.0));
        }
    }

    #[test]
    fn scripted_line() {
        let s = Substreams::new(1);
        let m = TargetModel::Scripted { path: vec![Vec3::ZERO, Vec3::planar(0.0, 200.0)], speed: 5.0 };
        assert_eq!(target_position(&m, 10.0, &s), Vec3::planar(0.0, 50.0));
        assert_eq!(target_velocity(&m, 10.0, &s), Vec3::planar(0.0, 5.0));
        assert_eq!(target_position(&m, 1000.0, &s), Vec3::planar(0.0, 200.0));
        assert_eq!(target_velocity(&m, 1000.0, &s), Vec3::ZERO);
    }

    #[test]
    fn scripted_corner() {
        let s = Substreams::new(1);
        let m = TargetModel::Scripted { path: vec![Vec3::ZERO, Vec3::planar(10.0, 0.0), Vec3::planar(10.0, 10.0)], speed: 2.0 };
        assert_eq!(target_position(&m, 7.5, &s), Vec3::planar(10.0, 5.0));
    }

    #[test]
    fn random_walk_is_reproducible() {
        let (m, s) = walk(11);
        let (_, other_seed) = walk(12);
        for k in 0..200 {
            let t = k as f64 * 0.7;
            assert_eq!(target_position(&m, t, &s), target_position(&m, t, &Substreams::new(11)));
        }
        assert_ne!(target_position(&m, 60.0, &s), target_position(&m, 60.0, &other_seed));
    }

    #[test]
    fn random_walk_keeps_speed_and_continuity() {
        let (m, s) = walk(13);
        let dt = 0.1;
        let track = TargetTrack::new(&m, &s, 300.0);
        let mut prev = track.state(0.0).0;
        for k in 1..=3000 {
            let t = k as f64 * dt;
            let (p, v) = track.state(t);
            assert!((v.norm() - 7.15).abs() < 1e-9);
            if k % 500 == 0 {
                assert_eq!(p, target_position(&m, t, &s));
            }
            let chord = (p - prev).norm();
            assert!(chord <= 7.15 * dt + 1e-9 && chord > 7.15 * dt * 0.99);
            prev = p;
        }
    }

    #[test]
    fn random_walk_velocity_matches_finite_difference() {
        let (m, s) = walk(14);
        let h = 1e-5;
        for t in [0.35, 12.25, 47.5, 300.75] {
            let fd = (target_position(&m, t + h, &s) - target_position(&m, t - h, &s)) / (2.0 * h);
            assert!((fd - target_velocity(&m, t, &s)).norm() < 1e-6);
        }
    }

    #[test]
    fn outside_radius_keeps_index() {
        let wps = [Waypoint::pass_through(Vec3::planar(100.0, 0.0), 5.0)];
        let m = advance_waypoint(&MissionState::new(1), Vec3::ZERO, &wps, 0.1);
        assert_eq!(m.index, 0);
    }

    #[test]
    fn pass_through_advances_immediately() {
        let wps = [Waypoint::pass_through(Vec3::planar(100.0, 0.0), 5.0), Waypoint::hover(Vec3::ZERO, 5.0, 0.0)];
        let m = advance_waypoint(&MissionState::new(1), Vec3::planar(97.0, 2.0), &wps, 0.1);
        assert_eq!(m.index, 1);
        let m = advance_waypoint(&m, Vec3::planar(1.0, 0.0), &wps, 0.1);
        assert_eq!(m.index, 2);
        assert!(m.is_complete(&wps));
        assert_eq!(advance_waypoint(&m, Vec3::ZERO, &wps, 0.1).index, 2);
    }

    #[test]
    fn hover_timer_counts_in_radius_time_only() {
        let wps = [Waypoint::hover(Vec3::ZERO, 10.0, 60.0)];
        for dt in [0.01f64, 0.05, 0.1, 0.2, 0.25, 0.5, 1.0] {
            let steps_needed = (60.0 / dt).round() as usize;
            let mut m = MissionState::new(1);
            let mut inside = 0;
            let mut k = 0usize;
            while m.index == 0 {
                // alternate 7 steps inside, 3 steps outside
                let p = if k % 10 < 7 { Vec3::planar(1.0, 1.0) } else { Vec3::planar(50.0, 0.0) };
                if wps[0].contains(p) {
                    inside += 1;
                }
                m = advance_waypoint(&m, p, &wps, dt);
                k += 1;
            }
            assert_eq!(inside, steps_needed, "dt = {dt}");
        }
    }

    #[test]
    fn index_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let wps: Vec<Waypoint> =
            (0..5).map(|k| Waypoint::hover(Vec3::planar(k as f64 * 10.0, 0.0), 6.0, rng.random_range(0.0..2.0))).collect();
        let mut m = MissionState::new(3);
        for _ in 0..5000 {
            let p = Vec3::planar(rng.random_range(-5.0..45.0), rng.random_range(-3.0..3.0));
            let next = advance_waypoint(&m, p, &wps, 0.1);
            assert!(next.index >= m.index && next.dwell >= 0.0);
            m = next;
        }
        assert!(m.index <= wps.len());
    }

    #[test]
    fn follower_goal_delegates_to_slot() {
        let formation = Formation { leader: 0, slots: vec![None, Some(FormationSlot::new(20.0, FRAC_PI_4, 0))] };
        let poses = [Pose::from_yaw(Vec3::planar(100.0, 50.0), 0.0), Pose::default()];
        let goal = goal_for(Approach::Formation, 1, Some(&formation), Some(Vec3::ZERO), &poses);
        let expected = follower_goal(&poses[0], &FormationSlot::new(20.0, FRAC_PI_4, 0));
        assert_eq!(goal, Goal::Slot { point: expected, heading: 0.0 });
        let c = 20.0 * FRAC_PI_4.cos();
        if let Goal::Slot { point, .. } = goal {
            assert!((point - Vec3::planar(100.0 - c, 50.0 - c)).norm() < 1e-12);
        }
        assert_eq!(
            goal_for(Approach::Formation, 0, Some(&formation), Some(Vec3::planar(7.0, 7.0)), &poses),
            Goal::Point(Vec3::planar(7.0, 7.0))
        );
        assert_eq!(goal_for(Approach::Formation, 0, Some(&formation), None, &poses), Goal::Idle);
    }

    #[test]
    fn swarm_goals() {
        let w = Vec3::planar(40.0, 10.0);
        assert_eq!(goal_for(Approach::Boids, 2, None, Some(w), &[]), Goal::FictionalMember(w));
        let (m, s) = walk(15);
        let t = target_position(&m, 33.0, &s);
        assert_eq!(goal_for(Approach::Rpso, 1, None, Some(t), &[]), Goal::Target(t));
    }

    #[test]
    fn v_preset_layout() {
        let v = Formation::v(5, 20.0);
        assert_eq!(v.slots[0], None);
        let rho: Vec<f64> = v.slots[1..].iter().map(|s| s.unwrap().rho_d).collect();
        assert_eq!(rho, [20.0, 20.0, 40.0, 40.0]);
        // arms are mirror images and sit behind a north-facing leader
        let leader = Pose::from_yaw(Vec3::ZERO, 0.0);
        let right = follower_goal(&leader, &v.slots[1].unwrap());
        let left = follower_goal(&leader, &v.slots[2].unwrap());
        assert!(right.n < 0.0 && left.n < 0.0);
        assert!((right.n - left.n).abs() < 1e-12 && (right.e + left.e).abs() < 1e-12);
    }

    #[test]
    fn hexagon_preset_layout() {
        let h = Formation::hexagon(7, 20.0);
        let leader = Pose::from_yaw(Vec3::planar(5.0, 5.0), 0.3);
        let points: Vec<Vec3> = h.slots[1..].iter().map(|s| follower_goal(&leader, &s.unwrap())).collect();
        for (k, p) in points.iter().enumerate() {
            assert!(((*p - leader.position).norm() - 20.0).abs() < 1e-12);
            let next = points[(k + 1) % 6];
            assert!(((*p - next).norm() - 20.0).abs() < 1e-9);
        }
    }
}
