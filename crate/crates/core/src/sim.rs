//! Fixed-step simulation loop.
//!
//! Every tick reads the state at the tick barrier, computes all commands
//! (in parallel under [`Exec::Parallel`]), advances every agent, moves the
//! mission on and appends one record to the trace. Agents never see a
//! partially updated swarm, so the trace does not depend on the execution
//! policy.

use serde::Serialize;

use crate::boids::{boids_step_swarm_with, BoidState};
use crate::entropy::total_entropy_with;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::guidance::{follower_goal, guidance_mode, polar_errors, trim_minimization, FormationSlot, Mode, ModeReference};
use crate::mission::{advance_waypoint, Approach, Formation, MissionState, TargetTrack, Waypoint};
use crate::rng::Substreams;
use crate::rpso::{rpso_step_with, ParticleState};
use crate::scenario::Scenario;
use crate::state::{wrap_angle, yaw_of, Pose, Vec3, WindState};
use crate::vehicle::{step_vehicle, AirshipState, VehicleParams, VelocityCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Leader,
    Follower,
    Member,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Member => "member",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leader" => Ok(Role::Leader),
            "follower" => Ok(Role::Follower),
            "member" => Ok(Role::Member),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// One airship at one instant. Velocities are ground-relative in the body
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirshipRecord {
    pub role: Role,
    pub position: Vec3,
    pub yaw: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub u_ref: f64,
    pub r_ref: f64,
    pub mode: Mode,
    pub sideslip: f64,
    /// Distance to what this airship should be at: the goal for leaders and
    /// swarm members, the slot point for followers.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub waypoint_index: usize,
    /// Active waypoint or current target position.
    pub goal: Vec3,
    pub centre: Vec3,
    /// Swarm-centre error: distance to the target, or to the active leg of
    /// a waypoint mission.
    pub centre_error: f64,
    pub entropy: f64,
    pub airships: Vec<AirshipRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub records: Vec<StepRecord>,
}

impl Trace {
    pub fn airship_count(&self) -> usize {
        self.records.first().map_or(0, |r| r.airships.len())
    }
}

/// Rounds to 9 significant digits so values survive a text round trip
/// unchanged.
pub fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x + 0.0;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn quantize_vec(v: Vec3) -> Vec3 {
    Vec3::new(quantize(v.n), quantize(v.e), quantize(v.d))
}

fn distance_to_segment(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = (b - a).horizontal();
    let ap = (p - a).horizontal();
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return ap.norm();
    }
    let s = (ap.dot(ab) / len2).clamp(0.0, 1.0);
    (ap - ab * s).norm()
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().copied().sum::<Vec3>() / points.len().max(1) as f64
}

/// Scales the forward command down as the goal leaves the nose and to
/// zero once it is abeam, so an airship turns toward a goal behind it
/// instead of flying a wide loop.
fn heading_gate(zeta: f64) -> f64 {
    zeta.cos().max(0.0)
}

/// Followers steer toward a point this far ahead of their slot, measured
/// in seconds of slot motion along the leader heading.
const LOOKAHEAD_S: f64 = 4.0;

/// What the mission asks for at one instant.
#[derive(Debug, Clone, Copy)]
struct Tick {
    goal: Vec3,
    goal_velocity: Vec3,
    /// Radius of the circle the leader holds position in, when the active
    /// goal is a hover point.
    hover_radius: Option<f64>,
}

enum Plan {
    Waypoints { waypoints: Vec<Waypoint>, start: Vec3 },
    Target { track: TargetTrack, hover_radius: f64 },
}

impl Plan {
    fn tick(&self, mission: &MissionState, t: f64) -> Tick {
        match self {
            Plan::Waypoints { waypoints, .. } => {
                let wp = waypoints[mission.index.min(waypoints.len() - 1)];
                let finished = mission.index >= waypoints.len();
                Tick { goal: wp.position, goal_velocity: Vec3::ZERO, hover_radius: (wp.hover || finished).then_some(wp.radius) }
            }
            Plan::Target { track, hover_radius } => {
                let (goal, goal_velocity) = track.state(t);
                Tick { goal, goal_velocity, hover_radius: Some(*hover_radius) }
            }
        }
    }

    fn centre_error(&self, mission: &MissionState, tick: &Tick, centre: Vec3) -> f64 {
        match self {
            Plan::Waypoints { waypoints, start } => {
                let k = mission.index.min(waypoints.len() - 1);
                let from = if k == 0 { *start } else { waypoints[k - 1].position };
                distance_to_segment(centre, from, waypoints[k].position)
            }
            Plan::Target { .. } => (centre - tick.goal).planar_norm(),
        }
    }
}

/// Agents of whichever approach the scenario uses.
enum Agents {
    Formation { states: Vec<AirshipState>, formation: Formation, previous_leader: Pose },
    Boids { states: Vec<BoidState>, headings: Vec<f64>, altitudes: Vec<f64> },
    Rpso { particles: Vec<ParticleState>, headings: Vec<f64>, altitudes: Vec<f64> },
}

#[derive(Clone, Copy)]
struct Command {
    cmd: VelocityCommand,
    mode: Mode,
    params: VehicleParams,
}

struct Runner<'a> {
    scenario: &'a Scenario,
    plan: Plan,
    streams: Substreams,
    exec: Exec,
    wind_ned: Vec3,
}

impl Runner<'_> {
    fn wind_body(&self, pose: &Pose) -> WindState {
        WindState::from_inertial(self.wind_ned, pose.attitude)
    }

    fn with_trim(&self, cmd: VelocityCommand) -> VehicleParams {
        let mut params = self.scenario.vehicle;
        if self.scenario.guidance.trim_scheduling {
            // the table was validated on load
            if let Ok((_, g)) = trim_minimization(cmd.u_ref, &self.scenario.trim_table) {
                params.tau_u = g.tau_u;
                params.tau_r = g.tau_r;
            }
        }
        params
    }

    fn leader_command(&self, state: &AirshipState, tick: &Tick) -> Command {
        let g = &self.scenario.guidance;
        let gains = &g.gains;
        let limits = &self.scenario.vehicle;
        let wind = self.wind_body(&state.pose);
        let (mode, reference) = match tick.hover_radius {
            Some(radius) => guidance_mode(&state.pose, tick.goal, radius, self.wind_ned),
            None => (Mode::Cruise, ModeReference::Cruise { bearing: (tick.goal - state.pose.position).bearing() }),
        };
        let psi = yaw_of(&state.pose);
        let cmd = match reference {
            ModeReference::Cruise { bearing } => match polar_errors(&state.pose, tick.goal, bearing, &FormationSlot::on_point()) {
                Ok(e) => {
                    let ground = gains.k_rho * e.rho + gains.k_ff * tick.goal_velocity.planar_norm();
                    let u_ref = (ground - wind.u_w).clamp(0.0, g.cruise_airspeed_mps);
                    let r_ref = (gains.k_zeta * e.zeta + gains.k_epsilon * e.epsilon).clamp(-limits.r_max, limits.r_max);
                    VelocityCommand::new(u_ref, r_ref)
                }
                Err(_) => VelocityCommand::new(0.0, 0.0),
            },
            ModeReference::Hover { heading } => {
                let r_ref = (gains.k_zeta * wrap_angle(heading - psi)).clamp(-limits.r_max, limits.r_max);
                let u_ref = (gains.k_ff * -wind.u_w).clamp(0.0, limits.v_max);
                VelocityCommand::new(u_ref, r_ref)
            }
        };
        Command { params: self.with_trim(cmd), cmd, mode }
    }

    fn follower_command(
        &self,
        state: &AirshipState,
        slot: &FormationSlot,
        leader: &Pose,
        previous_leader: &Pose,
        leader_mode: Mode,
    ) -> Command {
        let g = &self.scenario.guidance;
        let gains = &g.gains;
        let limits = &self.scenario.vehicle;
        let wind = self.wind_body(&state.pose);
        let y_ref = follower_goal(leader, slot);
        let y_prev = follower_goal(previous_leader, slot);
        let v_ff = (y_ref - y_prev).planar_norm() / self.scenario.dt_s;
        let leader_yaw = yaw_of(leader);
        let psi = yaw_of(&state.pose);
        let offset = (y_ref - state.pose.position).horizontal();
        let ahead = Vec3::planar(leader_yaw.cos(), leader_yaw.sin());
        let along = offset.dot(ahead);
        let carrot = y_ref + ahead * (v_ff.max(1.0) * LOOKAHEAD_S);
        let (ground, r_ref) = match polar_errors(&state.pose, carrot, leader_yaw, &FormationSlot::on_point()) {
            Ok(e) => {
                let ground = (gains.k_rho * along + gains.k_ff * v_ff) * heading_gate(e.zeta);
                let r_ref = if offset.norm() <= g.slot_capture_radius_m {
                    gains.k_zeta * wrap_angle(leader_yaw - psi)
                } else {
                    gains.k_zeta * e.zeta + gains.k_epsilon * e.epsilon
                };
                (ground, r_ref)
            }
            Err(_) => (gains.k_ff * v_ff, 0.0),
        };
        let cmd = VelocityCommand::new((ground - wind.u_w).clamp(0.0, limits.v_max), r_ref.clamp(-limits.r_max, limits.r_max));
        Command { params: self.with_trim(cmd), cmd, mode: leader_mode }
    }
}

/// Runs a scenario. `seed` overrides the scenario's own seed.
pub fn run_simulation(scenario: &Scenario, seed: Option<u64>) -> Result<Trace> {
    run_simulation_with(scenario, seed, Exec::default())
}

/// [`run_simulation`] with an explicit execution policy. The trace is
/// identical under every policy.
pub fn run_simulation_with(scenario: &Scenario, seed: Option<u64>, exec: Exec) -> Result<Trace> {
    scenario.validate()?;
    let streams = Substreams::new(seed.unwrap_or(scenario.seed));
    let dt = scenario.dt_s;
    let steps = scenario.steps();
    let poses = scenario.initial_poses();
    let wind_ned = scenario.wind_ned();

    let plan = match scenario.target() {
        Some((model, hover_radius)) => Plan::Target { track: TargetTrack::new(&model, &streams, scenario.duration_s + dt), hover_radius },
        None => Plan::Waypoints {
            waypoints: scenario.waypoints(),
            start: centroid(&poses.iter().map(|p| p.position.horizontal()).collect::<Vec<_>>()),
        },
    };
    let runner = Runner { scenario, plan, streams, exec, wind_ned };
    let approach = Approach::from(scenario.approach);

    let mut agents = match approach {
        Approach::Formation => Agents::Formation {
            states: poses
                .iter()
                .zip(&scenario.airships)
                .enumerate()
                .map(|(id, (pose, a))| AirshipState::cruising(id, *pose, a.airspeed_mps, &runner.wind_body(pose)))
                .collect(),
            formation: scenario.formation(),
            previous_leader: poses[0],
        },
        Approach::Boids => Agents::Boids {
            states: poses
                .iter()
                .zip(&scenario.airships)
                .map(|(p, a)| {
                    let yaw = yaw_of(p);
                    BoidState::new(p.position.horizontal(), Vec3::planar(yaw.cos(), yaw.sin()) * a.airspeed_mps)
                })
                .collect(),
            headings: poses.iter().map(yaw_of).collect(),
            altitudes: poses.iter().map(|p| p.position.d).collect(),
        },
        Approach::Rpso => Agents::Rpso {
            particles: poses
                .iter()
                .zip(&scenario.airships)
                .map(|(p, a)| {
                    let yaw = yaw_of(p);
                    ParticleState {
                        velocity: Vec3::planar(yaw.cos(), yaw.sin()) * a.airspeed_mps,
                        ..ParticleState::at(p.position.horizontal())
                    }
                })
                .collect(),
            headings: poses.iter().map(yaw_of).collect(),
            altitudes: poses.iter().map(|p| p.position.d).collect(),
        },
    };

    let n = poses.len();
    let mut mission = MissionState::new(n);
    let mut records = Vec::with_capacity(steps as usize + 1);
    let initial_commands = vec![(VelocityCommand::default(), Mode::Cruise); n];
    records.push(runner.record(0.0, &mission, &agents, &initial_commands));

    for k in 0..steps {
        let t = k as f64 * dt;
        let tick = runner.plan.tick(&mission, t);
        let commands = runner.advance(&mut agents, &tick, k, dt).map_err(|reason| Error::Aborted { step: k, reason })?;

        let t_next = (k + 1) as f64 * dt;
        let tracked = match &agents {
            Agents::Formation { states, formation, .. } => states[formation.leader].pose.position,
            _ => centroid(&positions(&agents)),
        };
        if let Plan::Waypoints { waypoints, .. } = &runner.plan {
            mission = advance_waypoint(&mission, tracked, waypoints, dt);
        }
        for (slot, (_, mode)) in mission.modes.iter_mut().zip(&commands) {
            *slot = *mode;
        }
        if positions(&agents).iter().any(|p| !p.is_finite()) {
            return Err(Error::Aborted { step: k + 1, reason: "non-finite position".into() });
        }
        records.push(runner.record(t_next, &mission, &agents, &commands));
    }
    Ok(Trace { dt, records })
}

fn positions(agents: &Agents) -> Vec<Vec3> {
    match agents {
        Agents::Formation { states, .. } => states.iter().map(|s| s.pose.position).collect(),
        Agents::Boids { states, altitudes, .. } => {
            states.iter().zip(altitudes).map(|(s, d)| Vec3::new(s.position.n, s.position.e, *d)).collect()
        }
        Agents::Rpso { particles, altitudes, .. } => {
            particles.iter().zip(altitudes).map(|(p, d)| Vec3::new(p.position.n, p.position.e, *d)).collect()
        }
    }
}

impl Runner<'_> {
    /// Computes every command from the barrier state and advances all
    /// agents by one step.
    fn advance(&self, agents: &mut Agents, tick: &Tick, step: u64, dt: f64) -> std::result::Result<Vec<(VelocityCommand, Mode)>, String> {
        match agents {
            Agents::Formation { states, formation, previous_leader } => {
                let leader_id = formation.leader;
                let leader_command = self.leader_command(&states[leader_id], tick);
                let leader_pose = states[leader_id].pose;
                let snapshot: &[AirshipState] = states;
                let prev = *previous_leader;
                let outcome = self.exec.map(snapshot.len(), |i| {
                    let command = match formation.slots.get(i).copied().flatten() {
                        Some(slot) => {
                            let leader = &snapshot[slot.leader_id].pose;
                            let before = if slot.leader_id == leader_id { prev } else { *leader };
                            self.follower_command(&snapshot[i], &slot, leader, &before, leader_command.mode)
                        }
                        None if i == leader_id => leader_command,
                        None => self.leader_command(&snapshot[i], tick),
                    };
                    let wind = self.wind_body(&snapshot[i].pose);
                    step_vehicle(&snapshot[i], &command.cmd, &wind, &command.params, dt)
                        .map(|next| (next, (command.cmd, command.mode)))
                        .map_err(|e| e.to_string())
                });
                let mut next = Vec::with_capacity(outcome.len());
                let mut commands = Vec::with_capacity(outcome.len());
                for o in outcome {
                    let (state, command) = o?;
                    next.push(state);
                    commands.push(command);
                }
                *previous_leader = leader_pose;
                *states = next;
                Ok(commands)
            }
            Agents::Boids { states, headings, .. } => {
                let next = boids_step_swarm_with(states, &self.scenario.boids, Some(tick.goal.horizontal()), dt, self.exec)
                    .map_err(|e| e.to_string())?;
                let commands = self.point_commands(&next, headings, dt);
                *states = next;
                Ok(commands)
            }
            Agents::Rpso { particles, headings, .. } => {
                let out = rpso_step_with(particles, tick.goal.horizontal(), &self.scenario.rpso, &self.streams, step, dt, self.exec)
                    .map_err(|e| e.to_string())?;
                let as_boids: Vec<BoidState> = out.swarm.iter().map(|p| BoidState::new(p.position, p.velocity)).collect();
                let commands = self.point_commands(&as_boids, headings, dt);
                *particles = out.swarm;
                Ok(commands)
            }
        }
    }

    /// Heading follows the ground velocity; the logged command is the
    /// airspeed and turn rate that motion implies.
    fn point_commands(&self, next: &[BoidState], headings: &mut [f64], dt: f64) -> Vec<(VelocityCommand, Mode)> {
        next.iter()
            .zip(headings.iter_mut())
            .map(|(s, heading)| {
                let before = *heading;
                if s.velocity.planar_norm() > 1e-9 {
                    *heading = s.velocity.bearing();
                }
                let r = wrap_angle(*heading - before) / dt;
                let air = (s.velocity - self.wind_ned).planar_norm();
                (VelocityCommand::new(air, r), Mode::Cruise)
            })
            .collect()
    }

    fn record(&self, t: f64, mission: &MissionState, agents: &Agents, commands: &[(VelocityCommand, Mode)]) -> StepRecord {
        let tick = self.plan.tick(mission, t);
        let all = positions(agents);
        let planar: Vec<Vec3> = all.iter().map(|p| p.horizontal()).collect();
        let centre = centroid(&planar);
        let entropy = total_entropy_with(&planar, self.exec).s;
        let centre_error = self.plan.centre_error(mission, &tick, centre);

        let airships = match agents {
            Agents::Formation { states, formation, .. } => states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let wind = self.wind_body(&s.pose);
                    let (role, error) = match formation.slots.get(i).copied().flatten() {
                        Some(slot) => {
                            (Role::Follower, (follower_goal(&states[slot.leader_id].pose, &slot) - s.pose.position).planar_norm())
                        }
                        None => (Role::Leader, (tick.goal - s.pose.position).planar_norm()),
                    };
                    AirshipRecord {
                        role,
                        position: s.pose.position,
                        yaw: yaw_of(&s.pose),
                        u: s.velocity.u,
                        v: s.velocity.v,
                        r: s.velocity.r,
                        u_ref: commands[i].0.u_ref,
                        r_ref: commands[i].0.r_ref,
                        mode: commands[i].1,
                        sideslip: s.sideslip(&wind),
                        error,
                    }
                })
                .collect(),
            Agents::Boids { states, headings, .. } => {
                self.point_records(&all, states.iter().map(|s| s.velocity), headings, commands, &tick)
            }
            Agents::Rpso { particles, headings, .. } => {
                self.point_records(&all, particles.iter().map(|p| p.velocity), headings, commands, &tick)
            }
        };

        StepRecord {
            t: quantize(t),
            waypoint_index: mission.index,
            goal: quantize_vec(tick.goal.horizontal()),
            centre: quantize_vec(centre),
            centre_error: quantize(centre_error),
            entropy: quantize(entropy),
            airships: airships.into_iter().map(quantize_record).collect(),
        }
    }

    fn point_records(
        &self,
        all: &[Vec3],
        velocities: impl Iterator<Item = Vec3>,
        headings: &[f64],
        commands: &[(VelocityCommand, Mode)],
        tick: &Tick,
    ) -> Vec<AirshipRecord> {
        velocities
            .enumerate()
            .map(|(i, v)| {
                let psi = headings[i];
                let (c, s) = (psi.cos(), psi.sin());
                let air = v - self.wind_ned;
                let (air_u, air_v) = (air.n * c + air.e * s, -air.n * s + air.e * c);
                let sideslip = if air_u == 0.0 && air_v == 0.0 { 0.0 } else { air_v.atan2(air_u) };
                AirshipRecord {
                    role: Role::Member,
                    position: all[i],
                    yaw: psi,
                    u: v.n * c + v.e * s,
                    v: -v.n * s + v.e * c,
                    r: commands[i].0.r_ref,
                    u_ref: commands[i].0.u_ref,
                    r_ref: commands[i].0.r_ref,
                    mode: commands[i].1,
                    sideslip,
                    error: (tick.goal - all[i]).planar_norm(),
                }
            })
            .collect()
    }
}

fn quantize_record(a: AirshipRecord) -> AirshipRecord {
    AirshipRecord {
        position: quantize_vec(a.position),
        yaw: quantize(a.yaw),
        u: quantize(a.u),
        v: quantize(a.v),
        r: quantize(a.r),
        u_ref: quantize(a.u_ref),
        r_ref: quantize(a.r_ref),
        sideslip: quantize(a.sideslip),
        error: quantize(a.error),
        ..a
    }
}

/// Runs independent scenarios, in parallel under [`Exec::Parallel`]. Each
/// run is itself sequential.
pub fn run_batch(scenarios: &[Scenario], seed: Option<u64>, exec: Exec) -> Vec<Result<Trace>> {
    exec.map_slice(scenarios, |s| run_simulation_with(s, seed, Exec::Sequential))
}
