//! Scenario files: UTF-8 JSON with the unit in every dimensioned field name.
//!
//! Optional blocks fall back to the library defaults. Unknown fields are
//! rejected, and every validation failure names the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boids::BoidsParams;
use crate::error::{Error, Result};
use crate::guidance::{FormationSlot, GuidanceGains, TrimTable};
use crate::mission::{Approach, Formation, TargetModel, Waypoint, MAX_TARGET_SPEED};
use crate::rpso::RpsoParams;
use crate::state::{Pose, Vec3};
use crate::vehicle::VehicleParams;

/// Longest run accepted, in steps.
pub const MAX_STEPS: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachKind {
    Formation,
    Boids,
    Rpso,
}

impl From<ApproachKind> for Approach {
    fn from(kind: ApproachKind) -> Self {
        match kind {
            ApproachKind::Formation => Approach::Formation,
            ApproachKind::Boids => Approach::Boids,
            ApproachKind::Rpso => Approach::Rpso,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialAirship {
    pub north_m: f64,
    pub east_m: f64,
    #[serde(default = "default_down")]
    pub down_m: f64,
    #[serde(default)]
    pub yaw_rad: f64,
    #[serde(default)]
    pub airspeed_mps: f64,
}

fn default_down() -> f64 {
    -50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub gains: GuidanceGains,
    /// Airspeed ceiling for a leader flying between goals.
    pub cruise_airspeed_mps: f64,
    /// Followers closer than this to their slot point align with the
    /// leader instead of steering at the point.
    pub slot_capture_radius_m: f64,
    /// Use the trim table to schedule the vehicle lags on the command.
    pub trim_scheduling: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { gains: GuidanceGains::default(), cruise_airspeed_mps: 10.0, slot_capture_radius_m: 1.0, trim_scheduling: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum FormationSpec {
    V {
        #[serde(default = "default_spacing")]
        spacing_m: f64,
    },
    Hexagon {
        #[serde(default = "default_spacing")]
        radius_m: f64,
    },
    Custom {
        slots: Vec<SlotSpec>,
    },
}

fn default_spacing() -> f64 {
    20.0
}

impl Default for FormationSpec {
    fn default() -> Self {
        FormationSpec::V { spacing_m: default_spacing() }
    }
}

/// Slot of airship `index + 1`; airship 0 leads a custom formation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub rho_d_m: f64,
    pub zeta_d_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub north_m: f64,
    pub east_m: f64,
    #[serde(default)]
    pub hover: bool,
    pub radius_m: f64,
    #[serde(default)]
    pub hover_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Scripted {
        speed_mps: f64,
        /// Polyline vertices as `[north, east]` pairs, m.
        path_ne_m: Vec<[f64; 2]>,
    },
    RandomWalk {
        speed_mps: f64,
        start_ne_m: [f64; 2],
        #[serde(default)]
        heading_rad: f64,
        max_turn_rate_radps: f64,
        #[serde(default = "default_segment")]
        segment_s: f64,
    },
}

fn default_segment() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MissionSpec {
    Waypoints { waypoints: Vec<WaypointSpec> },
    Target { target: TargetSpec, hover_radius_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub approach: ApproachKind,
    #[serde(default)]
    pub seed: u64,
    pub dt_s: f64,
    pub duration_s: f64,
    /// Start of the window used for error statistics.
    #[serde(default)]
    pub transient_s: f64,
    #[serde(default)]
    pub wind_north_mps: f64,
    #[serde(default)]
    pub wind_east_mps: f64,
    #[serde(default)]
    pub wind_down_mps: f64,
    pub airships: Vec<InitialAirship>,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub trim_table: TrimTable,
    #[serde(default)]
    pub formation: FormationSpec,
    #[serde(default)]
    pub boids: BoidsParams,
    #[serde(default)]
    pub rpso: RpsoParams,
    pub mission: MissionSpec,
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.to_owned(), message },
        other => other,
    })
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let message = if field == "." { e.inner().to_string() } else { format!("field `{field}`: {}", e.inner()) };
        Error::Parse { path: "<scenario>".into(), message }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {value}")))
    }
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be non-negative, got {value}")))
    }
}

fn finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

impl Scenario {
    /// Checks every invariant; the error names the first offending field.
    pub fn validate(&self) -> Result<()> {
        positive("dt_s", self.dt_s)?;
        if self.dt_s > crate::state::MAX_STEP_S {
            return Err(Error::invalid("dt_s", format!("must not exceed 1 s, got {}", self.dt_s)));
        }
        non_negative("duration_s", self.duration_s)?;
        if self.duration_s / self.dt_s > MAX_STEPS {
            return Err(Error::invalid("duration_s", format!("duration_s / dt_s exceeds {MAX_STEPS:e} steps")));
        }
        non_negative("transient_s", self.transient_s)?;
        finite("wind_north_mps", self.wind_north_mps)?;
        finite("wind_east_mps", self.wind_east_mps)?;
        finite("wind_down_mps", self.wind_down_mps)?;

        let minimum = if self.approach == ApproachKind::Formation { 1 } else { 2 };
        if self.airships.len() < minimum {
            return Err(Error::invalid(
                "airships",
                format!("{:?} approach needs at least {minimum} airship(s), got {}", self.approach, self.airships.len()),
            ));
        }
        for (i, a) in self.airships.iter().enumerate() {
            for (name, v) in [("north_m", a.north_m), ("east_m", a.east_m), ("down_m", a.down_m), ("yaw_rad", a.yaw_rad)] {
                finite(&format!("airships[{i}].{name}"), v)?;
            }
            non_negative(&format!("airships[{i}].airspeed_mps"), a.airspeed_mps)?;
            if a.airspeed_mps > self.vehicle.v_max {
                return Err(Error::invalid(format!("airships[{i}].airspeed_mps"), "exceeds vehicle.v_max_mps"));
            }
        }

        self.vehicle.check().map_err(|(f, r)| Error::invalid(format!("vehicle.{f}"), r))?;
        if self.vehicle.tau_u < self.dt_s || self.vehicle.tau_r < self.dt_s || self.vehicle.tau_v < self.dt_s {
            return Err(Error::invalid("vehicle", "lags must not be shorter than dt_s"));
        }
        self.guidance.gains.ensure_stable()?;
        non_negative("guidance.gains.k_ff", self.guidance.gains.k_ff)?;
        positive("guidance.cruise_airspeed_mps", self.guidance.cruise_airspeed_mps)?;
        if self.guidance.cruise_airspeed_mps > self.vehicle.v_max {
            return Err(Error::invalid("guidance.cruise_airspeed_mps", "exceeds vehicle.v_max_mps"));
        }
        non_negative("guidance.slot_capture_radius_m", self.guidance.slot_capture_radius_m)?;
        self.trim_table.validate().map_err(|e| Error::invalid("trim_table", e.to_string()))?;
        if self.trim_table.gains.iter().any(|g| g.tau_u < self.dt_s || g.tau_r < self.dt_s) {
            return Err(Error::invalid("trim_table.gains", "lags must not be shorter than dt_s"));
        }
        self.boids.check().map_err(|(f, r)| Error::invalid(format!("boids.{f}"), r))?;
        self.rpso.check().map_err(|(f, r)| Error::invalid(format!("rpso.{f}"), r))?;

        match &self.formation {
            FormationSpec::V { spacing_m } => positive("formation.spacing_m", *spacing_m)?,
            FormationSpec::Hexagon { radius_m } => positive("formation.radius_m", *radius_m)?,
            FormationSpec::Custom { slots } => {
                if self.approach == ApproachKind::Formation && slots.len() + 1 != self.airships.len() {
                    return Err(Error::invalid(
                        "formation.slots",
                        format!("{} airships need {} slots, got {}", self.airships.len(), self.airships.len() - 1, slots.len()),
                    ));
                }
                for (i, s) in slots.iter().enumerate() {
                    positive(&format!("formation.slots[{i}].rho_d_m"), s.rho_d_m)?;
                    finite(&format!("formation.slots[{i}].zeta_d_rad"), s.zeta_d_rad)?;
                }
            }
        }

        match &self.mission {
            MissionSpec::Waypoints { waypoints } => {
                if waypoints.is_empty() {
                    return Err(Error::invalid("mission.waypoints", "must not be empty"));
                }
                for (i, w) in waypoints.iter().enumerate() {
                    finite(&format!("mission.waypoints[{i}].north_m"), w.north_m)?;
                    finite(&format!("mission.waypoints[{i}].east_m"), w.east_m)?;
                    positive(&format!("mission.waypoints[{i}].radius_m"), w.radius_m)?;
                    non_negative(&format!("mission.waypoints[{i}].hover_duration_s"), w.hover_duration_s)?;
                }
            }
            MissionSpec::Target { target, hover_radius_m } => {
                positive("mission.hover_radius_m", *hover_radius_m)?;
                let speed = match target {
                    TargetSpec::Scripted { speed_mps, path_ne_m } => {
                        if path_ne_m.is_empty() {
                            return Err(Error::invalid("mission.target.path_ne_m", "must not be empty"));
                        }
                        if path_ne_m.iter().flatten().any(|v| !v.is_finite()) {
                            return Err(Error::invalid("mission.target.path_ne_m", "must be finite"));
                        }
                        *speed_mps
                    }
                    TargetSpec::RandomWalk { speed_mps, start_ne_m, heading_rad, max_turn_rate_radps, segment_s } => {
                        finite("mission.target.start_ne_m", start_ne_m[0] + start_ne_m[1])?;
                        finite("mission.target.heading_rad", *heading_rad)?;
                        non_negative("mission.target.max_turn_rate_radps", *max_turn_rate_radps)?;
                        positive("mission.target.segment_s", *segment_s)?;
                        *speed_mps
                    }
                };
                if !(0.0..=MAX_TARGET_SPEED).contains(&speed) {
                    return Err(Error::invalid("mission.target.speed_mps", format!("must lie in [0, 8], got {speed}")));
                }
            }
        }
        Ok(())
    }

    pub fn wind_ned(&self) -> Vec3 {
        Vec3::new(self.wind_north_mps, self.wind_east_mps, self.wind_down_mps)
    }

    pub fn steps(&self) -> u64 {
        // tolerate representation error in duration / dt
        (self.duration_s / self.dt_s + 1e-9).floor() as u64
    }

    pub fn initial_poses(&self) -> Vec<Pose> {
        self.airships.iter().map(|a| Pose::from_yaw(Vec3::new(a.north_m, a.east_m, a.down_m), a.yaw_rad)).collect()
    }

    pub fn formation(&self) -> Formation {
        let n = self.airships.len();
        match &self.formation {
            FormationSpec::V { spacing_m } => Formation::v(n, *spacing_m),
            FormationSpec::Hexagon { radius_m } => Formation::hexagon(n, *radius_m),
            FormationSpec::Custom { slots } => Formation {
                leader: 0,
                slots: std::iter::once(None).chain(slots.iter().map(|s| Some(FormationSlot::new(s.rho_d_m, s.zeta_d_rad, 0)))).collect(),
            },
        }
    }

    pub fn waypoints(&self) -> Vec<Waypoint> {
        match &self.mission {
            MissionSpec::Waypoints { waypoints } => waypoints
                .iter()
                .map(|w| Waypoint {
                    position: Vec3::planar(w.north_m, w.east_m),
                    hover: w.hover,
                    radius: w.radius_m,
                    hover_duration: w.hover_duration_s,
                })
                .collect(),
            MissionSpec::Target { .. } => Vec::new(),
        }
    }

    /// Target model and hover radius of a target-tracking mission.
    pub fn target(&self) -> Option<(TargetModel, f64)> {
        match &self.mission {
            MissionSpec::Target { target, hover_radius_m } => {
                let model = match target {
                    TargetSpec::Scripted { speed_mps, path_ne_m } => {
                        TargetModel::Scripted { path: path_ne_m.iter().map(|p| Vec3::planar(p[0], p[1])).collect(), speed: *speed_mps }
                    }
                    TargetSpec::RandomWalk { speed_mps, start_ne_m, heading_rad, max_turn_rate_radps, segment_s } => {
                        TargetModel::RandomWalk {
                            start: Vec3::planar(start_ne_m[0], start_ne_m[1]),
                            heading: *heading_rad,
                            speed: *speed_mps,
                            max_turn_rate: *max_turn_rate_radps,
                            segment: *segment_s,
                        }
                    }
                };
                Some((model, *hover_radius_m))
            }
            MissionSpec::Waypoints { .. } => None,
        }
    }
}
