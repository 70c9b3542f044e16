//! Error statistics of a trace: mean, population standard deviation and
//! maximum of per-step Euclidean errors, after a transient window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::sim::{Role, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_m: f64,
    pub std_m: f64,
    pub max_m: f64,
    pub samples: usize,
}

/// Two-pass mean and population standard deviation. `None` without
/// samples.
pub fn error_stats(values: &[f64]) -> Option<ErrorStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(ErrorStats {
        mean_m: mean,
        std_m: variance.sqrt(),
        max_m: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirshipMetrics {
    pub id: usize,
    pub role: String,
    pub error: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub transient_s: f64,
    pub airships: Vec<AirshipMetrics>,
    /// Pooled over every leader sample.
    pub leader: Option<ErrorStats>,
    /// Pooled over every follower sample.
    pub followers: Option<ErrorStats>,
    /// Pooled over every swarm-member sample.
    pub members: Option<ErrorStats>,
    pub centre: ErrorStats,
}

/// Metrics with the scenario's transient window.
pub fn compute_metrics(trace: &Trace, scenario: &Scenario) -> Result<MetricsSummary> {
    compute_metrics_after(trace, scenario.transient_s)
}

/// Metrics over the records at or after `transient_s`.
pub fn compute_metrics_after(trace: &Trace, transient_s: f64) -> Result<MetricsSummary> {
    let window: Vec<_> = trace.records.iter().filter(|r| r.t >= transient_s).collect();
    if window.is_empty() {
        return Err(Error::invalid("transient_s", format!("no records at or after {transient_s} s")));
    }
    let n = trace.airship_count();
    let mut per_airship = vec![Vec::with_capacity(window.len()); n];
    let mut pooled: [Vec<f64>; 3] = Default::default();
    for r in &window {
        for (i, a) in r.airships.iter().enumerate() {
            per_airship[i].push(a.error);
        }
    }
    // pool in airship order so the sum order is fixed
    let mut airships = Vec::with_capacity(n);
    for (i, errors) in per_airship.iter().enumerate() {
        let role = trace.records[0].airships[i].role;
        let slot = match role {
            Role::Leader => 0,
            Role::Follower => 1,
            Role::Member => 2,
        };
        pooled[slot].extend_from_slice(errors);
        if let Some(error) = error_stats(errors) {
            airships.push(AirshipMetrics { id: i, role: role.as_str().to_string(), error });
        }
    }
    let centre: Vec<f64> = window.iter().map(|r| r.centre_error).collect();
    Ok(MetricsSummary {
        transient_s,
        airships,
        leader: error_stats(&pooled[0]),
        followers: error_stats(&pooled[1]),
        members: error_stats(&pooled[2]),
        centre: error_stats(&centre).expect("window is non-empty"),
    })
}
