use serde::{Deserialize, Serialize};

use super::Session;
use crate::geometry::{Point3D, Pose2D};
use crate::scenarios::ScenarioEvent;
use crate::tracking::Hand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: u32,
    pub pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    pub id: u32,
    /// Ground truth.
    pub pose: Pose2D,
    /// Pose fitted to the mat readings.
    pub estimate: Pose2D,
    pub hand: Option<Hand>,
    pub focus: Option<[f64; 3]>,
    pub requested: Option<[f64; 3]>,
    pub quality: Option<f64>,
    pub edge_limited: bool,
    /// Set while a scene burst plays for the served hand.
    pub modulation_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub hand: Hand,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub stale: bool,
    pub observed: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rows: usize,
    pub churn: u32,
    pub edge_limited_fraction: f64,
    pub unserved_hands: u32,
}

/// Everything a viewer needs to draw one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub t: f64,
    pub robots: Vec<RobotState>,
    pub platforms: Vec<PlatformState>,
    pub hands: Vec<HandState>,
    pub scenario: Option<String>,
    /// Scene events not yet drained.
    pub events: Vec<ScenarioEvent>,
    pub metrics: MetricsSummary,
}

impl Session {
    pub fn snapshot(&self) -> StateSnapshot {
        let arr = |p: Point3D| p.to_array();
        let last = self.metrics.last();
        StateSnapshot {
            tick: self.tick,
            t: self.time(),
            robots: self
                .robots
                .iter()
                .map(|r| RobotState { id: r.id, pose: r.pose })
                .collect(),
            platforms: self
                .platforms
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d = self.delivered[i];
                    PlatformState {
                        id: p.id,
                        pose: p.pose,
                        estimate: self.estimates[i],
                        hand: self.assignment[i],
                        focus: d.map(|d| arr(d.focus)),
                        requested: d.map(|d| arr(d.requested)),
                        quality: d.map(|d| d.quality),
                        edge_limited: p.edge_limited,
                        modulation_hz: d.and_then(|d| self.active_modulation(d.hand)),
                    }
                })
                .collect(),
            hands: self
                .tracks
                .iter()
                .map(|t| HandState {
                    hand: t.hand,
                    position: arr(t.position),
                    velocity: arr(t.velocity),
                    stale: t.stale,
                    observed: t.observed.map(arr),
                })
                .collect(),
            scenario: self.scenario.as_ref().map(|s| s.name().to_string()),
            events: self.pending_events.clone(),
            metrics: MetricsSummary {
                rows: self.metrics.len(),
                churn: self.churn,
                edge_limited_fraction: last.map_or(0.0, |r| r.edge_limited_fraction),
                unserved_hands: last.map_or(0, |r| r.unserved),
            },
        }
    }
}
