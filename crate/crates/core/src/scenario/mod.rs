//! Scenario data model: ego history, agent tracks, map context and the
//! candidate trajectories produced by an upstream generator.
//!
//! All types are validated on construction and immutable afterwards. The
//! only way to obtain a [`Scenario`] or [`CandidateSet`] is through a
//! constructor that checks every invariant, so downstream code never sees a
//! non-finite number.

mod builder;
mod document;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Polygon, Vec2};

pub use builder::{constant_velocity, rectangle, straight_history, ScenarioBuilder};
pub use document::{load_document, load_scenario, save_document, save_scenario, ScenarioDocument};

/// Sampling interval of every trajectory, seconds (10 Hz).
pub const DT: f64 = 0.1;
/// Number of ego history steps (1.1 s).
pub const HISTORY_LEN: usize = 11;
/// Number of future steps in a candidate trajectory (5.0 s).
pub const HORIZON: usize = 50;
/// Tolerance on the confidence simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// One sample of a planar trajectory: position, heading and speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl TrajectoryState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Result<Self> {
        let s = TrajectoryState { x, y, heading, speed };
        s.validate("state")?;
        Ok(s)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_heading(self.heading) * self.speed
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.heading, self.speed]
    }

    fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("x", self.x),
            ("y", self.y),
            ("heading", self.heading),
            ("speed", self.speed),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{path}.{name}"), "non-finite value"));
            }
        }
        if self.speed < 0.0 {
            return Err(Error::validation(format!("{path}.speed"), "speed must be non-negative"));
        }
        Ok(())
    }
}

/// An ordered sequence of states sampled every [`DT`] seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    states: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn new(states: Vec<TrajectoryState>) -> Result<Self> {
        Self::validated(states, "states")
    }

    pub(crate) fn validated(states: Vec<TrajectoryState>, path: &str) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::validation(path, "trajectory must contain at least one state"));
        }
        for (i, s) in states.iter().enumerate() {
            s.validate(&format!("{path}[{i}]"))?;
        }
        Ok(Trajectory { states })
    }

    /// Builds a trajectory from `[x, y, heading, speed]` rows.
    pub fn from_rows(rows: &[[f64; 4]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| TrajectoryState { x: r[0], y: r[1], heading: r[2], speed: r[3] })
                .collect(),
        )
    }

    pub fn states(&self) -> &[TrajectoryState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        DT
    }

    pub fn first(&self) -> &TrajectoryState {
        &self.states[0]
    }

    pub fn last(&self) -> &TrajectoryState {
        &self.states[self.states.len() - 1]
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.states.iter().map(TrajectoryState::position)
    }

    pub fn to_rows(&self) -> Vec<[f64; 4]> {
        self.states.iter().map(TrajectoryState::to_array).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Vehicle,
    Pedestrian,
    Cyclist,
}

impl AgentType {
    pub fn is_vru(self) -> bool {
        matches!(self, AgentType::Pedestrian | AgentType::Cyclist)
    }
}

/// A surrounding agent's future, aligned with the ego candidate timeline.
/// Missing observations are carried in `valid` rather than interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrack {
    pub id: String,
    pub agent_type: AgentType,
    pub states: Vec<TrajectoryState>,
    pub valid: Vec<bool>,
    pub length: f64,
    pub width: f64,
}

impl AgentTrack {
    /// The agent's state at step `t`, if observed.
    pub fn state_at(&self, t: usize) -> Option<&TrajectoryState> {
        match self.valid.get(t) {
            Some(true) => self.states.get(t),
            _ => None,
        }
    }

    pub fn box_at(&self, t: usize) -> Option<OrientedBox> {
        self.state_at(t)
            .map(|s| OrientedBox::new(s.position(), s.heading, self.length, self.width))
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.states.len() != self.valid.len() {
            return Err(Error::validation(
                format!("{path}.valid"),
                format!(
                    "states and valid mask lengths differ ({} vs {})",
                    self.states.len(),
                    self.valid.len()
                ),
            ));
        }
        for (name, v) in [("length", self.length), ("width", self.width)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{path}.{name}"), "must be finite and > 0"));
            }
        }
        for (i, s) in self.states.iter().enumerate() {
            s.validate(&format!("{path}.states[{i}]"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    pub centerline: Vec<Vec2>,
    pub half_width: f64,
    /// Travel direction at each centerline vertex, radians.
    pub headings: Vec<f64>,
    pub speed_limit: Option<f64>,
}

impl Lane {
    /// Builds a lane, deriving per-vertex headings from the polyline.
    pub fn new(centerline: Vec<Vec2>, half_width: f64, speed_limit: Option<f64>) -> Self {
        let headings = polyline_headings(&centerline);
        Lane { centerline, half_width, headings, speed_limit }
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.centerline.len() < 2 {
            return Err(Error::validation(format!("{path}.centerline"), "needs at least 2 vertices"));
        }
        if let Some(i) = self.centerline.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("{path}.centerline[{i}]"), "non-finite value"));
        }
        if self.headings.len() != self.centerline.len() {
            return Err(Error::validation(
                format!("{path}.headings"),
                "one heading per centerline vertex required",
            ));
        }
        if self.headings.iter().any(|h| !h.is_finite()) {
            return Err(Error::validation(format!("{path}.headings"), "non-finite value"));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::validation(format!("{path}.half_width"), "must be finite and > 0"));
        }
        if let Some(v) = self.speed_limit {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{path}.speed_limit"), "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Heading of each vertex: the direction of the next non-degenerate segment
/// (the previous one for the final vertex). Zero if the whole polyline is
/// degenerate.
pub fn polyline_headings(points: &[Vec2]) -> Vec<f64> {
    let n = points.len();
    let seg_heading = |i: usize| -> Option<f64> {
        let d = points[i + 1] - points[i];
        (d.norm() > 0.0).then(|| d.heading())
    };
    let mut out = Vec::with_capacity(n);
    let mut last = None;
    for i in 0..n {
        let h = (i..n.saturating_sub(1))
            .find_map(seg_heading)
            .or(last)
            .or_else(|| (0..n.saturating_sub(1)).rev().find_map(seg_heading))
            .unwrap_or(0.0);
        last = Some(h);
        out.push(h);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopControl {
    Signal,
    StopSign,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPhase {
    Red,
    Yellow,
    Green,
    FlashingRed,
    Unknown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StopLine {
    pub start: Vec2,
    pub end: Vec2,
    pub control: StopControl,
    pub signal_timeline: Option<Vec<SignalPhase>>,
}

impl StopLine {
    pub fn phase_at(&self, t: usize) -> Option<SignalPhase> {
        self.signal_timeline.as_ref().and_then(|tl| tl.get(t).copied())
    }

    pub fn has_signal(&self) -> bool {
        self.control == StopControl::Signal && self.signal_timeline.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRegion {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapContext {
    pub lanes: Vec<Lane>,
    pub crosswalks: Vec<Polygon>,
    pub stop_lines: Vec<StopLine>,
    pub drivable_area: Vec<Polygon>,
    pub intersections: Option<Vec<IntersectionRegion>>,
}

impl MapContext {
    fn validate(&self, path: &str) -> Result<()> {
        for (i, lane) in self.lanes.iter().enumerate() {
            lane.validate(&format!("{path}.lanes[{i}]"))?;
        }
        for (i, p) in self.crosswalks.iter().enumerate() {
            p.validate(&format!("{path}.crosswalks[{i}]"))?;
        }
        for (i, p) in self.drivable_area.iter().enumerate() {
            p.validate(&format!("{path}.drivable_area[{i}]"))?;
        }
        for (i, sl) in self.stop_lines.iter().enumerate() {
            let sp = format!("{path}.stop_lines[{i}]");
            if !(sl.start.is_finite() && sl.end.is_finite()) {
                return Err(Error::validation(sp, "non-finite endpoint"));
            }
            if let Some(tl) = &sl.signal_timeline {
                if tl.len() < HORIZON {
                    return Err(Error::validation(
                        format!("{sp}.signal_timeline"),
                        format!("must cover the {HORIZON}-step horizon, got {}", tl.len()),
                    ));
                }
            }
        }
        for (i, r) in self.intersections.iter().flatten().enumerate() {
            let rp = format!("{path}.intersections[{i}]");
            if !r.center.is_finite() {
                return Err(Error::validation(format!("{rp}.center"), "non-finite value"));
            }
            if !(r.radius.is_finite() && r.radius > 0.0) {
                return Err(Error::validation(format!("{rp}.radius"), "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// The owned pieces of a [`Scenario`], used to build or rebuild one.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParts {
    pub id: String,
    pub ego_history: Trajectory,
    pub agents: Vec<AgentTrack>,
    pub map: MapContext,
    pub ego_length: f64,
    pub ego_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    id: String,
    ego_history: Trajectory,
    agents: Vec<AgentTrack>,
    map: MapContext,
    ego_length: f64,
    ego_width: f64,
}

impl Scenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let ScenarioParts { id, ego_history, agents, map, ego_length, ego_width } = parts;
        if ego_history.len() != HISTORY_LEN {
            return Err(Error::validation(
                "ego.history",
                format!("ego_history length must be {HISTORY_LEN}, got {}", ego_history.len()),
            ));
        }
        for (name, v) in [("length", ego_length), ("width", ego_width)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("ego.{name}"), "must be finite and > 0"));
            }
        }
        for (i, a) in agents.iter().enumerate() {
            a.validate(&format!("agents[{i}]"))?;
        }
        map.validate("map")?;
        Ok(Scenario { id, ego_history, agents, map, ego_length, ego_width })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ego_history(&self) -> &Trajectory {
        &self.ego_history
    }

    /// The last observed ego state, where every candidate starts from.
    pub fn ego_current(&self) -> &TrajectoryState {
        self.ego_history.last()
    }

    pub fn agents(&self) -> &[AgentTrack] {
        &self.agents
    }

    pub fn map(&self) -> &MapContext {
        &self.map
    }

    pub fn ego_length(&self) -> f64 {
        self.ego_length
    }

    pub fn ego_width(&self) -> f64 {
        self.ego_width
    }

    pub fn ego_box(&self, state: &TrajectoryState) -> OrientedBox {
        OrientedBox::new(state.position(), state.heading, self.ego_length, self.ego_width)
    }

    pub fn to_parts(&self) -> ScenarioParts {
        ScenarioParts {
            id: self.id.clone(),
            ego_history: self.ego_history.clone(),
            agents: self.agents.clone(),
            map: self.map.clone(),
            ego_length: self.ego_length,
            ego_width: self.ego_width,
        }
    }
}

/// K candidate futures with their confidence simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    trajectories: Vec<Trajectory>,
    confidences: Vec<f64>,
}

impl CandidateSet {
    pub fn new(trajectories: Vec<Trajectory>, confidences: Vec<f64>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::validation("candidates.trajectories", "K must be at least 1"));
        }
        if trajectories.len() != confidences.len() {
            return Err(Error::validation(
                "candidates.confidences",
                format!(
                    "{} confidences for {} trajectories",
                    confidences.len(),
                    trajectories.len()
                ),
            ));
        }
        for (k, t) in trajectories.iter().enumerate() {
            if t.len() != HORIZON {
                return Err(Error::validation(
                    format!("candidates.trajectories[{k}]"),
                    format!("candidate length must be {HORIZON}, got {}", t.len()),
                ));
            }
        }
        for (k, &p) in confidences.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::validation(
                    format!("candidates.confidences[{k}]"),
                    "confidence must lie in [0, 1]",
                ));
            }
        }
        let sum: f64 = confidences.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::validation(
                "candidates.confidences",
                format!("confidences must sum to 1 (got {sum})"),
            ));
        }
        Ok(CandidateSet { trajectories, confidences })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Reorders candidates so that new index `i` holds old index `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} candidates",
                order.len(),
                self.len()
            )));
        }
        CandidateSet::new(
            order.iter().map(|&i| self.trajectories[i].clone()).collect(),
            order.iter().map(|&i| self.confidences[i]).collect(),
        )
    }
}
