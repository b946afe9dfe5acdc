//! Conveniences for assembling scenarios in code.

use super::{
    AgentTrack, AgentType, IntersectionRegion, Lane, MapContext, Scenario, ScenarioParts, StopLine,
    Trajectory, TrajectoryState, DT, HISTORY_LEN,
};
use crate::error::Result;
use crate::geometry::{Polygon, Vec2};

/// `n` states moving at constant velocity from `start`.
pub fn constant_velocity(start: Vec2, heading: f64, speed: f64, n: usize) -> Trajectory {
    let u = Vec2::from_heading(heading);
    let states = (0..n)
        .map(|i| {
            let p = start + u * (speed * DT * i as f64);
            TrajectoryState { x: p.x, y: p.y, heading, speed }
        })
        .collect();
    Trajectory::new(states).expect("finite constant-velocity trajectory")
}

/// An 11-step constant-velocity history ending at `end`.
pub fn straight_history(end: Vec2, heading: f64, speed: f64) -> Trajectory {
    let back = Vec2::from_heading(heading) * (speed * DT * (HISTORY_LEN - 1) as f64);
    constant_velocity(end - back, heading, speed, HISTORY_LEN)
}

impl AgentTrack {
    /// A fully observed agent at constant velocity.
    pub fn constant(
        id: &str,
        agent_type: AgentType,
        start: Vec2,
        heading: f64,
        speed: f64,
        n: usize,
    ) -> AgentTrack {
        let (length, width) = match agent_type {
            AgentType::Vehicle => (4.5, 2.0),
            AgentType::Cyclist => (1.8, 0.6),
            AgentType::Pedestrian => (0.5, 0.5),
        };
        AgentTrack {
            id: id.into(),
            agent_type,
            states: constant_velocity(start, heading, speed, n).states().to_vec(),
            valid: vec![true; n],
            length,
            width,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioBuilder {
    parts: ScenarioParts,
}

impl ScenarioBuilder {
    /// Ego at the origin heading east at `speed`, 4.5 m × 2.0 m, empty map.
    pub fn new(id: &str, speed: f64) -> Self {
        ScenarioBuilder {
            parts: ScenarioParts {
                id: id.into(),
                ego_history: straight_history(Vec2::ZERO, 0.0, speed),
                agents: vec![],
                map: MapContext::default(),
                ego_length: 4.5,
                ego_width: 2.0,
            },
        }
    }

    pub fn history(mut self, history: Trajectory) -> Self {
        self.parts.ego_history = history;
        self
    }

    pub fn ego_size(mut self, length: f64, width: f64) -> Self {
        self.parts.ego_length = length;
        self.parts.ego_width = width;
        self
    }

    pub fn agent(mut self, agent: AgentTrack) -> Self {
        self.parts.agents.push(agent);
        self
    }

    pub fn lane(mut self, lane: Lane) -> Self {
        self.parts.map.lanes.push(lane);
        self
    }

    pub fn crosswalk(mut self, poly: Polygon) -> Self {
        self.parts.map.crosswalks.push(poly);
        self
    }

    pub fn stop_line(mut self, line: StopLine) -> Self {
        self.parts.map.stop_lines.push(line);
        self
    }

    pub fn drivable(mut self, poly: Polygon) -> Self {
        self.parts.map.drivable_area.push(poly);
        self
    }

    pub fn intersection(mut self, center: Vec2, radius: f64) -> Self {
        self.parts
            .map
            .intersections
            .get_or_insert_with(Vec::new)
            .push(IntersectionRegion { center, radius });
        self
    }

    pub fn build(self) -> Result<Scenario> {
        Scenario::new(self.parts)
    }
}

/// Axis-aligned rectangle as a polygon.
pub fn rectangle(min: Vec2, max: Vec2) -> Polygon {
    Polygon::new(vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
        .expect("non-degenerate rectangle")
}
