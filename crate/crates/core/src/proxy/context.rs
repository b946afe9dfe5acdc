//! Per-scenario and per-candidate precomputation shared by the proxies.

use crate::geometry::{
    kinematics, lateral_offset, wrap_angle, KinematicProfile, LaneProjection, OrientedBox, Region, Vec2,
};
use crate::scenario::{
    AgentTrack, AgentType, IntersectionRegion, Scenario, SignalPhase, StopControl, StopLine, Trajectory,
    TrajectoryState, HORIZON,
};

/// Pedestrians at or above this speed make a nearby crosswalk "active".
const PED_MOVING: f64 = 0.3;
/// Buffer around a crosswalk in which a moving pedestrian activates it, m.
const CROSSWALK_BUFFER: f64 = 5.0;
/// Radius of an intersection inferred from crossing lanes, m.
pub(crate) const INTERSECTION_RADIUS: f64 = 20.0;
/// Lateral slack when deciding whether a point lies alongside a stop line, m.
const LINE_EXTENT_MARGIN: f64 = 1.0;

/// Tunables that are not rule constants.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyParams {
    /// Temperature of the logistic soft step on stop-line progress, 1/m.
    pub sigma_alpha: f64,
    /// Smoothing window for finite-difference kinematics, samples.
    pub window: usize,
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams { sigma_alpha: 10.0, window: 3 }
    }
}

/// A stop line with a travel-aligned frame.
#[derive(Clone, Debug)]
pub struct LineFrame<'a> {
    pub line: &'a StopLine,
    start: Vec2,
    end: Vec2,
    dir: Vec2,
    len: f64,
    /// Unit normal pointing in the ego's initial direction of travel.
    normal: Vec2,
}

impl<'a> LineFrame<'a> {
    fn new(line: &'a StopLine, travel: Vec2) -> Self {
        let d = line.end - line.start;
        let len = d.norm();
        let (dir, mut normal) = if len > 0.0 {
            let u = d * (1.0 / len);
            (u, u.perp())
        } else {
            (travel.perp() * -1.0, travel)
        };
        if normal.dot(travel) < 0.0 {
            normal = -normal;
        }
        LineFrame { line, start: line.start, end: line.end, dir, len, normal }
    }

    /// Signed distance of `p` past the line along the travel direction.
    pub fn progress(&self, p: Vec2) -> f64 {
        (p - self.start).dot(self.normal)
    }

    /// Whether `p` lies alongside the segment (not off its ends).
    pub fn alongside(&self, p: Vec2) -> bool {
        let s = (p - self.start).dot(self.dir);
        s >= -LINE_EXTENT_MARGIN && s <= self.len + LINE_EXTENT_MARGIN
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        crate::geometry::point_segment_distance(p, self.start, self.end)
    }
}

/// Candidate-independent data for one scenario.
pub struct ScenarioContext<'a> {
    pub scenario: &'a Scenario,
    pub ego0: TrajectoryState,
    /// `agent_boxes[j][t]`, `None` where the agent is unobserved.
    pub agent_boxes: Vec<Vec<Option<OrientedBox>>>,
    /// `agent_lanes[j][t][l]`: projection of agent `j` onto lane `l`.
    pub agent_lanes: Vec<Vec<Vec<Option<LaneProjection>>>>,
    /// `crosswalk_active[c][t]`: a moving pedestrian is within the buffer.
    pub crosswalk_active: Vec<Vec<bool>>,
    pub drivable: Option<Region>,
    pub intersections: Vec<IntersectionRegion>,
    pub signal_lines: Vec<LineFrame<'a>>,
    pub stop_sign_lines: Vec<LineFrame<'a>>,
    pub steps: usize,
}

impl<'a> ScenarioContext<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let ego0 = *scenario.ego_current();
        let map = scenario.map();
        let steps = HORIZON;
        let agents = scenario.agents();
        let agent_boxes: Vec<Vec<Option<OrientedBox>>> =
            agents.iter().map(|a| (0..steps).map(|t| a.box_at(t)).collect()).collect();
        let agent_lanes = agents
            .iter()
            .map(|a| {
                (0..steps)
                    .map(|t| match a.state_at(t) {
                        Some(s) => map
                            .lanes
                            .iter()
                            .map(|l| lateral_offset(s.position(), &l.centerline).ok())
                            .collect(),
                        None => vec![],
                    })
                    .collect()
            })
            .collect();
        let crosswalk_active = map
            .crosswalks
            .iter()
            .map(|cw| {
                (0..steps)
                    .map(|t| {
                        agents.iter().any(|a| {
                            a.agent_type == AgentType::Pedestrian
                                && a.state_at(t).is_some_and(|s| {
                                    s.speed >= PED_MOVING && cw.distance_to(s.position()) <= CROSSWALK_BUFFER
                                })
                        })
                    })
                    .collect()
            })
            .collect();
        let drivable = if map.drivable_area.is_empty() { None } else { Region::new(&map.drivable_area).ok() };
        let intersections = match &map.intersections {
            Some(v) => v.clone(),
            None => inferred_intersections(scenario),
        };
        let travel = Vec2::from_heading(ego0.heading);
        let signal_lines = map
            .stop_lines
            .iter()
            .filter(|l| l.has_signal())
            .map(|l| LineFrame::new(l, travel))
            .collect();
        let stop_sign_lines = map
            .stop_lines
            .iter()
            .filter(|l| l.control == StopControl::StopSign)
            .map(|l| LineFrame::new(l, travel))
            .collect();
        ScenarioContext {
            scenario,
            ego0,
            agent_boxes,
            agent_lanes,
            crosswalk_active,
            drivable,
            intersections,
            signal_lines,
            stop_sign_lines,
            steps,
        }
    }

    pub fn agents(&self) -> &'a [AgentTrack] {
        self.scenario.agents()
    }

    pub fn agent_state(&self, j: usize, t: usize) -> Option<&'a TrajectoryState> {
        self.scenario.agents()[j].state_at(t)
    }

    pub fn in_intersection(&self, p: Vec2) -> bool {
        self.intersections.iter().any(|r| p.distance(r.center) <= r.radius)
    }
}

/// Centers of strict interior crossings between different lane polylines.
fn inferred_intersections(scenario: &Scenario) -> Vec<IntersectionRegion> {
    let lanes = &scenario.map().lanes;
    let mut out: Vec<IntersectionRegion> = Vec::new();
    for (i, a) in lanes.iter().enumerate() {
        for b in &lanes[i + 1..] {
            for wa in a.centerline.windows(2) {
                for wb in b.centerline.windows(2) {
                    if let Some(p) = proper_crossing(wa[0], wa[1], wb[0], wb[1]) {
                        if !out.iter().any(|r| r.center.distance(p) < 1e-6) {
                            out.push(IntersectionRegion { center: p, radius: INTERSECTION_RADIUS });
                        }
                    }
                }
            }
        }
    }
    out
}

fn proper_crossing(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> Option<Vec2> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let t = (q1 - p1).cross(s) / denom;
    let u = (q1 - p1).cross(r) / denom;
    (t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0).then(|| p1 + r * t)
}

/// Data derived from one candidate trajectory.
pub struct CandidateContext<'a> {
    pub traj: &'a Trajectory,
    pub kin: Option<KinematicProfile>,
    pub boxes: Vec<OrientedBox>,
    pub fronts: Vec<Vec2>,
    /// `lanes[t][l]`: projection of the ego center onto lane `l`.
    pub lanes: Vec<Vec<Option<LaneProjection>>>,
    /// Index of the lane the ego is taken to occupy at each step.
    pub ego_lane: Vec<Option<usize>>,
}

impl<'a> CandidateContext<'a> {
    pub fn new(ctx: &ScenarioContext<'_>, traj: &'a Trajectory, params: &ProxyParams) -> Self {
        let s = ctx.scenario;
        let kin = kinematics(traj, params.window).ok();
        let boxes: Vec<OrientedBox> = traj.states().iter().map(|st| s.ego_box(st)).collect();
        let fronts = boxes.iter().map(OrientedBox::front).collect();
        let map_lanes = &s.map().lanes;
        let lanes: Vec<Vec<Option<LaneProjection>>> = traj
            .states()
            .iter()
            .map(|st| map_lanes.iter().map(|l| lateral_offset(st.position(), &l.centerline).ok()).collect())
            .collect();
        let ego_lane = traj
            .states()
            .iter()
            .zip(&lanes)
            .map(|(st, projs)| choose_lane(st.heading, projs, map_lanes.iter().map(|l| l.half_width)))
            .collect();
        CandidateContext { traj, kin, boxes, fronts, lanes, ego_lane }
    }

    pub fn states(&self) -> &'a [TrajectoryState] {
        self.traj.states()
    }

    pub fn len(&self) -> usize {
        self.traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.is_empty()
    }

    pub fn any_speed_at_least(&self, v: f64) -> bool {
        self.states().iter().any(|s| s.speed >= v)
    }

    pub fn ego_projection(&self, t: usize) -> Option<(usize, LaneProjection)> {
        let l = self.ego_lane[t]?;
        self.lanes[t][l].map(|p| (l, p))
    }
}

/// Among lanes containing the point prefer the best-aligned, then the
/// nearest; with no containing lane take the nearest overall.
fn choose_lane(
    heading: f64,
    projs: &[Option<LaneProjection>],
    half_widths: impl Iterator<Item = f64>,
) -> Option<usize> {
    let mut best: Option<(usize, (bool, bool, f64))> = None;
    for (l, (p, hw)) in projs.iter().zip(half_widths).enumerate() {
        let Some(p) = p else { continue };
        let inside = p.d_lat.abs() <= hw;
        let aligned = wrap_angle(heading - p.tangent_heading).abs() <= std::f64::consts::FRAC_PI_2;
        // Lower key wins.
        let key = (!inside, !(inside && aligned), p.d_lat.abs());
        if best.as_ref().is_none_or(|(_, k)| key < *k) {
            best = Some((l, key));
        }
    }
    best.map(|(l, _)| l)
}

/// Red-like weight of a signal phase: red 1, flashing red 0.5.
pub(crate) fn red_weight(phase: Option<SignalPhase>) -> f64 {
    match phase {
        Some(SignalPhase::Red) => 1.0,
        Some(SignalPhase::FlashingRed) => 0.5,
        _ => 0.0,
    }
}
