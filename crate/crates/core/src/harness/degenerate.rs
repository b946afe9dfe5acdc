//! Degenerate-input corpus for the finiteness checks.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::Result;
use crate::geometry::{Polygon, Vec2};
use crate::scenario::{
    constant_velocity, rectangle, straight_history, AgentTrack, AgentType, CandidateSet, Lane, MapContext, Scenario,
    ScenarioParts, SignalPhase, StopControl, StopLine, Trajectory, TrajectoryState, DT, HORIZON,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    StationaryEgo,
    ZeroLengthSegments,
    MissingMap,
    CoincidentAgents,
    ExtremeKinematics,
    SparseObservations,
    SliverGeometry,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::StationaryEgo,
        Category::ZeroLengthSegments,
        Category::MissingMap,
        Category::CoincidentAgents,
        Category::ExtremeKinematics,
        Category::SparseObservations,
        Category::SliverGeometry,
    ];
}

pub const CASES_PER_CATEGORY: usize = 50;

#[derive(Clone, Debug)]
pub struct DegenerateCase {
    pub category: Category,
    pub scenario: Scenario,
    pub candidates: CandidateSet,
}

pub fn degenerate_corpus(seed: u64) -> Result<Vec<DegenerateCase>> {
    let mut out = Vec::with_capacity(Category::ALL.len() * CASES_PER_CATEGORY);
    for (ci, &category) in Category::ALL.iter().enumerate() {
        for i in 0..CASES_PER_CATEGORY {
            out.push(degenerate_case(seed, category, (ci * CASES_PER_CATEGORY + i) as u64)?);
        }
    }
    Ok(out)
}

pub fn degenerate_case(seed: u64, category: Category, index: u64) -> Result<DegenerateCase> {
    let mut rng = rng_for(seed, index);
    let id = format!("degenerate-{index:04}");
    let (scenario, candidates) = match category {
        Category::StationaryEgo => stationary(&mut rng, &id)?,
        Category::ZeroLengthSegments => zero_length(&mut rng, &id)?,
        Category::MissingMap => missing_map(&mut rng, &id)?,
        Category::CoincidentAgents => coincident(&mut rng, &id)?,
        Category::ExtremeKinematics => extreme(&mut rng, &id)?,
        Category::SparseObservations => sparse(&mut rng, &id)?,
        Category::SliverGeometry => sliver(&mut rng, &id)?,
    };
    Ok(DegenerateCase { category, scenario, candidates })
}

fn full_map(limit: Option<f64>) -> MapContext {
    MapContext {
        lanes: vec![
            Lane::new(vec![Vec2::new(-50.0, 0.0), Vec2::new(200.0, 0.0)], 1.75, limit),
            Lane::new(vec![Vec2::new(200.0, 3.5), Vec2::new(-50.0, 3.5)], 1.75, limit),
        ],
        crosswalks: vec![rectangle(Vec2::new(20.0, -3.0), Vec2::new(24.0, 6.5))],
        stop_lines: vec![StopLine {
            start: Vec2::new(15.0, -1.75),
            end: Vec2::new(15.0, 1.75),
            control: StopControl::Signal,
            signal_timeline: Some(vec![SignalPhase::Red; HORIZON]),
        }],
        drivable_area: vec![rectangle(Vec2::new(-50.0, -2.75), Vec2::new(200.0, 6.25))],
        intersections: None,
    }
}

fn parts(id: &str, history: Trajectory, agents: Vec<AgentTrack>, map: MapContext) -> ScenarioParts {
    ScenarioParts { id: id.into(), ego_history: history, agents, map, ego_length: 4.5, ego_width: 2.0 }
}

fn uniform_set(trajs: Vec<Trajectory>) -> Result<CandidateSet> {
    let k = trajs.len();
    let p = super::synth::simplex(&vec![1.0; k]);
    CandidateSet::new(trajs, p)
}

/// Dirichlet-ish weights with some exact zeros and ties.
fn skewed_set(rng: &mut ChaCha8Rng, trajs: Vec<Trajectory>) -> Result<CandidateSet> {
    let raw: Vec<f64> = (0..trajs.len())
        .map(|_| match rng.random_range(0..3) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    CandidateSet::new(trajs, super::synth::simplex(&raw))
}

fn stationary(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let history = straight_history(Vec2::ZERO, 0.0, 0.0);
    let mut agents = vec![AgentTrack::constant("lead", AgentType::Vehicle, Vec2::new(rng.random_range(4.5..12.0), 0.0), 0.0, 0.0, HORIZON)];
    agents.push(AgentTrack::constant("ped", AgentType::Pedestrian, Vec2::new(22.0, -4.0), PI / 2.0, 1.2, HORIZON));
    let s = Scenario::new(parts(id, history, agents, full_map(Some(13.4))))?;
    let creep = rng.random_range(0.0..0.05);
    let trajs = vec![
        constant_velocity(Vec2::ZERO, 0.0, 0.0, HORIZON),
        constant_velocity(Vec2::ZERO, rng.random_range(-PI..PI), 0.0, HORIZON),
        constant_velocity(Vec2::ZERO, 0.0, creep, HORIZON),
    ];
    Ok((s, skewed_set(rng, trajs)?))
}

fn zero_length(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let p = Vec2::new(rng.random_range(-5.0..5.0), 0.0);
    let q = Vec2::new(100.0, 0.0);
    let mut map = full_map(Some(11.0));
    map.lanes = vec![
        Lane::new(vec![p, p, q, q], 1.75, Some(11.0)),
        Lane::new(vec![q, q], 1.75, None),
        Lane::new(vec![Vec2::new(30.0, 30.0); 4], 1.75, Some(5.0)),
    ];
    map.stop_lines = vec![
        StopLine { start: Vec2::new(15.0, 0.0), end: Vec2::new(15.0, 0.0), control: StopControl::StopSign, signal_timeline: None },
        StopLine {
            start: Vec2::new(18.0, 0.0),
            end: Vec2::new(18.0, 0.0),
            control: StopControl::Signal,
            signal_timeline: Some(vec![SignalPhase::Red; HORIZON]),
        },
    ];
    let v = rng.random_range(0.0..10.0);
    let history = straight_history(Vec2::ZERO, 0.0, v);
    // candidate that pauses: repeated positions mid-horizon
    let mut states = constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON).states().to_vec();
    for i in 10..20 {
        states[i] = states[9];
    }
    let agents = vec![AgentTrack::constant("a", AgentType::Cyclist, Vec2::new(10.0, 1.0), 0.0, 0.0, HORIZON)];
    let s = Scenario::new(parts(id, history, agents, map))?;
    let trajs = vec![Trajectory::new(states)?, constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON)];
    Ok((s, uniform_set(trajs)?))
}

fn missing_map(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let v = rng.random_range(0.0..15.0);
    let mut map = MapContext::default();
    match rng.random_range(0..4) {
        0 => {}
        1 => {
            map.stop_lines.push(StopLine {
                start: Vec2::new(20.0, -2.0),
                end: Vec2::new(20.0, 2.0),
                control: StopControl::Signal,
                signal_timeline: None,
            });
        }
        2 => {
            map.stop_lines.push(StopLine {
                start: Vec2::new(20.0, -2.0),
                end: Vec2::new(20.0, 2.0),
                control: StopControl::Signal,
                signal_timeline: Some(vec![SignalPhase::Unknown; HORIZON]),
            });
            map.crosswalks.push(rectangle(Vec2::new(30.0, -3.0), Vec2::new(34.0, 3.0)));
        }
        _ => {
            map.intersections = Some(vec![]);
        }
    }
    let agents = vec![
        AgentTrack::constant("v", AgentType::Vehicle, Vec2::new(rng.random_range(5.0..30.0), 0.0), 0.0, v * 0.5, HORIZON),
        AgentTrack::constant("p", AgentType::Pedestrian, Vec2::new(25.0, -5.0), PI / 2.0, 1.0, HORIZON),
    ];
    let s = Scenario::new(parts(id, straight_history(Vec2::ZERO, 0.0, v), agents, map))?;
    let trajs = vec![
        constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON),
        constant_velocity(Vec2::new(v * DT, 0.0), 0.3, v, HORIZON),
    ];
    Ok((s, skewed_set(rng, trajs)?))
}

fn coincident(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let v = rng.random_range(0.0..12.0);
    let cand = constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON);
    let twin = AgentTrack {
        id: "twin".into(),
        agent_type: AgentType::Vehicle,
        states: cand.states().to_vec(),
        valid: vec![true; HORIZON],
        length: 4.5,
        width: 2.0,
    };
    let mut peds: Vec<AgentTrack> = (0..3)
        .map(|i| AgentTrack::constant(&format!("p{i}"), AgentType::Pedestrian, Vec2::new(5.0, 0.0), 0.0, v, HORIZON))
        .collect();
    peds.push(twin);
    let s = Scenario::new(parts(id, straight_history(Vec2::ZERO, 0.0, v), peds, full_map(Some(13.4))))?;
    Ok((s, skewed_set(rng, vec![cand.clone(), cand])?))
}

fn extreme(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let far = if rng.random_bool(0.5) { 1e6 } else { 0.0 };
    let origin = Vec2::new(far, -far);
    let v = rng.random_range(30.0..60.0);
    let history = straight_history(origin, 0.0, v);
    let mut map = full_map(Some(13.4));
    for lane in &mut map.lanes {
        *lane = Lane::new(lane.centerline.iter().map(|&p| p + origin).collect(), lane.half_width, lane.speed_limit);
    }
    map.crosswalks = map.crosswalks.iter().map(|p| p.translated(origin)).collect();
    map.drivable_area = map.drivable_area.iter().map(|p| p.translated(origin)).collect();
    for sl in &mut map.stop_lines {
        sl.start = sl.start + origin;
        sl.end = sl.end + origin;
    }
    // teleporting, heading-flipping candidate
    let wild: Vec<TrajectoryState> = (0..HORIZON)
        .map(|i| TrajectoryState {
            x: origin.x + if i % 2 == 0 { 100.0 * i as f64 } else { -50.0 },
            y: origin.y + if i % 3 == 0 { 40.0 } else { -40.0 },
            heading: if i % 2 == 0 { PI } else { -PI + 1e-12 },
            speed: if i % 5 == 0 { 0.0 } else { 200.0 },
        })
        .collect();
    let agents =
        vec![AgentTrack::constant("fast", AgentType::Vehicle, origin + Vec2::new(20.0, 0.0), PI, 80.0, HORIZON)];
    let s = Scenario::new(parts(id, history, agents, map))?;
    let trajs = vec![Trajectory::new(wild)?, constant_velocity(origin + Vec2::new(v * DT, 0.0), 0.0, v, HORIZON)];
    Ok((s, skewed_set(rng, trajs)?))
}

fn sparse(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let v = rng.random_range(1.0..12.0);
    let mut agents = Vec::new();
    for (i, ty) in [AgentType::Vehicle, AgentType::Pedestrian, AgentType::Cyclist].into_iter().enumerate() {
        let mut a = AgentTrack::constant(&format!("s{i}"), ty, Vec2::new(8.0 + 4.0 * i as f64, 0.5), 0.0, 1.0, HORIZON);
        let mode = rng.random_range(0..3);
        for (t, valid) in a.valid.iter_mut().enumerate() {
            *valid = match mode {
                0 => false,
                1 => t == rng.random_range(0..HORIZON),
                _ => rng.random_bool(0.1),
            };
        }
        agents.push(a);
    }
    // a short track that ends before the horizon
    let short = AgentTrack::constant("short", AgentType::Vehicle, Vec2::new(15.0, 0.0), 0.0, v, 5);
    agents.push(short);
    let mut map = full_map(None);
    map.stop_lines[0].signal_timeline = Some(vec![SignalPhase::Unknown; HORIZON]);
    let s = Scenario::new(parts(id, straight_history(Vec2::ZERO, 0.0, v), agents, map))?;
    let trajs = vec![constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON)];
    Ok((s, uniform_set(trajs)?))
}

fn sliver(rng: &mut ChaCha8Rng, id: &str) -> Result<(Scenario, CandidateSet)> {
    let v = rng.random_range(0.0..12.0);
    let thin = rng.random_range(1e-6..1e-3);
    let mut map = full_map(Some(9.0));
    map.crosswalks = vec![rectangle(Vec2::new(20.0, -3.0), Vec2::new(20.0 + thin, 6.5))];
    let l_shape = Polygon::new(vec![
        Vec2::new(-50.0, -2.0),
        Vec2::new(60.0, -2.0),
        Vec2::new(60.0, 60.0),
        Vec2::new(58.0, 60.0),
        Vec2::new(58.0, 2.0),
        Vec2::new(-50.0, 2.0),
    ])?;
    map.drivable_area = vec![l_shape, rectangle(Vec2::new(0.0, 0.0), Vec2::new(thin, thin))];
    map.intersections = Some(vec![crate::scenario::IntersectionRegion { center: Vec2::new(59.0, 0.0), radius: thin }]);
    let tiny = AgentTrack {
        length: thin,
        width: thin,
        ..AgentTrack::constant("dust", AgentType::Pedestrian, Vec2::new(10.0, 0.0), 0.0, 0.0, HORIZON)
    };
    let s = Scenario::new(parts(id, straight_history(Vec2::ZERO, 0.0, v), vec![tiny], map))?;
    let trajs = vec![
        constant_velocity(Vec2::new(v * DT, 0.0), 0.0, v, HORIZON),
        constant_velocity(Vec2::new(v * DT, 0.0), PI / 2.0, v, HORIZON),
        constant_velocity(Vec2::new(v * DT, 0.0), thin, v, HORIZON),
    ];
    Ok((s, skewed_set(rng, trajs)?))
}
