//! Canonical JSON document format for scenarios and candidate sets.
//!
//! ```text
//! { "id": ..., "ego": {"history": [[x,y,heading,speed], ...], "length": .., "width": ..},
//!   "agents": [{id, type, states, valid, length, width}, ...],
//!   "map": {lanes, crosswalks, stop_lines, drivable_area, intersections?},
//!   "candidates"?: {"trajectories": K×50×4, "confidences": [K]},
//!   "ground_truth"?: 50×4 }
//! ```
//!
//! Key order is fixed by the struct layout below and floats are written with
//! shortest round-trip formatting, so serialization is byte-deterministic.

use serde::{Deserialize, Serialize};

use super::{
    polyline_headings, AgentTrack, AgentType, CandidateSet, IntersectionRegion, Lane, MapContext,
    Scenario, ScenarioParts, SignalPhase, StopControl, StopLine, Trajectory, TrajectoryState,
};
use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};

/// A scenario together with the optional payloads a document may carry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDocument {
    pub scenario: Scenario,
    pub candidates: Option<CandidateSet>,
    pub ground_truth: Option<Trajectory>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRoot {
    id: String,
    ego: DocEgo,
    agents: Vec<DocAgent>,
    map: DocMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    candidates: Option<DocCandidates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<Vec<[f64; 4]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocEgo {
    history: Vec<[f64; 4]>,
    length: f64,
    width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocAgent {
    id: String,
    #[serde(rename = "type")]
    agent_type: AgentType,
    states: Vec<[f64; 4]>,
    valid: Vec<bool>,
    length: f64,
    width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocMap {
    lanes: Vec<DocLane>,
    crosswalks: Vec<Vec<Vec2>>,
    stop_lines: Vec<DocStopLine>,
    drivable_area: Vec<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intersections: Option<Vec<IntersectionRegion>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLane {
    centerline: Vec<Vec2>,
    half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    headings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_limit: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocStopLine {
    start: Vec2,
    end: Vec2,
    control: StopControl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signal_timeline: Option<Vec<SignalPhase>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocCandidates {
    trajectories: Vec<Vec<[f64; 4]>>,
    confidences: Vec<f64>,
}

fn rows_to_states(rows: &[[f64; 4]]) -> Vec<TrajectoryState> {
    rows.iter()
        .map(|r| TrajectoryState { x: r[0], y: r[1], heading: r[2], speed: r[3] })
        .collect()
}

/// Parses and validates a scenario document, ignoring any candidates.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario> {
    load_document(bytes).map(|d| d.scenario)
}

/// Parses and validates a full document.
pub fn load_document(bytes: &[u8]) -> Result<ScenarioDocument> {
    let root: DocRoot = serde_json::from_slice(bytes)?;
    root.into_domain()
}

pub fn save_scenario(scenario: &Scenario) -> Vec<u8> {
    encode(&DocRoot::from_domain(scenario, None, None))
}

pub fn save_document(doc: &ScenarioDocument) -> Vec<u8> {
    encode(&DocRoot::from_domain(
        &doc.scenario,
        doc.candidates.as_ref(),
        doc.ground_truth.as_ref(),
    ))
}

fn encode(root: &DocRoot) -> Vec<u8> {
    // Every float in a validated scenario is finite, so this cannot fail.
    let mut out = serde_json::to_vec(root).expect("finite scenario serializes");
    out.push(b'\n');
    out
}

impl DocRoot {
    fn into_domain(self) -> Result<ScenarioDocument> {
        let ego_history = Trajectory::validated(rows_to_states(&self.ego.history), "ego.history")?;
        let agents = self
            .agents
            .into_iter()
            .map(|a| AgentTrack {
                id: a.id,
                agent_type: a.agent_type,
                states: rows_to_states(&a.states),
                valid: a.valid,
                length: a.length,
                width: a.width,
            })
            .collect();
        let map = self.map.into_domain()?;
        let scenario = Scenario::new(ScenarioParts {
            id: self.id,
            ego_history,
            agents,
            map,
            ego_length: self.ego.length,
            ego_width: self.ego.width,
        })?;
        let candidates = match self.candidates {
            None => None,
            Some(c) => {
                let trajectories = c
                    .trajectories
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| {
                        Trajectory::validated(
                            rows_to_states(rows),
                            &format!("candidates.trajectories[{k}]"),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(CandidateSet::new(trajectories, c.confidences)?)
            }
        };
        let ground_truth = self
            .ground_truth
            .map(|rows| Trajectory::validated(rows_to_states(&rows), "ground_truth"))
            .transpose()?;
        Ok(ScenarioDocument { scenario, candidates, ground_truth })
    }

    fn from_domain(s: &Scenario, candidates: Option<&CandidateSet>, gt: Option<&Trajectory>) -> Self {
        DocRoot {
            id: s.id().to_string(),
            ego: DocEgo {
                history: s.ego_history().to_rows(),
                length: s.ego_length(),
                width: s.ego_width(),
            },
            agents: s
                .agents()
                .iter()
                .map(|a| DocAgent {
                    id: a.id.clone(),
                    agent_type: a.agent_type,
                    states: a.states.iter().map(TrajectoryState::to_array).collect(),
                    valid: a.valid.clone(),
                    length: a.length,
                    width: a.width,
                })
                .collect(),
            map: DocMap::from_domain(s.map()),
            candidates: candidates.map(|c| DocCandidates {
                trajectories: c.trajectories().iter().map(Trajectory::to_rows).collect(),
                confidences: c.confidences().to_vec(),
            }),
            ground_truth: gt.map(Trajectory::to_rows),
        }
    }
}

impl DocMap {
    fn into_domain(self) -> Result<MapContext> {
        let lanes = self
            .lanes
            .into_iter()
            .map(|l| {
                let headings = l.headings.unwrap_or_else(|| polyline_headings(&l.centerline));
                Lane {
                    centerline: l.centerline,
                    half_width: l.half_width,
                    headings,
                    speed_limit: l.speed_limit,
                }
            })
            .collect();
        let polygons = |polys: Vec<Vec<Vec2>>, what: &str| -> Result<Vec<Polygon>> {
            polys
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    Polygon::new(p).map_err(|e| match e {
                        Error::Validation { path, message } => {
                            Error::validation(format!("map.{what}[{i}]{path}"), message)
                        }
                        other => other,
                    })
                })
                .collect()
        };
        Ok(MapContext {
            lanes,
            crosswalks: polygons(self.crosswalks, "crosswalks")?,
            stop_lines: self
                .stop_lines
                .into_iter()
                .map(|s| StopLine {
                    start: s.start,
                    end: s.end,
                    control: s.control,
                    signal_timeline: s.signal_timeline,
                })
                .collect(),
            drivable_area: polygons(self.drivable_area, "drivable_area")?,
            intersections: self.intersections,
        })
    }

    fn from_domain(m: &MapContext) -> Self {
        DocMap {
            lanes: m
                .lanes
                .iter()
                .map(|l| DocLane {
                    centerline: l.centerline.clone(),
                    half_width: l.half_width,
                    headings: Some(l.headings.clone()),
                    speed_limit: l.speed_limit,
                })
                .collect(),
            crosswalks: m.crosswalks.iter().map(|p| p.vertices().to_vec()).collect(),
            stop_lines: m
                .stop_lines
                .iter()
                .map(|s| DocStopLine {
                    start: s.start,
                    end: s.end,
                    control: s.control,
                    signal_timeline: s.signal_timeline.clone(),
                })
                .collect(),
            drivable_area: m.drivable_area.iter().map(|p| p.vertices().to_vec()).collect(),
            intersections: m.intersections.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "id": "min",
        "ego": {"history": [[0,0,0,5],[0.5,0,0,5],[1,0,0,5],[1.5,0,0,5],[2,0,0,5],[2.5,0,0,5],
                            [3,0,0,5],[3.5,0,0,5],[4,0,0,5],[4.5,0,0,5],[5,0,0,5]],
                "length": 4.5, "width": 2.0},
        "agents": [],
        "map": {"lanes": [{"centerline": [[0,0],[100,0]], "half_width": 1.75}],
                "crosswalks": [], "stop_lines": [], "drivable_area": []}
    }"#;

    #[test]
    fn minimal_document_loads() {
        let s = load_scenario(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.id(), "min");
        assert_eq!(s.ego_history().len(), 11);
        assert_eq!(s.map().lanes.len(), 1);
        assert_eq!(s.map().lanes[0].headings, vec![0.0, 0.0]);
        assert!(s.agents().is_empty());
    }

    #[test]
    fn short_history_reports_field() {
        let doc = MINIMAL.replace("[0,0,0,5],", "");
        let err = load_scenario(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        assert!(err.to_string().contains("ego_history length"), "{err}");
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        let err = load_scenario(b"{\"id\": ").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = load_scenario(MINIMAL.replace("\"agents\"", "\"agentz\"").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn self_intersecting_crosswalk_is_rejected() {
        let doc = MINIMAL.replace(
            r#""crosswalks": []"#,
            r#""crosswalks": [[[0,0],[2,2],[2,0],[0,2]]]"#,
        );
        let err = load_scenario(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("map.crosswalks[0]"), "{err}");
    }

    #[test]
    fn short_signal_timeline_is_rejected() {
        let doc = MINIMAL.replace(
            r#""stop_lines": []"#,
            r#""stop_lines": [{"start":[10,-2],"end":[10,2],"control":"signal","signal_timeline":["red","green"]}]"#,
        );
        let err = load_scenario(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("signal_timeline"), "{err}");
    }

    #[test]
    fn save_is_deterministic_and_round_trips() {
        let s = load_scenario(MINIMAL.as_bytes()).unwrap();
        let a = save_scenario(&s);
        let b = save_scenario(&s);
        assert_eq!(a, b);
        let back = load_scenario(&a).unwrap();
        assert_eq!(back, s);
        assert_eq!(save_scenario(&back), a);
    }
}
