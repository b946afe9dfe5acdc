use super::context::{CandidateContext, ScenarioContext};
use super::{lead_gap, Activation};
use crate::catalog::RuleSpec;
use crate::geometry::{edge_distance, obb_penetration, polygon_overlap_area};
use crate::scenario::AgentType;

/// Spatial pre-filter for agent interactions, m.
pub(crate) const AGENT_RANGE: f64 = 50.0;

fn agent_within(ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>, range: f64) -> bool {
    (0..c.len()).any(|t| {
        let p = c.states()[t].position();
        ctx.agent_boxes.iter().any(|b| b.get(t).copied().flatten().is_some_and(|b| b.center.distance(p) <= range))
    })
}

pub(super) fn activation(id: &str, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Activation {
    match id {
        "L0.R0" => {
            if !(0..c.len()).any(|t| lead_gap(ctx, c, t).is_some()) {
                Activation::off("no lead vehicle in the ego lane")
            } else if !c.any_speed_at_least(0.3) {
                Activation::off("ego speed below 0.3 m/s")
            } else {
                Activation::on("lead vehicle present, ego moving")
            }
        }
        "L0.R1" | "L0.R3" => {
            if agent_within(ctx, c, AGENT_RANGE) {
                Activation::on("agent within 50 m")
            } else {
                Activation::off("no agent within 50 m")
            }
        }
        "L0.R2" => {
            if ctx.crosswalk_active.is_empty() {
                Activation::off("no crosswalk in map")
            } else if !ctx.crosswalk_active.iter().any(|c| c.iter().any(|&a| a)) {
                Activation::off("no moving pedestrian near a crosswalk")
            } else {
                Activation::on("moving pedestrian within 5 m of a crosswalk")
            }
        }
        "L0.R4" => {
            let vru = ctx.agents().iter().any(|a| a.agent_type.is_vru() && a.valid.iter().any(|&v| v));
            if !vru {
                Activation::off("no VRU present")
            } else if !c.any_speed_at_least(1.0) {
                Activation::off("ego speed below 1.0 m/s")
            } else {
                Activation::on("VRU present, ego moving")
            }
        }
        _ => unreachable!("{id} is not a safety rule"),
    }
}

pub(super) fn severity(rule: &RuleSpec, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> f64 {
    let thr = rule.threshold_value().unwrap_or(0.0);
    let states = c.states();
    match rule.paper_id.as_str() {
        "L0.R0" => (0..c.len())
            .filter_map(|t| lead_gap(ctx, c, t).map(|d| (states[t].speed * thr - d).max(0.0)))
            .sum(),
        "L0.R1" => (0..c.len())
            .map(|t| {
                let ego = c.boxes[t];
                ctx.agents()
                    .iter()
                    .zip(&ctx.agent_boxes)
                    .filter_map(|(a, boxes)| {
                        let b = boxes.get(t).copied().flatten()?;
                        if b.center.distance(ego.center) > AGENT_RANGE {
                            return None;
                        }
                        let c_min = match a.agent_type {
                            AgentType::Vehicle => thr,
                            AgentType::Cyclist => 2.0 * thr,
                            AgentType::Pedestrian => 3.0 * thr,
                        };
                        Some((c_min - edge_distance(&ego, &b)).max(0.0))
                    })
                    .fold(0.0, f64::max)
            })
            .sum(),
        "L0.R2" => {
            let crosswalks = &ctx.scenario.map().crosswalks;
            let mut total = 0.0;
            for t in 0..c.len() {
                for (cw, active) in crosswalks.iter().zip(&ctx.crosswalk_active) {
                    if active.get(t).copied().unwrap_or(false) {
                        total += polygon_overlap_area(&c.boxes[t], cw.vertices()).unwrap_or(0.0);
                    }
                }
            }
            total
        }
        "L0.R3" => {
            let mut total = 0.0;
            for t in 0..c.len() {
                let ego = c.boxes[t];
                for boxes in &ctx.agent_boxes {
                    let Some(b) = boxes.get(t).copied().flatten() else { continue };
                    if b.center.distance(ego.center) > AGENT_RANGE {
                        continue;
                    }
                    let depth = obb_penetration(&ego, &b).depth();
                    if depth > thr {
                        total += depth;
                    }
                }
            }
            total
        }
        "L0.R4" => (0..c.len())
            .map(|t| {
                let ego = c.boxes[t];
                ctx.agents()
                    .iter()
                    .zip(&ctx.agent_boxes)
                    .filter_map(|(a, boxes)| {
                        let r = match a.agent_type {
                            AgentType::Pedestrian => thr,
                            AgentType::Cyclist => 0.75 * thr,
                            AgentType::Vehicle => return None,
                        };
                        let b = boxes.get(t).copied().flatten()?;
                        Some((r - edge_distance(&ego, &b)).max(0.0))
                    })
                    .fold(0.0, f64::max)
            })
            .sum(),
        other => unreachable!("{other} is not a safety rule"),
    }
}
