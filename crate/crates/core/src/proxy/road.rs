use super::context::{CandidateContext, ScenarioContext};
use super::Activation;
use crate::catalog::RuleSpec;

/// Soft margin added to the half-lane width, m.
const LANE_MARGIN: f64 = 0.05;

pub(super) fn activation(id: &str, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Activation {
    let has_lane = c.ego_lane.iter().any(Option::is_some);
    match id {
        "L2.R0" => {
            if !has_lane {
                Activation::off("no lane centerline")
            } else if ctx.drivable.is_none() {
                Activation::off("no drivable area in map")
            } else if !c.any_speed_at_least(0.5) {
                Activation::off("ego not moving")
            } else {
                Activation::on("drivable area known, ego moving")
            }
        }
        "L2.R1" => {
            if has_lane {
                Activation::on("lane centerline available")
            } else {
                Activation::off("no lane centerline")
            }
        }
        _ => unreachable!("{id} is not a road rule"),
    }
}

pub(super) fn severity(rule: &RuleSpec, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> f64 {
    let thr = rule.threshold_value().unwrap_or(0.0);
    match rule.paper_id.as_str() {
        "L2.R0" => match &ctx.drivable {
            Some(region) => c
                .states()
                .iter()
                .map(|s| (-region.signed_distance(s.position()) - thr).max(0.0))
                .sum(),
            None => 0.0,
        },
        "L2.R1" => (0..c.len())
            .filter_map(|t| c.ego_projection(t))
            .map(|(_, p)| (p.d_lat.abs() - thr - LANE_MARGIN).max(0.0))
            .sum(),
        other => unreachable!("{other} is not a road rule"),
    }
}
