use super::context::{CandidateContext, ScenarioContext};
use super::safety::AGENT_RANGE;
use super::{lead_gap, Activation};
use crate::catalog::RuleSpec;
use crate::geometry::{edge_distance, time_to_collision, wrap_angle, Vec2};
use crate::scenario::{AgentType, DT};

/// Rolling window for speed consistency: 2 s at 10 Hz.
pub const SPEED_WINDOW: usize = 20;
/// Acceleration sign flips per window above which the ride oscillates.
const OSC_SIGN_CHANGES: usize = 6;
/// Accelerations smaller than this are sign-neutral, m/s².
const OSC_DEADBAND: f64 = 0.1;
const TURN_RATE: f64 = 0.01;
const LEFT_TURN_MIN: f64 = 15.0 * std::f64::consts::PI / 180.0;
const ONCOMING: f64 = 135.0 * std::f64::consts::PI / 180.0;
/// TTC floor that keeps the inverse-TTC term finite, s.
const TTC_FLOOR: f64 = 0.1;
const LANE_CHANGE_DISPLACEMENT: f64 = 2.5;
/// Lateral band in which a vehicle counts as a lane-change neighbor, m.
const NEIGHBOR_BAND: f64 = 3.5;
const MIN_GAP_SPEED: f64 = 0.1;
const VRU_RANGE: f64 = 10.0;
const VRU_NEAR: f64 = 3.0;
const PED_SPEED_CAP: f64 = 6.7;
const CYC_SPEED_CAP: f64 = 8.9;
const INTERSECTION_SPEED: f64 = 8.0;

fn lateral_displacement(ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> f64 {
    let n = Vec2::from_heading(ctx.ego0.heading).perp();
    let p0 = ctx.ego0.position();
    c.states().iter().map(|s| (s.position() - p0).dot(n).abs()).fold(0.0, f64::max)
}

fn oncoming<'a>(ctx: &'a ScenarioContext<'_>, c: &CandidateContext<'_>, t: usize) -> impl Iterator<Item = usize> + 'a {
    let s = c.states()[t];
    ctx.agents().iter().enumerate().filter_map(move |(j, a)| {
        if a.agent_type != AgentType::Vehicle {
            return None;
        }
        let o = a.state_at(t)?;
        let opposed = wrap_angle(o.heading - s.heading).abs() > ONCOMING;
        (opposed && o.position().distance(s.position()) <= AGENT_RANGE).then_some(j)
    })
}

fn vru_rule(id: &str) -> (AgentType, f64) {
    if id == "L3.R12" {
        (AgentType::Pedestrian, PED_SPEED_CAP)
    } else {
        (AgentType::Cyclist, CYC_SPEED_CAP)
    }
}

fn vru_distances<'a>(
    ctx: &'a ScenarioContext<'_>,
    c: &'a CandidateContext<'_>,
    t: usize,
    kind: AgentType,
) -> impl Iterator<Item = f64> + 'a {
    let ego = c.boxes[t];
    ctx.agents().iter().zip(&ctx.agent_boxes).filter_map(move |(a, boxes)| {
        if a.agent_type != kind {
            return None;
        }
        let d = edge_distance(&ego, &boxes.get(t).copied().flatten()?);
        (d <= VRU_RANGE).then_some(d)
    })
}

fn intersection_steps(ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Vec<usize> {
    (0..c.len()).filter(|&t| ctx.in_intersection(c.states()[t].position())).collect()
}

pub(super) fn activation(id: &str, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Activation {
    let Some(kin) = c.kin.as_ref() else {
        return Activation::off("fewer than 3 frames");
    };
    match id {
        "L3.R0" => {
            if c.any_speed_at_least(0.5) {
                Activation::on("ego moving")
            } else {
                Activation::off("ego speed below 0.5 m/s")
            }
        }
        "L3.R1" => {
            if c.any_speed_at_least(1.0) {
                Activation::on("ego speed at least 1.0 m/s")
            } else {
                Activation::off("ego speed below 1.0 m/s")
            }
        }
        "L3.R2" => {
            if !kin.yaw_rate.iter().any(|w| w.abs() > TURN_RATE) {
                Activation::off("not turning")
            } else if !c.any_speed_at_least(0.5) {
                Activation::off("ego not moving")
            } else {
                Activation::on("turning while moving")
            }
        }
        "L3.R3" => {
            if c.len() < SPEED_WINDOW {
                Activation::off("fewer frames than the speed window")
            } else if !c.any_speed_at_least(0.5) {
                Activation::off("ego speed below 0.5 m/s")
            } else {
                Activation::on("ego moving over a full window")
            }
        }
        "L3.R4" => {
            let h0 = ctx.ego0.heading;
            if c.states().iter().any(|s| (s.speed * (s.heading - h0).sin()).abs() >= 0.1) {
                Activation::on("lateral velocity at least 0.1 m/s")
            } else {
                Activation::off("no lateral motion")
            }
        }
        "L3.R5" => {
            let turn = wrap_angle(c.states()[c.len() - 1].heading - ctx.ego0.heading);
            if turn < LEFT_TURN_MIN {
                Activation::off("no left turn")
            } else if !(0..c.len()).any(|t| oncoming(ctx, c, t).next().is_some()) {
                Activation::off("no oncoming vehicle within 50 m")
            } else {
                Activation::on("left turn with oncoming traffic")
            }
        }
        "L3.R9" => {
            if lateral_displacement(ctx, c) >= LANE_CHANGE_DISPLACEMENT {
                Activation::on("lane change detected")
            } else {
                Activation::off("lateral displacement below 2.5 m")
            }
        }
        "L3.R10" => {
            if !(0..c.len()).any(|t| lead_gap(ctx, c, t).is_some()) {
                Activation::off("no lead vehicle in the ego lane")
            } else if !c.any_speed_at_least(0.3) {
                Activation::off("ego speed below 0.3 m/s")
            } else {
                Activation::on("lead vehicle present, ego moving")
            }
        }
        "L3.R11" => {
            let agents = ctx.agents().iter().filter(|a| a.valid.iter().any(|&v| v)).count();
            if agents < 2 {
                Activation::off("fewer than 2 agents")
            } else if intersection_steps(ctx, c).len() < 3 {
                Activation::off("no sustained intersection presence")
            } else {
                Activation::on("inside an intersection with traffic")
            }
        }
        "L3.R12" | "L3.R13" => {
            let (kind, _) = vru_rule(id);
            if (0..c.len()).any(|t| vru_distances(ctx, c, t, kind).next().is_some()) {
                Activation::on("VRU within 10 m")
            } else {
                Activation::off("no VRU of this type within 10 m")
            }
        }
        _ => unreachable!("{id} is not a comfort rule"),
    }
}

/// Speed-consistency penalty over rolling windows of `speeds` and `accel`.
pub fn speed_consistency(speeds: &[f64], accel: &[f64], sigma_max: f64) -> f64 {
    if speeds.len() < SPEED_WINDOW {
        return 0.0;
    }
    (SPEED_WINDOW..=speeds.len())
        .map(|end| {
            let w = &speeds[end - SPEED_WINDOW..end];
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let mut changes = 0;
            let mut last = 0.0;
            for &a in &accel[end - SPEED_WINDOW..end] {
                if a.abs() < OSC_DEADBAND {
                    continue;
                }
                if last != 0.0 && a.signum() != last {
                    changes += 1;
                }
                last = a.signum();
            }
            (var.sqrt() - sigma_max).max(0.0) + if changes > OSC_SIGN_CHANGES { 1.0 } else { 0.0 }
        })
        .sum()
}

pub(super) fn severity(rule: &RuleSpec, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> f64 {
    let Some(kin) = c.kin.as_ref() else { return 0.0 };
    let thr = rule.threshold_value().unwrap_or(0.0);
    let states = c.states();
    let id = rule.paper_id.as_str();
    match id {
        "L3.R0" => kin
            .accel
            .iter()
            .zip(&kin.jerk)
            .map(|(a, j)| (a.abs() - thr).max(0.0) + (j.abs() - thr).max(0.0))
            .sum(),
        "L3.R1" => kin.decel.iter().map(|d| (d - thr).max(0.0) * DT).sum(),
        "L3.R2" => kin
            .yaw_rate
            .iter()
            .zip(&kin.yaw_accel)
            .map(|(w, dw)| (w.abs().to_degrees() - thr).max(0.0) + (dw.abs().to_degrees() - thr).max(0.0))
            .sum(),
        "L3.R3" => {
            let speeds: Vec<f64> = states.iter().map(|s| s.speed).collect();
            speed_consistency(&speeds, &kin.accel, thr)
        }
        "L3.R4" => kin.lat_accel.iter().map(|a| (a.abs() - thr).max(0.0)).sum(),
        "L3.R5" => {
            let mut total = 0.0;
            for t in 0..c.len() {
                if kin.yaw_rate[t] <= TURN_RATE {
                    continue;
                }
                let s = states[t];
                for j in oncoming(ctx, c, t) {
                    let o = ctx.agent_state(j, t).expect("oncoming agents are observed");
                    let ttc = time_to_collision(s.position(), s.velocity(), o.position(), o.velocity()).max(TTC_FLOOR);
                    total += (1.0 / ttc - 1.0 / thr).max(0.0);
                }
            }
            total
        }
        "L3.R9" => {
            let mut close = 0usize;
            for t in 0..c.len() {
                let s = states[t];
                let u = Vec2::from_heading(s.heading);
                let n = u.perp();
                let mut min_gap = f64::INFINITY;
                for (j, a) in ctx.agents().iter().enumerate() {
                    if a.agent_type != AgentType::Vehicle {
                        continue;
                    }
                    let Some(o) = ctx.agent_state(j, t) else { continue };
                    let d = o.position() - s.position();
                    if d.dot(n).abs() > NEIGHBOR_BAND {
                        continue;
                    }
                    let along = d.dot(u);
                    let gap = (along.abs() - (ctx.scenario.ego_length() + a.length) / 2.0).max(0.0);
                    // The follower's speed sets the time gap.
                    let v = if along >= 0.0 { s.speed } else { o.speed };
                    min_gap = min_gap.min(gap / v.max(MIN_GAP_SPEED));
                }
                if min_gap < thr {
                    close += 1;
                }
            }
            let lateral = kin.lat_accel.iter().filter(|a| a.abs() > 0.5).count();
            0.5 * close as f64 + 0.2 * lateral as f64
        }
        "L3.R10" => (0..c.len())
            .filter_map(|t| {
                let d = lead_gap(ctx, c, t)?;
                let g = d / states[t].speed.max(MIN_GAP_SPEED);
                Some((1.0 - g / thr).max(0.0))
            })
            .sum(),
        "L3.R11" => {
            let mut total = 0.0;
            for t in intersection_steps(ctx, c) {
                let v = states[t].speed;
                let ego = c.boxes[t];
                let gap_short = ctx.agents().iter().zip(&ctx.agent_boxes).any(|(a, boxes)| {
                    a.agent_type == AgentType::Vehicle
                        && boxes.get(t).copied().flatten().is_some_and(|b| {
                            ctx.in_intersection(b.center)
                                && edge_distance(&ego, &b) / v.max(MIN_GAP_SPEED) < thr
                        })
                });
                if gap_short {
                    total += 0.5;
                }
                if v > INTERSECTION_SPEED {
                    total += 0.2;
                }
            }
            total
        }
        "L3.R12" | "L3.R13" => {
            let (kind, cap) = vru_rule(id);
            let mut total = 0.0;
            for t in 0..c.len() {
                let v = states[t].speed;
                for d in vru_distances(ctx, c, t, kind) {
                    total += (thr - d).max(0.0);
                    if d < VRU_NEAR {
                        total += (v - cap).max(0.0);
                    }
                }
            }
            total
        }
        other => unreachable!("{other} is not a comfort rule"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_speed_is_consistent() {
        assert_eq!(speed_consistency(&[5.0; 50], &[0.0; 50], 2.0), 0.0);
    }

    #[test]
    fn oscillation_is_flagged_per_window() {
        let accel: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(speed_consistency(&[5.0; 20], &accel, 2.0), 1.0);
        // Inside the deadband nothing counts.
        let small: Vec<f64> = accel.iter().map(|a| a * 0.05).collect();
        assert_eq!(speed_consistency(&[5.0; 20], &small, 2.0), 0.0);
    }

    #[test]
    fn spread_above_limit() {
        let speeds: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 6.0 }).collect();
        // Population std of ten 0s and ten 6s is 3.
        assert!((speed_consistency(&speeds, &[0.0; 20], 2.0) - 1.0).abs() < 1e-12);
    }
}
