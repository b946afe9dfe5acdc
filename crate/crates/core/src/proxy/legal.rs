use std::f64::consts::FRAC_PI_2;

use super::context::{red_weight, CandidateContext, ProxyParams, ScenarioContext};
use super::Activation;
use crate::catalog::RuleSpec;
use crate::geometry::{time_to_collision, wrap_angle};
use crate::scenario::{SignalPhase, DT};

/// Yellow-phase gate on distance to the stop line, m.
const YELLOW_GATE: f64 = 30.0;
/// Stop-sign approach radius for activation, m.
const STOP_SIGN_RADIUS: f64 = 30.0;
/// Depth scale in the stop-sign penalty, m.
const STOP_DEPTH_SCALE: f64 = 5.0;
/// A VRU this close to a crosswalk polygon counts as in it, m.
const IN_CROSSWALK: f64 = 1.0;
/// Crosswalk proximity scale, m.
const CROSSWALK_PROXIMITY: f64 = 15.0;

/// Logistic soft step.
pub fn soft_step(x: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (-alpha * x).exp())
}

/// Stop-sign penalty from the window speed and the depth past the line.
pub fn stop_sign_penalty(v_stop: f64, depth_past: f64) -> f64 {
    v_stop * (1.0 + depth_past / STOP_DEPTH_SCALE)
}

/// Wrong-way composite from the peak mismatch (rad), the longest
/// continuous mismatch (s) and the speed at the peak (m/s).
pub fn wrong_way_penalty(phi_max: f64, dt_viol: f64, v: f64) -> f64 {
    0.4 * phi_max / FRAC_PI_2 + 0.4 * (dt_viol / 2.0).min(1.0) + 0.2 * (v / 10.0).min(1.0)
}

/// Crosswalk-yield composite. Zero unless `ttc_min` is below `ttc_safe`.
pub fn crosswalk_yield_penalty(ttc_min: f64, v: f64, rho_min: f64, ttc_safe: f64) -> f64 {
    if !(ttc_min < ttc_safe) {
        return 0.0;
    }
    ((ttc_safe - ttc_min) * 2.0).clamp(0.0, 5.0)
        + (v / 10.0).min(3.0)
        + ((CROSSWALK_PROXIMITY - rho_min) / 7.5).clamp(0.0, 2.0)
}

fn has_red(phases: &[SignalPhase], steps: usize) -> bool {
    phases.iter().take(steps).any(|p| matches!(p, SignalPhase::Red | SignalPhase::FlashingRed))
}

pub(super) fn activation(id: &str, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Activation {
    match id {
        "L1.R0" => {
            if ctx.signal_lines.is_empty() {
                Activation::off("no signal-controlled stop line with a timeline")
            } else {
                Activation::on("signal stop line with per-step phase")
            }
        }
        "L1.R2" => {
            let lanes = &ctx.scenario.map().lanes;
            let known = (0..c.len()).any(|t| c.ego_lane[t].is_some_and(|l| lanes[l].speed_limit.is_some()));
            if known {
                Activation::on("speed limit known for the ego lane")
            } else {
                Activation::off("no speed limit for the ego lane")
            }
        }
        "L1.R3" => {
            let red = ctx
                .signal_lines
                .iter()
                .any(|f| f.line.signal_timeline.as_deref().is_some_and(|tl| has_red(tl, c.len())));
            if red {
                Activation::on("red phase present")
            } else {
                Activation::off("no red signal phase")
            }
        }
        "L1.R4" => {
            let near = ctx
                .stop_sign_lines
                .iter()
                .any(|f| c.fronts.iter().any(|&p| f.distance(p) <= STOP_SIGN_RADIUS));
            if near {
                Activation::on("stop sign within 30 m")
            } else {
                Activation::off("no stop sign within 30 m")
            }
        }
        "L1.R5" => {
            let vru = ctx.agents().iter().any(|a| a.agent_type.is_vru() && a.valid.iter().any(|&v| v));
            if ctx.scenario.map().crosswalks.is_empty() {
                Activation::off("no crosswalk in map")
            } else if !vru {
                Activation::off("no VRU present")
            } else if !c.any_speed_at_least(0.5) {
                Activation::off("ego not moving")
            } else {
                Activation::on("crosswalk and VRU present, ego moving")
            }
        }
        "L1.R6" => {
            if !c.ego_lane.iter().any(Option::is_some) {
                Activation::off("no lane centerline")
            } else if !c.any_speed_at_least(0.5) {
                Activation::off("ego speed below 0.5 m/s")
            } else {
                Activation::on("lane centerline available, ego moving")
            }
        }
        _ => unreachable!("{id} is not a legal rule"),
    }
}

pub(super) fn severity(
    rule: &RuleSpec,
    ctx: &ScenarioContext<'_>,
    c: &CandidateContext<'_>,
    params: &ProxyParams,
) -> f64 {
    let thr = rule.threshold_value().unwrap_or(0.0);
    let states = c.states();
    match rule.paper_id.as_str() {
        "L1.R0" => {
            let mut total = 0.0;
            for t in 0..c.len() {
                let front = c.fronts[t];
                let nearest = ctx
                    .signal_lines
                    .iter()
                    .map(|f| (f.distance(front), f))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                let Some((d, f)) = nearest else { continue };
                let phase = f.line.phase_at(t);
                let v = states[t].speed;
                let a = c.kin.as_ref().map_or(0.0, |k| k.accel[t]);
                let r = red_weight(phase);
                let y = if phase == Some(SignalPhase::Yellow) { 1.0 } else { 0.0 };
                let red_term = if d < thr { r * (v / 10.0).min(1.0) } else { 0.0 };
                let yellow_term = if d < YELLOW_GATE { 0.3 * y * (a.max(0.0) / 2.0).min(1.0) } else { 0.0 };
                total += red_term + yellow_term;
            }
            total
        }
        "L1.R2" => {
            let lanes = &ctx.scenario.map().lanes;
            (0..c.len())
                .filter_map(|t| {
                    let limit = lanes[c.ego_lane[t]?].speed_limit?;
                    Some((states[t].speed - limit - thr).max(0.0))
                })
                .sum()
        }
        "L1.R3" => {
            let start_front = ctx.scenario.ego_box(&ctx.ego0).front();
            let mut total = 0.0;
            for f in &ctx.signal_lines {
                let Some(tl) = f.line.signal_timeline.as_deref() else { continue };
                if !has_red(tl, c.len()) {
                    continue;
                }
                let mut prev = soft_step(f.progress(start_front), params.sigma_alpha);
                for t in 0..c.len() {
                    let p = c.fronts[t];
                    let cur = soft_step(f.progress(p), params.sigma_alpha);
                    if f.alongside(p) {
                        total += red_weight(tl.get(t).copied()) * (cur - prev).max(0.0);
                    }
                    prev = cur;
                }
            }
            total
        }
        "L1.R4" => {
            let mut total = 0.0;
            for f in &ctx.stop_sign_lines {
                let mut v_min = f64::INFINITY;
                let mut depth: f64 = 0.0;
                for t in 0..c.len() {
                    let p = c.fronts[t];
                    if !f.alongside(p) {
                        continue;
                    }
                    let prog = f.progress(p);
                    if prog.abs() <= thr {
                        v_min = v_min.min(states[t].speed);
                    }
                    depth = depth.max(prog);
                }
                if v_min.is_finite() {
                    total += stop_sign_penalty(v_min, depth.max(0.0));
                }
            }
            total
        }
        "L1.R5" => {
            let crosswalks = &ctx.scenario.map().crosswalks;
            let mut ttc_min = f64::INFINITY;
            let mut v_at = 0.0;
            let mut rho_min = f64::INFINITY;
            for t in 0..c.len() {
                let s = &states[t];
                let front = c.fronts[t];
                for cw in crosswalks {
                    rho_min = rho_min.min(cw.distance_to(front));
                }
                for (j, a) in ctx.agents().iter().enumerate() {
                    if !a.agent_type.is_vru() {
                        continue;
                    }
                    let Some(ps) = ctx.agent_state(j, t) else { continue };
                    if !crosswalks.iter().any(|cw| cw.distance_to(ps.position()) <= IN_CROSSWALK) {
                        continue;
                    }
                    let ttc = time_to_collision(s.position(), s.velocity(), ps.position(), ps.velocity());
                    if ttc < ttc_min {
                        ttc_min = ttc;
                        v_at = s.speed;
                    }
                }
            }
            crosswalk_yield_penalty(ttc_min, v_at, rho_min, thr)
        }
        "L1.R6" => {
            let lanes = &ctx.scenario.map().lanes;
            let mut phi_max: f64 = 0.0;
            let mut v_at = 0.0;
            let mut run = 0usize;
            let mut longest = 0usize;
            for t in 0..c.len() {
                let h = states[t].heading;
                let mut inside: Option<f64> = None;
                let mut nearest: Option<(f64, f64)> = None;
                for (l, p) in c.lanes[t].iter().enumerate() {
                    let Some(p) = p else { continue };
                    let phi = wrap_angle(h - p.tangent_heading).abs();
                    if p.d_lat.abs() <= lanes[l].half_width {
                        inside = Some(inside.map_or(phi, |m| m.min(phi)));
                    }
                    if nearest.is_none_or(|(d, _)| p.d_lat.abs() < d) {
                        nearest = Some((p.d_lat.abs(), phi));
                    }
                }
                let phi = inside.or(nearest.map(|n| n.1));
                match phi {
                    Some(phi) if phi > thr => {
                        run += 1;
                        longest = longest.max(run);
                        if phi > phi_max {
                            phi_max = phi;
                            v_at = states[t].speed;
                        }
                    }
                    _ => run = 0,
                }
            }
            if longest == 0 {
                0.0
            } else {
                wrong_way_penalty(phi_max, longest as f64 * DT, v_at)
            }
        }
        other => unreachable!("{other} is not a legal rule"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((stop_sign_penalty(2.0, 1.0) - 2.4).abs() < 1e-12);
        assert!((wrong_way_penalty(45f64.to_radians(), 1.0, 5.0) - 0.5).abs() < 1e-12);
        assert_eq!(soft_step(0.0, 10.0), 0.5);
        assert_eq!(crosswalk_yield_penalty(3.5, 10.0, 0.0, 3.0), 0.0);
        // (3-1)*2=4, 10/10=1, (15-0)/7.5=2
        assert!((crosswalk_yield_penalty(1.0, 10.0, 0.0, 3.0) - 7.0).abs() < 1e-12);
    }
}
