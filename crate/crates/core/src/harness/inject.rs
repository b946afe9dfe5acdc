//! Adversarial confidence corruption: append a rule-violating mode and make
//! it the most confident one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::proxy::ScenarioContext;
use crate::scenario::{AgentType, CandidateSet, Scenario, SignalPhase, Trajectory, TrajectoryState, DT, HORIZON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionFamily {
    CollisionProne,
    OffRoad,
    SignalViolating,
}

impl InjectionFamily {
    pub const ALL: [InjectionFamily; 3] =
        [InjectionFamily::CollisionProne, InjectionFamily::OffRoad, InjectionFamily::SignalViolating];

    pub fn name(self) -> &'static str {
        match self {
            InjectionFamily::CollisionProne => "collision_prone",
            InjectionFamily::OffRoad => "off_road",
            InjectionFamily::SignalViolating => "signal_violating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        InjectionFamily::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub family: InjectionFamily,
    #[serde(default = "default_margin")]
    pub confidence_margin: f64,
}

fn default_margin() -> f64 {
    0.01
}

impl CorruptionSpec {
    pub fn new(family: InjectionFamily) -> Self {
        CorruptionSpec { family, confidence_margin: default_margin() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_margin.is_finite() && self.confidence_margin > 0.0) {
            return Err(Error::Config(format!("confidence margin must be > 0, got {}", self.confidence_margin)));
        }
        Ok(())
    }
}

/// Earliest arrival time considered for a via point, s.
const MIN_ARRIVAL: f64 = 1.0;
/// Fastest average speed a via-point path may require, m/s.
const MAX_AVG_SPEED: f64 = 25.0;

/// Cubic Hermite path from the ego's current state through `target` at
/// time `t_star`, continuing at the arrival velocity afterwards.
fn via_point_path(p0: Vec2, v0: Vec2, target: Vec2, t_star: f64) -> Result<Trajectory> {
    let v1 = (target - p0) * (1.0 / t_star);
    let states = (1..=HORIZON)
        .map(|i| {
            let t = i as f64 * DT;
            let (p, v) = if t <= t_star {
                let u = t / t_star;
                let (u2, u3) = (u * u, u * u * u);
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                let p = p0 * h00 + v0 * (h10 * t_star) + target * h01 + v1 * (h11 * t_star);
                let d00 = 6.0 * u2 - 6.0 * u;
                let d10 = 3.0 * u2 - 4.0 * u + 1.0;
                let d01 = -6.0 * u2 + 6.0 * u;
                let d11 = 3.0 * u2 - 2.0 * u;
                let v = (p0 * d00 + target * d01) * (1.0 / t_star) + v0 * d10 + v1 * d11;
                (p, v)
            } else {
                (target + v1 * (t - t_star), v1)
            };
            let speed = v.norm();
            let heading = if speed > 1e-9 { v.heading() } else { v1.heading() };
            TrajectoryState { x: p.x, y: p.y, heading, speed }
        })
        .collect();
    Trajectory::new(states)
}

/// Picks the agent state that needs an average speed closest to the ego's
/// current speed, among those allowed by `admit(agent, step, position)`.
fn best_via_point(
    scenario: &Scenario,
    admit: impl Fn(usize, usize, Vec2) -> bool,
) -> Option<(Vec2, f64)> {
    let ego = scenario.ego_current();
    let p0 = ego.position();
    let mut best: Option<(f64, Vec2, f64)> = None;
    for (j, agent) in scenario.agents().iter().enumerate() {
        for t in 0..HORIZON {
            let Some(s) = agent.state_at(t) else { continue };
            let arrival = (t + 1) as f64 * DT;
            if arrival < MIN_ARRIVAL || !admit(j, t, s.position()) {
                continue;
            }
            let avg = s.position().distance(p0) / arrival;
            if avg > MAX_AVG_SPEED {
                continue;
            }
            let cost = (avg - ego.speed).abs();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, s.position(), arrival));
            }
        }
    }
    best.map(|(_, p, t)| (p, t))
}

/// Builds the injected trajectory for `family`. Every family aims the ego
/// at another road user so the mode is also Safety-violating.
pub fn adversarial_trajectory(scenario: &Scenario, family: InjectionFamily) -> Result<Trajectory> {
    let ctx = ScenarioContext::new(scenario);
    let ego = scenario.ego_current();
    let via = match family {
        InjectionFamily::CollisionProne => {
            if scenario.agents().is_empty() {
                return Err(Error::Injection("collision_prone needs at least one agent".into()));
            }
            let vehicles = best_via_point(scenario, |j, _, _| scenario.agents()[j].agent_type == AgentType::Vehicle);
            vehicles.or_else(|| best_via_point(scenario, |_, _, _| true))
        }
        InjectionFamily::OffRoad => {
            let Some(region) = ctx.drivable.as_ref() else {
                return Err(Error::Injection("off_road needs a drivable area".into()));
            };
            best_via_point(scenario, |_, _, p| !region.contains(p))
        }
        InjectionFamily::SignalViolating => {
            let red_lines: Vec<_> = ctx
                .signal_lines
                .iter()
                .filter(|f| f.line.signal_timeline.as_ref().is_some_and(|tl| tl.contains(&SignalPhase::Red)))
                .collect();
            if red_lines.is_empty() {
                return Err(Error::Injection("signal_violating needs a signal with a red phase".into()));
            }
            best_via_point(scenario, |_, t, p| {
                red_lines.iter().any(|f| f.line.phase_at(t) == Some(SignalPhase::Red) && f.progress(p) > 0.0)
            })
        }
    };
    let (target, t_star) = via.ok_or_else(|| {
        Error::Injection(format!("no reachable road user for a {} injection", family.name()))
    })?;
    via_point_path(ego.position(), ego.velocity(), target, t_star)
}

/// Appends an adversarial mode whose confidence is the previous maximum
/// scaled by `1 + margin`, then renormalizes. Existing trajectories are
/// untouched and keep their relative confidences.
pub fn inject_adversarial(scenario: &Scenario, candidates: &CandidateSet, spec: &CorruptionSpec) -> Result<CandidateSet> {
    spec.validate()?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let injected = adversarial_trajectory(scenario, spec.family)?;
    let old = candidates.confidences();
    let top = old.iter().copied().fold(0.0, f64::max);
    let boosted = if top > 0.0 { top * (1.0 + spec.confidence_margin) } else { 1.0 };
    let total: f64 = old.iter().sum::<f64>() + boosted;
    let mut p: Vec<f64> = old.iter().map(|v| v / total).collect();
    // absorb rounding in the injected entry; it stays the strict maximum
    p.push(1.0 - p.iter().sum::<f64>());
    let mut trajectories = candidates.trajectories().to_vec();
    trajectories.push(injected);
    CandidateSet::new(trajectories, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{synthesize_one, SynthConfig, Template};
    use crate::geometry::{obb_penetration};

    fn scenario(t: Template, seed: u64) -> crate::harness::SynthScenario {
        let cfg = SynthConfig { seed, templates: [(t, 1.0)].into(), ..SynthConfig::default() };
        synthesize_one(&cfg, 0).unwrap()
    }

    #[test]
    fn injected_mode_is_most_confident() {
        for (i, t) in Template::ALL.iter().enumerate() {
            let s = scenario(*t, i as u64);
            let out = inject_adversarial(&s.scenario, &s.candidates, &CorruptionSpec::new(InjectionFamily::CollisionProne))
                .unwrap();
            let p = out.confidences();
            let last = p.len() - 1;
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(p[..last].iter().all(|&v| v < p[last]));
            let ratio = p[last] / p[..last].iter().copied().fold(0.0, f64::max);
            assert!((ratio - 1.01).abs() < 1e-9, "{ratio}");
            assert_eq!(&out.trajectories()[..last], s.candidates.trajectories());
        }
    }

    #[test]
    fn collision_path_hits_an_agent() {
        let s = scenario(Template::StraightFollow, 8);
        let traj = adversarial_trajectory(&s.scenario, InjectionFamily::CollisionProne).unwrap();
        let hit = (0..HORIZON).any(|t| {
            let ego = s.scenario.ego_box(&traj.states()[t]);
            s.scenario.agents().iter().filter_map(|a| a.box_at(t)).any(|b| obb_penetration(&ego, &b).overlapping())
        });
        assert!(hit);
    }

    #[test]
    fn signal_violation_needs_a_signal() {
        let s = scenario(Template::StraightFollow, 2);
        let err = inject_adversarial(&s.scenario, &s.candidates, &CorruptionSpec::new(InjectionFamily::SignalViolating));
        assert!(matches!(err, Err(Error::Injection(_))));
        let s = scenario(Template::IntersectionSignal, 2);
        assert!(adversarial_trajectory(&s.scenario, InjectionFamily::SignalViolating).is_ok());
    }

    #[test]
    fn off_road_leaves_drivable_area() {
        let s = scenario(Template::Crosswalk, 4);
        let traj = adversarial_trajectory(&s.scenario, InjectionFamily::OffRoad).unwrap();
        let ctx = ScenarioContext::new(&s.scenario);
        let region = ctx.drivable.as_ref().unwrap();
        assert!(traj.positions().any(|p| !region.contains(p)));
    }

    #[test]
    fn margin_must_be_positive() {
        let spec = CorruptionSpec { family: InjectionFamily::OffRoad, confidence_margin: 0.0 };
        assert!(spec.validate().is_err());
    }
}
