//! Seeded perception noise and map errors for robustness sweeps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::scenario::{Lane, Scenario, SignalPhase};

pub const DEFAULT_REPETITIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    Position,
    Velocity,
    Heading,
    Map,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [PerturbKind::Position, PerturbKind::Velocity, PerturbKind::Heading, PerturbKind::Map];

    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::Position => "position",
            PerturbKind::Velocity => "velocity",
            PerturbKind::Heading => "heading",
            PerturbKind::Map => "map",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PerturbKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn levels(self) -> usize {
        match self {
            PerturbKind::Map => MapError::ALL.len(),
            _ => 3,
        }
    }
}

/// Noise scales per level: position in m, velocity in m/s, heading in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseLevels {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub heading_deg: [f64; 3],
    /// Standard deviation of the lateral lane shift, m.
    pub lane_shift: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels { position: [0.1, 0.3, 0.5], velocity: [0.1, 0.3, 0.5], heading_deg: [1.0, 3.0, 5.0], lane_shift: 0.5 }
    }
}

/// Map-error levels, in level order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapError {
    LaneShift,
    DroppedCrosswalk,
    SignalFlip,
    DroppedStopLine,
}

impl MapError {
    pub const ALL: [MapError; 4] =
        [MapError::LaneShift, MapError::DroppedCrosswalk, MapError::SignalFlip, MapError::DroppedStopLine];
}

pub fn perturb(scenario: &Scenario, kind: PerturbKind, level: usize, repetitions: usize, seed: u64) -> Result<Vec<Scenario>> {
    perturb_with(scenario, kind, level, repetitions, seed, &NoiseLevels::default())
}

pub fn perturb_with(
    scenario: &Scenario,
    kind: PerturbKind,
    level: usize,
    repetitions: usize,
    seed: u64,
    levels: &NoiseLevels,
) -> Result<Vec<Scenario>> {
    if level >= kind.levels() {
        return Err(Error::Config(format!(
            "{} perturbation has levels 0..{}, got {level}",
            kind.name(),
            kind.levels() - 1
        )));
    }
    (0..repetitions)
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            perturb_once(scenario, kind, level, &mut rng, levels)
        })
        .collect()
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("finite non-negative sigma")
}

fn perturb_once(
    scenario: &Scenario,
    kind: PerturbKind,
    level: usize,
    rng: &mut ChaCha8Rng,
    levels: &NoiseLevels,
) -> Result<Scenario> {
    let mut parts = scenario.to_parts();
    parts.id = format!("{}~{}{level}", parts.id, kind.name());
    match kind {
        PerturbKind::Position => {
            let n = normal(levels.position[level]);
            for s in parts.agents.iter_mut().flat_map(|a| a.states.iter_mut()) {
                s.x += n.sample(rng);
                s.y += n.sample(rng);
            }
        }
        PerturbKind::Velocity => {
            let n = normal(levels.velocity[level]);
            for s in parts.agents.iter_mut().flat_map(|a| a.states.iter_mut()) {
                s.speed = (s.speed + n.sample(rng)).max(0.0);
            }
        }
        PerturbKind::Heading => {
            let n = normal(levels.heading_deg[level].to_radians());
            for s in parts.agents.iter_mut().flat_map(|a| a.states.iter_mut()) {
                s.heading = wrap_angle(s.heading + n.sample(rng));
            }
        }
        PerturbKind::Map => match MapError::ALL[level] {
            MapError::LaneShift => {
                let n = normal(levels.lane_shift);
                for lane in &mut parts.map.lanes {
                    let shift = n.sample(rng);
                    let normal_dir = Vec2::from_heading(lane.headings.first().copied().unwrap_or(0.0)).perp();
                    let moved = lane.centerline.iter().map(|&p| p + normal_dir * shift).collect();
                    *lane = Lane::new(moved, lane.half_width, lane.speed_limit);
                }
            }
            MapError::DroppedCrosswalk => {
                if !parts.map.crosswalks.is_empty() {
                    let i = rng.random_range(0..parts.map.crosswalks.len());
                    parts.map.crosswalks.remove(i);
                }
            }
            MapError::SignalFlip => {
                let signals: Vec<usize> =
                    (0..parts.map.stop_lines.len()).filter(|&i| parts.map.stop_lines[i].signal_timeline.is_some()).collect();
                if !signals.is_empty() {
                    let i = signals[rng.random_range(0..signals.len())];
                    for p in parts.map.stop_lines[i].signal_timeline.iter_mut().flatten() {
                        *p = match *p {
                            SignalPhase::Red => SignalPhase::Green,
                            SignalPhase::Green => SignalPhase::Red,
                            other => other,
                        };
                    }
                }
            }
            MapError::DroppedStopLine => {
                if !parts.map.stop_lines.is_empty() {
                    let i = rng.random_range(0..parts.map.stop_lines.len());
                    parts.map.stop_lines.remove(i);
                }
            }
        },
    }
    Scenario::new(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Rulebook;
    use crate::harness::synth::{synthesize_one, SynthConfig, Template};
    use crate::proxy::activation;

    fn scenario(t: Template) -> crate::harness::SynthScenario {
        let cfg = SynthConfig { seed: 17, templates: [(t, 1.0)].into(), ..SynthConfig::default() };
        synthesize_one(&cfg, 0).unwrap()
    }

    #[test]
    fn position_noise_is_bounded() {
        let s = scenario(Template::StraightFollow);
        let out = perturb(&s.scenario, PerturbKind::Position, 0, DEFAULT_REPETITIONS, 1).unwrap();
        assert_eq!(out.len(), 10);
        for p in &out {
            for (a, b) in p.agents().iter().zip(s.scenario.agents()) {
                for (x, y) in a.states.iter().zip(&b.states) {
                    // 5 sigma keeps the chance of a spurious failure over ~3000 draws negligible
                    assert!((x.x - y.x).abs() < 0.5 && (x.y - y.y).abs() < 0.5);
                }
            }
        }
        assert_ne!(out[0], out[1]);
    }

    #[test]
    fn seeded_and_repeatable() {
        let s = scenario(Template::LaneChange);
        let a = perturb(&s.scenario, PerturbKind::Heading, 2, 3, 9).unwrap();
        let b = perturb(&s.scenario, PerturbKind::Heading, 2, 3, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dropped_crosswalk_deactivates_crosswalk_rules() {
        let s = scenario(Template::Crosswalk);
        let rb = Rulebook::builtin();
        let yield_rule = rb.lookup("L1.R5").unwrap();
        let lf = s.families.iter().position(|f| *f == crate::harness::Family::LaneFollow).unwrap();
        let traj = &s.candidates.trajectories()[lf];
        assert!(activation(yield_rule, &s.scenario, traj));
        let out = perturb(&s.scenario, PerturbKind::Map, 1, 1, 0).unwrap();
        assert!(out[0].map().crosswalks.is_empty());
        assert!(!activation(yield_rule, &out[0], traj));
        assert!(!activation(rb.lookup("L0.R2").unwrap(), &out[0], traj));
    }

    #[test]
    fn signal_flip_and_line_drop() {
        let s = scenario(Template::IntersectionSignal);
        let flipped = perturb(&s.scenario, PerturbKind::Map, 2, 1, 0).unwrap();
        let tl = flipped[0].map().stop_lines[0].signal_timeline.as_ref().unwrap();
        assert!(tl.contains(&SignalPhase::Green) && !tl.contains(&SignalPhase::Red));
        let dropped = perturb(&s.scenario, PerturbKind::Map, 3, 1, 0).unwrap();
        assert!(dropped[0].map().stop_lines.is_empty());
    }

    #[test]
    fn level_out_of_range() {
        let s = scenario(Template::StraightFollow);
        assert!(perturb(&s.scenario, PerturbKind::Velocity, 3, 1, 0).is_err());
        assert!(perturb(&s.scenario, PerturbKind::Map, 3, 1, 0).is_ok());
    }
}
