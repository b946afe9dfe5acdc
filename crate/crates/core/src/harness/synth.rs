//! Seeded synthetic scenarios and candidate sets.
//!
//! Every template puts the ego on an eastbound lane along the x axis, so a
//! candidate's lane-frame profile (s along the lane, d to the left) maps
//! straight onto world coordinates.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};
use crate::scenario::{
    rectangle, straight_history, AgentTrack, AgentType, CandidateSet, IntersectionRegion, Lane, MapContext,
    Scenario, ScenarioDocument, ScenarioParts, SignalPhase, StopControl, StopLine, Trajectory, TrajectoryState,
    DT, HORIZON,
};

pub const EGO_LENGTH: f64 = 4.5;
pub const EGO_WIDTH: f64 = 2.0;
pub const LANE_HALF_WIDTH: f64 = 1.75;
/// Lateral spacing between adjacent lane centerlines, m.
pub const LANE_SPACING: f64 = 3.5;
/// Paved shoulder outside the outermost lanes, m.
const SHOULDER: f64 = 1.0;
/// Sidewalk pedestrians stand this far right of the ego lane center, m.
const SIDEWALK_Y: f64 = -4.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    StraightFollow,
    IntersectionSignal,
    Crosswalk,
    LaneChange,
    StopSign,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::StraightFollow,
        Template::IntersectionSignal,
        Template::Crosswalk,
        Template::LaneChange,
        Template::StopSign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::StraightFollow => "straight_follow",
            Template::IntersectionSignal => "intersection_signal",
            Template::Crosswalk => "crosswalk",
            Template::LaneChange => "lane_change",
            Template::StopSign => "stop_sign",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LaneFollow,
    Brake,
    Accelerate,
    SwerveLeft,
    SwerveRight,
    RedLightRunner,
    Tailgater,
    OffRoad,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::LaneFollow,
        Family::Brake,
        Family::Accelerate,
        Family::SwerveLeft,
        Family::SwerveRight,
        Family::RedLightRunner,
        Family::Tailgater,
        Family::OffRoad,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub count: usize,
    pub templates: BTreeMap<Template, f64>,
    /// Candidates per scenario.
    pub k: usize,
    pub families: BTreeMap<Family, f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            count: 100,
            templates: Template::ALL.iter().map(|&t| (t, 1.0)).collect(),
            k: 6,
            families: Family::ALL.iter().map(|&f| (f, 1.0)).collect(),
        }
    }
}

fn check_weights<T>(w: &BTreeMap<T, f64>, what: &str) -> Result<()> {
    if w.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config(format!("{what} weights must be finite and >= 0")));
    }
    if !w.values().any(|v| *v > 0.0) {
        return Err(Error::Config(format!("{what} weights are all zero")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights(&self.templates, "template")?;
        check_weights(&self.families, "family")?;
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        Ok(())
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, weights: &BTreeMap<T, f64>) -> T {
    let total: f64 = weights.values().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (&k, &w) in weights {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return k;
        }
        u -= w;
        last = Some(k);
    }
    last.expect("validated weights have a positive entry")
}

/// A generated scenario with its candidates, the family behind each
/// candidate, and a synthetic ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScenario {
    pub template: Template,
    pub scenario: Scenario,
    pub candidates: CandidateSet,
    pub families: Vec<Family>,
    pub ground_truth: Trajectory,
}

impl SynthScenario {
    pub fn document(&self) -> ScenarioDocument {
        ScenarioDocument {
            scenario: self.scenario.clone(),
            candidates: Some(self.candidates.clone()),
            ground_truth: Some(self.ground_truth.clone()),
        }
    }
}

/// Template layout drawn once per scenario; candidate families read it to
/// shape their profiles.
#[derive(Clone, Debug)]
struct Layout {
    v0: f64,
    /// Longitudinal position where the ego should come to rest, if any.
    stop_at: Option<f64>,
    /// Speed of a lead vehicle in the ego lane.
    lead_speed: Option<f64>,
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<SynthScenario>> {
    cfg.validate()?;
    (0..cfg.count).map(|i| synthesize_one(cfg, i)).collect()
}

/// Scenario `index` of the stream for `cfg.seed`; independent of `cfg.count`.
pub fn synthesize_one(cfg: &SynthConfig, index: usize) -> Result<SynthScenario> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index as u64);
    let template = pick(&mut rng, &cfg.templates);
    let id = format!("synth-{}-{index:05}", cfg.seed);
    let (scenario, layout) = build_template(&mut rng, &id, template)?;

    let mut families = vec![Family::LaneFollow];
    for _ in 1..cfg.k {
        families.push(pick(&mut rng, &cfg.families));
    }
    // shuffle so the lane-follow mode sits at a random index
    for i in (1..families.len()).rev() {
        let j = rng.random_range(0..=i);
        families.swap(i, j);
    }
    let trajectories = families
        .iter()
        .map(|&f| family_trajectory(&mut rng, &layout, f))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = (0..families.len()).map(|_| Exp1.sample(&mut rng)).collect();
    let candidates = CandidateSet::new(trajectories, simplex(&raw))?;
    let lf = families.iter().position(|&f| f == Family::LaneFollow).expect("lane follow is always present");
    let ground_truth = jitter(&mut rng, &candidates.trajectories()[lf])?;
    Ok(SynthScenario { template, scenario, candidates, families, ground_truth })
}

/// Normalizes positive weights onto the simplex, nudging the largest entry
/// so the sum is 1 to within rounding.
pub(crate) fn simplex(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    };
    let err = 1.0 - p.iter().sum::<f64>();
    let top = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    p[top] += err;
    p
}

fn eastbound(y: f64, limit: Option<f64>) -> Lane {
    Lane::new(vec![Vec2::new(-100.0, y), Vec2::new(400.0, y)], LANE_HALF_WIDTH, limit)
}

fn westbound(y: f64, limit: Option<f64>) -> Lane {
    Lane::new(vec![Vec2::new(400.0, y), Vec2::new(-100.0, y)], LANE_HALF_WIDTH, limit)
}

/// Mainline road from `y_lo` to `y_hi` lane centers, plus shoulders.
fn mainline(y_lo: f64, y_hi: f64) -> Polygon {
    let m = LANE_HALF_WIDTH + SHOULDER;
    rectangle(Vec2::new(-100.0, y_lo - m), Vec2::new(400.0, y_hi + m))
}

fn sidewalk_pedestrian(rng: &mut ChaCha8Rng) -> AgentTrack {
    let x = rng.random_range(12.0..24.0);
    let speed = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.8..1.4) };
    AgentTrack::constant("ped-sidewalk", AgentType::Pedestrian, Vec2::new(x, SIDEWALK_Y), 0.0, speed, HORIZON)
}

/// Agent whose state at step `t` is at `p(t0) + u·v·(t - t0)` with the
/// crossing point reached at time `t_cross`.
fn crossing_vehicle(id: &str, at: Vec2, heading: f64, speed: f64, t_cross: f64) -> AgentTrack {
    let u = Vec2::from_heading(heading);
    let start = at - u * (speed * (t_cross - DT));
    AgentTrack::constant(id, AgentType::Vehicle, start, heading, speed, HORIZON)
}

/// Crossing road through `x` plus its lanes and intersection region.
fn cross_road(map: &mut MapContext, x: f64, limit: Option<f64>) {
    let up = Lane::new(vec![Vec2::new(x - 1.75, -150.0), Vec2::new(x - 1.75, 150.0)], LANE_HALF_WIDTH, limit);
    let down = Lane::new(vec![Vec2::new(x + 1.75, 150.0), Vec2::new(x + 1.75, -150.0)], LANE_HALF_WIDTH, limit);
    map.lanes.push(up);
    map.lanes.push(down);
    let m = 2.0 * LANE_HALF_WIDTH + SHOULDER;
    map.drivable_area.push(rectangle(Vec2::new(x - m, -150.0), Vec2::new(x + m, 150.0)));
    map.intersections = Some(vec![IntersectionRegion { center: Vec2::new(x, 1.75), radius: 10.0 }]);
}

fn ego_stop_line(x: f64, control: StopControl, timeline: Option<Vec<SignalPhase>>) -> StopLine {
    StopLine {
        start: Vec2::new(x, -LANE_HALF_WIDTH),
        end: Vec2::new(x, LANE_HALF_WIDTH),
        control,
        signal_timeline: timeline,
    }
}

fn build_template(rng: &mut ChaCha8Rng, id: &str, template: Template) -> Result<(Scenario, Layout)> {
    let v0 = rng.random_range(8.0..12.0);
    let limit = if rng.random_bool(0.8) { Some([11.2, 13.4, 15.6][rng.random_range(0..3)]) } else { None };
    let front = EGO_LENGTH / 2.0;
    let mut map = MapContext::default();
    let mut agents = vec![sidewalk_pedestrian(rng)];
    let mut layout = Layout { v0, stop_at: None, lead_speed: None };

    if template == Template::LaneChange {
        map.lanes.push(eastbound(0.0, limit));
        map.lanes.push(eastbound(LANE_SPACING, limit));
    } else {
        map.lanes.push(eastbound(0.0, limit));
        map.lanes.push(westbound(LANE_SPACING, limit));
    }
    map.drivable_area.push(mainline(0.0, LANE_SPACING));

    match template {
        Template::StraightFollow => {
            let gap = rng.random_range(22.0..45.0);
            let v_lead = v0 - rng.random_range(0.0..3.0);
            agents.push(AgentTrack::constant(
                "lead",
                AgentType::Vehicle,
                Vec2::new(front + gap + EGO_LENGTH / 2.0 + v_lead * DT, 0.0),
                0.0,
                v_lead,
                HORIZON,
            ));
            let x_on = rng.random_range(60.0..140.0);
            agents.push(AgentTrack::constant(
                "oncoming",
                AgentType::Vehicle,
                Vec2::new(x_on, LANE_SPACING),
                std::f64::consts::PI,
                rng.random_range(8.0..13.0),
                HORIZON,
            ));
            layout.lead_speed = Some(v_lead);
        }
        Template::IntersectionSignal | Template::StopSign => {
            let x_int = rng.random_range(32.0..46.0);
            let x_line = x_int - 6.0;
            cross_road(&mut map, x_int, limit);
            let stop_sign = template == Template::StopSign;
            let line = if stop_sign {
                ego_stop_line(x_line, StopControl::StopSign, None)
            } else {
                let r0 = rng.random_range(0..=8);
                let tl = (0..HORIZON).map(|t| if t < r0 { SignalPhase::Yellow } else { SignalPhase::Red }).collect();
                ego_stop_line(x_line, StopControl::Signal, Some(tl))
            };
            map.stop_lines.push(line);
            let v_c = rng.random_range(8.0..12.0);
            let t_cross = rng.random_range(1.5..4.0);
            agents.push(crossing_vehicle(
                "cross",
                Vec2::new(x_int - 1.75, 0.0),
                std::f64::consts::FRAC_PI_2,
                v_c,
                t_cross,
            ));
            // front bumper comes to rest just short of the line
            let rest_gap = if stop_sign { 0.5 } else { 1.0 };
            layout.stop_at = Some(x_line - front - rest_gap);
        }
        Template::Crosswalk => {
            let x_cw = rng.random_range(28.0..45.0);
            let y_lo = -LANE_HALF_WIDTH - SHOULDER;
            let y_hi = LANE_SPACING + LANE_HALF_WIDTH + SHOULDER;
            map.crosswalks.push(rectangle(Vec2::new(x_cw, y_lo), Vec2::new(x_cw + 4.0, y_hi)));
            let walk = rng.random_range(1.1..1.6);
            agents.push(AgentTrack::constant(
                "ped-crossing",
                AgentType::Pedestrian,
                Vec2::new(x_cw + 2.0, y_lo - rng.random_range(0.5..2.0)),
                std::f64::consts::FRAC_PI_2,
                walk,
                HORIZON,
            ));
            layout.stop_at = Some(x_cw - front - 1.5);
        }
        Template::LaneChange => {
            let gap = rng.random_range(20.0..32.0);
            let v_lead = (v0 - rng.random_range(2.0..5.0)).max(2.0);
            agents.push(AgentTrack::constant(
                "lead",
                AgentType::Vehicle,
                Vec2::new(front + gap + EGO_LENGTH / 2.0 + v_lead * DT, 0.0),
                0.0,
                v_lead,
                HORIZON,
            ));
            agents.push(AgentTrack::constant(
                "adjacent",
                AgentType::Vehicle,
                Vec2::new(rng.random_range(-25.0..30.0), LANE_SPACING),
                0.0,
                v0 + rng.random_range(-1.0..2.0),
                HORIZON,
            ));
            layout.lead_speed = Some(v_lead);
        }
    }
    let scenario = Scenario::new(ScenarioParts {
        id: id.to_string(),
        ego_history: straight_history(Vec2::ZERO, 0.0, v0),
        agents,
        map,
        ego_length: EGO_LENGTH,
        ego_width: EGO_WIDTH,
    })?;
    Ok((scenario, layout))
}

/// Constant acceleration `a` from `v0` until `v_target`, then cruise.
#[derive(Clone, Copy, Debug)]
struct SpeedProfile {
    v0: f64,
    a: f64,
    v_target: f64,
}

impl SpeedProfile {
    fn cruise(v0: f64) -> Self {
        SpeedProfile { v0, a: 0.0, v_target: v0 }
    }

    fn toward(v0: f64, v_target: f64, rate: f64) -> Self {
        let a = if v_target >= v0 { rate.abs() } else { -rate.abs() };
        SpeedProfile { v0, a, v_target: v_target.max(0.0) }
    }

    /// Uniform deceleration that comes to rest after `dist` meters.
    fn stop_within(v0: f64, dist: f64) -> Self {
        let a = -(v0 * v0) / (2.0 * dist.max(1.0));
        SpeedProfile { v0, a, v_target: 0.0 }
    }

    fn ramp_end(&self) -> f64 {
        if self.a == 0.0 {
            0.0
        } else {
            ((self.v_target - self.v0) / self.a).max(0.0)
        }
    }

    fn speed(&self, t: f64) -> f64 {
        let te = self.ramp_end();
        if t < te {
            self.v0 + self.a * t
        } else {
            self.v_target
        }
    }

    fn distance(&self, t: f64) -> f64 {
        let te = self.ramp_end();
        if t < te {
            self.v0 * t + 0.5 * self.a * t * t
        } else {
            self.v0 * te + 0.5 * self.a * te * te + self.v_target * (t - te)
        }
    }
}

/// Quintic smoothstep lateral move of `depth` meters starting at `t0` over `dur`.
#[derive(Clone, Copy, Debug)]
struct LateralProfile {
    t0: f64,
    dur: f64,
    depth: f64,
}

impl LateralProfile {
    const NONE: LateralProfile = LateralProfile { t0: 0.0, dur: 1.0, depth: 0.0 };

    fn offset(&self, t: f64) -> f64 {
        let u = ((t - self.t0) / self.dur).clamp(0.0, 1.0);
        self.depth * u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }

    fn rate(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.dur;
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        self.depth / self.dur * 30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

fn lane_frame_trajectory(speed: SpeedProfile, lateral: LateralProfile) -> Result<Trajectory> {
    let states = (1..=HORIZON)
        .map(|i| {
            let t = i as f64 * DT;
            let (s, sd) = (speed.distance(t), speed.speed(t));
            let (d, dd) = (lateral.offset(t), lateral.rate(t));
            let v = sd.hypot(dd);
            let heading = if v > 1e-9 { dd.atan2(sd) } else { 0.0 };
            TrajectoryState { x: s, y: d, heading, speed: v }
        })
        .collect();
    Trajectory::new(states)
}

/// The rule-abiding reference behavior for a layout.
fn lane_follow_speed(layout: &Layout) -> SpeedProfile {
    if let Some(stop) = layout.stop_at {
        return SpeedProfile::stop_within(layout.v0, stop);
    }
    if let Some(v_lead) = layout.lead_speed {
        return SpeedProfile::toward(layout.v0, v_lead.min(layout.v0), 1.0);
    }
    SpeedProfile::cruise(layout.v0)
}

fn family_trajectory(rng: &mut ChaCha8Rng, layout: &Layout, family: Family) -> Result<Trajectory> {
    let v0 = layout.v0;
    let (speed, lateral) = match family {
        Family::LaneFollow => (lane_follow_speed(layout), LateralProfile::NONE),
        Family::Brake => (SpeedProfile::toward(v0, 0.0, rng.random_range(2.0..4.0)), LateralProfile::NONE),
        Family::Accelerate => {
            (SpeedProfile::toward(v0, v0 + rng.random_range(3.0..7.0), rng.random_range(1.0..2.5)), LateralProfile::NONE)
        }
        Family::SwerveLeft | Family::SwerveRight => {
            let sign = if family == Family::SwerveLeft { 1.0 } else { -1.0 };
            let depth = sign * rng.random_range(2.5..3.5);
            let lat = LateralProfile { t0: rng.random_range(0.3..1.5), dur: rng.random_range(2.0..3.0), depth };
            (SpeedProfile::cruise(v0), lat)
        }
        Family::RedLightRunner => {
            // holds or gains speed through whatever control lies ahead
            (SpeedProfile::toward(v0, v0 + rng.random_range(0.0..3.0), rng.random_range(0.2..1.5)), LateralProfile::NONE)
        }
        Family::Tailgater => {
            (SpeedProfile::toward(v0, v0 + rng.random_range(4.0..7.0), rng.random_range(1.5..2.5)), LateralProfile::NONE)
        }
        Family::OffRoad => {
            let lat = LateralProfile {
                t0: rng.random_range(0.3..1.0),
                dur: rng.random_range(2.0..3.0),
                depth: -rng.random_range(5.0..7.0),
            };
            (SpeedProfile::cruise(v0), lat)
        }
    };
    lane_frame_trajectory(speed, lateral)
}

/// Ground truth: the reference candidate plus a smooth seeded random walk.
fn jitter(rng: &mut ChaCha8Rng, base: &Trajectory) -> Result<Trajectory> {
    let step = Normal::new(0.0, 0.03).expect("valid sigma");
    let (mut dx, mut dy) = (0.0, 0.0);
    let states = base
        .states()
        .iter()
        .map(|s| {
            dx += step.sample(rng);
            dy += step.sample(rng);
            TrajectoryState { x: s.x + dx, y: s.y + dy, ..*s }
        })
        .collect();
    Trajectory::new(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Rulebook;
    use crate::proxy::{rule_severity, ProxyParams};
    use crate::scenario::save_document;

    fn one(template: Template, seed: u64) -> SynthScenario {
        let cfg = SynthConfig { seed, count: 1, templates: [(template, 1.0)].into(), ..SynthConfig::default() };
        synthesize_one(&cfg, 0).unwrap()
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = SynthConfig { seed: 42, count: 5, ..SynthConfig::default() };
        let a: Vec<Vec<u8>> = synthesize(&cfg).unwrap().iter().map(|s| save_document(&s.document())).collect();
        let b: Vec<Vec<u8>> = synthesize(&cfg).unwrap().iter().map(|s| save_document(&s.document())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn signal_template_has_red() {
        let s = one(Template::IntersectionSignal, 3);
        let line = &s.scenario.map().stop_lines[0];
        assert!(line.has_signal());
        assert!(line.signal_timeline.as_ref().unwrap().contains(&SignalPhase::Red));
    }

    #[test]
    fn red_light_runner_violates() {
        let rb = Rulebook::builtin();
        let rule = rb.lookup("L1.R3").unwrap();
        let mut checked = 0;
        for seed in 0..20 {
            let cfg = SynthConfig {
                seed,
                count: 1,
                templates: [(Template::IntersectionSignal, 1.0)].into(),
                families: [(Family::RedLightRunner, 1.0)].into(),
                ..SynthConfig::default()
            };
            let s = synthesize_one(&cfg, 0).unwrap();
            for (k, f) in s.families.iter().enumerate() {
                let v = rule_severity(rule, &s.candidates.trajectories()[k], &s.scenario, &ProxyParams::default()).unwrap();
                if *f == Family::RedLightRunner {
                    assert!(v > 0.0, "seed {seed}: runner severity {v}");
                    checked += 1;
                } else {
                    assert!(v < 1e-3, "seed {seed}: lane follow severity {v}");
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn lane_follow_is_somewhere() {
        let cfg = SynthConfig { seed: 5, count: 40, ..SynthConfig::default() };
        let all = synthesize(&cfg).unwrap();
        let positions: std::collections::BTreeSet<usize> =
            all.iter().map(|s| s.families.iter().position(|&f| f == Family::LaneFollow).unwrap()).collect();
        assert!(positions.len() > 1);
        let argmax_is_lf = all
            .iter()
            .filter(|s| {
                let p = s.candidates.confidences();
                let top = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
                s.families[top] == Family::LaneFollow
            })
            .count();
        assert!(argmax_is_lf < all.len());
    }

    #[test]
    fn candidates_are_smooth() {
        for t in Template::ALL {
            let s = one(t, 11);
            for traj in s.candidates.trajectories() {
                for w in traj.states().windows(2) {
                    let step = w[0].position().distance(w[1].position());
                    assert!(step < 2.5, "{t:?}: step {step}");
                    assert!((w[1].speed - w[0].speed).abs() <= 0.45 + 1e-9, "{t:?}");
                }
            }
        }
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = SynthConfig { k: 1, ..SynthConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.k = 3;
        cfg.families = [(Family::Brake, 0.0)].into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn simplex_sums_to_one() {
        let p = simplex(&[0.1, 0.7, 3.3, 1e-9]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
