use super::*;
use crate::geometry::Vec2;
use crate::scenario::{
    constant_velocity, rectangle, AgentTrack, Lane, ScenarioBuilder, SignalPhase, StopControl, StopLine,
    TrajectoryState, DT, HORIZON,
};

fn book() -> Rulebook {
    Rulebook::builtin()
}

fn rule(id: &str) -> RuleSpec {
    book().lookup(id).unwrap().clone()
}

fn east_lane(limit: Option<f64>) -> Lane {
    Lane::new(vec![Vec2::new(-200.0, 0.0), Vec2::new(1000.0, 0.0)], 1.75, limit)
}

fn cruise(speed: f64) -> Trajectory {
    constant_velocity(Vec2::new(speed * DT, 0.0), 0.0, speed, HORIZON)
}

fn sev(id: &str, traj: &Trajectory, s: &Scenario) -> f64 {
    rule_severity(&rule(id), traj, s, &ProxyParams::default()).unwrap()
}

#[test]
fn following_too_close() {
    // Same-length lead 20 m ahead at 15 m/s: required 30 m, gap 20 m.
    let s = ScenarioBuilder::new("follow", 15.0)
        .lane(east_lane(None))
        .agent(AgentTrack::constant("lead", AgentType::Vehicle, Vec2::new(21.5, 0.0), 0.0, 15.0, HORIZON))
        .build()
        .unwrap();
    let v = sev("L0.R0", &cruise(15.0), &s);
    assert!((v - 500.0).abs() < 1e-9, "{v}");
}

#[test]
fn time_gap_of_one_second() {
    let s = ScenarioBuilder::new("gap", 10.0)
        .lane(east_lane(None))
        .agent(AgentTrack::constant("lead", AgentType::Vehicle, Vec2::new(11.0, 0.0), 0.0, 10.0, HORIZON))
        .build()
        .unwrap();
    let v = sev("L3.R10", &cruise(10.0), &s);
    assert!((v - 25.0).abs() < 1e-9, "{v}");
}

#[test]
fn no_lead_means_inactive() {
    let s = ScenarioBuilder::new("empty", 10.0).lane(east_lane(None)).build().unwrap();
    assert!(!activation(&rule("L0.R0"), &s, &cruise(10.0)));
    assert!(matches!(
        rule_severity(&rule("L0.R0"), &cruise(10.0), &s, &ProxyParams::default()),
        Err(Error::RuleNotActive(_))
    ));
}

#[test]
fn pedestrian_lateral_clearance() {
    // Ego edge at y = 1; a 0.5 m pedestrian centered at y = 2.25 keeps 1.0 m.
    let mut ped = AgentTrack::constant("p", AgentType::Pedestrian, Vec2::new(1.0, 2.25), 0.0, 10.0, HORIZON);
    for (t, v) in ped.valid.iter_mut().enumerate() {
        *v = t < 10;
    }
    let s = ScenarioBuilder::new("clear", 10.0).lane(east_lane(None)).agent(ped).build().unwrap();
    let v = sev("L0.R1", &cruise(10.0), &s);
    assert!((v - 5.0).abs() < 1e-9, "{v}");
    assert_eq!(sev("L0.R3", &cruise(10.0), &s), 0.0);
}

#[test]
fn speeding() {
    let s = ScenarioBuilder::new("limit", 15.0).lane(east_lane(Some(13.0))).build().unwrap();
    let v = sev("L1.R2", &cruise(15.0), &s);
    assert!((v - 50.0).abs() < 1e-9, "{v}");
    let unknown = ScenarioBuilder::new("nolimit", 15.0).lane(east_lane(None)).build().unwrap();
    assert!(!activation(&rule("L1.R2"), &unknown, &cruise(15.0)));
}

#[test]
fn lane_offset_two_meters() {
    let s = ScenarioBuilder::new("offset", 10.0).lane(east_lane(None)).build().unwrap();
    let traj = constant_velocity(Vec2::new(1.0, 2.0), 0.0, 10.0, HORIZON);
    let v = sev("L2.R1", &traj, &s);
    assert!((v - 10.0).abs() < 1e-9, "{v}");
}

#[test]
fn outside_drivable_area() {
    let s = ScenarioBuilder::new("offroad", 10.0)
        .lane(east_lane(None))
        .drivable(rectangle(Vec2::new(-200.0, -5.0), Vec2::new(1000.0, 5.0)))
        .build()
        .unwrap();
    let states = (0..HORIZON)
        .map(|t| TrajectoryState { x: t as f64, y: if t < 5 { 6.0 } else { 0.0 }, heading: 0.0, speed: 10.0 })
        .collect();
    let v = sev("L2.R0", &Trajectory::new(states).unwrap(), &s);
    assert!((v - 2.5).abs() < 1e-9, "{v}");
    assert_eq!(sev("L2.R0", &cruise(10.0), &s), 0.0);
}

#[test]
fn constant_lateral_acceleration() {
    // v = 10 m/s, yaw rate 0.2 rad/s -> a_lat = 2.0 m/s^2 at every step.
    let s = ScenarioBuilder::new("arc", 10.0).build().unwrap();
    let (v, w) = (10.0, 0.2);
    let r = v / w;
    let states = (1..=HORIZON)
        .map(|i| {
            let th = w * DT * i as f64;
            TrajectoryState { x: r * th.sin(), y: r * (1.0 - th.cos()), heading: th, speed: v }
        })
        .collect();
    let traj = Trajectory::new(states).unwrap();
    let sv = sev("L3.R4", &traj, &s);
    assert!((sv - 25.0).abs() < 1e-9, "{sv}");
}

#[test]
fn stop_sign_rolling_stop() {
    let line = StopLine {
        start: Vec2::new(20.0, -3.0),
        end: Vec2::new(20.0, 3.0),
        control: StopControl::StopSign,
        signal_timeline: None,
    };
    let s = ScenarioBuilder::new("stop", 5.0).lane(east_lane(None)).stop_line(line).build().unwrap();
    // Front bumper goes from 10 m to 21 m; slowest in the window is 2.0 m/s.
    let states = (0..HORIZON)
        .map(|t| {
            let front = 10.0 + 11.0 * t as f64 / 49.0;
            TrajectoryState { x: front - 2.25, y: 0.0, heading: 0.0, speed: 2.0 + 0.1 * (49 - t) as f64 }
        })
        .collect();
    let v = sev("L1.R4", &Trajectory::new(states).unwrap(), &s);
    assert!((v - 2.4).abs() < 1e-9, "{v}");
}

fn signal_scenario(phase: SignalPhase) -> Scenario {
    let line = StopLine {
        start: Vec2::new(30.0, -3.0),
        end: Vec2::new(30.0, 3.0),
        control: StopControl::Signal,
        signal_timeline: Some(vec![phase; HORIZON]),
    };
    ScenarioBuilder::new("signal", 10.0).lane(east_lane(None)).stop_line(line).build().unwrap()
}

#[test]
fn red_light_crossing() {
    let s = signal_scenario(SignalPhase::Red);
    let run = sev("L1.R3", &cruise(10.0), &s);
    assert!((run - 1.0).abs() < 1e-6, "{run}");
    // Stopping 10 m short of the line.
    let stop = constant_velocity(Vec2::new(17.75, 0.0), 0.0, 0.0, HORIZON);
    assert!(sev("L1.R3", &stop, &s) < 1e-30);
    assert!(sev("L1.R0", &cruise(10.0), &s) > 0.0);
    let green = signal_scenario(SignalPhase::Green);
    assert!(!activation(&rule("L1.R3"), &green, &cruise(10.0)));
    let none = ScenarioBuilder::new("plain", 10.0).lane(east_lane(None)).build().unwrap();
    assert!(!activation(&rule("L1.R3"), &none, &cruise(10.0)));
}

#[test]
fn wrong_way() {
    let s = ScenarioBuilder::new("ww", 10.0).lane(east_lane(None)).build().unwrap();
    let traj = constant_velocity(Vec2::new(0.0, 0.0), std::f64::consts::PI, 10.0, HORIZON);
    // phi = 180 deg, 5 s of mismatch, 10 m/s: 0.8 + 0.4 + 0.2.
    let v = sev("L1.R6", &traj, &s);
    assert!((v - 1.4).abs() < 1e-9, "{v}");
    assert_eq!(sev("L1.R6", &cruise(10.0), &s), 0.0);
}

#[test]
fn pedestrian_within_ten_meters_activates() {
    let ped = AgentTrack::constant("p", AgentType::Pedestrian, Vec2::new(0.0, 9.25), 0.0, 0.0, HORIZON);
    let s = ScenarioBuilder::new("ped", 0.0).agent(ped).build().unwrap();
    let still = constant_velocity(Vec2::ZERO, 0.0, 0.0, HORIZON);
    // Edge distance: 9.25 - 0.25 - 1.0 = 8 m.
    assert!(activation(&rule("L3.R12"), &s, &still));
}

#[test]
fn smooth_cruise_has_no_comfort_cost() {
    let s = ScenarioBuilder::new("c", 10.0).build().unwrap();
    assert_eq!(sev("L3.R0", &cruise(10.0), &s), 0.0);
    assert_eq!(sev("L3.R1", &cruise(10.0), &s), 0.0);
}

#[test]
fn normalization_values() {
    let r = rule("L0.R3");
    assert_eq!(normalize(0.0, &r, Normalization::Exponential), 0.0);
    assert!((normalize(0.5, &r, Normalization::Exponential) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    let lin = rule("L2.R1");
    assert_eq!(normalize(2.0 * lin.linear_scale(), &lin, Normalization::LinearClamp), 1.0);
    assert_eq!(rule("L0.R2").linear_scale(), 1.0);
}

#[test]
fn applicability_policies() {
    let b = book();
    let on = applicability(ApplicabilityPolicy::AlwaysOn, None, None, &b).unwrap();
    assert!(on.binary.iter().all(|&x| x));
    let mut scores = vec![0.0; 28];
    scores[b.index_of("L0.R0").unwrap()] = 0.06;
    scores[b.index_of("L3.R0").unwrap()] = 0.45;
    let m = applicability(ApplicabilityPolicy::Thresholded, None, Some(&scores), &b).unwrap();
    assert!(m.binary[b.index_of("L0.R0").unwrap()]);
    assert!(!m.binary[b.index_of("L3.R0").unwrap()]);
    let h = applicability(ApplicabilityPolicy::Hybrid, None, Some(&[0.0; 28]), &b).unwrap();
    for (r, &a) in b.rules().iter().zip(&h.binary) {
        assert_eq!(a, r.tier.index() <= 1);
    }
    assert!(matches!(
        applicability(ApplicabilityPolicy::Oracle, None, None, &b),
        Err(Error::MissingApplicability { .. })
    ));
}

#[test]
fn aggregation_by_hand() {
    let b = book();
    let mut row = vec![0.0; 28];
    row[b.index_of("L2.R0").unwrap()] = 0.4;
    row[b.index_of("L2.R1").unwrap()] = 0.8;
    let s = aggregate(&[row], &[vec![true; 28]], &[true; 28], &b);
    assert!((s[0][2] - 0.6).abs() < 1e-12);
}

#[test]
fn empty_mask_gives_zero_scores_and_audit_rules_are_free() {
    let s = ScenarioBuilder::new("z", 10.0)
        .lane(east_lane(Some(5.0)))
        .agent(AgentTrack::constant("lead", AgentType::Vehicle, Vec2::new(8.0, 0.0), 0.0, 5.0, HORIZON))
        .build()
        .unwrap();
    let cands = CandidateSet::new(vec![cruise(10.0), cruise(12.0)], vec![0.5, 0.5]).unwrap();
    let b = book();
    let off = evaluate(&cands, &s, &ApplicabilityMask::all(&b, false), &b, &EvalOptions::default()).unwrap();
    assert!(off.tier_scores.iter().all(|s| s.iter().all(|&v| v == 0.0)));
    let on = evaluate(&cands, &s, &ApplicabilityMask::all(&b, true), &b, &EvalOptions::default()).unwrap();
    assert!(on.tier_scores[0][0] > 0.0);
    assert!(on.tier_scores[0][1] > 0.0);
    let i = b.index_of("L3.R8").unwrap();
    assert!(on.violations.raw.iter().all(|row| row[i] == 0.0));
    assert_eq!(on.trace[i].activation[0].reason, "audit-only rule");
}

#[test]
fn mask_length_is_checked() {
    let s = ScenarioBuilder::new("d", 1.0).build().unwrap();
    let cands = CandidateSet::new(vec![cruise(1.0)], vec![1.0]).unwrap();
    let bad = ApplicabilityMask { binary: vec![true; 3], scores: None, source: MaskSource::Oracle };
    assert!(matches!(
        evaluate(&cands, &s, &bad, &book(), &EvalOptions::default()),
        Err(Error::DimensionMismatch(_))
    ));
}
