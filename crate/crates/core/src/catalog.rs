//! The 28-rule, four-tier rulebook.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Priority class. Lower discriminant = higher priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Safety = 0,
    Legal = 1,
    Road = 2,
    Comfort = 3,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Safety, Tier::Legal, Tier::Road, Tier::Comfort];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tier> {
        Tier::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Safety => "safety",
            Tier::Legal => "legal",
            Tier::Road => "road",
            Tier::Comfort => "comfort",
        }
    }
}

/// A rule's primary constant and its unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub paper_id: String,
    pub registry_id: String,
    pub tier: Tier,
    pub description: String,
    pub kappa: f64,
    /// The constant the proxy hinges on; `None` when the proxy has no scale.
    pub threshold: Option<Threshold>,
    pub has_proxy: bool,
    pub activation_id: String,
    /// Intra-tier weight w̃_r.
    pub weight: f64,
    /// Whether the rule was observed to apply in the reference evaluation set.
    pub observed_applicable: bool,
}

impl RuleSpec {
    pub fn threshold_value(&self) -> Option<f64> {
        self.threshold.as_ref().map(|t| t.value)
    }

    /// Scale used by the linear normalization: the threshold when positive,
    /// else 1.
    pub fn linear_scale(&self) -> f64 {
        match self.threshold_value() {
            Some(v) if v > 0.0 => v,
            _ => 1.0,
        }
    }
}

/// Partial replacement for a rule's tunable constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

pub type Overrides = BTreeMap<String, RuleOverride>;

#[derive(Clone, Debug, PartialEq)]
pub struct Rulebook {
    rules: Vec<RuleSpec>,
    index: HashMap<String, usize>,
    by_tier: [Vec<usize>; 4],
}

// paper id, registry id, tier, description, kappa, threshold (value, unit), activation, observed
type Row = (&'static str, &'static str, Tier, &'static str, f64, Option<(f64, &'static str)>, &'static str, bool);

const AUDIT: &str = "audit_only";

#[rustfmt::skip]
const BUILTIN: [Row; 28] = [
    ("L0.R0", "L0.R2", Tier::Safety, "Safe longitudinal distance", 2.0, Some((2.0, "s")), "lead_vehicle_moving", true),
    ("L0.R1", "L0.R3", Tier::Safety, "Safe lateral clearance", 2.0, Some((0.5, "m")), "agents_within_50m", true),
    ("L0.R2", "L0.R4", Tier::Safety, "Crosswalk occupancy", 3.0, None, "crosswalk_pedestrian_moving", true),
    ("L0.R3", "L10.R1", Tier::Safety, "Collision avoidance (overlap)", 2.0, Some((0.01, "m")), "agents_within_50m", true),
    ("L0.R4", "L10.R2", Tier::Safety, "VRU clearance buffer", 2.0, Some((2.0, "m")), "vru_present_moving", false),
    ("L1.R0", "L5.R1", Tier::Legal, "Traffic signal compliance", 3.0, Some((5.0, "m")), "signal_stop_line", false),
    ("L1.R1", "L5.R2", Tier::Legal, "Priority / right-of-way", 2.0, None, AUDIT, false),
    ("L1.R2", "L7.R4", Tier::Legal, "Speed limit adherence", 2.0, Some((1.0, "m/s")), "speed_limit_known", true),
    ("L1.R3", "L8.R1", Tier::Legal, "Red-light stop compliance", 3.0, None, "red_phase_present", true),
    ("L1.R4", "L8.R2", Tier::Legal, "Stop-sign compliance", 3.0, Some((5.0, "m")), "stop_sign_within_30m", true),
    ("L1.R5", "L8.R3", Tier::Legal, "Crosswalk yield to pedestrians", 3.0, Some((3.0, "s")), "crosswalk_vru_moving", true),
    ("L1.R6", "L8.R5", Tier::Legal, "Wrong-way driving prevention", 2.0, Some((2.356, "rad")), "lane_moving", true),
    ("L2.R0", "L3.R3", Tier::Road, "Drivable surface constraint", 2.0, Some((0.5, "m")), "drivable_area_moving", false),
    ("L2.R1", "L7.R3", Tier::Road, "Lane departure prevention", 2.0, Some((1.75, "m")), "lane_present", true),
    ("L3.R0", "L1.R1", Tier::Comfort, "Smooth longitudinal acceleration", 2.0, Some((2.0, "m/s^2")), "moving_3_frames", true),
    ("L3.R1", "L1.R2", Tier::Comfort, "Smooth braking deceleration", 2.0, Some((1.5, "m/s^2")), "speed_above_1", true),
    ("L3.R2", "L1.R3", Tier::Comfort, "Smooth lateral steering", 2.0, Some((15.0, "deg/s")), "turning_moving", false),
    ("L3.R3", "L1.R4", Tier::Comfort, "Speed consistency", 2.0, Some((2.0, "m/s")), "moving_window", false),
    ("L3.R4", "L1.R5", Tier::Comfort, "Jerk / lane-change smoothness", 2.0, Some((1.5, "m/s^2")), "lateral_velocity", false),
    ("L3.R5", "L4.R3", Tier::Comfort, "Left-turn gap acceptance", 2.0, Some((4.0, "s")), "left_turn_oncoming", true),
    ("L3.R6", "L5.R3", Tier::Comfort, "Parking-zone violation", 2.0, None, AUDIT, false),
    ("L3.R7", "L5.R4", Tier::Comfort, "School-zone speed compliance", 2.0, None, AUDIT, false),
    ("L3.R8", "L5.R5", Tier::Comfort, "Construction-zone compliance", 2.0, None, AUDIT, true),
    ("L3.R9", "L6.R1", Tier::Comfort, "Cooperative lane change", 2.0, Some((2.0, "s")), "lane_change_detected", false),
    ("L3.R10", "L6.R2", Tier::Comfort, "Safe following distance", 2.0, Some((2.0, "s")), "lead_vehicle_moving", true),
    ("L3.R11", "L6.R3", Tier::Comfort, "Intersection negotiation", 2.0, Some((3.0, "s")), "intersection_presence", true),
    ("L3.R12", "L6.R4", Tier::Comfort, "Pedestrian interaction", 2.0, Some((1.5, "m")), "pedestrian_within_10m", true),
    ("L3.R13", "L6.R5", Tier::Comfort, "Cyclist interaction", 2.0, Some((1.5, "m")), "cyclist_within_10m", true),
];

/// The constants from the catalog table that differ from the proxy
/// definitions, packaged as an override set.
pub fn table_alternate_overrides() -> Overrides {
    [("L1.R2", 2.235), ("L0.R4", 1.0), ("L3.R0", 3.0), ("L3.R1", 4.0)]
        .into_iter()
        .map(|(id, t)| (id.to_string(), RuleOverride { threshold: Some(t), ..Default::default() }))
        .collect()
}

impl Rulebook {
    /// The full built-in catalog with uniform intra-tier weights over the
    /// proxied rules.
    pub fn builtin() -> Rulebook {
        let mut rules: Vec<RuleSpec> = BUILTIN
            .iter()
            .map(|&(pid, rid, tier, desc, kappa, threshold, activation, observed)| RuleSpec {
                paper_id: pid.into(),
                registry_id: rid.into(),
                tier,
                description: desc.into(),
                kappa,
                threshold: threshold.map(|(value, unit)| Threshold { value, unit: unit.into() }),
                has_proxy: activation != AUDIT,
                activation_id: activation.into(),
                weight: 0.0,
                observed_applicable: observed,
            })
            .collect();
        for tier in Tier::ALL {
            let n = rules.iter().filter(|r| r.tier == tier && r.has_proxy).count() as f64;
            for r in rules.iter_mut().filter(|r| r.tier == tier && r.has_proxy) {
                r.weight = 1.0 / n;
            }
        }
        Rulebook::from_rules(rules).expect("built-in catalog is consistent")
    }

    pub fn from_rules(rules: Vec<RuleSpec>) -> Result<Rulebook> {
        let mut index = HashMap::new();
        let mut by_tier: [Vec<usize>; 4] = Default::default();
        for (i, r) in rules.iter().enumerate() {
            if index.insert(r.paper_id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate rule id {}", r.paper_id)));
            }
            if !(r.kappa.is_finite() && r.kappa > 0.0) {
                return Err(Error::Config(format!("{}: kappa must be > 0", r.paper_id)));
            }
            by_tier[r.tier.index()].push(i);
        }
        let book = Rulebook { rules, index, by_tier };
        book.check_weights()?;
        Ok(book)
    }

    fn check_weights(&self) -> Result<()> {
        for tier in Tier::ALL {
            let ids = &self.by_tier[tier.index()];
            let mut sum = 0.0;
            let mut proxied = 0;
            for &i in ids {
                let r = &self.rules[i];
                if !(r.weight.is_finite() && r.weight >= 0.0) {
                    return Err(Error::Weights(format!("{}: weight {} is not >= 0", r.paper_id, r.weight)));
                }
                if !r.has_proxy && r.weight != 0.0 {
                    return Err(Error::Weights(format!("{} is audit-only and must have weight 0", r.paper_id)));
                }
                if r.has_proxy {
                    proxied += 1;
                    sum += r.weight;
                }
            }
            if proxied > 0 && (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Weights(format!("{} weights sum to {sum}", tier.name())));
            }
        }
        Ok(())
    }

    /// Applies `overrides` and renormalizes the weights of every tier touched
    /// by a weight override.
    pub fn with_overrides(&self, overrides: &Overrides) -> Result<Rulebook> {
        let mut rules = self.rules.clone();
        let mut touched = [false; 4];
        for (id, o) in overrides {
            let i = self.index_of(id).ok_or_else(|| Error::UnknownRule(id.clone()))?;
            let r = &mut rules[i];
            if let Some(k) = o.kappa {
                if !(k.is_finite() && k > 0.0) {
                    return Err(Error::Config(format!("{id}: kappa must be > 0, got {k}")));
                }
                r.kappa = k;
            }
            if let Some(t) = o.threshold {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::Config(format!("{id}: threshold must be >= 0, got {t}")));
                }
                match &mut r.threshold {
                    Some(th) => th.value = t,
                    None => return Err(Error::Config(format!("{id} has no threshold to override"))),
                }
            }
            if let Some(w) = o.weight {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Weights(format!("{id}: weight must be >= 0, got {w}")));
                }
                if !r.has_proxy && w != 0.0 {
                    return Err(Error::Weights(format!("{id} is audit-only")));
                }
                r.weight = w;
                touched[r.tier.index()] = true;
            }
        }
        for tier in Tier::ALL.into_iter().filter(|t| touched[t.index()]) {
            let sum: f64 = rules.iter().filter(|r| r.tier == tier && r.has_proxy).map(|r| r.weight).sum();
            if !(sum > 0.0) {
                return Err(Error::Weights(format!("{} weights sum to zero", tier.name())));
            }
            for r in rules.iter_mut().filter(|r| r.tier == tier && r.has_proxy) {
                r.weight /= sum;
            }
        }
        Rulebook::from_rules(rules)
    }

    pub fn rules(&self) -> &[RuleSpec] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn index_of(&self, paper_id: &str) -> Option<usize> {
        self.index.get(paper_id).copied()
    }

    pub fn lookup(&self, paper_id: &str) -> Option<&RuleSpec> {
        self.index_of(paper_id).map(|i| &self.rules[i])
    }

    pub fn lookup_registry(&self, registry_id: &str) -> Option<&RuleSpec> {
        self.rules.iter().find(|r| r.registry_id == registry_id)
    }

    /// Indices of the rules in `tier`, in catalog order.
    pub fn tier_rules(&self, tier: Tier) -> &[usize] {
        &self.by_tier[tier.index()]
    }
}

impl Default for Rulebook {
    fn default() -> Self {
        Rulebook::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let b = Rulebook::builtin();
        let r = b.lookup("L0.R3").unwrap();
        assert_eq!(r.registry_id, "L10.R1");
        assert_eq!(r.tier, Tier::Safety);
        assert_eq!(r.kappa, 2.0);
        assert_eq!(b.lookup("L1.R3").unwrap().kappa, 3.0);
        assert_eq!(b.lookup_registry("L6.R5").unwrap().paper_id, "L3.R13");
    }

    #[test]
    fn counts() {
        let b = Rulebook::builtin();
        assert_eq!(b.len(), 28);
        let sizes: Vec<usize> = Tier::ALL.iter().map(|&t| b.tier_rules(t).len()).collect();
        assert_eq!(sizes, vec![5, 7, 2, 14]);
        let audit: Vec<&str> =
            b.rules().iter().filter(|r| !r.has_proxy).map(|r| r.paper_id.as_str()).collect();
        assert_eq!(audit, vec!["L1.R1", "L3.R6", "L3.R7", "L3.R8"]);
    }

    #[test]
    fn kappas() {
        let b = Rulebook::builtin();
        for r in b.rules() {
            let three = ["L1.R0", "L1.R3", "L1.R4", "L1.R5", "L0.R2"].contains(&r.paper_id.as_str());
            assert_eq!(r.kappa, if three { 3.0 } else { 2.0 }, "{}", r.paper_id);
        }
    }

    #[test]
    fn weights_form_simplices() {
        let b = Rulebook::builtin();
        for t in Tier::ALL {
            let s: f64 = b.tier_rules(t).iter().map(|&i| b.rules()[i].weight).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(b.lookup("L3.R8").unwrap().weight, 0.0);
        assert_eq!(b, Rulebook::builtin());
    }

    #[test]
    fn threshold_override() {
        let b = Rulebook::builtin();
        let mut o = Overrides::new();
        o.insert("L1.R2".into(), RuleOverride { threshold: Some(2.235), ..Default::default() });
        let nb = b.with_overrides(&o).unwrap();
        assert_eq!(nb.lookup("L1.R2").unwrap().threshold_value(), Some(2.235));
        for (a, c) in b.rules().iter().zip(nb.rules()) {
            if a.paper_id != "L1.R2" {
                assert_eq!(a, c);
            }
        }
    }

    #[test]
    fn unknown_override_is_rejected() {
        let mut o = Overrides::new();
        o.insert("L9.R9".into(), RuleOverride::default());
        assert!(matches!(Rulebook::builtin().with_overrides(&o), Err(Error::UnknownRule(_))));
    }

    #[test]
    fn weight_override_renormalizes() {
        let mut o = Overrides::new();
        o.insert("L3.R0".into(), RuleOverride { weight: Some(1.0), ..Default::default() });
        let b = Rulebook::builtin().with_overrides(&o).unwrap();
        let s: f64 = b.tier_rules(Tier::Comfort).iter().map(|&i| b.rules()[i].weight).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(b.lookup("L3.R0").unwrap().weight > b.lookup("L3.R1").unwrap().weight);

        let mut zero = Overrides::new();
        for id in ["L2.R0", "L2.R1"] {
            zero.insert(id.into(), RuleOverride { weight: Some(0.0), ..Default::default() });
        }
        assert!(matches!(Rulebook::builtin().with_overrides(&zero), Err(Error::Weights(_))));
    }

    #[test]
    fn alternate_set_applies() {
        let b = Rulebook::builtin().with_overrides(&table_alternate_overrides()).unwrap();
        assert_eq!(b.lookup("L3.R1").unwrap().threshold_value(), Some(4.0));
        assert_eq!(b.lookup("L0.R4").unwrap().threshold_value(), Some(1.0));
    }
}
