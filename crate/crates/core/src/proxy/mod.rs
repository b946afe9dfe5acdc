//! Rule activation, raw severities, normalization, applicability masks and
//! tier-score aggregation.

mod comfort;
mod context;
mod legal;
mod road;
mod safety;

use serde::{Deserialize, Serialize};

pub use comfort::{speed_consistency, SPEED_WINDOW};
pub use context::{CandidateContext, ProxyParams, ScenarioContext};
pub use legal::{crosswalk_yield_penalty, soft_step, stop_sign_penalty, wrong_way_penalty};

use crate::catalog::{RuleSpec, Rulebook, Tier};
use crate::error::{Error, Result};
use crate::scenario::{AgentType, CandidateSet, Scenario, Trajectory};

/// Per-tier score vector `[S0, S1, S2, S3]`.
pub type TierScores = [f64; 4];

/// Per-tier applicability thresholds for score binarization.
pub const TIER_THRESHOLDS: [f64; 4] = [0.05, 0.15, 0.30, 0.50];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub active: bool,
    pub reason: String,
}

impl Activation {
    fn on(reason: &str) -> Self {
        Activation { active: true, reason: reason.into() }
    }

    fn off(reason: &str) -> Self {
        Activation { active: false, reason: reason.into() }
    }
}

/// Front-bumper gap to the nearest vehicle ahead in the ego lane, along the
/// lane's arc length.
pub(crate) fn lead_gap(ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>, t: usize) -> Option<f64> {
    let (l, ego) = c.ego_projection(t)?;
    let hw = ctx.scenario.map().lanes[l].half_width;
    let mut best: Option<(f64, f64)> = None;
    for (j, a) in ctx.agents().iter().enumerate() {
        if a.agent_type != AgentType::Vehicle {
            continue;
        }
        let Some(p) = ctx.agent_lanes[j].get(t).and_then(|v| v.get(l)).copied().flatten() else { continue };
        if p.d_lat.abs() > hw || p.arc_length <= ego.arc_length {
            continue;
        }
        if best.is_none_or(|(s, _)| p.arc_length < s) {
            let d = (p.arc_length + a.length / 2.0) - (ego.arc_length + ctx.scenario.ego_length() / 2.0);
            best = Some((p.arc_length, d));
        }
    }
    best.map(|(_, d)| d)
}

fn activation_in(rule: &RuleSpec, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>) -> Activation {
    if !rule.has_proxy {
        return Activation::off("audit-only rule");
    }
    let id = rule.paper_id.as_str();
    match rule.tier {
        Tier::Safety => safety::activation(id, ctx, c),
        Tier::Legal => legal::activation(id, ctx, c),
        Tier::Road => road::activation(id, ctx, c),
        Tier::Comfort => comfort::activation(id, ctx, c),
    }
}

fn severity_in(rule: &RuleSpec, ctx: &ScenarioContext<'_>, c: &CandidateContext<'_>, params: &ProxyParams) -> f64 {
    let raw = match rule.tier {
        Tier::Safety => safety::severity(rule, ctx, c),
        Tier::Legal => legal::severity(rule, ctx, c, params),
        Tier::Road => road::severity(rule, ctx, c),
        Tier::Comfort => comfort::severity(rule, ctx, c),
    };
    sanitize(raw)
}

/// Maps NaN to 0 and infinities to the largest finite value.
fn sanitize(raw: f64) -> f64 {
    if raw.is_nan() {
        0.0
    } else {
        raw.clamp(0.0, f64::MAX)
    }
}

/// Whether `rule`'s geometric and kinematic prerequisites hold.
pub fn activation(rule: &RuleSpec, scenario: &Scenario, candidate: &Trajectory) -> bool {
    activation_detail(rule, scenario, candidate, &ProxyParams::default()).active
}

pub fn activation_detail(
    rule: &RuleSpec,
    scenario: &Scenario,
    candidate: &Trajectory,
    params: &ProxyParams,
) -> Activation {
    let ctx = ScenarioContext::new(scenario);
    let c = CandidateContext::new(&ctx, candidate, params);
    activation_in(rule, &ctx, &c)
}

/// Raw severity of an active proxied rule.
pub fn rule_severity(rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario, params: &ProxyParams) -> Result<f64> {
    let ctx = ScenarioContext::new(scenario);
    let c = CandidateContext::new(&ctx, candidate, params);
    let act = activation_in(rule, &ctx, &c);
    if !act.active {
        return Err(Error::RuleNotActive(format!("{}: {}", rule.paper_id, act.reason)));
    }
    Ok(severity_in(rule, &ctx, &c, params))
}

fn tier_severity(tier: Tier, rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario) -> Result<f64> {
    if rule.tier != tier {
        return Err(Error::Config(format!("{} is not a {} rule", rule.paper_id, tier.name())));
    }
    rule_severity(rule, candidate, scenario, &ProxyParams::default())
}

pub fn safety_severity(rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario) -> Result<f64> {
    tier_severity(Tier::Safety, rule, candidate, scenario)
}

pub fn legal_severity(rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario) -> Result<f64> {
    tier_severity(Tier::Legal, rule, candidate, scenario)
}

pub fn road_severity(rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario) -> Result<f64> {
    tier_severity(Tier::Road, rule, candidate, scenario)
}

pub fn comfort_severity(rule: &RuleSpec, candidate: &Trajectory, scenario: &Scenario) -> Result<f64> {
    tier_severity(Tier::Comfort, rule, candidate, scenario)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Exponential,
    LinearClamp,
}

/// Maps a raw severity into [0, 1].
pub fn normalize(raw: f64, rule: &RuleSpec, mode: Normalization) -> f64 {
    let raw = sanitize(raw);
    match mode {
        Normalization::Exponential => -(-rule.kappa * raw).exp_m1(),
        Normalization::LinearClamp => (raw / rule.linear_scale()).min(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Oracle,
    AlwaysOn,
    Hybrid,
    Thresholded,
    ActivationDerived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplicabilityPolicy {
    Oracle,
    AlwaysOn,
    Hybrid,
    Thresholded,
}

impl ApplicabilityPolicy {
    fn name(self) -> &'static str {
        match self {
            ApplicabilityPolicy::Oracle => "oracle",
            ApplicabilityPolicy::AlwaysOn => "always_on",
            ApplicabilityPolicy::Hybrid => "hybrid",
            ApplicabilityPolicy::Thresholded => "thresholded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplicabilityMask {
    pub binary: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    pub source: MaskSource,
}

impl ApplicabilityMask {
    pub fn all(rulebook: &Rulebook, on: bool) -> Self {
        ApplicabilityMask { binary: vec![on; rulebook.len()], scores: None, source: MaskSource::Oracle }
    }
}

/// Builds the mask for `policy`. Oracle needs `labels`; hybrid and
/// thresholded need `scores`, one per rule in catalog order.
pub fn applicability(
    policy: ApplicabilityPolicy,
    labels: Option<&[bool]>,
    scores: Option<&[f64]>,
    rulebook: &Rulebook,
) -> Result<ApplicabilityMask> {
    let r = rulebook.len();
    let need_scores = || -> Result<Vec<f64>> {
        let s = scores.ok_or(Error::MissingApplicability { policy: policy.name(), what: format!("{r} scores") })?;
        if s.len() != r {
            return Err(Error::DimensionMismatch(format!("{} applicability scores for {r} rules", s.len())));
        }
        if let Some(i) = s.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(format!("scores[{i}]"), "score must lie in [0, 1]"));
        }
        Ok(s.to_vec())
    };
    let thresholded = |s: &[f64], force_upper: bool| -> Vec<bool> {
        rulebook
            .rules()
            .iter()
            .zip(s)
            .map(|(rule, &v)| {
                let tier = rule.tier.index();
                (force_upper && tier <= 1) || v > TIER_THRESHOLDS[tier]
            })
            .collect()
    };
    Ok(match policy {
        ApplicabilityPolicy::Oracle => {
            let l = labels.ok_or(Error::MissingApplicability { policy: "oracle", what: format!("{r} labels") })?;
            if l.len() != r {
                return Err(Error::DimensionMismatch(format!("{} applicability labels for {r} rules", l.len())));
            }
            ApplicabilityMask { binary: l.to_vec(), scores: None, source: MaskSource::Oracle }
        }
        ApplicabilityPolicy::AlwaysOn => {
            ApplicabilityMask { binary: vec![true; r], scores: None, source: MaskSource::AlwaysOn }
        }
        ApplicabilityPolicy::Hybrid => {
            let s = need_scores()?;
            ApplicabilityMask { binary: thresholded(&s, true), scores: Some(s), source: MaskSource::Hybrid }
        }
        ApplicabilityPolicy::Thresholded => {
            let s = need_scores()?;
            ApplicabilityMask { binary: thresholded(&s, false), scores: Some(s), source: MaskSource::Thresholded }
        }
    })
}

/// A mask that marks a rule applicable when it activates for any candidate.
pub fn activation_mask(
    scenario: &Scenario,
    candidates: &CandidateSet,
    rulebook: &Rulebook,
    params: &ProxyParams,
) -> ApplicabilityMask {
    let ctx = ScenarioContext::new(scenario);
    let cands: Vec<CandidateContext<'_>> =
        candidates.trajectories().iter().map(|t| CandidateContext::new(&ctx, t, params)).collect();
    let binary = rulebook
        .rules()
        .iter()
        .map(|rule| cands.iter().any(|c| activation_in(rule, &ctx, c).active))
        .collect();
    ApplicabilityMask { binary, scores: None, source: MaskSource::ActivationDerived }
}

/// Raw and normalized severities, K rows by R columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationMatrix {
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    /// Activation AND applicability per (candidate, rule).
    pub active: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub rule_id: String,
    pub applicable: bool,
    pub has_proxy: bool,
    /// One entry per candidate.
    pub activation: Vec<Activation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub violations: ViolationMatrix,
    pub tier_scores: Vec<TierScores>,
    pub trace: Vec<RuleTrace>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub normalization: Normalization,
    pub proxy: ProxyParams,
}

/// Evaluates every (candidate, rule) cell and aggregates tier scores.
pub fn evaluate(
    candidates: &CandidateSet,
    scenario: &Scenario,
    mask: &ApplicabilityMask,
    rulebook: &Rulebook,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if mask.binary.len() != rulebook.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {} rules",
            mask.binary.len(),
            rulebook.len()
        )));
    }
    let ctx = ScenarioContext::new(scenario);
    let k = candidates.len();
    let r = rulebook.len();
    let mut raw = vec![vec![0.0; r]; k];
    let mut normalized = vec![vec![0.0; r]; k];
    let mut active = vec![vec![false; r]; k];
    let mut trace: Vec<RuleTrace> = rulebook
        .rules()
        .iter()
        .zip(&mask.binary)
        .map(|(rule, &applicable)| RuleTrace {
            rule_id: rule.paper_id.clone(),
            applicable,
            has_proxy: rule.has_proxy,
            activation: Vec::with_capacity(k),
        })
        .collect();
    let mut tier_scores = vec![[0.0; 4]; k];
    for (ki, traj) in candidates.trajectories().iter().enumerate() {
        let c = CandidateContext::new(&ctx, traj, &opts.proxy);
        for (ri, rule) in rulebook.rules().iter().enumerate() {
            let act = activation_in(rule, &ctx, &c);
            if act.active && mask.binary[ri] {
                let v = severity_in(rule, &ctx, &c, &opts.proxy);
                let vn = normalize(v, rule, opts.normalization);
                raw[ki][ri] = v;
                normalized[ki][ri] = vn;
                active[ki][ri] = true;
                tier_scores[ki][rule.tier.index()] += rule.weight * vn;
            }
            trace[ri].activation.push(act);
        }
        for s in &mut tier_scores[ki] {
            *s = s.clamp(0.0, 1.0);
        }
    }
    Ok(Evaluation { violations: ViolationMatrix { raw, normalized, active }, tier_scores, trace })
}

/// Tier scores from a normalized matrix, for callers that already hold
/// severities.
pub fn aggregate(normalized: &[Vec<f64>], active: &[Vec<bool>], mask: &[bool], rulebook: &Rulebook) -> Vec<TierScores> {
    normalized
        .iter()
        .zip(active)
        .map(|(row, act)| {
            let mut s = [0.0; 4];
            for (ri, rule) in rulebook.rules().iter().enumerate() {
                if mask[ri] && act[ri] && rule.has_proxy {
                    s[rule.tier.index()] += rule.weight * row[ri];
                }
            }
            s.map(|v| v.clamp(0.0, 1.0))
        })
        .collect()
}

#[cfg(test)]
mod tests;
