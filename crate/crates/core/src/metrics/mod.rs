//! Accuracy and compliance metrics over selected trajectories.

pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Rulebook, Tier};
use crate::error::{Error, Result};
use crate::proxy::ViolationMatrix;
use crate::scenario::{CandidateSet, Trajectory};
use crate::select::SelectionResult;

pub use stats::{
    bonferroni_alpha, bootstrap_ci, ks_two_sample, mcnemar, spearman, wilcoxon_signed_rank, BootstrapStatistic,
    Interval, KsResult, McNemarMethod, McNemarResult, WilcoxonResult, ALPHA,
};

pub const DEFAULT_MISS_THRESHOLD: f64 = 2.0;

/// Displacement metrics for one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Per-candidate average displacement error.
    pub ade: Vec<f64>,
    /// Per-candidate final displacement error.
    pub fde: Vec<f64>,
    pub min_ade: f64,
    /// FDE of the ADE-best mode.
    pub min_fde: f64,
    /// Independent minimum over FDEs.
    pub min_fde_any: f64,
    pub sel_ade: f64,
    pub sel_fde: f64,
    /// 1.0 when `min_fde` exceeds the threshold, else 0.0.
    pub miss_rate: f64,
    pub miss_threshold: f64,
}

fn displacement(a: &Trajectory, b: &Trajectory) -> (f64, f64) {
    let d: Vec<f64> = a.positions().zip(b.positions()).map(|(p, q)| p.distance(q)).collect();
    let ade = d.iter().sum::<f64>() / d.len() as f64;
    (ade, *d.last().unwrap_or(&0.0))
}

pub fn accuracy(candidates: &CandidateSet, selected: usize, gt: &Trajectory, delta: f64) -> Result<AccuracyReport> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if selected >= candidates.len() {
        return Err(Error::DimensionMismatch(format!(
            "selected index {selected} out of range for {} candidates",
            candidates.len()
        )));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Config(format!("miss threshold must be finite and >= 0, got {delta}")));
    }
    let mut ade = Vec::with_capacity(candidates.len());
    let mut fde = Vec::with_capacity(candidates.len());
    for (i, t) in candidates.trajectories().iter().enumerate() {
        if t.len() != gt.len() {
            return Err(Error::DimensionMismatch(format!(
                "candidate {i} has {} steps, ground truth has {}",
                t.len(),
                gt.len()
            )));
        }
        let (a, f) = displacement(t, gt);
        ade.push(a);
        fde.push(f);
    }
    // first minimum wins so the ADE-best mode is well defined on ties
    let mut best = 0;
    for k in 1..ade.len() {
        if ade[k] < ade[best] {
            best = k;
        }
    }
    let min_fde = fde[best];
    Ok(AccuracyReport {
        min_ade: ade[best],
        min_fde,
        min_fde_any: fde.iter().copied().fold(f64::INFINITY, f64::min),
        sel_ade: ade[selected],
        sel_fde: fde[selected],
        miss_rate: if min_fde > delta { 1.0 } else { 0.0 },
        miss_threshold: delta,
        ade,
        fde,
    })
}

/// Means of the scalar accuracy fields over many scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub scenarios: usize,
    pub min_ade: f64,
    pub min_fde: f64,
    pub sel_ade: f64,
    pub sel_fde: f64,
    pub miss_rate: f64,
    pub miss_threshold: f64,
}

pub fn summarize_accuracy(reports: &[AccuracyReport]) -> Result<AccuracySummary> {
    if reports.is_empty() {
        return Err(Error::Stats("no accuracy reports to summarize".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&AccuracyReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(AccuracySummary {
        scenarios: reports.len(),
        min_ade: mean(|r| r.min_ade),
        min_fde: mean(|r| r.min_fde),
        sel_ade: mean(|r| r.sel_ade),
        sel_fde: mean(|r| r.sel_fde),
        miss_rate: mean(|r| r.miss_rate),
        miss_threshold: reports[0].miss_threshold,
    })
}

/// Which rules the selected candidate violates in one scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioViolations {
    pub tiers: [bool; 4],
    pub rules: Vec<bool>,
}

impl ScenarioViolations {
    pub fn any(&self) -> bool {
        self.tiers.iter().any(|&t| t)
    }

    pub fn safety_or_legal(&self) -> bool {
        self.tiers[0] || self.tiers[1]
    }
}

/// A rule counts as violated when its normalized severity is positive and it
/// was active for the selected candidate.
pub fn selected_violations(
    selection: &SelectionResult,
    matrix: &ViolationMatrix,
    rulebook: &Rulebook,
) -> Result<ScenarioViolations> {
    let k = selection.selected;
    let (row, act) = match (matrix.normalized.get(k), matrix.active.get(k)) {
        (Some(r), Some(a)) => (r, a),
        _ => {
            return Err(Error::DimensionMismatch(format!(
                "selected index {k} outside a matrix of {} rows",
                matrix.normalized.len()
            )))
        }
    };
    if row.len() != rulebook.len() || act.len() != rulebook.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix row has {} columns for {} rules",
            row.len(),
            rulebook.len()
        )));
    }
    let rules: Vec<bool> = row.iter().zip(act).map(|(&v, &a)| a && v > 0.0).collect();
    let mut tiers = [false; 4];
    for (ri, rule) in rulebook.rules().iter().enumerate() {
        tiers[rule.tier.index()] |= rules[ri];
    }
    Ok(ScenarioViolations { tiers, rules })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub scenarios: usize,
    /// Keyed by tier name, fraction of scenarios violating any rule in it.
    pub tier_rates: BTreeMap<String, f64>,
    pub s_plus_l: f64,
    pub total: f64,
    /// Keyed by rule id.
    pub rule_counts: BTreeMap<String, usize>,
}

impl ComplianceReport {
    pub fn tier_rate(&self, tier: Tier) -> f64 {
        self.tier_rates.get(tier.name()).copied().unwrap_or(0.0)
    }
}

pub fn compliance(results: &[(SelectionResult, ViolationMatrix)], rulebook: &Rulebook) -> Result<ComplianceReport> {
    let flags = results
        .iter()
        .map(|(s, m)| selected_violations(s, m, rulebook))
        .collect::<Result<Vec<_>>>()?;
    compliance_from_flags(&flags, rulebook)
}

pub fn compliance_from_flags(flags: &[ScenarioViolations], rulebook: &Rulebook) -> Result<ComplianceReport> {
    if flags.is_empty() {
        return Err(Error::Stats("compliance needs at least one scenario".into()));
    }
    let n = flags.len() as f64;
    let rate = |pred: &dyn Fn(&ScenarioViolations) -> bool| flags.iter().filter(|f| pred(f)).count() as f64 / n;
    let tier_rates = Tier::ALL
        .iter()
        .map(|&t| (t.name().to_string(), rate(&|f| f.tiers[t.index()])))
        .collect();
    let rule_counts = rulebook
        .rules()
        .iter()
        .enumerate()
        .map(|(ri, r)| (r.paper_id.clone(), flags.iter().filter(|f| f.rules.get(ri) == Some(&true)).count()))
        .collect();
    Ok(ComplianceReport {
        scenarios: flags.len(),
        tier_rates,
        s_plus_l: rate(&|f| f.safety_or_legal()),
        total: rate(&|f| f.any()),
        rule_counts,
    })
}
