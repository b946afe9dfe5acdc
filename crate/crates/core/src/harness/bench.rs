//! Fixed-candidate-set comparison of selection strategies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Rulebook, Tier};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, bonferroni_alpha, bootstrap_ci, compliance_from_flags, mcnemar, selected_violations, summarize_accuracy,
    wilcoxon_signed_rank, AccuracyReport, AccuracySummary, BootstrapStatistic, ComplianceReport, Interval,
    McNemarResult, ScenarioViolations, WilcoxonResult, ALPHA,
};
use crate::proxy::{activation_mask, applicability, evaluate, ApplicabilityMask, ApplicabilityPolicy, EvalOptions, Evaluation};
use crate::scenario::{CandidateSet, Scenario, Trajectory};
use crate::select::{
    confidence_select, lexicographic_select, scalarized_select, weighted_sum_select, SelectionResult, SelectorConfig,
    Strategy,
};

type FlagColumn = Box<dyn Fn(&ScenarioViolations) -> bool>;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchItem {
    pub scenario: Scenario,
    pub candidates: CandidateSet,
    pub ground_truth: Option<Trajectory>,
    /// Oracle applicability labels, one per rule.
    pub labels: Option<Vec<bool>>,
    /// Predicted applicability scores, one per rule.
    pub scores: Option<Vec<f64>>,
}

impl BenchItem {
    pub fn new(scenario: Scenario, candidates: CandidateSet) -> Self {
        BenchItem { scenario, candidates, ground_truth: None, labels: None, scores: None }
    }
}

/// Where the applicability mask comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// A rule applies when its activation precondition holds for any candidate.
    #[default]
    Activation,
    Oracle,
    AlwaysOn,
    Hybrid,
    Thresholded,
}

impl MaskPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "activation" => Some(MaskPolicy::Activation),
            "oracle" => Some(MaskPolicy::Oracle),
            "always_on" | "always-on" => Some(MaskPolicy::AlwaysOn),
            "hybrid" => Some(MaskPolicy::Hybrid),
            "thresholded" => Some(MaskPolicy::Thresholded),
            _ => None,
        }
    }
}

pub fn build_mask(item: &BenchItem, policy: MaskPolicy, rulebook: &Rulebook, opts: &EvalOptions) -> Result<ApplicabilityMask> {
    let labels = item.labels.as_deref();
    let scores = item.scores.as_deref();
    match policy {
        MaskPolicy::Activation => Ok(activation_mask(&item.scenario, &item.candidates, rulebook, &opts.proxy)),
        MaskPolicy::Oracle => applicability(ApplicabilityPolicy::Oracle, labels, scores, rulebook),
        MaskPolicy::AlwaysOn => applicability(ApplicabilityPolicy::AlwaysOn, labels, scores, rulebook),
        MaskPolicy::Hybrid => applicability(ApplicabilityPolicy::Hybrid, labels, scores, rulebook),
        MaskPolicy::Thresholded => applicability(ApplicabilityPolicy::Thresholded, labels, scores, rulebook),
    }
}

/// Runs one strategy on an already evaluated candidate set.
pub fn run_strategy(
    strategy: Strategy,
    eval: &Evaluation,
    mask: &ApplicabilityMask,
    confidences: &[f64],
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    match strategy {
        Strategy::Lexicographic => lexicographic_select(&eval.tier_scores, confidences, cfg),
        Strategy::Scalarized => scalarized_select(&eval.tier_scores, confidences, cfg),
        Strategy::WeightedSum => weighted_sum_select(&eval.violations.normalized, &mask.binary, &eval.tier_scores, cfg),
        Strategy::ConfidenceOnly => confidence_select(&eval.tier_scores, confidences),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchOptions {
    pub strategies: Vec<Strategy>,
    pub mask: MaskPolicy,
    pub selector: SelectorConfig,
    pub eval: EvalOptions,
    pub miss_threshold: f64,
    /// Paired tests and bootstrap intervals; off skips the statistics.
    pub stats: bool,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            strategies: Strategy::ALL.to_vec(),
            mask: MaskPolicy::default(),
            selector: SelectorConfig::default(),
            eval: EvalOptions::default(),
            miss_threshold: crate::metrics::DEFAULT_MISS_THRESHOLD,
            stats: true,
            bootstrap_resamples: crate::metrics::stats::DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

/// One row of the selector comparison table. Rates are fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub strategy: Strategy,
    pub sel_ade: Option<f64>,
    pub sel_fde: Option<f64>,
    pub safety: f64,
    pub legal: f64,
    pub road: f64,
    pub comfort: f64,
    pub s_plus_l: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub compliance: ComplianceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracySummary>,
    /// 95% bootstrap intervals keyed by column name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub intervals: BTreeMap<String, Interval>,
    pub infeasible_rate: f64,
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: Strategy,
    pub b: Strategy,
    pub total: McNemarResult,
    pub s_plus_l: McNemarResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sel_ade: Option<WilcoxonResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scenarios: Vec<String>,
    pub mask: MaskPolicy,
    pub table: Vec<TableRow>,
    pub strategies: Vec<StrategyReport>,
    pub pairwise: Vec<PairwiseTest>,
    pub alpha: f64,
    /// Informational; not applied to the reported p-values.
    pub bonferroni_alpha: f64,
}

struct Outcome {
    flags: ScenarioViolations,
    infeasible: bool,
    selected: usize,
    accuracy: Option<AccuracyReport>,
}

pub fn run_benchmark(items: &[BenchItem], rulebook: &Rulebook, opts: &BenchOptions) -> Result<BenchmarkReport> {
    if items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if opts.strategies.is_empty() {
        return Err(Error::Config("at least one strategy is required".into()));
    }
    opts.selector.validate()?;
    if opts.strategies.contains(&Strategy::Scalarized) {
        opts.selector.check_base()?;
    }
    let mut per: Vec<Vec<Outcome>> = opts.strategies.iter().map(|_| Vec::with_capacity(items.len())).collect();
    for item in items {
        let mask = build_mask(item, opts.mask, rulebook, &opts.eval)?;
        let eval = evaluate(&item.candidates, &item.scenario, &mask, rulebook, &opts.eval)?;
        for (si, &strategy) in opts.strategies.iter().enumerate() {
            let sel = run_strategy(strategy, &eval, &mask, item.candidates.confidences(), &opts.selector)?;
            let flags = selected_violations(&sel, &eval.violations, rulebook)?;
            let acc = match &item.ground_truth {
                Some(gt) => Some(accuracy(&item.candidates, sel.selected, gt, opts.miss_threshold)?),
                None => None,
            };
            per[si].push(Outcome { flags, infeasible: sel.infeasible, selected: sel.selected, accuracy: acc });
        }
    }
    let with_gt = items.iter().all(|i| i.ground_truth.is_some());

    let mut reports = Vec::new();
    let mut table = Vec::new();
    for (si, &strategy) in opts.strategies.iter().enumerate() {
        let outs = &per[si];
        let flags: Vec<ScenarioViolations> = outs.iter().map(|o| o.flags.clone()).collect();
        let compliance = compliance_from_flags(&flags, rulebook)?;
        let accuracy = if with_gt {
            let accs: Vec<AccuracyReport> = outs.iter().filter_map(|o| o.accuracy.clone()).collect();
            Some(summarize_accuracy(&accs)?)
        } else {
            None
        };
        let mut intervals = BTreeMap::new();
        if opts.stats {
            let columns: [(&str, FlagColumn); 6] = [
                ("safety", Box::new(|f| f.tiers[0])),
                ("legal", Box::new(|f| f.tiers[1])),
                ("road", Box::new(|f| f.tiers[2])),
                ("comfort", Box::new(|f| f.tiers[3])),
                ("s_plus_l", Box::new(|f| f.safety_or_legal())),
                ("total", Box::new(|f| f.any())),
            ];
            for (ci, (name, pred)) in columns.iter().enumerate() {
                let v: Vec<f64> = flags.iter().map(|f| if pred(f) { 1.0 } else { 0.0 }).collect();
                let seed = opts.seed ^ ((si as u64) << 32) ^ ci as u64;
                intervals.insert(name.to_string(), bootstrap_ci(&v, BootstrapStatistic::Rate, opts.bootstrap_resamples, seed)?);
            }
        }
        table.push(TableRow {
            strategy,
            sel_ade: accuracy.as_ref().map(|a| a.sel_ade),
            sel_fde: accuracy.as_ref().map(|a| a.sel_fde),
            safety: compliance.tier_rate(Tier::Safety),
            legal: compliance.tier_rate(Tier::Legal),
            road: compliance.tier_rate(Tier::Road),
            comfort: compliance.tier_rate(Tier::Comfort),
            s_plus_l: compliance.s_plus_l,
            total: compliance.total,
        });
        reports.push(StrategyReport {
            strategy,
            compliance,
            accuracy,
            intervals,
            infeasible_rate: outs.iter().filter(|o| o.infeasible).count() as f64 / outs.len() as f64,
            selected: outs.iter().map(|o| o.selected).collect(),
        });
    }

    let mut pairwise = Vec::new();
    if opts.stats {
        for i in 0..opts.strategies.len() {
            for j in i + 1..opts.strategies.len() {
                let (a, b) = (&per[i], &per[j]);
                let total = mcnemar(
                    &a.iter().map(|o| o.flags.any()).collect::<Vec<_>>(),
                    &b.iter().map(|o| o.flags.any()).collect::<Vec<_>>(),
                )?;
                let s_plus_l = mcnemar(
                    &a.iter().map(|o| o.flags.safety_or_legal()).collect::<Vec<_>>(),
                    &b.iter().map(|o| o.flags.safety_or_legal()).collect::<Vec<_>>(),
                )?;
                let sel_ade = if with_gt {
                    let ade = |o: &Outcome| o.accuracy.as_ref().map_or(0.0, |r| r.sel_ade);
                    Some(wilcoxon_signed_rank(
                        &a.iter().map(ade).collect::<Vec<_>>(),
                        &b.iter().map(ade).collect::<Vec<_>>(),
                    )?)
                } else {
                    None
                };
                pairwise.push(PairwiseTest { a: opts.strategies[i], b: opts.strategies[j], total, s_plus_l, sel_ade });
            }
        }
    }
    let comparisons = pairwise.len();
    Ok(BenchmarkReport {
        scenarios: items.iter().map(|i| i.scenario.id().to_string()).collect(),
        mask: opts.mask,
        table,
        strategies: reports,
        pairwise,
        alpha: ALPHA,
        bonferroni_alpha: bonferroni_alpha(ALPHA, comparisons),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::harness::inject::{inject_adversarial, CorruptionSpec, InjectionFamily};
    use crate::harness::synth::{synthesize, SynthConfig};
    use crate::scenario::{constant_velocity, ScenarioBuilder, HORIZON};

    #[test]
    fn clean_scenarios_have_zero_rates() {
        let s = ScenarioBuilder::new("empty", 10.0).build().unwrap();
        let t = constant_velocity(Vec2::new(1.0, 0.0), 0.0, 10.0, HORIZON);
        let set = CandidateSet::new(vec![t.clone(), t], vec![0.4, 0.6]).unwrap();
        let items = vec![BenchItem::new(s, set)];
        let opts = BenchOptions { strategies: vec![Strategy::Lexicographic], bootstrap_resamples: 200, ..Default::default() };
        let r = run_benchmark(&items, &Rulebook::builtin(), &opts).unwrap();
        let row = &r.table[0];
        assert_eq!((row.safety, row.legal, row.road, row.comfort, row.s_plus_l, row.total), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn corrupted_sets_favor_rule_aware_selection() {
        let cfg = SynthConfig { seed: 3, count: 30, ..SynthConfig::default() };
        let items: Vec<BenchItem> = synthesize(&cfg)
            .unwrap()
            .into_iter()
            .map(|s| {
                let c = inject_adversarial(&s.scenario, &s.candidates, &CorruptionSpec::new(InjectionFamily::CollisionProne))
                    .unwrap();
                BenchItem::new(s.scenario, c)
            })
            .collect();
        let opts = BenchOptions {
            strategies: vec![Strategy::ConfidenceOnly, Strategy::Lexicographic],
            bootstrap_resamples: 200,
            ..Default::default()
        };
        let r = run_benchmark(&items, &Rulebook::builtin(), &opts).unwrap();
        let p = &r.pairwise[0];
        // b counts confidence-only violating where lexicographic complies
        assert!(p.s_plus_l.b > 0);
        assert_eq!(p.s_plus_l.c, 0);
        assert_eq!(r.table[0].safety, 1.0);
    }
}
