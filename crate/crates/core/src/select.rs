//! Selection strategies over a fixed candidate set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::TierScores;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    pub epsilons: [f64; 4],
    pub scalarization_base: u64,
    /// Per-rule weights for the weighted-sum baseline; `None` means all 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_sum_weights: Option<Vec<f64>>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig { epsilons: [1e-3; 4], scalarization_base: 1001, weighted_sum_weights: None }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {e}")));
        }
        if let Some(w) = &self.weighted_sum_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("weighted-sum weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    /// Smallest base that keeps tier priority for gaps of at least min(ε).
    pub fn min_base(&self) -> Result<u64> {
        let eps = self.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
        if !(eps > 0.0) {
            return Err(Error::Config("scalarization needs every epsilon > 0".into()));
        }
        Ok((1.0 / eps).ceil() as u64 + 1)
    }

    pub fn check_base(&self) -> Result<()> {
        let need = self.min_base()?;
        if self.scalarization_base < need {
            return Err(Error::Config(format!(
                "scalarization base {} is below ceil(1/eps) + 1 = {need}",
                self.scalarization_base
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Lexicographic,
    Scalarized,
    WeightedSum,
    ConfidenceOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::Lexicographic, Strategy::Scalarized, Strategy::WeightedSum, Strategy::ConfidenceOnly];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Lexicographic => "lexicographic",
            Strategy::Scalarized => "scalarized",
            Strategy::WeightedSum => "weighted_sum",
            Strategy::ConfidenceOnly => "confidence_only",
        }
    }

    /// Parses the long name or the short CLI alias.
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "lex" | "lexicographic" => Some(Strategy::Lexicographic),
            "scalar" | "scalarized" => Some(Strategy::Scalarized),
            "wsum" | "weighted_sum" => Some(Strategy::WeightedSum),
            "conf" | "confidence" | "confidence_only" => Some(Strategy::ConfidenceOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tiebreak {
    SingleSurvivor,
    Confidence,
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub selected: usize,
    pub tier_scores: TierScores,
    pub infeasible: bool,
    /// Candidates surviving each tier filter. Lexicographic only; other
    /// strategies report the full index set at every level.
    pub survivors: [Vec<usize>; 4],
    pub tiebreak: Tiebreak,
}

fn check_inputs(scores: &[TierScores], confidences: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if scores.len() != confidences.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} score vectors for {} confidences",
            scores.len(),
            confidences.len()
        )));
    }
    Ok(())
}

/// Highest confidence among `pool`; lowest index on an exact tie.
fn confidence_pick(pool: &[usize], confidences: &[f64]) -> (usize, Tiebreak) {
    if pool.len() == 1 {
        return (pool[0], Tiebreak::SingleSurvivor);
    }
    let best = pool.iter().map(|&k| confidences[k]).fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<usize> = pool.iter().copied().filter(|&k| confidences[k] == best).collect();
    if top.len() == 1 {
        (top[0], Tiebreak::Confidence)
    } else {
        (top[0], Tiebreak::LowestIndex)
    }
}

fn result(strategy: Strategy, k: usize, scores: &[TierScores], survivors: [Vec<usize>; 4], tiebreak: Tiebreak) -> SelectionResult {
    SelectionResult {
        strategy,
        selected: k,
        tier_scores: scores[k],
        infeasible: scores[k][0] > 0.0,
        survivors,
        tiebreak,
    }
}

fn everyone(k: usize) -> [Vec<usize>; 4] {
    let all: Vec<usize> = (0..k).collect();
    [all.clone(), all.clone(), all.clone(), all]
}

/// Tolerance-based lexicographic selection.
pub fn lexicographic_select(scores: &[TierScores], confidences: &[f64], cfg: &SelectorConfig) -> Result<SelectionResult> {
    check_inputs(scores, confidences)?;
    let mut pool: Vec<usize> = (0..scores.len()).collect();
    let mut survivors: [Vec<usize>; 4] = Default::default();
    for tier in 0..4 {
        let min = pool.iter().map(|&k| scores[k][tier]).fold(f64::INFINITY, f64::min);
        let bound = min + cfg.epsilons[tier];
        pool.retain(|&k| scores[k][tier] <= bound);
        survivors[tier] = pool.clone();
    }
    let (k, tiebreak) = confidence_pick(&pool, confidences);
    Ok(result(Strategy::Lexicographic, k, scores, survivors, tiebreak))
}

/// Base-B scalarization `Σ B^(4-ℓ) S_ℓ`, ties broken like the lexicographic
/// selector.
pub fn scalarized_select(scores: &[TierScores], confidences: &[f64], cfg: &SelectorConfig) -> Result<SelectionResult> {
    check_inputs(scores, confidences)?;
    cfg.check_base()?;
    let b = cfg.scalarization_base as f64;
    let weights = [b.powi(4), b.powi(3), b.powi(2), b];
    let totals: Vec<f64> = scores.iter().map(|s| s.iter().zip(&weights).map(|(v, w)| v * w).sum()).collect();
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let pool: Vec<usize> = (0..scores.len()).filter(|&k| totals[k] == min).collect();
    let (k, tiebreak) = confidence_pick(&pool, confidences);
    Ok(result(Strategy::Scalarized, k, scores, everyone(scores.len()), tiebreak))
}

/// Scalarized score of one vector.
pub fn scalarized_score(s: &TierScores, base: u64) -> f64 {
    let b = base as f64;
    s[0] * b.powi(4) + s[1] * b.powi(3) + s[2] * b.powi(2) + s[3] * b
}

/// `argmin_k Σ_r w_r â_r V̄_{r,k}`; lowest index on ties.
pub fn weighted_sum_select(
    normalized: &[Vec<f64>],
    mask: &[bool],
    scores: &[TierScores],
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    if normalized.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if normalized.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} severity rows for {} score vectors",
            normalized.len(),
            scores.len()
        )));
    }
    let r = mask.len();
    if let Some(row) = normalized.iter().find(|row| row.len() != r) {
        return Err(Error::DimensionMismatch(format!("severity row of {} for {r} rules", row.len())));
    }
    let weights = match &cfg.weighted_sum_weights {
        Some(w) if w.len() != r => {
            return Err(Error::DimensionMismatch(format!("{} weights for {r} rules", w.len())));
        }
        Some(w) => w.clone(),
        None => vec![1.0; r],
    };
    let totals: Vec<f64> = normalized
        .iter()
        .map(|row| (0..r).filter(|&i| mask[i]).map(|i| weights[i] * row[i]).sum())
        .collect();
    let mut best = 0;
    for k in 1..totals.len() {
        if totals[k] < totals[best] {
            best = k;
        }
    }
    let ties = totals.iter().filter(|&&v| v == totals[best]).count();
    let tiebreak = if ties > 1 { Tiebreak::LowestIndex } else { Tiebreak::SingleSurvivor };
    Ok(result(Strategy::WeightedSum, best, scores, everyone(scores.len()), tiebreak))
}

/// Highest confidence; lowest index on ties.
pub fn confidence_select(scores: &[TierScores], confidences: &[f64]) -> Result<SelectionResult> {
    check_inputs(scores, confidences)?;
    let pool: Vec<usize> = (0..confidences.len()).collect();
    let (k, tiebreak) = confidence_pick(&pool, confidences);
    Ok(result(Strategy::ConfidenceOnly, k, scores, everyone(scores.len()), tiebreak))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SelectorConfig {
        SelectorConfig::default()
    }

    #[test]
    fn all_clean_goes_to_confidence() {
        let r = lexicographic_select(&[[0.0; 4], [0.0; 4]], &[0.3, 0.7], &cfg()).unwrap();
        assert_eq!(r.selected, 1);
        assert_eq!(r.tiebreak, Tiebreak::Confidence);
        assert!(!r.infeasible);
    }

    #[test]
    fn safety_dominates() {
        let s = [[0.5, 0.0, 0.0, 0.0], [0.0, 0.9, 0.9, 0.9]];
        assert_eq!(lexicographic_select(&s, &[0.9, 0.1], &cfg()).unwrap().selected, 1);
    }

    #[test]
    fn within_tolerance_passes_to_next_tier() {
        let s = [[0.0106, 0.0, 0.0, 0.0], [0.0100, 0.5, 0.0, 0.0]];
        let r = lexicographic_select(&s, &[0.5, 0.5], &cfg()).unwrap();
        assert_eq!(r.survivors[0], vec![0, 1]);
        assert_eq!(r.survivors[1], vec![0]);
        assert_eq!(r.selected, 0);
        assert!(r.infeasible);
    }

    #[test]
    fn all_violating_is_infeasible() {
        let s = [[0.3, 0.0, 0.0, 0.0], [0.2, 0.0, 0.0, 0.0]];
        let r = lexicographic_select(&s, &[0.5, 0.5], &cfg()).unwrap();
        assert_eq!(r.selected, 1);
        assert!(r.infeasible);
        assert_eq!(r.tiebreak, Tiebreak::SingleSurvivor);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(lexicographic_select(&[], &[], &cfg()), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn scalarization_agrees_and_rejects_small_base() {
        let s = [[0.010, 0.0, 0.0, 0.0], [0.0, 0.9, 0.9, 0.9]];
        assert!(scalarized_score(&s[0], 1001) > scalarized_score(&s[1], 1001));
        assert!((scalarized_score(&s[0], 1001) - 1.004e10).abs() / 1.004e10 < 1e-3);
        assert_eq!(scalarized_select(&s, &[0.5, 0.5], &cfg()).unwrap().selected, 1);
        let r = scalarized_select(&[[0.0; 4], [0.0; 4]], &[0.4, 0.6], &cfg()).unwrap();
        assert_eq!((r.selected, r.tiebreak), (1, Tiebreak::Confidence));
        let small = SelectorConfig { scalarization_base: 100, ..cfg() };
        assert!(matches!(scalarized_select(&s, &[0.5, 0.5], &small), Err(Error::Config(_))));
        assert_eq!(cfg().min_base().unwrap(), 1001);
    }

    #[test]
    fn weighted_sum_lowest_index_and_dominance() {
        let z = vec![vec![0.0; 3]; 3];
        let r = weighted_sum_select(&z, &[true; 3], &[[0.0; 4]; 3], &cfg()).unwrap();
        assert_eq!((r.selected, r.tiebreak), (0, Tiebreak::LowestIndex));
        let m = vec![vec![0.5, 0.5, 0.5], vec![0.1, 0.1, 0.1]];
        assert_eq!(weighted_sum_select(&m, &[true; 3], &[[0.0; 4]; 2], &cfg()).unwrap().selected, 1);
    }

    #[test]
    fn confidence_only() {
        let s = [[0.0; 4]; 3];
        assert_eq!(confidence_select(&s, &[0.1, 0.6, 0.3]).unwrap().selected, 1);
        let r = confidence_select(&s[..2], &[0.5, 0.5]).unwrap();
        assert_eq!((r.selected, r.tiebreak), (0, Tiebreak::LowestIndex));
    }

    #[test]
    fn single_candidate() {
        let r = lexicographic_select(&[[0.2, 0.0, 0.0, 0.0]], &[1.0], &cfg()).unwrap();
        assert_eq!((r.selected, r.tiebreak, r.infeasible), (0, Tiebreak::SingleSurvivor, true));
    }
}
