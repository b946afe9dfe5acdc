//! A deliberately naive selector used to cross-check the production one.
//!
//! Membership in each filtered set is decided by pairwise comparison
//! against every earlier survivor instead of computing a tier minimum.

use std::collections::BTreeSet;

/// Index chosen by tolerance-based lexicographic selection.
pub fn brute_force_lexicographic(scores: &[[f64; 4]], confidences: &[f64], eps: &[f64; 4]) -> Option<usize> {
    let mut alive: BTreeSet<usize> = (0..scores.len()).collect();
    for tier in 0..4 {
        let next: BTreeSet<usize> = alive
            .iter()
            .copied()
            .filter(|&k| alive.iter().all(|&j| scores[k][tier] <= scores[j][tier] + eps[tier]))
            .collect();
        alive = next;
    }
    let mut best: Option<usize> = None;
    for &k in &alive {
        match best {
            Some(b) if confidences[k] <= confidences[b] => {}
            _ => best = Some(k),
        }
    }
    best
}

/// Survivors after the last tier, in index order.
pub fn brute_force_survivors(scores: &[[f64; 4]], eps: &[f64; 4]) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..scores.len()).collect();
    for tier in 0..4 {
        let snapshot = alive.clone();
        alive.retain(|&k| snapshot.iter().all(|&j| scores[k][tier] <= scores[j][tier] + eps[tier]));
    }
    alive
}
