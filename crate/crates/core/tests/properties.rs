//! Invariants checked with generated inputs.

use proptest::prelude::*;

use rulerank::catalog::Rulebook;
use rulerank::harness::{inject_adversarial, synthesize_one, CorruptionSpec, InjectionFamily, SynthConfig};
use rulerank::metrics::accuracy;
use rulerank::metrics::stats::{
    bootstrap_ci, ks_two_sample, mcnemar_counts, spearman, wilcoxon_signed_rank, BootstrapStatistic,
};
use rulerank::proxy::{aggregate, normalize, Normalization, TierScores};
use rulerank::scenario::{load_document, save_document, CandidateSet, Trajectory, HORIZON};
use rulerank::select::{lexicographic_select, scalarized_select, SelectorConfig};

fn tier_rows(max_k: usize) -> impl Strategy<Value = Vec<TierScores>> {
    prop::collection::vec(prop::array::uniform4(0.0f64..=1.0), 1..=max_k)
}

fn simplex(w: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

/// Rows and positive weights of the same length.
fn instance() -> impl Strategy<Value = (Vec<TierScores>, Vec<f64>)> {
    tier_rows(8).prop_flat_map(|rows| {
        let k = rows.len();
        (Just(rows), prop::collection::vec(0.01f64..1.0, k))
    })
}

fn gap_ok(s: &[TierScores], eps: f64) -> bool {
    (0..s.len()).all(|i| {
        (i + 1..s.len()).all(|j| (0..4).find(|&t| s[i][t] != s[j][t]).is_none_or(|t| (s[i][t] - s[j][t]).abs() > eps))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_is_bounded_monotone_and_anchored(
        rule_ix in 0usize..28,
        kappa in 0.01f64..10.0,
        raw in 0.0f64..1e4,
        bump in 0.0f64..1e3,
    ) {
        let mut r = Rulebook::builtin().rules()[rule_ix].clone();
        r.kappa = kappa;
        for mode in [Normalization::Exponential, Normalization::LinearClamp] {
            let a = normalize(raw, &r, mode);
            let b = normalize(raw + bump, &r, mode);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a);
            prop_assert_eq!(normalize(0.0, &r, mode), 0.0);
        }
    }

    #[test]
    fn tier_scores_bounded_and_monotone_in_mask(
        k in 1usize..5,
        seed_rows in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 28), 5),
        active_bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 28), 5),
        mask in prop::collection::vec(any::<bool>(), 28),
        extra in prop::collection::vec(any::<bool>(), 28),
    ) {
        let rb = Rulebook::builtin();
        let normalized = &seed_rows[..k];
        let active = &active_bits[..k];
        let wider: Vec<bool> = mask.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
        let s = aggregate(normalized, active, &mask, &rb);
        let s2 = aggregate(normalized, active, &wider, &rb);
        for (a, b) in s.iter().zip(&s2) {
            for l in 0..4 {
                prop_assert!((0.0..=1.0).contains(&a[l]));
                prop_assert!(b[l] >= a[l]);
            }
        }
    }

    #[test]
    fn selection_depends_on_content_not_order((rows, w) in instance(), rot in 0usize..8) {
        let cfg = SelectorConfig::default();
        let p = simplex(&w);
        let base = lexicographic_select(&rows, &p, &cfg).unwrap().selected;
        let k = rows.len();
        let order: Vec<usize> = (0..k).map(|i| (i + rot) % k).rev().collect();
        let rows2: Vec<TierScores> = order.iter().map(|&i| rows[i]).collect();
        let p2: Vec<f64> = order.iter().map(|&i| p[i]).collect();
        let got = lexicographic_select(&rows2, &p2, &cfg).unwrap().selected;
        // generated weights are distinct with probability one, so ties cannot mask a difference
        prop_assert_eq!(rows2[got], rows[base]);
        prop_assert_eq!(p2[got], p[base]);
    }

    #[test]
    fn scalarized_matches_lexicographic_under_gap((rows, w) in instance()) {
        let cfg = SelectorConfig::default();
        prop_assume!(gap_ok(&rows, 1e-3));
        let p = simplex(&w);
        prop_assert_eq!(
            lexicographic_select(&rows, &p, &cfg).unwrap().selected,
            scalarized_select(&rows, &p, &cfg).unwrap().selected
        );
    }

    #[test]
    fn mcnemar_is_symmetric(b in 0usize..200, c in 0usize..200) {
        let x = mcnemar_counts(b, c).unwrap();
        let y = mcnemar_counts(c, b).unwrap();
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert_eq!(x.p_value, y.p_value);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
    }

    #[test]
    fn bootstrap_interval_inside_data_range(
        values in prop::collection::vec(0.0f64..100.0, 2..60),
        seed in any::<u64>(),
    ) {
        let ci = bootstrap_ci(&values, BootstrapStatistic::Mean, 500, seed).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(ci.lo <= ci.hi);
        prop_assert!(ci.lo >= lo - 1e-9 && ci.hi <= hi + 1e-9);
        prop_assert_eq!(bootstrap_ci(&values, BootstrapStatistic::Mean, 500, seed).unwrap(), ci);
    }

    #[test]
    fn rank_statistics_stay_in_range(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        let n = w.n as f64;
        prop_assert!((w.w_plus + w.w_minus - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&w.p_value));
        let ks = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks.d) && (0.0..=1.0).contains(&ks.p_value));
        if let Some(rho) = spearman(&a, &b).unwrap() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        }
    }

    #[test]
    fn accuracy_invariants(
        offsets in prop::collection::vec(0.0f64..5.0, 1..7),
        pick in 0usize..7,
        delta in 0.0f64..5.0,
    ) {
        let gt = Trajectory::from_rows(&(0..HORIZON).map(|t| [t as f64, 0.0, 0.0, 10.0]).collect::<Vec<_>>()).unwrap();
        let trajs: Vec<Trajectory> = offsets
            .iter()
            .map(|o| Trajectory::from_rows(&(0..HORIZON).map(|t| [t as f64, *o, 0.0, 10.0]).collect::<Vec<_>>()).unwrap())
            .collect();
        let k = trajs.len();
        let c = CandidateSet::new(trajs, vec![1.0 / k as f64; k]).unwrap();
        let sel = pick % k;
        let r = accuracy(&c, sel, &gt, delta).unwrap();
        prop_assert!(r.min_ade <= r.sel_ade && r.min_fde_any <= r.sel_fde);
        prop_assert!(r.min_fde_any <= r.min_fde);
        // constant lateral offsets make every displacement equal to the offset
        prop_assert!((r.sel_ade - offsets[sel]).abs() < 1e-9);
        prop_assert!(r.miss_rate == 0.0 || r.miss_rate == 1.0);
        prop_assert_eq!(r.miss_rate == 1.0, r.min_fde > delta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn documents_round_trip(seed in any::<u64>(), index in 0usize..100) {
        let s = synthesize_one(&SynthConfig { seed, ..SynthConfig::default() }, index).unwrap();
        let bytes = save_document(&s.document());
        let back = load_document(&bytes).unwrap();
        prop_assert_eq!(&back, &s.document());
        prop_assert_eq!(save_document(&back), bytes);
    }

    #[test]
    fn injection_keeps_existing_modes(seed in any::<u64>(), index in 0usize..100, margin in 0.001f64..0.5) {
        let s = synthesize_one(&SynthConfig { seed, ..SynthConfig::default() }, index).unwrap();
        let spec = CorruptionSpec { family: InjectionFamily::CollisionProne, confidence_margin: margin };
        let out = inject_adversarial(&s.scenario, &s.candidates, &spec).unwrap();
        let k = s.candidates.len();
        prop_assert_eq!(out.len(), k + 1);
        prop_assert_eq!(&out.trajectories()[..k], s.candidates.trajectories());
        let p = out.confidences();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let others = p[..k].iter().copied().fold(0.0, f64::max);
        prop_assert!(p[k] > others);
    }
}
