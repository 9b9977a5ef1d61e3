//! Error-rate metrics against an exhaustive integer-grid oracle, plus image
//! quality identities.

use otb_morph::attack::{AttackTrace, SessionRecord};
use otb_morph::eval::{asr, eer, far_frr, frr_at_far, MetricsReport};
use otb_morph::raster::{mse, ssim};
use otb_morph::Image;
use proptest::prelude::*;

mod common;

use common::oracles::{f, minimizing_rates, oracle_eer, oracle_frr_at, rates, same_cut};

fn scores() -> impl Strategy<Value = Vec<i32>> {
    // Narrow range so ties are common.
    prop::collection::vec(0i32..25, 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eer_matches_exhaustive_oracle(g in scores(), i in scores()) {
        let (rate, t) = eer(&f(&g), &f(&i)).unwrap();
        let (want_rate, want_t) = oracle_eer(&g, &i);
        prop_assert!((rate - want_rate).abs() < 1e-12, "rate {} vs {}", rate, want_rate);
        prop_assert!(same_cut(&g, &i, t, want_t), "t {} vs {}", t, want_t);
    }

    #[test]
    fn frr_at_far_matches_exhaustive_oracle(g in scores(), i in scores(), k in 0usize..3) {
        let target = [0.1, 0.01, 0.001][k];
        let (frr, t) = frr_at_far(&f(&g), &f(&i), target).unwrap();
        let (want_frr, want_t) = oracle_frr_at(&g, &i, target);
        prop_assert!((frr - want_frr).abs() < 1e-12);
        prop_assert!(same_cut(&g, &i, t, want_t), "t {} vs {}", t, want_t);
        prop_assert!(rates(&g, &i, t).0 <= target);
    }

    #[test]
    fn swapping_roles_with_flipped_inequality_keeps_eer(
        all in prop::collection::btree_set(0i32..1000, 2..60),
        mask in prop::collection::vec(any::<bool>(), 60),
    ) {
        let (mut g, mut i) = (Vec::new(), Vec::new());
        for (k, &s) in all.iter().enumerate() {
            if mask[k] { g.push(s) } else { i.push(s) }
        }
        prop_assume!(!g.is_empty() && !i.is_empty());
        // Negation turns "accept at or below" into "accept at or above".
        let neg = |v: &[i32]| v.iter().map(|x| -f64::from(*x)).collect::<Vec<_>>();
        let (a, _) = eer(&f(&g), &f(&i)).unwrap();
        let (b, _) = eer(&neg(&i), &neg(&g)).unwrap();
        // The tie-break toward smaller thresholds mirrors into a tie-break
        // toward larger ones, so the two agree whenever the best cuts agree.
        let best = minimizing_rates(&g, &i);
        prop_assert!(best.contains(&a) && best.contains(&b));
        if best.len() == 1 {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn rates_match_direct_counting(g in scores(), i in scores(), t in -1.0f64..26.0) {
        let (far, frr) = far_frr(&f(&g), &f(&i), t).unwrap();
        let (want_far, want_frr) = rates(&g, &i, t);
        prop_assert_eq!(far, want_far);
        prop_assert_eq!(frr, want_frr);
    }

    #[test]
    fn report_is_internally_consistent(g in scores(), i in scores()) {
        let report = MetricsReport::compute(&f(&g), &f(&i), &[]).unwrap();
        prop_assert!(report.check().is_ok());
        prop_assert!((0.0..=1.0).contains(&report.eer));
    }
}

#[test]
fn interleaved_hand_case() {
    let g = [0.1, 0.2, 0.3, 0.4];
    let i = [0.25, 0.35, 0.45, 0.55];
    let (rate, t) = eer(&g, &i).unwrap();
    assert_eq!(rate, 0.25);
    assert_eq!(far_frr(&g, &i, t).unwrap(), (0.25, 0.25));
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    assert_eq!(eer(&neg(&i), &neg(&g)).unwrap().0, 0.25);
}

#[test]
fn hand_computed_case() {
    let g = [0.1, 0.2, 0.3, 0.6];
    let i = [0.35, 0.5, 0.7, 0.9];
    let (rate, t) = eer(&g, &i).unwrap();
    assert_eq!(rate, 0.25);
    assert!((t - 0.425).abs() < 1e-12);
    // FAR <= 0.1 forces the cut below every impostor.
    let (frr, t) = frr_at_far(&g, &i, 0.1).unwrap();
    assert_eq!(frr, 0.25);
    assert!((t - 0.325).abs() < 1e-12);
}

#[test]
fn degenerate_inputs_are_errors() {
    assert!(eer(&[], &[1.0]).is_err());
    assert!(eer(&[1.0], &[f64::NAN]).is_err());
    assert!(frr_at_far(&[1.0], &[2.0], 0.0).is_err());
    assert!(frr_at_far(&[1.0], &[2.0], 1.0).is_err());
}

fn trace(scores: &[f64]) -> AttackTrace {
    AttackTrace {
        scenario: "t".into(),
        seed: 0,
        records: scores
            .iter()
            .enumerate()
            .map(|(k, &s)| SessionRecord {
                session: k as u64 + 1,
                score: s,
                best: s,
                threshold: 0.5,
                accepted: s <= 0.5,
                epoch: 0,
                genuine: None,
            })
            .collect(),
    }
}

#[test]
fn asr_counts_runs_reaching_the_threshold() {
    let traces = [trace(&[0.9, 0.6, 0.5]), trace(&[0.9, 0.51]), trace(&[0.2]), trace(&[0.7])];
    assert_eq!(asr(&traces, 0.5).unwrap(), 0.5);
    assert_eq!(asr(&traces, 0.1).unwrap(), 0.0);
    assert_eq!(asr(&traces, 1.0).unwrap(), 1.0);
    assert!(asr(&[], 0.5).is_err());
}

fn pattern(seed: u8) -> Image {
    Image::from_fn(40, 32, |x, y| ((x * 7 + y * 13) as u8).wrapping_mul(seed))
}

#[test]
fn quality_identities() {
    let a = pattern(3);
    let b = pattern(5);
    assert_eq!(mse(&a, &a).unwrap(), 0.0);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
    assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    assert!(ssim(&a, &b).unwrap() < 1.0);
}

#[test]
fn mse_matches_direct_sum() {
    let a = pattern(3);
    let b = pattern(11);
    let want = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    assert!((mse(&a, &b).unwrap() - want).abs() < 1e-9);
}

#[test]
fn quality_rejects_shape_mismatch() {
    assert!(mse(&pattern(1), &Image::filled(8, 8, 0)).is_err());
    assert!(ssim(&pattern(1), &Image::filled(8, 8, 0)).is_err());
}
