use proptest::prelude::*;
use strokeauth::scoring::{
    combined_score, fuse_disjoint, fuse_window, kinematic_from_distance, likelihood_from_distance,
    mean_kinematic_distance,
};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn likelihood_score_strictly_decreasing(d in -20.0f64..20.0, step in 1e-6f64..5.0, p in 1usize..8) {
        prop_assert!(likelihood_from_distance(d + step, p) < likelihood_from_distance(d, p));
    }

    #[test]
    fn kinematic_score_in_unit_interval(
        (train, sk) in (2usize..7).prop_flat_map(|n| (prop::collection::vec(simplex(n), 1..6), simplex(n))),
        q in 1usize..4,
    ) {
        let n = sk.len();
        let d = mean_kinematic_distance(&train, &sk);
        prop_assert!(d >= 0.0 && d <= 2f64.sqrt() + 1e-12);
        let s = kinematic_from_distance(d, q, n);
        prop_assert!(s > 0.0 && s <= 1.0);
        prop_assert!(s >= (-(2f64.sqrt()) / (q * n) as f64).exp() - 1e-15);
        prop_assert_eq!(s == 1.0, d == 0.0);
    }

    #[test]
    fn mean_distance_ignores_training_order(
        (mut train, sk) in (2usize..6).prop_flat_map(|n| (prop::collection::vec(simplex(n), 1..8), simplex(n))),
        rot in 0usize..8,
    ) {
        let a = mean_kinematic_distance(&train, &sk);
        let k = rot % train.len();
        train.rotate_left(k);
        train.reverse();
        let b = mean_kinematic_distance(&train, &sk);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn own_kinematics_contribute_zero(train in prop::collection::vec(simplex(4), 1..6), pick in 0usize..6) {
        let sk = train[pick % train.len()].clone();
        let d: f64 = mean_kinematic_distance(std::slice::from_ref(&sk), &sk);
        prop_assert_eq!(d, 0.0);
    }

    #[test]
    fn fused_scores_stay_in_window_range(scores in prop::collection::vec(0.0f64..3.0, 1..40), w in 1usize..12) {
        prop_assume!(w <= scores.len());
        let fused = fuse_window(&scores, w).unwrap();
        prop_assert_eq!(fused.len(), scores.len() - w + 1);
        for (j, f) in fused.iter().enumerate() {
            let win = &scores[j..j + w];
            let lo = win.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*f >= lo - 1e-12 && *f <= hi + 1e-12);
        }
        prop_assert_eq!(fuse_disjoint(&scores, w).unwrap().len(), scores.len() / w);
    }

    #[test]
    fn combined_is_the_mean(a in 0.0f64..10.0, b in 0.0f64..1.0) {
        prop_assert_eq!(combined_score(a, b), (a + b) / 2.0);
    }
}
