mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strokeauth::hmm::{baum_welch, init_model, log_forward, state_occupancy, viterbi};
use strokeauth::{Hmm, ObservationSequence};

fn two_state_toy() -> Hmm {
    Hmm::new(
        vec![0.7, 0.3],
        vec![vec![0.6, 0.4], vec![0.0, 1.0]],
        vec![vec![1.0], vec![1.0]],
        vec![vec![vec![-1.0]], vec![vec![1.5]]],
        vec![vec![vec![0.8]], vec![vec![1.2]]],
    )
    .unwrap()
}

#[test]
fn toy_forward_sums_five_admissible_paths() {
    let m = two_state_toy();
    let obs = ObservationSequence::new(vec![vec![-1.2], vec![-0.4], vec![0.9], vec![1.7]]).unwrap();
    let admissible: Vec<_> = enumerate_paths(&m, &obs)
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .collect();
    assert_eq!(admissible.len(), 5);
    assert!(admissible.iter().all(|(path, _)| is_left_right(path)));
    let expected = admissible.iter().map(|(_, p)| p).sum::<f64>().ln();
    assert!((log_forward(&m, &obs).unwrap() - expected).abs() < 1e-12);

    let (path, lp) = viterbi(&m, &obs).unwrap();
    let (bpath, blp) = brute_viterbi(&m, &obs);
    assert_eq!(path, bpath);
    assert!((lp - blp).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forward_and_viterbi_match_enumeration(
        seed in any::<u64>(), n in 1usize..=3, q in 1usize..=2, p in 1usize..=3, t in 1usize..=6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, n, q, p);
        let obs = random_obs(&mut rng, t, p);
        let ll = log_forward(&m, &obs).unwrap();
        prop_assert!((ll - brute_log_forward(&m, &obs)).abs() < 1e-9);
        let (path, lp) = viterbi(&m, &obs).unwrap();
        let (bpath, blp) = brute_viterbi(&m, &obs);
        prop_assert!((lp - blp).abs() < 1e-9);
        prop_assert_eq!(&path, &bpath);
        prop_assert!(is_left_right(&path));
        prop_assert!(lp <= ll + 1e-9);
        let occ = state_occupancy(&m, &obs).unwrap();
        prop_assert!(occ.iter().all(|&v| v >= 0.0));
        prop_assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn em_is_monotone_and_keeps_invariants(seed in any::<u64>(), n in 1usize..=4, q in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_model(&mut rng, n, q, 2);
        let data: Vec<ObservationSequence> = (0..8)
            .map(|_| {
                let len = rand::Rng::random_range(&mut rng, n.max(2)..12);
                strokeauth::synth::sample_sequence(&truth, len, &mut rng).1
            })
            .collect();
        let init = init_model(n, q, &data, seed).unwrap();
        let (trained, trace) = baum_welch(&init, &data, 30, 1e-12).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "trace decreased: {:?}", w);
        }
        prop_assert!(trained.validate().is_ok());
        for i in 0..n {
            for j in 0..n {
                if j != i && j != i + 1 {
                    prop_assert_eq!(trained.trans(i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn deterministic_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = random_model(&mut rng, 3, 1, 2);
    let data: Vec<_> = (0..10)
        .map(|_| strokeauth::synth::sample_sequence(&truth, 15, &mut rng).1)
        .collect();
    let run = || {
        let init = init_model(3, 2, &data, 42).unwrap();
        baum_welch(&init, &data, 40, 1e-6).unwrap()
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(a.to_document(), b.to_document());
}
