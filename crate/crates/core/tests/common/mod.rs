//! Test-only oracles. Nothing here calls into the library's inference code.
#![allow(dead_code)]

use rand::Rng;
use strokeauth::{Hmm, ObservationSequence};

/// Random left-right model with every prior entry and band transition
/// strictly positive.
pub fn random_model(rng: &mut impl Rng, n: usize, q: usize, p: usize) -> Hmm {
    let mut unit = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let mut prior: Vec<f64> = (0..n).map(|_| unit(0.05, 1.0)).collect();
    let s: f64 = prior.iter().sum();
    prior.iter_mut().for_each(|v| *v /= s);
    let trans = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            if i + 1 == n {
                row[i] = 1.0;
            } else {
                let stay = unit(0.05, 0.95);
                row[i] = stay;
                row[i + 1] = 1.0 - stay;
            }
            row
        })
        .collect();
    let weights = (0..n)
        .map(|_| {
            let mut w: Vec<f64> = (0..q).map(|_| unit(0.1, 1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            w
        })
        .collect();
    let means = (0..n)
        .map(|_| {
            (0..q)
                .map(|_| (0..p).map(|_| unit(-2.0, 2.0)).collect())
                .collect()
        })
        .collect();
    let vars = (0..n)
        .map(|_| {
            (0..q)
                .map(|_| (0..p).map(|_| unit(0.2, 2.0)).collect())
                .collect()
        })
        .collect();
    Hmm::new(prior, trans, weights, means, vars).unwrap()
}

pub fn random_obs(rng: &mut impl Rng, t: usize, p: usize) -> ObservationSequence {
    let rows = (0..t)
        .map(|_| (0..p).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    ObservationSequence::new(rows).unwrap()
}

/// Emission density evaluated directly in the linear domain.
pub fn density(m: &Hmm, state: usize, x: &[f64]) -> f64 {
    (0..m.n_mixtures())
        .map(|k| {
            let (mu, var) = (m.mean(state, k), m.variance(state, k));
            let prod: f64 = x
                .iter()
                .zip(mu.iter().zip(var))
                .map(|(x, (mu, v))| {
                    (-(x - mu) * (x - mu) / (2.0 * v)).exp()
                        / (2.0 * std::f64::consts::PI * v).sqrt()
                })
                .product();
            m.mix_weights(state)[k] * prod
        })
        .sum()
}

/// Every length-T state path, admissible or not, with its joint probability.
pub fn enumerate_paths(m: &Hmm, obs: &ObservationSequence) -> Vec<(Vec<usize>, f64)> {
    let (n, t) = (m.n_states(), obs.len());
    let dens: Vec<Vec<f64>> = (0..t)
        .map(|s| (0..n).map(|i| density(m, i, obs.row(s))).collect())
        .collect();
    let total = n.pow(t as u32);
    (0..total)
        .map(|mut code| {
            let mut path = vec![0; t];
            for slot in path.iter_mut().rev() {
                *slot = code % n;
                code /= n;
            }
            let mut p = m.prior()[path[0]] * dens[0][path[0]];
            for s in 1..t {
                p *= m.trans(path[s - 1], path[s]) * dens[s][path[s]];
            }
            (path, p)
        })
        .collect()
}

pub fn brute_log_forward(m: &Hmm, obs: &ObservationSequence) -> f64 {
    enumerate_paths(m, obs)
        .iter()
        .map(|(_, p)| p)
        .sum::<f64>()
        .ln()
}

/// Most probable path; ties resolved toward the lexicographically smallest.
pub fn brute_viterbi(m: &Hmm, obs: &ObservationSequence) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (path, p) in enumerate_paths(m, obs) {
        if best.as_ref().is_none_or(|(_, b)| p > *b) {
            best = Some((path, p));
        }
    }
    let (path, p) = best.unwrap();
    (path, p.ln())
}

/// True when `path` only stays or advances by one.
pub fn is_left_right(path: &[usize]) -> bool {
    path.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1)
}

/// Reference FAR/FRR/EER by direct counting at every candidate threshold.
pub struct BruteRates {
    pub eer: f64,
    pub far_at_zero_frr: f64,
    pub frr_at_zero_far: f64,
}

pub fn brute_rates(genuine: &[f64], impostor: &[f64]) -> BruteRates {
    let mut taus: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    taus.push(f64::NEG_INFINITY);
    taus.push(f64::INFINITY);
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    let far = |t: f64| impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
    let frr = |t: f64| genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
    let mut eer = f64::NAN;
    for k in 0..taus.len() {
        let (fa, fr) = (far(taus[k]), frr(taus[k]));
        if fa - fr <= 0.0 {
            if fa == fr || k == 0 {
                eer = fa;
            } else {
                let (pa, pr) = (far(taus[k - 1]), frr(taus[k - 1]));
                // Intersect the two line segments.
                let lambda = (pa - pr) / ((pa - pr) - (fa - fr));
                eer = pa + lambda * (fa - pa);
            }
            break;
        }
    }
    let far_at_zero_frr = taus
        .iter()
        .filter(|&&t| frr(t) == 0.0)
        .map(|&t| far(t))
        .fold(f64::INFINITY, f64::min);
    let frr_at_zero_far = taus
        .iter()
        .filter(|&&t| far(t) == 0.0)
        .map(|&t| frr(t))
        .fold(f64::INFINITY, f64::min);
    BruteRates {
        eer,
        far_at_zero_frr,
        frr_at_zero_far,
    }
}

/// Known 3-state, 1-mixture generator used by the recovery and selection
/// checks. Dwell times of about 5 and 3.3 samples, then absorbing.
pub const GENERATOR_SELF_LOOPS: [f64; 3] = [0.8, 0.7, 1.0];

pub fn three_state_generator() -> Hmm {
    let a = GENERATOR_SELF_LOOPS;
    Hmm::new(
        vec![1.0, 0.0, 0.0],
        vec![
            vec![a[0], 1.0 - a[0], 0.0],
            vec![0.0, a[1], 1.0 - a[1]],
            vec![0.0, 0.0, 1.0],
        ],
        vec![vec![1.0]; 3],
        vec![
            vec![vec![-2.0, 0.0]],
            vec![vec![0.0, 2.0]],
            vec![vec![2.0, 0.0]],
        ],
        vec![vec![vec![0.3, 0.3]]; 3],
    )
    .unwrap()
}

pub fn sample_set(model: &Hmm, n: usize, len: usize, seed: u64) -> Vec<ObservationSequence> {
    let mut rng = strokeauth::seed::rng(seed);
    (0..n)
        .map(|_| strokeauth::synth::sample_sequence(model, len, &mut rng).1)
        .collect()
}
