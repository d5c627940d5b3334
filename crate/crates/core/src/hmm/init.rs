use rand::Rng;

use super::{Hmm, ObservationSequence, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::seed;

const KMEANS_ITERS: usize = 25;

/// Seeded starting point for Baum-Welch.
///
/// The prior and the two non-zero entries of every transition row are drawn
/// uniformly from (0, 1] and normalized. Emissions come from a uniform
/// temporal segmentation: state `s` receives samples `[s*T/N, (s+1)*T/N)` of
/// every sequence, and each state's pool is split into `n_mixtures` clusters
/// by k-means.
pub fn init_model(
    n_states: usize,
    n_mixtures: usize,
    training_set: &[ObservationSequence],
    seed: u64,
) -> Result<Hmm> {
    let first = training_set.first().ok_or(Error::EmptyTrainingSet)?;
    if n_states == 0 || n_mixtures == 0 {
        return Err(Error::InvalidDimensions(
            "states and mixtures must be positive".into(),
        ));
    }
    let p = first.n_features();
    if let Some(bad) = training_set.iter().find(|s| s.n_features() != p) {
        return Err(Error::InvalidDimensions(format!(
            "training sequences mix {p} and {} features",
            bad.n_features()
        )));
    }
    if let Some(short) = training_set.iter().find(|s| s.len() < n_states) {
        return Err(Error::SequenceTooShort {
            len: short.len(),
            n_states,
        });
    }

    let mut rng = seed::rng(seed);
    let mut draw = || 1.0 - rng.random::<f64>();

    let mut prior: Vec<f64> = (0..n_states).map(|_| draw()).collect();
    normalize(&mut prior);

    let mut trans = vec![0.0; n_states * n_states];
    for i in 0..n_states - 1 {
        let (stay, adv) = (draw(), draw());
        trans[i * n_states + i] = stay / (stay + adv);
        trans[i * n_states + i + 1] = adv / (stay + adv);
    }
    trans[n_states * n_states - 1] = 1.0;

    let mut pools: Vec<Vec<&[f64]>> = vec![Vec::new(); n_states];
    for seq in training_set {
        let len = seq.len();
        for s in 0..n_states {
            let (lo, hi) = (s * len / n_states, (s + 1) * len / n_states);
            pools[s].extend((lo..hi).map(|t| seq.row(t)));
        }
    }

    let mut weights = Vec::with_capacity(n_states * n_mixtures);
    let mut means = Vec::with_capacity(n_states * n_mixtures * p);
    let mut variances = Vec::with_capacity(n_states * n_mixtures * p);
    let mut rng = seed::rng(seed::derive(seed, &[0x6b6d]));
    for pool in &pools {
        for c in fit_clusters(pool, n_mixtures, p, &mut rng) {
            weights.push(c.weight);
            means.extend(c.mean);
            variances.extend(c.var);
        }
    }
    Hmm::from_flat_parts(
        n_states, n_mixtures, p, prior, trans, weights, means, variances,
    )
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

struct Cluster {
    weight: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn moments<'a>(points: impl Iterator<Item = &'a [f64]> + Clone, p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points.clone().count().max(1) as f64;
    let mut mean = vec![0.0; p];
    for x in points.clone() {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for x in points {
        var.iter_mut()
            .zip(x.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    var.iter_mut()
        .for_each(|s| *s = (*s / n).max(VARIANCE_FLOOR));
    (mean, var)
}

/// k-means++ seeding followed by Lloyd iterations. Empty clusters fall back
/// to the pool moments; every cluster keeps a non-zero weight.
fn fit_clusters(pool: &[&[f64]], k: usize, p: usize, rng: &mut impl Rng) -> Vec<Cluster> {
    let (pool_mean, pool_var) = moments(pool.iter().copied(), p);
    if k == 1 {
        return vec![Cluster {
            weight: 1.0,
            mean: pool_mean,
            var: pool_var,
        }];
    }

    let mut centroids: Vec<Vec<f64>> = vec![pool[rng.random_range(0..pool.len())].to_vec()];
    while centroids.len() < k {
        let d2: Vec<f64> = pool
            .iter()
            .map(|x| {
                centroids
                    .iter()
                    .map(|c| sq_dist(x, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    target -= d;
                    target < 0.0
                })
                .unwrap_or(pool.len() - 1)
        } else {
            rng.random_range(0..pool.len())
        };
        centroids.push(pool[pick].to_vec());
    }

    let mut assign = vec![0usize; pool.len()];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (a, x) in assign.iter_mut().zip(pool) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, cent) in centroids.iter().enumerate() {
                let d = sq_dist(x, cent);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            changed |= *a != best;
            *a = best;
        }
        for (c, cent) in centroids.iter_mut().enumerate() {
            let members = pool.iter().zip(&assign).filter(|(_, &a)| a == c);
            let n = members.clone().count();
            if n > 0 {
                cent.iter_mut().for_each(|v| *v = 0.0);
                for (x, _) in members {
                    cent.iter_mut().zip(x.iter()).for_each(|(m, v)| *m += v);
                }
                cent.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        if !changed {
            break;
        }
    }

    let mut clusters: Vec<Cluster> = (0..k)
        .map(|c| {
            let members: Vec<&[f64]> = pool
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == c)
                .map(|(x, _)| *x)
                .collect();
            if members.is_empty() {
                Cluster {
                    weight: 1.0,
                    mean: pool_mean.clone(),
                    var: pool_var.clone(),
                }
            } else {
                let (mean, var) = moments(members.iter().copied(), p);
                Cluster {
                    weight: members.len() as f64,
                    mean,
                    var,
                }
            }
        })
        .collect();
    let total: f64 = clusters.iter().map(|c| c.weight).sum();
    clusters.iter_mut().for_each(|c| c.weight /= total);
    clusters
}
