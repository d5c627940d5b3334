use super::numeric::{ln_prob, log_add, log_sum_exp, DiagGaussian};
use super::{Hmm, ObservationSequence};
use crate::error::Result;

/// Per-timestep log emission densities for one sequence under one model.
///
/// `component(t, i, q)` is `ln w_iq + ln N(o_t; mu_iq, var_iq)` and
/// `state(t, i)` is its log-sum over `q`.
#[derive(Debug, Clone)]
pub struct EmissionTable {
    n_states: usize,
    n_mixtures: usize,
    log_comp: Vec<f64>,
    log_b: Vec<f64>,
}

impl EmissionTable {
    pub fn new(model: &Hmm, obs: &ObservationSequence) -> Result<Self> {
        model.check_obs(obs)?;
        let (n, q) = (model.n_states(), model.n_mixtures());
        let gaussians: Vec<(f64, DiagGaussian<'_>)> = (0..n)
            .flat_map(|i| (0..q).map(move |k| (i, k)))
            .map(|(i, k)| {
                (
                    ln_prob(model.mix_weights(i)[k]),
                    DiagGaussian::new(model.mean(i, k), model.variance(i, k)),
                )
            })
            .collect();
        let mut log_comp = Vec::with_capacity(obs.len() * n * q);
        let mut log_b = Vec::with_capacity(obs.len() * n);
        for x in obs.rows() {
            let start = log_comp.len();
            log_comp.extend(gaussians.iter().map(|(lw, g)| {
                if *lw == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    lw + g.log_pdf(x)
                }
            }));
            log_b.extend(log_comp[start..].chunks_exact(q).map(log_sum_exp));
        }
        Ok(Self {
            n_states: n,
            n_mixtures: q,
            log_comp,
            log_b,
        })
    }

    pub fn len(&self) -> usize {
        self.log_b.len() / self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.log_b.is_empty()
    }

    #[inline]
    pub fn state(&self, t: usize, i: usize) -> f64 {
        self.log_b[t * self.n_states + i]
    }

    #[inline]
    pub fn component(&self, t: usize, i: usize, q: usize) -> f64 {
        self.log_comp[(t * self.n_states + i) * self.n_mixtures + q]
    }
}

/// Log transition matrix restricted to the band: `(ln a_ii, ln a_i,i+1)`.
pub(crate) fn log_band(model: &Hmm) -> Vec<(f64, f64)> {
    let n = model.n_states();
    (0..n)
        .map(|i| {
            let adv = if i + 1 < n {
                model.trans(i, i + 1)
            } else {
                0.0
            };
            (ln_prob(model.trans(i, i)), ln_prob(adv))
        })
        .collect()
}

/// Forward lattice `alpha[t * N + i]` and the total log-likelihood.
pub(crate) fn forward_lattice(model: &Hmm, em: &EmissionTable) -> (Vec<f64>, f64) {
    let n = model.n_states();
    let len = em.len();
    let band = log_band(model);
    let mut alpha = vec![f64::NEG_INFINITY; len * n];
    for i in 0..n {
        alpha[i] = ln_prob(model.prior()[i]) + em.state(0, i);
    }
    for t in 1..len {
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        for j in 0..n {
            let mut acc = prev[j] + band[j].0;
            if j > 0 {
                acc = log_add(acc, prev[j - 1] + band[j - 1].1);
            }
            cur[j] = acc + em.state(t, j);
        }
    }
    let total = log_sum_exp(&alpha[(len - 1) * n..]);
    (alpha, total)
}

/// Backward lattice `beta[t * N + i]`.
pub(crate) fn backward_lattice(model: &Hmm, em: &EmissionTable) -> Vec<f64> {
    let n = model.n_states();
    let len = em.len();
    let band = log_band(model);
    let mut beta = vec![0.0; len * n];
    for t in (0..len - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * n);
        let cur = &mut cur[t * n..];
        for i in 0..n {
            let mut acc = band[i].0 + em.state(t + 1, i) + next[i];
            if i + 1 < n {
                acc = log_add(acc, band[i].1 + em.state(t + 1, i + 1) + next[i + 1]);
            }
            cur[i] = acc;
        }
    }
    beta
}

/// log P(obs | model) by the forward recursion.
pub fn log_forward(model: &Hmm, obs: &ObservationSequence) -> Result<f64> {
    let em = EmissionTable::new(model, obs)?;
    Ok(forward_lattice(model, &em).1)
}

/// Forward log-likelihood divided by the sequence length (nats per sample).
pub fn normalized_loglik(model: &Hmm, obs: &ObservationSequence) -> Result<f64> {
    Ok(log_forward(model, obs)? / obs.len() as f64)
}

pub(crate) fn viterbi_from_table(model: &Hmm, em: &EmissionTable) -> (Vec<usize>, f64) {
    let n = model.n_states();
    let len = em.len();
    let band = log_band(model);
    let mut delta = vec![f64::NEG_INFINITY; n];
    let mut back = vec![0usize; len * n];
    for (i, d) in delta.iter_mut().enumerate() {
        *d = ln_prob(model.prior()[i]) + em.state(0, i);
        back[i] = i;
    }
    let mut next = vec![f64::NEG_INFINITY; n];
    for t in 1..len {
        for j in 0..n {
            let stay = delta[j] + band[j].0;
            // Ties go to the lower state index, i.e. the advancing move.
            let (best, from) = if j > 0 {
                let adv = delta[j - 1] + band[j - 1].1;
                if stay > adv {
                    (stay, j)
                } else {
                    (adv, j - 1)
                }
            } else {
                (stay, j)
            };
            next[j] = best + em.state(t, j);
            back[t * n + j] = from;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for i in 1..n {
        if delta[i] > delta[last] {
            last = i;
        }
    }
    let log_prob = delta[last];
    let mut path = vec![0usize; len];
    path[len - 1] = last;
    for t in (1..len).rev() {
        path[t - 1] = back[t * n + path[t]];
    }
    (path, log_prob)
}

/// Most likely state path and its joint log density with `obs`.
pub fn viterbi(model: &Hmm, obs: &ObservationSequence) -> Result<(Vec<usize>, f64)> {
    let em = EmissionTable::new(model, obs)?;
    Ok(viterbi_from_table(model, &em))
}

/// Viterbi log density divided by the sequence length.
pub fn viterbi_loglik(model: &Hmm, obs: &ObservationSequence) -> Result<f64> {
    Ok(viterbi(model, obs)?.1 / obs.len() as f64)
}

/// Fraction of timesteps each state holds along a path.
pub fn occupancy_from_path(path: &[usize], n_states: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_states];
    for &s in path {
        counts[s] += 1;
    }
    let len = path.len() as f64;
    counts.into_iter().map(|c| c as f64 / len).collect()
}

/// Stroke kinematics: fraction of time the Viterbi path spends in each state.
pub fn state_occupancy(model: &Hmm, obs: &ObservationSequence) -> Result<Vec<f64>> {
    let (path, _) = viterbi(model, obs)?;
    Ok(occupancy_from_path(&path, model.n_states()))
}
