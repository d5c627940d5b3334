use super::inference::{backward_lattice, forward_lattice, log_band, EmissionTable};
use super::{Hmm, ObservationSequence, VARIANCE_FLOOR};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-4;

/// Components with less expected occupancy than this keep their previous
/// mean and variance.
const MIN_OCCUPANCY: f64 = 1e-10;

/// Sufficient statistics accumulated over a training set.
///
/// First and second moments are taken around the current component mean,
/// which keeps the variance update well conditioned.
struct Stats {
    loglik: f64,
    prior: Vec<f64>,
    stay: Vec<f64>,
    advance: Vec<f64>,
    occ: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Stats {
    fn zeros(model: &Hmm) -> Self {
        let (n, q, p) = (model.n_states(), model.n_mixtures(), model.n_features());
        Self {
            loglik: 0.0,
            prior: vec![0.0; n],
            stay: vec![0.0; n],
            advance: vec![0.0; n],
            occ: vec![0.0; n * q],
            s1: vec![0.0; n * q * p],
            s2: vec![0.0; n * q * p],
        }
    }

    fn accumulate(&mut self, model: &Hmm, seq: &ObservationSequence) -> Result<()> {
        let (n, q, p) = (model.n_states(), model.n_mixtures(), model.n_features());
        let em = EmissionTable::new(model, seq)?;
        let (alpha, total) = forward_lattice(model, &em);
        if !total.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "sequence log-likelihood is {total}"
            )));
        }
        let beta = backward_lattice(model, &em);
        let band = log_band(model);
        self.loglik += total;

        for t in 0..seq.len() {
            let x = seq.row(t);
            for i in 0..n {
                let post = alpha[t * n + i] + beta[t * n + i] - total;
                if t == 0 {
                    self.prior[i] += post.exp();
                }
                let log_b = em.state(t, i);
                if post == f64::NEG_INFINITY || log_b == f64::NEG_INFINITY {
                    continue;
                }
                for k in 0..q {
                    let g = (post + em.component(t, i, k) - log_b).exp();
                    if g == 0.0 {
                        continue;
                    }
                    let c = i * q + k;
                    self.occ[c] += g;
                    let mean = model.mean(i, k);
                    let (s1, s2) = (
                        &mut self.s1[c * p..(c + 1) * p],
                        &mut self.s2[c * p..(c + 1) * p],
                    );
                    for f in 0..p {
                        let d = x[f] - mean[f];
                        s1[f] += g * d;
                        s2[f] += g * d * d;
                    }
                }
            }
            if t + 1 < seq.len() {
                for i in 0..n {
                    let a = alpha[t * n + i] - total;
                    self.stay[i] +=
                        (a + band[i].0 + em.state(t + 1, i) + beta[(t + 1) * n + i]).exp();
                    if i + 1 < n {
                        self.advance[i] +=
                            (a + band[i].1 + em.state(t + 1, i + 1) + beta[(t + 1) * n + i + 1])
                                .exp();
                    }
                }
            }
        }
        Ok(())
    }

    fn reestimate(&self, model: &Hmm) -> Result<Hmm> {
        let (n, q, p) = (model.n_states(), model.n_mixtures(), model.n_features());

        let prior_sum: f64 = self.prior.iter().sum();
        let prior: Vec<f64> = self.prior.iter().map(|v| v / prior_sum).collect();

        let mut trans = vec![0.0; n * n];
        for i in 0..n - 1 {
            let den = self.stay[i] + self.advance[i];
            if den > 0.0 {
                trans[i * n + i] = self.stay[i] / den;
                trans[i * n + i + 1] = self.advance[i] / den;
            } else {
                trans[i * n + i] = model.trans(i, i);
                trans[i * n + i + 1] = model.trans(i, i + 1);
            }
        }
        trans[n * n - 1] = 1.0;

        let mut weights = Vec::with_capacity(n * q);
        let mut means = Vec::with_capacity(n * q * p);
        let mut variances = Vec::with_capacity(n * q * p);
        for i in 0..n {
            let occ = &self.occ[i * q..(i + 1) * q];
            let state_occ: f64 = occ.iter().sum();
            if state_occ > 0.0 {
                weights.extend(occ.iter().map(|o| o / state_occ));
            } else {
                weights.extend_from_slice(model.mix_weights(i));
            }
            for k in 0..q {
                let c = i * q + k;
                let (mean, var) = (model.mean(i, k), model.variance(i, k));
                if occ[k] > MIN_OCCUPANCY {
                    for f in 0..p {
                        let shift = self.s1[c * p + f] / occ[k];
                        means.push(mean[f] + shift);
                        let v = self.s2[c * p + f] / occ[k] - shift * shift;
                        variances.push(v.max(VARIANCE_FLOOR));
                    }
                } else {
                    means.extend_from_slice(mean);
                    variances.extend_from_slice(var);
                }
            }
        }

        Hmm::from_flat_parts(n, q, p, prior, trans, weights, means, variances)
            .map_err(|e| Error::NumericalFailure(format!("re-estimated model invalid: {e}")))
    }
}

fn expectations(model: &Hmm, training_set: &[ObservationSequence]) -> Result<Stats> {
    let mut stats = Stats::zeros(model);
    for seq in training_set {
        stats.accumulate(model, seq)?;
    }
    Ok(stats)
}

/// Baum-Welch re-estimation over a set of sequences.
///
/// Returns the trained model and the total log-likelihood trace:
/// `trace[0]` scores the input model and `trace[k]` the model after `k`
/// iterations. Training stops once the relative improvement drops below
/// `rel_tol` or after `max_iters` iterations. Transition entries outside the
/// left-right band stay exactly zero.
pub fn baum_welch(
    model: &Hmm,
    training_set: &[ObservationSequence],
    max_iters: usize,
    rel_tol: f64,
) -> Result<(Hmm, Vec<f64>)> {
    if training_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if max_iters == 0 || rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(Error::InvalidDimensions(
            "max_iters must be >= 1 and rel_tol > 0".into(),
        ));
    }
    for seq in training_set {
        model.check_obs(seq)?;
        if seq.len() < model.n_states() {
            return Err(Error::SequenceTooShort {
                len: seq.len(),
                n_states: model.n_states(),
            });
        }
    }

    let mut current = model.clone();
    let mut stats = expectations(&current, training_set)?;
    let mut trace = vec![stats.loglik];
    for _ in 0..max_iters {
        let next = stats.reestimate(&current)?;
        let next_stats = expectations(&next, training_set)?;
        let prev = stats.loglik;
        trace.push(next_stats.loglik);
        current = next;
        stats = next_stats;
        if (stats.loglik - prev) / prev.abs().max(f64::MIN_POSITIVE) < rel_tol {
            break;
        }
    }
    Ok((current, trace))
}
