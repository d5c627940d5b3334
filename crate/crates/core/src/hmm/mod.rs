//! Left-right continuous HMMs with diagonal-covariance Gaussian-mixture
//! emissions.
//!
//! Every recursion runs in log space. Transitions are restricted to the
//! no-skip band: state `i` may only stay in `i` or advance to `i + 1`, and the
//! last state is absorbing.

#![allow(clippy::needless_range_loop)]

pub(crate) mod inference;
mod init;
mod io;
pub(crate) mod numeric;
mod train;

pub use inference::{
    log_forward, normalized_loglik, occupancy_from_path, state_occupancy, viterbi, viterbi_loglik,
    EmissionTable,
};
pub use init::init_model;
pub use io::{HmmDocument, HMM_VERSION};
pub use train::{baum_welch, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};

use crate::error::{Error, Result};

/// Lower bound applied to every diagonal variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;

/// Tolerance for "sums to one" checks on probability vectors.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A T x P matrix of feature samples, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    data: Vec<f64>,
    len: usize,
    n_features: usize,
}

impl ObservationSequence {
    /// Build from rows. All rows must have the same non-zero width and finite
    /// entries.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_features = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::InvalidDimensions("ragged observation rows".into()));
        }
        let len = rows.len();
        Self::from_flat(rows.into_iter().flatten().collect(), len, n_features)
    }

    pub fn from_flat(data: Vec<f64>, len: usize, n_features: usize) -> Result<Self> {
        if len == 0 || n_features == 0 {
            return Err(Error::InvalidDimensions(
                "observation sequence needs at least one sample and one feature".into(),
            ));
        }
        if data.len() != len * n_features {
            return Err(Error::InvalidDimensions(format!(
                "{} values cannot fill a {len} x {n_features} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimensions("non-finite observation".into()));
        }
        Ok(Self {
            data,
            len,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_features..(t + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_features)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The sequence followed by `other`.
    pub fn concat(&self, other: &ObservationSequence) -> Result<Self> {
        if other.n_features != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: other.n_features,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::from_flat(data, self.len + other.len, self.n_features)
    }
}

/// Left-right HMM with `n_mixtures` diagonal Gaussians per state.
///
/// Storage is flat and row-major: `trans[i * N + j]`, `mix_weights[i * Q + q]`,
/// `means[(i * Q + q) * P + f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    n_states: usize,
    n_mixtures: usize,
    n_features: usize,
    prior: Vec<f64>,
    trans: Vec<f64>,
    mix_weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl Hmm {
    /// Build a model from nested parameter arrays, checking every invariant.
    pub fn new(
        prior: Vec<f64>,
        trans: Vec<Vec<f64>>,
        mix_weights: Vec<Vec<f64>>,
        means: Vec<Vec<Vec<f64>>>,
        variances: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n_states = prior.len();
        let n_mixtures = mix_weights.first().map(Vec::len).unwrap_or(0);
        let n_features = means
            .first()
            .and_then(|m| m.first())
            .map(Vec::len)
            .unwrap_or(0);
        let shape_ok = trans.len() == n_states
            && trans.iter().all(|r| r.len() == n_states)
            && mix_weights.len() == n_states
            && mix_weights.iter().all(|r| r.len() == n_mixtures)
            && [&means, &variances].iter().all(|t| {
                t.len() == n_states
                    && t.iter()
                        .all(|s| s.len() == n_mixtures && s.iter().all(|c| c.len() == n_features))
            });
        if !shape_ok {
            return Err(Error::InvalidDimensions(
                "parameter arrays disagree on states / mixtures / features".into(),
            ));
        }
        let hmm = Self::from_flat_parts(
            n_states,
            n_mixtures,
            n_features,
            prior,
            trans.into_iter().flatten().collect(),
            mix_weights.into_iter().flatten().collect(),
            means.into_iter().flatten().flatten().collect(),
            variances.into_iter().flatten().flatten().collect(),
        )?;
        Ok(hmm)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_flat_parts(
        n_states: usize,
        n_mixtures: usize,
        n_features: usize,
        prior: Vec<f64>,
        trans: Vec<f64>,
        mix_weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let hmm = Self {
            n_states,
            n_mixtures,
            n_features,
            prior,
            trans,
            mix_weights,
            means,
            variances,
        };
        hmm.validate()?;
        Ok(hmm)
    }

    /// Check shape, stochasticity, band structure and the variance floor.
    pub fn validate(&self) -> Result<()> {
        let (n, q, p) = (self.n_states, self.n_mixtures, self.n_features);
        if n == 0 || q == 0 || p == 0 {
            return Err(Error::InvalidDimensions(
                "states, mixtures and features must be positive".into(),
            ));
        }
        if self.prior.len() != n
            || self.trans.len() != n * n
            || self.mix_weights.len() != n * q
            || self.means.len() != n * q * p
            || self.variances.len() != n * q * p
        {
            return Err(Error::InvalidDimensions("parameter array lengths".into()));
        }
        let all = self
            .prior
            .iter()
            .chain(&self.trans)
            .chain(&self.mix_weights)
            .chain(&self.means)
            .chain(&self.variances);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        check_distribution("prior", &self.prior)?;
        for i in 0..n {
            let row = &self.trans[i * n..(i + 1) * n];
            check_distribution("transition row", row)?;
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 && j != i && j != i + 1 {
                    return Err(Error::InvalidModel(format!(
                        "transition {i}->{j} leaves the left-right band"
                    )));
                }
            }
            check_distribution("mixture weights", &self.mix_weights[i * q..(i + 1) * q])?;
        }
        if self.trans[n * n - 1] != 1.0 {
            return Err(Error::InvalidModel("last state must be absorbing".into()));
        }
        if let Some(v) = self.variances.iter().find(|&&v| v < VARIANCE_FLOOR) {
            return Err(Error::InvalidModel(format!(
                "variance {v} below floor {VARIANCE_FLOOR}"
            )));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_mixtures(&self) -> usize {
        self.n_mixtures
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn trans(&self, from: usize, to: usize) -> f64 {
        self.trans[from * self.n_states + to]
    }

    pub fn trans_row(&self, from: usize) -> &[f64] {
        &self.trans[from * self.n_states..(from + 1) * self.n_states]
    }

    /// Probability of staying in `state`.
    pub fn self_loop(&self, state: usize) -> f64 {
        self.trans(state, state)
    }

    pub fn mix_weights(&self, state: usize) -> &[f64] {
        &self.mix_weights[state * self.n_mixtures..(state + 1) * self.n_mixtures]
    }

    pub fn mean(&self, state: usize, mixture: usize) -> &[f64] {
        let k = (state * self.n_mixtures + mixture) * self.n_features;
        &self.means[k..k + self.n_features]
    }

    pub fn variance(&self, state: usize, mixture: usize) -> &[f64] {
        let k = (state * self.n_mixtures + mixture) * self.n_features;
        &self.variances[k..k + self.n_features]
    }

    pub(crate) fn check_obs(&self, obs: &ObservationSequence) -> Result<()> {
        if obs.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: obs.n_features(),
            });
        }
        Ok(())
    }

    /// Copy of the model with every emission mean shifted by `offset`.
    pub fn with_shifted_means(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: offset.len(),
            });
        }
        let mut out = self.clone();
        for comp in out.means.chunks_exact_mut(self.n_features) {
            for (m, o) in comp.iter_mut().zip(offset) {
                *m += o;
            }
        }
        Ok(out)
    }
}

fn check_distribution(what: &str, probs: &[f64]) -> Result<()> {
    if probs.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has a negative entry")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {sum}")));
    }
    Ok(())
}
