//! `hmm-v1` text layout.
//!
//! A UTF-8 JSON object:
//!
//! ```text
//! {
//!   "version": "hmm-v1",
//!   "n_states": N, "n_mixtures": Q, "n_features": P,
//!   "prior": [N],
//!   "trans": [N][N],
//!   "mix_weights": [N][Q],
//!   "means": [N][Q][P],
//!   "variances": [N][Q][P]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! write/read cycle reproduces the model bit for bit.

use serde::{Deserialize, Serialize};

use super::Hmm;
use crate::error::{Error, Result};

pub const HMM_VERSION: &str = "hmm-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmDocument {
    pub version: String,
    pub n_states: usize,
    pub n_mixtures: usize,
    pub n_features: usize,
    pub prior: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub mix_weights: Vec<Vec<f64>>,
    pub means: Vec<Vec<Vec<f64>>>,
    pub variances: Vec<Vec<Vec<f64>>>,
}

impl From<&Hmm> for HmmDocument {
    fn from(m: &Hmm) -> Self {
        let (n, q) = (m.n_states(), m.n_mixtures());
        let per_component = |f: &dyn Fn(usize, usize) -> Vec<f64>| -> Vec<Vec<Vec<f64>>> {
            (0..n).map(|i| (0..q).map(|k| f(i, k)).collect()).collect()
        };
        Self {
            version: HMM_VERSION.to_string(),
            n_states: n,
            n_mixtures: q,
            n_features: m.n_features(),
            prior: m.prior().to_vec(),
            trans: (0..n).map(|i| m.trans_row(i).to_vec()).collect(),
            mix_weights: (0..n).map(|i| m.mix_weights(i).to_vec()).collect(),
            means: per_component(&|i, k| m.mean(i, k).to_vec()),
            variances: per_component(&|i, k| m.variance(i, k).to_vec()),
        }
    }
}

impl TryFrom<HmmDocument> for Hmm {
    type Error = Error;

    fn try_from(doc: HmmDocument) -> Result<Hmm> {
        if doc.version != HMM_VERSION {
            return Err(Error::Format(format!(
                "expected version {HMM_VERSION}, found {}",
                doc.version
            )));
        }
        let (n, q, p) = (doc.n_states, doc.n_mixtures, doc.n_features);
        let m = Hmm::new(
            doc.prior,
            doc.trans,
            doc.mix_weights,
            doc.means,
            doc.variances,
        )?;
        if (m.n_states(), m.n_mixtures(), m.n_features()) != (n, q, p) {
            return Err(Error::Format("declared sizes disagree with arrays".into()));
        }
        Ok(m)
    }
}

impl Hmm {
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(&HmmDocument::from(self)).expect("hmm document serializes")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let doc: HmmDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Hmm {
        Hmm::new(
            vec![0.1 + 0.2, 1.0 - (0.1 + 0.2)],
            vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![0.0, 1.0]],
            vec![vec![0.7, 0.3], vec![0.5, 0.5]],
            vec![
                vec![vec![std::f64::consts::PI, -1e-300], vec![1e300, 0.1]],
                vec![vec![-0.0, 2.5], vec![1.0 / 7.0, -3.3]],
            ],
            vec![
                vec![vec![1e-4, 2.0], vec![0.3, 0.123_456_789_012_345_67]],
                vec![vec![1.0, 1.0], vec![5.0, 1e-3]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let text = m.to_document();
        assert!(text.contains("\"version\": \"hmm-v1\""));
        let back = Hmm::from_document(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_document(), text);
    }

    #[test]
    fn wrong_version_rejected() {
        let text = model().to_document().replace("hmm-v1", "hmm-v0");
        assert!(matches!(Hmm::from_document(&text), Err(Error::Format(_))));
    }
}
