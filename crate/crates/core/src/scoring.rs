//! Per-stroke similarity scores and multi-stroke fusion.
//!
//! A test stroke is scored against a template twice. The likelihood score
//! compares its normalized log-likelihood `L_t` with the enrollment average
//! `L_a`: `S_l = exp(-(L_a - L_t) / P)`. The kinematic score compares its
//! state occupancy with every training stroke's occupancy:
//! `S_k = exp(-mean_distance / (Q * N))`. The combined score is their mean.
//! `S_l` is deliberately not clamped and can exceed 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::enrollment::UserModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmm::inference::{forward_lattice, viterbi_from_table};
use crate::hmm::{
    normalized_loglik, occupancy_from_path, viterbi_loglik, EmissionTable, Hmm, ObservationSequence,
};
use crate::strokes::{classify_stroke, extract_observations, RawFeatures, Stroke, StrokeType};

/// Which log-likelihood feeds `L_t` and `L_a`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    /// Forward-algorithm likelihood.
    #[default]
    Forward,
    /// Joint density of the best Viterbi path.
    Viterbi,
}

impl LikelihoodMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LikelihoodMode::Forward => "forward",
            LikelihoodMode::Viterbi => "viterbi",
        }
    }

    /// Log-likelihood per sample under this mode.
    pub fn normalized(self, model: &Hmm, obs: &ObservationSequence) -> Result<f64> {
        match self {
            LikelihoodMode::Forward => normalized_loglik(model, obs),
            LikelihoodMode::Viterbi => viterbi_loglik(model, obs),
        }
    }
}

impl std::str::FromStr for LikelihoodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "viterbi" => Ok(Self::Viterbi),
            other => Err(Error::Format(format!("unknown likelihood mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub s_l: f64,
    pub s_k: f64,
    pub s_c: f64,
    pub d_l: f64,
    pub d_bar: f64,
}

pub fn likelihood_from_distance(d_l: f64, n_features: usize) -> f64 {
    (-d_l / n_features as f64).exp()
}

pub fn kinematic_from_distance(d_bar: f64, n_mixtures: usize, n_states: usize) -> f64 {
    (-d_bar / (n_mixtures * n_states) as f64).exp()
}

pub fn combined_score(s_l: f64, s_k: f64) -> f64 {
    (s_l + s_k) / 2.0
}

/// Mean Euclidean distance from `sk` to each training occupancy vector.
pub fn mean_kinematic_distance(training: &[Vec<f64>], sk: &[f64]) -> f64 {
    let total: f64 = training
        .iter()
        .map(|t| {
            t.iter()
                .zip(sk)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / training.len() as f64
}

fn check_template(template: &UserModel, obs: &ObservationSequence) -> Result<()> {
    let p = template.model.n_features();
    if obs.n_features() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: obs.n_features(),
        });
    }
    Ok(())
}

/// `(s_l, d_l)` for an already normalized observation sequence.
pub fn likelihood_score(template: &UserModel, obs: &ObservationSequence) -> Result<(f64, f64)> {
    check_template(template, obs)?;
    let l_t = template.likelihood.normalized(&template.model, obs)?;
    let d_l = template.l_avg - l_t;
    Ok((
        likelihood_from_distance(d_l, template.model.n_features()),
        d_l,
    ))
}

/// `(s_k, d_bar)` for an already normalized observation sequence.
pub fn kinematic_score(template: &UserModel, obs: &ObservationSequence) -> Result<(f64, f64)> {
    check_template(template, obs)?;
    let sk = crate::hmm::state_occupancy(&template.model, obs)?;
    Ok(kinematic_from_occupancy(template, &sk))
}

fn kinematic_from_occupancy(template: &UserModel, sk: &[f64]) -> (f64, f64) {
    let d_bar = mean_kinematic_distance(&template.train_kinematics, sk);
    let m = &template.model;
    (
        kinematic_from_distance(d_bar, m.n_mixtures(), m.n_states()),
        d_bar,
    )
}

/// Full score record for a normalized observation sequence. Emission
/// densities are evaluated once and shared by both recursions.
pub fn score_observation(template: &UserModel, obs: &ObservationSequence) -> Result<ScoreRecord> {
    check_template(template, obs)?;
    let model = &template.model;
    let em = EmissionTable::new(model, obs)?;
    let (path, vit) = viterbi_from_table(model, &em);
    let l_t = match template.likelihood {
        LikelihoodMode::Forward => forward_lattice(model, &em).1,
        LikelihoodMode::Viterbi => vit,
    } / obs.len() as f64;
    let d_l = template.l_avg - l_t;
    let s_l = likelihood_from_distance(d_l, model.n_features());
    let sk = occupancy_from_path(&path, model.n_states());
    let (s_k, d_bar) = kinematic_from_occupancy(template, &sk);
    Ok(ScoreRecord {
        s_l,
        s_k,
        s_c: combined_score(s_l, s_k),
        d_l,
        d_bar,
    })
}

/// Normalize raw features with the template's statistics, then score.
pub fn score_features(template: &UserModel, raw: &RawFeatures) -> Result<ScoreRecord> {
    score_observation(template, &template.normalizer.apply(raw)?)
}

pub fn score_stroke(template: &UserModel, stroke: &Stroke) -> Result<ScoreRecord> {
    score_features(template, &extract_observations(stroke)?)
}

/// Score many strokes against one template, preserving order.
pub fn score_batch(
    template: &UserModel,
    raw: &[RawFeatures],
    exec: Exec,
) -> Result<Vec<ScoreRecord>> {
    exec.map(raw, |r| score_features(template, r))
        .into_iter()
        .collect()
}

/// Sliding-window means with stride 1.
pub fn fuse_window(scores: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(scores, window)?;
    Ok(scores
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect())
}

/// Means of consecutive non-overlapping blocks; a trailing partial block is
/// dropped.
pub fn fuse_disjoint(scores: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(scores, window)?;
    Ok(scores
        .chunks_exact(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect())
}

fn check_window(scores: &[f64], window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::InvalidDimensions("window must be positive".into()));
    }
    if window > scores.len() {
        return Err(Error::WindowLargerThanSequence {
            window,
            len: scores.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Sliding,
    Disjoint,
}

impl FusionMode {
    pub fn fuse(self, scores: &[f64], window: usize) -> Result<Vec<f64>> {
        match self {
            FusionMode::Sliding => fuse_window(scores, window),
            FusionMode::Disjoint => fuse_disjoint(scores, window),
        }
    }
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sliding" => Ok(Self::Sliding),
            "disjoint" => Ok(Self::Disjoint),
            other => Err(Error::Format(format!("unknown fusion mode {other:?}"))),
        }
    }
}

/// One user's templates, used to score a mixed stream of strokes.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    pub horizontal: Option<UserModel>,
    pub vertical: Option<UserModel>,
}

impl TemplateSet {
    pub fn get(&self, t: StrokeType) -> Option<&UserModel> {
        match t {
            StrokeType::Horizontal => self.horizontal.as_ref(),
            StrokeType::Vertical => self.vertical.as_ref(),
        }
    }

    pub fn insert(&mut self, template: UserModel) {
        match template.stroke_type {
            StrokeType::Horizontal => self.horizontal = Some(template),
            StrokeType::Vertical => self.vertical = Some(template),
        }
    }

    /// Route a stroke to the template of its direction. Strokes with no
    /// direction, or no template for it, yield `None`.
    pub fn score_stroke(
        &self,
        stroke: &Stroke,
        direction_threshold: f64,
    ) -> Result<Option<(StrokeType, ScoreRecord)>> {
        let Some(t) = StrokeType::from_direction(classify_stroke(stroke, direction_threshold))
        else {
            return Ok(None);
        };
        match self.get(t) {
            Some(template) => Ok(Some((t, score_stroke(template, stroke)?))),
            None => Ok(None),
        }
    }
}

/// One line of the score dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub user_id: u32,
    pub claimed_id: u32,
    pub stroke_type: StrokeType,
    pub stroke_index: usize,
    pub s_l: f64,
    pub s_k: f64,
    pub s_c: f64,
}

pub fn write_score_csv<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_closed_forms() {
        assert_eq!(likelihood_from_distance(0.0, 5), 1.0);
        assert!((likelihood_from_distance(5.0, 5) - (-1.0f64).exp()).abs() < 1e-12);
        assert!(likelihood_from_distance(-1.0, 5) > 1.0);
        assert_eq!(kinematic_from_distance(0.0, 1, 2), 1.0);
        let d = mean_kinematic_distance(&[vec![1.0, 0.0]], &[0.0, 1.0]);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!((kinematic_from_distance(d, 1, 2) - 0.49307).abs() < 1e-5);
        assert_eq!(combined_score(0.4, 0.6), 0.5);
        assert_eq!(combined_score(1.0, 1.0), 1.0);
    }

    #[test]
    fn fusion_examples() {
        assert_eq!(fuse_window(&[0.5, 0.7], 2).unwrap(), vec![0.6]);
        assert_eq!(
            fuse_window(&[1.0, 0.0, 1.0, 0.0], 2).unwrap(),
            vec![0.5, 0.5, 0.5]
        );
        assert_eq!(
            fuse_disjoint(&[1.0, 0.0, 1.0, 0.0, 1.0], 2).unwrap(),
            vec![0.5, 0.5]
        );
        let s = [0.1, 0.9, 0.3];
        assert_eq!(fuse_window(&s, 1).unwrap(), s.to_vec());
        assert!(matches!(
            fuse_window(&s, 4),
            Err(Error::WindowLargerThanSequence { window: 4, len: 3 })
        ));
        assert!(fuse_window(&s, 0).is_err());
    }

    #[test]
    fn score_csv_has_header() {
        let mut buf = Vec::new();
        let row = ScoreRow {
            user_id: 1,
            claimed_id: 2,
            stroke_type: StrokeType::Vertical,
            stroke_index: 0,
            s_l: 0.5,
            s_k: 1.0,
            s_c: 0.75,
        };
        write_score_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "user_id,claimed_id,stroke_type,stroke_index,s_l,s_k,s_c\n1,2,vertical,0,0.5,1.0,0.75\n"
        );
    }
}
