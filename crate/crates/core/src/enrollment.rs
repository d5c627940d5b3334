//! Owner-only template training.
//!
//! The number of states and mixtures is picked by k-fold cross-validation
//! over the owner's strokes, restricted to configurations with
//! `states * mixtures <= floor(median stroke length / evidence_divisor)` so
//! every Gaussian sees enough samples. The winning configuration is then
//! retrained on all strokes and the template stores the reference
//! likelihood `l_avg` and the per-stroke kinematics of the training set.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmm::{
    baum_welch, init_model, normalized_loglik, state_occupancy, Hmm, HmmDocument,
    ObservationSequence, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL,
};
use crate::scoring::LikelihoodMode;
use crate::seed;
use crate::strokes::{
    classify_stroke, extract_observations, Normalizer, RawFeatures, Stroke, StrokeType,
    DEFAULT_DIRECTION_THRESHOLD_PX,
};

pub const TEMPLATE_VERSION: &str = "template-v1";

const FINAL_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollConfig {
    pub state_grid: Vec<usize>,
    pub mixture_grid: Vec<usize>,
    /// Minimum samples per Gaussian on the median training stroke.
    pub evidence_divisor: usize,
    pub folds: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub direction_threshold: f64,
    pub likelihood: LikelihoodMode,
    pub exec: Exec,
}

impl Default for EnrollConfig {
    fn default() -> Self {
        Self {
            state_grid: vec![2, 3, 4, 5, 6, 8],
            mixture_grid: vec![1, 2, 3],
            evidence_divisor: 3,
            folds: 5,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            direction_threshold: DEFAULT_DIRECTION_THRESHOLD_PX,
            likelihood: LikelihoodMode::Forward,
            exec: Exec::default(),
        }
    }
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub n_states: usize,
    pub n_mixtures: usize,
    /// False when the configuration violates the evidence constraint.
    pub feasible: bool,
    /// Mean held-out normalized log-likelihood per fold.
    pub fold_scores: Vec<f64>,
    pub mean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSelection {
    pub n_states: usize,
    pub n_mixtures: usize,
    pub max_product: usize,
    pub cells: Vec<CvCell>,
}

/// `floor(median length / divisor)`.
pub fn evidence_limit(lengths: &[usize], divisor: usize) -> usize {
    let mut l = lengths.to_vec();
    l.sort_unstable();
    let median = match l.len() {
        0 => 0.0,
        n if n % 2 == 1 => l[n / 2] as f64,
        n => (l[n / 2 - 1] + l[n / 2]) as f64 / 2.0,
    };
    (median / divisor.max(1) as f64).floor() as usize
}

/// Fold index for each of `n` sequences after a seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut fold = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold[idx] = pos % folds;
    }
    fold
}

fn train_config(
    training: &[&ObservationSequence],
    n_states: usize,
    n_mixtures: usize,
    config: &EnrollConfig,
    seed: u64,
) -> Result<Hmm> {
    let usable: Vec<ObservationSequence> = training
        .iter()
        .filter(|s| s.len() >= n_states)
        .map(|s| (*s).clone())
        .collect();
    if usable.is_empty() {
        let len = training.iter().map(|s| s.len()).max().unwrap_or(0);
        return Err(Error::SequenceTooShort { len, n_states });
    }
    let init = init_model(n_states, n_mixtures, &usable, seed)?;
    Ok(baum_welch(&init, &usable, config.max_iters, config.rel_tol)?.0)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Cross-validated choice of (states, mixtures).
///
/// Ties on the mean held-out score go to the smaller `states * mixtures`,
/// then to fewer states.
pub fn select_model(
    training: &[ObservationSequence],
    config: &EnrollConfig,
    seed: u64,
) -> Result<ModelSelection> {
    if training.len() < config.folds.max(2) {
        return Err(Error::TooFewSequences {
            found: training.len(),
            required: config.folds.max(2),
        });
    }
    if config.state_grid.is_empty() || config.mixture_grid.is_empty() {
        return Err(Error::InvalidDimensions(
            "empty state or mixture grid".into(),
        ));
    }
    let lengths: Vec<usize> = training.iter().map(ObservationSequence::len).collect();
    let max_product = evidence_limit(&lengths, config.evidence_divisor);
    let folds = fold_assignment(training.len(), config.folds, seed::derive(seed, &[0xf01d]));

    let grid: Vec<(usize, usize)> = config
        .state_grid
        .iter()
        .flat_map(|&n| config.mixture_grid.iter().map(move |&q| (n, q)))
        .collect();
    let jobs: Vec<(usize, usize, usize)> = grid
        .iter()
        .filter(|(n, q)| n * q <= max_product && *n > 0 && *q > 0)
        .flat_map(|&(n, q)| (0..config.folds).map(move |k| (n, q, k)))
        .collect();

    let outcomes: Vec<Result<f64>> = config.exec.map(&jobs, |&(n, q, k)| {
        let train: Vec<&ObservationSequence> = training
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f != k)
            .map(|(s, _)| s)
            .collect();
        let model = train_config(
            &train,
            n,
            q,
            config,
            seed::derive(seed, &[n as u64, q as u64, k as u64]),
        )?;
        let held_out = training
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f == k)
            .map(|(s, _)| normalized_loglik(&model, s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(mean(held_out.into_iter()))
    });

    let mut outcomes = outcomes.into_iter();
    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize, usize)> = None;
    for (n, q) in grid {
        let feasible = n * q <= max_product && n > 0 && q > 0;
        let mut cell = CvCell {
            n_states: n,
            n_mixtures: q,
            feasible,
            fold_scores: Vec::new(),
            mean: None,
            error: None,
        };
        if feasible {
            for _ in 0..config.folds {
                match outcomes.next().expect("one outcome per job") {
                    Ok(s) => cell.fold_scores.push(s),
                    Err(e) => cell.error = Some(e.to_string()),
                }
            }
            if cell.error.is_none() {
                let m = mean(cell.fold_scores.iter().copied());
                if m.is_finite() {
                    cell.mean = Some(m);
                    let better = match best {
                        None => true,
                        Some((bm, bn, bq)) => m > bm || (m == bm && (n * q, n) < (bn * bq, bn)),
                    };
                    if better {
                        best = Some((m, n, q));
                    }
                }
            }
        }
        cells.push(cell);
    }
    let (_, n_states, n_mixtures) = best.ok_or(Error::NoFeasibleConfiguration { max_product })?;
    Ok(ModelSelection {
        n_states,
        n_mixtures,
        max_product,
        cells,
    })
}

/// Enrollment template for one user and stroke type.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub user_id: u32,
    pub stroke_type: StrokeType,
    pub model: Hmm,
    pub normalizer: Normalizer,
    /// Mean normalized log-likelihood of the training strokes.
    pub l_avg: f64,
    /// State occupancy of every training stroke.
    pub train_kinematics: Vec<Vec<f64>>,
    pub m_train: usize,
    /// How `l_avg` (and test-stroke likelihoods) are computed.
    pub likelihood: LikelihoodMode,
}

impl UserModel {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let n = self.model.n_states();
        if self.train_kinematics.len() != self.m_train || self.m_train == 0 {
            return Err(Error::Format(
                "kinematics count disagrees with m_train".into(),
            ));
        }
        for sk in &self.train_kinematics {
            let sum: f64 = sk.iter().sum();
            if sk.len() != n || sk.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Format(
                    "training kinematics outside the simplex".into(),
                ));
            }
        }
        if !self.l_avg.is_finite() {
            return Err(Error::Format("l_avg is not finite".into()));
        }
        if self.normalizer.mean.len() != self.model.n_features()
            || self.normalizer.std.len() != self.model.n_features()
        {
            return Err(Error::Format(
                "normalizer width disagrees with model".into(),
            ));
        }
        Ok(())
    }

    pub fn to_document(&self) -> String {
        let doc = TemplateDocument {
            version: TEMPLATE_VERSION.into(),
            user_id: self.user_id,
            stroke_type: self.stroke_type,
            likelihood: self.likelihood,
            l_avg: self.l_avg,
            m_train: self.m_train,
            normalizer: self.normalizer.clone(),
            model: HmmDocument::from(&self.model),
            train_kinematics: self.train_kinematics.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("template serializes")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let doc: TemplateDocument = serde_json::from_str(text)?;
        if doc.version != TEMPLATE_VERSION {
            return Err(Error::Format(format!(
                "expected version {TEMPLATE_VERSION}, found {}",
                doc.version
            )));
        }
        let t = Self {
            user_id: doc.user_id,
            stroke_type: doc.stroke_type,
            model: doc.model.try_into()?,
            normalizer: doc.normalizer,
            l_avg: doc.l_avg,
            train_kinematics: doc.train_kinematics,
            m_train: doc.m_train,
            likelihood: doc.likelihood,
        };
        t.validate()?;
        Ok(t)
    }
}

/// `template-v1`: the `hmm-v1` object nested under `model`.
#[derive(Serialize, Deserialize)]
struct TemplateDocument {
    version: String,
    user_id: u32,
    stroke_type: StrokeType,
    likelihood: LikelihoodMode,
    l_avg: f64,
    m_train: usize,
    normalizer: Normalizer,
    model: HmmDocument,
    train_kinematics: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Enrollment {
    pub template: UserModel,
    pub selection: ModelSelection,
    pub loglik_trace: Vec<f64>,
}

/// Enroll from strokes, keeping only those of `stroke_type`.
pub fn enroll(
    user_id: u32,
    strokes: &[Stroke],
    stroke_type: StrokeType,
    config: &EnrollConfig,
    seed: u64,
) -> Result<Enrollment> {
    let raw = strokes
        .iter()
        .filter(|s| classify_stroke(s, config.direction_threshold) == stroke_type.direction())
        .map(extract_observations)
        .collect::<Result<Vec<_>>>()?;
    enroll_features(user_id, &raw, stroke_type, config, seed)
}

/// Enroll from already extracted raw feature matrices.
pub fn enroll_features(
    user_id: u32,
    raw: &[RawFeatures],
    stroke_type: StrokeType,
    config: &EnrollConfig,
    seed: u64,
) -> Result<Enrollment> {
    if raw.len() < config.folds.max(2) {
        return Err(Error::TooFewSequences {
            found: raw.len(),
            required: config.folds.max(2),
        });
    }
    let normalizer = Normalizer::fit(raw)?;
    let training = raw
        .iter()
        .map(|r| normalizer.apply(r))
        .collect::<Result<Vec<_>>>()?;
    let selection = select_model(&training, config, seed)?;
    let (n, q) = (selection.n_states, selection.n_mixtures);

    let usable: Vec<ObservationSequence> =
        training.iter().filter(|s| s.len() >= n).cloned().collect();
    let init = init_model(n, q, &usable, seed::derive(seed, &[FINAL_TAG]))?;
    let (model, loglik_trace) = baum_welch(&init, &usable, config.max_iters, config.rel_tol)?;

    let per_stroke = config
        .exec
        .map(&training, |obs| -> Result<(f64, Vec<f64>)> {
            Ok((
                config.likelihood.normalized(&model, obs)?,
                state_occupancy(&model, obs)?,
            ))
        });
    let per_stroke = per_stroke.into_iter().collect::<Result<Vec<_>>>()?;
    let l_avg = mean(per_stroke.iter().map(|(l, _)| *l));
    let train_kinematics: Vec<Vec<f64>> = per_stroke.into_iter().map(|(_, k)| k).collect();

    let template = UserModel {
        user_id,
        stroke_type,
        model,
        normalizer,
        l_avg,
        m_train: train_kinematics.len(),
        train_kinematics,
        likelihood: config.likelihood,
    };
    template
        .validate()
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    Ok(Enrollment {
        template,
        selection,
        loglik_trace,
    })
}
