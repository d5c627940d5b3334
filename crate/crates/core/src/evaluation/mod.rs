//! Genuine / impostor evaluation: scenario splits, score tables, FAR/FRR
//! sweeps and per-user EER reports aggregated by median.

mod rates;
mod split;

use std::io::Write;

use serde::Serialize;

pub use rates::{compute_rates, Curve, RateSummary};
pub use split::{
    build_split, short_term_train_count, Dataset, Exclusion, LabeledStroke, Scenario,
    ScenarioSplit, UserData, UserSplit, DAY_GAP_MS,
};

use crate::enrollment::{enroll_features, EnrollConfig, UserModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::scoring::{score_features, FusionMode, LikelihoodMode, ScoreRecord};
use crate::seed;
use crate::strokes::{RawFeatures, StrokeType};

pub const DEFAULT_WINDOWS: [usize; 10] = [1, 3, 5, 7, 9, 11, 13, 15, 17, 19];

/// Scores of every test stroke against one claimed user's template.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub claimed_id: u32,
    pub stroke_type: StrokeType,
    pub genuine: Vec<ScoreRecord>,
    /// Per impostor user, in chronological stroke order.
    pub impostors: Vec<(u32, Vec<ScoreRecord>)>,
}

impl ScoreTable {
    /// Fused genuine and impostor scores. Windows never span two users;
    /// impostors with fewer strokes than `window` contribute nothing.
    pub fn fused(&self, window: usize, mode: FusionMode) -> Result<(Vec<f64>, Vec<f64>)> {
        let s_c = |r: &[ScoreRecord]| r.iter().map(|s| s.s_c).collect::<Vec<_>>();
        let genuine = mode.fuse(&s_c(&self.genuine), window)?;
        let mut impostor = Vec::new();
        for (_, scores) in &self.impostors {
            match mode.fuse(&s_c(scores), window) {
                Ok(f) => impostor.extend(f),
                Err(Error::WindowLargerThanSequence { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if impostor.is_empty() {
            let len = self
                .impostors
                .iter()
                .map(|(_, s)| s.len())
                .max()
                .unwrap_or(0);
            return Err(Error::WindowLargerThanSequence { window, len });
        }
        Ok((genuine, impostor))
    }
}

/// Score the test strokes of every user against `template`.
pub fn score_table(template: &UserModel, test: &[(u32, Vec<RawFeatures>)]) -> Result<ScoreTable> {
    let score_all = |raw: &[RawFeatures]| -> Result<Vec<ScoreRecord>> {
        raw.iter().map(|r| score_features(template, r)).collect()
    };
    let mut genuine = Vec::new();
    let mut impostors = Vec::new();
    for (user_id, raw) in test {
        if *user_id == template.user_id {
            genuine = score_all(raw)?;
        } else {
            impostors.push((*user_id, score_all(raw)?));
        }
    }
    Ok(ScoreTable {
        claimed_id: template.user_id,
        stroke_type: template.stroke_type,
        genuine,
        impostors,
    })
}

/// Genuine and impostor score tables, one per template. Every other user's
/// test strokes act as impostor attempts.
pub fn impostor_scores(
    templates: &[UserModel],
    test: &[(u32, Vec<RawFeatures>)],
    exec: Exec,
) -> Result<Vec<ScoreTable>> {
    let mut ids: Vec<u32> = test.iter().map(|(u, _)| *u).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::SingleUserDataset(ids.len()));
    }
    exec.map(templates, |t| score_table(t, test))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub enroll: EnrollConfig,
    pub windows: Vec<usize>,
    pub fusion: FusionMode,
    pub stroke_types: Vec<StrokeType>,
    /// Keep full FAR/FRR curves in the report (needed to write curve files).
    pub keep_curves: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            enroll: EnrollConfig::default(),
            windows: DEFAULT_WINDOWS.to_vec(),
            fusion: FusionMode::Sliding,
            stroke_types: StrokeType::ALL.to_vec(),
            keep_curves: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UserWindow {
    pub window: usize,
    pub rates: Option<RateSummary>,
    pub skipped: Option<String>,
    #[serde(skip)]
    pub curve: Option<Curve>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserReport {
    pub user_id: u32,
    pub n_states: usize,
    pub n_mixtures: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub windows: Vec<UserWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub window: usize,
    pub n_users: usize,
    pub median_eer: Option<f64>,
    pub median_far_at_zero_frr: Option<f64>,
    pub median_frr_at_zero_far: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeReport {
    pub stroke_type: StrokeType,
    pub error: Option<String>,
    /// Users dropped from this stroke type, e.g. after a failed enrollment.
    pub failures: Vec<Exclusion>,
    pub summary: Vec<WindowSummary>,
    pub users: Vec<UserReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub fusion: FusionMode,
    pub likelihood: LikelihoodMode,
    pub windows: Vec<usize>,
    pub excluded: Vec<Exclusion>,
    pub stroke_types: Vec<TypeReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self, t: StrokeType, window: usize) -> Option<&WindowSummary> {
        self.stroke_types
            .iter()
            .find(|r| r.stroke_type == t)?
            .summary
            .iter()
            .find(|s| s.window == window)
    }

    pub fn median_eer(&self, t: StrokeType, window: usize) -> Option<f64> {
        self.summary(t, window)?.median_eer
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Curve file rows: `threshold,far,frr`, infinities written as `-inf` / `inf`.
pub fn write_curve_csv<W: Write>(curve: &Curve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "far", "frr"])?;
    for ((t, fa), fr) in curve.thresholds.iter().zip(&curve.far).zip(&curve.frr) {
        w.write_record([t.to_string(), fa.to_string(), fr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn raws(user: &UserData, idx: &[usize], t: StrokeType) -> Vec<RawFeatures> {
    idx.iter()
        .map(|&i| &user.strokes[i])
        .filter(|s| s.stroke_type == t)
        .map(|s| s.raw.clone())
        .collect()
}

fn evaluate_type(
    dataset: &Dataset,
    split: &ScenarioSplit,
    t: StrokeType,
    config: &EvalConfig,
    seed: u64,
) -> (TypeReport, Option<Error>) {
    let exec = config.enroll.exec;
    let mut report = TypeReport {
        stroke_type: t,
        error: None,
        failures: Vec::new(),
        summary: Vec::new(),
        users: Vec::new(),
    };
    let users: Vec<&UserData> = split
        .users
        .iter()
        .map(|s| {
            dataset
                .user(s.user_id)
                .expect("split users come from the dataset")
        })
        .collect();

    let enrolled = exec.map_range(users.len(), |k| {
        let train = raws(users[k], &split.users[k].train, t);
        let n_train = train.len();
        enroll_features(
            users[k].user_id,
            &train,
            t,
            &config.enroll,
            seed::derive(seed, &[users[k].user_id as u64, t as u64]),
        )
        .map(|e| (k, n_train, e.template))
    });
    let mut templates = Vec::new();
    let mut meta = Vec::new();
    for (k, r) in enrolled.into_iter().enumerate() {
        match r {
            Ok((k, n_train, template)) => {
                meta.push((k, n_train));
                templates.push(template);
            }
            Err(e) => report.failures.push(Exclusion {
                user_id: users[k].user_id,
                reason: format!("enrollment failed: {e}"),
            }),
        }
    }

    let test: Vec<(u32, Vec<RawFeatures>)> = meta
        .iter()
        .map(|&(k, _)| (users[k].user_id, raws(users[k], &split.users[k].test, t)))
        .collect();
    if templates.len() < 2 {
        let e = Error::SingleUserDataset(templates.len());
        report.error = Some(e.to_string());
        return (report, Some(e));
    }

    let tables = exec.map(&templates, |tpl| score_table(tpl, &test));
    for ((&(k, n_train), template), table) in meta.iter().zip(&templates).zip(tables) {
        let user_id = users[k].user_id;
        let table = match table {
            Ok(t) => t,
            Err(e) => {
                report.failures.push(Exclusion {
                    user_id,
                    reason: format!("scoring failed: {e}"),
                });
                continue;
            }
        };
        let windows = config
            .windows
            .iter()
            .map(|&window| {
                let rates = table
                    .fused(window, config.fusion)
                    .and_then(|(g, i)| compute_rates(&g, &i));
                match rates {
                    Ok((curve, rates)) => UserWindow {
                        window,
                        rates: Some(rates),
                        skipped: None,
                        curve: config.keep_curves.then_some(curve),
                    },
                    Err(e) => UserWindow {
                        window,
                        rates: None,
                        skipped: Some(e.to_string()),
                        curve: None,
                    },
                }
            })
            .collect();
        report.users.push(UserReport {
            user_id,
            n_states: template.model.n_states(),
            n_mixtures: template.model.n_mixtures(),
            n_train,
            n_test: table.genuine.len(),
            windows,
        });
    }

    for (w_idx, &window) in config.windows.iter().enumerate() {
        let rates: Vec<&RateSummary> = report
            .users
            .iter()
            .filter_map(|u| u.windows[w_idx].rates.as_ref())
            .collect();
        let pick =
            |f: fn(&RateSummary) -> f64| median(&rates.iter().map(|r| f(r)).collect::<Vec<_>>());
        report.summary.push(WindowSummary {
            window,
            n_users: rates.len(),
            median_eer: pick(|r| r.eer),
            median_far_at_zero_frr: pick(|r| r.far_at_zero_frr),
            median_frr_at_zero_far: pick(|r| r.frr_at_zero_far),
        });
    }
    (report, None)
}

/// Split, enroll every user per stroke type, score, fuse and sweep.
///
/// Failures are isolated: a user whose enrollment or scoring fails is listed
/// and dropped, and a stroke type with fewer than two enrolled users carries
/// an error. The run only fails if no stroke type could be evaluated.
pub fn run_experiment(
    dataset: &Dataset,
    scenario: Scenario,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvalReport> {
    if config.windows.is_empty() || config.windows.contains(&0) {
        return Err(Error::InvalidDimensions(
            "window sizes must be positive".into(),
        ));
    }
    let split = build_split(dataset, scenario, seed)?;
    let mut stroke_types = Vec::new();
    let mut first_error = None;
    let mut any_ok = false;
    for &t in &config.stroke_types {
        let (r, err) = evaluate_type(dataset, &split, t, config, seed);
        match err {
            Some(e) => {
                first_error.get_or_insert(e);
            }
            None => any_ok = true,
        }
        stroke_types.push(r);
    }
    if !any_ok {
        return Err(first_error.unwrap_or(Error::SingleUserDataset(0)));
    }
    Ok(EvalReport {
        scenario,
        seed,
        fusion: config.fusion,
        likelihood: config.enroll.likelihood,
        windows: config.windows.clone(),
        excluded: split.excluded,
        stroke_types,
    })
}
