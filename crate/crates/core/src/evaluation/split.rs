use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::strokes::{
    classify_stroke, extract_observations, segment_strokes, RawFeatures, Stroke, StrokeType,
    TouchEvent,
};

/// Consecutive strokes further apart than this start a new recording day.
pub const DAY_GAP_MS: u64 = 12 * 60 * 60 * 1000;

/// A classified stroke with its session and day labels.
#[derive(Debug, Clone)]
pub struct LabeledStroke {
    pub stroke: Stroke,
    pub stroke_type: StrokeType,
    pub raw: RawFeatures,
    /// 0-based recording day within the user's data.
    pub day: usize,
    /// 0-based session index over the user's whole recording.
    pub session: usize,
    /// 0-based session index within `day`.
    pub session_in_day: usize,
}

#[derive(Debug, Clone)]
pub struct UserData {
    pub user_id: u32,
    /// Chronological.
    pub strokes: Vec<LabeledStroke>,
}

impl UserData {
    pub fn n_days(&self) -> usize {
        self.strokes.last().map_or(0, |s| s.day + 1)
    }

    pub fn sessions_on_day(&self, day: usize) -> usize {
        self.strokes
            .iter()
            .filter(|s| s.day == day)
            .map(|s| s.session_in_day + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Sorted by user id.
    pub users: Vec<UserData>,
    pub dropped_runs: usize,
    /// Strokes too short to count as horizontal or vertical.
    pub unclassified: usize,
}

impl Dataset {
    /// Segment, classify and label a touch log.
    ///
    /// Days are inferred from time: a gap of more than [`DAY_GAP_MS`] between
    /// a user's consecutive strokes starts a new day. A session is a distinct
    /// `doc_id` within a day.
    pub fn from_events(events: &[TouchEvent], direction_threshold: f64) -> Result<Self> {
        let seg = segment_strokes(events);
        let mut per_user: BTreeMap<u32, Vec<Stroke>> = BTreeMap::new();
        for s in seg.strokes {
            per_user.entry(s.user_id()).or_default().push(s);
        }
        let mut unclassified = 0;
        let mut users = Vec::with_capacity(per_user.len());
        for (user_id, mut strokes) in per_user {
            strokes.sort_by_key(Stroke::start_ms);
            let mut labeled = Vec::with_capacity(strokes.len());
            let mut day = 0;
            let mut prev_end: Option<u64> = None;
            let mut sessions: Vec<(usize, u32)> = Vec::new();
            for stroke in strokes {
                if let Some(end) = prev_end {
                    if stroke.start_ms().saturating_sub(end) > DAY_GAP_MS {
                        day += 1;
                    }
                }
                prev_end = Some(stroke.start_ms() + stroke.duration_ms());
                let key = (day, stroke.doc_id());
                let session = match sessions.iter().position(|&k| k == key) {
                    Some(i) => i,
                    None => {
                        sessions.push(key);
                        sessions.len() - 1
                    }
                };
                let session_in_day = sessions[..=session].iter().filter(|k| k.0 == day).count() - 1;
                let Some(stroke_type) =
                    StrokeType::from_direction(classify_stroke(&stroke, direction_threshold))
                else {
                    unclassified += 1;
                    continue;
                };
                labeled.push(LabeledStroke {
                    raw: extract_observations(&stroke)?,
                    stroke,
                    stroke_type,
                    day,
                    session,
                    session_in_day,
                });
            }
            users.push(UserData {
                user_id,
                strokes: labeled,
            });
        }
        Ok(Self {
            users,
            dropped_runs: seg.dropped_runs,
            unclassified,
        })
    }

    pub fn user(&self, user_id: u32) -> Result<&UserData> {
        self.users
            .iter()
            .find(|u| u.user_id == user_id)
            .ok_or(Error::UserNotFound(user_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Seeded 2:1 train:test draw across all sessions.
    ShortTerm,
    /// Train on the first session, test on the later sessions of that day.
    InterSession,
    /// Train on the first day, test on all later days.
    LongTerm,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::ShortTerm,
        Scenario::InterSession,
        Scenario::LongTerm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::ShortTerm => "short_term",
            Scenario::InterSession => "inter_session",
            Scenario::LongTerm => "long_term",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "short_term" => Ok(Scenario::ShortTerm),
            "inter_session" => Ok(Scenario::InterSession),
            "long_term" => Ok(Scenario::LongTerm),
            _ => Err(Error::Format(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Indices into [`UserData::strokes`], both chronological.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSplit {
    pub user_id: u32,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub user_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSplit {
    pub scenario: Scenario,
    pub users: Vec<UserSplit>,
    pub excluded: Vec<Exclusion>,
}

/// Number of training strokes in a 2:1 split of `n`.
pub fn short_term_train_count(n: usize) -> usize {
    (2 * n + 1) / 3
}

fn split_user(
    user: &UserData,
    scenario: Scenario,
    seed: u64,
) -> std::result::Result<UserSplit, String> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    match scenario {
        Scenario::ShortTerm => {
            for t in StrokeType::ALL {
                let mut idx: Vec<usize> = (0..user.strokes.len())
                    .filter(|&i| user.strokes[i].stroke_type == t)
                    .collect();
                let cut = short_term_train_count(idx.len());
                idx.shuffle(&mut seed::rng(seed::derive(
                    seed,
                    &[user.user_id as u64, t as u64],
                )));
                train.extend_from_slice(&idx[..cut]);
                test.extend_from_slice(&idx[cut..]);
            }
        }
        Scenario::InterSession => {
            if user.sessions_on_day(0) < 2 {
                return Err("needs at least two sessions on the first day".into());
            }
            for (i, s) in user.strokes.iter().enumerate() {
                match (s.day, s.session_in_day) {
                    (0, 0) => train.push(i),
                    (0, _) => test.push(i),
                    _ => {}
                }
            }
        }
        Scenario::LongTerm => {
            if user.n_days() < 2 {
                return Err("needs data from a later day".into());
            }
            for (i, s) in user.strokes.iter().enumerate() {
                if s.day == 0 {
                    train.push(i);
                } else {
                    test.push(i);
                }
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err("no strokes on one side of the split".into());
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(UserSplit {
        user_id: user.user_id,
        train,
        test,
    })
}

/// Per-user train/test assignment. Users lacking the sessions a scenario
/// needs are excluded and listed.
pub fn build_split(dataset: &Dataset, scenario: Scenario, seed: u64) -> Result<ScenarioSplit> {
    let mut users = Vec::new();
    let mut excluded = Vec::new();
    for u in &dataset.users {
        match split_user(u, scenario, seed) {
            Ok(s) => users.push(s),
            Err(reason) => excluded.push(Exclusion {
                user_id: u.user_id,
                reason,
            }),
        }
    }
    if users.len() < 2 {
        return Err(Error::ScenarioUnsupportedByData(format!(
            "{scenario} needs two eligible users, {} qualify",
            users.len()
        )));
    }
    Ok(ScenarioSplit {
        scenario,
        users,
        excluded,
    })
}
