//! Seeded synthetic touch datasets drawn from known ground-truth HMMs.
//!
//! Each [`UserProfile`] holds one ground-truth model per stroke type, defined
//! in a normalized feature space whose units are the population statistics in
//! [`population_stats`]. Sampling draws a state path and emissions, maps them
//! back to pixels / pressure / area / milliseconds and frames them as
//! down, move..., up touch events.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::exec::Exec;
use crate::hmm::{Hmm, ObservationSequence};
use crate::seed;
use crate::strokes::{
    classify_stroke, write_touch_log, Normalizer, Stroke, StrokeType, TouchAction, TouchEvent,
    DEFAULT_DIRECTION_THRESHOLD_PX, N_FEATURES,
};

const DAY_MS: u64 = 86_400_000;
const EPOCH_MS: u64 = 1_300_000_000_000;
const NOMINAL_DT_MS: f64 = 16.0;
const BASE_STATES: usize = 4;
const BASE_SELF_LOOP: f64 = 0.85;
/// Base emission variances in normalized units: x, y, pressure, area, dt.
const BASE_VARIANCE: [f64; N_FEATURES] = [0.04, 0.04, 0.25, 0.25, 0.3];
const SWEEP: f64 = 1.2;
const MAX_REDRAWS: usize = 200;

/// Population feature statistics mapping normalized samples to raw units.
pub fn population_stats() -> Normalizer {
    Normalizer {
        mean: vec![540.0, 960.0, 0.5, 0.3, NOMINAL_DT_MS],
        std: vec![150.0, 150.0, 0.08, 0.04, 3.0],
    }
}

/// Which stroke types a session produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrokeMix {
    /// Alternate horizontal and vertical strokes.
    Both,
    Only(StrokeType),
}

impl StrokeMix {
    fn types(self) -> Vec<StrokeType> {
        match self {
            StrokeMix::Both => StrokeType::ALL.to_vec(),
            StrokeMix::Only(t) => vec![t],
        }
    }
}

/// Recording schedule for one synthetic user.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    /// Day offsets of the recording days, e.g. `[0, 7]` for a second
    /// session block one week later.
    pub days: Vec<u32>,
    pub sessions_per_day: usize,
    /// Strokes per session for each stroke type in `mix`.
    pub strokes_per_session: usize,
    pub mix: StrokeMix,
    /// Gap between consecutive sessions on the same day.
    pub session_gap_ms: (u64, u64),
    /// Mean shift per elapsed day, in emission standard deviations, along a
    /// per-user direction.
    pub drift_per_day: f64,
    /// Independent per-session mean offset, in emission standard deviations.
    pub session_jitter: f64,
    /// Inclusive range of samples per stroke.
    pub stroke_len: (usize, usize),
}

impl Default for SessionPlan {
    fn default() -> Self {
        Self {
            days: vec![0, 7],
            sessions_per_day: 3,
            strokes_per_session: 20,
            mix: StrokeMix::Both,
            session_gap_ms: (600_000, 720_000),
            drift_per_day: 0.0,
            session_jitter: 0.0,
            stroke_len: (20, 40),
        }
    }
}

/// Ground truth for one synthetic user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub seed: u64,
    pub separation: f64,
    pub horizontal: Hmm,
    pub vertical: Hmm,
    /// Maps ground-truth feature space to raw units.
    pub denorm: Normalizer,
    pub plan: SessionPlan,
    /// Unit vector along which emission means drift over days.
    pub drift_direction: Vec<f64>,
}

impl UserProfile {
    pub fn model(&self, t: StrokeType) -> &Hmm {
        match t {
            StrokeType::Horizontal => &self.horizontal,
            StrokeType::Vertical => &self.vertical,
        }
    }

    pub fn with_plan(mut self, plan: SessionPlan) -> Self {
        self.plan = plan;
        self
    }

    /// Per-feature emission standard deviation pooled over states.
    pub fn feature_std(&self, t: StrokeType) -> Vec<f64> {
        let m = self.model(t);
        let comps = (m.n_states() * m.n_mixtures()) as f64;
        (0..m.n_features())
            .map(|f| {
                let mut s = 0.0;
                for i in 0..m.n_states() {
                    for k in 0..m.n_mixtures() {
                        s += m.variance(i, k)[f];
                    }
                }
                (s / comps).sqrt()
            })
            .collect()
    }
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Seeded random user profile.
///
/// `separation` scales every per-user deviation from a shared population
/// profile: at 0 all users share the population's 4-state models exactly; at
/// 1 users differ in state count (3 to 5), dwell times, position, pressure,
/// area and timing, and are far apart relative to the emission spread.
pub fn generate_profile(seed: u64, separation: f64) -> UserProfile {
    let separation = separation.clamp(0.0, 1.0);
    let mut rng = seed::rng(seed);
    let n_states = if separation > 0.0 {
        rng.random_range(3..=5)
    } else {
        BASE_STATES
    };

    // User-level offsets shared by both stroke types.
    let shift = |rng: &mut _, scale: f64| separation * scale * gauss(rng);
    let tx = shift(&mut rng, 1.0);
    let ty = shift(&mut rng, 1.0);
    let amplitude = (1.0 + shift(&mut rng, 0.3)).clamp(0.6, 1.5);
    let pressure = shift(&mut rng, 2.0);
    let area = shift(&mut rng, 2.0);
    let tempo = shift(&mut rng, 1.5);

    let build = |kind: StrokeType, rng: &mut rand_chacha::ChaCha8Rng| {
        let n = n_states;
        let mut prior = vec![0.0; n];
        prior[0] = 1.0;
        let trans = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                if i + 1 == n {
                    row[i] = 1.0;
                } else {
                    let stay = (BASE_SELF_LOOP + separation * rng.random_range(-0.1..0.07))
                        .clamp(0.5, 0.95);
                    row[i] = stay;
                    row[i + 1] = 1.0 - stay;
                }
                row
            })
            .collect();
        let mut means = Vec::with_capacity(n);
        let mut variances = Vec::with_capacity(n);
        for s in 0..n {
            let progress = if n > 1 {
                s as f64 / (n - 1) as f64
            } else {
                0.5
            };
            let sweep = SWEEP * amplitude * (2.0 * progress - 1.0);
            let (x, y) = match kind {
                StrokeType::Horizontal => (tx + sweep, ty + shift(rng, 0.2)),
                StrokeType::Vertical => (tx + shift(rng, 0.2), ty - sweep),
            };
            means.push(vec![vec![
                x,
                y,
                pressure + shift(rng, 0.7),
                area + shift(rng, 0.7),
                tempo + shift(rng, 0.5),
            ]]);
            variances.push(vec![BASE_VARIANCE
                .iter()
                .map(|v| v * (separation * 0.3 * gauss(rng)).exp())
                .collect::<Vec<f64>>()]);
        }
        Hmm::new(prior, trans, vec![vec![1.0]; n], means, variances)
            .expect("synthetic ground truth satisfies model invariants")
    };
    let horizontal = build(StrokeType::Horizontal, &mut rng);
    let vertical = build(StrokeType::Vertical, &mut rng);

    let mut dir: Vec<f64> = (0..N_FEATURES).map(|_| gauss(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    dir.iter_mut().for_each(|v| *v /= norm);

    UserProfile {
        seed,
        separation,
        horizontal,
        vertical,
        denorm: population_stats(),
        plan: SessionPlan::default(),
        drift_direction: dir,
    }
}

/// Profiles for `n_users` users, each with its own derived seed.
pub fn generate_population(n_users: usize, separation: f64, seed: u64) -> Vec<UserProfile> {
    (0..n_users)
        .map(|u| generate_profile(seed::derive(seed, &[u as u64]), separation))
        .collect()
}

/// Mean emission location at normalized time `progress` in [0, 1), taking
/// state `floor(progress * N)`.
fn mean_at(m: &Hmm, progress: f64) -> Vec<f64> {
    let s = ((progress * m.n_states() as f64) as usize).min(m.n_states() - 1);
    let mut out = vec![0.0; m.n_features()];
    for k in 0..m.n_mixtures() {
        let w = m.mix_weights(s)[k];
        out.iter_mut()
            .zip(m.mean(s, k))
            .for_each(|(o, v)| *o += w * v);
    }
    out
}

/// Root-mean-square distance between two models' mean trajectories over a
/// uniform time grid, in normalized feature units.
pub fn trajectory_distance(a: &Hmm, b: &Hmm, grid: usize) -> f64 {
    let sum: f64 = (0..grid)
        .map(|g| {
            let t = (g as f64 + 0.5) / grid as f64;
            mean_at(a, t)
                .iter()
                .zip(mean_at(b, t))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum();
    (sum / grid as f64).sqrt()
}

/// Square root of the mean emission variance over both models.
pub fn pooled_std(a: &Hmm, b: &Hmm) -> f64 {
    let vars = |m: &Hmm| {
        (0..m.n_states())
            .flat_map(|i| (0..m.n_mixtures()).map(move |k| (i, k)))
            .flat_map(|(i, k)| m.variance(i, k).to_vec())
            .collect::<Vec<f64>>()
    };
    let all: Vec<f64> = vars(a).into_iter().chain(vars(b)).collect();
    (all.iter().sum::<f64>() / all.len() as f64).sqrt()
}

/// Draw a state path and observations of length `len` from `hmm`.
pub fn sample_sequence(
    hmm: &Hmm,
    len: usize,
    rng: &mut impl Rng,
) -> (Vec<usize>, ObservationSequence) {
    let pick = |probs: &[f64], rng: &mut dyn rand::RngCore| {
        let mut u: f64 = rng.random();
        for (i, p) in probs.iter().enumerate() {
            u -= p;
            if u < 0.0 {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    };
    let mut states = Vec::with_capacity(len);
    let mut data = Vec::with_capacity(len * hmm.n_features());
    let mut s = pick(hmm.prior(), rng);
    for t in 0..len {
        if t > 0 {
            s = pick(hmm.trans_row(s), rng);
        }
        states.push(s);
        let k = pick(hmm.mix_weights(s), rng);
        for (m, v) in hmm.mean(s, k).iter().zip(hmm.variance(s, k)) {
            data.push(m + v.sqrt() * gauss(rng));
        }
    }
    let obs = ObservationSequence::from_flat(data, len, hmm.n_features())
        .expect("sampled observations are finite");
    (states, obs)
}

fn round_to(v: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (v * scale).round() / scale
}

/// Turn normalized samples into touch events starting at `start_ms`.
fn frame_stroke(
    z: &ObservationSequence,
    denorm: &Normalizer,
    ids: (u32, u32, u32),
    start_ms: u64,
    rng: &mut impl Rng,
) -> Vec<TouchEvent> {
    let (phone_id, user_id, doc_id) = ids;
    let raw = denorm.invert(z);
    let len = raw.len();
    let mut time = start_ms;
    raw.rows()
        .iter()
        .enumerate()
        .map(|(t, r)| {
            if t > 0 {
                time += r[4].round().max(1.0) as u64;
            }
            let action = match t {
                0 => TouchAction::Down,
                _ if t + 1 == len => TouchAction::Up,
                _ => TouchAction::Move,
            };
            TouchEvent {
                phone_id,
                user_id,
                doc_id,
                time_ms: time,
                action,
                phone_orientation: 0,
                x: round_to(r[0], 2),
                y: round_to(r[1], 2),
                pressure: round_to(r[2].max(0.01), 4),
                area: round_to(r[3].max(0.01), 4),
                finger_orientation: round_to(0.1 * gauss(rng), 4),
            }
        })
        .collect()
}

/// Events for one profile, recorded as `user_id`.
pub fn sample_user_events(profile: &UserProfile, user_id: u32, seed: u64) -> Vec<TouchEvent> {
    let mut rng = seed::rng(seed);
    let plan = &profile.plan;
    let types = plan.mix.types();
    let phone_id = (user_id % 4) + 1;
    let stds: Vec<Vec<f64>> = types.iter().map(|&t| profile.feature_std(t)).collect();

    let mut events = Vec::new();
    let mut doc_id = 0;
    for &day in &plan.days {
        let mut clock = EPOCH_MS + day as u64 * DAY_MS + 9 * 3_600_000;
        for session in 0..plan.sessions_per_day {
            if session > 0 {
                clock += rng.random_range(plan.session_gap_ms.0..=plan.session_gap_ms.1);
            }
            doc_id += 1;
            let jitter: Vec<f64> = (0..N_FEATURES).map(|_| gauss(&mut rng)).collect();
            let models: Vec<Hmm> = types
                .iter()
                .zip(&stds)
                .map(|(&t, std)| {
                    let offset: Vec<f64> = (0..N_FEATURES)
                        .map(|f| {
                            std[f]
                                * (plan.drift_per_day * day as f64 * profile.drift_direction[f]
                                    + plan.session_jitter * jitter[f])
                        })
                        .collect();
                    profile
                        .model(t)
                        .with_shifted_means(&offset)
                        .expect("offset has one entry per feature")
                })
                .collect();
            for k in 0..plan.strokes_per_session * types.len() {
                let which = k % types.len();
                let want = types[which].direction();
                let ids = (phone_id, user_id, doc_id);
                let mut stroke = Vec::new();
                for _ in 0..MAX_REDRAWS {
                    let len = rng.random_range(plan.stroke_len.0..=plan.stroke_len.1);
                    let len = len.max(models[which].n_states()).max(2);
                    let (_, z) = sample_sequence(&models[which], len, &mut rng);
                    stroke = frame_stroke(&z, &profile.denorm, ids, clock, &mut rng);
                    let framed = Stroke::new(stroke.clone()).expect("framed stroke is valid");
                    if classify_stroke(&framed, DEFAULT_DIRECTION_THRESHOLD_PX) == want {
                        break;
                    }
                }
                clock = stroke.last().map_or(clock, |e| e.time_ms) + rng.random_range(300..=1500);
                events.extend(stroke);
            }
        }
    }
    events
}

/// Events for every profile; profile `i` becomes user `i + 1`.
pub fn sample_events(profiles: &[UserProfile], seed: u64) -> Vec<TouchEvent> {
    Exec::default()
        .map_range(profiles.len(), |i| {
            sample_user_events(&profiles[i], i as u32 + 1, seed::derive(seed, &[i as u64]))
        })
        .into_iter()
        .flatten()
        .collect()
}

/// A complete touch-log CSV for the given profiles.
pub fn sample_dataset(profiles: &[UserProfile], seed: u64) -> Result<String> {
    let mut buf = Vec::new();
    write_touch_log(&sample_events(profiles, seed), &mut buf)?;
    Ok(String::from_utf8(buf).expect("touch log is UTF-8"))
}
