use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use strokeauth::enrollment::{enroll as enroll_user, UserModel};
use strokeauth::evaluation::{run_experiment, write_curve_csv, Dataset, EvalConfig};
use strokeauth::scoring::{score_stroke, write_score_csv, ScoreRow};
use strokeauth::strokes::{
    classify_stroke, parse_touch_log, segment_strokes, Stroke, StrokeType, TouchEvent,
};
use strokeauth::synth::{generate_population, sample_dataset, SessionPlan, StrokeMix};
use tempfile::NamedTempFile;

/// Append one formatted line to a report buffer.
macro_rules! say {
    ($buf:expr, $($arg:tt)*) => {{
        $buf.push_str(&format!($($arg)*));
        $buf.push('\n');
    }};
}

use crate::{CliError, EnrollArgs, EvaluateArgs, InspectArgs, ScoreArgs, SynthArgs};

/// Write through a temporary file in the target directory, then rename.
fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> strokeauth::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn read_events(path: &Path) -> Result<Vec<TouchEvent>, CliError> {
    Ok(parse_touch_log(File::open(path)?)?)
}

fn user_strokes(events: &[TouchEvent]) -> BTreeMap<u32, Vec<Stroke>> {
    let mut by_user: BTreeMap<u32, Vec<Stroke>> = BTreeMap::new();
    for s in segment_strokes(events).strokes {
        by_user.entry(s.user_id()).or_default().push(s);
    }
    for strokes in by_user.values_mut() {
        strokes.sort_by_key(Stroke::start_ms);
    }
    by_user
}

pub fn enroll(out_dir: &Path, a: EnrollArgs) -> Result<(), CliError> {
    let mut text = String::new();
    let config = a.train.config()?;
    let events = read_events(&a.input)?;
    let strokes = user_strokes(&events)
        .remove(&a.user)
        .ok_or(strokeauth::Error::UserNotFound(a.user))?;
    let e = enroll_user(a.user, &strokes, a.stroke_type, &config, a.train.seed)?;
    let out = a
        .out
        .unwrap_or_else(|| out_dir.join(format!("template_user{}_{}.json", a.user, a.stroke_type)));
    write_text(&out, &e.template.to_document())?;

    let s = &e.selection;
    say!(
        text,
        "user {} {}: {} strokes, selected {} states x {} mixtures (max product {})",
        a.user,
        a.stroke_type,
        e.template.m_train,
        s.n_states,
        s.n_mixtures,
        s.max_product
    );
    say!(
        text,
        "{:>6} {:>8} {:>12}",
        "states",
        "mixtures",
        "cv_loglik"
    );
    for c in &s.cells {
        let value = match (&c.mean, &c.error, c.feasible) {
            (_, _, false) => "infeasible".to_string(),
            (Some(m), _, _) => format!("{m:.4}"),
            (None, Some(err), _) => format!("failed: {err}"),
            (None, None, _) => "n/a".to_string(),
        };
        say!(text, "{:>6} {:>8} {:>12}", c.n_states, c.n_mixtures, value);
    }
    say!(text, "template written to {}", out.display());
    emit(&text)
}

pub fn score(out_dir: &Path, a: ScoreArgs) -> Result<(), CliError> {
    let mut text = String::new();
    if a.window == 0 {
        return Err(CliError::usage("window must be positive"));
    }
    let template = UserModel::from_document(&fs::read_to_string(&a.template)?)?;
    let events = read_events(&a.input)?;
    let mut by_user = user_strokes(&events);
    if let Some(u) = a.user {
        let strokes = by_user
            .remove(&u)
            .ok_or(strokeauth::Error::UserNotFound(u))?;
        by_user = BTreeMap::from([(u, strokes)]);
    }
    let want = template.stroke_type.direction();

    let mut rows = Vec::new();
    let mut fused = Vec::new();
    for (&user_id, strokes) in &by_user {
        let mut user_rows = Vec::new();
        for (idx, s) in strokes.iter().enumerate() {
            if classify_stroke(s, a.direction_threshold) != want {
                continue;
            }
            let r = score_stroke(&template, s)?;
            user_rows.push(ScoreRow {
                user_id,
                claimed_id: template.user_id,
                stroke_type: template.stroke_type,
                stroke_index: idx,
                s_l: r.s_l,
                s_k: r.s_k,
                s_c: r.s_c,
            });
        }
        let s_c: Vec<f64> = user_rows.iter().map(|r| r.s_c).collect();
        match a.fusion.fuse(&s_c, a.window) {
            Ok(f) => {
                let step = match a.fusion {
                    strokeauth::scoring::FusionMode::Sliding => 1,
                    strokeauth::scoring::FusionMode::Disjoint => a.window,
                };
                fused.extend(f.into_iter().enumerate().map(|(j, v)| FusedRow {
                    user_id,
                    start: user_rows[j * step].stroke_index,
                    value: v,
                }));
            }
            Err(e @ strokeauth::Error::WindowLargerThanSequence { .. }) => {
                eprintln!("warning: user {user_id}: {e}; per-stroke scores still written");
            }
            Err(e) => return Err(e.into()),
        }
        rows.extend(user_rows);
    }

    let out = a.out.unwrap_or_else(|| out_dir.join("scores.csv"));
    write_atomic(&out, |w| write_score_csv(&rows, w))?;
    let fused_out = a
        .fused_out
        .unwrap_or_else(|| out_dir.join("fused_scores.csv"));
    write_atomic(&fused_out, |w| {
        writeln!(w, "user_id,claimed_id,stroke_type,window,start_index,s_c")?;
        for f in &fused {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                f.user_id, template.user_id, template.stroke_type, a.window, f.start, f.value
            )?;
        }
        Ok(())
    })?;
    say!(
        text,
        "scored {} {} strokes from {} users against user {}; {} fused scores (window {})",
        rows.len(),
        template.stroke_type,
        by_user.len(),
        template.user_id,
        fused.len(),
        a.window
    );
    emit(&text)
}

struct FusedRow {
    user_id: u32,
    start: usize,
    value: f64,
}

pub fn evaluate(out_dir: &Path, a: EvaluateArgs) -> Result<(), CliError> {
    let mut text = String::new();
    let enroll = a.train.config()?;
    if a.windows.is_empty() || a.windows.contains(&0) {
        return Err(CliError::usage("window sizes must be positive"));
    }
    let dataset = Dataset::from_events(&read_events(&a.input)?, enroll.direction_threshold)?;
    let config = EvalConfig {
        enroll,
        windows: a.windows,
        fusion: a.fusion,
        stroke_types: a.stroke_type.map_or(StrokeType::ALL.to_vec(), |t| vec![t]),
        keep_curves: !a.no_curves,
    };
    let report = run_experiment(&dataset, a.scenario, &config, a.train.seed)?;

    write_text(&out_dir.join("report.json"), &report.to_json())?;
    if config.keep_curves {
        let curves = out_dir.join("curves");
        for t in &report.stroke_types {
            for u in &t.users {
                for w in &u.windows {
                    if let Some(curve) = &w.curve {
                        let name = format!("{}_user{}_w{}.csv", t.stroke_type, u.user_id, w.window);
                        write_atomic(&curves.join(name), |out| write_curve_csv(curve, out))?;
                    }
                }
            }
        }
    }

    say!(
        text,
        "scenario {} ({} users excluded)",
        report.scenario,
        report.excluded.len()
    );
    for x in &report.excluded {
        say!(text, "  excluded user {}: {}", x.user_id, x.reason);
    }
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
    for t in &report.stroke_types {
        say!(text, "{}: {} users", t.stroke_type, t.users.len());
        if let Some(err) = &t.error {
            say!(text, "  not evaluated: {err}");
            continue;
        }
        for f in &t.failures {
            say!(text, "  dropped user {}: {}", f.user_id, f.reason);
        }
        say!(
            text,
            "  {:>6} {:>6} {:>8} {:>10} {:>10}",
            "window",
            "users",
            "EER",
            "FAR@FRR0",
            "FRR@FAR0"
        );
        for s in &t.summary {
            say!(
                text,
                "  {:>6} {:>6} {:>8} {:>10} {:>10}",
                s.window,
                s.n_users,
                pct(s.median_eer),
                pct(s.median_far_at_zero_frr),
                pct(s.median_frr_at_zero_far)
            );
        }
    }
    say!(
        text,
        "report written to {}",
        out_dir.join("report.json").display()
    );
    emit(&text)
}

pub fn synth(out_dir: &Path, a: SynthArgs) -> Result<(), CliError> {
    let mut text = String::new();
    if a.users == 0 || a.days.is_empty() || a.sessions_per_day == 0 || a.strokes_per_session == 0 {
        return Err(CliError::usage(
            "users, days, sessions per day and strokes per session must be non-empty",
        ));
    }
    if !(0.0..=1.0).contains(&a.separation) {
        return Err(CliError::usage("separation must lie in [0, 1]"));
    }
    if !(a.drift.is_finite() && a.jitter.is_finite() && a.jitter >= 0.0) {
        return Err(CliError::usage(
            "drift and jitter must be finite, jitter non-negative",
        ));
    }
    let plan = SessionPlan {
        days: a.days,
        sessions_per_day: a.sessions_per_day,
        strokes_per_session: a.strokes_per_session,
        mix: a.stroke_type.map_or(StrokeMix::Both, StrokeMix::Only),
        drift_per_day: a.drift,
        session_jitter: a.jitter,
        ..SessionPlan::default()
    };
    let profiles: Vec<_> = generate_population(a.users, a.separation, a.seed)
        .into_iter()
        .map(|p| p.with_plan(plan.clone()))
        .collect();
    let csv = sample_dataset(&profiles, a.seed)?;
    let out: PathBuf = a.out.unwrap_or_else(|| out_dir.join("synthetic.csv"));
    write_text(&out, &csv)?;
    say!(text, "{} users written to {}", a.users, out.display());
    emit(&text)
}

pub fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let mut text = String::new();
    let t = UserModel::from_document(&fs::read_to_string(&a.template)?)?;
    let m = &t.model;
    say!(text, "user          {}", t.user_id);
    say!(text, "stroke type   {}", t.stroke_type);
    say!(text, "likelihood    {}", t.likelihood.as_str());
    say!(text, "states        {}", m.n_states());
    say!(text, "mixtures      {}", m.n_mixtures());
    say!(text, "features      {}", m.n_features());
    say!(text, "train strokes {}", t.m_train);
    say!(text, "l_avg         {:.6}", t.l_avg);
    say!(text, "norm mean     {:?}", t.normalizer.mean);
    say!(text, "norm std      {:?}", t.normalizer.std);
    for i in 0..m.n_states() {
        say!(
            text,
            "state {i}: prior {:.4}, stay {:.4}, weights {:?}",
            m.prior()[i],
            m.self_loop(i),
            m.mix_weights(i)
                .iter()
                .map(|w| format!("{w:.3}"))
                .collect::<Vec<_>>()
        );
        for k in 0..m.n_mixtures() {
            let fmt = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{x:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            say!(
                text,
                "  [{k}] mean {}  var {}",
                fmt(m.mean(i, k)),
                fmt(m.variance(i, k))
            );
        }
    }
    emit(&text)
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
