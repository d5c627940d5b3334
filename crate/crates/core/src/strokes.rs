//! Touch logs, stroke segmentation, direction classes and per-sample
//! features.
//!
//! Touch log CSV layout (11 columns, header row optional):
//!
//! ```text
//! phone_id,user_id,doc_id,time_ms,action,phone_orientation,x,y,pressure,area,finger_orientation
//! ```
//!
//! `action` is 0 for down, 1 for up and 2 for move.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::ObservationSequence;

pub const TOUCH_LOG_HEADER: &str =
    "phone_id,user_id,doc_id,time_ms,action,phone_orientation,x,y,pressure,area,finger_orientation";

/// Strokes shorter than this net displacement are taps and classed `Other`.
pub const DEFAULT_DIRECTION_THRESHOLD_PX: f64 = 25.0;

/// Number of per-sample features: x, y, pressure, area, dt.
pub const N_FEATURES: usize = 5;

/// Lower bound on a normalizer's per-feature standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchAction {
    Down,
    Up,
    Move,
}

impl TouchAction {
    pub fn code(self) -> u8 {
        match self {
            TouchAction::Down => 0,
            TouchAction::Up => 1,
            TouchAction::Move => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TouchAction::Down),
            1 => Some(TouchAction::Up),
            2 => Some(TouchAction::Move),
            _ => None,
        }
    }
}

/// One raw touch sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchEvent {
    pub phone_id: u32,
    pub user_id: u32,
    pub doc_id: u32,
    pub time_ms: u64,
    pub action: TouchAction,
    pub phone_orientation: i32,
    pub x: f64,
    pub y: f64,
    pub pressure: f64,
    pub area: f64,
    pub finger_orientation: f64,
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str, row: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::MalformedRow {
        row,
        reason: format!("{name} {raw:?} is not a valid value"),
    })
}

fn finite(v: f64, name: &str, row: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MalformedRow {
            row,
            reason: format!("{name} is not finite"),
        })
    }
}

/// Parse a touch log. Rows keep their input order; `MalformedRow` carries the
/// 1-based line number.
pub fn parse_touch_log<R: Read>(source: R) -> Result<Vec<TouchEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut events = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if idx == 0 && rec.get(0).is_some_and(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != 11 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 11 fields, found {}", rec.len()),
            });
        }
        let code: u8 = field(&rec, 4, "action", row)?;
        let action = TouchAction::from_code(code).ok_or_else(|| Error::MalformedRow {
            row,
            reason: format!("unknown action code {code}"),
        })?;
        let pressure = finite(field(&rec, 8, "pressure", row)?, "pressure", row)?;
        let area = finite(field(&rec, 9, "area", row)?, "area", row)?;
        if pressure < 0.0 || area < 0.0 {
            return Err(Error::MalformedRow {
                row,
                reason: "pressure and area must be non-negative".into(),
            });
        }
        events.push(TouchEvent {
            phone_id: field(&rec, 0, "phone_id", row)?,
            user_id: field(&rec, 1, "user_id", row)?,
            doc_id: field(&rec, 2, "doc_id", row)?,
            time_ms: field(&rec, 3, "time_ms", row)?,
            action,
            phone_orientation: field(&rec, 5, "phone_orientation", row)?,
            x: finite(field(&rec, 6, "x", row)?, "x", row)?,
            y: finite(field(&rec, 7, "y", row)?, "y", row)?,
            pressure,
            area,
            finger_orientation: finite(
                field(&rec, 10, "finger_orientation", row)?,
                "finger_orientation",
                row,
            )?,
        });
    }
    if events.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(events)
}

/// Write events in the touch log layout, with a header row.
pub fn write_touch_log<W: Write>(events: &[TouchEvent], mut out: W) -> Result<()> {
    writeln!(out, "{TOUCH_LOG_HEADER}")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.phone_id,
            e.user_id,
            e.doc_id,
            e.time_ms,
            e.action.code(),
            e.phone_orientation,
            e.x,
            e.y,
            e.pressure,
            e.area,
            e.finger_orientation
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Horizontal,
    Vertical,
    Other,
}

/// The two stroke classes that get their own template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeType {
    Horizontal,
    Vertical,
}

impl StrokeType {
    pub const ALL: [StrokeType; 2] = [StrokeType::Horizontal, StrokeType::Vertical];

    pub fn direction(self) -> Direction {
        match self {
            StrokeType::Horizontal => Direction::Horizontal,
            StrokeType::Vertical => Direction::Vertical,
        }
    }

    pub fn from_direction(d: Direction) -> Option<Self> {
        match d {
            Direction::Horizontal => Some(StrokeType::Horizontal),
            Direction::Vertical => Some(StrokeType::Vertical),
            Direction::Other => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StrokeType::Horizontal => "horizontal",
            StrokeType::Vertical => "vertical",
        }
    }
}

impl fmt::Display for StrokeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrokeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(StrokeType::Horizontal),
            "vertical" | "scrolling" => Ok(StrokeType::Vertical),
            other => Err(Error::Format(format!("unknown stroke type {other:?}"))),
        }
    }
}

/// A down...up run of touch events from one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    events: Vec<TouchEvent>,
}

impl Stroke {
    /// Wrap a complete run. The run must start with down, end with up, hold at
    /// least two events and span a positive duration.
    pub fn new(events: Vec<TouchEvent>) -> Result<Self> {
        let len = events.len();
        if len < 2 {
            return Err(Error::StrokeTooShort { len });
        }
        let framed = events[0].action == TouchAction::Down
            && events[len - 1].action == TouchAction::Up
            && events[1..len - 1]
                .iter()
                .all(|e| e.action == TouchAction::Move);
        let ordered = events.windows(2).all(|w| w[0].time_ms <= w[1].time_ms);
        if !framed || !ordered || events[len - 1].time_ms == events[0].time_ms {
            return Err(Error::Format(
                "stroke must be down, move*, up with increasing time".into(),
            ));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[TouchEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn user_id(&self) -> u32 {
        self.events[0].user_id
    }

    pub fn doc_id(&self) -> u32 {
        self.events[0].doc_id
    }

    pub fn phone_id(&self) -> u32 {
        self.events[0].phone_id
    }

    pub fn start_ms(&self) -> u64 {
        self.events[0].time_ms
    }

    pub fn duration_ms(&self) -> u64 {
        self.events[self.events.len() - 1].time_ms - self.events[0].time_ms
    }

    /// Net (dx, dy) in pixels from the down event to the up event.
    pub fn displacement(&self) -> (f64, f64) {
        let (a, b) = (&self.events[0], &self.events[self.events.len() - 1]);
        (b.x - a.x, b.y - a.y)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub strokes: Vec<Stroke>,
    /// Runs discarded for lacking an up, having a single event, or spanning
    /// zero time.
    pub dropped_runs: usize,
}

/// Split events into strokes, one per maximal down...up run in each
/// (user_id, doc_id) stream. Strokes are returned in order of their down
/// event.
pub fn segment_strokes(events: &[TouchEvent]) -> Segmentation {
    let mut open: BTreeMap<(u32, u32), (usize, Vec<TouchEvent>)> = BTreeMap::new();
    let mut done: Vec<(usize, Stroke)> = Vec::new();
    let mut dropped = 0;
    for (idx, e) in events.iter().enumerate() {
        let key = (e.user_id, e.doc_id);
        match e.action {
            TouchAction::Down => {
                if open.insert(key, (idx, vec![e.clone()])).is_some() {
                    dropped += 1;
                }
            }
            TouchAction::Move => {
                if let Some((_, run)) = open.get_mut(&key) {
                    run.push(e.clone());
                }
            }
            TouchAction::Up => {
                if let Some((start, mut run)) = open.remove(&key) {
                    run.push(e.clone());
                    match Stroke::new(run) {
                        Ok(s) => done.push((start, s)),
                        Err(_) => dropped += 1,
                    }
                }
            }
        }
    }
    dropped += open.len();
    done.sort_by_key(|(start, _)| *start);
    Segmentation {
        strokes: done.into_iter().map(|(_, s)| s).collect(),
        dropped_runs: dropped,
    }
}

/// Axis-dominance direction with a minimum net displacement in pixels.
pub fn classify_stroke(stroke: &Stroke, min_displacement_px: f64) -> Direction {
    let (dx, dy) = stroke.displacement();
    if dx.hypot(dy) < min_displacement_px {
        Direction::Other
    } else if dx.abs() >= dy.abs() {
        Direction::Horizontal
    } else {
        Direction::Vertical
    }
}

/// Un-normalized T x 5 feature matrix: x, y, pressure, area and the
/// milliseconds since the previous sample (0 for the first).
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    rows: Vec<[f64; N_FEATURES]>,
}

impl RawFeatures {
    pub fn new(rows: Vec<[f64; N_FEATURES]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; N_FEATURES]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn extract_observations(stroke: &Stroke) -> Result<RawFeatures> {
    let ev = stroke.events();
    if ev.len() < 2 {
        return Err(Error::StrokeTooShort { len: ev.len() });
    }
    let rows = ev
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let dt = if i == 0 {
                0.0
            } else {
                (e.time_ms - ev[i - 1].time_ms) as f64
            };
            [e.x, e.y, e.pressure, e.area, dt]
        })
        .collect();
    Ok(RawFeatures { rows })
}

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population mean and standard deviation over every pooled sample.
    pub fn fit(training: &[RawFeatures]) -> Result<Self> {
        let n: usize = training.iter().map(RawFeatures::len).sum();
        if n == 0 {
            return Err(Error::EmptyPool);
        }
        let samples = || training.iter().flat_map(|r| r.rows.iter());
        let mut mean = vec![0.0; N_FEATURES];
        for row in samples() {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; N_FEATURES];
        for row in samples() {
            var.iter_mut()
                .zip(row.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var
            .into_iter()
            .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, raw: &RawFeatures) -> Result<ObservationSequence> {
        let data = raw
            .rows
            .iter()
            .flat_map(|row| {
                row.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| (v - m) / s)
            })
            .collect();
        ObservationSequence::from_flat(data, raw.len(), N_FEATURES)
    }

    /// Map a normalized sequence back to raw units.
    pub fn invert(&self, obs: &ObservationSequence) -> RawFeatures {
        let rows = obs
            .rows()
            .map(|z| {
                let mut row = [0.0; N_FEATURES];
                for (f, r) in row.iter_mut().enumerate() {
                    *r = z[f] * self.std[f] + self.mean[f];
                }
                row
            })
            .collect();
        RawFeatures { rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(action: TouchAction, t: u64, x: f64, y: f64) -> TouchEvent {
        TouchEvent {
            phone_id: 1,
            user_id: 5,
            doc_id: 3,
            time_ms: t,
            action,
            phone_orientation: 0,
            x,
            y,
            pressure: 0.5,
            area: 0.3,
            finger_orientation: 0.1,
        }
    }

    use TouchAction::{Down, Move, Up};

    fn stroke_with(dx: f64, dy: f64) -> Stroke {
        Stroke::new(vec![
            ev(Down, 0, 10.0, 10.0),
            ev(Up, 16, 10.0 + dx, 10.0 + dy),
        ])
        .unwrap()
    }

    #[test]
    fn parses_documented_row() {
        let events =
            parse_touch_log("1,5,3,1000,0,0,100.0,200.0,0.5,0.3,0.1\n".as_bytes()).unwrap();
        assert_eq!(
            events,
            vec![TouchEvent {
                time_ms: 1000,
                x: 100.0,
                y: 200.0,
                ..ev(Down, 0, 0.0, 0.0)
            }]
        );
    }

    #[test]
    fn header_and_crlf_accepted() {
        let text = format!("{TOUCH_LOG_HEADER}\r\n1,5,3,1000,2,0,1,2,0.5,0.3,0.1\r\n");
        let events = parse_touch_log(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].action, Move);
    }

    #[test]
    fn short_row_is_malformed() {
        let text = "1,5,3,1000,0,0,100.0,200.0,0.5,0.3,0.1\n1,5,3,1000,0,0,100.0,200.0,0.5,0.3\n";
        match parse_touch_log(text.as_bytes()) {
            Err(Error::MalformedRow { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains("10"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_touch_log("1,5,3,1000,7,0,1,2,0.5,0.3,0.1\n".as_bytes()),
            Err(Error::MalformedRow { .. })
        ));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            parse_touch_log("".as_bytes()),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            parse_touch_log(format!("{TOUCH_LOG_HEADER}\n").as_bytes()),
            Err(Error::EmptyFile)
        ));
    }

    #[test]
    fn segmentation_cases() {
        let s = segment_strokes(&[
            ev(Down, 0, 0.0, 0.0),
            ev(Move, 16, 1.0, 0.0),
            ev(Move, 32, 2.0, 0.0),
            ev(Up, 48, 3.0, 0.0),
        ]);
        assert_eq!(
            (s.strokes.len(), s.strokes[0].len(), s.dropped_runs),
            (1, 4, 0)
        );

        let s = segment_strokes(&[ev(Down, 0, 0.0, 0.0), ev(Move, 16, 1.0, 0.0)]);
        assert_eq!((s.strokes.len(), s.dropped_runs), (0, 1));

        let s = segment_strokes(&[
            ev(Down, 0, 0.0, 0.0),
            ev(Up, 10, 0.0, 0.0),
            ev(Down, 20, 0.0, 0.0),
            ev(Move, 30, 0.0, 0.0),
            ev(Up, 40, 0.0, 0.0),
        ]);
        assert_eq!(s.strokes.len(), 2);
        assert_eq!(s.strokes[1].start_ms(), 20);
    }

    #[test]
    fn interleaved_streams_are_kept_apart() {
        let other = |mut e: TouchEvent| {
            e.doc_id = 4;
            e
        };
        let s = segment_strokes(&[
            ev(Down, 0, 0.0, 0.0),
            other(ev(Down, 1, 0.0, 0.0)),
            ev(Up, 10, 0.0, 0.0),
            other(ev(Up, 11, 0.0, 0.0)),
        ]);
        assert_eq!(s.strokes.len(), 2);
        assert_eq!(s.strokes[0].doc_id(), 3);
        assert_eq!(s.strokes[1].doc_id(), 4);
    }

    #[test]
    fn direction_examples() {
        let t = DEFAULT_DIRECTION_THRESHOLD_PX;
        assert_eq!(
            classify_stroke(&stroke_with(100.0, 5.0), t),
            Direction::Horizontal
        );
        assert_eq!(
            classify_stroke(&stroke_with(3.0, -200.0), t),
            Direction::Vertical
        );
        assert_eq!(
            classify_stroke(&stroke_with(10.0, 8.0), t),
            Direction::Other
        );
    }

    #[test]
    fn features_of_two_event_stroke() {
        let mut a = ev(Down, 1000, 10.0, 20.0);
        let mut b = ev(Up, 1016, 30.0, 21.0);
        a.pressure = 0.5;
        b.pressure = 0.6;
        let raw = extract_observations(&Stroke::new(vec![a, b]).unwrap()).unwrap();
        assert_eq!(
            raw.rows(),
            &[[10.0, 20.0, 0.5, 0.3, 0.0], [30.0, 21.0, 0.6, 0.3, 16.0]]
        );
    }

    #[test]
    fn single_event_stroke_rejected() {
        assert!(matches!(
            Stroke::new(vec![ev(Down, 0, 0.0, 0.0)]),
            Err(Error::StrokeTooShort { len: 1 })
        ));
    }

    #[test]
    fn normalizer_examples() {
        let raw = RawFeatures::new(vec![[0.0, 5.0, 0.0, 0.0, 0.0], [2.0, 5.0, 0.0, 0.0, 0.0]]);
        let norm = Normalizer::fit(std::slice::from_ref(&raw)).unwrap();
        assert_eq!(norm.mean[0], 1.0);
        assert_eq!(norm.std[0], 1.0);
        assert_eq!(norm.std[1], STD_FLOOR);
        let z = norm.apply(&raw).unwrap();
        assert_eq!(z.row(1)[0], 1.0);
        assert_eq!(z.row(0)[1], 0.0);
        assert!(matches!(Normalizer::fit(&[]), Err(Error::EmptyPool)));
    }

    fn arb_event() -> impl Strategy<Value = TouchEvent> {
        (
            0u32..5,
            0u32..50,
            0u32..10,
            0u64..10_000_000,
            0u8..3,
            -1i32..3,
            (-2000.0..2000.0f64, -2000.0..2000.0f64),
            (0.0..2.0f64, 0.0..1.0f64, -3.2..3.2f64),
        )
            .prop_map(
                |(phone, user, doc, t, a, o, (x, y), (p, ar, fo))| TouchEvent {
                    phone_id: phone,
                    user_id: user,
                    doc_id: doc,
                    time_ms: t,
                    action: TouchAction::from_code(a).unwrap(),
                    phone_orientation: o,
                    x,
                    y,
                    pressure: p,
                    area: ar,
                    finger_orientation: fo,
                },
            )
    }

    proptest! {
        #[test]
        fn touch_log_round_trips(events in prop::collection::vec(arb_event(), 1..40)) {
            let mut buf = Vec::new();
            write_touch_log(&events, &mut buf).unwrap();
            prop_assert_eq!(parse_touch_log(buf.as_slice()).unwrap(), events);
        }

        #[test]
        fn direction_is_translation_invariant(
            dx in -500.0..500.0f64, dy in -500.0..500.0f64,
            tx in -1e3..1e3f64, ty in -1e3..1e3f64,
        ) {
            let base = stroke_with(dx, dy);
            let moved: Vec<TouchEvent> = base
                .events()
                .iter()
                .map(|e| TouchEvent { x: e.x + tx, y: e.y + ty, ..e.clone() })
                .collect();
            let moved = Stroke::new(moved).unwrap();
            // Translation can perturb the difference in the last bit only.
            let (a, b) = (base.displacement(), moved.displacement());
            prop_assume!((a.0.hypot(a.1) - 25.0).abs() > 1e-6 && (a.0.abs() - a.1.abs()).abs() > 1e-6);
            prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            prop_assert_eq!(classify_stroke(&base, 25.0), classify_stroke(&moved, 25.0));
        }

        #[test]
        fn normalization_inverts(rows in prop::collection::vec(
            prop::array::uniform5(-1e3..1e3f64), 2..30)
        ) {
            let raw = RawFeatures::new(rows);
            let norm = Normalizer::fit(std::slice::from_ref(&raw)).unwrap();
            let back = norm.invert(&norm.apply(&raw).unwrap());
            for (a, b) in raw.rows().iter().zip(back.rows()) {
                for f in 0..N_FEATURES {
                    prop_assert!((a[f] - b[f]).abs() <= 1e-9 * (1.0 + a[f].abs()));
                }
            }
        }

        #[test]
        fn segmentation_partitions_events(
            actions in prop::collection::vec(0u8..3, 1..60),
            docs in prop::collection::vec(0u32..3, 60),
        ) {
            let events: Vec<TouchEvent> = actions
                .iter()
                .enumerate()
                .map(|(i, &a)| TouchEvent {
                    doc_id: docs[i],
                    ..ev(TouchAction::from_code(a).unwrap(), i as u64 * 10, i as f64, 0.0)
                })
                .collect();
            let seg = segment_strokes(&events);
            let mut seen = std::collections::HashSet::new();
            for s in &seg.strokes {
                prop_assert!(s.len() >= 2);
                prop_assert!(s.duration_ms() > 0);
                for e in s.events() {
                    prop_assert!(seen.insert(e.time_ms), "event reused");
                }
            }
        }
    }
}
