//! Naming-event extraction and the attention / size annotations used by the
//! ablation studies.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{
    label_map, Category, FrameRecord, Gaze, LabelMap, SceneObject, Session, Utterance,
    MIN_SILENCE_MS, N_CATEGORIES,
};

pub const DEFAULT_WINDOW_S: f64 = 3.0;
pub const SUSTAINED_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("speech intervals must be sorted and non-overlapping (interval {index})")]
    UnsortedIntervals { index: usize },
    #[error("speech interval {index} has offset <= onset")]
    EmptyInterval { index: usize },
    #[error("cannot split an empty event list")]
    EmptySplit,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad event record at {path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Merges speech intervals separated by less than 400 ms of silence.
pub fn segment_utterances(intervals: &[(u64, u64)]) -> Result<Vec<Utterance>, EventsError> {
    for (index, &(on, off)) in intervals.iter().enumerate() {
        if off <= on {
            return Err(EventsError::EmptyInterval { index });
        }
        if index > 0 && on < intervals[index - 1].1 {
            return Err(EventsError::UnsortedIntervals { index });
        }
    }
    let mut out: Vec<Utterance> = Vec::new();
    for &(on, off) in intervals {
        match out.last_mut() {
            Some(last) if on - last.offset_ms < MIN_SILENCE_MS => last.offset_ms = off,
            _ => out.push(Utterance {
                onset_ms: on,
                offset_ms: off,
                is_referential: false,
                referent_category: None,
            }),
        }
    }
    Ok(out)
}

/// First frame whose timestamp is at or after `onset_ms`.
pub fn onset_frame(onset_ms: u64, fps: f64) -> usize {
    // Frame i sits at i * 1000 / fps ms; the epsilon absorbs float noise when
    // the onset lands exactly on the grid.
    (onset_ms as f64 * fps / 1000.0 - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionClass {
    Sustained,
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamingEvent {
    pub session_id: u32,
    pub utterance_index: usize,
    pub onset_ms: u64,
    pub target_category: Category,
    /// Index of the first window frame in the session.
    pub frame_start: usize,
    pub frame_count: usize,
    /// Attended category per window frame.
    pub attended: Vec<Option<Category>>,
    pub attention_class: AttentionClass,
    pub attended_majority_category: Option<Category>,
    pub on_target: bool,
    /// Mean visible fraction of the target over the window.
    pub target_size_fraction: f32,
}

impl NamingEvent {
    pub fn frames<'a>(&self, session: &'a Session) -> &'a [FrameRecord] {
        &session.frames[self.frame_start..self.frame_start + self.frame_count]
    }

    pub fn is_sustained(&self) -> bool {
        self.attention_class == AttentionClass::Sustained
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub events: Vec<NamingEvent>,
    /// Referential utterances whose window ran past the session end.
    pub dropped: usize,
}

pub fn extract_naming_events(session: &Session, session_id: u32, window_s: f64) -> Extraction {
    let fps = session.config.fps;
    let w = (window_s * fps).round() as usize;
    let mut out = Extraction::default();
    for (utterance_index, u) in session.utterances.iter().enumerate() {
        let Some(target) = u.referent_category else {
            continue;
        };
        let start = onset_frame(u.onset_ms, fps);
        if start + w > session.frames.len() {
            out.dropped += 1;
            continue;
        }
        let frames = &session.frames[start..start + w];
        let attended: Vec<Option<Category>> = frames.iter().map(|f| f.attended_category).collect();
        let (attention_class, majority) = classify_attention(&attended, SUSTAINED_THRESHOLD);
        let on_target = attention_class == AttentionClass::Sustained && majority == Some(target);
        let target_size_fraction =
            frames.iter().map(|f| f.visible_fraction_of(target)).sum::<f32>() / w as f32;
        out.events.push(NamingEvent {
            session_id,
            utterance_index,
            onset_ms: u.onset_ms,
            target_category: target,
            frame_start: start,
            frame_count: w,
            attended,
            attention_class,
            attended_majority_category: majority,
            on_target,
            target_size_fraction,
        });
    }
    out
}

/// Category under the gaze point, else the nearest visible object within
/// `snap_radius_px`; equal distances go to the lower category id.
pub fn attended_from_labels(
    labels: &LabelMap,
    objects: &[SceneObject],
    gaze: Gaze,
    snap_radius_px: f32,
) -> Option<Category> {
    if !gaze.valid {
        return None;
    }
    let (w, h) = (labels.width as i64, labels.height as i64);
    let px = (gaze.x.round() as i64).clamp(0, w - 1);
    let py = (gaze.y.round() as i64).clamp(0, h - 1);
    if let Some(o) = labels.owner_at(px as usize, py as usize) {
        return Some(objects[o].appearance.category);
    }
    let r = snap_radius_px.max(0.0);
    let x0 = ((gaze.x - r).floor() as i64).max(0);
    let x1 = ((gaze.x + r).ceil() as i64).min(w - 1);
    let y0 = ((gaze.y - r).floor() as i64).max(0);
    let y1 = ((gaze.y + r).ceil() as i64).min(h - 1);
    let mut best: Option<(f32, Category)> = None;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let Some(o) = labels.owner_at(x as usize, y as usize) else {
                continue;
            };
            let (dx, dy) = (x as f32 - gaze.x, y as f32 - gaze.y);
            let d2 = dx * dx + dy * dy;
            if d2 > r * r {
                continue;
            }
            let cat = objects[o].appearance.category;
            best = match best {
                Some((bd, bc)) if bd < d2 || (bd == d2 && bc <= cat) => Some((bd, bc)),
                _ => Some((d2, cat)),
            };
        }
    }
    best.map(|(_, c)| c)
}

pub fn attended_category(
    frame: &FrameRecord,
    width: usize,
    height: usize,
    snap_radius_px: f32,
) -> Option<Category> {
    let labels = label_map(&frame.objects, width, height);
    attended_from_labels(&labels, &frame.objects, frame.gaze, snap_radius_px)
}

/// Sustained iff one category is attended in strictly more than
/// `threshold` of the frames. The returned category is the modal attended
/// category (ties to the lower id), `None` if nothing was attended.
pub fn classify_attention(
    attended: &[Option<Category>],
    threshold: f64,
) -> (AttentionClass, Option<Category>) {
    let mut counts = [0usize; N_CATEGORIES];
    for c in attended.iter().flatten() {
        counts[*c as usize] += 1;
    }
    let (best, best_count) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (c, &n)| if n > acc.1 { (c, n) } else { acc });
    let majority = (best_count > 0).then_some(best as Category);
    let sustained = best_count as f64 > threshold * attended.len() as f64 + 1e-9;
    let class = if sustained {
        AttentionClass::Sustained
    } else {
        AttentionClass::Distributed
    };
    (class, majority)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit {
    pub large: Vec<usize>,
    pub small: Vec<usize>,
    pub median: f64,
}

/// Indices strictly above the median go to `large`, the rest to `small`.
pub fn median_split(values: &[f32]) -> Result<MedianSplit, EventsError> {
    if values.is_empty() {
        return Err(EventsError::EmptySplit);
    }
    let mut sorted: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (large, small) = (0..n).partition(|&i| values[i] as f64 > median);
    Ok(MedianSplit {
        large,
        small,
        median,
    })
}

pub fn target_size_split(
    events: &[NamingEvent],
) -> Result<(Vec<&NamingEvent>, Vec<&NamingEvent>, f64), EventsError> {
    let sizes: Vec<f32> = events.iter().map(|e| e.target_size_fraction).collect();
    let split = median_split(&sizes)?;
    Ok((
        split.large.iter().map(|&i| &events[i]).collect(),
        split.small.iter().map(|&i| &events[i]).collect(),
        split.median,
    ))
}

pub fn write_events_jsonl(events: &[NamingEvent], path: &Path) -> Result<(), EventsError> {
    let io = |source| EventsError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for e in events {
        let line = serde_json::to_string(e).map_err(|source| EventsError::Json {
            path: path.display().to_string(),
            line: 0,
            source,
        })?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<NamingEvent>, EventsError> {
    let io = |source| EventsError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| EventsError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{make_inventory, simulate_session, Pattern, SessionConfig, Shape};

    fn spans(us: &[Utterance]) -> Vec<(u64, u64)> {
        us.iter().map(|u| (u.onset_ms, u.offset_ms)).collect()
    }

    #[test]
    fn sub_threshold_gap_merges() {
        let out = segment_utterances(&[(0, 500), (800, 1200)]).unwrap();
        assert_eq!(spans(&out), vec![(0, 1200)]);
    }

    #[test]
    fn boundary_gap_splits() {
        let out = segment_utterances(&[(0, 500), (900, 1200)]).unwrap();
        assert_eq!(spans(&out), vec![(0, 500), (900, 1200)]);
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(matches!(
            segment_utterances(&[(0, 500), (400, 900)]),
            Err(EventsError::UnsortedIntervals { index: 1 })
        ));
        assert!(matches!(
            segment_utterances(&[(10, 10)]),
            Err(EventsError::EmptyInterval { index: 0 })
        ));
    }

    #[test]
    fn classify_boundaries() {
        let mk = |n3: usize| -> Vec<Option<Category>> {
            (0..90).map(|i| if i < n3 { Some(3) } else { Some(5 + (i % 7) as u8) }).collect()
        };
        assert_eq!(classify_attention(&mk(55), 0.6), (AttentionClass::Sustained, Some(3)));
        assert_eq!(classify_attention(&mk(54), 0.6).0, AttentionClass::Distributed);
    }

    #[test]
    fn modal_tie_break_is_exhaustive_over_orders() {
        // Every assignment of three ids to three equal 30-frame blocks.
        let ids = [4u8, 9, 17];
        for a in ids {
            for b in ids {
                for c in ids {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let att: Vec<_> = [a, b, c]
                        .iter()
                        .flat_map(|&k| std::iter::repeat(Some(k)).take(30))
                        .collect();
                    assert_eq!(
                        classify_attention(&att, 0.6),
                        (AttentionClass::Distributed, Some(4))
                    );
                }
            }
        }
        assert_eq!(classify_attention(&[None; 90], 0.6), (AttentionClass::Distributed, None));
    }

    #[test]
    fn median_split_examples() {
        let s = median_split(&[0.02, 0.04, 0.06, 0.08, 0.10]).unwrap();
        assert!((s.median - 0.06).abs() < 1e-7);
        assert_eq!(s.large, vec![3, 4]);
        assert_eq!(s.small, vec![0, 1, 2]);

        let flat = median_split(&[0.05; 6]).unwrap();
        assert!(flat.large.is_empty());
        assert_eq!(flat.small.len(), 6);

        assert!(matches!(median_split(&[]), Err(EventsError::EmptySplit)));
    }

    fn disc(category: usize, x: f32, radius: f32) -> SceneObject {
        let mut appearance = make_inventory(0)[category];
        appearance.shape = Shape::Circle;
        appearance.pattern = Pattern::Solid;
        SceneObject {
            appearance,
            center: [x, 50.0],
            radius_px: radius,
            rotation: 0.0,
            depth_order: 0,
        }
    }

    fn gaze(x: f32, y: f32) -> Gaze {
        Gaze { x, y, valid: true }
    }

    #[test]
    fn gaze_inside_mask_hits_object() {
        let objs = [disc(6, 50.0, 20.0)];
        let labels = label_map(&objs, 200, 100);
        assert_eq!(attended_from_labels(&labels, &objs, gaze(55.0, 52.0), 25.0), Some(6));
    }

    #[test]
    fn gaze_beyond_snap_radius_is_unattended() {
        let objs = [disc(6, 50.0, 10.0)];
        let labels = label_map(&objs, 300, 100);
        // Nearest mask pixel is ~100 px away.
        assert_eq!(attended_from_labels(&labels, &objs, gaze(160.0, 50.0), 30.0), None);
        assert_eq!(attended_from_labels(&labels, &objs, gaze(70.0, 50.0), 30.0), Some(6));
    }

    #[test]
    fn equidistant_masks_resolve_to_lower_id() {
        // Mirror-symmetric discs about x = 100; gaze on the axis.
        for (left, right) in [(11usize, 2usize), (2, 11)] {
            let objs = [disc(left, 80.0, 10.0), disc(right, 120.0, 10.0)];
            let labels = label_map(&objs, 200, 100);
            assert_eq!(labels.visible_px[0], labels.visible_px[1]);
            assert_eq!(attended_from_labels(&labels, &objs, gaze(100.0, 50.0), 25.0), Some(2));
        }
    }

    fn tiny_session(seed: u64) -> Session {
        simulate_session(&SessionConfig {
            duration_s: 120.0,
            frame_w: 96,
            frame_h: 72,
            seed,
            ..SessionConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn window_is_ninety_frames_from_onset() {
        let mut s = tiny_session(1);
        s.utterances = vec![Utterance {
            onset_ms: 10_000,
            offset_ms: 11_800,
            is_referential: true,
            referent_category: Some(4),
        }];
        let ex = extract_naming_events(&s, 0, DEFAULT_WINDOW_S);
        assert_eq!(ex.events.len(), 1);
        let frames = ex.events[0].frames(&s);
        assert_eq!(frames.len(), 90);
        assert!((frames[0].timestamp_ms - 10_000.0).abs() < 1e-9);
        assert!((frames[89].timestamp_ms - 12_966.666).abs() < 1e-2);
    }

    #[test]
    fn overrunning_window_is_dropped() {
        let mut s = tiny_session(2);
        s.utterances = vec![Utterance {
            onset_ms: 119_000,
            offset_ms: 119_900,
            is_referential: true,
            referent_category: Some(1),
        }];
        let ex = extract_naming_events(&s, 0, DEFAULT_WINDOW_S);
        assert!(ex.events.is_empty());
        assert_eq!(ex.dropped, 1);
    }

    #[test]
    fn no_referential_utterances_no_events() {
        let mut s = tiny_session(3);
        for u in &mut s.utterances {
            u.is_referential = false;
            u.referent_category = None;
        }
        let ex = extract_naming_events(&s, 0, DEFAULT_WINDOW_S);
        assert!(ex.events.is_empty());
        assert_eq!(ex.dropped, 0);
    }

    #[test]
    fn event_annotations_are_consistent() {
        let s = tiny_session(4);
        let ex = extract_naming_events(&s, 0, DEFAULT_WINDOW_S);
        assert!(!ex.events.is_empty());
        for e in &ex.events {
            assert_eq!(e.frame_count, 90);
            assert_eq!(e.frame_start, onset_frame(e.onset_ms, 30.0));
            assert!(s.frames[e.frame_start].timestamp_ms >= e.onset_ms as f64);
            if e.frame_start > 0 {
                assert!(s.frames[e.frame_start - 1].timestamp_ms < e.onset_ms as f64);
            }
            if e.on_target {
                assert!(e.is_sustained());
            }
            assert!((0.0..=1.0).contains(&e.target_size_fraction));
            for (f, a) in e.frames(&s).iter().zip(&e.attended) {
                assert_eq!(attended_category(f, 96, 72, s.config.snap_radius_px()), *a);
            }
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let s = tiny_session(5);
        let ex = extract_naming_events(&s, 7, DEFAULT_WINDOW_S);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        write_events_jsonl(&ex.events, &path).unwrap();
        assert_eq!(read_events_jsonl(&path).unwrap(), ex.events);
    }
}
