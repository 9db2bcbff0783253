//! Multi-session corpora of naming events for one camera view.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acuity::AcuityParams;
use crate::events::{extract_naming_events, NamingEvent, DEFAULT_WINDOW_S};
use crate::learner::{prepare_event, LearnerError, PreparedEvent};
use crate::scene::{apply_view_profile, simulate_session, Session, SessionConfig, SessionError, ViewProfile};
use crate::seed::derive_seed;

/// Hard cap so a badly configured generator cannot loop forever.
pub const MAX_SESSIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub view: ViewProfile,
    /// `sessions[i]` has session id `i`.
    pub sessions: Vec<Session>,
    pub events: Vec<NamingEvent>,
    /// Referential utterances whose window ran past the session end.
    pub dropped: usize,
}

/// Per-session config: the view profile applied to `base`, with a session
/// seed derived from `(seed, view, index)`.
pub fn session_config(base: &SessionConfig, view: ViewProfile, seed: u64, index: usize) -> SessionConfig {
    let cfg = SessionConfig {
        view_profile: view,
        seed: derive_seed(seed, view.name(), index as u64),
        ..base.clone()
    };
    apply_view_profile(&cfg)
}

/// Simulates sessions until the corpus holds at least `min_events` naming
/// events. Sessions are generated in parallel in fixed-size waves, so the
/// result does not depend on the thread count.
pub fn build_corpus(
    base: &SessionConfig,
    view: ViewProfile,
    min_events: usize,
    seed: u64,
) -> Result<Corpus, SessionError> {
    const WAVE: usize = 4;
    let mut corpus = Corpus {
        view,
        sessions: Vec::new(),
        events: Vec::new(),
        dropped: 0,
    };
    while corpus.events.len() < min_events.max(1) {
        if corpus.sessions.len() >= MAX_SESSIONS {
            return Err(SessionError::Invalid(format!(
                "{MAX_SESSIONS} sessions produced only {} naming events",
                corpus.events.len()
            )));
        }
        let start = corpus.sessions.len();
        let wave = (start..start + WAVE)
            .into_par_iter()
            .map(|i| simulate_session(&session_config(base, view, seed, i)))
            .collect::<Result<Vec<_>, _>>()?;
        for s in wave {
            if corpus.events.len() >= min_events.max(1) {
                break;
            }
            let id = corpus.sessions.len() as u32;
            let ex = extract_naming_events(&s, id, DEFAULT_WINDOW_S);
            corpus.events.extend(ex.events);
            corpus.dropped += ex.dropped;
            corpus.sessions.push(s);
        }
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub view: ViewProfile,
    pub sessions: usize,
    pub minutes: f64,
    pub utterances_per_min: f64,
    pub referential_per_min: f64,
    pub events: usize,
    pub sustained: usize,
    pub distributed: usize,
    pub sustained_fraction: f64,
    pub on_target: usize,
    pub on_target_fraction_of_sustained: f64,
    pub target_size_median: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let minutes: f64 = corpus.sessions.iter().map(|s| s.duration_min()).sum();
    let utterances: usize = corpus.sessions.iter().map(|s| s.utterances.len()).sum();
    let referential: usize = corpus.sessions.iter().map(|s| s.referential_count()).sum();
    let sustained = corpus.events.iter().filter(|e| e.is_sustained()).count();
    let on_target = corpus.events.iter().filter(|e| e.on_target).count();
    let n = corpus.events.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let sizes: Vec<f32> = corpus.events.iter().map(|e| e.target_size_fraction).collect();
    CorpusStats {
        view: corpus.view,
        sessions: corpus.sessions.len(),
        minutes,
        utterances_per_min: utterances as f64 / minutes,
        referential_per_min: referential as f64 / minutes,
        events: n,
        sustained,
        distributed: n - sustained,
        sustained_fraction: ratio(sustained, n),
        on_target,
        on_target_fraction_of_sustained: ratio(on_target, sustained),
        target_size_median: crate::events::median_split(&sizes).map(|s| s.median).unwrap_or(0.0),
    }
}

/// Prepares every event of the corpus (see [`prepare_event`]); order matches
/// `corpus.events`.
pub fn prepare_corpus(
    corpus: &Corpus,
    acuity: &AcuityParams,
    input_size: usize,
    frame_stride: usize,
) -> Result<Vec<PreparedEvent>, LearnerError> {
    corpus
        .events
        .par_iter()
        .map(|e| {
            let s = corpus
                .sessions
                .get(e.session_id as usize)
                .ok_or(LearnerError::MissingSession(e.session_id))?;
            prepare_event(e, s, acuity, input_size, frame_stride)
        })
        .collect()
}
