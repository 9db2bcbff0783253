//! Egocentric word-learning simulator: synthetic toy-play sessions, gaze
//! contingent acuity, naming-event extraction, a small CNN learner and the
//! training studies built on them.

pub mod acuity;
pub mod corpus;
pub mod evalx;
pub mod events;
pub mod image;
pub mod learner;
pub mod scene;
pub mod seed;

pub use acuity::{foveate, AcuityParams};
pub use corpus::{build_corpus, corpus_stats, Corpus, CorpusStats};
pub use events::{extract_naming_events, NamingEvent};
pub use image::Image;
pub use learner::{Model, ModelConfig, TrainConfig};
pub use scene::{simulate_session, Category, Session, SessionConfig, ViewProfile, N_CATEGORIES};
pub use evalx::StudyConfig;
