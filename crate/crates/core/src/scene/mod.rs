//! Synthetic toy-play sessions whose statistics follow the recorded corpus:
//! 30 fps egocentric frames, gaze, and parent utterances.

mod appearance;
mod export;
mod render;
mod session;

pub use appearance::{make_inventory, Category, ObjectAppearance, Pattern, Shape, N_CATEGORIES};
pub use export::{
    export_session, frame_file_name, import_session, read_manifest, write_manifest, ExportError,
    FrameExport, MANIFEST_NAME,
};
pub use render::{
    label_map, render_frame, Background, LabelMap, Mask, Rendered, SceneObject, CLEAN_GRAY,
    NO_OWNER,
};
pub use session::{
    apply_view_profile, simulate_session, FrameRecord, Gaze, GazeEpisode, ObjectTruth, Session,
    SessionConfig, SessionError, Utterance, ViewProfile, MIN_SILENCE_MS,
};
