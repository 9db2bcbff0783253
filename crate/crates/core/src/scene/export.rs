//! Session directories: `manifest.json` plus `frame_%06d.png` files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::Session;
use crate::image::ImageError;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("manifest {path} has version {found}, expected {MANIFEST_VERSION}")]
    Version { path: PathBuf, found: u32 },
}

/// Which frames get written as PNG next to the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameExport {
    All,
    /// Only frames inside referential-utterance windows.
    Naming,
    None,
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    version: u32,
    session: &'a Session,
}

#[derive(Deserialize)]
struct ManifestIn {
    version: u32,
    session: Session,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

pub fn write_manifest(session: &Session, path: &Path) -> Result<(), ExportError> {
    let bytes = serde_json::to_vec(&ManifestOut {
        version: MANIFEST_VERSION,
        session,
    })
    .map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, bytes).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<Session, ExportError> {
    let bytes = fs::read(path).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let m: ManifestIn = serde_json::from_slice(&bytes).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if m.version != MANIFEST_VERSION {
        return Err(ExportError::Version {
            path: path.to_path_buf(),
            found: m.version,
        });
    }
    Ok(m.session)
}

fn naming_frames(session: &Session, window_s: f64) -> Vec<bool> {
    let n = session.frames.len();
    let w = (window_s * session.config.fps).round() as usize;
    let mut keep = vec![false; n];
    for u in session.utterances.iter().filter(|u| u.is_referential) {
        let start = crate::events::onset_frame(u.onset_ms, session.config.fps);
        for k in keep.iter_mut().skip(start).take(w) {
            *k = true;
        }
    }
    keep
}

pub fn export_session(session: &Session, dir: &Path, frames: FrameExport) -> Result<(), ExportError> {
    fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_manifest(session, &dir.join(MANIFEST_NAME))?;
    let keep = match frames {
        FrameExport::All => vec![true; session.frames.len()],
        FrameExport::Naming => naming_frames(session, 3.0),
        FrameExport::None => vec![false; session.frames.len()],
    };
    for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        session
            .render_frame(i)
            .image
            .save_png(&dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

pub fn import_session(dir: &Path) -> Result<Session, ExportError> {
    read_manifest(&dir.join(MANIFEST_NAME))
}
