use std::path::{Path, PathBuf};

use egoword::acuity::AcuityParams;
use egoword::evalx::StudyConfig;
use egoword::learner::{ModelConfig, TrainConfig};
use egoword::scene::{FrameExport, SessionConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub infant_events: usize,
    pub parent_events: usize,
    /// Write a full `manifest.json` per session next to the corpus files.
    pub export_manifests: bool,
    /// Which frames to write as PNG when manifests are exported.
    pub export_frames: FrameExport,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            infant_events: 480,
            parent_events: 400,
            export_manifests: false,
            export_frames: FrameExport::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Template for every session; `view_profile` and `seed` are set per
    /// corpus and session.
    pub session: SessionConfig,
    pub acuity: AcuityParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub study: StudyConfig,
    pub corpus: CorpusConfig,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let session = SessionConfig {
            frame_w: 160,
            frame_h: 120,
            ..SessionConfig::default()
        };
        Self {
            acuity: AcuityParams::for_frame(session.frame_w, session.fov_h_deg),
            session,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            study: StudyConfig::default(),
            corpus: CorpusConfig::default(),
            output_dir: PathBuf::from("egoword-out"),
            master_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Err(e) = self.session.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.acuity.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.model.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.train.validate() {
            return bad(e.to_string());
        }
        let s = &self.study;
        if s.repeats == 0 || s.sizes.is_empty() || s.sizes.contains(&0) {
            return bad("study needs repeats >= 1 and positive sizes".into());
        }
        if s.variants_per_view == 0 || s.n_boot == 0 {
            return bad("study variants_per_view and n_boot must be >= 1".into());
        }
        let largest = s.sizes.iter().copied().max().unwrap_or(0);
        if self.corpus.infant_events < largest || self.corpus.parent_events < largest {
            return bad(format!(
                "corpus event targets must cover the largest study size {largest}"
            ));
        }
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
