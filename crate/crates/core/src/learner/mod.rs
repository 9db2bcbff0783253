//! Convolutional softmax classifier over the 24 toy categories, trained with
//! momentum SGD on foveated naming-event frames.

mod checkpoint;
mod data;
mod net;
mod resize;
mod scalar;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::image::Image;
use crate::scene::Category;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use data::{image_to_chw, prepare_event, prepare_frame, PreparedEvent};
pub use net::{argmax, log_sum_exp, softmax, LayerKind, ModelConfig, Network, ParamTensor, Workspace};
pub use resize::{resize_bilinear, resize_bilinear_to};
pub use scalar::Scalar;
pub use train::{
    train, train_prepared, write_history_csv, EpochRecord, History, StopReason, TrainConfig,
};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no naming events to train on")]
    EmptyEvents,
    #[error("image is {found}x{found_h}, model expects {expected}x{expected}")]
    SizeMismatch {
        expected: usize,
        found: usize,
        found_h: usize,
    },
    #[error("label {0} outside the 24 categories")]
    BadLabel(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite parameter after epoch {0}")]
    NonFinite(usize),
    #[error("session {0} referenced by an event is missing")]
    MissingSession(u32),
    #[error(transparent)]
    Acuity(#[from] crate::acuity::AcuityError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
}

/// Network parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Network<f32>,
    pub momentum_buffers: Vec<Vec<f32>>,
    pub current_lr: f64,
    pub epoch: usize,
    /// Per-channel mean subtracted from `[0, 1]` pixels before the first
    /// convolution; set from the training split.
    pub input_mean: [f32; 3],
    /// Per-channel scale applied after mean subtraction (inverse standard
    /// deviation of the training split).
    pub input_scale: [f32; 3],
}

impl Model {
    pub fn new(config: &ModelConfig) -> Result<Self, LearnerError> {
        let net = Network::new(config)?;
        let momentum_buffers = net.zeros_like();
        Ok(Self {
            net,
            momentum_buffers,
            current_lr: 0.0,
            epoch: 0,
            input_mean: [0.0; 3],
            input_scale: [1.0; 3],
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    /// Normalized CHW input for an image already at `input_size`.
    pub fn input_from_image(&self, img: &Image) -> Result<Vec<f32>, LearnerError> {
        let s = self.config().input_size;
        if img.width() != s || img.height() != s {
            return Err(LearnerError::SizeMismatch {
                expected: s,
                found: img.width(),
                found_h: img.height(),
            });
        }
        let mut chw = image_to_chw(img);
        self.normalize_in_place(&mut chw);
        Ok(chw)
    }

    pub(crate) fn normalize_in_place(&self, chw: &mut [f32]) {
        let plane = chw.len() / 3;
        for (c, ch) in chw.chunks_exact_mut(plane).enumerate() {
            let (m, k) = (self.input_mean[c], self.input_scale[c]);
            for v in ch {
                *v = (*v - m) * k;
            }
        }
    }

    pub(crate) fn normalize_u8(&self, chw: &[u8], out: &mut Vec<f32>) {
        let plane = chw.len() / 3;
        out.clear();
        for (c, ch) in chw.chunks_exact(plane).enumerate() {
            let (m, k) = (self.input_mean[c], self.input_scale[c]);
            out.extend(ch.iter().map(|&b| (b as f32 / 255.0 - m) * k));
        }
    }

    /// Logits for a normalized CHW input.
    pub fn logits(&self, x: &[f32], ws: &mut Workspace<f32>) -> Vec<f64> {
        self.net.forward(x, ws).iter().map(|&v| v as f64).collect()
    }

    /// Class probabilities, one row per image.
    pub fn forward(&self, batch: &[Image]) -> Result<Vec<Vec<f64>>, LearnerError> {
        let mut ws = Workspace::new(self.config());
        batch
            .iter()
            .map(|img| {
                let x = self.input_from_image(img)?;
                Ok(softmax(&self.logits(&x, &mut ws)))
            })
            .collect()
    }

    /// Mean cross-entropy and gradients for images at `input_size`.
    pub fn loss_and_grads(
        &self,
        batch: &[Image],
        labels: &[Category],
    ) -> Result<(f64, Vec<Vec<f32>>), LearnerError> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(LearnerError::ShapeMismatch(format!(
                "{} images, {} labels",
                batch.len(),
                labels.len()
            )));
        }
        let labels = checked_labels(labels)?;
        let inputs = batch
            .iter()
            .map(|img| self.input_from_image(img))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&[f32]> = inputs.iter().map(|v| v.as_slice()).collect();
        Ok(self.net.loss_and_grads(&refs, &labels))
    }

    pub fn predict(&self, img: &Image) -> Result<Category, LearnerError> {
        let x = self.input_from_image(img)?;
        let mut ws = Workspace::new(self.config());
        Ok(argmax(&self.logits(&x, &mut ws)) as Category)
    }

    /// Classic momentum: `v <- momentum * v + g`, `theta <- theta - lr * v`.
    pub fn sgd_step(&mut self, grads: &[Vec<f32>], lr: f64, momentum: f64) -> Result<(), LearnerError> {
        if grads.len() != self.net.params.len()
            || grads.iter().zip(&self.net.params).any(|(g, p)| g.len() != p.data.len())
        {
            return Err(LearnerError::ShapeMismatch("gradient does not mirror parameters".into()));
        }
        for ((p, v), g) in self.net.params.iter_mut().zip(&mut self.momentum_buffers).zip(grads) {
            momentum_update(&mut p.data, v, g, lr as f32, momentum as f32);
        }
        Ok(())
    }

    /// Prediction for an 8-bit CHW input as produced by [`prepare_frame`].
    pub fn predict_u8(&self, chw: &[u8], ws: &mut Workspace<f32>) -> Category {
        let mut x = Vec::with_capacity(chw.len());
        self.normalize_u8(chw, &mut x);
        argmax(&self.logits(&x, ws)) as Category
    }

    pub fn all_finite(&self) -> bool {
        self.net.all_finite() && self.momentum_buffers.iter().flatten().all(|v| v.is_finite())
    }
}

pub fn momentum_update(theta: &mut [f32], v: &mut [f32], g: &[f32], lr: f32, momentum: f32) {
    for ((t, v), &g) in theta.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = momentum * *v + g;
        *t -= lr * *v;
    }
}

fn checked_labels(labels: &[Category]) -> Result<Vec<usize>, LearnerError> {
    labels
        .iter()
        .map(|&l| {
            let l = l as usize;
            if l < crate::scene::N_CATEGORIES {
                Ok(l)
            } else {
                Err(LearnerError::BadLabel(l))
            }
        })
        .collect()
}
