//! Turning naming events into training inputs.

use serde::{Deserialize, Serialize};

use super::resize::resize_bilinear;
use super::LearnerError;
use crate::acuity::{foveate, AcuityParams};
use crate::events::NamingEvent;
use crate::image::{quantize, Image};
use crate::scene::{Category, Session};

/// Interleaved RGB to planar CHW.
pub fn image_to_chw(img: &Image) -> Vec<f32> {
    let n = img.width() * img.height();
    let mut out = vec![0.0; 3 * n];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        out[i] = px[0];
        out[n + i] = px[1];
        out[2 * n + i] = px[2];
    }
    out
}

/// Frames of one event after foveation and resizing, stored as 8-bit CHW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedEvent {
    pub target: Category,
    pub frames: Vec<Vec<u8>>,
}

/// Render, foveate around the recorded gaze, resize, quantize.
pub fn prepare_frame(
    session: &Session,
    frame: usize,
    acuity: &AcuityParams,
    input_size: usize,
) -> Result<Vec<u8>, LearnerError> {
    let rec = &session.frames[frame];
    let img = session.render_frame(frame).image;
    let fov = foveate(&img, [rec.gaze.x as f64, rec.gaze.y as f64], acuity)?;
    let small = resize_bilinear(&fov.image, input_size);
    Ok(image_to_chw(&small).into_iter().map(quantize).collect())
}

/// Every `frame_stride`-th frame of the event window, starting at onset.
pub fn prepare_event(
    event: &NamingEvent,
    session: &Session,
    acuity: &AcuityParams,
    input_size: usize,
    frame_stride: usize,
) -> Result<PreparedEvent, LearnerError> {
    let stride = frame_stride.max(1);
    let frames = (0..event.frame_count)
        .step_by(stride)
        .map(|k| prepare_frame(session, event.frame_start + k, acuity, input_size))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PreparedEvent {
        target: event.target_category,
        frames,
    })
}
