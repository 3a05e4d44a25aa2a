//! Camera voting over recent face counts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Camera {
    Left,
    Front,
    Right,
}

impl Camera {
    pub const ALL: [Camera; 3] = [Camera::Left, Camera::Front, Camera::Right];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PictureTakingParams {
    pub n_max: usize,
    pub n_window: usize,
    /// Degrees.
    pub theta_side: f64,
    pub theta_front: f64,
    pub n_burst: usize,
}

impl Default for PictureTakingParams {
    fn default() -> Self {
        Self {
            n_max: 7,
            n_window: 10,
            theta_side: 130.0,
            theta_front: 40.0,
            n_burst: 20,
        }
    }
}

impl PictureTakingParams {
    /// Signed rotation toward the subject in radians, counter-clockwise
    /// positive: left turns CCW, right and front turn CW.
    pub fn rotation(&self, camera: Camera) -> f64 {
        match camera {
            Camera::Left => self.theta_side.to_radians(),
            Camera::Right => -self.theta_side.to_radians(),
            Camera::Front => -self.theta_front.to_radians(),
        }
    }
}

/// Camera with strictly the most faces this frame; ties and empty frames
/// have no winner.
pub fn frame_winner(counts: [u32; 3]) -> Option<Camera> {
    let max = *counts.iter().max().unwrap();
    if max == 0 || counts.iter().filter(|&&c| c == max).count() > 1 {
        return None;
    }
    Camera::ALL.into_iter().zip(counts).find(|&(_, c)| c == max).map(|(cam, _)| cam)
}

/// A camera wins when it was the frame winner in at least `n_max` of the last
/// `n_window` frames.
pub fn camera_vote(history: &VecDeque<Option<Camera>>, params: &PictureTakingParams) -> Option<Camera> {
    let skip = history.len().saturating_sub(params.n_window);
    Camera::ALL.into_iter().find(|&cam| {
        history.iter().skip(skip).filter(|&&w| w == Some(cam)).count() >= params.n_max
    })
}
