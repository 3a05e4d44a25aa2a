//! Discrete-time simulation of the robot's line following and picture taking.
//!
//! Each step renders the line camera from the current pose, reads the depth
//! scan and the three face counts for that step, runs the behavior state
//! machine, logs one record and integrates the pose with the command.

mod collision;
mod fsm;
mod line;
mod scenario;
mod vote;

use serde::{Deserialize, Serialize};

pub use collision::{CollisionMonitor, CollisionParams, CollisionTransition};
pub use fsm::{BehaviorState, Event, SimRecord, Simulator};
pub use line::{
    line_centroid, slice_start, steer, CameraModel, Command, ControllerParams, LineImage, IMAGE_H,
    IMAGE_W, SLICE_HEIGHT,
};
pub use scenario::{
    builtin_scenario, read_event_log, run_scenario, write_event_log, FaceStreams, ObstacleWindow,
    Scenario, SimError, SimOutcome, BUILTIN_SCENARIOS,
};
pub use vote::{camera_vote, frame_winner, Camera, PictureTakingParams};

/// Planar pose; `theta` is counter-clockwise from +x and is not wrapped, so
/// net rotation can be read off directly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    /// One explicit Euler step.
    pub fn integrate(&self, cmd: &Command, dt: f64) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self {
            x: self.x + cmd.v * c * dt,
            y: self.y + cmd.v * s * dt,
            theta: self.theta + cmd.omega * dt,
        }
    }
}
