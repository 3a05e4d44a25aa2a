//! Scenario files, built-in scenarios and the JSON Lines event log.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::collision::CollisionParams;
use super::fsm::{Event, SimRecord, Simulator};
use super::line::{CameraModel, ControllerParams};
use super::vote::PictureTakingParams;
use super::Pose;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown built-in scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario/log JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Obstacle points (robot frame: x lateral, z forward, meters) present for
/// steps `start_step..end_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleWindow {
    pub start_step: usize,
    pub end_step: usize,
    pub points: Vec<[f64; 2]>,
}

/// Per-step face counts for each camera; steps past the end count as zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceStreams {
    pub left: Vec<u32>,
    pub front: Vec<u32>,
    pub right: Vec<u32>,
}

impl FaceStreams {
    pub fn counts(&self, step: usize) -> [u32; 3] {
        let at = |v: &Vec<u32>| v.get(step).copied().unwrap_or(0);
        [at(&self.left), at(&self.front), at(&self.right)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub dt: f64,
    pub max_steps: usize,
    /// Course polyline in world meters.
    pub course: Vec<[f64; 2]>,
    pub start: Pose,
    /// The course counts as complete once the robot is this close to its last vertex.
    pub finish_radius: f64,
    pub controller: ControllerParams,
    pub camera: CameraModel,
    pub collision: CollisionParams,
    pub picture: PictureTakingParams,
    /// rad/s for in-place turns.
    pub rotation_speed: f64,
    /// Seconds of line following without voting after a burst.
    pub transfer_pause: f64,
    pub obstacles: Vec<ObstacleWindow>,
    pub faces: FaceStreams,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            dt: 0.1,
            max_steps: 1000,
            course: vec![[0.0, 0.0], [10.0, 0.0]],
            start: Pose::default(),
            finish_radius: 0.6,
            controller: ControllerParams::default(),
            camera: CameraModel::default(),
            collision: CollisionParams::default(),
            picture: PictureTakingParams::default(),
            rotation_speed: 0.5,
            transfer_pause: 5.0,
            obstacles: Vec::new(),
            faces: FaceStreams::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::Invalid(m.to_owned()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.dt) {
            return fail("dt must be positive");
        }
        if self.course.len() < 2 || self.course.iter().flatten().any(|v| !v.is_finite()) {
            return fail("course needs at least two finite vertices");
        }
        if !positive(self.controller.k_p) || !positive(self.controller.v_lin) {
            return fail("k_p and v_lin must be positive");
        }
        if !positive(self.rotation_speed) {
            return fail("rotation_speed must be positive");
        }
        if self.collision.n_detected > self.collision.n_window || self.collision.n_window == 0 {
            return fail("collision n_detected must not exceed a nonzero n_window");
        }
        if self.picture.n_max > self.picture.n_window || self.picture.n_max == 0 {
            return fail("picture n_max must be positive and not exceed n_window");
        }
        if self.transfer_pause < 0.0 || self.collision.t_stop < 0.0 {
            return fail("durations must be non-negative");
        }
        if self.obstacles.iter().flat_map(|o| &o.points).flatten().any(|v| !v.is_finite()) {
            return fail("obstacle points must be finite");
        }
        Ok(())
    }

    /// Depth scan at `step`.
    pub fn scan(&self, step: usize) -> Vec<(f64, f64)> {
        self.obstacles
            .iter()
            .filter(|o| (o.start_step..o.end_step).contains(&step))
            .flat_map(|o| o.points.iter().map(|p| (p[0], p[1])))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub const BUILTIN_SCENARIOS: [&str; 5] = ["straight", "left_cluster", "front_cluster", "collision", "no_faces"];

/// Named scenarios on a 12 m straight course.
pub fn builtin_scenario(name: &str) -> Result<Scenario, SimError> {
    let base = Scenario {
        name: name.to_owned(),
        course: vec![[0.0, 0.0], [12.0, 0.0]],
        max_steps: 600,
        ..Default::default()
    };
    let cluster = |from: usize, to: usize| (0..to).map(|k| u32::from(k >= from) * 2).collect::<Vec<_>>();
    let s = match name {
        // 2 cm left of the line: about 32 px of centroid error at the start
        "straight" => Scenario {
            start: Pose { x: 0.0, y: 0.02, theta: 0.0 },
            ..base
        },
        "left_cluster" => Scenario {
            faces: FaceStreams {
                left: cluster(30, 45),
                front: vec![0; 45],
                right: (0..45).map(|k| u32::from(k % 4 == 0)).collect(),
            },
            ..base
        },
        "front_cluster" => Scenario {
            faces: FaceStreams {
                front: cluster(30, 45),
                ..Default::default()
            },
            ..base
        },
        "collision" => Scenario {
            obstacles: vec![ObstacleWindow {
                start_step: 20,
                end_step: 40,
                points: (0..12).map(|i| [-0.2 + 0.04 * i as f64, 1.0]).collect(),
            }],
            ..base
        },
        "no_faces" => base,
        other => return Err(SimError::UnknownScenario(other.to_owned())),
    };
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub records: Vec<SimRecord>,
    pub finished: bool,
}

impl SimOutcome {
    pub fn events(&self) -> impl Iterator<Item = (&SimRecord, &Event)> {
        self.records.iter().flat_map(|r| r.events.iter().map(move |e| (r, e)))
    }

    pub fn shutter_count(&self) -> usize {
        self.events()
            .filter(|(_, e)| matches!(e, Event::Shutter { .. }))
            .count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Runs until the state machine finishes or `max_steps` is reached.
pub fn run_scenario(scenario: &Scenario) -> Result<SimOutcome, SimError> {
    scenario.validate()?;
    let mut sim = Simulator::new(scenario);
    let mut records = Vec::new();
    while records.len() < scenario.max_steps && !sim.is_finished() {
        records.push(sim.step());
    }
    Ok(SimOutcome {
        finished: sim.is_finished(),
        records,
    })
}

pub fn write_event_log(outcome: &SimOutcome, path: impl AsRef<Path>) -> Result<(), SimError> {
    let mut f = fs::File::create(path)?;
    f.write_all(outcome.to_jsonl().as_bytes())?;
    Ok(())
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<SimRecord>, SimError> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(SimError::from))
        .collect()
}
