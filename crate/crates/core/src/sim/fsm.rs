use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::collision::{CollisionMonitor, CollisionTransition};
use super::line::{line_centroid, steer, Command, IMAGE_W};
use super::scenario::Scenario;
use super::vote::{camera_vote, frame_winner, Camera};
use super::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BehaviorState {
    FollowLine,
    /// Halted by the obstacle gate; `pause_left` is the transfer pause that
    /// was interrupted, if any.
    Stopped { pause_left: Option<f64> },
    /// `remaining` is the signed rotation still to do, in radians.
    RotateToSubject { camera: Camera, remaining: f64 },
    BurstAndRotateBack {
        camera: Camera,
        shots_taken: usize,
        rotated_back: f64,
    },
    /// Line following without voting while pictures transfer.
    TransferPause { remaining: f64 },
    Finished,
}

impl BehaviorState {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FollowLine => "follow_line",
            Self::Stopped { .. } => "stopped",
            Self::RotateToSubject { .. } => "rotate_to_subject",
            Self::BurstAndRotateBack { .. } => "burst_and_rotate_back",
            Self::TransferPause { .. } => "transfer_pause",
            Self::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    VoteWin { camera: Camera },
    RotationDone { camera: Camera },
    Shutter { camera: Camera, shot: usize },
    LineReacquired,
    /// Heading relative to the heading held when the vote was won.
    PauseEnd { heading_change_deg: f64 },
    Stopped,
    Resumed,
    CourseComplete,
    LineLost,
    GaveUp,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub step: usize,
    pub t: f64,
    /// State that handled this step.
    pub state: String,
    pub command: Command,
    pub events: Vec<Event>,
    /// Pose at the start of the step.
    pub pose: Pose,
    pub centroid: Option<f64>,
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    state: BehaviorState,
    pose: Pose,
    step: usize,
    monitor: CollisionMonitor,
    votes: VecDeque<Option<Camera>>,
    vote_heading: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            state: BehaviorState::FollowLine,
            pose: scenario.start,
            step: 0,
            monitor: CollisionMonitor::new(scenario.collision),
            votes: VecDeque::with_capacity(scenario.picture.n_window),
            vote_heading: scenario.start.theta,
        }
    }

    pub fn state(&self) -> BehaviorState {
        self.state
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn is_finished(&self) -> bool {
        self.state == BehaviorState::Finished
    }

    fn centroid(&self) -> Option<f64> {
        let img = self.scenario.camera.render_slice(&self.scenario.course, &self.pose);
        line_centroid(&img)
    }

    fn near_finish(&self) -> bool {
        let end = self.scenario.course.last().expect("validated course");
        (self.pose.x - end[0]).hypot(self.pose.y - end[1]) < self.scenario.finish_radius
    }

    /// Advances one step and returns its log record.
    pub fn step(&mut self) -> SimRecord {
        let sc = self.scenario;
        let dt = sc.dt;
        let k = self.step;
        let pose = self.pose;
        let mut handled = self.state.name();
        let mut events = Vec::new();
        let mut centroid = None;

        let command = match self.state {
            BehaviorState::Finished => Command::STOP,
            BehaviorState::FollowLine
            | BehaviorState::TransferPause { .. }
            | BehaviorState::Stopped { .. } => {
                let pause_left = match self.state {
                    BehaviorState::TransferPause { remaining } => Some(remaining),
                    BehaviorState::Stopped { pause_left } => pause_left,
                    _ => None,
                };
                match self.monitor.update(&sc.scan(k), dt) {
                    CollisionTransition::Stop => {
                        events.push(Event::Stopped);
                        self.state = BehaviorState::Stopped { pause_left };
                    }
                    CollisionTransition::Resume => {
                        events.push(Event::Resumed);
                        self.state = match pause_left {
                            Some(remaining) => BehaviorState::TransferPause { remaining },
                            None => BehaviorState::FollowLine,
                        };
                    }
                    CollisionTransition::None => {}
                }
                handled = self.state.name();
                if matches!(self.state, BehaviorState::Stopped { .. }) {
                    Command::STOP
                } else {
                    centroid = self.centroid();
                    self.follow(centroid, k, &mut events)
                }
            }
            BehaviorState::RotateToSubject { camera, remaining } => {
                let (omega, last) = self.rotation_rate(remaining);
                if last {
                    events.push(Event::RotationDone { camera });
                    self.state = BehaviorState::BurstAndRotateBack {
                        camera,
                        shots_taken: 0,
                        rotated_back: 0.0,
                    };
                } else {
                    self.state = BehaviorState::RotateToSubject {
                        camera,
                        remaining: remaining - omega * dt,
                    };
                }
                Command { v: 0.0, omega }
            }
            BehaviorState::BurstAndRotateBack {
                camera,
                mut shots_taken,
                rotated_back,
            } => {
                if shots_taken < sc.picture.n_burst {
                    shots_taken += 1;
                    events.push(Event::Shutter { camera, shot: shots_taken });
                }
                centroid = self.centroid();
                let target = sc.picture.rotation(camera).abs();
                if centroid.is_some() && shots_taken == sc.picture.n_burst {
                    events.push(Event::LineReacquired);
                    self.state = BehaviorState::TransferPause {
                        remaining: sc.transfer_pause,
                    };
                    Command::STOP
                } else if centroid.is_some() {
                    // line found before the burst is over: hold still and keep shooting
                    self.state = BehaviorState::BurstAndRotateBack {
                        camera,
                        shots_taken,
                        rotated_back,
                    };
                    Command::STOP
                } else if rotated_back > target + PI {
                    events.push(Event::GaveUp);
                    self.state = BehaviorState::Finished;
                    Command::STOP
                } else {
                    let back = -sc.picture.rotation(camera).signum() * sc.rotation_speed;
                    self.state = BehaviorState::BurstAndRotateBack {
                        camera,
                        shots_taken,
                        rotated_back: rotated_back + sc.rotation_speed * dt,
                    };
                    Command { v: 0.0, omega: back }
                }
            }
        };

        let record = SimRecord {
            step: k,
            t: k as f64 * dt,
            state: handled.to_owned(),
            command,
            events,
            pose,
            centroid,
        };
        self.pose = self.pose.integrate(&command, dt);
        self.step += 1;
        record
    }

    /// Constant-rate turn whose last step lands exactly on the target.
    fn rotation_rate(&self, remaining: f64) -> (f64, bool) {
        let max_step = self.scenario.rotation_speed * self.scenario.dt;
        if remaining.abs() <= max_step {
            (remaining / self.scenario.dt, true)
        } else {
            (remaining.signum() * self.scenario.rotation_speed, false)
        }
    }

    fn follow(&mut self, centroid: Option<f64>, k: usize, events: &mut Vec<Event>) -> Command {
        let sc = self.scenario;
        if self.near_finish() {
            events.push(Event::CourseComplete);
            self.state = BehaviorState::Finished;
            return Command::STOP;
        }
        let Some(cx) = centroid else {
            events.push(Event::LineLost);
            self.state = BehaviorState::Finished;
            return Command::STOP;
        };
        let command = steer(cx, IMAGE_W, &sc.controller);
        match self.state {
            BehaviorState::FollowLine => {
                if self.votes.len() == sc.picture.n_window {
                    self.votes.pop_front();
                }
                self.votes.push_back(frame_winner(sc.faces.counts(k)));
                if let Some(camera) = camera_vote(&self.votes, &sc.picture) {
                    events.push(Event::VoteWin { camera });
                    self.votes.clear();
                    self.vote_heading = self.pose.theta;
                    self.state = BehaviorState::RotateToSubject {
                        camera,
                        remaining: sc.picture.rotation(camera),
                    };
                }
            }
            BehaviorState::TransferPause { remaining } => {
                let left = remaining - sc.dt;
                if left <= 1e-9 {
                    events.push(Event::PauseEnd {
                        heading_change_deg: (self.pose.theta - self.vote_heading).to_degrees(),
                    });
                    self.state = BehaviorState::FollowLine;
                } else {
                    self.state = BehaviorState::TransferPause { remaining: left };
                }
            }
            _ => unreachable!("follow is only called while driving"),
        }
        command
    }
}
