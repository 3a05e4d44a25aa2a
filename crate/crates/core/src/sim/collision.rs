//! Depth-scan obstacle gate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionParams {
    /// Points needed to flag a frame as blocked.
    pub n_stop: usize,
    /// Meters; a point counts when `x < x_stop` and `z < z_stop`.
    pub x_stop: f64,
    pub z_stop: f64,
    /// Blocked frames within the window that trigger a stop.
    pub n_detected: usize,
    pub n_window: usize,
    /// Seconds of unblocked frames before moving again.
    pub t_stop: f64,
    /// Points with `|x| < footprint_half_width` and `0 <= z < footprint_length`
    /// belong to the robot itself.
    pub footprint_half_width: f64,
    pub footprint_length: f64,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            n_stop: 10,
            x_stop: 0.5,
            z_stop: 2.0,
            n_detected: 4,
            n_window: 5,
            t_stop: 2.0,
            footprint_half_width: 0.2,
            footprint_length: 0.25,
        }
    }
}

impl CollisionParams {
    fn in_footprint(&self, (x, z): (f64, f64)) -> bool {
        x.abs() < self.footprint_half_width && (0.0..self.footprint_length).contains(&z)
    }

    /// Whether one scan (robot frame, x lateral, z forward) is blocked. The
    /// lateral test is one-sided, `x < x_stop`, exactly as parameterized.
    pub fn frame_blocked(&self, points: &[(f64, f64)]) -> bool {
        points
            .iter()
            .filter(|&&p| !self.in_footprint(p))
            .filter(|&&(x, z)| x < self.x_stop && z < self.z_stop)
            .count()
            >= self.n_stop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionTransition {
    None,
    Stop,
    Resume,
}

/// Sliding window of blocked flags plus the stop/clear timer.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMonitor {
    params: CollisionParams,
    window: VecDeque<bool>,
    stopped: bool,
    /// Consecutive unblocked frames while stopped, counting the current one.
    clear_frames: u64,
}

impl CollisionMonitor {
    pub fn new(params: CollisionParams) -> Self {
        Self {
            params,
            window: VecDeque::with_capacity(params.n_window),
            stopped: false,
            clear_frames: 0,
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Seconds since the first unblocked frame of the current clear run.
    pub fn clear_elapsed(&self, dt: f64) -> f64 {
        self.clear_frames.saturating_sub(1) as f64 * dt
    }

    /// Feeds one scan. The robot resumes on the frame where the clear run
    /// reaches `t_stop` seconds, measured from the first clear frame.
    pub fn update(&mut self, points: &[(f64, f64)], dt: f64) -> CollisionTransition {
        let blocked = self.params.frame_blocked(points);
        if self.window.len() == self.params.n_window {
            self.window.pop_front();
        }
        self.window.push_back(blocked);
        if !self.stopped {
            if self.window.iter().filter(|&&b| b).count() >= self.params.n_detected {
                self.stopped = true;
                self.clear_frames = 0;
                return CollisionTransition::Stop;
            }
            return CollisionTransition::None;
        }
        if blocked {
            self.clear_frames = 0;
            return CollisionTransition::None;
        }
        self.clear_frames += 1;
        if self.clear_elapsed(dt) >= self.params.t_stop - 1e-9 {
            self.stopped = false;
            self.clear_frames = 0;
            self.window.clear();
            return CollisionTransition::Resume;
        }
        CollisionTransition::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(n: usize, x: f64, z: f64) -> Vec<(f64, f64)> {
        vec![(x, z); n]
    }

    #[test]
    fn blocked_frame_rule() {
        let p = CollisionParams::default();
        assert!(p.frame_blocked(&pts(10, 0.3, 1.0)));
        assert!(!p.frame_blocked(&pts(9, 0.3, 1.0)));
        assert!(!p.frame_blocked(&pts(20, 0.6, 1.0)));
        assert!(!p.frame_blocked(&pts(20, 0.3, 2.5)));
        // footprint points are the robot itself
        assert!(!p.frame_blocked(&pts(20, 0.0, 0.1)));
        // the lateral test is one-sided
        assert!(p.frame_blocked(&pts(10, -1.5, 1.0)));
    }

    #[test]
    fn four_of_five_stops() {
        let mut m = CollisionMonitor::new(CollisionParams::default());
        let frames = [true, false, true, true];
        for b in frames {
            let scan = if b { pts(10, 0.3, 1.0) } else { vec![] };
            assert_eq!(m.update(&scan, 0.1), CollisionTransition::None);
        }
        assert_eq!(m.update(&pts(10, 0.3, 1.0), 0.1), CollisionTransition::Stop);
        assert!(m.is_stopped());
    }

    #[test]
    fn nine_points_never_stop() {
        let mut m = CollisionMonitor::new(CollisionParams::default());
        for _ in 0..50 {
            assert_eq!(m.update(&pts(9, 0.3, 1.0), 0.1), CollisionTransition::None);
        }
    }

    #[test]
    fn resumes_two_seconds_after_clearance() {
        let dt = 0.1;
        let mut m = CollisionMonitor::new(CollisionParams::default());
        for _ in 0..4 {
            m.update(&pts(10, 0.3, 1.0), dt);
        }
        assert!(m.is_stopped());
        // first clear frame is t = 0
        let mut resumed_at = None;
        for k in 0..40 {
            if m.update(&[], dt) == CollisionTransition::Resume {
                resumed_at = Some(k);
                break;
            }
        }
        assert_eq!(resumed_at, Some(20));
        assert!(!m.is_stopped());
    }

    #[test]
    fn reblocking_restarts_the_timer() {
        let dt = 0.25;
        let mut m = CollisionMonitor::new(CollisionParams::default());
        for _ in 0..4 {
            m.update(&pts(10, 0.3, 1.0), dt);
        }
        for _ in 0..5 {
            m.update(&[], dt);
        }
        m.update(&pts(10, 0.3, 1.0), dt);
        let n = (0..20).position(|_| m.update(&[], dt) == CollisionTransition::Resume);
        assert_eq!(n, Some(8));
    }
}
