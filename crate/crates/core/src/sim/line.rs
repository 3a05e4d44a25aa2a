//! Synthetic line camera, slice centroid and the proportional steering law.

use serde::{Deserialize, Serialize};

use super::Pose;

pub const IMAGE_W: usize = 640;
pub const IMAGE_H: usize = 480;
pub const SLICE_HEIGHT: usize = 20;

/// First row of the sensing slice, `floor(0.75 · height)`.
pub const fn slice_start(height: usize) -> usize {
    height * 3 / 4
}

/// Binary mask after color thresholding; nonzero bytes are line pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineImage {
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl LineImage {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.mask[y * self.width + x] = u8::from(on);
    }

    pub fn fill_row(&mut self, y: usize, x0: usize, x1: usize) {
        self.mask[y * self.width + x0..y * self.width + x1].fill(1);
    }
}

/// Horizontal centroid `m10 / m00` of the 20-row slice starting at 75% of
/// the height, or `None` when the slice is empty.
pub fn line_centroid(image: &LineImage) -> Option<f64> {
    let start = slice_start(image.height);
    let end = (start + SLICE_HEIGHT).min(image.height);
    let (mut m00, mut m10) = (0u64, 0u64);
    for y in start..end {
        for x in 0..image.width {
            if image.get(x, y) {
                m00 += 1;
                m10 += x as u64;
            }
        }
    }
    (m00 > 0).then(|| m10 as f64 / m00 as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// rad/s per unit of normalized centroid error.
    pub k_p: f64,
    /// m/s.
    pub v_lin: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self { k_p: 1.0, v_lin: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
}

impl Command {
    pub const STOP: Self = Self { v: 0.0, omega: 0.0 };
}

/// `omega = -k_p · (cx - W/2) / (W/2)`: a line right of center turns the
/// robot clockwise (negative omega).
pub fn steer(centroid_x: f64, width: usize, params: &ControllerParams) -> Command {
    let half = width as f64 / 2.0;
    Command {
        v: params.v_lin,
        omega: -params.k_p * (centroid_x - half) / half,
    }
}

/// Downward-looking camera on a flat floor. Row `r` sees the floor at
/// distance `lookahead + (center_row - r) · meters_per_row` ahead, across a
/// view `2 · half_width_per_meter · distance` wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub lookahead: f64,
    pub center_row: f64,
    pub meters_per_row: f64,
    pub half_width_per_meter: f64,
    pub tape_half_width: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            lookahead: 0.5,
            center_row: 370.0,
            meters_per_row: 0.004,
            half_width_per_meter: 0.4,
            tape_half_width: 0.025,
        }
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Signed rightward offset of the course where the robot's lateral line at
/// `distance` ahead crosses it; the crossing nearest the optical axis wins.
fn course_offset(course: &[[f64; 2]], pose: &Pose, distance: f64) -> Option<f64> {
    let (s, c) = pose.theta.sin_cos();
    let p = [pose.x + distance * c, pose.y + distance * s];
    let right = [s, -c];
    let mut best: Option<f64> = None;
    for seg in course.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let den = cross(right, e);
        if den.abs() < 1e-12 {
            continue;
        }
        let w = [a[0] - p[0], a[1] - p[1]];
        let u = cross(w, right) / den;
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let off = cross(w, e) / den;
        if best.is_none_or(|b| off.abs() < b.abs()) {
            best = Some(off);
        }
    }
    best
}

impl CameraModel {
    pub fn distance(&self, row: usize) -> f64 {
        self.lookahead + (self.center_row - row as f64) * self.meters_per_row
    }

    /// Renders the course as the camera would see it from `pose`.
    pub fn render(&self, course: &[[f64; 2]], pose: &Pose) -> LineImage {
        self.render_rows(course, pose, 0..IMAGE_H)
    }

    /// Like [`render`](Self::render) but only fills `rows`.
    pub fn render_rows(
        &self,
        course: &[[f64; 2]],
        pose: &Pose,
        rows: std::ops::Range<usize>,
    ) -> LineImage {
        let mut img = LineImage::blank(IMAGE_W, IMAGE_H);
        let half_cols = IMAGE_W as f64 / 2.0;
        for row in rows {
            let d = self.distance(row);
            if d <= 0.0 {
                continue;
            }
            let Some(off) = course_offset(course, pose, d) else {
                continue;
            };
            let h = self.half_width_per_meter * d;
            // column c images lateral offset (c - W/2) / (W/2) · h
            let col = |s: f64| s / h * half_cols + half_cols;
            let lo = col(off - self.tape_half_width).ceil().max(0.0);
            let hi = (col(off + self.tape_half_width).floor() + 1.0).min(IMAGE_W as f64);
            if lo < hi {
                img.fill_row(row, lo as usize, hi as usize);
            }
        }
        img
    }

    /// The slice rows only, which is all the controller reads.
    pub fn render_slice(&self, course: &[[f64; 2]], pose: &Pose) -> LineImage {
        let s = slice_start(IMAGE_H);
        self.render_rows(course, pose, s..s + SLICE_HEIGHT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical_line(x0: usize, x1: usize) -> LineImage {
        let mut img = LineImage::blank(IMAGE_W, IMAGE_H);
        for y in 0..IMAGE_H {
            img.fill_row(y, x0, x1);
        }
        img
    }

    #[test]
    fn centroid_examples() {
        let c = line_centroid(&vertical_line(315, 325)).unwrap();
        assert!((c - 320.0).abs() <= 0.5);
        let mut img = LineImage::blank(IMAGE_W, IMAGE_H);
        for y in 360..380 {
            img.set(100, y, true);
            img.set(200, y, true);
        }
        assert_eq!(line_centroid(&img), Some(150.0));
        assert_eq!(line_centroid(&LineImage::blank(IMAGE_W, IMAGE_H)), None);
        // pixels outside the slice are ignored
        let mut outside = LineImage::blank(IMAGE_W, IMAGE_H);
        outside.set(5, 359, true);
        outside.set(5, 380, true);
        assert_eq!(line_centroid(&outside), None);
    }

    #[test]
    fn slice_geometry() {
        assert_eq!(slice_start(480), 360);
    }

    #[test]
    fn steer_examples() {
        let p = ControllerParams::default();
        assert_eq!(steer(320.0, 640, &p), Command { v: 0.3, omega: 0.0 });
        assert_eq!(steer(640.0, 640, &p).omega, -1.0);
        assert_eq!(steer(0.0, 640, &p).omega, 1.0);
    }

    #[test]
    fn centered_robot_sees_centered_line() {
        let course = [[0.0, 0.0], [10.0, 0.0]];
        let cam = CameraModel::default();
        let img = cam.render(&course, &Pose::default());
        assert_eq!(line_centroid(&img), Some(320.0));
        assert_eq!(cam.render_slice(&course, &Pose::default()), {
            let mut only = LineImage::blank(IMAGE_W, IMAGE_H);
            for y in 360..380 {
                for x in 0..IMAGE_W {
                    only.set(x, y, img.get(x, y));
                }
            }
            only
        });
    }

    #[test]
    fn line_to_the_right_appears_right() {
        // robot 3 cm left of the line (positive y), heading along it
        let course = [[0.0, 0.0], [10.0, 0.0]];
        let pose = Pose { x: 1.0, y: 0.03, theta: 0.0 };
        let c = line_centroid(&CameraModel::default().render(&course, &pose)).unwrap();
        assert!(c > 320.0);
        assert_eq!(course_offset(&course, &pose, 0.5).map(|o| (o * 1e9).round() / 1e9), Some(0.03));
    }

    #[test]
    fn steering_moves_centroid_toward_center() {
        // one-step closed loop: apply the command and re-render
        let course = [[0.0, 0.0], [10.0, 0.0]];
        let cam = CameraModel::default();
        for y0 in [0.05, -0.05, 0.01, -0.02] {
            let pose = Pose { x: 1.0, y: y0, theta: 0.0 };
            let c0 = line_centroid(&cam.render(&course, &pose)).unwrap();
            let cmd = steer(c0, IMAGE_W, &ControllerParams::default());
            let next = pose.integrate(&cmd, 0.1);
            let c1 = line_centroid(&cam.render(&course, &next)).unwrap();
            assert!((c1 - 320.0).abs() < (c0 - 320.0).abs(), "y0 {y0}: {c0} -> {c1}");
        }
    }

    #[test]
    fn line_out_of_view() {
        let course = [[0.0, 0.0], [10.0, 0.0]];
        let pose = Pose { x: 1.0, y: 0.0, theta: std::f64::consts::FRAC_PI_2 };
        assert_eq!(line_centroid(&CameraModel::default().render(&course, &pose)), None);
    }
}
