//! Composition-rule picture scoring.
//!
//! Every face must sit inside normalized position bounds and cover a bounded
//! fraction of the frame. A picture that passes scores `Σ (1 - d_j)` (baseline)
//! or `Σ (1 - d_j) · r_j` (heuristic), where `d_j` is the face center's distance
//! to the image center normalized by the center-to-corner distance and `r_j` is
//! the face quality score. Scores are used for ranking only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoundingBox, PictureRecord};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("picture {picture_id:?}: face {face_index} has no quality score")]
    MissingFaceScore {
        picture_id: String,
        face_index: usize,
    },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

/// Position bounds (fractions of width/height) and the occupancy band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineThresholds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub occ_min: f64,
    pub occ_max: f64,
}

impl BaselineThresholds {
    /// Bounds that every face strictly inside the frame satisfies.
    pub const PERMISSIVE: Self = Self {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
        occ_min: 0.0,
        occ_max: 1.0,
    };

    pub fn validate(&self) -> Result<(), ScoreError> {
        let v = self.to_array();
        if v.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(ScoreError::InvalidThresholds(format!("{v:?} not all in [0, 1]")));
        }
        for (lo, hi, name) in [(v[0], v[1], "x"), (v[2], v[3], "y"), (v[4], v[5], "occ")] {
            if lo >= hi {
                return Err(ScoreError::InvalidThresholds(format!(
                    "{name}_min {lo} must be below {name}_max {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x_min, self.x_max, self.y_min, self.y_max, self.occ_min, self.occ_max]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            x_min: v[0],
            x_max: v[1],
            y_min: v[2],
            y_max: v[3],
            occ_min: v[4],
            occ_max: v[5],
        }
    }
}

/// Baseline bounds plus the face-quality floor `r_min` and the minimum
/// proportion `p_min` of faces that must clear it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicThresholds {
    #[serde(flatten)]
    pub baseline: BaselineThresholds,
    pub r_min: f64,
    pub p_min: f64,
}

impl HeuristicThresholds {
    pub fn validate(&self) -> Result<(), ScoreError> {
        self.baseline.validate()?;
        if !(0.0..=1.0).contains(&self.r_min) || !(0.0..=1.0).contains(&self.p_min) {
            return Err(ScoreError::InvalidThresholds(format!(
                "r_min {} and p_min {} must lie in [0, 1]",
                self.r_min, self.p_min
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 8] {
        let b = self.baseline.to_array();
        [b[0], b[1], b[2], b[3], b[4], b[5], self.r_min, self.p_min]
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            baseline: BaselineThresholds::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]),
            r_min: v[6],
            p_min: v[7],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PictureScore {
    pub passed: bool,
    pub score: f64,
}

impl PictureScore {
    pub const FAILED: Self = Self {
        passed: false,
        score: 0.0,
    };
}

pub fn face_center(bbox: &BoundingBox) -> (f64, f64) {
    (
        (bbox.x_tl as f64 + bbox.x_br as f64) / 2.0,
        (bbox.y_tl as f64 + bbox.y_br as f64) / 2.0,
    )
}

/// Distance from the face center to the image center, divided by the
/// center-to-corner distance.
pub fn center_distance(bbox: &BoundingBox, width: u32, height: u32) -> f64 {
    let (fx, fy) = face_center(bbox);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let num = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
    let den = cx * cx + cy * cy;
    // one rounding of the ratio before the root keeps d identical when every
    // coordinate is scaled by the same integer
    (num / den).sqrt()
}

/// Normalized quantities a face is gated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub occupancy: f64,
}

impl FaceGeometry {
    pub fn new(bbox: &BoundingBox, width: u32, height: u32) -> Self {
        let (w, h) = (width as f64, height as f64);
        Self {
            left: bbox.x_tl as f64 / w,
            right: bbox.x_br as f64 / w,
            top: bbox.y_tl as f64 / h,
            bottom: bbox.y_br as f64 / h,
            occupancy: (bbox.width() as f64 * bbox.height() as f64) / (w * h),
        }
    }

    pub fn passes(&self, t: &BaselineThresholds) -> bool {
        self.left > t.x_min
            && self.right < t.x_max
            && self.top > t.y_min
            && self.bottom < t.y_max
            && t.occ_min < self.occupancy
            && self.occupancy < t.occ_max
    }
}

/// All five position/occupancy inequalities, strict.
pub fn baseline_gate(bbox: &BoundingBox, width: u32, height: u32, t: &BaselineThresholds) -> bool {
    FaceGeometry::new(bbox, width, height).passes(t)
}

pub fn baseline_score(picture: &PictureRecord, t: &BaselineThresholds) -> PictureScore {
    if picture.faces.is_empty()
        || !picture
            .faces
            .iter()
            .all(|f| baseline_gate(&f.bbox, picture.width, picture.height, t))
    {
        return PictureScore::FAILED;
    }
    let score = picture
        .faces
        .iter()
        .map(|f| 1.0 - center_distance(&f.bbox, picture.width, picture.height))
        .sum();
    PictureScore {
        passed: true,
        score,
    }
}

/// Face scores of a picture, or the first face lacking one.
pub fn face_scores(picture: &PictureRecord) -> Result<Vec<f64>, ScoreError> {
    picture
        .faces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.score.ok_or_else(|| ScoreError::MissingFaceScore {
                picture_id: picture.picture_id.clone(),
                face_index: i,
            })
        })
        .collect()
}

/// Fraction of faces with `r > r_min` must itself exceed `p_min` (ties fail).
pub fn quality_gate(scores: &[f64], r_min: f64, p_min: f64) -> bool {
    if scores.is_empty() {
        return false;
    }
    let good = scores.iter().filter(|&&r| r > r_min).count();
    good as f64 / scores.len() as f64 > p_min
}

pub fn heuristic_score(
    picture: &PictureRecord,
    t: &HeuristicThresholds,
) -> Result<PictureScore, ScoreError> {
    let scores = face_scores(picture)?;
    if !baseline_score(picture, &t.baseline).passed
        || !quality_gate(&scores, t.r_min, t.p_min)
    {
        return Ok(PictureScore::FAILED);
    }
    let score = picture
        .faces
        .iter()
        .zip(&scores)
        .map(|(f, r)| (1.0 - center_distance(&f.bbox, picture.width, picture.height)) * r)
        .sum();
    Ok(PictureScore {
        passed: true,
        score,
    })
}
