//! Fitting the composition thresholds to a labeled training set.
//!
//! A genome is the threshold vector in `[0, 1]^n`, ordered
//! `x_min, x_max, y_min, y_max, occ_min, occ_max[, r_min, p_min]`.
//! Fitness is training-set classification accuracy.

mod ga;
mod grid;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::{
    baseline_score, heuristic_score, quality_gate, BaselineThresholds, FaceGeometry,
    HeuristicThresholds, ScoreError,
};
use crate::model::{Label, PictureRecord};

pub use ga::{ga_optimize, ga_optimize_with_population, repair, GaConfig};
pub use grid::{grid_search_oracle, MAX_GRID_POINTS};

#[derive(Debug, Error)]
pub enum OptError {
    #[error("training set is empty")]
    EmptySet,
    #[error("picture {0:?} has no label")]
    Unlabeled(String),
    #[error("GA configuration: {0}")]
    Config(String),
    #[error("grid of {steps}^{dims} points exceeds the limit of {limit}")]
    GridTooLarge { steps: usize, dims: usize, limit: u64 },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Baseline,
    Heuristic,
}

impl ThresholdKind {
    pub fn genome_len(self) -> usize {
        match self {
            Self::Baseline => 6,
            Self::Heuristic => 8,
        }
    }
}

/// Threshold file contents, tagged with the scorer they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThresholdSet {
    Baseline(BaselineThresholds),
    Heuristic(HeuristicThresholds),
}

impl ThresholdSet {
    pub fn kind(&self) -> ThresholdKind {
        match self {
            Self::Baseline(_) => ThresholdKind::Baseline,
            Self::Heuristic(_) => ThresholdKind::Heuristic,
        }
    }

    pub fn genome(&self) -> Vec<f64> {
        match self {
            Self::Baseline(t) => t.to_array().to_vec(),
            Self::Heuristic(t) => t.to_array().to_vec(),
        }
    }

    /// Panics if `genome.len()` does not match `kind`.
    pub fn from_genome(kind: ThresholdKind, genome: &[f64]) -> Self {
        assert_eq!(genome.len(), kind.genome_len(), "genome length");
        match kind {
            ThresholdKind::Baseline => {
                Self::Baseline(BaselineThresholds::from_array(genome.try_into().unwrap()))
            }
            ThresholdKind::Heuristic => {
                Self::Heuristic(HeuristicThresholds::from_array(genome.try_into().unwrap()))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        match self {
            Self::Baseline(t) => t.validate(),
            Self::Heuristic(t) => t.validate(),
        }
    }
}

/// Good iff the picture passes every gate of the chosen scorer.
pub fn classify_with_thresholds(
    picture: &PictureRecord,
    thresholds: &ThresholdSet,
) -> Result<Label, ScoreError> {
    let passed = match thresholds {
        ThresholdSet::Baseline(t) => baseline_score(picture, t).passed,
        ThresholdSet::Heuristic(t) => heuristic_score(picture, t)?.passed,
    };
    Ok(Label::from_good(passed))
}

pub fn accuracy(thresholds: &ThresholdSet, pictures: &[PictureRecord]) -> Result<f64, OptError> {
    if pictures.is_empty() {
        return Err(OptError::EmptySet);
    }
    let mut hits = 0usize;
    for p in pictures {
        let label = p.label.ok_or_else(|| OptError::Unlabeled(p.picture_id.clone()))?;
        if classify_with_thresholds(p, thresholds)? == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / pictures.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub best_thresholds: ThresholdSet,
    pub best_accuracy: f64,
    /// Per-generation population statistics (generation 0 is the initial
    /// population). Empty for the grid oracle.
    pub curve: Vec<GenerationStats>,
    pub evaluations: u64,
}

impl FitnessReport {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("generation,best,mean\n");
        for g in &self.curve {
            writeln!(out, "{},{},{}", g.generation, g.best, g.mean).unwrap();
        }
        out
    }

    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<(), OptError> {
        fs::write(path, self.curve_csv())?;
        Ok(())
    }
}

/// Training pictures reduced to what the gates look at. Face scores are read
/// once here since they do not depend on the thresholds.
struct Prepared {
    kind: ThresholdKind,
    pictures: Vec<PreparedPicture>,
}

struct PreparedPicture {
    good: bool,
    faces: Vec<FaceGeometry>,
    scores: Vec<f64>,
}

impl Prepared {
    fn new(pictures: &[PictureRecord], kind: ThresholdKind) -> Result<Self, OptError> {
        if pictures.is_empty() {
            return Err(OptError::EmptySet);
        }
        let mut out = Vec::with_capacity(pictures.len());
        for p in pictures {
            let label = p.label.ok_or_else(|| OptError::Unlabeled(p.picture_id.clone()))?;
            let scores = match kind {
                ThresholdKind::Baseline => Vec::new(),
                ThresholdKind::Heuristic => crate::composition::face_scores(p)?,
            };
            out.push(PreparedPicture {
                good: label.is_good(),
                faces: p
                    .faces
                    .iter()
                    .map(|f| FaceGeometry::new(&f.bbox, p.width, p.height))
                    .collect(),
                scores,
            });
        }
        Ok(Self {
            kind,
            pictures: out,
        })
    }

    fn accuracy(&self, genome: &[f64]) -> f64 {
        let base = BaselineThresholds::from_array(genome[..6].try_into().unwrap());
        let hits = self
            .pictures
            .iter()
            .filter(|p| {
                let mut pass = !p.faces.is_empty() && p.faces.iter().all(|g| g.passes(&base));
                if pass && self.kind == ThresholdKind::Heuristic {
                    pass = quality_gate(&p.scores, genome[6], genome[7]);
                }
                pass == p.good
            })
            .count();
        hits as f64 / self.pictures.len() as f64
    }
}

fn norm2(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum()
}

/// Ordering used everywhere a best genome is picked: higher accuracy, then
/// smaller L2 norm, then lexicographically smaller genome.
fn rank(a: (f64, &[f64]), b: (f64, &[f64])) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| norm2(a.1).total_cmp(&norm2(b.1)))
        .then_with(|| {
            a.1.iter()
                .zip(b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}
