//! End-to-end evaluation and selection across the three picture scorers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{classify_picture, render_abstract};
use crate::composition::{baseline_score, heuristic_score, BaselineThresholds, HeuristicThresholds};
use crate::face_quality::score_faces;
use crate::model::{BoundingBox, FaceCountCategory, PictureRecord};
use crate::selection::{crop_cascade, select_best, selection_entries, ScoredPicture, SelectionConstraints, SelectionEntry};
use crate::tinynet::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Heuristic,
    PictureCnn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Heuristic => "heuristic",
            Self::PictureCnn => "picture_cnn",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("no labeled pictures to evaluate")]
    EmptyTestSet,
    #[error("no scoring method configured")]
    NoMethods,
}

fn stage<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Models and thresholds available to a run; a method runs when its inputs
/// are present.
#[derive(Debug, Clone, Copy, Default)]
pub struct Scorers<'a> {
    pub face_model: Option<&'a NetworkModel>,
    pub baseline: Option<&'a BaselineThresholds>,
    pub heuristic: Option<&'a HeuristicThresholds>,
    pub picture_cnn: Option<&'a NetworkModel>,
}

impl Scorers<'_> {
    pub fn methods(&self) -> Vec<Method> {
        let mut m = Vec::new();
        if self.baseline.is_some() {
            m.push(Method::Baseline);
        }
        if self.heuristic.is_some() {
            m.push(Method::Heuristic);
        }
        if self.picture_cnn.is_some() {
            m.push(Method::PictureCnn);
        }
        m
    }

    /// Fills face scores with the face model when one is given.
    fn prepare(&self, pictures: &[PictureRecord]) -> Result<Vec<PictureRecord>, PipelineError> {
        let mut out = pictures.to_vec();
        if let Some(model) = self.face_model {
            for p in &mut out {
                score_faces(model, p).map_err(stage("face_quality"))?;
            }
        }
        Ok(out)
    }

    /// `(passed, score)` of one picture under one method.
    pub fn score(&self, method: Method, picture: &PictureRecord) -> Result<(bool, f64), PipelineError> {
        let missing = |what: &str| PipelineError::Stage {
            stage: "config",
            message: format!("{what} not provided"),
        };
        let needs_scores = |p: &PictureRecord| {
            match p.faces.iter().position(|f| f.score.is_none()) {
                Some(i) => Err(PipelineError::Stage {
                    stage: "face_quality",
                    message: format!(
                        "picture {:?}: face {i} has no quality score; supply a face model",
                        p.picture_id
                    ),
                }),
                None => Ok(()),
            }
        };
        match method {
            Method::Baseline => {
                let s = baseline_score(picture, self.baseline.ok_or_else(|| missing("baseline thresholds"))?);
                Ok((s.passed, s.score))
            }
            Method::Heuristic => {
                needs_scores(picture)?;
                let t = self.heuristic.ok_or_else(|| missing("heuristic thresholds"))?;
                let s = heuristic_score(picture, t).map_err(stage("composition"))?;
                Ok((s.passed, s.score))
            }
            Method::PictureCnn => {
                needs_scores(picture)?;
                let model = self.picture_cnn.ok_or_else(|| missing("picture model"))?;
                let img = render_abstract(picture).map_err(stage("abstraction"))?;
                let s = classify_picture(model, &img).map_err(stage("abstraction"))?;
                Ok((s >= 0.5, s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_good: usize,
    pub false_good: usize,
    pub true_bad: usize,
    pub false_bad: usize,
}

impl Confusion {
    fn add(&mut self, predicted_good: bool, actual_good: bool) {
        match (predicted_good, actual_good) {
            (true, true) => self.true_good += 1,
            (true, false) => self.false_good += 1,
            (false, false) => self.true_bad += 1,
            (false, true) => self.false_bad += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_good + self.false_good + self.true_bad + self.false_bad
    }

    /// `None` for an empty bucket.
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.true_good + self.true_bad) as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub accuracy: Option<f64>,
    pub confusion: Confusion,
}

impl From<Confusion> for Bucket {
    fn from(c: Confusion) -> Self {
        Self {
            count: c.total(),
            accuracy: c.accuracy(),
            confusion: c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub overall: Bucket,
    /// Keyed by `one`, `two`, `three_plus` and `no_faces`.
    pub by_category: BTreeMap<String, Bucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: String,
    pub pictures: usize,
    pub methods: Vec<MethodReport>,
}

pub const NO_FACES: &str = "no_faces";

fn bucket_name(p: &PictureRecord) -> String {
    FaceCountCategory::from_count(p.faces.len()).map_or_else(|| NO_FACES.to_owned(), |c| c.to_string())
}

/// Accuracy of every configured method on the labeled pictures, overall and
/// per face-count category.
pub fn evaluate(pictures: &[PictureRecord], scorers: &Scorers) -> Result<EvaluationReport, PipelineError> {
    let methods = scorers.methods();
    if methods.is_empty() {
        return Err(PipelineError::NoMethods);
    }
    let labeled: Vec<PictureRecord> = pictures.iter().filter(|p| p.label.is_some()).cloned().collect();
    if labeled.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let prepared = scorers.prepare(&labeled)?;
    let mut reports = Vec::new();
    for method in methods {
        let mut overall = Confusion::default();
        let mut by: BTreeMap<String, Confusion> = FaceCountCategory::ALL
            .iter()
            .map(|c| c.to_string())
            .chain([NO_FACES.to_owned()])
            .map(|k| (k, Confusion::default()))
            .collect();
        for p in &prepared {
            let (good, _) = scorers.score(method, p)?;
            let actual = p.label.expect("filtered").is_good();
            overall.add(good, actual);
            by.get_mut(&bucket_name(p)).expect("all buckets present").add(good, actual);
        }
        reports.push(MethodReport {
            method,
            overall: overall.into(),
            by_category: by.into_iter().map(|(k, c)| (k, c.into())).collect(),
        });
    }
    Ok(EvaluationReport {
        version: crate::VERSION.to_owned(),
        pictures: prepared.len(),
        methods: reports,
    })
}

fn crop_face(b: &BoundingBox, x0: u32, y0: u32, x1: u32, y1: u32) -> Option<BoundingBox> {
    let (a, c) = (b.x_tl.max(x0), b.x_br.min(x1));
    let (d, e) = (b.y_tl.max(y0), b.y_br.min(y1));
    if a >= c || d >= e {
        return None;
    }
    BoundingBox::new(a - x0, d - y0, c - x0, e - y0).ok()
}

/// The picture followed by one record per crop of its cascade, with ids
/// `<id>#c<k>`. Faces crossing a crop edge are clipped, faces outside it
/// dropped. Crops carry no label.
pub fn expand_crops(picture: &PictureRecord) -> Vec<PictureRecord> {
    let plan = crop_cascade(picture.width, picture.height);
    let mut out = vec![picture.clone()];
    for (k, r) in plan.rects().enumerate() {
        let faces = picture
            .faces
            .iter()
            .filter_map(|f| {
                crop_face(&f.bbox, r.x_tl, r.y_tl, r.x_br, r.y_br).map(|bbox| {
                    let mut g = f.clone();
                    g.bbox = bbox;
                    g
                })
            })
            .collect();
        out.push(PictureRecord {
            picture_id: format!("{}#c{}", picture.picture_id, k + 1),
            burst_id: picture.burst_id.clone(),
            width: r.width(),
            height: r.height(),
            faces,
            label: None,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub constraints: SelectionConstraints,
    /// Add crop-cascade variants as candidates.
    pub crops: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            constraints: SelectionConstraints::default(),
            crops: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSelection {
    pub method: Method,
    pub candidates: usize,
    pub shortfall: BTreeMap<FaceCountCategory, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub entries: Vec<SelectionEntry>,
    pub methods: Vec<MethodSelection>,
}

/// Scores every picture (and crop) with each configured method and selects
/// the best per method. Only pictures a method judges good are candidates.
pub fn run_pipeline(
    pictures: &[PictureRecord],
    scorers: &Scorers,
    config: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    let methods = scorers.methods();
    if methods.is_empty() {
        return Err(PipelineError::NoMethods);
    }
    let expanded: Vec<PictureRecord> = if config.crops {
        pictures.iter().flat_map(expand_crops).collect()
    } else {
        pictures.to_vec()
    };
    let prepared = scorers.prepare(&expanded)?;
    let mut entries = Vec::new();
    let mut summaries = Vec::new();
    for method in methods {
        let mut candidates = Vec::new();
        for p in &prepared {
            let Some(category) = FaceCountCategory::from_count(p.faces.len()) else {
                continue;
            };
            let (passed, score) = scorers.score(method, p)?;
            if passed {
                candidates.push(ScoredPicture {
                    picture_id: p.picture_id.clone(),
                    burst_id: p.burst_id.clone(),
                    category,
                    score,
                });
            }
        }
        let selection = select_best(&candidates, &config.constraints).map_err(stage("selection"))?;
        entries.extend(selection_entries(&method.to_string(), &selection));
        summaries.push(MethodSelection {
            method,
            candidates: candidates.len(),
            shortfall: selection.shortfall,
        });
    }
    Ok(PipelineReport {
        entries,
        methods: summaries,
    })
}
