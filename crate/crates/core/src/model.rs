//! Domain types for pictures and detected faces, JSON Lines ingest and
//! burst-atomic dataset splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pgm::{GrayImage, PgmError};

/// Face crops smaller than this in either dimension are discarded at ingest.
pub const MIN_FACE_SIDE: usize = 30;

/// Pictures narrower or shorter than this are rejected at ingest.
pub const MIN_PICTURE_SIDE: u32 = 2;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate picture_id {0:?}")]
    DuplicatePictureId(String),
    #[error("invalid split ratios: {0}")]
    Ratios(String),
    #[error("picture {0:?} has no faces")]
    NoFaces(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("face image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[serde(alias = "Good", alias = "GOOD")]
    Good,
    #[serde(alias = "Bad", alias = "BAD")]
    Bad,
}

impl Label {
    pub fn from_good(good: bool) -> Self {
        if good {
            Label::Good
        } else {
            Label::Bad
        }
    }

    pub fn is_good(self) -> bool {
        self == Label::Good
    }

    /// Training target: 1.0 for good, 0.0 for bad.
    pub fn target(self) -> f64 {
        if self.is_good() {
            1.0
        } else {
            0.0
        }
    }
}

/// Face bounding box in pixel coordinates, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_tl: u32,
    pub y_tl: u32,
    pub x_br: u32,
    pub y_br: u32,
}

impl BoundingBox {
    pub fn new(x_tl: u32, y_tl: u32, x_br: u32, y_br: u32) -> Result<Self, DatasetError> {
        if x_tl >= x_br || y_tl >= y_br {
            return Err(DatasetError::InvalidBox(format!(
                "({x_tl},{y_tl})-({x_br},{y_br}) is degenerate"
            )));
        }
        Ok(Self {
            x_tl,
            y_tl,
            x_br,
            y_br,
        })
    }

    pub fn width(&self) -> u32 {
        self.x_br - self.x_tl
    }

    pub fn height(&self) -> u32 {
        self.y_br - self.y_tl
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x_br <= width && self.y_br <= height
    }
}

/// The nine per-face descriptors: head orientation in degrees, emotion
/// likelihoods in `[0, 1]` and image-quality scores in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceFeatures {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub joy: f64,
    pub sorrow: f64,
    pub anger: f64,
    pub surprise: f64,
    pub exposure: f64,
    pub blur: f64,
}

impl FaceFeatures {
    pub const COUNT: usize = 9;
    pub const NAMES: [&'static str; 9] = [
        "roll", "pitch", "yaw", "joy", "sorrow", "anger", "surprise", "exposure", "blur",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.roll,
            self.pitch,
            self.yaw,
            self.joy,
            self.sorrow,
            self.anger,
            self.surprise,
            self.exposure,
            self.blur,
        ]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        Self {
            roll: v[0],
            pitch: v[1],
            yaw: v[2],
            joy: v[3],
            sorrow: v[4],
            anger: v[5],
            surprise: v[6],
            exposure: v[7],
            blur: v[8],
        }
    }

    /// Checks finiteness and the angle range, and clamps the six unit-range
    /// components into `[0, 1]`.
    pub fn sanitized(&self) -> Option<Self> {
        let v = self.to_array();
        if v.iter().any(|c| !c.is_finite()) {
            return None;
        }
        if v[..3].iter().any(|a| !(-180.0..=180.0).contains(a)) {
            return None;
        }
        let mut out = v;
        for c in &mut out[3..] {
            *c = c.clamp(0.0, 1.0);
        }
        Some(Self::from_array(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation {
    pub bbox: BoundingBox,
    pub features: FaceFeatures,
    pub face_image: Option<GrayImage>,
    /// Source path of `face_image`, kept so a dataset can be written back out.
    pub face_image_path: Option<String>,
    pub label: Option<Label>,
    /// Face quality score in `[0, 1]`, filled in by a face-quality model.
    pub score: Option<f64>,
}

impl FaceObservation {
    pub fn new(bbox: BoundingBox, features: FaceFeatures) -> Self {
        Self {
            bbox,
            features,
            face_image: None,
            face_image_path: None,
            label: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PictureRecord {
    pub picture_id: String,
    pub burst_id: String,
    pub width: u32,
    pub height: u32,
    pub faces: Vec<FaceObservation>,
    pub label: Option<Label>,
}

impl PictureRecord {
    /// Image center `(width / 2, height / 2)`.
    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn category(&self) -> Result<FaceCountCategory, DatasetError> {
        face_count_category(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaceCountCategory {
    One,
    Two,
    ThreePlus,
}

impl FaceCountCategory {
    pub const ALL: [FaceCountCategory; 3] = [Self::One, Self::Two, Self::ThreePlus];

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1 => Some(Self::One),
            2 => Some(Self::Two),
            _ => Some(Self::ThreePlus),
        }
    }
}

impl fmt::Display for FaceCountCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "one",
            Self::Two => "two",
            Self::ThreePlus => "three_plus",
        })
    }
}

pub fn face_count_category(picture: &PictureRecord) -> Result<FaceCountCategory, DatasetError> {
    FaceCountCategory::from_count(picture.faces.len())
        .ok_or_else(|| DatasetError::NoFaces(picture.picture_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<PictureRecord>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<PictureRecord>, provenance: impl Into<String>) -> Self {
        Self {
            records,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_raw(&self) -> Vec<RawPictureRecord> {
        self.records.iter().map(RawPictureRecord::from).collect()
    }

    /// Serializes every record as one JSON object per line (LF-terminated).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for raw in self.to_raw() {
            out.push_str(&serde_json::to_string(&raw).expect("record serialization"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }

    /// Reads and validates a JSON Lines dataset. Relative face image paths
    /// resolve against the file's directory unless `opts.image_root` is set.
    pub fn read_jsonl(
        path: impl AsRef<Path>,
        opts: &IngestOptions,
    ) -> Result<(Dataset, IngestReport), DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        let raw = parse_jsonl(&text)?;
        let mut opts = opts.clone();
        if opts.image_root.is_none() {
            opts.image_root = path.parent().map(Path::to_path_buf);
        }
        if opts.provenance.is_empty() {
            opts.provenance = path.display().to_string();
        }
        validate_dataset(raw, &opts)
    }
}

/// Cloud-style likelihood, either a number or one of the five named levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Likelihood {
    Value(f64),
    Level(String),
}

impl Likelihood {
    /// `VERY_UNLIKELY..VERY_LIKELY` map to `0, 0.25, 0.5, 0.75, 1`.
    pub fn to_value(&self) -> Option<f64> {
        match self {
            Likelihood::Value(v) => Some(*v),
            Likelihood::Level(s) => match s.as_str() {
                "VERY_UNLIKELY" => Some(0.0),
                "UNLIKELY" => Some(0.25),
                "POSSIBLE" => Some(0.5),
                "LIKELY" => Some(0.75),
                "VERY_LIKELY" => Some(1.0),
                _ => None,
            },
        }
    }
}

impl From<f64> for Likelihood {
    fn from(v: f64) -> Self {
        Likelihood::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBox {
    pub x_tl: i64,
    pub y_tl: i64,
    pub x_br: i64,
    pub y_br: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub joy: Likelihood,
    pub sorrow: Likelihood,
    pub anger: Likelihood,
    pub surprise: Likelihood,
    pub exposure: f64,
    pub blur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFace {
    pub bbox: RawBox,
    pub features: RawFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Already-decoded raster; when present the path is not re-read.
    #[serde(skip)]
    pub face_image: Option<GrayImage>,
}

/// One line of the dataset file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPictureRecord {
    pub picture_id: String,
    pub burst_id: String,
    pub width: i64,
    pub height: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub faces: Vec<RawFace>,
}

impl From<&PictureRecord> for RawPictureRecord {
    fn from(p: &PictureRecord) -> Self {
        let faces = p
            .faces
            .iter()
            .map(|f| RawFace {
                bbox: RawBox {
                    x_tl: f.bbox.x_tl as i64,
                    y_tl: f.bbox.y_tl as i64,
                    x_br: f.bbox.x_br as i64,
                    y_br: f.bbox.y_br as i64,
                },
                features: RawFeatures {
                    roll: f.features.roll,
                    pitch: f.features.pitch,
                    yaw: f.features.yaw,
                    joy: f.features.joy.into(),
                    sorrow: f.features.sorrow.into(),
                    anger: f.features.anger.into(),
                    surprise: f.features.surprise.into(),
                    exposure: f.features.exposure,
                    blur: f.features.blur,
                },
                label: f.label,
                face_image_path: f.face_image_path.clone(),
                score: f.score,
                face_image: f.face_image.clone(),
            })
            .collect();
        RawPictureRecord {
            picture_id: p.picture_id.clone(),
            burst_id: p.burst_id.clone(),
            width: p.width as i64,
            height: p.height as i64,
            label: p.label,
            faces,
        }
    }
}

/// Parses JSON Lines text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(text: &str) -> Result<Vec<RawPictureRecord>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Keep pictures whose face list is empty after filtering.
    pub keep_faceless: bool,
    /// Directory that relative `face_image_path` values resolve against.
    pub image_root: Option<PathBuf>,
    pub provenance: String,
}

/// Counts of what validation removed, keyed by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_in: usize,
    pub records_kept: usize,
    pub records_dropped: BTreeMap<String, usize>,
    pub faces_dropped: BTreeMap<String, usize>,
}

impl IngestReport {
    pub fn total_records_dropped(&self) -> usize {
        self.records_dropped.values().sum()
    }

    pub fn total_faces_dropped(&self) -> usize {
        self.faces_dropped.values().sum()
    }
}

enum FaceOutcome {
    Keep(FaceObservation),
    DropFace(&'static str),
    RejectRecord(&'static str),
}

fn validate_face(
    face: RawFace,
    width: u32,
    height: u32,
    opts: &IngestOptions,
) -> Result<FaceOutcome, DatasetError> {
    let b = &face.bbox;
    if [b.x_tl, b.y_tl, b.x_br, b.y_br].iter().any(|c| *c < 0) {
        return Ok(FaceOutcome::RejectRecord("negative_bbox"));
    }
    let Ok(bbox) = BoundingBox::new(b.x_tl as u32, b.y_tl as u32, b.x_br as u32, b.y_br as u32)
    else {
        return Ok(FaceOutcome::RejectRecord("degenerate_bbox"));
    };
    if b.x_br > width as i64 || b.y_br > height as i64 {
        return Ok(FaceOutcome::RejectRecord("bbox_outside_image"));
    }
    let f = &face.features;
    let likelihoods = [&f.joy, &f.sorrow, &f.anger, &f.surprise].map(Likelihood::to_value);
    let [Some(joy), Some(sorrow), Some(anger), Some(surprise)] = likelihoods else {
        return Ok(FaceOutcome::RejectRecord("unknown_likelihood"));
    };
    let Some(features) = (FaceFeatures {
        roll: f.roll,
        pitch: f.pitch,
        yaw: f.yaw,
        joy,
        sorrow,
        anger,
        surprise,
        exposure: f.exposure,
        blur: f.blur,
    })
    .sanitized() else {
        return Ok(FaceOutcome::RejectRecord("invalid_features"));
    };
    if let Some(s) = face.score {
        if !(0.0..=1.0).contains(&s) {
            return Ok(FaceOutcome::RejectRecord("invalid_score"));
        }
    }

    let face_image = match (face.face_image, &face.face_image_path) {
        (Some(img), _) => Some(img),
        (None, Some(rel)) => {
            let path = match &opts.image_root {
                Some(root) => root.join(rel),
                None => PathBuf::from(rel),
            };
            Some(
                GrayImage::read_pgm(&path)
                    .map_err(|source| DatasetError::Image { path, source })?,
            )
        }
        (None, None) => None,
    };
    if let Some(img) = &face_image {
        if img.width() < MIN_FACE_SIDE || img.height() < MIN_FACE_SIDE {
            return Ok(FaceOutcome::DropFace("undersized_face_image"));
        }
    }

    Ok(FaceOutcome::Keep(FaceObservation {
        bbox,
        features,
        face_image,
        face_image_path: face.face_image_path,
        label: face.label,
        score: face.score,
    }))
}

/// Validates parsed records.
///
/// Records that break a type invariant are dropped and counted. Faces with an
/// undersized image are dropped individually; a picture left without faces is
/// dropped unless `keep_faceless` is set. Duplicate picture ids are a hard
/// error.
pub fn validate_dataset(
    raw: Vec<RawPictureRecord>,
    opts: &IngestOptions,
) -> Result<(Dataset, IngestReport), DatasetError> {
    let mut report = IngestReport {
        records_in: raw.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.len());

    'records: for rec in raw {
        if !seen.insert(rec.picture_id.clone()) {
            return Err(DatasetError::DuplicatePictureId(rec.picture_id));
        }
        let mut reject = |reason: &str| {
            *report.records_dropped.entry(reason.to_owned()).or_default() += 1;
        };
        if rec.burst_id.is_empty() {
            reject("empty_burst_id");
            continue;
        }
        if rec.width < MIN_PICTURE_SIDE as i64
            || rec.height < MIN_PICTURE_SIDE as i64
            || rec.width > u32::MAX as i64
            || rec.height > u32::MAX as i64
        {
            reject("invalid_dimensions");
            continue;
        }
        let (width, height) = (rec.width as u32, rec.height as u32);

        let mut faces = Vec::with_capacity(rec.faces.len());
        let mut face_drops: Vec<&'static str> = Vec::new();
        for face in rec.faces {
            match validate_face(face, width, height, opts)? {
                FaceOutcome::Keep(f) => faces.push(f),
                FaceOutcome::DropFace(reason) => face_drops.push(reason),
                FaceOutcome::RejectRecord(reason) => {
                    reject(reason);
                    continue 'records;
                }
            }
        }
        for reason in face_drops {
            *report.faces_dropped.entry(reason.to_owned()).or_default() += 1;
        }
        if faces.is_empty() && !opts.keep_faceless {
            reject("no_faces");
            continue;
        }
        records.push(PictureRecord {
            picture_id: rec.picture_id,
            burst_id: rec.burst_id,
            width,
            height,
            faces,
            label: rec.label,
        });
    }
    report.records_kept = records.len();
    Ok((Dataset::new(records, opts.provenance.clone()), report))
}

/// Split proportions for (train, test, validation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            test: 0.1,
            validation: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, test: f64, validation: f64) -> Result<Self, DatasetError> {
        let r = Self {
            train,
            test,
            validation,
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), DatasetError> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(DatasetError::Ratios(format!(
                "{parts:?} must be finite and nonnegative"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Ratios(format!("{parts:?} sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
}

/// Randomly partitions the dataset, keeping every burst inside one partition.
///
/// Pictures are ordered by `picture_id`, bursts by their first picture, and
/// the burst order is shuffled with a ChaCha8 stream seeded from `seed`. Each
/// burst then goes to the partition with the largest remaining shortfall
/// against its target size (ties: train, test, validation).
pub fn split_dataset(
    dataset: &Dataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    ratios.check()?;
    let mut order: Vec<&PictureRecord> = dataset.records.iter().collect();
    order.sort_by(|a, b| a.picture_id.cmp(&b.picture_id));

    let mut burst_index: HashMap<&str, usize> = HashMap::new();
    let mut bursts: Vec<Vec<&PictureRecord>> = Vec::new();
    for rec in order {
        let idx = *burst_index.entry(rec.burst_id.as_str()).or_insert_with(|| {
            bursts.push(Vec::new());
            bursts.len() - 1
        });
        bursts[idx].push(rec);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bursts.shuffle(&mut rng);

    let n = dataset.len() as f64;
    let n_test = (ratios.test * n).round() as i64;
    let n_val = (ratios.validation * n).round() as i64;
    let n_train = dataset.len() as i64 - n_test - n_val;
    let targets = [n_train, n_test, n_val];

    let mut parts: [Vec<PictureRecord>; 3] = Default::default();
    for burst in bursts {
        let slot = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] - parts[a].len() as i64;
                let db = targets[b] - parts[b].len() as i64;
                // earlier slot wins ties
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("three partitions");
        parts[slot].extend(burst.into_iter().cloned());
    }
    for p in &mut parts {
        p.sort_by(|a, b| a.picture_id.cmp(&b.picture_id));
    }
    let [train, test, validation] = parts;
    let prov = |name: &str| format!("{}#{name}(seed={seed})", dataset.provenance);
    Ok(DatasetSplit {
        train: Dataset::new(train, prov("train")),
        test: Dataset::new(test, prov("test")),
        validation: Dataset::new(validation, prov("validation")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features() -> FaceFeatures {
        FaceFeatures::from_array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.1])
    }

    fn picture(id: &str, burst: &str, faces: usize) -> PictureRecord {
        PictureRecord {
            picture_id: id.into(),
            burst_id: burst.into(),
            width: 600,
            height: 400,
            faces: (0..faces)
                .map(|i| {
                    let x = 10 + 100 * i as u32;
                    FaceObservation::new(BoundingBox::new(x, 10, x + 50, 60).unwrap(), features())
                })
                .collect(),
            label: Some(Label::Good),
        }
    }

    const LINE: &str = r#"{"picture_id":"p1","burst_id":"b1","width":600,"height":400,"label":"good","faces":[{"bbox":{"x_tl":10,"y_tl":20,"x_br":110,"y_br":140},"features":{"roll":1.5,"pitch":-2.0,"yaw":10.0,"joy":"VERY_LIKELY","sorrow":0.0,"anger":"UNLIKELY","surprise":0.5,"exposure":0.4,"blur":0.1},"label":"good"}]}"#;

    #[test]
    fn parses_and_maps_likelihood_levels() {
        let raw = parse_jsonl(LINE).unwrap();
        let (ds, report) = validate_dataset(raw, &IngestOptions::default()).unwrap();
        assert_eq!(report.records_kept, 1);
        let f = &ds.records[0].faces[0].features;
        assert_eq!(f.joy, 1.0);
        assert_eq!(f.anger, 0.25);
        assert_eq!(ds.records[0].label, Some(Label::Good));
    }

    #[test]
    fn parse_error_names_line() {
        let text = format!("{LINE}\n\n{{not json\n");
        match parse_jsonl(&text) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_an_error() {
        let raw = parse_jsonl(&format!("{LINE}\n{LINE}\n")).unwrap();
        assert!(matches!(
            validate_dataset(raw, &IngestOptions::default()),
            Err(DatasetError::DuplicatePictureId(id)) if id == "p1"
        ));
    }

    #[test]
    fn undersized_face_image_is_dropped() {
        let mut raw = parse_jsonl(LINE).unwrap();
        raw[0].faces[0].face_image = Some(GrayImage::new(20, 20, 128));
        let mut second = raw[0].faces[0].clone();
        second.face_image = Some(GrayImage::new(40, 30, 128));
        raw[0].faces.push(second);
        let (ds, report) = validate_dataset(raw, &IngestOptions::default()).unwrap();
        assert_eq!(ds.records[0].faces.len(), 1);
        assert_eq!(report.faces_dropped["undersized_face_image"], 1);
    }

    #[test]
    fn faceless_pictures_need_opt_in() {
        let mut raw = parse_jsonl(LINE).unwrap();
        raw[0].faces[0].face_image = Some(GrayImage::new(20, 20, 0));
        let (ds, report) = validate_dataset(raw.clone(), &IngestOptions::default()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(report.records_dropped["no_faces"], 1);
        let opts = IngestOptions {
            keep_faceless: true,
            ..Default::default()
        };
        let (ds, _) = validate_dataset(raw, &opts).unwrap();
        assert_eq!(ds.records[0].faces.len(), 0);
    }

    #[test]
    fn degenerate_box_rejects_record() {
        let mut raw = parse_jsonl(LINE).unwrap();
        raw[0].faces[0].bbox.x_br = raw[0].faces[0].bbox.x_tl;
        let (ds, report) = validate_dataset(raw, &IngestOptions::default()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(report.records_dropped["degenerate_bbox"], 1);
    }

    #[test]
    fn out_of_range_inputs_reject_record() {
        for mutate in [
            (|r: &mut RawPictureRecord| r.faces[0].bbox.x_br = 601) as fn(&mut RawPictureRecord),
            |r| r.faces[0].features.yaw = 200.0,
            |r| r.faces[0].features.roll = f64::NAN,
            |r| r.faces[0].features.joy = Likelihood::Level("MAYBE".into()),
            |r| r.width = 1,
            |r| r.burst_id.clear(),
        ] {
            let mut raw = parse_jsonl(LINE).unwrap();
            mutate(&mut raw[0]);
            let (ds, report) = validate_dataset(raw, &IngestOptions::default()).unwrap();
            assert!(ds.is_empty());
            assert_eq!(report.total_records_dropped(), 1);
        }
    }

    #[test]
    fn unit_range_features_are_clamped() {
        let mut raw = parse_jsonl(LINE).unwrap();
        raw[0].faces[0].features.exposure = 1.7;
        raw[0].faces[0].features.sorrow = Likelihood::Value(-0.2);
        let (ds, _) = validate_dataset(raw, &IngestOptions::default()).unwrap();
        let f = ds.records[0].faces[0].features;
        assert_eq!((f.exposure, f.sorrow), (1.0, 0.0));
    }

    #[test]
    fn well_formed_record_passes_unchanged() {
        let ds = Dataset::new(vec![picture("a", "b", 2)], "mem");
        let (again, report) = validate_dataset(ds.to_raw(), &IngestOptions::default()).unwrap();
        assert_eq!(report.total_records_dropped(), 0);
        assert_eq!(again.records, ds.records);
    }

    #[test]
    fn jsonl_round_trip_is_stable() {
        let ds = Dataset::new(
            vec![picture("a", "b1", 1), picture("b", "b1", 3)],
            "mem",
        );
        let text = ds.to_jsonl();
        let (back, _) =
            validate_dataset(parse_jsonl(&text).unwrap(), &IngestOptions::default()).unwrap();
        assert_eq!(back.records, ds.records);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn categories() {
        assert_eq!(face_count_category(&picture("a", "b", 1)).unwrap(), FaceCountCategory::One);
        assert_eq!(face_count_category(&picture("a", "b", 2)).unwrap(), FaceCountCategory::Two);
        assert_eq!(
            face_count_category(&picture("a", "b", 5)).unwrap(),
            FaceCountCategory::ThreePlus
        );
        assert!(matches!(
            face_count_category(&picture("a", "b", 0)),
            Err(DatasetError::NoFaces(_))
        ));
    }

    fn singleton_bursts(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| picture(&format!("p{i:03}"), &format!("b{i:03}"), 1))
                .collect(),
            "mem",
        )
    }

    #[test]
    fn split_sizes_follow_ratios() {
        let s = split_dataset(&singleton_bursts(100), SplitRatios::default(), 7).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.validation.len()), (80, 10, 10));
        let again = split_dataset(&singleton_bursts(100), SplitRatios::default(), 7).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn single_burst_stays_together() {
        let ds = Dataset::new(
            (0..10).map(|i| picture(&format!("p{i}"), "only", 1)).collect(),
            "mem",
        );
        let s = split_dataset(&ds, SplitRatios::default(), 3).unwrap();
        let sizes = [s.train.len(), s.test.len(), s.validation.len()];
        assert!(sizes.contains(&10));
        assert_eq!(sizes.iter().sum::<usize>(), 10);
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitRatios::new(0.8, 0.1, 0.2).is_err());
        let bad = SplitRatios {
            train: 0.5,
            test: 0.1,
            validation: 0.1,
        };
        assert!(matches!(
            split_dataset(&singleton_bursts(4), bad, 0),
            Err(DatasetError::Ratios(_))
        ));
    }

    proptest! {
        #[test]
        fn split_is_a_burst_atomic_partition(
            bursts in proptest::collection::vec(1usize..6, 1..40),
            seed in any::<u64>(),
        ) {
            let mut records = Vec::new();
            for (b, size) in bursts.iter().enumerate() {
                for k in 0..*size {
                    records.push(picture(&format!("p{b}_{k}"), &format!("b{b}"), 1));
                }
            }
            let ds = Dataset::new(records, "prop");
            let s = split_dataset(&ds, SplitRatios::default(), seed).unwrap();
            let mut ids: Vec<&str> = [&s.train, &s.test, &s.validation]
                .iter()
                .flat_map(|d| d.records.iter().map(|r| r.picture_id.as_str()))
                .collect();
            ids.sort();
            let mut expected: Vec<&str> = ds.records.iter().map(|r| r.picture_id.as_str()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
            let part_of = |burst: &str| {
                [&s.train, &s.test, &s.validation]
                    .iter()
                    .position(|d| d.records.iter().any(|r| r.burst_id == burst))
            };
            for part in [&s.train, &s.test, &s.validation] {
                for r in &part.records {
                    let home = part_of(&r.burst_id);
                    prop_assert!(home.is_some());
                    prop_assert_eq!(
                        [&s.train, &s.test, &s.validation]
                            .iter()
                            .filter(|d| d.records.iter().any(|x| x.burst_id == r.burst_id))
                            .count(),
                        1
                    );
                }
            }
        }

        #[test]
        fn validation_is_idempotent(n in 1usize..6, faces in 0usize..4, keep in any::<bool>()) {
            let records = (0..n).map(|i| picture(&format!("p{i}"), "b", faces)).collect();
            let opts = IngestOptions { keep_faceless: keep, ..Default::default() };
            let (once, _) = validate_dataset(Dataset::new(records, "p").to_raw(), &opts).unwrap();
            let (twice, report) = validate_dataset(once.to_raw(), &opts).unwrap();
            prop_assert_eq!(&once.records, &twice.records);
            prop_assert_eq!(report.total_records_dropped(), 0);
        }
    }
}
