//! Abstract face-layout images and the picture classifier.
//!
//! Each picture is redrawn on a fixed 150x100 white canvas with one gray
//! rectangle per face at intensity `245 · r`. The 10-level gap above 245
//! keeps even a perfect face distinguishable from the background.
//!
//! Picture CNN chain on the 1x100x150 canvas:
//! conv 4x4/3 valid -> 8x33x49, conv 4x4/3 valid -> 20x10x16, flatten 3200,
//! then dense 1260, 100, 1.

use std::path::Path;

use thiserror::Error;

use crate::model::{Label, PictureRecord};
use crate::pgm::{GrayImage, PgmError};
use crate::tinynet::{train, LayerSpec, NetError, NetworkModel, Padding, Tensor, TrainConfig};

pub const PICTURE_CNN: &str = "picture_cnn";
pub const CANVAS_W: usize = 150;
pub const CANVAS_H: usize = 100;
pub const BACKGROUND: u8 = 255;
pub const MAX_FACE_INTENSITY: f64 = 245.0;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("picture {picture_id:?}: face {face_index} has no quality score")]
    UnscoredFace {
        picture_id: String,
        face_index: usize,
    },
    #[error("picture {picture_id:?}: face {face_index} score {score} outside [0, 1]")]
    ScoreRange {
        picture_id: String,
        face_index: usize,
        score: f64,
    },
    #[error("picture {picture_id:?}: face {face_index} lies outside the {width}x{height} image")]
    BoxOutside {
        picture_id: String,
        face_index: usize,
        width: u32,
        height: u32,
    },
    #[error("expected a {expected_w}x{expected_h} image, got {width}x{height}")]
    Size {
        expected_w: usize,
        expected_h: usize,
        width: usize,
        height: usize,
    },
    #[error("no labeled pictures")]
    NoLabeledPictures,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractImage {
    image: GrayImage,
}

impl AbstractImage {
    pub fn blank() -> Self {
        Self {
            image: GrayImage::new(CANVAS_W, CANVAS_H, BACKGROUND),
        }
    }

    pub fn from_gray(image: GrayImage) -> Result<Self, AbstractionError> {
        if image.width() != CANVAS_W || image.height() != CANVAS_H {
            return Err(AbstractionError::Size {
                expected_w: CANVAS_W,
                expected_h: CANVAS_H,
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(Self { image })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn pixels(&self) -> &[u8] {
        self.image.pixels()
    }

    pub fn as_gray(&self) -> &GrayImage {
        &self.image
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        self.image.encode_pgm()
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), AbstractionError> {
        Ok(self.image.write_pgm(path)?)
    }

    /// Network input: background 0, face pixels `1 - p/490`, i.e. 0.5 for the
    /// best face and 1 for the worst. A linear map would leave a best-quality
    /// face only 10/255 away from the background.
    pub fn to_input(&self) -> Tensor {
        let data = self
            .pixels()
            .iter()
            .map(|&p| {
                if p == BACKGROUND {
                    0.0
                } else {
                    1.0 - p as f64 / (2.0 * MAX_FACE_INTENSITY)
                }
            })
            .collect();
        Tensor::new(vec![1, CANVAS_H, CANVAS_W], data).expect("canvas tensor")
    }
}

/// Canvas intensity for face quality `r`, rounded half-to-even.
pub fn face_intensity(r: f64) -> u8 {
    (MAX_FACE_INTENSITY * r).round_ties_even() as u8
}

/// Canvas span `[floor(lo·n/size), ceil(hi·n/size))`, at least one pixel wide.
fn span(lo: u32, hi: u32, size: u32, n: usize) -> (usize, usize) {
    let scale = |v: u32| v as u64 * n as u64;
    let a = (scale(lo) / size as u64) as usize;
    let b = scale(hi).div_ceil(size as u64) as usize;
    let a = a.min(n - 1);
    (a, b.clamp(a + 1, n))
}

pub fn render_abstract(picture: &PictureRecord) -> Result<AbstractImage, AbstractionError> {
    let mut canvas = AbstractImage::blank();
    for (i, face) in picture.faces.iter().enumerate() {
        let r = face.score.ok_or_else(|| AbstractionError::UnscoredFace {
            picture_id: picture.picture_id.clone(),
            face_index: i,
        })?;
        if !(0.0..=1.0).contains(&r) {
            return Err(AbstractionError::ScoreRange {
                picture_id: picture.picture_id.clone(),
                face_index: i,
                score: r,
            });
        }
        if !face.bbox.fits_within(picture.width, picture.height) {
            return Err(AbstractionError::BoxOutside {
                picture_id: picture.picture_id.clone(),
                face_index: i,
                width: picture.width,
                height: picture.height,
            });
        }
        let value = face_intensity(r);
        let b = &face.bbox;
        let (x0, x1) = span(b.x_tl, b.x_br, picture.width, CANVAS_W);
        let (y0, y1) = span(b.y_tl, b.y_br, picture.height, CANVAS_H);
        for y in y0..y1 {
            for x in x0..x1 {
                if value < canvas.image.get(x, y) {
                    canvas.image.set(x, y, value);
                }
            }
        }
    }
    Ok(canvas)
}

pub fn build_picture_cnn(seed: u64) -> NetworkModel {
    let layers = vec![
        LayerSpec::conv(1, 8, (4, 4), 3, Padding::Valid),
        LayerSpec::LeakyReLU,
        LayerSpec::conv(8, 20, (4, 4), 3, Padding::Valid),
        LayerSpec::LeakyReLU,
        LayerSpec::Flatten,
        LayerSpec::dense(20 * 10 * 16, 1260),
        LayerSpec::LeakyReLU,
        LayerSpec::dense(1260, 100),
        LayerSpec::LeakyReLU,
        LayerSpec::dense(100, 1),
        LayerSpec::Sigmoid,
    ];
    NetworkModel::new(vec![1, CANVAS_H, CANVAS_W], layers, PICTURE_CNN, seed)
        .expect("picture CNN architecture")
}

/// Picture quality in `[0, 1]`; Good iff `>= 0.5`.
pub fn classify_picture(model: &NetworkModel, image: &AbstractImage) -> Result<f64, AbstractionError> {
    let expected = [1, image.height(), image.width()];
    if model.input_shape() != expected {
        let s = model.input_shape();
        return Err(AbstractionError::Size {
            expected_w: s.last().copied().unwrap_or(0),
            expected_h: s.get(1).copied().unwrap_or(0),
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(model.forward(&image.to_input())?)
}

fn labeled_samples(pictures: &[PictureRecord]) -> Result<Vec<(Tensor, f64)>, AbstractionError> {
    let mut out = Vec::new();
    for p in pictures {
        if let Some(label) = p.label {
            out.push((render_abstract(p)?.to_input(), label.target()));
        }
    }
    if out.is_empty() {
        return Err(AbstractionError::NoLabeledPictures);
    }
    Ok(out)
}

/// The picture flipped left-right and/or top-bottom. Face boxes are mirrored
/// in picture pixels, so the canvas rendering flips exactly.
pub fn mirrored(picture: &PictureRecord, horizontal: bool, vertical: bool) -> PictureRecord {
    let mut out = picture.clone();
    for face in &mut out.faces {
        let b = &mut face.bbox;
        if horizontal {
            (b.x_tl, b.x_br) = (picture.width - b.x_br, picture.width - b.x_tl);
        }
        if vertical {
            (b.y_tl, b.y_br) = (picture.height - b.y_br, picture.height - b.y_tl);
        }
    }
    out
}

/// Each picture followed by its three mirror images, labels kept. Only valid
/// when the label does not depend on which side of the frame a face is on.
pub fn with_mirrors(pictures: &[PictureRecord]) -> Vec<PictureRecord> {
    pictures
        .iter()
        .flat_map(|p| [(false, false), (true, false), (false, true), (true, true)].map(|(h, v)| mirrored(p, h, v)))
        .collect()
}

/// Renders the labeled pictures and trains a fresh Picture CNN on them.
/// With `mirror` the training set is expanded by [`with_mirrors`].
pub fn train_picture_cnn(
    pictures: &[PictureRecord],
    init_seed: u64,
    config: &TrainConfig,
    mirror: bool,
) -> Result<(NetworkModel, Vec<f64>), AbstractionError> {
    let samples = if mirror {
        labeled_samples(&with_mirrors(pictures))?
    } else {
        labeled_samples(pictures)?
    };
    let out = train(&build_picture_cnn(init_seed), &samples, config)?;
    Ok((out.model, out.loss_history))
}

pub fn evaluate_picture_model(
    model: &NetworkModel,
    pictures: &[PictureRecord],
) -> Result<f64, AbstractionError> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for p in pictures {
        let Some(label) = p.label else { continue };
        let good = classify_picture(model, &render_abstract(p)?)? >= 0.5;
        total += 1;
        hits += usize::from(Label::from_good(good) == label);
    }
    if total == 0 {
        return Err(AbstractionError::NoLabeledPictures);
    }
    Ok(hits as f64 / total as f64)
}
